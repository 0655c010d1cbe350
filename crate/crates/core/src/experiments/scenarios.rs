use crate::error::{Error, Result};
use crate::linalg::{
    self, derive_seed, dft_matrix, expm, matrix_power, random_contraction_generator, random_unit_vector,
    random_unitary, spectral_norm, OperatorMatrix, VectorState, C64,
};
use crate::product_formula::{
    cyclic_generator, cyclic_product, decoupling_limit, decoupling_product, ordered_product, per_vector_error,
    two_unitary_generator, two_unitary_product, zeno_limit, zeno_product,
};
use crate::semigroup::{projected_generator, GeneratorMethod, OneParameterFamily};
use crate::superop::{exact_pinching_projector, ContractionMap, ErgodicProjector};

use super::bounds::{run_bounds_suite, RESIDUAL_FACTOR};
use super::config::{matrix_from_spec, ExperimentConfig, Scenario};
use super::parallel::{default_workers, map_ordered, unix_timestamp, Stopwatch};
use super::report::{ConvergenceReport, ReportMetadata, ReportRow};

/// Unit vectors used for the per-vector error column.
pub const PROBE_VECTORS: usize = 10;

const GOLDEN_CONJUGATE: f64 = 0.618_033_988_749_894_9;

const STREAM_X: u64 = 11;
const STREAM_X2: u64 = 12;
const STREAM_U1: u64 = 21;
const STREAM_U2: u64 = 22;
const STREAM_U3: u64 = 23;
const STREAM_PROBES: u64 = 31;

/// How the finite-`n` operator of a scenario is produced.
#[derive(Debug, Clone)]
pub enum Evaluator {
    /// `Π(V_s)···Π^k(V_s)`.
    Iterated {
        map: ContractionMap,
        family: OneParameterFamily,
    },
    Decoupling {
        u: OperatorMatrix,
        x: OperatorMatrix,
    },
    Cyclic {
        us: Vec<OperatorMatrix>,
        x: OperatorMatrix,
    },
    /// Corrected two-unitary product.
    TwoUnitary {
        u1: OperatorMatrix,
        u2: OperatorMatrix,
        x: OperatorMatrix,
    },
    Zeno {
        p: OperatorMatrix,
        x: OperatorMatrix,
    },
}

impl Evaluator {
    /// The product with `k` factors and step `step`.
    pub fn evaluate(&self, k: usize, step: f64) -> Result<OperatorMatrix> {
        let t = k as f64 * step;
        match self {
            Evaluator::Iterated { map, family } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("n must be at least 1".into()));
                }
                ordered_product(map, &family.evaluate(step)?, k)
            }
            Evaluator::Decoupling { u, x } => decoupling_product(u, x, t, k),
            Evaluator::Cyclic { us, x } => cyclic_product(us, x, t, k),
            Evaluator::TwoUnitary { u1, u2, x } => Ok(two_unitary_product(u1, u2, x, t, k)?.corrected),
            Evaluator::Zeno { p, x } => zeno_product(p, x, t, k),
        }
    }
}

/// A built scenario: its evaluator and the limit operator at time `t`.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub evaluator: Evaluator,
    pub limit: OperatorMatrix,
    pub notes: Vec<String>,
}

fn generator(config: &ExperimentConfig, d: usize, stream: u64) -> OperatorMatrix {
    random_contraction_generator(d, derive_seed(config.seed, stream))
}

fn unitary(config: &ExperimentConfig, d: usize, stream: u64) -> OperatorMatrix {
    random_unitary(d, derive_seed(config.seed, stream))
}

/// `diag(e^{2πi·jφ})` with `φ` the golden ratio conjugate.
pub fn golden_phase_unitary(d: usize) -> OperatorMatrix {
    OperatorMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (i as f64 * GOLDEN_CONJUGATE).fract())
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Orthogonal projector onto the span of the first `⌈d/2⌉` columns of a
/// seeded unitary.
pub fn zeno_projector(d: usize, seed: u64) -> OperatorMatrix {
    let w = random_unitary(d, seed);
    let cols = w.columns(0, d.div_ceil(2));
    cols * cols.adjoint()
}

/// Builds the evaluator and limit of a convergence scenario.
pub fn build_scenario(config: &ExperimentConfig) -> Result<ScenarioSetup> {
    let d = config.operator_dim();
    let t = config.t;
    let tol = &config.tolerances;
    let mut notes = Vec::new();
    let (evaluator, limit) = match config.scenario {
        Scenario::Example1Dft => {
            let f = dft_matrix(d);
            let order_defect = linalg::norm(&(matrix_power(&f, 4) - linalg::identity(d)));
            let map = ContractionMap::unitary_conjugation(f.clone())?;
            let projector = ErgodicProjector::finite_mean(&map, 4)?;
            let pinching = exact_pinching_projector(&f, tol.cluster_tol)?;
            let x = generator(config, d, STREAM_X);
            let a = projector.apply(&x)?;
            let disagreement = linalg::norm(&(&a - pinching.apply(&x)?));
            notes.push(format!("‖F⁴ − 𝟙‖ = {order_defect:e}"));
            notes.push(format!("4-term mean projector residual = {:e}", projector.residual()));
            notes.push(format!("‖4-term mean(x) − pinching(x)‖ = {disagreement:e}"));
            notes.push(
                "the discrete projector is reported; on C^d it is not the identity, unlike the \
                 translation/multiplication pair on L²(ℝ) where P(V_t) = 𝟙"
                    .into(),
            );
            let family = OneParameterFamily::exp(x)?;
            (Evaluator::Iterated { map, family }, expm(&a, t)?)
        }
        Scenario::Example2Blocks => {
            let d0 = config.dim;
            let x1 = generator(config, d0, STREAM_X);
            let x2 = generator(config, d0, STREAM_X2);
            let family = OneParameterFamily::block_mix(x1, x2)?;
            let map = ContractionMap::block_sign_flip(d)?;
            let projector = map
                .exact_projector(tol.cluster_tol)
                .expect("the block sign flip has a closed-form projector")?;
            let a = projected_generator(&family, &projector, GeneratorMethod::Exact)?.a;
            let limit = expm(&a, t)?;
            let off = linalg::norm(&limit.view((0, d0), (d0, d0)).into_owned())
                .max(linalg::norm(&limit.view((d0, 0), (d0, d0)).into_owned()));
            notes.push(format!("largest off-diagonal block of the limit: {off:e}"));
            (Evaluator::Iterated { map, family }, limit)
        }
        Scenario::Example3TwoUnitaries => {
            let u1 = unitary(config, d, STREAM_U1);
            let u2 = unitary(config, d, STREAM_U2);
            let x = generator(config, d, STREAM_X);
            let a = two_unitary_generator(&u1, &u2, &x, tol.cluster_tol)?;
            let u = &u1 * &u2;
            notes.push(format!("‖u₁u₂ − 𝟙‖ = {:e}", linalg::norm(&(u - linalg::identity(d)))));
            notes.push("odd n are rejected: the sequence has period 2".into());
            (Evaluator::TwoUnitary { u1, u2, x }, expm(&a, t)?)
        }
        Scenario::Decoupling => {
            let u = golden_phase_unitary(d);
            let x = generator(config, d, STREAM_X);
            let limit = decoupling_limit(&u, &x, t, tol.cluster_tol)?;
            (Evaluator::Decoupling { u, x }, limit)
        }
        Scenario::Cyclic => {
            let u1 = unitary(config, d, STREAM_U1);
            let u2 = unitary(config, d, STREAM_U2);
            let u3 = unitary(config, d, STREAM_U3);
            let u4 = (&u1 * &u2 * &u3).adjoint();
            let us = vec![u1, u2, u3, u4];
            let x = generator(config, d, STREAM_X);
            let a = cyclic_generator(&us, &x)?;
            notes.push("cycle length 4; n not divisible by 4 is rejected".into());
            (Evaluator::Cyclic { us, x }, expm(&a, t)?)
        }
        Scenario::Zeno => {
            let p = zeno_projector(d, derive_seed(config.seed, STREAM_U1));
            let x = generator(config, d, STREAM_X);
            let limit = zeno_limit(&p, &x, t)?;
            notes.push(format!(
                "projector rank {}; the compression is not unital, so the convergence theorem does not apply",
                d.div_ceil(2)
            ));
            (Evaluator::Zeno { p, x }, limit)
        }
        Scenario::Custom => {
            let custom = config.custom.clone().unwrap_or_default();
            let u = match &custom.unitary {
                Some(spec) => matrix_from_spec(spec, "unitary")?,
                None => unitary(config, d, STREAM_U1),
            };
            let x = match &custom.generator {
                Some(spec) => matrix_from_spec(spec, "generator")?,
                None => generator(config, d, STREAM_X),
            };
            let map = ContractionMap::unitary_conjugation(u.clone())?;
            let projector = exact_pinching_projector(&u, tol.cluster_tol)?;
            let a = projector.apply(&x)?;
            let family = OneParameterFamily::exp(x)?;
            (Evaluator::Iterated { map, family }, expm(&a, t)?)
        }
        Scenario::BoundsSuite => {
            return Err(Error::InvalidArgument(
                "bounds-suite has no convergence evaluator".into(),
            ));
        }
    };
    Ok(ScenarioSetup {
        evaluator,
        limit,
        notes,
    })
}

/// Seeded unit vectors for the per-vector error column.
pub fn probe_vectors(d: usize, seed: u64) -> Vec<VectorState> {
    let base = derive_seed(seed, STREAM_PROBES);
    (0..PROBE_VECTORS as u64)
        .map(|i| random_unit_vector(d, derive_seed(base, i)))
        .collect()
}

fn convergence_row(setup: &ScenarioSetup, probes: &[VectorState], k: usize, step: f64) -> ReportRow {
    let clock = Stopwatch::start();
    let outcome = setup.evaluator.evaluate(k, step).and_then(|product| {
        let diff = &product - &setup.limit;
        let err = spectral_norm(&diff)?;
        let per_vector = per_vector_error(&product, &setup.limit, probes);
        if !(err.is_finite() && per_vector.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok((err, per_vector))
    });
    let (norm_error, per_vector_max_error, failure) = match outcome {
        Ok((e, v)) => (Some(e), Some(v), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    ReportRow {
        n: k,
        t_n: step,
        norm_error,
        per_vector_max_error,
        bound_value: None,
        wall_time_s: clock.seconds(),
        failure,
    }
}

fn metadata(config: &ExperimentConfig, notes: Vec<String>) -> ReportMetadata {
    ReportMetadata {
        scenario: config.scenario,
        dim: config.dim,
        seed: config.seed,
        t: config.t,
        timestamp: unix_timestamp(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        notes,
    }
}

/// Runs a sweep on the default number of workers.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_scenario_with_workers(config, default_workers())
}

/// Runs a sweep with rows spread over `workers` threads. The rows do not
/// depend on `workers`.
pub fn run_scenario_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport> {
    config.validate()?;
    if config.scenario == Scenario::BoundsSuite {
        return run_bounds_report(config, workers);
    }
    let setup = build_scenario(config)?;
    let probes = probe_vectors(config.operator_dim(), config.seed);
    let mut pairs = config.row_pairs();
    pairs.sort_by_key(|&(k, _)| k);
    let rows = map_ordered(&pairs, workers, |&(k, step)| convergence_row(&setup, &probes, k, step));
    for row in rows.iter().filter(|r| r.failed()) {
        log::warn!(
            "{}: row n = {} failed: {}",
            config.scenario,
            row.n,
            row.failure.as_deref().unwrap_or("")
        );
    }
    Ok(ConvergenceReport {
        metadata: metadata(config, setup.notes),
        rows,
        violations: 0,
    })
}

fn run_bounds_report(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport> {
    let summary = run_bounds_suite(
        config.seed,
        config.trials,
        &config.n_values,
        config.t,
        config.tolerances.truncation_tol,
        workers,
    )?;
    let line = |name: &str, s: &super::bounds::BoundStats| {
        format!(
            "{name}: {} checks, {} violations, {} errors, worst lhs/rhs {:e}",
            s.checks, s.violations, s.errors, s.worst_ratio
        )
    };
    let notes = vec![
        line("√n Chernoff bound", &summary.chernoff),
        line("ergodic product bound", &summary.ergodic.stats),
        line("telescoping bound", &summary.telescoping),
        format!(
            "ergodic product bound: largest n_last·lhs / n_first·lhs over instances {:e}",
            summary.ergodic.scaled_growth
        ),
        format!(
            "rows report the instance with the largest lhs/bound at each n; bound_value includes {RESIDUAL_FACTOR}× the decomposition residual"
        ),
    ];
    let rows = summary
        .ergodic
        .rows
        .iter()
        .map(|r| ReportRow {
            n: r.n,
            t_n: config.t / r.n as f64,
            norm_error: Some(r.lhs),
            per_vector_max_error: None,
            bound_value: Some(r.bound_value),
            wall_time_s: r.wall_time_s,
            failure: None,
        })
        .collect();
    Ok(ConvergenceReport {
        metadata: metadata(config, notes),
        rows,
        violations: summary.violations(),
    })
}
