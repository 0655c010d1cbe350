use crate::error::{Error, Result};
use crate::linalg::{derive_seed, random_contraction, random_unit_vector, random_unitary, OperatorMatrix, C64};
use crate::product_formula::{
    admissible_generator, chernoff_bound_check, ergodic_bound_check, telescoping_diff_check, BoundCheck,
    ErgodicBoundCheck,
};
use crate::superop::ContractionMap;

use super::parallel::{map_ordered, Stopwatch};

/// Absolute slack for the √n and telescoping inequalities.
pub const BOUND_SLACK: f64 = 1e-9;
/// Multiple of the decomposition residual allowed on top of the `O(1/n)` bound.
pub const RESIDUAL_FACTOR: f64 = 10.0;

const CHERNOFF_STREAM: u64 = 0xC4E2;
const ERGODIC_STREAM: u64 = 0xE260;
const TELESCOPING_STREAM: u64 = 0x7E1E;

/// Tally of one family of inequality checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundStats {
    pub checks: usize,
    pub violations: usize,
    /// Checks that could not be evaluated.
    pub errors: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
}

impl BoundStats {
    fn record(&mut self, lhs: f64, rhs: f64, holds: bool) {
        self.checks += 1;
        if !holds {
            self.violations += 1;
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.errors == 0
    }
}

/// A random contraction `S`, unit vector `v` and `n ≤ 64` with `d ≤ 8`.
pub fn chernoff_instance(seed: u64, trial: usize) -> (OperatorMatrix, crate::linalg::VectorState, usize) {
    let s = derive_seed(derive_seed(seed, CHERNOFF_STREAM), trial as u64);
    let d = 1 + (derive_seed(s, 0) % 8) as usize;
    let n = 1 + (derive_seed(s, 1) % 64) as usize;
    let scale = [1.0, 0.99, 0.9, 0.5][(derive_seed(s, 2) % 4) as usize];
    let contraction = random_contraction(d, derive_seed(s, 3)) * C64::new(scale, 0.0);
    (contraction, random_unit_vector(d, derive_seed(s, 4)), n)
}

/// Unital map (unitary conjugation or block sign flip, alternating) and an
/// admissible `x = c(W − 𝟙)` with `c·t ≤ n_min`.
pub fn ergodic_instance(seed: u64, trial: usize, t: f64, n_min: usize) -> Result<(ContractionMap, OperatorMatrix)> {
    let s = derive_seed(derive_seed(seed, ERGODIC_STREAM), trial as u64);
    let (map, d) = if trial.is_multiple_of(2) {
        let d = 2 + (derive_seed(s, 0) % 3) as usize;
        (
            ContractionMap::unitary_conjugation(random_unitary(d, derive_seed(s, 1)))?,
            d,
        )
    } else {
        let d = 2 * (1 + (derive_seed(s, 0) % 3) as usize);
        (ContractionMap::block_sign_flip(d)?, d)
    };
    let c = (n_min as f64 / t).min(1.0);
    Ok((map, admissible_generator(&random_contraction(d, derive_seed(s, 2)), c)))
}

/// Map (unitary conjugation or a coordinate pinching, alternating) and two
/// admissible generators for the telescoping inequality.
pub fn telescoping_instance(
    seed: u64,
    trial: usize,
    t: f64,
    n: usize,
) -> Result<(ContractionMap, OperatorMatrix, OperatorMatrix)> {
    let s = derive_seed(derive_seed(seed, TELESCOPING_STREAM), trial as u64);
    let d = 2 + (derive_seed(s, 0) % 3) as usize;
    let map = if trial.is_multiple_of(2) {
        ContractionMap::unitary_conjugation(random_unitary(d, derive_seed(s, 1)))?
    } else {
        let r = 1 + (derive_seed(s, 1) % (d as u64 - 1)) as usize;
        let p = OperatorMatrix::from_fn(d, d, |i, j| {
            if i == j && i < r {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let q = crate::linalg::identity(d) - &p;
        ContractionMap::pinching(vec![p, q])?
    };
    let c = (n as f64 / t).min(1.0);
    let x1 = admissible_generator(&random_contraction(d, derive_seed(s, 2)), c);
    let x2 = admissible_generator(&random_contraction(d, derive_seed(s, 3)), c);
    Ok((map, x1, x2))
}

/// `‖e^{n(S−𝟙)}v − Sⁿv‖ ≤ √n‖Sv − v‖` over seeded instances.
pub fn run_chernoff_suite(seed: u64, trials: usize, workers: usize) -> BoundStats {
    let indices: Vec<usize> = (0..trials).collect();
    let results = map_ordered(&indices, workers, |&i| {
        let (s, v, n) = chernoff_instance(seed, i);
        chernoff_bound_check(&s, &v, n)
    });
    let mut stats = BoundStats::default();
    for r in results {
        match r {
            Ok(check) => stats.record(check.lhs, check.rhs, check.holds(BOUND_SLACK)),
            Err(e) => {
                log::warn!("chernoff check failed: {e}");
                stats.errors += 1;
            }
        }
    }
    stats
}

/// Worst instance of the ergodic product bound at one `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicSweepRow {
    pub n: usize,
    pub lhs: f64,
    /// `bound + RESIDUAL_FACTOR·residual` of the same instance.
    pub bound_value: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicSuite {
    pub stats: BoundStats,
    pub rows: Vec<ErgodicSweepRow>,
    /// Largest `n_last·lhs(n_last) / (n_first·lhs(n_first))` over instances.
    pub scaled_growth: f64,
}

/// The `O(1/n)` ergodic product bound over seeded instances and `n_values`.
pub fn run_ergodic_suite(
    seed: u64,
    trials: usize,
    n_values: &[usize],
    t: f64,
    truncation_tol: f64,
    workers: usize,
) -> Result<ErgodicSuite> {
    let n_min = *n_values
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidArgument("n_values must be non-empty".into()))?;
    let tasks: Vec<(usize, usize)> = (0..trials)
        .flat_map(|i| n_values.iter().map(move |&n| (i, n)))
        .collect();
    let results: Vec<(Result<ErgodicBoundCheck>, f64)> = map_ordered(&tasks, workers, |&(i, n)| {
        let clock = Stopwatch::start();
        let check = ergodic_instance(seed, i, t, n_min)
            .and_then(|(map, x)| ergodic_bound_check(&map, &x, t, n, truncation_tol));
        (check, clock.seconds())
    });

    let mut stats = BoundStats::default();
    let mut rows: Vec<Option<(ErgodicSweepRow, f64)>> = vec![None; n_values.len()];
    let mut times = vec![0.0; n_values.len()];
    let mut scaled_growth: f64 = 0.0;
    for (i, chunk) in results.chunks(n_values.len()).enumerate() {
        let mut scaled = Vec::with_capacity(n_values.len());
        for (j, (check, seconds)) in chunk.iter().enumerate() {
            times[j] += seconds;
            match check {
                Ok(c) => {
                    let rhs = c.bound + RESIDUAL_FACTOR * c.residual;
                    stats.record(c.lhs, rhs, c.holds(RESIDUAL_FACTOR));
                    let ratio = if rhs > 0.0 { c.lhs / rhs } else { f64::INFINITY };
                    if rows[j].as_ref().is_none_or(|(_, r)| ratio > *r) {
                        rows[j] = Some((
                            ErgodicSweepRow {
                                n: n_values[j],
                                lhs: c.lhs,
                                bound_value: rhs,
                                wall_time_s: 0.0,
                            },
                            ratio,
                        ));
                    }
                    scaled.push(Some(n_values[j] as f64 * c.lhs));
                }
                Err(e) => {
                    log::warn!("ergodic bound check failed for instance {i}, n = {}: {e}", n_values[j]);
                    stats.errors += 1;
                    scaled.push(None);
                }
            }
        }
        if let (Some(Some(first)), Some(Some(last))) = (scaled.first(), scaled.last()) {
            if *first > 0.0 {
                scaled_growth = scaled_growth.max(last / first);
            }
        }
    }
    let rows = rows
        .into_iter()
        .zip(times)
        .filter_map(|(row, seconds)| {
            row.map(|(mut r, _)| {
                r.wall_time_s = seconds;
                r
            })
        })
        .collect();
    Ok(ErgodicSuite {
        stats,
        rows,
        scaled_growth,
    })
}

/// `‖∏(𝟙 + sΠ^k x₁) − ∏(𝟙 + sΠ^k x₂)‖ ≤ t‖x₁ − x₂‖`; trial `i` uses
/// `n_values[i mod len]`.
pub fn run_telescoping_suite(seed: u64, trials: usize, n_values: &[usize], t: f64, workers: usize) -> BoundStats {
    let indices: Vec<usize> = (0..trials).collect();
    let results: Vec<Result<BoundCheck>> = map_ordered(&indices, workers, |&i| {
        let n = n_values[i % n_values.len()];
        let (map, x1, x2) = telescoping_instance(seed, i, t, n)?;
        telescoping_diff_check(&map, &x1, &x2, t, n)
    });
    let mut stats = BoundStats::default();
    for r in results {
        match r {
            Ok(check) => stats.record(check.lhs, check.rhs, check.holds(BOUND_SLACK)),
            Err(e) => {
                log::warn!("telescoping check failed: {e}");
                stats.errors += 1;
            }
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSummary {
    pub chernoff: BoundStats,
    pub ergodic: ErgodicSuite,
    pub telescoping: BoundStats,
}

impl BoundsSummary {
    pub fn violations(&self) -> usize {
        self.chernoff.violations + self.ergodic.stats.violations + self.telescoping.violations
    }

    pub fn errors(&self) -> usize {
        self.chernoff.errors + self.ergodic.stats.errors + self.telescoping.errors
    }
}

/// All three suites with `trials` instances each.
pub fn run_bounds_suite(
    seed: u64,
    trials: usize,
    n_values: &[usize],
    t: f64,
    truncation_tol: f64,
    workers: usize,
) -> Result<BoundsSummary> {
    Ok(BoundsSummary {
        chernoff: run_chernoff_suite(seed, trials, workers),
        ergodic: run_ergodic_suite(seed, trials, n_values, t, truncation_tol, workers)?,
        telescoping: run_telescoping_suite(seed, trials, n_values, t, workers),
    })
}
