//! Contraction-valued families `t ↦ V_t` with `V₀ = 𝟙`, their projected
//! generators, and the contraction and stability checks the product formula
//! relies on.
//!
//! Everything here is bounded, so the closure of the projected generator is
//! the generator itself and its strong-derivative domain is all of `C^d`.

use crate::error::{Error, Result};
use crate::linalg::{self, expm, identity, norm, OperatorMatrix, C64};
use crate::superop::ErgodicProjector;

/// Slack on `‖V_t‖ ≤ 1`.
pub const CONTRACTION_SLACK: f64 = 1e-10;
/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Default number of Richardson extrapolation levels.
pub const DEFAULT_RICHARDSON_LEVELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `V_t = e^{tx}`.
    Exp { x: OperatorMatrix },
    /// On `C^{2d₀}`, `V_t = ((T₁+T₂)/2, (T₁−T₂)/2; (T₁−T₂)/2, (T₁+T₂)/2)` with
    /// `T_i = e^{t x_i}`.
    BlockMix { x1: OperatorMatrix, x2: OperatorMatrix },
    /// `V_t = u₁ e^{(t/2)x} u₁† · u e^{(t/2)x} u†` with `u = u₁u₂`.
    TwoUnitary {
        u1: OperatorMatrix,
        u2: OperatorMatrix,
        x: OperatorMatrix,
        u: OperatorMatrix,
    },
}

/// A one-parameter family of operators `V_t`, `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneParameterFamily {
    dim: usize,
    kind: FamilyKind,
}

fn square(x: &OperatorMatrix) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimMismatch {
            expected: x.nrows(),
            found: x.ncols(),
        });
    }
    if !linalg::is_finite(x) {
        return Err(Error::NonFinite);
    }
    Ok(x.nrows())
}

fn same_dim(expected: usize, x: &OperatorMatrix) -> Result<()> {
    let d = square(x)?;
    if d != expected {
        return Err(Error::DimMismatch { expected, found: d });
    }
    Ok(())
}

impl OneParameterFamily {
    pub fn exp(x: OperatorMatrix) -> Result<Self> {
        let dim = square(&x)?;
        Ok(Self {
            dim,
            kind: FamilyKind::Exp { x },
        })
    }

    pub fn block_mix(x1: OperatorMatrix, x2: OperatorMatrix) -> Result<Self> {
        let d0 = square(&x1)?;
        same_dim(d0, &x2)?;
        Ok(Self {
            dim: 2 * d0,
            kind: FamilyKind::BlockMix { x1, x2 },
        })
    }

    pub fn two_unitary(u1: OperatorMatrix, u2: OperatorMatrix, x: OperatorMatrix) -> Result<Self> {
        let dim = square(&x)?;
        same_dim(dim, &u1)?;
        same_dim(dim, &u2)?;
        for u in [&u1, &u2] {
            let defect = linalg::unitarity_defect(u);
            if defect > 1e-10 {
                return Err(Error::NotUnitary(defect));
            }
        }
        let u = &u1 * &u2;
        Ok(Self {
            dim,
            kind: FamilyKind::TwoUnitary { u1, u2, x, u },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// `V_t`.
    pub fn evaluate(&self, t: f64) -> Result<OperatorMatrix> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        self.evaluate_any(t)
    }

    /// The defining formula at any real `t`; every kind is entire in `t`, so
    /// negative arguments are only used for central differences.
    fn evaluate_any(&self, t: f64) -> Result<OperatorMatrix> {
        match &self.kind {
            FamilyKind::Exp { x } => expm(x, t),
            FamilyKind::BlockMix { x1, x2 } => {
                let t1 = expm(x1, t)?;
                let t2 = expm(x2, t)?;
                let half = C64::new(0.5, 0.0);
                let sum = (&t1 + &t2) * half;
                let diff = (t1 - t2) * half;
                let d0 = self.dim / 2;
                let mut v = OperatorMatrix::zeros(self.dim, self.dim);
                v.view_mut((0, 0), (d0, d0)).copy_from(&sum);
                v.view_mut((d0, d0), (d0, d0)).copy_from(&sum);
                v.view_mut((0, d0), (d0, d0)).copy_from(&diff);
                v.view_mut((d0, 0), (d0, d0)).copy_from(&diff);
                Ok(v)
            }
            FamilyKind::TwoUnitary { u1, x, u, .. } => {
                let e = expm(x, t / 2.0)?;
                Ok(u1 * &e * u1.adjoint() * u * e * u.adjoint())
            }
        }
    }

    /// `dV_t/dt` at `t = 0`.
    pub fn derivative_at_zero(&self) -> OperatorMatrix {
        match &self.kind {
            FamilyKind::Exp { x } => x.clone(),
            FamilyKind::BlockMix { x1, x2 } => {
                let half = C64::new(0.5, 0.0);
                let sum = (x1 + x2) * half;
                let diff = (x1 - x2) * half;
                let d0 = self.dim / 2;
                let mut g = OperatorMatrix::zeros(self.dim, self.dim);
                g.view_mut((0, 0), (d0, d0)).copy_from(&sum);
                g.view_mut((d0, d0), (d0, d0)).copy_from(&sum);
                g.view_mut((0, d0), (d0, d0)).copy_from(&diff);
                g.view_mut((d0, 0), (d0, d0)).copy_from(&diff);
                g
            }
            FamilyKind::TwoUnitary { u1, x, u, .. } => {
                (u1 * x * u1.adjoint() + u * x * u.adjoint()) * C64::new(0.5, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorMethod {
    Exact,
    FiniteDifference { step: f64, richardson_levels: usize },
}

impl Default for GeneratorMethod {
    fn default() -> Self {
        GeneratorMethod::FiniteDifference {
            step: DEFAULT_FD_STEP,
            richardson_levels: DEFAULT_RICHARDSON_LEVELS,
        }
    }
}

/// Estimate of `A = d/dt P(V_t)|₀`.
///
/// All operators are bounded here, so `A` is closed and is itself the
/// generator of the limit semigroup: the target of the product formula is
/// `expm(A, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorEstimate {
    pub a: OperatorMatrix,
    pub method: GeneratorMethod,
    pub error_estimate: f64,
}

/// Projected generator `A = d/dt P(V_t)` at `t = 0`.
///
/// The exact method uses linearity of `P`: `A = P(V'(0))`. It is available
/// for the exponential and block-mix families only.
pub fn projected_generator(
    family: &OneParameterFamily,
    projector: &ErgodicProjector,
    method: GeneratorMethod,
) -> Result<GeneratorEstimate> {
    if projector.dim() != family.dim() {
        return Err(Error::DimMismatch {
            expected: family.dim(),
            found: projector.dim(),
        });
    }
    match method {
        GeneratorMethod::Exact => match family.kind() {
            FamilyKind::Exp { .. } | FamilyKind::BlockMix { .. } => Ok(GeneratorEstimate {
                a: projector.apply(&family.derivative_at_zero())?,
                method,
                error_estimate: 0.0,
            }),
            FamilyKind::TwoUnitary { .. } => Err(Error::MethodUnavailable(
                "no closed-form exact generator for the two-unitary family".into(),
            )),
        },
        GeneratorMethod::FiniteDifference {
            step,
            richardson_levels,
        } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
            }
            let central = |h: f64| -> Result<OperatorMatrix> {
                let forward = family.evaluate_any(h)?;
                let backward = family.evaluate_any(-h)?;
                Ok(projector.apply(&(forward - backward))? / C64::new(2.0 * h, 0.0))
            };
            // Richardson tableau on h, h/2, h/4, ... for an even error series
            let mut row: Vec<OperatorMatrix> = (0..=richardson_levels)
                .map(|level| central(step / f64::from(1u32 << level)))
                .collect::<Result<_>>()?;
            let mut error_estimate = if row.len() > 1 {
                norm(&(&row[row.len() - 1] - &row[row.len() - 2]))
            } else {
                // no second difference to compare against
                f64::INFINITY
            };
            let mut factor = 4.0;
            while row.len() > 1 {
                let next: Vec<OperatorMatrix> = row
                    .windows(2)
                    .map(|w| (&w[1] * C64::new(factor, 0.0) - &w[0]) / C64::new(factor - 1.0, 0.0))
                    .collect();
                if next.len() > 1 {
                    error_estimate = norm(&(&next[next.len() - 1] - &next[next.len() - 2]));
                } else {
                    error_estimate = norm(&(&next[0] - &row[row.len() - 1]));
                }
                row = next;
                factor *= 4.0;
            }
            Ok(GeneratorEstimate {
                a: row.pop().expect("tableau is never empty"),
                method,
                error_estimate,
            })
        }
    }
}

/// `A_n = (V_{t/n} − 𝟙)/(t/n)`.
pub fn difference_quotient(family: &OneParameterFamily, t: f64, n: usize) -> Result<OperatorMatrix> {
    if t <= 0.0 || n == 0 {
        return Err(Error::InvalidArgument(
            "difference quotient needs t > 0 and n ≥ 1".into(),
        ));
    }
    let h = t / n as f64;
    Ok((family.evaluate(h)? - identity(family.dim())) / C64::new(h, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSample {
    pub t: f64,
    pub norm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub samples: Vec<ContractionSample>,
    pub all_pass: bool,
}

/// `‖V_t‖ ≤ 1 + 1e−10` at each sample time.
pub fn check_contraction_family(family: &OneParameterFamily, t_samples: &[f64]) -> Result<ContractionReport> {
    let samples = t_samples
        .iter()
        .map(|&t| {
            let v = family.evaluate(t)?;
            let n = norm(&v);
            Ok(ContractionSample {
                t,
                norm: n,
                pass: n <= 1.0 + CONTRACTION_SLACK,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_pass = samples.iter().all(|s| s.pass);
    Ok(ContractionReport { samples, all_pass })
}

/// The semigroups whose uniform growth bound is checked.
#[derive(Debug, Clone, Copy)]
pub enum StabilityInput<'a> {
    /// `T_n(t) = e^{t·A_n}` for each listed generator.
    Generators(&'a [OperatorMatrix]),
    /// `T_n(t) = e^{t·P(A_n)}` with `A_n = (V_{t/n} − 𝟙)/(t/n)` built from the
    /// family at each sampled `t`.
    Family {
        family: &'a OneParameterFamily,
        projector: &'a ErgodicProjector,
        n_values: &'a [usize],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySample {
    /// `None` for an explicit generator list entry.
    pub n: Option<usize>,
    pub index: usize,
    pub t: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub samples: Vec<StabilitySample>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Checks `‖T_n(t)‖ ≤ M e^{ωt}` uniformly over the sampled `n` and `t`.
pub fn check_stability(input: StabilityInput<'_>, m: f64, omega: f64, t_samples: &[f64]) -> Result<StabilityReport> {
    if !(m >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "stability constant M must be ≥ 1, got {m}"
        )));
    }
    if let Some(&t) = t_samples.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::NegativeTime(t));
    }
    let mut samples = Vec::new();
    let mut record = |n: Option<usize>, index: usize, t: f64, semigroup_norm: f64| {
        samples.push(StabilitySample {
            n,
            index,
            t,
            norm: semigroup_norm,
            ratio: semigroup_norm / (m * (omega * t).exp()),
        });
    };
    match input {
        StabilityInput::Generators(generators) => {
            for (index, a) in generators.iter().enumerate() {
                for &t in t_samples {
                    record(None, index, t, norm(&expm(a, t)?));
                }
            }
        }
        StabilityInput::Family {
            family,
            projector,
            n_values,
        } => {
            for (index, &n) in n_values.iter().enumerate() {
                for &t in t_samples {
                    let semigroup_norm = if t == 0.0 {
                        1.0
                    } else {
                        let a_n = difference_quotient(family, t, n)?;
                        norm(&expm(&projector.apply(&a_n)?, t)?)
                    };
                    record(Some(n), index, t, semigroup_norm);
                }
            }
        }
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(StabilityReport {
        pass: max_ratio <= 1.0 + CONTRACTION_SLACK,
        samples,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_diag, random_contraction_generator, random_unitary};
    use crate::superop::{exact_pinching_projector, ContractionMap, DEFAULT_CLUSTER_TOL};

    fn close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> bool {
        norm(&(a - b)) <= tol
    }

    fn families() -> Vec<OneParameterFamily> {
        vec![
            OneParameterFamily::exp(random_contraction_generator(3, 1)).unwrap(),
            OneParameterFamily::block_mix(random_contraction_generator(2, 2), random_contraction_generator(2, 3))
                .unwrap(),
            OneParameterFamily::two_unitary(
                random_unitary(3, 4),
                random_unitary(3, 5),
                random_contraction_generator(3, 6),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn every_family_starts_at_identity() {
        for f in families() {
            assert!(close(&f.evaluate(0.0).unwrap(), &identity(f.dim()), 1e-12));
        }
    }

    #[test]
    fn families_are_contractions_and_continuous() {
        let samples = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];
        for f in families() {
            assert!(check_contraction_family(&f, &samples).unwrap().all_pass);
            let v1 = f.evaluate(1.0).unwrap();
            let gaps: Vec<f64> = (1..6)
                .map(|k| norm(&(f.evaluate(1.0 + 0.1 / f64::from(1u32 << k)).unwrap() - &v1)))
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn negative_time_is_rejected() {
        let f = &families()[0];
        assert_eq!(f.evaluate(-1.0), Err(Error::NegativeTime(-1.0)));
        assert!(matches!(
            check_contraction_family(f, &[0.0, -0.5]),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn block_mix_with_equal_generators_is_block_diagonal() {
        let x = random_contraction_generator(2, 7);
        let f = OneParameterFamily::block_mix(x.clone(), x.clone()).unwrap();
        let v = f.evaluate(0.7).unwrap();
        let e = expm(&x, 0.7).unwrap();
        assert!(close(&v, &block_diag(&e, &e), 1e-14));
    }

    #[test]
    fn two_unitary_with_identities_is_exponential() {
        let x = random_contraction_generator(3, 8);
        let f = OneParameterFamily::two_unitary(identity(3), identity(3), x.clone()).unwrap();
        assert!(close(&f.evaluate(1.3).unwrap(), &expm(&x, 1.3).unwrap(), 1e-13));
    }

    #[test]
    fn semigroup_law_for_exp_and_block_mix() {
        for f in families().into_iter().take(2) {
            for (s, t) in [(0.3, 0.9), (1.0, 1.0), (0.0, 2.0)] {
                let lhs = f.evaluate(s).unwrap() * f.evaluate(t).unwrap();
                assert!(close(&lhs, &f.evaluate(s + t).unwrap(), 1e-9));
            }
        }
    }

    #[test]
    fn exact_generator_examples() {
        let x = random_contraction_generator(3, 9);
        let f = OneParameterFamily::exp(x.clone()).unwrap();
        let g = projected_generator(&f, &ErgodicProjector::identity(3), GeneratorMethod::Exact).unwrap();
        assert!(close(&g.a, &x, 0.0));

        let (x1, x2) = (random_contraction_generator(2, 10), random_contraction_generator(2, 11));
        let mix = OneParameterFamily::block_mix(x1.clone(), x2.clone()).unwrap();
        let flip = ContractionMap::block_sign_flip(4).unwrap();
        let p = flip.exact_projector(DEFAULT_CLUSTER_TOL).unwrap().unwrap();
        let g = projected_generator(&mix, &p, GeneratorMethod::Exact).unwrap();
        let avg = (&x1 + &x2) * C64::new(0.5, 0.0);
        assert!(close(&g.a, &block_diag(&avg, &avg), 1e-15));

        let two = &families()[2];
        assert!(matches!(
            projected_generator(two, &ErgodicProjector::identity(3), GeneratorMethod::Exact),
            Err(Error::MethodUnavailable(_))
        ));
    }

    #[test]
    fn finite_difference_matches_exact_generator() {
        let u = random_unitary(3, 12);
        let p = exact_pinching_projector(&u, DEFAULT_CLUSTER_TOL).unwrap();
        let f = OneParameterFamily::exp(random_contraction_generator(3, 13)).unwrap();
        let exact = projected_generator(&f, &p, GeneratorMethod::Exact).unwrap();
        let fd = projected_generator(&f, &p, GeneratorMethod::default()).unwrap();
        assert!(close(&fd.a, &exact.a, 1e-6));
        assert!(fd.error_estimate < 1e-6);
    }

    #[test]
    fn finite_difference_covers_two_unitary_family() {
        let f = &families()[2];
        let u = match f.kind() {
            FamilyKind::TwoUnitary { u, .. } => u.clone(),
            _ => unreachable!(),
        };
        let p = exact_pinching_projector(&u, DEFAULT_CLUSTER_TOL).unwrap();
        let fd = projected_generator(f, &p, GeneratorMethod::default()).unwrap();
        let expected = p.apply(&f.derivative_at_zero()).unwrap();
        assert!(close(&fd.a, &expected, 1e-6));
    }

    #[test]
    fn contraction_check_detects_growth() {
        let f = OneParameterFamily::exp(identity(2)).unwrap();
        let report = check_contraction_family(&f, &[0.0, 0.5, 1.0]).unwrap();
        assert!(!report.all_pass);
        assert!(report.samples[0].pass);
        assert!(!report.samples[1].pass && !report.samples[2].pass);

        let g = OneParameterFamily::exp(random_contraction_generator(4, 14)).unwrap();
        assert!(check_contraction_family(&g, &[0.0, 1.0, 10.0]).unwrap().all_pass);
    }

    #[test]
    fn stability_of_projected_difference_quotients() {
        let f = OneParameterFamily::exp(random_contraction_generator(3, 15)).unwrap();
        let p = exact_pinching_projector(&random_unitary(3, 16), DEFAULT_CLUSTER_TOL).unwrap();
        let n_values: Vec<usize> = (0..7).map(|k| 1 << k).collect();
        let report = check_stability(
            StabilityInput::Family {
                family: &f,
                projector: &p,
                n_values: &n_values,
            },
            1.0,
            0.0,
            &[0.0, 0.5, 1.0, 4.0],
        )
        .unwrap();
        assert!(report.pass, "max ratio {}", report.max_ratio);
        assert_eq!(report.samples.len(), 7 * 4);
    }

    #[test]
    fn stability_of_exponential_growth() {
        let gens = [identity(2)];
        let report = check_stability(StabilityInput::Generators(&gens), 1.0, 1.0, &[0.0, 1.0, 3.0]).unwrap();
        assert!(report.pass);
        let report = check_stability(StabilityInput::Generators(&gens), 1.0, 0.0, &[1.0]).unwrap();
        assert!(!report.pass);
        assert!(check_stability(StabilityInput::Generators(&gens), 0.5, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn difference_quotients_approach_generator() {
        let x = random_contraction_generator(3, 17);
        let x = &x / C64::new(norm(&x), 0.0);
        let f = OneParameterFamily::exp(x.clone()).unwrap();
        let errs: Vec<f64> = [4usize, 16, 64, 256]
            .iter()
            .map(|&n| norm(&(difference_quotient(&f, 1.0, n).unwrap() - &x)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }
}
