//! Product formulas and their quantitative bounds.
//!
//! The central object is the ordered product
//! `Π(V_{t/n})·Π²(V_{t/n})···Πⁿ(V_{t/n})`, multiplied in the written order
//! (the leftmost factor multiplies from the left). Its limit is
//! `e^{tA}` with `A = d/dt P(V_t)|₀`. The remaining evaluators are the
//! concrete pulse-sequence forms this covers (decoupling, cyclic sequences,
//! two-unitary sequences) plus the Zeno product, which sits outside the unital
//! setting. The `*_check` functions return `(lhs, rhs)` pairs for the
//! inequalities behind the convergence proof.

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{self, expm, expm_scaled, identity, matrix_power, norm, OperatorMatrix, VectorState, C64};
use crate::semigroup::OneParameterFamily;
use crate::superop::{self, exact_pinching_projector, ContractionMap};

const UNITARY_TOL: f64 = 1e-10;
const PROJECTOR_TOL: f64 = 1e-10;
/// Slack on norm hypotheses such as `‖𝟙 + s·x‖ ≤ 1`.
pub const HYPOTHESIS_SLACK: f64 = 1e-10;

fn check_unitary(u: &OperatorMatrix) -> Result<()> {
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARY_TOL {
        Err(Error::NotUnitary(defect))
    } else {
        Ok(())
    }
}

fn check_square(d: usize, x: &OperatorMatrix) -> Result<()> {
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: if x.nrows() != d { x.nrows() } else { x.ncols() },
        });
    }
    if !linalg::is_finite(x) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

fn check_steps(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("number of factors must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `Π(v)·Π²(v)···Π^k(v)`, reusing `Π^j(v) = Π(Π^{j−1}(v))`.
pub fn ordered_product(map: &ContractionMap, v: &OperatorMatrix, k: usize) -> Result<OperatorMatrix> {
    if k == 0 {
        return Ok(identity(map.dim()));
    }
    let mut factor = map.apply(v)?;
    let mut product = factor.clone();
    for _ in 1..k {
        factor = map.apply(&factor)?;
        product = &product * &factor;
    }
    Ok(product)
}

/// `Π(V_{t/n})·Π²(V_{t/n})···Πⁿ(V_{t/n})`.
///
/// Non-unital maps are accepted with a warning so that Zeno-type
/// compressions can be explored; the convergence theory does not cover them.
pub fn iterated_product(map: &ContractionMap, family: &OneParameterFamily, t: f64, n: usize) -> Result<OperatorMatrix> {
    check_time(t)?;
    check_steps(n)?;
    if map.dim() != family.dim() {
        return Err(Error::DimMismatch {
            expected: map.dim(),
            found: family.dim(),
        });
    }
    if !map.is_unital() {
        warn!("iterated product with a non-unital map: no convergence guarantee");
    }
    let v = family.evaluate(t / n as f64)?;
    ordered_product(map, &v, n)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Uniform {
        n: usize,
    },
    /// `(k_n, t_n)` pairs.
    Sequenced {
        pairs: Vec<(usize, f64)>,
    },
}

/// Step counts and step sizes for a sweep of products approaching time
/// `target_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    target_t: f64,
}

impl Schedule {
    pub fn uniform(n: usize, target_t: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchedule("uniform schedule needs n ≥ 1".into()));
        }
        if !(target_t > 0.0 && target_t.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "target time must be positive, got {target_t}"
            )));
        }
        Ok(Self {
            kind: ScheduleKind::Uniform { n },
            target_t,
        })
    }

    /// Requires `k_n` strictly increasing, `t_n > 0` non-increasing, and the
    /// last `k_n·t_n` within 10% of `target_t`.
    pub fn sequenced(pairs: Vec<(usize, f64)>, target_t: f64) -> Result<Self> {
        if !(target_t > 0.0 && target_t.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "target time must be positive, got {target_t}"
            )));
        }
        for (i, &(k, step)) in pairs.iter().enumerate() {
            if k == 0 {
                return Err(Error::InvalidSchedule(format!("entry {i}: k must be at least 1")));
            }
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "entry {i}: t_n must be positive, got {step}"
                )));
            }
            if i > 0 {
                let (k_prev, step_prev) = pairs[i - 1];
                if k <= k_prev {
                    return Err(Error::InvalidSchedule(format!(
                        "entry {i}: k_n must be strictly increasing ({k_prev} then {k})"
                    )));
                }
                if step > step_prev {
                    return Err(Error::InvalidSchedule(format!(
                        "entry {i}: t_n must decrease ({step_prev} then {step})"
                    )));
                }
            }
        }
        if let Some(&(k, step)) = pairs.last() {
            let total = k as f64 * step;
            if (total - target_t).abs() > 0.1 * target_t {
                return Err(Error::InvalidSchedule(format!(
                    "last k_n·t_n = {total} is not within 10% of {target_t}"
                )));
            }
        }
        Ok(Self {
            kind: ScheduleKind::Sequenced { pairs },
            target_t,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn target_t(&self) -> f64 {
        self.target_t
    }

    /// The `(k_n, t_n)` pairs, with `t_n = target_t/n` for a uniform schedule.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        match &self.kind {
            ScheduleKind::Uniform { n } => vec![(*n, self.target_t / *n as f64)],
            ScheduleKind::Sequenced { pairs } => pairs.clone(),
        }
    }
}

/// `Π(V_{t_n})·Π²(V_{t_n})···Π^{k_n}(V_{t_n})` for every pair of the schedule.
pub fn schedule_product(
    map: &ContractionMap,
    family: &OneParameterFamily,
    schedule: &Schedule,
) -> Result<Vec<(usize, f64, OperatorMatrix)>> {
    if map.dim() != family.dim() {
        return Err(Error::DimMismatch {
            expected: map.dim(),
            found: family.dim(),
        });
    }
    schedule
        .pairs()
        .into_iter()
        .map(|(k, step)| {
            let v = family.evaluate(step)?;
            Ok((k, step, ordered_product(map, &v, k)?))
        })
        .collect()
}

/// `(u e^{(t/n)x})ⁿ (u†)ⁿ`.
pub fn decoupling_product(u: &OperatorMatrix, x: &OperatorMatrix, t: f64, n: usize) -> Result<OperatorMatrix> {
    decoupling_product_complex(u, x, C64::new(t, 0.0), n)
}

/// [`decoupling_product`] for complex `t`. No contraction property is
/// claimed off the real axis.
pub fn decoupling_product_complex(u: &OperatorMatrix, x: &OperatorMatrix, t: C64, n: usize) -> Result<OperatorMatrix> {
    check_steps(n)?;
    check_unitary(u)?;
    check_square(u.nrows(), x)?;
    let step = u * expm_scaled(x, t / n as f64)?;
    Ok(matrix_power(&step, n) * matrix_power(&u.adjoint(), n))
}

/// Limit of [`decoupling_product`]: `e^{t·P(x)}` with `P` the pinching by
/// the spectral projectors of `u`.
pub fn decoupling_limit(u: &OperatorMatrix, x: &OperatorMatrix, t: f64, cluster_tol: f64) -> Result<OperatorMatrix> {
    let p = exact_pinching_projector(u, cluster_tol)?;
    expm(&p.apply(x)?, t)
}

/// `(u₁ e^{(t/n)x} u₂ e^{(t/n)x} ··· u_k e^{(t/n)x})^{n/k}`.
pub fn cyclic_product(us: &[OperatorMatrix], x: &OperatorMatrix, t: f64, n: usize) -> Result<OperatorMatrix> {
    check_steps(n)?;
    let k = us.len();
    if k == 0 {
        return Err(Error::InvalidArgument(
            "cyclic product needs at least one unitary".into(),
        ));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::NotDivisible { n, k });
    }
    let d = x.nrows();
    check_square(d, x)?;
    for u in us {
        check_square(d, u)?;
        check_unitary(u)?;
    }
    let e = expm(x, t / n as f64)?;
    let cycle = us.iter().fold(identity(d), |acc, u| acc * u * &e);
    Ok(matrix_power(&cycle, n / k))
}

/// Generator of the limit of [`cyclic_product`] when `u₁···u_k = 𝟙`:
/// `(1/k) Σ_j w_j x w_j†` with partial products `w_j = u₁···u_j`.
pub fn cyclic_generator(us: &[OperatorMatrix], x: &OperatorMatrix) -> Result<OperatorMatrix> {
    let d = x.nrows();
    if us.is_empty() {
        return Err(Error::InvalidArgument(
            "cyclic product needs at least one unitary".into(),
        ));
    }
    let mut w = identity(d);
    let mut sum = OperatorMatrix::zeros(d, d);
    for u in us {
        check_square(d, u)?;
        w = &w * u;
        sum += &w * x * w.adjoint();
    }
    let closure = norm(&(&w - identity(d)));
    if closure > UNITARY_TOL {
        return Err(Error::HypothesisViolated(format!(
            "u₁···u_k differs from the identity by {closure:e}"
        )));
    }
    Ok(sum / C64::new(us.len() as f64, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoUnitaryProduct {
    /// `(u₁ e^{(t/n)x} u₂ e^{(t/n)x})^{n/2}`.
    pub raw: OperatorMatrix,
    /// `raw·(u†)^{n/2}` with `u = u₁u₂`.
    pub corrected: OperatorMatrix,
}

/// Two-pulse sequence whose pulses do not multiply to the identity.
pub fn two_unitary_product(
    u1: &OperatorMatrix,
    u2: &OperatorMatrix,
    x: &OperatorMatrix,
    t: f64,
    n: usize,
) -> Result<TwoUnitaryProduct> {
    check_steps(n)?;
    if !n.is_multiple_of(2) {
        return Err(Error::OddN(n));
    }
    let d = x.nrows();
    check_square(d, x)?;
    for u in [u1, u2] {
        check_square(d, u)?;
        check_unitary(u)?;
    }
    let e = expm(x, t / n as f64)?;
    let raw = matrix_power(&(u1 * &e * u2 * &e), n / 2);
    let u = u1 * u2;
    let corrected = &raw * matrix_power(&u.adjoint(), n / 2);
    Ok(TwoUnitaryProduct { raw, corrected })
}

/// `A = ½·P(u₁ x u₁† + u x u†)`, `P` the pinching by the spectrum of
/// `u = u₁u₂`; the limit of the corrected two-unitary product is `e^{tA}`.
pub fn two_unitary_generator(
    u1: &OperatorMatrix,
    u2: &OperatorMatrix,
    x: &OperatorMatrix,
    cluster_tol: f64,
) -> Result<OperatorMatrix> {
    check_unitary(u1)?;
    check_unitary(u2)?;
    let u = u1 * u2;
    let p = exact_pinching_projector(&u, cluster_tol)?;
    let inner = (u1 * x * u1.adjoint() + &u * x * u.adjoint()) * C64::new(0.5, 0.0);
    p.apply(&inner)
}

/// Zeno product `(p e^{(t/n)x})ⁿ` for an orthogonal projector `p`.
pub fn zeno_product(p: &OperatorMatrix, x: &OperatorMatrix, t: f64, n: usize) -> Result<OperatorMatrix> {
    check_steps(n)?;
    let defect = linalg::projector_defect(p);
    if defect > PROJECTOR_TOL {
        return Err(Error::NotProjector(defect));
    }
    check_square(p.nrows(), x)?;
    let step = p * expm(x, t / n as f64)?;
    Ok(matrix_power(&step, n))
}

/// `e^{t·pxp}·p`, the limit of [`zeno_product`] on the range of `p`.
pub fn zeno_limit(p: &OperatorMatrix, x: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    let defect = linalg::projector_defect(p);
    if defect > PROJECTOR_TOL {
        return Err(Error::NotProjector(defect));
    }
    check_square(p.nrows(), x)?;
    Ok(expm(&(p * x * p), t)? * p)
}

/// Left- and right-hand side of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// `‖e^{n(S−𝟙)}v − Sⁿv‖ ≤ √n‖Sv − v‖` for a contraction `S`.
pub fn chernoff_bound_check(s: &OperatorMatrix, v: &VectorState, n: usize) -> Result<BoundCheck> {
    let d = s.nrows();
    check_square(d, s)?;
    if v.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: v.len(),
        });
    }
    let s_norm = norm(s);
    if s_norm > 1.0 + HYPOTHESIS_SLACK {
        return Err(Error::NotContraction(s_norm));
    }
    let semigroup = expm(&(s - identity(d)), n as f64)?;
    let lhs = (semigroup * v - matrix_power(s, n) * v).norm();
    let rhs = (n as f64).sqrt() * (s * v - v).norm();
    Ok(BoundCheck { lhs, rhs })
}

/// `∏_{k=1..n} (𝟙 + s·Π^k x)`, factors in ascending `k` from the left.
pub fn linearized_product(map: &ContractionMap, x: &OperatorMatrix, s: f64, n: usize) -> Result<OperatorMatrix> {
    let d = map.dim();
    let mut iterate = x.clone();
    let mut product = identity(d);
    let scale = C64::new(s, 0.0);
    for _ in 0..n {
        iterate = map.apply(&iterate)?;
        product *= identity(d) + &iterate * scale;
    }
    Ok(product)
}

fn check_admissible(x: &OperatorMatrix, s: f64) -> Result<()> {
    let n = norm(&(identity(x.nrows()) + x * C64::new(s, 0.0)));
    if n > 1.0 + HYPOTHESIS_SLACK {
        return Err(Error::HypothesisViolated(format!("‖𝟙 + {s}·x‖ = {n} exceeds 1")));
    }
    Ok(())
}

/// `x = c(W − 𝟙)`; for a contraction `W`, `‖𝟙 + s·x‖ ≤ 1` whenever `s·c ≤ 1`.
pub fn admissible_generator(w: &OperatorMatrix, c: f64) -> OperatorMatrix {
    (w - identity(w.nrows())) * C64::new(c, 0.0)
}

/// Outcome of [`ergodic_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicBoundCheck {
    /// `‖(𝟙 + (t/n)Px)ⁿ − ∏_k(𝟙 + (t/n)Π^k x)‖`.
    pub lhs: f64,
    /// `2t‖y‖/n + 4t²(‖x‖‖y‖ + ‖y‖²)/n`.
    pub bound: f64,
    pub y_norm: f64,
    /// Residual of `x = Px + y − Πy`.
    pub residual: f64,
}

impl ErgodicBoundCheck {
    /// `lhs ≤ bound + residual_factor·residual`.
    pub fn holds(&self, residual_factor: f64) -> bool {
        self.lhs <= self.bound + residual_factor * self.residual
    }
}

/// Compares the power of the projected linearization with the ordered product
/// of linearized iterates, against the `O(1/n)` bound obtained from the
/// decomposition `x = Px + y − Πy`.
pub fn ergodic_bound_check(
    map: &ContractionMap,
    x: &OperatorMatrix,
    t: f64,
    n: usize,
    truncation_tol: f64,
) -> Result<ErgodicBoundCheck> {
    check_time(t)?;
    check_steps(n)?;
    check_square(map.dim(), x)?;
    if !map.is_unital() {
        return Err(Error::HypothesisViolated("the map must satisfy Π𝟙 = 𝟙".into()));
    }
    let s = t / n as f64;
    check_admissible(x, s)?;
    let dec = superop::ergodic_decompose(map, x, truncation_tol)?;
    let d = map.dim();
    let projected = matrix_power(&(identity(d) + &dec.px * C64::new(s, 0.0)), n);
    let lhs = norm(&(projected - linearized_product(map, x, s, n)?));
    let y_norm = norm(&dec.y);
    let x_norm = norm(x);
    let nf = n as f64;
    let bound = 2.0 * t * y_norm / nf + 4.0 * t * t * (x_norm * y_norm + y_norm * y_norm) / nf;
    Ok(ErgodicBoundCheck {
        lhs,
        bound,
        y_norm,
        residual: dec.residual,
    })
}

/// `‖∏_k(𝟙 + (t/n)Π^k x₁) − ∏_k(𝟙 + (t/n)Π^k x₂)‖ ≤ t‖x₁ − x₂‖`.
pub fn telescoping_diff_check(
    map: &ContractionMap,
    x1: &OperatorMatrix,
    x2: &OperatorMatrix,
    t: f64,
    n: usize,
) -> Result<BoundCheck> {
    check_time(t)?;
    check_steps(n)?;
    check_square(map.dim(), x1)?;
    check_square(map.dim(), x2)?;
    let s = t / n as f64;
    check_admissible(x1, s)?;
    check_admissible(x2, s)?;
    let lhs = norm(&(linearized_product(map, x1, s, n)? - linearized_product(map, x2, s, n)?));
    Ok(BoundCheck {
        lhs,
        rhs: t * norm(&(x1 - x2)),
    })
}

/// Largest `‖(a − b)v‖` over the given unit vectors.
pub fn per_vector_error(a: &OperatorMatrix, b: &OperatorMatrix, vectors: &[VectorState]) -> f64 {
    let diff = a - b;
    vectors.iter().map(|v| (&diff * v).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_diag, dft_matrix, random_contraction, random_contraction_generator, random_unitary};
    use crate::semigroup::{projected_generator, GeneratorMethod};
    use crate::superop::{ErgodicProjector, DEFAULT_CLUSTER_TOL, DEFAULT_TRUNCATION_TOL};
    use nalgebra::DVector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> bool {
        norm(&(a - b)) <= tol
    }

    #[test]
    fn single_factor_is_one_map_application() {
        let map = ContractionMap::unitary_conjugation(random_unitary(3, 1)).unwrap();
        let f = OneParameterFamily::exp(random_contraction_generator(3, 2)).unwrap();
        let p = iterated_product(&map, &f, 0.8, 1).unwrap();
        assert!(close(&p, &map.apply(&f.evaluate(0.8).unwrap()).unwrap(), 1e-15));
    }

    #[test]
    fn identity_map_recovers_semigroup() {
        let x = random_contraction_generator(3, 3);
        let f = OneParameterFamily::exp(x.clone()).unwrap();
        let p = iterated_product(&ContractionMap::identity(3), &f, 1.0, 50).unwrap();
        assert!(close(&p, &expm(&x, 1.0).unwrap(), 1e-9));
    }

    #[test]
    fn two_factor_order_is_left_to_right() {
        let map = ContractionMap::unitary_conjugation(random_unitary(3, 4)).unwrap();
        let f = OneParameterFamily::exp(random_contraction_generator(3, 5)).unwrap();
        let v = f.evaluate(0.5).unwrap();
        let by_hand = map.apply(&v).unwrap() * map.iterate(&v, 2).unwrap();
        assert!(close(&iterated_product(&map, &f, 1.0, 2).unwrap(), &by_hand, 1e-14));
        let reversed = map.iterate(&v, 2).unwrap() * map.apply(&v).unwrap();
        assert!(!close(&by_hand, &reversed, 1e-6));
    }

    #[test]
    fn block_mix_product_approaches_averaged_generator() {
        let (x1, x2) = (random_contraction_generator(2, 6), random_contraction_generator(2, 7));
        let f = OneParameterFamily::block_mix(x1.clone(), x2.clone()).unwrap();
        let flip = ContractionMap::block_sign_flip(4).unwrap();
        let avg = (&x1 + &x2) * c(0.5);
        let target = expm(&block_diag(&avg, &avg), 1.0).unwrap();
        let err = |n| norm(&(iterated_product(&flip, &f, 1.0, n).unwrap() - &target));
        let (e16, e1024) = (err(16), err(1024));
        assert!(e1024 <= 1e-2 && e1024 < e16, "{e16} {e1024}");
    }

    #[test]
    fn iterated_product_errors() {
        let map = ContractionMap::identity(2);
        let f = OneParameterFamily::exp(random_contraction_generator(3, 8)).unwrap();
        assert!(matches!(
            iterated_product(&map, &f, 1.0, 4),
            Err(Error::DimMismatch { .. })
        ));
        let f = OneParameterFamily::exp(random_contraction_generator(2, 8)).unwrap();
        assert!(matches!(
            iterated_product(&map, &f, -1.0, 4),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn schedule_examples() {
        let map = ContractionMap::unitary_conjugation(random_unitary(3, 9)).unwrap();
        let f = OneParameterFamily::exp(random_contraction_generator(3, 10)).unwrap();
        let single = Schedule::sequenced(vec![(40, 1.0 / 40.0)], 1.0).unwrap();
        let out = schedule_product(&map, &f, &single).unwrap();
        assert_eq!(out.len(), 1);
        assert!(close(&out[0].2, &iterated_product(&map, &f, 1.0, 40).unwrap(), 1e-14));

        let empty = Schedule::sequenced(vec![], 1.0).unwrap();
        assert!(schedule_product(&map, &f, &empty).unwrap().is_empty());

        assert!(Schedule::sequenced(vec![(4, 0.25), (4, 0.25)], 1.0).is_err());
        assert!(Schedule::sequenced(vec![(4, 0.25), (8, 0.5)], 1.0).is_err());
        assert!(Schedule::sequenced(vec![(4, 0.5)], 1.0).is_err());
        assert!(Schedule::uniform(0, 1.0).is_err());
        assert_eq!(Schedule::uniform(8, 2.0).unwrap().pairs(), vec![(8, 0.25)]);
    }

    #[test]
    fn dyadic_schedule_converges() {
        let u = random_unitary(3, 11);
        let map = ContractionMap::unitary_conjugation(u.clone()).unwrap();
        let x = random_contraction_generator(3, 12);
        let f = OneParameterFamily::exp(x.clone()).unwrap();
        let t = 1.0;
        let pairs: Vec<(usize, f64)> = (4..=11)
            .map(|k| (1usize << k, t / 2f64.powi(k) + t / 4f64.powi(k)))
            .collect();
        let schedule = Schedule::sequenced(pairs, t).unwrap();
        let target = decoupling_limit(&u, &x, t, DEFAULT_CLUSTER_TOL).unwrap();
        let errs: Vec<f64> = schedule_product(&map, &f, &schedule)
            .unwrap()
            .iter()
            .map(|(_, _, m)| norm(&(m - &target)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn decoupling_trivial_cases() {
        let x = random_contraction_generator(3, 13);
        let e = expm(&x, 0.6).unwrap();
        assert!(close(&decoupling_product(&identity(3), &x, 0.6, 7).unwrap(), &e, 1e-13));
        let u = random_unitary(3, 14);
        let once = decoupling_product(&u, &x, 0.6, 1).unwrap();
        assert!(close(&once, &(&u * &e * u.adjoint()), 1e-13));
        assert!(matches!(
            decoupling_product(&(u * c(2.0)), &x, 0.6, 1),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn decoupling_with_sign_pulse_converges_to_diagonal_part() {
        let u = OperatorMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-1.0)]));
        // iσ_x plus a non-scalar damping: dissipative, and not averaged away exactly
        let damping = OperatorMatrix::from_diagonal(&DVector::from_vec(vec![c(-0.5), c(-0.1)]));
        let x = OperatorMatrix::from_row_slice(2, 2, &[c(0.0), C64::i(), C64::i(), c(0.0)]) + &damping;
        let target = expm(&damping, 1.0).unwrap();
        assert!(close(&decoupling_limit(&u, &x, 1.0, 1e-8).unwrap(), &target, 1e-14));
        let errs: Vec<f64> = (6..=12)
            .map(|k| norm(&(decoupling_product(&u, &x, 1.0, 1 << k).unwrap() - &target)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(*errs.last().unwrap() <= 1e-2);
    }

    #[test]
    fn decoupling_accepts_complex_time() {
        let u = random_unitary(2, 15);
        let x = random_contraction_generator(2, 16);
        let z = decoupling_product_complex(&u, &x, C64::new(0.5, 0.5), 64).unwrap();
        assert!(linalg::is_finite(&z));
    }

    #[test]
    fn decoupling_with_periodic_pulse_matches_cyclic_product() {
        let f = dft_matrix(4);
        let x = random_contraction_generator(4, 17);
        let n = 64;
        let dec = decoupling_product(&f, &x, 1.0, n).unwrap();
        let us = vec![f.clone(); 4];
        let cyc = cyclic_product(&us, &x, 1.0, n).unwrap();
        // (F†)^n = 𝟙 since 4 divides n
        assert!(close(&dec, &cyc, 1e-10));
    }

    #[test]
    fn cyclic_examples() {
        let x = random_contraction_generator(3, 18);
        let e = expm(&x, 1.0).unwrap();
        assert!(close(&cyclic_product(&[identity(3)], &x, 1.0, 16).unwrap(), &e, 1e-12));
        assert!(matches!(
            cyclic_product(&[identity(3), identity(3)], &x, 1.0, 5),
            Err(Error::NotDivisible { n: 5, k: 2 })
        ));

        let u1 = random_unitary(3, 19);
        let us = [u1.clone(), u1.adjoint()];
        let target = expm(&cyclic_generator(&us, &x).unwrap(), 1.0).unwrap();
        let err = |n| norm(&(cyclic_product(&us, &x, 1.0, n).unwrap() - &target));
        assert!(err(4096) < err(64));
        // same limit through the two-unitary reformulation, where u = 𝟙
        let a = two_unitary_generator(&u1, &u1.adjoint(), &x, DEFAULT_CLUSTER_TOL).unwrap();
        assert!(close(&a, &cyclic_generator(&us, &x).unwrap(), 1e-12));
    }

    #[test]
    fn cyclic_dft_converges_to_four_term_mean() {
        let f = dft_matrix(4);
        let x = random_contraction_generator(4, 20);
        let map = ContractionMap::unitary_conjugation(f.clone()).unwrap();
        let p = ErgodicProjector::finite_mean(&map, 4).unwrap();
        let target = expm(&p.apply(&x).unwrap(), 1.0).unwrap();
        let us = vec![f; 4];
        let errs: Vec<f64> = [16, 256, 4096]
            .iter()
            .map(|&n| norm(&(cyclic_product(&us, &x, 1.0, n).unwrap() - &target)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn two_unitary_examples() {
        let x = random_contraction_generator(3, 21);
        let id = two_unitary_product(&identity(3), &identity(3), &x, 1.0, 10).unwrap();
        assert!(close(&id.corrected, &expm(&x, 1.0).unwrap(), 1e-12));
        assert!(matches!(
            two_unitary_product(&identity(3), &identity(3), &x, 1.0, 7),
            Err(Error::OddN(7))
        ));

        let u1 = random_unitary(3, 22);
        let inv = two_unitary_product(&u1, &u1.adjoint(), &x, 1.0, 10).unwrap();
        assert!(close(&inv.raw, &inv.corrected, 1e-13));
    }

    #[test]
    fn two_unitary_corrected_matches_family_product() {
        // raw·(u†)^{n/2} = V_{2t/n}·Π(V_{2t/n})···Π^{n/2−1}(V_{2t/n})
        let (u1, u2) = (random_unitary(3, 23), random_unitary(3, 24));
        let x = random_contraction_generator(3, 25);
        let n = 12;
        let prod = two_unitary_product(&u1, &u2, &x, 1.0, n).unwrap();
        let fam = OneParameterFamily::two_unitary(u1.clone(), u2.clone(), x).unwrap();
        let map = ContractionMap::unitary_conjugation(&u1 * &u2).unwrap();
        let v = fam.evaluate(2.0 / n as f64).unwrap();
        let shifted = &v * ordered_product(&map, &v, n / 2 - 1).unwrap();
        assert!(close(&prod.corrected, &shifted, 1e-12));
    }

    #[test]
    fn two_unitary_generator_matches_finite_difference() {
        let (u1, u2) = (random_unitary(3, 26), random_unitary(3, 27));
        let x = random_contraction_generator(3, 28);
        let fam = OneParameterFamily::two_unitary(u1.clone(), u2.clone(), x.clone()).unwrap();
        let p = exact_pinching_projector(&(&u1 * &u2), DEFAULT_CLUSTER_TOL).unwrap();
        let fd = projected_generator(&fam, &p, GeneratorMethod::default()).unwrap();
        let exact = two_unitary_generator(&u1, &u2, &x, DEFAULT_CLUSTER_TOL).unwrap();
        assert!(close(&fd.a, &exact, 1e-6));
    }

    #[test]
    fn zeno_examples() {
        let x = random_contraction_generator(4, 29);
        assert!(close(
            &zeno_product(&identity(4), &x, 1.0, 8).unwrap(),
            &expm(&x, 1.0).unwrap(),
            1e-12
        ));

        let v = linalg::random_unit_vector(4, 30);
        let p1 = &v * v.adjoint();
        let scalar = (v.adjoint() * &x * &v)[(0, 0)];
        let expected = &p1 * (scalar).exp();
        assert!(close(&zeno_limit(&p1, &x, 1.0).unwrap(), &expected, 1e-12));

        let q = random_unitary(4, 31);
        let cols = q.columns(0, 2);
        let p2 = cols * cols.adjoint();
        let target = zeno_limit(&p2, &x, 1.0).unwrap();
        let errs: Vec<f64> = [16, 256, 4096]
            .iter()
            .map(|&n| norm(&(zeno_product(&p2, &x, 1.0, n).unwrap() - &target)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(matches!(
            zeno_product(&(p2 * c(2.0)), &x, 1.0, 4),
            Err(Error::NotProjector(_))
        ));
    }

    #[test]
    fn chernoff_trivial_cases() {
        let v = linalg::random_unit_vector(3, 32);
        let b = chernoff_bound_check(&identity(3), &v, 10).unwrap();
        assert!(b.lhs < 1e-14 && b.rhs == 0.0);
        let s = random_contraction(3, 33);
        let b = chernoff_bound_check(&s, &v, 0).unwrap();
        assert!(b.lhs < 1e-14 && b.rhs == 0.0);
        assert!(matches!(
            chernoff_bound_check(&(s * c(2.0)), &v, 3),
            Err(Error::NotContraction(_))
        ));
    }

    #[test]
    fn chernoff_bound_sweep() {
        for trial in 0..50u64 {
            let d = 1 + (trial % 6) as usize;
            let s = random_contraction(d, 1000 + trial) * c(0.5 + 0.5 * ((trial % 5) as f64 / 4.0));
            let v = linalg::random_unit_vector(d, 2000 + trial);
            let n = 1 + (trial as usize * 13) % 64;
            let b = chernoff_bound_check(&s, &v, n).unwrap();
            assert!(b.holds(1e-9), "trial {trial}: {b:?}");
        }
    }

    #[test]
    fn ergodic_bound_on_fixed_point_is_trivial() {
        let map = ContractionMap::block_sign_flip(4).unwrap();
        let w = block_diag(&random_contraction(2, 34), &random_contraction(2, 35));
        let x = admissible_generator(&w, 1.0);
        let chk = ergodic_bound_check(&map, &x, 1.0, 8, DEFAULT_TRUNCATION_TOL).unwrap();
        assert!(chk.lhs <= 1e-9 && chk.bound == 0.0, "{chk:?}");
    }

    #[test]
    fn ergodic_bound_under_block_sign_flip() {
        let map = ContractionMap::block_sign_flip(4).unwrap();
        let x = admissible_generator(&random_contraction(4, 36), 1.0);
        for n in [4, 16, 64] {
            let chk = ergodic_bound_check(&map, &x, 1.0, n, DEFAULT_TRUNCATION_TOL).unwrap();
            assert!(chk.holds(10.0), "n={n}: {chk:?}");
        }
    }

    #[test]
    fn ergodic_bound_decays_like_one_over_n() {
        let map = ContractionMap::unitary_conjugation(random_unitary(3, 37)).unwrap();
        let x = admissible_generator(&random_contraction(3, 38), 1.0);
        let scaled: Vec<f64> = (2..=12)
            .map(|k| {
                let n = 1usize << k;
                n as f64
                    * ergodic_bound_check(&map, &x, 1.0, n, DEFAULT_TRUNCATION_TOL)
                        .unwrap()
                        .lhs
            })
            .collect();
        let first = scaled[0].max(scaled[1]);
        assert!(scaled.iter().all(|&s| s <= 4.0 * first), "{scaled:?}");
    }

    #[test]
    fn ergodic_bound_rejects_inadmissible_input() {
        let map = ContractionMap::identity(2);
        let x = identity(2);
        assert!(matches!(
            ergodic_bound_check(&map, &x, 1.0, 4, DEFAULT_TRUNCATION_TOL),
            Err(Error::HypothesisViolated(_))
        ));
        let p = OperatorMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        let zeno = ContractionMap::projection_compression(p).unwrap();
        let x = admissible_generator(&random_contraction(2, 39), 1.0);
        assert!(matches!(
            ergodic_bound_check(&zeno, &x, 1.0, 4, DEFAULT_TRUNCATION_TOL),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn telescoping_examples() {
        let map = ContractionMap::unitary_conjugation(random_unitary(3, 40)).unwrap();
        let w = random_contraction(3, 41);
        let x1 = admissible_generator(&w, 1.0);
        assert_eq!(telescoping_diff_check(&map, &x1, &x1, 1.0, 16).unwrap().lhs, 0.0);

        let eps = 1e-3;
        let w2 = random_contraction(3, 42);
        let x2 = &x1 + admissible_generator(&w2, eps);
        let chk = telescoping_diff_check(&map, &x1, &x2, 1.0, 16).unwrap();
        assert!(chk.holds(1e-9), "{chk:?}");
        assert!(chk.lhs <= eps * norm(&admissible_generator(&w2, 1.0)) + 1e-9);
    }

    #[test]
    fn products_of_contractions_stay_contractive() {
        let map = ContractionMap::unitary_conjugation(random_unitary(4, 43)).unwrap();
        let f = OneParameterFamily::exp(random_contraction_generator(4, 44)).unwrap();
        for n in [1, 7, 64, 512] {
            let p = iterated_product(&map, &f, 1.0, n).unwrap();
            assert!(norm(&p) <= 1.0 + n as f64 * 1e-12);
        }
    }
}
