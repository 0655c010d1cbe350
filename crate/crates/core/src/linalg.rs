//! Dense complex linear algebra on `C^d`.
//!
//! Operators are plain `nalgebra` matrices of `Complex64`; every concrete
//! operator in the laboratory (generators, unitaries, family values, limits)
//! lives in an [`OperatorMatrix`]. Norms are spectral (largest singular
//! value), i.e. the operator norm induced by the Euclidean norm on `C^d`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex `d×d` matrix.
pub type OperatorMatrix = DMatrix<C64>;

/// Dense complex `d`-vector, used for per-vector (strong topology) errors.
pub type VectorState = DVector<C64>;

/// Relative accuracy targeted by [`expm`] for `‖t·x‖ ≤ 100`.
pub const EXPM_TOLERANCE: f64 = 1e-12;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn is_finite(x: &OperatorMatrix) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn ensure_finite(x: &OperatorMatrix) -> Result<()> {
    if is_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(x: &OperatorMatrix) -> Result<()> {
    if x.nrows() == x.ncols() {
        Ok(())
    } else {
        Err(Error::DimMismatch {
            expected: x.nrows(),
            found: x.ncols(),
        })
    }
}

pub fn identity(d: usize) -> OperatorMatrix {
    OperatorMatrix::identity(d, d)
}

/// `e^{t·x}` for real `t`.
pub fn expm(x: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    expm_scaled(x, C64::new(t, 0.0))
}

/// `e^{c·x}` for complex `c`, by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm_scaled(x: &OperatorMatrix, c: C64) -> Result<OperatorMatrix> {
    ensure_square(x)?;
    ensure_finite(x)?;
    if !(c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = x.nrows();
    let a = x * c;
    let norm1 = one_norm(&a);
    if !norm1.is_finite() {
        return Err(Error::Overflow);
    }
    if norm1 == 0.0 {
        return Ok(identity(d));
    }

    for (theta, coeffs) in [
        (THETA_3, &PADE_3[..]),
        (THETA_5, &PADE_5[..]),
        (THETA_7, &PADE_7[..]),
        (THETA_9, &PADE_9[..]),
    ] {
        if norm1 <= theta {
            let (u, v) = pade_low(&a, coeffs);
            return pade_solve(u, v);
        }
    }

    let s = (norm1 / THETA_13).log2().ceil().max(0.0);
    // 2^s would leave the f64 exponent range long before squaring finishes
    if s > 1000.0 {
        return Err(Error::Overflow);
    }
    let s = s as i32;
    let a = a * C64::new(2f64.powi(-s), 0.0);
    let (u, v) = pade_13(&a);
    let mut r = pade_solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if is_finite(&r) {
        Ok(r)
    } else {
        Err(Error::Overflow)
    }
}

fn one_norm(a: &OperatorMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn real(c: f64) -> C64 {
    C64::new(c, 0.0)
}

fn pade_low(a: &OperatorMatrix, b: &[f64]) -> (OperatorMatrix, OperatorMatrix) {
    let d = a.nrows();
    let a2 = a * a;
    let mut power = identity(d);
    let mut u_even = OperatorMatrix::zeros(d, d);
    let mut v = OperatorMatrix::zeros(d, d);
    for j in (0..b.len()).step_by(2) {
        v += &power * real(b[j]);
        if j + 1 < b.len() {
            u_even += &power * real(b[j + 1]);
        }
        power = &power * &a2;
    }
    (a * u_even, v)
}

fn pade_13(a: &OperatorMatrix) -> (OperatorMatrix, OperatorMatrix) {
    let b = &PADE_13;
    let d = a.nrows();
    let id = identity(d);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]);
    let u = a * (&a6 * inner_u + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + &id * real(b[1]));
    let inner_v = &a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]);
    let v = &a6 * inner_v + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + &id * real(b[0]);
    (u, v)
}

fn pade_solve(u: OperatorMatrix, v: OperatorMatrix) -> Result<OperatorMatrix> {
    let p = &v + &u;
    let q = v - u;
    let r = q.lu().solve(&p).ok_or(Error::Overflow)?;
    if is_finite(&r) {
        Ok(r)
    } else {
        Err(Error::Overflow)
    }
}

/// Largest singular value.
pub fn spectral_norm(x: &OperatorMatrix) -> Result<f64> {
    ensure_finite(x)?;
    Ok(norm(x))
}

/// Spectral norm without the finiteness check; NaN propagates.
pub(crate) fn norm(x: &OperatorMatrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.clone().singular_values().max()
}

pub fn vector_norm(v: &VectorState) -> f64 {
    v.norm()
}

pub fn is_unitary(u: &OperatorMatrix, tol: f64) -> bool {
    unitarity_defect(u) <= tol
}

/// `‖u†u − 𝟙‖`, or infinity for non-square input.
pub fn unitarity_defect(u: &OperatorMatrix) -> f64 {
    if u.nrows() != u.ncols() || !is_finite(u) {
        return f64::INFINITY;
    }
    norm(&(u.adjoint() * u - identity(u.nrows())))
}

/// `max(‖p² − p‖, ‖p − p†‖)`.
pub fn projector_defect(p: &OperatorMatrix) -> f64 {
    if p.nrows() != p.ncols() || !is_finite(p) {
        return f64::INFINITY;
    }
    norm(&(p * p - p)).max(norm(&(p - p.adjoint())))
}

/// `u^k` by repeated squaring.
pub fn matrix_power(u: &OperatorMatrix, mut k: usize) -> OperatorMatrix {
    let mut result = identity(u.nrows());
    let mut base = u.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a * b - b * a
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = OperatorMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

/// Unitary DFT matrix `F_{jk} = e^{−2πi jk/d}/√d`, with `F⁴ = 𝟙`.
pub fn dft_matrix(d: usize) -> OperatorMatrix {
    let scale = 1.0 / (d as f64).sqrt();
    OperatorMatrix::from_fn(d, d, |j, k| {
        let phase = -2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
        C64::from_polar(scale, phase)
    })
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(r: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix with `E|x_ij|² = 1`.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<C64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| gaussian(&mut r))
}

/// Uniformly random unit vector in `C^d`.
pub fn random_unit_vector(d: usize, seed: u64) -> VectorState {
    let mut r = rng(seed);
    let v = VectorState::from_fn(d, |_, _| gaussian(&mut r));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Random matrix of unit spectral norm.
pub fn random_contraction(d: usize, seed: u64) -> OperatorMatrix {
    let g = random_matrix(d, d, seed);
    let n = norm(&g);
    g / C64::new(n, 0.0)
}

/// Dissipative generator `x = iH − B†B`; its Hermitian part is `−B†B ⪯ 0`,
/// so `‖e^{tx}‖ ≤ 1` for every `t ≥ 0`.
pub fn random_contraction_generator(d: usize, seed: u64) -> OperatorMatrix {
    assert!(d >= 1, "dimension must be positive");
    let scale = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let g = random_matrix(d, d, derive_seed(seed, 1)) * scale;
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let b = random_matrix(d, d, derive_seed(seed, 2)) * (scale * std::f64::consts::FRAC_1_SQRT_2);
    h * C64::i() - b.adjoint() * b
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn random_unitary(d: usize, seed: u64) -> OperatorMatrix {
    assert!(d >= 1, "dimension must be positive");
    let g = random_matrix(d, d, derive_seed(seed, 3));
    let (q, r) = g.qr().unpack();
    let mut q = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Minimum-norm least-squares solution of `m·z = rhs`, discarding singular
/// values below `truncation_tol × σ_max`.
pub fn least_squares_solve(m: &DMatrix<C64>, rhs: &DVector<C64>, truncation_tol: f64) -> Result<DVector<C64>> {
    if !(is_finite(m) && rhs.iter().all(|z| z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite);
    }
    if rhs.len() != m.nrows() {
        return Err(Error::DimMismatch {
            expected: m.nrows(),
            found: rhs.len(),
        });
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = truncation_tol * sigma_max;
    if !(sigma_max > 0.0) || svd.singular_values.iter().all(|&s| s < cutoff) {
        return Err(Error::DegenerateInput(
            "all singular values below the truncation threshold".into(),
        ));
    }
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut coeffs = u.adjoint() * rhs;
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s >= cutoff && s > 0.0 {
            *c / s
        } else {
            C64::new(0.0, 0.0)
        };
    }
    Ok(v_t.adjoint() * coeffs)
}

/// Column-stacking vectorization.
pub fn vec(x: &OperatorMatrix) -> DVector<C64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<C64>, d: usize) -> OperatorMatrix {
    OperatorMatrix::from_column_slice(d, d, v.as_slice())
}

/// Hermitian part `(x + x†)/2`.
pub fn hermitian_part(x: &OperatorMatrix) -> OperatorMatrix {
    (x + x.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &OperatorMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
