//! Contractions `Π` acting on `d×d` matrices and their mean ergodic
//! projectors.
//!
//! The fixed-point space `Ker(I−Π)` and the closure of `Rng(I−Π)` split the
//! matrices whose Cesàro means converge; the limit of the means is the
//! projection onto the first summand along the second. In finite dimension
//! every power-bounded map is mean ergodic, so [`cesaro_projector`] only has
//! to decide when the running mean has settled numerically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, derive_seed, identity, is_finite, least_squares_solve, norm, unvec, vec, OperatorMatrix, C64,
};

/// Tolerance on `‖Π‖ ≤ 1` used when certifying maps by sampling.
pub const CONTRACTION_SLACK: f64 = 1e-10;
/// Default eigenvalue clustering tolerance for exact pinching.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
/// Default absolute tolerance of the doubling test in [`cesaro_projector`].
pub const DEFAULT_CESARO_TOL: f64 = 1e-4;
/// Default term budget of [`cesaro_projector`].
pub const DEFAULT_MAX_TERMS: usize = 100_000;
/// Default relative singular value cutoff for [`ergodic_decompose`].
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

const UNITARY_TOL: f64 = 1e-10;
const PROJECTOR_TOL: f64 = 1e-10;
const UNITAL_TOL: f64 = 1e-12;
const CERTIFICATION_SAMPLES: usize = 200;
const SUPEROP_GUARD: usize = 4096;

/// The concrete form of a [`ContractionMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// `Πx = u x u†`.
    UnitaryConjugation { u: OperatorMatrix },
    /// `Πx = Σ_j Q_j x Q_j` over orthogonal projectors summing to `𝟙`.
    Pinching { blocks: Vec<OperatorMatrix> },
    /// On `2d₀×2d₀` matrices seen as `2×2` blocks: `(a b; c d) ↦ (a −b; −c d)`.
    BlockSignFlip,
    /// `Πx = p x p`; not unital unless `p = 𝟙`.
    ProjectionCompression { p: OperatorMatrix },
    /// `vec(Πx) = m·vec(x)` for an arbitrary `d²×d²` matrix `m`.
    ///
    /// Contractivity is certified by sampling 200 random unit-norm inputs, not
    /// by computing the induced norm, so a map that expands only on a thin set
    /// of directions can slip through.
    GeneralSuper { m: DMatrix<C64> },
}

/// A contraction on `L(C^d)`, with the unital marker `Π𝟙 = 𝟙`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionMap {
    dim: usize,
    kind: MapKind,
    unital: bool,
}

impl ContractionMap {
    /// The identity map on `d×d` matrices.
    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            kind: MapKind::UnitaryConjugation { u: identity(d) },
            unital: true,
        }
    }

    pub fn unitary_conjugation(u: OperatorMatrix) -> Result<Self> {
        let defect = linalg::unitarity_defect(&u);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self {
            dim: u.nrows(),
            kind: MapKind::UnitaryConjugation { u },
            unital: true,
        })
    }

    pub fn pinching(blocks: Vec<OperatorMatrix>) -> Result<Self> {
        let dim = validate_blocks(&blocks)?;
        Ok(Self {
            dim,
            kind: MapKind::Pinching { blocks },
            unital: true,
        })
    }

    /// Sign flip of the off-diagonal blocks on `2d₀×2d₀` matrices.
    pub fn block_sign_flip(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "block sign flip needs an even dimension, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            kind: MapKind::BlockSignFlip,
            unital: true,
        })
    }

    pub fn projection_compression(p: OperatorMatrix) -> Result<Self> {
        let defect = linalg::projector_defect(&p);
        if defect > PROJECTOR_TOL {
            return Err(Error::NotProjector(defect));
        }
        let dim = p.nrows();
        let unital = norm(&(&p - identity(dim))) <= UNITAL_TOL;
        Ok(Self {
            dim,
            kind: MapKind::ProjectionCompression { p },
            unital,
        })
    }

    /// Wraps an arbitrary superoperator matrix, rejecting it if any of 200
    /// seeded unit-norm samples is expanded beyond `1 + 1e−10`.
    pub fn general(m: DMatrix<C64>) -> Result<Self> {
        let d2 = m.nrows();
        if m.ncols() != d2 {
            return Err(Error::DimMismatch {
                expected: d2,
                found: m.ncols(),
            });
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let dim = (d2 as f64).sqrt().round() as usize;
        if dim * dim != d2 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "superoperator size {d2} is not a perfect square"
            )));
        }
        let map = Self {
            dim,
            kind: MapKind::GeneralSuper { m },
            unital: false,
        };
        let mut worst: f64 = 0.0;
        for s in 0..CERTIFICATION_SAMPLES {
            let x = linalg::random_contraction(dim, derive_seed(0xC0FFEE, s as u64));
            worst = worst.max(norm(&map.apply_unchecked(&x)));
        }
        if worst > 1.0 + CONTRACTION_SLACK {
            return Err(Error::NotContraction(worst));
        }
        let unital = norm(&(map.apply_unchecked(&identity(dim)) - identity(dim))) <= UNITAL_TOL;
        Ok(Self { unital, ..map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// Whether `Π𝟙 = 𝟙`.
    pub fn is_unital(&self) -> bool {
        self.unital
    }

    fn check_dim(&self, x: &OperatorMatrix) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: if x.nrows() != self.dim { x.nrows() } else { x.ncols() },
            });
        }
        Ok(())
    }

    /// `Πx`.
    pub fn apply(&self, x: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_dim(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &OperatorMatrix) -> OperatorMatrix {
        match &self.kind {
            MapKind::UnitaryConjugation { u } => u * x * u.adjoint(),
            MapKind::Pinching { blocks } => blocks
                .iter()
                .fold(OperatorMatrix::zeros(self.dim, self.dim), |acc, q| acc + q * x * q),
            MapKind::BlockSignFlip => {
                let half = self.dim / 2;
                OperatorMatrix::from_fn(self.dim, self.dim, |i, j| {
                    if (i < half) == (j < half) {
                        x[(i, j)]
                    } else {
                        -x[(i, j)]
                    }
                })
            }
            MapKind::ProjectionCompression { p } => p * x * p,
            MapKind::GeneralSuper { m } => unvec(&(m * vec(x)), self.dim),
        }
    }

    /// `Π^k x`; `k = 0` returns `x`.
    pub fn iterate(&self, x: &OperatorMatrix, k: usize) -> Result<OperatorMatrix> {
        self.check_dim(x)?;
        if k == 0 {
            return Ok(x.clone());
        }
        Ok(match &self.kind {
            MapKind::UnitaryConjugation { u } => {
                let uk = linalg::matrix_power(u, k);
                &uk * x * uk.adjoint()
            }
            MapKind::BlockSignFlip if k.is_multiple_of(2) => x.clone(),
            // idempotent maps
            MapKind::BlockSignFlip | MapKind::Pinching { .. } | MapKind::ProjectionCompression { .. } => {
                self.apply_unchecked(x)
            }
            MapKind::GeneralSuper { .. } => {
                let mut y = x.clone();
                for _ in 0..k {
                    y = self.apply_unchecked(&y);
                }
                y
            }
        })
    }

    /// The `d²×d²` matrix `m` with `m·vec(x) = vec(Πx)` for column-stacking
    /// `vec`.
    pub fn superop_matrix(&self) -> Result<DMatrix<C64>> {
        let d = self.dim;
        if d * d > SUPEROP_GUARD {
            return Err(Error::TooLarge(d));
        }
        if let MapKind::GeneralSuper { m } = &self.kind {
            return Ok(m.clone());
        }
        let mut m = DMatrix::<C64>::zeros(d * d, d * d);
        let mut e = OperatorMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                e[(i, j)] = C64::new(1.0, 0.0);
                let image = self.apply_unchecked(&e);
                m.column_mut(i + j * d).copy_from_slice(image.as_slice());
                e[(i, j)] = C64::new(0.0, 0.0);
            }
        }
        debug_assert!((0..10).all(|s| {
            let x = linalg::random_matrix(d, d, derive_seed(0x5EED, s));
            let lhs = unvec(&(&m * vec(&x)), d);
            norm(&(lhs - self.apply_unchecked(&x))) <= 1e-12 * (1.0 + norm(&x))
        }));
        Ok(m)
    }

    /// The exact ergodic projector when it has a closed form.
    pub fn exact_projector(&self, cluster_tol: f64) -> Option<Result<ErgodicProjector>> {
        let d = self.dim;
        match &self.kind {
            MapKind::UnitaryConjugation { u } => Some(exact_pinching_projector(u, cluster_tol)),
            MapKind::Pinching { blocks } => Some(Ok(ErgodicProjector::from_blocks_unchecked(d, blocks.clone()))),
            MapKind::BlockSignFlip => {
                let half = d / 2;
                let upper =
                    OperatorMatrix::from_fn(d, d, |i, j| C64::new(if i == j && i < half { 1.0 } else { 0.0 }, 0.0));
                let lower = identity(d) - &upper;
                Some(Ok(ErgodicProjector::from_blocks_unchecked(d, vec![upper, lower])))
            }
            // Π is idempotent, so every Cesàro mean equals Π itself
            MapKind::ProjectionCompression { .. } => Some(Ok(ErgodicProjector {
                dim: d,
                kind: ProjectorKind::CesaroEstimate {
                    map: self.clone(),
                    n_terms: 1,
                    residual: 0.0,
                },
            })),
            MapKind::GeneralSuper { .. } => None,
        }
    }
}

fn validate_blocks(blocks: &[OperatorMatrix]) -> Result<usize> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("pinching needs at least one block".into()))?;
    let dim = first.nrows();
    let mut total = OperatorMatrix::zeros(dim, dim);
    for q in blocks {
        if q.nrows() != dim || q.ncols() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: q.nrows(),
            });
        }
        let defect = linalg::projector_defect(q);
        if defect > PROJECTOR_TOL {
            return Err(Error::NotProjector(defect));
        }
        total += q;
    }
    let completeness = norm(&(total - identity(dim)));
    if completeness > PROJECTOR_TOL {
        return Err(Error::InvalidArgument(format!(
            "pinching blocks do not sum to the identity (deviation {completeness:e})"
        )));
    }
    Ok(dim)
}

/// Diagnostics returned by [`cesaro_projector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CesaroDiagnostics {
    pub terms_used: usize,
    /// `‖ΠM_n − M_n‖` for the returned mean.
    pub residual: f64,
}

/// Running Cesàro mean `M_n = (1/n) Σ_{k=1..n} Π^k x`, stopped at the first
/// power of two `n` with `‖M_n − M_{2n}‖ ≤ tol` and `‖M_{2n} − M_{4n}‖ ≤ tol`.
///
/// A single doubling can pass by accident when a quasi-periodic mean is
/// momentarily flat.
///
/// If the budget runs out first, `M_{max_terms}` is returned provided its
/// residual is within `tol`; otherwise the call fails with `NoConvergence`.
pub fn cesaro_projector(
    map: &ContractionMap,
    x: &OperatorMatrix,
    tol: f64,
    max_terms: usize,
) -> Result<(OperatorMatrix, CesaroDiagnostics)> {
    map.check_dim(x)?;
    if !(tol > 0.0) || max_terms == 0 {
        return Err(Error::InvalidArgument(
            "Cesàro mean needs tol > 0 and max_terms ≥ 1".into(),
        ));
    }
    let d = map.dim();
    let mut sum = OperatorMatrix::zeros(d, d);
    let mut iterate = x.clone();
    let mut checkpoint = 1usize;
    let mut previous: Option<(usize, OperatorMatrix)> = None;
    let mut accepted: Option<(usize, OperatorMatrix)> = None;
    for k in 1..=max_terms {
        iterate = map.apply_unchecked(&iterate);
        sum += &iterate;
        if k == checkpoint {
            let mean = &sum / C64::new(k as f64, 0.0);
            if let Some((n, prev)) = previous.take() {
                if norm(&(&prev - &mean)) <= tol {
                    if let Some((n, first)) = accepted.take() {
                        let residual = norm(&(map.apply_unchecked(&first) - &first));
                        return Ok((
                            first,
                            CesaroDiagnostics {
                                terms_used: n,
                                residual,
                            },
                        ));
                    }
                    accepted = Some((n, prev));
                } else {
                    accepted = None;
                }
            }
            previous = Some((k, mean));
            checkpoint *= 2;
        }
    }
    let mean = sum / C64::new(max_terms as f64, 0.0);
    let residual = norm(&(map.apply_unchecked(&mean) - &mean));
    if residual > tol {
        return Err(Error::NoConvergence {
            terms: max_terms,
            residual,
        });
    }
    Ok((
        mean,
        CesaroDiagnostics {
            terms_used: max_terms,
            residual,
        },
    ))
}

/// How an [`ErgodicProjector`] computes `Px`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectorKind {
    /// `Px = (1/n) Σ_{k=1..n} Π^k x` with a fixed `n`; exact whenever
    /// `Π^n = I`.
    CesaroEstimate {
        map: ContractionMap,
        n_terms: usize,
        residual: f64,
    },
    /// `Px = Σ_j Q_j x Q_j`.
    ExactPinching { blocks: Vec<OperatorMatrix> },
}

/// The mean ergodic projector `P` onto `Ker(I−Π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicProjector {
    dim: usize,
    kind: ProjectorKind,
}

impl ErgodicProjector {
    pub fn identity(d: usize) -> Self {
        Self::from_blocks_unchecked(d, vec![identity(d)])
    }

    /// Pinching projector for the given spectral blocks.
    pub fn from_blocks(blocks: Vec<OperatorMatrix>) -> Result<Self> {
        let dim = validate_blocks(&blocks)?;
        Ok(Self::from_blocks_unchecked(dim, blocks))
    }

    fn from_blocks_unchecked(dim: usize, blocks: Vec<OperatorMatrix>) -> Self {
        Self {
            dim,
            kind: ProjectorKind::ExactPinching { blocks },
        }
    }

    /// Fixed-length Cesàro mean. The stored residual is the largest
    /// `‖Π(Px) − Px‖` over a few seeded unit-norm probes.
    pub fn finite_mean(map: &ContractionMap, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
        }
        let mut projector = Self {
            dim: map.dim(),
            kind: ProjectorKind::CesaroEstimate {
                map: map.clone(),
                n_terms,
                residual: 0.0,
            },
        };
        let residual = (0..4)
            .map(|s| {
                let x = linalg::random_contraction(map.dim(), derive_seed(0xE4600, s));
                let px = projector.apply_unchecked(&x);
                norm(&(map.apply_unchecked(&px) - px))
            })
            .fold(0.0, f64::max);
        if let ProjectorKind::CesaroEstimate { residual: r, .. } = &mut projector.kind {
            *r = residual;
        }
        Ok(projector)
    }

    /// Cesàro estimate whose length is the largest `terms_used` reported by
    /// [`cesaro_projector`] on a few seeded probes.
    pub fn cesaro(map: &ContractionMap, tol: f64, max_terms: usize) -> Result<Self> {
        let mut n_terms = 1;
        for s in 0..4 {
            let x = linalg::random_contraction(map.dim(), derive_seed(0xE4601, s));
            let (_, diag) = cesaro_projector(map, &x, tol, max_terms)?;
            n_terms = n_terms.max(diag.terms_used);
        }
        Self::finite_mean(map, n_terms)
    }

    /// Exact projector when the map has one, otherwise a Cesàro estimate.
    pub fn for_map(map: &ContractionMap, cluster_tol: f64, cesaro_tol: f64, max_terms: usize) -> Result<Self> {
        match map.exact_projector(cluster_tol) {
            Some(p) => p,
            None => Self::cesaro(map, cesaro_tol, max_terms),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ProjectorKind {
        &self.kind
    }

    /// Residual diagnostic; zero for the exact kinds.
    pub fn residual(&self) -> f64 {
        match &self.kind {
            ProjectorKind::CesaroEstimate { residual, .. } => *residual,
            ProjectorKind::ExactPinching { .. } => 0.0,
        }
    }

    pub fn apply(&self, x: &OperatorMatrix) -> Result<OperatorMatrix> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: x.nrows(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &OperatorMatrix) -> OperatorMatrix {
        match &self.kind {
            ProjectorKind::ExactPinching { blocks } => blocks
                .iter()
                .fold(OperatorMatrix::zeros(self.dim, self.dim), |acc, q| acc + q * x * q),
            ProjectorKind::CesaroEstimate { map, n_terms, .. } => {
                let mut sum = OperatorMatrix::zeros(self.dim, self.dim);
                let mut iterate = x.clone();
                for _ in 0..*n_terms {
                    iterate = map.apply_unchecked(&iterate);
                    sum += &iterate;
                }
                sum / C64::new(*n_terms as f64, 0.0)
            }
        }
    }
}

/// Projector onto the commutant `{x : [u, x] = 0}`: the pinching by the
/// spectral projectors of `u`, with eigenvalues within `cluster_tol` of each
/// other (transitively) treated as one eigenvalue.
pub fn exact_pinching_projector(u: &OperatorMatrix, cluster_tol: f64) -> Result<ErgodicProjector> {
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let d = u.nrows();
    // a normal matrix has a diagonal Schur form; its Schur vectors are eigenvectors
    let schur = nalgebra::Schur::try_new(u.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::DegenerateInput("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let eigenvalues: Vec<C64> = (0..d).map(|i| t[(i, i)]).collect();

    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        parent[i] = root;
        root
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= cluster_tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    let mut blocks: Vec<(usize, OperatorMatrix)> = Vec::new();
    for i in 0..d {
        let root = find(&mut parent, i);
        let column = q.column(i);
        let rank_one = column * column.adjoint();
        match blocks.iter_mut().find(|(r, _)| *r == root) {
            Some((_, block)) => *block += rank_one,
            None => blocks.push((root, rank_one)),
        }
    }
    Ok(ErgodicProjector::from_blocks_unchecked(
        d,
        blocks.into_iter().map(|(_, b)| b).collect(),
    ))
}

/// `x = Px + (y − Πy)`, with the residual of the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub px: OperatorMatrix,
    pub y: OperatorMatrix,
    pub residual: f64,
}

/// Splits `x` into its fixed-point part and a preimage under `I−Π`, using the
/// exact projector when the map has one and a Cesàro mean otherwise.
pub fn ergodic_decompose(map: &ContractionMap, x: &OperatorMatrix, truncation_tol: f64) -> Result<Decomposition> {
    map.check_dim(x)?;
    let px = match map.exact_projector(DEFAULT_CLUSTER_TOL) {
        Some(p) => p?.apply_unchecked(x),
        None => cesaro_projector(map, x, DEFAULT_CESARO_TOL, DEFAULT_MAX_TERMS)?.0,
    };
    decompose_with(map, x, px, truncation_tol)
}

/// As [`ergodic_decompose`] with a caller-supplied projector.
pub fn ergodic_decompose_with(
    map: &ContractionMap,
    projector: &ErgodicProjector,
    x: &OperatorMatrix,
    truncation_tol: f64,
) -> Result<Decomposition> {
    map.check_dim(x)?;
    let px = projector.apply(x)?;
    decompose_with(map, x, px, truncation_tol)
}

fn decompose_with(
    map: &ContractionMap,
    x: &OperatorMatrix,
    px: OperatorMatrix,
    truncation_tol: f64,
) -> Result<Decomposition> {
    let d = map.dim();
    let range_part = x - &px;
    let y = if norm(&range_part) <= 1e-14 * (1.0 + norm(x)) {
        OperatorMatrix::zeros(d, d)
    } else {
        let m = map.superop_matrix()?;
        let system = DMatrix::<C64>::identity(d * d, d * d) - m;
        let rhs: DVector<C64> = vec(&range_part);
        unvec(&least_squares_solve(&system, &rhs, truncation_tol)?, d)
    };
    let residual = norm(&(range_part - (&y - map.apply_unchecked(&y))));
    Ok(Decomposition { px, y, residual })
}
