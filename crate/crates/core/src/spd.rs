//! Geometry of the manifold of symmetric positive-definite matrices under the
//! affine-invariant metric.
//!
//! All functions are pure. Matrix functions go through a symmetric
//! eigendecomposition `M = U Λ Uᵀ` and symmetrize their output.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Relative gate between the smallest and largest eigenvalue of an SPD matrix.
pub const SPD_EPS: f64 = 1e-10;

/// Relative tolerance on `‖M − Mᵀ‖_max / ‖M‖_max`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default stopping tolerance of the Fréchet mean iteration.
pub const FRECHET_TOL: f64 = 1e-8;

/// Default iteration cap of the Fréchet mean iteration.
pub const FRECHET_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigenvalue {value:.6e} is not positive")]
    NonPositiveEigenvalue { value: f64 },
    #[error(
        "matrix is not positive definite: smallest eigenvalue {min:.6e}, largest {max:.6e} \
         (apply shrinkage to regularize)"
    )]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("Fréchet mean did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Box<SpdMatrix>,
    },
}

pub type Result<T> = std::result::Result<T, SpdError>;

/// Scalar function applied to the spectrum of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFn {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
}

impl MatrixFn {
    fn needs_positive(self) -> bool {
        !matches!(self, MatrixFn::Exp)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFn::Log => x.ln(),
            MatrixFn::Exp => x.exp(),
            MatrixFn::Sqrt => x.sqrt(),
            MatrixFn::InvSqrt => 1.0 / x.sqrt(),
        }
    }
}

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates and symmetrizes `m`.
    ///
    /// Fails when `m` is not square, not finite, asymmetric beyond
    /// [`SYMMETRY_TOL`], or when `λ_min ≤ SPD_EPS · λ_max`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let m = checked_symmetric(m)?;
        let eig = m.symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        if !(max > 0.0) || !(min > SPD_EPS * max) {
            return Err(SpdError::NotPositiveDefinite { min, max });
        }
        Ok(SpdMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.0.symmetric_eigenvalues()
    }

    pub fn inverse(&self) -> SpdMatrix {
        // Spectral inverse keeps the result symmetric.
        let eig = SymmetricEigen::new(self.0.clone());
        SpdMatrix(reconstruct(&eig.eigenvectors, eig.eigenvalues.map(|v| 1.0 / v)))
    }

    /// `W P Wᵀ` for an arbitrary invertible `W`.
    pub fn congruence(&self, w: &DMatrix<f64>) -> Result<SpdMatrix> {
        if w.ncols() != self.dim() {
            return Err(SpdError::DimensionMismatch {
                left: w.ncols(),
                right: self.dim(),
            });
        }
        SpdMatrix::new(symmetrize(&(w * &self.0 * w.transpose())))
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        spectral(&self.0, MatrixFn::Sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        spectral(&self.0, MatrixFn::InvSqrt)
    }

    pub fn log(&self) -> DMatrix<f64> {
        spectral(&self.0, MatrixFn::Log)
    }
}

/// A point of the tangent space: a symmetric, possibly indefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSymm(DMatrix<f64>);

impl TangentSymm {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        checked_symmetric(m).map(TangentSymm)
    }

    pub fn zeros(n: usize) -> Self {
        TangentSymm(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

fn checked_symmetric(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(SpdError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(SpdError::EmptyInput);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpdError::NonFinite);
    }
    let asymmetry = relative_asymmetry(&m);
    if asymmetry > SYMMETRY_TOL {
        return Err(SpdError::NotSymmetric { asymmetry });
    }
    Ok(symmetrize(&m))
}

fn reconstruct(vectors: &DMatrix<f64>, values: DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*v);
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// Spectral function of a matrix already known to be symmetric, with the
/// positivity precondition already established by the caller.
fn spectral(m: &DMatrix<f64>, f: MatrixFn) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    reconstruct(&eig.eigenvectors, eig.eigenvalues.map(|v| f.apply(v)))
}

/// `U f(Λ) Uᵀ` from the symmetric eigendecomposition of `m`.
pub fn symm_fn(m: &DMatrix<f64>, f: MatrixFn) -> Result<DMatrix<f64>> {
    let m = checked_symmetric(m.clone())?;
    let eig = SymmetricEigen::new(m);
    if f.needs_positive() {
        if let Some(&value) = eig.eigenvalues.iter().find(|v| !(**v > 0.0)) {
            return Err(SpdError::NonPositiveEigenvalue { value });
        }
    }
    Ok(reconstruct(&eig.eigenvectors, eig.eigenvalues.map(|v| f.apply(v))))
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SpdError::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// A reference point with its square root and inverse square root cached.
///
/// Whitened coordinates `P^{-1/2} Q P^{-1/2}` are the working representation
/// for distances, Log/Exp maps and the tangent-space vectorization.
#[derive(Debug, Clone)]
pub struct Reference {
    point: SpdMatrix,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl Reference {
    pub fn new(point: SpdMatrix) -> Self {
        let eig = SymmetricEigen::new(point.as_matrix().clone());
        let sqrt = reconstruct(&eig.eigenvectors, eig.eigenvalues.map(f64::sqrt));
        let inv_sqrt = reconstruct(&eig.eigenvectors, eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        Reference {
            point,
            sqrt,
            inv_sqrt,
        }
    }

    pub fn point(&self) -> &SpdMatrix {
        &self.point
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    /// `P^{-1/2} Q P^{-1/2}`, symmetrized.
    pub fn whiten(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dims(self.dim(), q.nrows())?;
        Ok(symmetrize(&(&self.inv_sqrt * q * &self.inv_sqrt)))
    }

    /// `P^{1/2} H P^{1/2}`, symmetrized.
    pub fn color(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.sqrt * h * &self.sqrt))
    }

    /// `Log(P^{-1/2} Q P^{-1/2})`: the Riemannian log expressed at the identity.
    pub fn whitened_log(&self, q: &SpdMatrix) -> Result<DMatrix<f64>> {
        let w = self.whiten(q.as_matrix())?;
        symm_fn(&w, MatrixFn::Log)
    }

    pub fn log_map(&self, q: &SpdMatrix) -> Result<TangentSymm> {
        Ok(TangentSymm(self.color(&self.whitened_log(q)?)))
    }

    pub fn exp_map(&self, s: &TangentSymm) -> Result<SpdMatrix> {
        let w = self.whiten(s.as_matrix())?;
        let e = spectral(&w, MatrixFn::Exp);
        SpdMatrix::new(self.color(&e))
    }

    pub fn distance(&self, q: &SpdMatrix) -> Result<f64> {
        let w = self.whiten(q.as_matrix())?;
        Ok(log_eigen_norm(&w))
    }
}

fn log_eigen_norm(w: &DMatrix<f64>) -> f64 {
    w.symmetric_eigenvalues()
        .iter()
        .map(|l| l.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Affine-invariant distance `sqrt(Σ log² λ_i(P1^{-1/2} P2 P1^{-1/2}))`.
pub fn distance(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    check_dims(p1.dim(), p2.dim())?;
    let w = p1.inv_sqrt();
    Ok(log_eigen_norm(&symmetrize(&(&w * p2.as_matrix() * &w))))
}

/// Riemannian logarithm of `pi` at the reference `p`.
pub fn log_map(p: &SpdMatrix, pi: &SpdMatrix) -> Result<TangentSymm> {
    check_dims(p.dim(), pi.dim())?;
    Reference::new(p.clone()).log_map(pi)
}

/// Riemannian exponential of the tangent vector `s` at the reference `p`.
pub fn exp_map(p: &SpdMatrix, s: &TangentSymm) -> Result<SpdMatrix> {
    check_dims(p.dim(), s.dim())?;
    Reference::new(p.clone()).exp_map(s)
}

/// Elementwise arithmetic mean; always SPD for SPD inputs.
pub fn arithmetic_mean(mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = mats.first().ok_or(SpdError::EmptyInput)?;
    let n = first.dim();
    let mut acc = DMatrix::zeros(n, n);
    for m in mats {
        check_dims(n, m.dim())?;
        acc += m.as_matrix();
    }
    SpdMatrix::new(acc / mats.len() as f64)
}

/// Fréchet (Karcher) mean under the affine-invariant metric.
///
/// Fixed-point iteration `P ← Exp_P(mean_i Log_P(P_i))` from the arithmetic
/// mean. The residual is the Frobenius norm of the whitened tangent mean
/// `(1/m) Σ Log(P^{-1/2} P_i P^{-1/2})`, i.e. the Riemannian norm of the
/// gradient at `P`; the iterate is returned once it drops below `tol`.
pub fn frechet_mean(mats: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<SpdMatrix> {
    let mut current = arithmetic_mean(mats)?;
    let m = mats.len() as f64;
    let mut residual = f64::INFINITY;
    for iteration in 0..=max_iter {
        let reference = Reference::new(current);
        let mut step = DMatrix::zeros(reference.dim(), reference.dim());
        for p in mats {
            step += reference.whitened_log(p)?;
        }
        step /= m;
        residual = step.norm();
        if residual < tol {
            return Ok(reference.point);
        }
        if iteration == max_iter {
            current = reference.point;
            break;
        }
        let e = spectral(&step, MatrixFn::Exp);
        current = SpdMatrix::new(reference.color(&e))?;
    }
    Err(SpdError::NoConvergence {
        iterations: max_iter,
        residual,
        last: Box::new(current),
    })
}
