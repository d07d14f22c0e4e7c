use nalgebra::DMatrix;

use super::Result;
use crate::spd::{frechet_mean, Reference, SpdMatrix, FRECHET_MAX_ITER, FRECHET_TOL};

/// Projection of SPD matrices to vectors in the tangent space at a reference
/// point.
#[derive(Debug, Clone)]
pub struct TangentMap {
    reference: Reference,
}

/// Row-major upper triangle of a symmetric matrix, off-diagonal entries
/// multiplied by √2 so the Euclidean norm equals the Frobenius norm.
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(m[(i, i)]);
        for j in i + 1..n {
            out.push(m[(i, j)] * std::f64::consts::SQRT_2);
        }
    }
    out
}

impl TangentMap {
    /// Reference at the Fréchet mean of the training covariances.
    pub fn fit(covs: &[SpdMatrix]) -> Result<Self> {
        let mean = frechet_mean(covs, FRECHET_TOL, FRECHET_MAX_ITER)?;
        Ok(Self::at(mean))
    }

    pub fn at(reference: SpdMatrix) -> Self {
        TangentMap {
            reference: Reference::new(reference),
        }
    }

    pub fn reference(&self) -> &SpdMatrix {
        self.reference.point()
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn output_len(&self) -> usize {
        let n = self.dim();
        n * (n + 1) / 2
    }

    /// `upper_triangle(Log(P̄^{-1/2} C P̄^{-1/2}))`.
    pub fn transform(&self, cov: &SpdMatrix) -> Result<Vec<f64>> {
        Ok(upper_triangle(&self.reference.whitened_log(cov)?))
    }
}
