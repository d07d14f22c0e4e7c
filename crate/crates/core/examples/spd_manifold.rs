//! Affine-invariant geometry on SPD matrices: distances, their invariances,
//! the exponential and logarithm maps, and the Fréchet mean.

use acm::spd::{distance, exp_map, frechet_mean, log_map, SpdMatrix, FRECHET_MAX_ITER, FRECHET_TOL};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = SpdMatrix::new(DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]))?;
    let b = SpdMatrix::from_diagonal(&[1.0, 2.0, 5.0])?;
    let d = distance(&a, &b)?;
    println!("d(A, B)            = {d:.6}");
    println!("d(B, A)            = {:.6}", distance(&b, &a)?);
    println!("d(A⁻¹, B⁻¹)        = {:.6}", distance(&a.inverse(), &b.inverse())?);

    // Any invertible W leaves the distance unchanged under P ↦ W P Wᵀ.
    let w = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, 0.3, 1.0, 0.7, 0.0, 0.5, -3.0]);
    println!("d(WAWᵀ, WBWᵀ)      = {:.6}", distance(&a.congruence(&w)?, &b.congruence(&w)?)?);

    // Exp undoes Log, and the tangent vector's length is the distance.
    let v = log_map(&a, &b)?;
    let back = exp_map(&a, &v)?;
    println!("‖Exp_A(Log_A B) − B‖ = {:.2e}", (back.as_matrix() - b.as_matrix()).norm());

    // For two matrices the mean is the geodesic midpoint A #½ B.
    let mean = frechet_mean(&[a.clone(), b.clone()], FRECHET_TOL, FRECHET_MAX_ITER)?;
    println!("d(A, M) − d(M, B)  = {:.2e}", distance(&a, &mean)? - distance(&mean, &b)?);
    println!("d(A, M) / d(A, B)  = {:.6}", distance(&a, &mean)? / d);
    Ok(())
}
