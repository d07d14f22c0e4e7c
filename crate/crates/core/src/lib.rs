//! Augmented covariance matrices for Riemannian classification of
//! multichannel time-series epochs.
//!
//! Epochs are summarized by the covariance of their delay-embedded form (the
//! augmented covariance), then classified on the SPD manifold by minimum
//! distance to the class means or in the tangent space with a support-vector
//! machine. Order and lag of the embedding come from a nested grid search or
//! from nonlinear-dynamics estimators.

pub mod classifiers;
pub mod cli;
pub mod covariance;
pub mod data;
pub mod embedding;
pub mod eval;
pub mod spd;
