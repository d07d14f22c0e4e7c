use rayon::prelude::*;

use super::{class_counts, ClassifierError, Result};
use crate::spd::{frechet_mean, Reference, SpdError, SpdMatrix, FRECHET_MAX_ITER, FRECHET_TOL};

/// Minimum distance to the class means on the SPD manifold.
#[derive(Debug, Clone)]
pub struct MdmModel {
    means: Vec<Reference>,
}

/// Predicted label and the distance to every class mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MdmPrediction {
    pub label: usize,
    pub distances: Vec<f64>,
}

impl MdmModel {
    /// Fits one Fréchet mean per class `0..n_classes`.
    pub fn fit(covs: &[SpdMatrix], labels: &[usize], n_classes: usize) -> Result<Self> {
        if covs.len() != labels.len() {
            return Err(ClassifierError::InvalidInput(format!(
                "{} covariances but {} labels",
                covs.len(),
                labels.len()
            )));
        }
        let counts = class_counts(labels, n_classes)?;
        if let Some(label) = counts.iter().position(|&c| c == 0) {
            return Err(ClassifierError::EmptyClass { label });
        }
        let dim = covs[0].dim();
        if let Some(c) = covs.iter().find(|c| c.dim() != dim) {
            return Err(SpdError::DimensionMismatch {
                left: dim,
                right: c.dim(),
            }
            .into());
        }
        let means = (0..n_classes)
            .into_par_iter()
            .map(|k| {
                let members: Vec<SpdMatrix> = covs
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == k)
                    .map(|(c, _)| c.clone())
                    .collect();
                frechet_mean(&members, FRECHET_TOL, FRECHET_MAX_ITER).map(Reference::new)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(MdmModel { means })
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].dim()
    }

    pub fn mean(&self, label: usize) -> &SpdMatrix {
        self.means[label].point()
    }

    pub fn distances(&self, cov: &SpdMatrix) -> Result<Vec<f64>> {
        self.means
            .iter()
            .map(|m| m.distance(cov).map_err(ClassifierError::from))
            .collect()
    }

    /// Nearest class mean; ties go to the lowest label.
    pub fn predict(&self, cov: &SpdMatrix) -> Result<MdmPrediction> {
        let distances = self.distances(cov)?;
        let mut label = 0;
        for (k, &d) in distances.iter().enumerate() {
            if d < distances[label] {
                label = k;
            }
        }
        Ok(MdmPrediction { label, distances })
    }

    /// `δ(cov, mean₀) − δ(cov, mean₁)` for binary models.
    pub fn score(&self, cov: &SpdMatrix) -> Result<f64> {
        if self.n_classes() != 2 {
            return Err(ClassifierError::InvalidInput(
                "ranking score needs a binary model".into(),
            ));
        }
        let d = self.distances(cov)?;
        Ok(d[0] - d[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::distance;

    fn diag(v: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(v).unwrap()
    }

    #[test]
    fn singleton_classes_are_their_own_means() {
        let a = diag(&[1.0, 2.0]);
        let b = diag(&[3.0, 0.5]);
        let m = MdmModel::fit(&[a.clone(), b.clone()], &[0, 1], 2).unwrap();
        assert!(distance(m.mean(0), &a).unwrap() < 1e-10);
        assert!(distance(m.mean(1), &b).unwrap() < 1e-10);
        let p = m.predict(&b).unwrap();
        assert_eq!(p.label, 1);
        assert!(p.distances[1] < 1e-10);
    }

    #[test]
    fn ties_go_to_first_label() {
        let m = MdmModel::fit(&[diag(&[2.0, 1.0]), diag(&[2.0, 1.0])], &[0, 1], 2).unwrap();
        let p = m.predict(&diag(&[1.0, 3.0])).unwrap();
        assert_eq!(p.distances[0], p.distances[1]);
        assert_eq!(p.label, 0);
        assert_eq!(m.score(&diag(&[1.0, 3.0])).unwrap(), 0.0);

        // Equidistant up to rounding: only the score sign is meaningful.
        let m = MdmModel::fit(&[diag(&[2.0]), diag(&[0.5])], &[0, 1], 2).unwrap();
        assert!(m.score(&diag(&[1.0])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = diag(&[1.0, 2.0]);
        assert_eq!(
            MdmModel::fit(&[a.clone(), a.clone()], &[0, 0], 2).unwrap_err(),
            ClassifierError::EmptyClass { label: 1 }
        );
        assert!(MdmModel::fit(&[a.clone(), diag(&[1.0])], &[0, 1], 2).is_err());
        let m = MdmModel::fit(&[a.clone(), a.clone()], &[0, 1], 2).unwrap();
        assert!(matches!(
            m.predict(&diag(&[1.0])),
            Err(ClassifierError::Spd(SpdError::DimensionMismatch { .. }))
        ));
    }
}
