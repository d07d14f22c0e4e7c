//! Soft-margin support-vector machine trained by sequential minimal
//! optimization with maximal-violating-pair working-set selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{class_counts, ClassifierError, Result};

/// Stopping tolerance on the maximal KKT violation.
pub const SMO_TOLERANCE: f64 = 1e-3;

/// Floor for a non-positive pair curvature.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf => "rbf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    /// RBF width; `None` means `1 / (n_features · variance of all entries)`.
    pub gamma: Option<f64>,
}

impl SvmParams {
    pub fn new(c: f64, kernel: Kernel) -> Self {
        SvmParams { c, kernel, gamma: None }
    }
}

/// One two-class machine: `f(x) = Σ coef_i K(sv_i, x) − rho`, positive for
/// the target class.
#[derive(Debug, Clone, PartialEq)]
struct Machine {
    support: Vec<Vec<f64>>,
    /// `α_i · y_i` of each support vector.
    coef: Vec<f64>,
    rho: f64,
    /// Collapsed weight vector for the linear kernel.
    weights: Option<Vec<f64>>,
    kkt_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    kernel: Kernel,
    c: f64,
    gamma: f64,
    n_features: usize,
    /// One machine for two classes (target label 1), otherwise one per class.
    machines: Vec<Machine>,
}

fn kernel_value(kernel: Kernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Kernel::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

fn default_gamma(features: &[Vec<f64>]) -> f64 {
    let n = features.len() * features[0].len();
    let mean = features.iter().flatten().sum::<f64>() / n as f64;
    let var = features.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var > 0.0 {
        1.0 / (features[0].len() as f64 * var)
    } else {
        1.0
    }
}

/// Dual solution `(α, rho, final gap)` of
/// `min ½ αᵀQα − Σα, 0 ≤ α ≤ c, yᵀα = 0` with `Q_ij = y_i y_j K_ij`.
fn smo(k: &DMatrix<f64>, y: &[f64], c: f64) -> Result<(Vec<f64>, f64, f64)> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(100_000);
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];

    let mut iterations = 0;
    loop {
        // i maximizes −y G over I_up, j minimizes it over I_low.
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < SMO_TOLERANCE {
            let rho = bias(&alpha, &grad, y, c);
            return Ok((alpha, rho, gap.max(0.0)));
        }
        if iterations >= max_iter {
            return Err(ClassifierError::SolverStall {
                iterations,
                kkt_gap: gap,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let curv = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (-grad[i] - grad[j]) / curv;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let curv = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (grad[i] - grad[j]) / curv;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
}

/// Mean of `y G` over free vectors, else the midpoint of the feasible range.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

impl SvmModel {
    /// Binary machine for two classes, one-vs-rest otherwise.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], n_classes: usize, params: &SvmParams) -> Result<Self> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(ClassifierError::InvalidInput(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let counts = class_counts(labels, n_classes)?;
        if let Some(label) = counts.iter().position(|&c| c == 0) {
            return Err(ClassifierError::EmptyClass { label });
        }
        let n_features = features[0].len();
        if features.iter().any(|f| f.len() != n_features || f.iter().any(|v| !v.is_finite())) {
            return Err(ClassifierError::InvalidInput("ragged or non-finite features".into()));
        }
        if !(params.c > 0.0 && params.c.is_finite()) {
            return Err(ClassifierError::InvalidInput(format!("C must be positive, got {}", params.c)));
        }
        let gamma = match params.gamma {
            Some(g) if g > 0.0 && g.is_finite() => g,
            Some(g) => return Err(ClassifierError::InvalidInput(format!("gamma must be positive, got {g}"))),
            None => default_gamma(features),
        };
        let n = features.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel_value(params.kernel, gamma, &features[i], &features[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let targets: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let machines = targets
            .into_iter()
            .map(|target| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == target { 1.0 } else { -1.0 }).collect();
                let (alpha, rho, kkt_gap) = smo(&k, &y, params.c)?;
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for t in 0..n {
                    if alpha[t] > 0.0 {
                        support.push(features[t].clone());
                        coef.push(alpha[t] * y[t]);
                    }
                }
                let weights = (params.kernel == Kernel::Linear).then(|| {
                    let mut w = vec![0.0; n_features];
                    for (sv, a) in support.iter().zip(&coef) {
                        w.iter_mut().zip(sv).for_each(|(wi, x)| *wi += a * x);
                    }
                    w
                });
                Ok(Machine {
                    support,
                    coef,
                    rho,
                    weights,
                    kkt_gap,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvmModel {
            kernel: params.kernel,
            c: params.c,
            gamma,
            n_features,
            machines,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_classes(&self) -> usize {
        if self.machines.len() == 1 {
            2
        } else {
            self.machines.len()
        }
    }

    /// Support vectors and their `α·y` coefficients, per machine.
    pub fn support(&self) -> Vec<(&[Vec<f64>], &[f64])> {
        self.machines.iter().map(|m| (&m.support[..], &m.coef[..])).collect()
    }

    pub fn bias(&self) -> Vec<f64> {
        self.machines.iter().map(|m| -m.rho).collect()
    }

    /// Largest final KKT violation over the machines.
    pub fn kkt_gap(&self) -> f64 {
        self.machines.iter().map(|m| m.kkt_gap).fold(0.0, f64::max)
    }

    fn machine_value(&self, m: &Machine, x: &[f64]) -> f64 {
        let raw = match &m.weights {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum(),
            None => m
                .support
                .iter()
                .zip(&m.coef)
                .map(|(sv, a)| a * kernel_value(self.kernel, self.gamma, sv, x))
                .sum::<f64>(),
        };
        raw - m.rho
    }

    /// One value per machine.
    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(ClassifierError::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(self.machines.iter().map(|m| self.machine_value(m, x)).collect())
    }

    /// Sign of the binary decision, or argmax over one-vs-rest machines with
    /// ties to the lowest label.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let d = self.decision(x)?;
        if d.len() == 1 {
            return Ok(usize::from(d[0] > 0.0));
        }
        let mut best = 0;
        for (k, &v) in d.iter().enumerate() {
            if v > d[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Signed binary decision value.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if self.machines.len() != 1 {
            return Err(ClassifierError::InvalidInput(
                "ranking score needs a binary model".into(),
            ));
        }
        Ok(self.decision(x)?[0])
    }
}
