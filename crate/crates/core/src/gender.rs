//! RBF-kernel SVM trained by SMO, plus per-cluster dominant gender.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::speaker::ClusterAssignment;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_C: f64 = 100.0;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    /// Male is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Self::Male => 1.0,
            Self::Female => -1.0,
        }
    }

    pub fn from_margin(margin: f64) -> Self {
        if margin >= 0.0 {
            Self::Male
        } else {
            Self::Female
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Male => "male",
            Self::Female => "female",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "male" | "m" | "M" => Some(Self::Male),
            "female" | "f" | "F" => Some(Self::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenderError {
    SingleClass,
    Empty,
    LengthMismatch { vectors: usize, labels: usize },
    DimMismatch { expected: usize, found: usize },
    Params(&'static str),
}

impl fmt::Display for GenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingleClass => f.write_str("training data must contain both labels"),
            Self::Empty => f.write_str("no training data"),
            Self::LengthMismatch { vectors, labels } => {
                write!(f, "{vectors} vectors but {labels} labels")
            }
            Self::DimMismatch { expected, found } => {
                write!(f, "dim mismatch: expected {expected}, found {found}")
            }
            Self::Params(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for GenderError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    /// Stop when the maximal KKT violating pair differs by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, c: DEFAULT_C, tol: 1e-3, max_iter: 10_000_000 }
    }
}

pub fn rbf(gamma: f64, a: &[f32], b: &[f32]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64) * (*x as f64 - *y as f64)).sum();
    math::exp(-gamma * d2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f32>>,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f32]) -> Result<f64, GenderError> {
        if x.len() != self.dim() {
            return Err(GenderError::DimMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, a)| a * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias)
    }

    pub fn predict(&self, x: &[f32]) -> Result<(Gender, f64), GenderError> {
        let m = self.decision(x)?;
        Ok((Gender::from_margin(m), m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub model: SvmModel,
    /// Unsigned dual variable of every training example.
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO with second-order working-set selection: the first index is the
/// maximal KKT violator, the second maximizes the guaranteed objective
/// decrease. Fully deterministic.
pub fn train_svm_smo(xs: &[Vec<f32>], labels: &[Gender], params: &SvmParams) -> Result<Training, GenderError> {
    if xs.len() != labels.len() {
        return Err(GenderError::LengthMismatch { vectors: xs.len(), labels: labels.len() });
    }
    if xs.is_empty() {
        return Err(GenderError::Empty);
    }
    if !(params.gamma > 0.0 && params.c > 0.0 && params.tol > 0.0) {
        return Err(GenderError::Params("gamma, c and tol must be positive"));
    }
    let dim = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(GenderError::DimMismatch { expected: dim, found: x.len() });
    }
    if !labels.contains(&Gender::Male) || !labels.contains(&Gender::Female) {
        return Err(GenderError::SingleClass);
    }

    let n = xs.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|g| g.sign()).collect();
    let mut k = vec![0.0f64; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf(params.gamma, &xs[i], &xs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                (!upper(alpha[t])).then(|| -grad[t])
            } else {
                (!lower(alpha[t])).then(|| grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            for j in 0..n {
                let qij = y[i] * y[j] * k[i * n + j];
                let (eligible, grad_diff, v, quad) = if y[j] > 0.0 {
                    (!lower(alpha[j]), gmax + grad[j], grad[j], 2.0 - 2.0 * y[i] * qij)
                } else {
                    (!upper(alpha[j]), gmax - grad[j], -grad[j], 2.0 + 2.0 * y[i] * qij)
                };
                if !eligible {
                    continue;
                }
                gmax2 = gmax2.max(v);
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = j;
                    }
                }
            }
        }
        if gmax + gmax2 < params.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let qij = y[i] * y[j] * k[i * n + j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
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
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
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
            grad[t] += y[t] * (y[i] * k[t * n + i] * di + y[j] * k[t * n + j] * dj);
        }
    }

    // rho = y_i G_i averaged over free vectors, else the middle of the
    // feasible interval; the decision function is sum - rho.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(xs[t].clone());
            coefficients.push(alpha[t] * y[t]);
        }
    }
    Ok(Training {
        model: SvmModel { gamma: params.gamma, c, bias: -rho, support_vectors, coefficients },
        alphas: alpha,
        iterations,
        converged,
    })
}

/// Largest KKT violation in `y * f(x)` units over a training set.
pub fn kkt_max_violation(model: &SvmModel, xs: &[Vec<f32>], labels: &[Gender], alphas: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for ((x, g), a) in xs.iter().zip(labels).zip(alphas) {
        let yf = g.sign() * model.decision(x).unwrap_or(f64::NAN);
        let v = if *a <= 0.0 {
            1.0 - yf
        } else if *a >= model.c {
            yf - 1.0
        } else {
            math::abs(yf - 1.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Majority label per cluster; a tie goes to the label with the larger mean
/// |margin|, and an exact tie on that to male.
pub fn dominant_gender(
    assignment: &ClusterAssignment,
    predictions: &BTreeMap<String, (Gender, f64)>,
) -> BTreeMap<usize, Gender> {
    let mut tally: BTreeMap<usize, [(usize, f64); 2]> = BTreeMap::new();
    for (id, label) in &assignment.labels {
        let (Some(c), Some((g, m))) = (label, predictions.get(id)) else { continue };
        let slot = &mut tally.entry(*c).or_insert([(0, 0.0); 2])[*g as usize];
        slot.0 += 1;
        slot.1 += math::abs(*m);
    }
    tally
        .into_iter()
        .map(|(c, [(nm, sm), (nf, sf)])| {
            let g = if nm != nf {
                if nm > nf { Gender::Male } else { Gender::Female }
            } else if sf / nf as f64 > sm / nm as f64 {
                Gender::Female
            } else {
                Gender::Male
            };
            (c, g)
        })
        .collect()
}
