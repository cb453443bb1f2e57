//! Per-sample weighted soft-margin linear SVM.
//!
//! The dual is solved with SMO using maximal-violating-pair working-set
//! selection; each variable has its own upper bound `μ_k · C^{y_k}`. Decision
//! values are mapped to probabilities with a Platt sigmoid fitted by Newton's
//! method with backtracking on smoothed targets.

use crate::error::{Error, Result};

/// Reliable outliers (+1) and inliers (-1) with per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
    weights: Vec<f64>,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl TrainingSet {
    /// `labels` must be ±1; `weights` are the per-sample multipliers of the
    /// class penalties.
    pub fn new(
        rows: &[Vec<f64>],
        labels: &[f64],
        weights: &[f64],
        c_plus: f64,
        c_minus: f64,
    ) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            features.extend_from_slice(r);
        }
        Self::from_flat(
            features,
            dim,
            labels.to_vec(),
            weights.to_vec(),
            c_plus,
            c_minus,
        )
    }

    pub fn from_flat(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<f64>,
        weights: Vec<f64>,
        c_plus: f64,
        c_minus: f64,
    ) -> Result<Self> {
        let l = labels.len();
        if dim == 0 || features.len() != l * dim {
            return Err(Error::DimensionMismatch {
                expected: l * dim.max(1),
                found: features.len(),
            });
        }
        if weights.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: weights.len(),
            });
        }
        if let Some(x) = features.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {x}")));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter(format!("label {y} is not ±1")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "sample weight {w} is not a nonnegative real"
            )));
        }
        if !(c_plus > 0.0 && c_minus > 0.0 && c_plus.is_finite() && c_minus.is_finite()) {
            return Err(Error::InvalidParameter("penalties must be positive".into()));
        }
        Ok(Self {
            features,
            dim,
            labels,
            weights,
            c_plus,
            c_minus,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.features[k * self.dim..(k + 1) * self.dim]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weight(&mut self, k: usize, w: f64) {
        self.weights[k] = w;
    }

    /// Box bound of dual variable `k`.
    pub fn upper_bound(&self, k: usize) -> f64 {
        let c = if self.labels[k] > 0.0 {
            self.c_plus
        } else {
            self.c_minus
        };
        self.weights[k] * c
    }

    fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&y| y > 0.0) && self.labels.iter().any(|&y| y < 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    /// Cap on full passes; one pass is `l` pair updates.
    pub max_passes: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub converged: bool,
    pub dual_vars: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the weighted dual and fits Platt parameters on the training
/// decision values.
pub fn train(ts: &TrainingSet, opts: SmoOptions) -> Result<WsvmModel> {
    if ts.len() < 2 || !ts.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let l = ts.len();
    let y = ts.labels();
    let ub: Vec<f64> = (0..l).map(|k| ts.upper_bound(k)).collect();

    // Q_ij = y_i y_j <x_i, x_j>
    let mut q = vec![0.0; l * l];
    for i in 0..l {
        for j in i..l {
            let v = y[i] * y[j] * dot(ts.row(i), ts.row(j));
            q[i * l + j] = v;
            q[j * l + i] = v;
        }
    }

    let mut alpha = vec![0.0; l];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; l];
    let in_up = |a: f64, k: usize| (y[k] > 0.0 && a < ub[k]) || (y[k] < 0.0 && a > 0.0);
    let in_low = |a: f64, k: usize| (y[k] > 0.0 && a > 0.0) || (y[k] < 0.0 && a < ub[k]);

    let max_iter = opts.max_passes.saturating_mul(l.max(1));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for k in 0..l {
            let v = -y[k] * grad[k];
            if in_up(alpha[k], k) && v > gmax {
                gmax = v;
                i = k;
            }
            if in_low(alpha[k], k) && v < gmin {
                gmin = v;
                j = k;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (ci, cj) = (ub[i], ub[j]);
        if y[i] != y[j] {
            let quad = (q[i * l + i] + q[j * l + j] + 2.0 * q[i * l + j]).max(1e-12);
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
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (q[i * l + i] + q[j * l + j] - 2.0 * q[i * l + j]).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        // Snap onto the box so bound checks stay exact.
        for k in [i, j] {
            alpha[k] = alpha[k].clamp(0.0, ub[k]);
        }

        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for k in 0..l {
            grad[k] += q[k * l + i] * di + q[k * l + j] * dj;
        }
    }

    let b = -threshold(&alpha, &grad, y, &ub);
    let mut w = vec![0.0; ts.dim()];
    for k in 0..l {
        if alpha[k] != 0.0 {
            for (wd, xd) in w.iter_mut().zip(ts.row(k)) {
                *wd += alpha[k] * y[k] * xd;
            }
        }
    }

    let mut model = WsvmModel {
        w,
        b,
        platt_a: 0.0,
        platt_b: 0.0,
        converged,
        dual_vars: alpha,
        iterations,
    };
    let values: Vec<f64> = (0..l).map(|k| model.decision_value(ts.row(k))).collect();
    let (a, pb) = fit_platt(&values, y)?;
    model.platt_a = a;
    model.platt_b = pb;
    Ok(model)
}

/// The offset ρ with `f(x) = wᵀx − ρ`: mean of `y_k ∇_k` over free variables,
/// midpoint of the feasible interval when none is free.
fn threshold(alpha: &[f64], grad: &[f64], y: &[f64], ub: &[f64]) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut free = 0usize;
    for k in 0..alpha.len() {
        let yg = y[k] * grad[k];
        let at_upper = alpha[k] >= ub[k];
        let at_lower = alpha[k] <= 0.0;
        if at_upper && at_lower {
            continue;
        }
        if at_upper {
            if y[k] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if at_lower {
            if y[k] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) / 2.0
    } else if upper.is_finite() {
        upper
    } else if lower.is_finite() {
        lower
    } else {
        0.0
    }
}

impl WsvmModel {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        platt_probability(self.decision_value(x), self.platt_a, self.platt_b)
    }
}

/// `w·x + b` for each row.
pub fn decision_values(m: &WsvmModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|x| {
            if x.len() != m.w.len() {
                Err(Error::DimensionMismatch {
                    expected: m.w.len(),
                    found: x.len(),
                })
            } else {
                Ok(m.decision_value(x))
            }
        })
        .collect()
}

/// Calibrated probability of the positive (outlier) class for each row.
pub fn predict_probability(m: &WsvmModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(decision_values(m, features)?
        .into_iter()
        .map(|f| platt_probability(f, m.platt_a, m.platt_b))
        .collect())
}

/// `1 / (1 + exp(a f + b))`, evaluated without overflow.
pub fn platt_probability(f: f64, a: f64, b: f64) -> f64 {
    let z = a * f + b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Fits `P(y = +1 | f) = 1 / (1 + exp(a f + b))` by regularized maximum
/// likelihood on the smoothed targets `(N⁺+1)/(N⁺+2)` and `1/(N⁻+2)`.
pub fn fit_platt(values: &[f64], labels: &[f64]) -> Result<(f64, f64)> {
    if values.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y > 0.0 { hi } else { lo })
        .collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;

    let objective = |a: f64, b: f64| -> f64 {
        values
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &t) in values.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Ok((a, b))
}

/// Dual objective in maximization form, `Σ η − ½ ηᵀQη`.
pub fn dual_objective(ts: &TrainingSet, eta: &[f64]) -> f64 {
    let l = ts.len();
    let y = ts.labels();
    let mut quad = 0.0;
    for i in 0..l {
        if eta[i] == 0.0 {
            continue;
        }
        for j in 0..l {
            if eta[j] != 0.0 {
                quad += eta[i] * eta[j] * y[i] * y[j] * dot(ts.row(i), ts.row(j));
            }
        }
    }
    eta.iter().sum::<f64>() - 0.5 * quad
}

/// Primal objective `½‖w‖² + Σ μ_k C^{y_k} ξ_k` with slack taken from the
/// constraint violations at `(w, b)`.
pub fn primal_objective(ts: &TrainingSet, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = (0..ts.len())
        .map(|k| {
            let margin = ts.labels()[k] * (dot(w, ts.row(k)) + b);
            ts.upper_bound(k) * (1.0 - margin).max(0.0)
        })
        .sum();
    0.5 * dot(w, w) + hinge
}
