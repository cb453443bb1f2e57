//! Multi-view fusion, three-way regions and the end-to-end detector.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::dataset::{ceil_count, Column, MixedDataset};
use crate::error::{Error, Result};
use crate::fgd::{attribute_thresholds, score_entities};
use crate::granular::{generate_views, BallRelations, ViewHierarchy};
use crate::wsvm::{self, SmoOptions, TrainingSet, WsvmModel};

const GUARD: f64 = 1e-12;

/// Number of presumed outliers, `⌈t·n⌉`.
pub fn outlier_count(n: usize, t: f64) -> Result<usize> {
    check_contamination(t)?;
    let o = ceil_count(t * n as f64);
    if o == 0 || o >= n {
        return Err(Error::InvalidParameter(format!(
            "contamination {t} gives {o} presumed outliers out of {n} samples"
        )));
    }
    Ok(o)
}

fn check_contamination(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contamination must lie in (0, 1), got {t}"
        )));
    }
    Ok(())
}

/// Piecewise-linear map of outlier scores onto [0, 1].
///
/// With `S^o` the `o`-th largest score, every score `≥ S^o` lands in
/// `[0.5, 1]` and every smaller score in `[0, 0.5)`. Ties at `S^o` all take
/// the upper branch, so a constant score vector maps to 0.5 everywhere.
pub fn map_to_probability(scores: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let o = outlier_count(n, t)?;
    let mut desc = scores.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let (max, min) = (desc[0], desc[n - 1]);
    let s_o = desc[o - 1];
    let s_next = desc[o];
    Ok(scores
        .iter()
        .map(|&s| {
            if s >= s_o {
                (s - s_o) / (2.0 * (max - s_o) + GUARD) + 0.5
            } else {
                (s - min) / (2.0 * (s_next - min) + GUARD)
            }
        })
        .collect())
}

/// Binary entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    (term(p) + term(1.0 - p)).clamp(0.0, 1.0)
}

/// `1 − mean entropy` of one view's probabilities.
pub fn view_weight(probabilities: &[f64]) -> f64 {
    if probabilities.is_empty() {
        return 0.0;
    }
    let h: f64 = probabilities.iter().map(|&p| binary_entropy(p)).sum();
    (1.0 - h / probabilities.len() as f64).clamp(0.0, 1.0)
}

/// Per-sample certainty `μ(x) = 1 − Σ_k ν_k H_k(x) / K`.
///
/// `entropies[k][x]` is the entropy of sample `x` in view `k`.
pub fn sample_weights(entropies: &[Vec<f64>], view_weights: &[f64]) -> Result<Vec<f64>> {
    let k = entropies.len();
    if k == 0 || view_weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k.max(1),
            found: view_weights.len(),
        });
    }
    let n = entropies[0].len();
    if let Some(bad) = entropies.iter().find(|h| h.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    Ok((0..n)
        .map(|x| {
            let s: f64 = entropies
                .iter()
                .zip(view_weights)
                .map(|(h, v)| v * h[x])
                .sum();
            (1.0 - s / k as f64).clamp(0.0, 1.0)
        })
        .collect())
}

/// View-weighted average of per-view probabilities; uniform weights when
/// every view weight is (numerically) zero.
pub fn fuse(per_view: &[Vec<f64>], view_weights: &[f64]) -> Result<Vec<f64>> {
    let k = per_view.len();
    if k == 0 || view_weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k.max(1),
            found: view_weights.len(),
        });
    }
    let n = per_view[0].len();
    if let Some(bad) = per_view.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let total: f64 = view_weights.iter().sum();
    let uniform;
    let weights = if total < GUARD {
        uniform = vec![1.0; k];
        &uniform
    } else {
        view_weights
    };
    let total: f64 = weights.iter().sum();
    Ok((0..n)
        .map(|x| {
            let s: f64 = per_view.iter().zip(weights).map(|(p, v)| v * p[x]).sum();
            s / total
        })
        .collect())
}

/// The `i`-th smallest value (1-based).
fn order_statistic(sorted: &[f64], i: usize) -> Result<f64> {
    if i == 0 || i > sorted.len() {
        return Err(Error::InvalidParameter(format!(
            "order statistic {i} out of range for {} samples",
            sorted.len()
        )));
    }
    Ok(sorted[i - 1])
}

/// Three-way thresholds `(α, β)` from the ascending order statistics of the
/// fused probabilities.
pub fn thresholds(fused: &[f64], t: f64, delta_tw: f64) -> Result<(f64, f64)> {
    check_contamination(t)?;
    if !(0.0..=1.0).contains(&delta_tw) {
        return Err(Error::InvalidParameter(format!(
            "three-way delta must lie in [0, 1], got {delta_tw}"
        )));
    }
    let n = fused.len() as f64;
    let mut asc = fused.to_vec();
    asc.sort_by(f64::total_cmp);
    let alpha = order_statistic(&asc, ceil_count(n * (1.0 - t + delta_tw * t)))?;
    let beta = order_statistic(&asc, ceil_count(n * (1.0 - t - delta_tw * (1.0 - t))))?;
    Ok((alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Positive,
    Boundary,
    Negative,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Positive => "POS",
            Region::Boundary => "BND",
            Region::Negative => "NEG",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Disjoint index sets covering all samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Regions {
    pub positive: Vec<usize>,
    pub boundary: Vec<usize>,
    pub negative: Vec<usize>,
}

impl Regions {
    pub fn region_of(&self, n: usize) -> Vec<Region> {
        let mut out = vec![Region::Boundary; n];
        for &i in &self.positive {
            out[i] = Region::Positive;
        }
        for &i in &self.negative {
            out[i] = Region::Negative;
        }
        out
    }
}

/// `POS = {P ≥ α}`, `NEG = {P ≤ β}`, the rest is the boundary.
pub fn partition(fused: &[f64], alpha: f64, beta: f64) -> Result<Regions> {
    if beta > alpha {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} exceeds alpha {alpha}"
        )));
    }
    let mut r = Regions::default();
    for (i, &p) in fused.iter().enumerate() {
        if p >= alpha {
            r.positive.push(i);
        } else if p <= beta {
            r.negative.push(i);
        } else {
            r.boundary.push(i);
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewResult {
    pub level: usize,
    pub ball_count: usize,
    /// Ball scores copied to every member sample.
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub view_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionState {
    pub per_view: Vec<ViewResult>,
    pub fused: Vec<f64>,
    pub sample_weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub regions: Regions,
    pub contamination: f64,
    pub delta_tw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub delta: f64,
    pub lambda: f64,
    pub contamination: f64,
    pub delta_tw: f64,
    pub c_minus: f64,
    /// Nothing in the pipeline is random; kept so runs are fully described
    /// by their configuration.
    pub seed: u64,
    /// Use `C⁺/C⁻ = (1−t)/t` instead of `t/(1−t)`.
    pub invert_cost_ratio: bool,
    /// Keep only the finest `k` views of the hierarchy.
    pub max_views: Option<usize>,
    /// Keep the fused probabilities of the reliable regions and let the SVM
    /// only order the boundary samples, placed strictly between `β` and `α`.
    pub rescore_boundary_only: bool,
    pub smo: SmoOptions,
}

impl PipelineConfig {
    pub fn new(delta: f64, lambda: f64, contamination: f64) -> Self {
        Self {
            delta,
            lambda,
            contamination,
            ..Self::default()
        }
    }

    /// `(C⁺, C⁻)`.
    pub fn penalties(&self) -> (f64, f64) {
        let t = self.contamination;
        let ratio = if self.invert_cost_ratio {
            (1.0 - t) / t
        } else {
            t / (1.0 - t)
        };
        (self.c_minus * ratio, self.c_minus)
    }

    fn validate(&self) -> Result<()> {
        check_contamination(self.contamination)?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.delta_tw > 0.0 && self.delta_tw <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "three-way delta must lie in (0, 1], got {}",
                self.delta_tw
            )));
        }
        if self.max_views == Some(0) {
            return Err(Error::InvalidParameter(
                "max_views must be at least 1".into(),
            ));
        }
        if !(self.c_minus > 0.0 && self.c_minus.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "c_minus must be positive, got {}",
                self.c_minus
            )));
        }
        Ok(())
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            lambda: 1.0,
            contamination: 0.1,
            delta_tw: 0.7,
            c_minus: 1.0,
            seed: 0,
            invert_cost_ratio: false,
            max_views: None,
            rescore_boundary_only: false,
            smo: SmoOptions::default(),
        }
    }
}

/// Why the final probabilities are the fused ones rather than the SVM's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fallback {
    EmptyRegion(Region),
    NotConverged,
    Training(String),
}

impl std::fmt::Display for Fallback {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fallback::EmptyRegion(r) => write!(f, "{r} region is empty; using fused probabilities"),
            Fallback::NotConverged => {
                f.write_str("SVM did not converge; using fused probabilities")
            }
            Fallback::Training(m) => {
                write!(f, "SVM training failed ({m}); using fused probabilities")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub final_probabilities: Vec<f64>,
    pub state: FusionState,
    pub model: Option<WsvmModel>,
    pub fallback: Option<Fallback>,
    pub hierarchy: ViewHierarchy,
}

/// Scores every view of the hierarchy and fuses them, without the SVM step.
pub fn fuse_views(
    ds: &MixedDataset,
    hierarchy: &ViewHierarchy,
    cfg: &PipelineConfig,
) -> Result<FusionState> {
    cfg.validate()?;
    let eps = attribute_thresholds(ds, cfg.delta)?;
    let n = ds.n_samples();
    outlier_count(n, cfg.contamination)?;
    let per_view = hierarchy
        .views
        .par_iter()
        .map(|view| {
            let src = BallRelations::new(view, eps.clone());
            let ball_scores = score_entities(&src, cfg.lambda)?.scores;
            let scores: Vec<f64> = view
                .sample_to_ball
                .iter()
                .map(|&b| ball_scores[b])
                .collect();
            let probabilities = map_to_probability(&scores, cfg.contamination)?;
            Ok(ViewResult {
                level: view.level,
                ball_count: view.len(),
                view_weight: view_weight(&probabilities),
                scores,
                probabilities,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let nu: Vec<f64> = per_view.iter().map(|v| v.view_weight).collect();
    let probs: Vec<Vec<f64>> = per_view.iter().map(|v| v.probabilities.clone()).collect();
    let entropies: Vec<Vec<f64>> = probs
        .iter()
        .map(|p| p.iter().map(|&q| binary_entropy(q)).collect())
        .collect();
    let mu = sample_weights(&entropies, &nu)?;
    let fused = fuse(&probs, &nu)?;
    let (alpha, beta) = thresholds(&fused, cfg.contamination, cfg.delta_tw)?;
    let regions = partition(&fused, alpha, beta)?;
    Ok(FusionState {
        per_view,
        fused,
        sample_weights: mu,
        alpha,
        beta,
        regions,
        contamination: cfg.contamination,
        delta_tw: cfg.delta_tw,
    })
}

/// Numerical features as-is, nominal features one-hot encoded.
pub fn svm_features(ds: &MixedDataset) -> Vec<Vec<f64>> {
    let n = ds.n_samples();
    let mut rows = vec![Vec::new(); n];
    for f in ds.features() {
        match &f.column {
            Column::Numerical(v) => {
                for (r, &x) in rows.iter_mut().zip(v) {
                    r.push(x);
                }
            }
            Column::Nominal { codes, categories } => {
                for (r, &c) in rows.iter_mut().zip(codes) {
                    let start = r.len();
                    r.resize(start + categories.len(), 0.0);
                    r[start + c as usize] = 1.0;
                }
            }
        }
    }
    rows
}

/// Views → per-view scores → fusion → three-way regions → weighted SVM.
///
/// The dataset is min–max normalized first if it is not already.
pub fn run_pipeline(ds: &MixedDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let ds: Cow<'_, MixedDataset> = if ds.is_normalized() {
        Cow::Borrowed(ds)
    } else {
        Cow::Owned(ds.normalize())
    };
    outlier_count(ds.n_samples(), cfg.contamination)?;
    let mut hierarchy = generate_views(&ds, cfg.delta)?;
    if let Some(k) = cfg.max_views {
        hierarchy.views.truncate(k);
    }
    let state = fuse_views(&ds, &hierarchy, cfg)?;

    let (model, fallback) = refine(&ds, &state, cfg);
    let final_probabilities = match &model {
        Some(m) if fallback.is_none() => {
            let p = wsvm::predict_probability(m, &svm_features(&ds))?;
            if cfg.rescore_boundary_only {
                boundary_rescore(&state, &p)
            } else {
                p
            }
        }
        _ => state.fused.clone(),
    };
    Ok(PipelineResult {
        final_probabilities,
        state,
        model,
        fallback,
        hierarchy,
    })
}

/// Reliable samples keep their fused value; boundary samples are mapped into
/// `(β, α)` by their SVM probability, so region order is preserved.
fn boundary_rescore(state: &FusionState, svm: &[f64]) -> Vec<f64> {
    let mut out = state.fused.clone();
    let (lo, hi) = (state.beta, state.alpha);
    for &i in &state.regions.boundary {
        let q = svm[i].clamp(0.0, 1.0);
        out[i] = lo + (hi - lo) * (0.5 * q + 0.25);
    }
    out
}

fn refine(
    ds: &MixedDataset,
    state: &FusionState,
    cfg: &PipelineConfig,
) -> (Option<WsvmModel>, Option<Fallback>) {
    let r = &state.regions;
    if r.positive.is_empty() {
        return (None, Some(Fallback::EmptyRegion(Region::Positive)));
    }
    if r.negative.is_empty() {
        return (None, Some(Fallback::EmptyRegion(Region::Negative)));
    }
    let features = svm_features(ds);
    let idx: Vec<usize> = r.positive.iter().chain(&r.negative).copied().collect();
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| features[i].clone()).collect();
    let labels: Vec<f64> = r
        .positive
        .iter()
        .map(|_| 1.0)
        .chain(r.negative.iter().map(|_| -1.0))
        .collect();
    let weights: Vec<f64> = idx.iter().map(|&i| state.sample_weights[i]).collect();
    let (c_plus, c_minus) = cfg.penalties();
    let trained = TrainingSet::new(&rows, &labels, &weights, c_plus, c_minus)
        .and_then(|ts| wsvm::train(&ts, cfg.smo));
    match trained {
        Ok(m) if m.converged => (Some(m), None),
        Ok(m) => (Some(m), Some(Fallback::NotConverged)),
        Err(e) => (None, Some(Fallback::Training(e.to_string()))),
    }
}
