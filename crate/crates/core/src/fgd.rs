//! Fuzzy similarity relations and the fuzzy-granule-density outlier score.
//!
//! The scorer is written against [`RelationSource`], so the same code runs on
//! raw samples and on the granular balls of a coarser view.

use rayon::prelude::*;

use crate::dataset::{Column, MixedDataset};
use crate::error::{Error, Result};

/// Symmetric, reflexive fuzzy relation over `n` entities, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    density_weighted: bool,
    lambda: f64,
}

impl SimilarityMatrix {
    /// Builds a relation from a pairwise degree function evaluated on the
    /// upper triangle only. The diagonal is fixed to 1.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self {
            n,
            values,
            density_weighted: false,
            lambda: 0.0,
        }
    }

    /// Wraps explicit row-major values, checking the relation invariants.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) = {v} outside [0,1]"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) breaks symmetry"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            values,
            density_weighted: false,
            lambda: 0.0,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn ones(n: usize) -> Self {
        Self::from_fn(n, |_, _| 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_density_weighted(&self) -> bool {
        self.density_weighted
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn min_assign(&mut self, other: &SimilarityMatrix) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            if b < *a {
                *a = b;
            }
        }
    }
}

/// Granule cardinalities (row sums) and densities (cardinality / n).
#[derive(Debug, Clone, PartialEq)]
pub struct GranuleSummary {
    pub cardinalities: Vec<f64>,
    pub densities: Vec<f64>,
}

pub fn granule_summary(m: &SimilarityMatrix) -> GranuleSummary {
    let n = m.n() as f64;
    let cardinalities: Vec<f64> = (0..m.n()).map(|i| m.row(i).iter().sum()).collect();
    let densities = cardinalities.iter().map(|c| c / n).collect();
    GranuleSummary {
        cardinalities,
        densities,
    }
}

/// Degree between two numerical values under threshold `eps`.
pub fn numerical_degree(diff: f64, eps: f64) -> f64 {
    let diff = diff.abs();
    if diff <= eps {
        (1.0 - diff).max(0.0)
    } else {
        0.0
    }
}

/// Per-attribute threshold `std(a) / delta` (zero for nominal attributes).
pub fn attribute_thresholds(ds: &MixedDataset, delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    (0..ds.n_features())
        .map(|a| Ok(ds.feature_std(a)? / delta))
        .collect()
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Sample-level relation of one feature: exact match for nominal
/// attributes, `1 - |Δ|` within `std(a)/delta` for numerical ones.
pub fn attribute_similarity(
    ds: &MixedDataset,
    attr: usize,
    delta: f64,
) -> Result<SimilarityMatrix> {
    check_delta(delta)?;
    let eps = ds.feature_std(attr)? / delta;
    Ok(column_relation(&ds.feature(attr)?.column, eps))
}

fn column_relation(column: &Column, eps: f64) -> SimilarityMatrix {
    match column {
        Column::Numerical(v) => {
            SimilarityMatrix::from_fn(v.len(), |i, j| numerical_degree(v[i] - v[j], eps))
        }
        Column::Nominal { codes, .. } => {
            SimilarityMatrix::from_fn(
                codes.len(),
                |i, j| if codes[i] == codes[j] { 1.0 } else { 0.0 },
            )
        }
    }
}

/// Elementwise minimum of relations over the same entity set.
pub fn combine_min(mats: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
    let (first, rest) = mats.split_first().ok_or(Error::EmptyInput)?;
    let mut out = first.clone();
    for m in rest {
        if m.n() != out.n() {
            return Err(Error::DimensionMismatch {
                expected: out.n(),
                found: m.n(),
            });
        }
        out.min_assign(m);
    }
    out.density_weighted = mats.iter().all(|m| m.density_weighted);
    Ok(out)
}

/// Attenuates each degree by `exp(-lambda (Den(x_i) - Den(x_j))^2)`, with
/// densities taken from `m` itself.
pub fn density_weight(m: &SimilarityMatrix, lambda: f64) -> Result<SimilarityMatrix> {
    check_lambda(lambda)?;
    if m.density_weighted {
        return Err(Error::InvalidParameter(
            "relation is already density weighted".into(),
        ));
    }
    let den = granule_summary(m).densities;
    let n = m.n();
    let mut values = m.values.clone();
    if lambda > 0.0 {
        for i in 0..n {
            for j in 0..n {
                let d = den[i] - den[j];
                values[i * n + j] *= (-lambda * d * d).exp();
            }
        }
    }
    Ok(SimilarityMatrix {
        n,
        values,
        density_weighted: true,
        lambda,
    })
}

/// `-ln` of the mean granule density; lies in `[0, ln n]`.
pub fn subset_significance(m: &SimilarityMatrix) -> f64 {
    let den = granule_summary(m).densities;
    let mean = den.iter().sum::<f64>() / den.len() as f64;
    (-mean.ln()).max(0.0)
}

/// Anything that can produce one unweighted relation matrix per attribute
/// over a fixed entity set.
pub trait RelationSource: Sync {
    fn entity_count(&self) -> usize;
    fn attribute_count(&self) -> usize;
    fn attribute_relation(&self, attr: usize) -> Result<SimilarityMatrix>;
}

/// Relations between raw samples.
pub struct SampleRelations<'a> {
    ds: &'a MixedDataset,
    eps: Vec<f64>,
}

impl<'a> SampleRelations<'a> {
    pub fn new(ds: &'a MixedDataset, delta: f64) -> Result<Self> {
        Ok(Self {
            ds,
            eps: attribute_thresholds(ds, delta)?,
        })
    }
}

impl RelationSource for SampleRelations<'_> {
    fn entity_count(&self) -> usize {
        self.ds.n_samples()
    }

    fn attribute_count(&self) -> usize {
        self.ds.n_features()
    }

    fn attribute_relation(&self, attr: usize) -> Result<SimilarityMatrix> {
        Ok(column_relation(
            &self.ds.feature(attr)?.column,
            self.eps[attr],
        ))
    }
}

/// Attributes sorted by descending single-attribute significance and the
/// significance of every nested prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeOrdering {
    pub ordered_attrs: Vec<usize>,
    /// Significance of each attribute, in `ordered_attrs` order.
    pub per_attr_sig: Vec<f64>,
    /// `per_subset_sig[i]` is the significance of the first `i + 1` attributes.
    pub per_subset_sig: Vec<f64>,
}

impl AttributeOrdering {
    /// The nested attribute prefixes `A_1 ⊂ … ⊂ A_m`.
    pub fn subset_prefixes(&self) -> Vec<Vec<usize>> {
        (1..=self.ordered_attrs.len())
            .map(|i| self.ordered_attrs[..i].to_vec())
            .collect()
    }
}

/// Scores and the attribute ordering they were computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct FgdOutput {
    pub ordering: AttributeOrdering,
    pub scores: Vec<f64>,
}

fn weighted_relation<S: RelationSource + ?Sized>(
    src: &S,
    attr: usize,
    lambda: f64,
) -> Result<SimilarityMatrix> {
    density_weight(&src.attribute_relation(attr)?, lambda)
}

fn rank_attributes<S: RelationSource + ?Sized>(
    src: &S,
    lambda: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    check_lambda(lambda)?;
    let m = src.attribute_count();
    if m == 0 {
        return Err(Error::NoFeatures);
    }
    let sigs = (0..m)
        .into_par_iter()
        .map(|a| weighted_relation(src, a, lambda).map(|w| subset_significance(&w)))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort keeps ascending column index among equal significances.
    order.sort_by(|&a, &b| sigs[b].total_cmp(&sigs[a]));
    let ordered_sigs = order.iter().map(|&a| sigs[a]).collect();
    Ok((order, ordered_sigs))
}

/// Runs the fuzzy-granule-density scorer on any relation source.
///
/// Score: `S(x) = 1 - (1/m) Σ_i Sig(A_i) · Den_{A_i}(x)` over the nested
/// prefixes of the significance-sorted attribute sequence. Prefix relations
/// are folded one attribute at a time, so at most two n×n matrices are live
/// after ranking.
pub fn score_entities<S: RelationSource + ?Sized>(src: &S, lambda: f64) -> Result<FgdOutput> {
    let (ordered_attrs, per_attr_sig) = rank_attributes(src, lambda)?;
    let n = src.entity_count();
    let m = ordered_attrs.len();
    let mut acc = vec![0.0; n];
    let mut per_subset_sig = Vec::with_capacity(m);
    let mut prefix: Option<SimilarityMatrix> = None;
    for &a in &ordered_attrs {
        let w = weighted_relation(src, a, lambda)?;
        let cur = match prefix.take() {
            None => w,
            Some(mut p) => {
                p.min_assign(&w);
                p
            }
        };
        let sig = subset_significance(&cur);
        let den = granule_summary(&cur).densities;
        for (s, d) in acc.iter_mut().zip(&den) {
            *s += sig * d;
        }
        per_subset_sig.push(sig);
        prefix = Some(cur);
    }
    let scores = acc.iter().map(|s| 1.0 - s / m as f64).collect();
    Ok(FgdOutput {
        ordering: AttributeOrdering {
            ordered_attrs,
            per_attr_sig,
            per_subset_sig,
        },
        scores,
    })
}

pub fn order_attributes(ds: &MixedDataset, delta: f64, lambda: f64) -> Result<AttributeOrdering> {
    let src = SampleRelations::new(ds, delta)?;
    Ok(score_entities(&src, lambda)?.ordering)
}

/// Sample-level outlier scores (finest view only).
pub fn outlier_scores(ds: &MixedDataset, delta: f64, lambda: f64) -> Result<Vec<f64>> {
    let src = SampleRelations::new(ds, delta)?;
    Ok(score_entities(&src, lambda)?.scores)
}
