//! Detection metrics and cross-method rank statistics.

use std::io::Read;
use std::path::Path;

use crate::dataset::ceil_count;
use crate::error::{Error, Result};

/// How samples tied with the probability threshold are treated when forming
/// the identified-outlier set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// `P > θ`: ties at the threshold are left out.
    #[default]
    Strict,
    /// `P ≥ θ`: the identified set has at least `⌈t·n⌉` members.
    Inclusive,
}

fn check_lengths(probs: &[f64], labels: &[bool]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            found: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(p) = probs.iter().find(|p| p.is_nan()) {
        return Err(Error::NonFinite(format!("probability {p}")));
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Precision and recall of the samples flagged at contamination `t`; the
/// threshold is the `⌈t·n⌉`-th largest probability.
pub fn precision_recall(
    probs: &[f64],
    labels: &[bool],
    t: f64,
    rule: ThresholdRule,
) -> Result<(f64, f64)> {
    check_lengths(probs, labels)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contamination must lie in (0, 1], got {t}"
        )));
    }
    let truth = labels.iter().filter(|&&l| l).count();
    if truth == 0 {
        return Err(Error::NoOutliers);
    }
    let mut desc = probs.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let k = ceil_count(t * probs.len() as f64).clamp(1, probs.len());
    let theta = desc[k - 1];
    let flagged = |p: f64| match rule {
        ThresholdRule::Strict => p > theta,
        ThresholdRule::Inclusive => p >= theta,
    };
    let (mut found, mut hits) = (0usize, 0usize);
    for (&p, &l) in probs.iter().zip(labels) {
        if flagged(p) {
            found += 1;
            if l {
                hits += 1;
            }
        }
    }
    let precision = if found == 0 {
        0.0
    } else {
        hits as f64 / found as f64
    };
    Ok((precision, hits as f64 / truth as f64))
}

/// `(fpr, tpr)` for every distinct threshold, from `(0, 0)` to `(1, 1)`.
pub fn roc_points(probs: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(probs, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = probs[order[i]];
        while i < order.len() && probs[order[i]] == v {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Area under a piecewise-linear curve.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Probability that a random outlier outranks a random inlier, ties counted
/// as one half.
pub fn auroc(probs: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(probs, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    // Twice the Mann–Whitney count, kept integral so the result is exact.
    let mut twice = 0u128;
    let mut below_neg = 0u128;
    let mut i = 0;
    while i < order.len() {
        let v = probs[order[i]];
        let (mut tie_pos, mut tie_neg) = (0u128, 0u128);
        while i < order.len() && probs[order[i]] == v {
            if labels[order[i]] {
                tie_pos += 1;
            } else {
                tie_neg += 1;
            }
            i += 1;
        }
        twice += tie_pos * (2 * below_neg + tie_neg);
        below_neg += tie_neg;
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub auroc: f64,
    /// `(t, precision, recall)`.
    pub pr_curve: Vec<(f64, f64, f64)>,
    pub roc_points: Vec<(f64, f64)>,
}

pub fn metric_report(
    probs: &[f64],
    labels: &[bool],
    grid: &[f64],
    rule: ThresholdRule,
) -> Result<MetricReport> {
    let pr_curve = grid
        .iter()
        .map(|&t| precision_recall(probs, labels, t, rule).map(|(p, r)| (t, p, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        auroc: auroc(probs, labels)?,
        pr_curve,
        roc_points: roc_points(probs, labels)?,
    })
}

/// The contamination grid 5%, 10%, …, 100%.
pub fn default_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

/// Per-dataset ranks of competing methods (1 = best).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `ranks[d][m]`.
    pub ranks: Vec<Vec<f64>>,
}

/// Ranks with ties sharing the average of the positions they span.
/// `higher_is_better` gives rank 1 to the largest value.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    if higher_is_better {
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    } else {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    }
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// What the numeric cells of a rank-table CSV hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Scores where higher is better; converted to ranks.
    Scores,
    /// Ranks already.
    Ranks,
}

impl RankTable {
    pub fn from_ranks(
        methods: Vec<String>,
        datasets: Vec<String>,
        ranks: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if ranks.len() != datasets.len() {
            return Err(Error::DimensionMismatch {
                expected: datasets.len(),
                found: ranks.len(),
            });
        }
        if let Some(row) = ranks.iter().find(|r| r.len() != methods.len()) {
            return Err(Error::DimensionMismatch {
                expected: methods.len(),
                found: row.len(),
            });
        }
        Ok(Self {
            methods,
            datasets,
            ranks,
        })
    }

    pub fn from_scores(
        methods: Vec<String>,
        datasets: Vec<String>,
        scores: &[Vec<f64>],
    ) -> Result<Self> {
        let ranks = scores.iter().map(|row| average_ranks(row, true)).collect();
        Self::from_ranks(methods, datasets, ranks)
    }

    /// Column means of the rank matrix.
    pub fn average_ranks(&self) -> Vec<f64> {
        let n = self.ranks.len() as f64;
        (0..self.methods.len())
            .map(|m| self.ranks.iter().map(|r| r[m]).sum::<f64>() / n)
            .collect()
    }

    /// Reads `name,method1,…` rows; the first column names the dataset.
    pub fn read_csv<R: Read>(reader: R, kind: TableKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Schema(format!("rank table header: {e}")))?
            .clone();
        if header.len() < 2 {
            return Err(Error::Schema(
                "rank table needs a name column and at least one method".into(),
            ));
        }
        let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let (mut datasets, mut cells) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Cell {
                row,
                column: "-".into(),
                message: e.to_string(),
            })?;
            if rec.len() != header.len() {
                return Err(Error::Arity {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            datasets.push(rec[0].to_string());
            let values = rec
                .iter()
                .skip(1)
                .zip(&methods)
                .map(|(cell, m)| match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Cell {
                        row,
                        column: m.clone(),
                        message: format!("'{cell}' is not a finite number"),
                    }),
                })
                .collect::<Result<Vec<f64>>>()?;
            cells.push(values);
        }
        if cells.is_empty() {
            return Err(Error::NoSamples);
        }
        match kind {
            TableKind::Scores => Self::from_scores(methods, datasets, &cells),
            TableKind::Ranks => Self::from_ranks(methods, datasets, cells),
        }
    }

    pub fn read_path(path: impl AsRef<Path>, kind: TableKind) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, kind)
    }
}

/// `(τ_χ², τ_F)` from column-average ranks over `n_datasets` datasets.
pub fn friedman_from_average_ranks(avg: &[f64], n_datasets: usize) -> Result<(f64, f64)> {
    let m = avg.len() as f64;
    let n = n_datasets as f64;
    if avg.len() < 2 || n_datasets < 2 {
        return Err(Error::InvalidParameter(format!(
            "Friedman test needs at least 2 methods and 2 datasets, got {} and {n_datasets}",
            avg.len()
        )));
    }
    let sum_sq: f64 = avg.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * n / (m * (m + 1.0)) * (sum_sq - m * (m + 1.0) * (m + 1.0) / 4.0);
    let denom = n * (m - 1.0) - chi2;
    // Every dataset ranking the methods identically drives the denominator
    // to zero: perfect concordance, an infinitely large F.
    let tau_f = if denom <= 1e-12 * n * m {
        f64::INFINITY
    } else {
        (n - 1.0) * chi2 / denom
    };
    Ok((chi2, tau_f))
}

pub fn friedman_statistic(rt: &RankTable) -> Result<(f64, f64)> {
    friedman_from_average_ranks(&rt.average_ranks(), rt.datasets.len())
}

/// Nemenyi critical difference for `m` methods over `n` datasets.
pub fn nemenyi_cd(m: usize, n: usize, q_phi: f64) -> Result<f64> {
    if m < 2 || n < 1 || !(q_phi >= 0.0 && q_phi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need m ≥ 2, n ≥ 1 and a nonnegative q (got m={m}, n={n}, q={q_phi})"
        )));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(q_phi * (m * (m + 1.0) / (6.0 * n)).sqrt())
}
