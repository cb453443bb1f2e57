//! Granular balls and the coarse-to-fine hierarchy of scale views.
//!
//! Level 1 holds one singleton ball per sample. Each coarsening round pairs
//! balls greedily by descending ball-to-ball similarity; when no pair has a
//! positive degree the two balls with the closest centers are merged so the
//! ball count always drops. The last view is a single ball.

use std::io::Write;

use crate::dataset::{Column, MixedDataset};
use crate::error::{Error, Result};
use crate::fgd::{attribute_thresholds, numerical_degree, RelationSource, SimilarityMatrix};

/// Center coordinate of a ball on one attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    /// Mean of member values.
    Numerical(f64),
    /// Most frequent member category (smallest id on ties).
    Nominal(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularBall {
    members: Vec<usize>,
    center: Vec<Center>,
    radius: f64,
}

impl GranularBall {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn center(&self) -> &[Center] {
        &self.center
    }

    /// Largest Euclidean distance from the center to a member, over the
    /// numerical attributes only.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center_numerical(&self) -> Vec<f64> {
        self.center
            .iter()
            .filter_map(|c| match c {
                Center::Numerical(v) => Some(*v),
                Center::Nominal(_) => None,
            })
            .collect()
    }

    pub fn center_nominal(&self) -> Vec<u32> {
        self.center
            .iter()
            .filter_map(|c| match c {
                Center::Nominal(v) => Some(*v),
                Center::Numerical(_) => None,
            })
            .collect()
    }
}

/// Builds a ball from raw member samples. Members are stored sorted.
pub fn ball_from_members(ds: &MixedDataset, members: &[usize]) -> Result<GranularBall> {
    if members.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = ds.n_samples();
    if let Some(&bad) = members.iter().find(|&&m| m >= n) {
        return Err(Error::InvalidParameter(format!(
            "member {bad} out of range for {n} samples"
        )));
    }
    let mut members = members.to_vec();
    members.sort_unstable();
    let k = members.len() as f64;
    let center: Vec<Center> = ds
        .features()
        .iter()
        .map(|f| match &f.column {
            Column::Numerical(v) => {
                Center::Numerical(members.iter().map(|&i| v[i]).sum::<f64>() / k)
            }
            Column::Nominal { codes, categories } => {
                let mut counts = vec![0usize; categories.len()];
                for &i in &members {
                    counts[codes[i] as usize] += 1;
                }
                // max_by_key keeps the last maximum; iterate ids in reverse so
                // the smallest id wins ties.
                let mode = (0..counts.len())
                    .rev()
                    .max_by_key(|&c| counts[c])
                    .unwrap_or(0);
                Center::Nominal(mode as u32)
            }
        })
        .collect();
    let radius = members
        .iter()
        .map(|&i| {
            ds.features()
                .iter()
                .zip(&center)
                .filter_map(|(f, c)| match (&f.column, c) {
                    (Column::Numerical(v), Center::Numerical(m)) => Some((v[i] - m).powi(2)),
                    _ => None,
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(GranularBall {
        members,
        center,
        radius,
    })
}

/// `r^(1/|A|)` with `0^(1/|A|) = 0`.
fn radius_term(r: f64, attr_count: usize) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r.powf(1.0 / attr_count as f64)
    }
}

/// Ball-to-ball degree on one attribute. Numerical attributes shrink the
/// center gap by the sum of the root-scaled radii; nominal attributes compare
/// modes. At radius 0 this reduces to the sample-level degree.
pub fn ball_attribute_similarity(
    b1: &GranularBall,
    b2: &GranularBall,
    attr: usize,
    epsilon: f64,
    attr_count: usize,
) -> f64 {
    match (b1.center[attr], b2.center[attr]) {
        (Center::Numerical(c1), Center::Numerical(c2)) => {
            let spread =
                (radius_term(b1.radius, attr_count) + radius_term(b2.radius, attr_count)).abs();
            let dis = ((c1 - c2).abs() - spread).max(0.0);
            numerical_degree(dis, epsilon)
        }
        (Center::Nominal(m1), Center::Nominal(m2)) => {
            if m1 == m2 {
                1.0
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// One granularity level: a partition of all samples into balls.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleView {
    pub level: usize,
    pub balls: Vec<GranularBall>,
    pub sample_to_ball: Vec<usize>,
}

impl ScaleView {
    /// The finest view: one singleton ball per sample.
    pub fn singletons(ds: &MixedDataset) -> Result<ScaleView> {
        let balls = (0..ds.n_samples())
            .map(|i| ball_from_members(ds, &[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaleView {
            level: 1,
            sample_to_ball: (0..ds.n_samples()).collect(),
            balls,
        })
    }

    fn from_groups(ds: &MixedDataset, level: usize, groups: Vec<Vec<usize>>) -> Result<ScaleView> {
        let balls = groups
            .iter()
            .map(|g| ball_from_members(ds, g))
            .collect::<Result<Vec<_>>>()?;
        let mut sample_to_ball = vec![usize::MAX; ds.n_samples()];
        for (b, ball) in balls.iter().enumerate() {
            for &m in &ball.members {
                sample_to_ball[m] = b;
            }
        }
        Ok(ScaleView {
            level,
            balls,
            sample_to_ball,
        })
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

/// Relations between the balls of one view, consumed by the outlier scorer.
pub struct BallRelations<'a> {
    view: &'a ScaleView,
    eps: Vec<f64>,
    attr_count: usize,
}

impl<'a> BallRelations<'a> {
    /// `eps` holds the per-attribute thresholds computed on the samples.
    pub fn new(view: &'a ScaleView, eps: Vec<f64>) -> Self {
        let attr_count = eps.len();
        Self {
            view,
            eps,
            attr_count,
        }
    }
}

impl RelationSource for BallRelations<'_> {
    fn entity_count(&self) -> usize {
        self.view.balls.len()
    }

    fn attribute_count(&self) -> usize {
        self.attr_count
    }

    fn attribute_relation(&self, attr: usize) -> Result<SimilarityMatrix> {
        if attr >= self.attr_count {
            return Err(Error::AttributeOutOfRange {
                index: attr,
                count: self.attr_count,
            });
        }
        let balls = &self.view.balls;
        Ok(SimilarityMatrix::from_fn(balls.len(), |i, j| {
            ball_attribute_similarity(&balls[i], &balls[j], attr, self.eps[attr], self.attr_count)
        }))
    }
}

fn ball_relation(balls: &[GranularBall], eps: &[f64]) -> SimilarityMatrix {
    let attr_count = eps.len();
    SimilarityMatrix::from_fn(balls.len(), |i, j| {
        let mut r: f64 = 1.0;
        for (a, &e) in eps.iter().enumerate() {
            r = r.min(ball_attribute_similarity(
                &balls[i], &balls[j], a, e, attr_count,
            ));
            if r == 0.0 {
                break;
            }
        }
        r
    })
}

fn center_distance2(a: &GranularBall, b: &GranularBall) -> f64 {
    a.center
        .iter()
        .zip(&b.center)
        .map(|(x, y)| match (x, y) {
            (Center::Numerical(p), Center::Numerical(q)) => (p - q).powi(2),
            _ => 0.0,
        })
        .sum()
}

fn coarsen_with(view: &ScaleView, ds: &MixedDataset, eps: &[f64]) -> Result<ScaleView> {
    let m = view.balls.len();
    if m < 2 {
        return Err(Error::SingleBall);
    }
    let rel = ball_relation(&view.balls, eps);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let s = rel.get(i, j);
            if s > 0.0 {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut partner: Vec<Option<usize>> = vec![None; m];
    let mut merged_any = false;
    for &(_, i, j) in &pairs {
        if partner[i].is_none() && partner[j].is_none() {
            partner[i] = Some(j);
            partner[j] = Some(i);
            merged_any = true;
        }
    }
    if !merged_any {
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..m {
            for j in i + 1..m {
                let d = center_distance2(&view.balls[i], &view.balls[j]);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        partner[best.1] = Some(best.2);
        partner[best.2] = Some(best.1);
    }

    // New balls are ordered by their lowest-index constituent.
    let mut groups = Vec::with_capacity(m / 2 + 1);
    for i in 0..m {
        match partner[i] {
            Some(j) if j < i => continue,
            Some(j) => {
                let mut g = view.balls[i].members.clone();
                g.extend_from_slice(&view.balls[j].members);
                groups.push(g);
            }
            None => groups.push(view.balls[i].members.clone()),
        }
    }
    ScaleView::from_groups(ds, view.level + 1, groups)
}

/// One coarsening round.
pub fn coarsen(view: &ScaleView, ds: &MixedDataset, delta: f64) -> Result<ScaleView> {
    let eps = attribute_thresholds(ds, delta)?;
    coarsen_with(view, ds, &eps)
}

/// All views from singletons down to one ball, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewHierarchy {
    pub views: Vec<ScaleView>,
}

impl ViewHierarchy {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Writes one line per ball per level:
    /// `level ball_id count radius center members`, where center is a
    /// `;`-separated list (nominal entries are category names) and members is
    /// a `;`-separated list of sample indices. Fields are tab separated.
    pub fn write_records<W: Write>(&self, ds: &MixedDataset, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level\tball\tsize\tradius\tcenter\tmembers")?;
        for view in &self.views {
            for (b, ball) in view.balls.iter().enumerate() {
                let center: Vec<String> = ball
                    .center
                    .iter()
                    .zip(ds.features())
                    .map(|(c, f)| match (c, &f.column) {
                        (Center::Numerical(v), _) => format!("{v}"),
                        (Center::Nominal(id), Column::Nominal { categories, .. }) => {
                            categories[*id as usize].clone()
                        }
                        (Center::Nominal(id), _) => id.to_string(),
                    })
                    .collect();
                let members: Vec<String> = ball.members.iter().map(usize::to_string).collect();
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    view.level,
                    b,
                    ball.len(),
                    ball.radius,
                    center.join(";"),
                    members.join(";")
                )?;
            }
        }
        Ok(())
    }
}

/// Builds the full hierarchy of scale views.
pub fn generate_views(ds: &MixedDataset, delta: f64) -> Result<ViewHierarchy> {
    let eps = attribute_thresholds(ds, delta)?;
    let mut views = vec![ScaleView::singletons(ds)?];
    while views.last().map_or(0, ScaleView::len) > 1 {
        let next = coarsen_with(views.last().expect("nonempty"), ds, &eps)?;
        views.push(next);
    }
    Ok(ViewHierarchy { views })
}
