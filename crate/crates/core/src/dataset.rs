//! Mixed nominal/numerical tables: loading, min–max normalization and
//! synthetic outlier injection.
//!
//! Data is stored column-major because every downstream consumer (relation
//! matrices, ball centers, SVM embedding) walks one attribute at a time.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Nominal,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeRole {
    Feature,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    pub role: AttributeRole,
}

impl AttributeSchema {
    pub fn numerical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numerical,
            role: AttributeRole::Feature,
        }
    }

    pub fn nominal(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal,
            role: AttributeRole::Feature,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal,
            role: AttributeRole::Label,
        }
    }

    pub fn ignore(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal,
            role: AttributeRole::Ignore,
        }
    }
}

/// Values of one feature column.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numerical(Vec<f64>),
    /// Interned category ids into `categories`, in first-seen order.
    Nominal {
        codes: Vec<u32>,
        categories: Vec<String>,
    },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numerical(v) => v.len(),
            Column::Nominal { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> AttributeKind {
        match self {
            Column::Numerical(_) => AttributeKind::Numerical,
            Column::Nominal { .. } => AttributeKind::Nominal,
        }
    }

    /// Builds a nominal column by interning `values`.
    pub fn nominal_from<S: AsRef<str>>(values: &[S]) -> Self {
        let mut interner = Interner::default();
        let codes = values.iter().map(|v| interner.intern(v.as_ref())).collect();
        Column::Nominal {
            codes,
            categories: interner.categories,
        }
    }

    fn cell_text(&self, row: usize) -> String {
        match self {
            Column::Numerical(v) => format!("{}", v[row]),
            Column::Nominal { codes, categories } => categories[codes[row] as usize].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub column: Column,
}

impl Feature {
    pub fn numerical(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            column: Column::Numerical(values),
        }
    }

    pub fn nominal<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        Self {
            name: name.into(),
            column: Column::nominal_from(values),
        }
    }

    pub fn kind(&self) -> AttributeKind {
        self.column.kind()
    }
}

/// A fuzzy information system: samples described by nominal and numerical
/// features, with optional ground-truth outlier flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    features: Vec<Feature>,
    labels: Option<Vec<bool>>,
    n: usize,
    normalized: bool,
}

impl MixedDataset {
    /// `labels[i] == true` marks sample `i` as a ground-truth outlier.
    pub fn new(features: Vec<Feature>, labels: Option<Vec<bool>>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::NoFeatures);
        }
        let n = features[0].column.len();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        for f in &features {
            if f.column.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.column.len(),
                });
            }
            if let Column::Numerical(v) = &f.column {
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("{x} in column '{}'", f.name)));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            n,
            normalized: false,
        })
    }

    /// Convenience constructor for all-numerical data given as rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<bool>>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::NoSamples)?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Arity {
                    row: i + 1,
                    expected: d,
                    found: r.len(),
                });
            }
        }
        let features = (0..d)
            .map(|j| Feature::numerical(format!("x{}", j + 1), rows.iter().map(|r| r[j]).collect()))
            .collect();
        Self::new(features, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, attr: usize) -> Result<&Feature> {
        self.features.get(attr).ok_or(Error::AttributeOutOfRange {
            index: attr,
            count: self.features.len(),
        })
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn kinds(&self) -> Vec<AttributeKind> {
        self.features.iter().map(Feature::kind).collect()
    }

    /// Population standard deviation (divisor n) of a numerical feature;
    /// 0 for nominal features.
    pub fn feature_std(&self, attr: usize) -> Result<f64> {
        Ok(match &self.feature(attr)?.column {
            Column::Numerical(v) => population_std(v),
            Column::Nominal { .. } => 0.0,
        })
    }

    /// Returns a copy with every numerical feature min–max scaled to [0, 1].
    /// Constant columns become all zeros. Normalizing twice is a no-op.
    pub fn normalize(&self) -> MixedDataset {
        if self.normalized {
            return self.clone();
        }
        let features = self
            .features
            .iter()
            .map(|f| match &f.column {
                Column::Numerical(v) => Feature {
                    name: f.name.clone(),
                    column: Column::Numerical(min_max(v)),
                },
                Column::Nominal { .. } => f.clone(),
            })
            .collect();
        MixedDataset {
            features,
            labels: self.labels.clone(),
            n: self.n,
            normalized: true,
        }
    }

    /// Selects a subset of samples (in the given order).
    pub fn select(&self, rows: &[usize]) -> Result<MixedDataset> {
        if rows.is_empty() {
            return Err(Error::NoSamples);
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(Error::InvalidParameter(format!(
                "row index {bad} out of range for {} samples",
                self.n
            )));
        }
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                name: f.name.clone(),
                column: match &f.column {
                    Column::Numerical(v) => Column::Numerical(rows.iter().map(|&r| v[r]).collect()),
                    Column::Nominal { codes, categories } => Column::Nominal {
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                        categories: categories.clone(),
                    },
                },
            })
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        Ok(MixedDataset {
            features,
            labels,
            n: rows.len(),
            normalized: self.normalized,
        })
    }

    /// Indices of samples labeled inlier (all samples when unlabeled).
    pub fn inlier_indices(&self) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..self.n).filter(|&i| !l[i]).collect(),
            None => (0..self.n).collect(),
        }
    }

    /// Writes the dataset as CSV; labels (when present) go to a trailing
    /// `label` column with 1 = outlier.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        if self.labels.is_some() {
            header.push("label");
        }
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut cells: Vec<String> = self
                .features
                .iter()
                .map(|f| f.column.cell_text(i))
                .collect();
            if let Some(l) = &self.labels {
                cells.push(if l[i] { "1" } else { "0" }.to_string());
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter()
        .map(|x| ((x - lo) / range).clamp(0.0, 1.0))
        .collect()
}

#[derive(Default)]
struct Interner {
    index: HashMap<String, u32>,
    categories: Vec<String>,
}

impl Interner {
    fn intern(&mut self, value: &str) -> u32 {
        if let Some(&id) = self.index.get(value) {
            return id;
        }
        let id = self.categories.len() as u32;
        self.categories.push(value.to_string());
        self.index.insert(value.to_string(), id);
        id
    }
}

/// Parses a schema sidecar: one `name: kind` line per column, where kind is
/// `nominal`, `numerical`, `label` or `ignore`. `#` starts a comment.
pub fn parse_schema(text: &str) -> Result<Vec<AttributeSchema>> {
    let mut schema = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, kind) = line
            .rsplit_once(':')
            .or_else(|| line.rsplit_once(','))
            .or_else(|| line.rsplit_once('='))
            .ok_or_else(|| Error::Schema(format!("line {}: expected 'name: kind'", lineno + 1)))?;
        let name = name.trim();
        let entry = match kind.trim().to_ascii_lowercase().as_str() {
            "nominal" | "categorical" => AttributeSchema::nominal(name),
            "numerical" | "numeric" | "continuous" => AttributeSchema::numerical(name),
            "label" | "class" => AttributeSchema::label(name),
            "ignore" => AttributeSchema::ignore(name),
            other => {
                return Err(Error::Schema(format!(
                    "line {}: unknown kind '{other}' for column '{name}'",
                    lineno + 1
                )))
            }
        };
        schema.push(entry);
    }
    validate_schema(&schema)?;
    Ok(schema)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<Vec<AttributeSchema>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

fn validate_schema(schema: &[AttributeSchema]) -> Result<()> {
    let mut label: Option<&str> = None;
    for a in schema {
        if a.role == AttributeRole::Label {
            if let Some(first) = label {
                return Err(Error::DuplicateLabel {
                    first: first.to_string(),
                    second: a.name.clone(),
                });
            }
            label = Some(&a.name);
        }
    }
    if !schema.iter().any(|a| a.role == AttributeRole::Feature) {
        return Err(Error::NoFeatures);
    }
    Ok(())
}

/// Guesses a schema from a header and data rows: a column named `label`,
/// `class` or `outlier` is the label, columns whose every cell parses as a
/// finite real are numerical, the rest nominal.
pub fn infer_schema(header: &[String], rows: &[Vec<String>]) -> Vec<AttributeSchema> {
    header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let lower = name.trim().to_ascii_lowercase();
            if matches!(lower.as_str(), "label" | "class" | "outlier") {
                return AttributeSchema::label(name.trim());
            }
            let numeric = rows.iter().all(|r| {
                r.get(j)
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .is_some_and(f64::is_finite)
            });
            if numeric {
                AttributeSchema::numerical(name.trim())
            } else {
                AttributeSchema::nominal(name.trim())
            }
        })
        .collect()
}

fn parse_label(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "1" | "outlier" | "true" | "yes" | "o" | "anomaly" => Some(true),
        "0" | "inlier" | "false" | "no" | "n" | "normal" => Some(false),
        _ => None,
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

/// How the column layout of a CSV file is described.
#[derive(Debug, Clone)]
pub enum SchemaSource<'a> {
    Inline(&'a [AttributeSchema]),
    Sidecar(&'a Path),
    Infer,
}

/// Loads a CSV file (header row, comma separated) under a schema. The
/// result is not normalized. Row numbers in errors are file line numbers.
pub fn load_dataset(path: impl AsRef<Path>, schema: SchemaSource<'_>) -> Result<MixedDataset> {
    let path = path.as_ref();
    let (header, rows) = read_records(path)?;
    let schema = match schema {
        SchemaSource::Inline(s) => {
            validate_schema(s)?;
            s.to_vec()
        }
        SchemaSource::Sidecar(p) => read_schema(p)?,
        SchemaSource::Infer => {
            let cells: Vec<Vec<String>> = rows.iter().map(|(_, r)| r.clone()).collect();
            let s = infer_schema(&header, &cells);
            validate_schema(&s)?;
            s
        }
    };

    // Map each header column onto its schema entry by name.
    let mut roles = Vec::with_capacity(header.len());
    for name in &header {
        let entry = schema.iter().find(|a| a.name == *name).ok_or_else(|| {
            Error::Schema(format!("column '{name}' is not described by the schema"))
        })?;
        roles.push(entry.clone());
    }
    if let Some(missing) = schema.iter().find(|a| !header.contains(&a.name)) {
        return Err(Error::Schema(format!(
            "schema column '{}' is missing from {}",
            missing.name,
            path.display()
        )));
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }

    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    let mut nominal: Vec<Vec<&str>> = vec![Vec::new(); header.len()];
    let mut labels = Vec::new();
    for (line, cells) in &rows {
        if cells.len() != header.len() {
            return Err(Error::Arity {
                row: *line,
                expected: header.len(),
                found: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let attr = &roles[j];
            match (attr.role, attr.kind) {
                (AttributeRole::Ignore, _) => {}
                (AttributeRole::Label, _) => {
                    let v = parse_label(cell).ok_or_else(|| Error::Cell {
                        row: *line,
                        column: attr.name.clone(),
                        message: format!("'{cell}' is not an outlier/inlier label"),
                    })?;
                    labels.push(v);
                }
                (AttributeRole::Feature, AttributeKind::Numerical) => {
                    let v = cell
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Cell {
                            row: *line,
                            column: attr.name.clone(),
                            message: if cell.is_empty() || cell == "?" {
                                "missing value".to_string()
                            } else {
                                format!("'{cell}' is not a finite number")
                            },
                        })?;
                    numeric[j].push(v);
                }
                (AttributeRole::Feature, AttributeKind::Nominal) => {
                    if cell.is_empty() || cell == "?" {
                        return Err(Error::Cell {
                            row: *line,
                            column: attr.name.clone(),
                            message: "missing value".to_string(),
                        });
                    }
                    nominal[j].push(cell.as_str());
                }
            }
        }
    }

    let mut features = Vec::new();
    for (j, attr) in roles.iter().enumerate() {
        if attr.role != AttributeRole::Feature {
            continue;
        }
        features.push(match attr.kind {
            AttributeKind::Numerical => {
                Feature::numerical(attr.name.clone(), std::mem::take(&mut numeric[j]))
            }
            AttributeKind::Nominal => Feature::nominal(attr.name.clone(), &nominal[j]),
        });
    }
    let has_label = roles.iter().any(|a| a.role == AttributeRole::Label);
    MixedDataset::new(features, has_label.then_some(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionKind {
    Local,
    Global,
    Group,
}

impl std::str::FromStr for InjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(InjectionKind::Local),
            "global" => Ok(InjectionKind::Global),
            "group" => Ok(InjectionKind::Group),
            other => Err(Error::InvalidParameter(format!(
                "unknown outlier kind '{other}' (expected local, global or group)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub kind: InjectionKind,
    pub ratio: f64,
    pub seed: u64,
    pub scale_alpha: f64,
}

impl InjectionSpec {
    pub fn new(kind: InjectionKind, ratio: f64, seed: u64) -> Self {
        Self {
            kind,
            ratio,
            seed,
            scale_alpha: 5.0,
        }
    }

    /// Number of rows appended to a dataset of `n` inliers.
    pub fn count(&self, n: usize) -> usize {
        ceil_count(self.ratio * n as f64)
    }
}

/// `ceil` that ignores representation error just above an integer
/// (`0.1 * 80` must give 8, not 9).
pub(crate) fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// Appends `⌈ratio·n⌉` synthetic outliers to a normalized, all-numerical
/// dataset. Original rows are kept in order and labeled inlier; injected
/// rows are labeled outlier.
///
/// * local: diagonal Gaussian at the inlier mean with every standard
///   deviation multiplied by `scale_alpha`;
/// * global: uniform over the inlier range widened by 10% on each side,
///   redrawn until at least one coordinate leaves the inlier range;
/// * group: a tight Gaussian cluster (standard deviations divided by
///   `scale_alpha`) centred `scale_alpha` pooled standard deviations away
///   from the inlier mean along a random unit direction.
pub fn inject_outliers(ds: &MixedDataset, spec: &InjectionSpec) -> Result<MixedDataset> {
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "injection ratio {} outside (0, 1)",
            spec.ratio
        )));
    }
    if !(spec.scale_alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "scale_alpha must be positive".into(),
        ));
    }
    if !ds.is_normalized() {
        return Err(Error::InvalidParameter(
            "injection requires a normalized dataset".into(),
        ));
    }
    let mut columns = Vec::with_capacity(ds.n_features());
    for f in ds.features() {
        match &f.column {
            Column::Numerical(v) => columns.push(v.as_slice()),
            Column::Nominal { .. } => return Err(Error::NominalInjection(f.name.clone())),
        }
    }

    let n = ds.n_samples();
    let d = columns.len();
    let k = spec.count(n);
    let mean: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let std: Vec<f64> = columns.iter().map(|c| population_std(c)).collect();
    let lo: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut injected: Vec<Vec<f64>> = Vec::with_capacity(k);
    match spec.kind {
        InjectionKind::Local => {
            for _ in 0..k {
                let row = (0..d)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean[j] + spec.scale_alpha * std[j] * z
                    })
                    .collect();
                injected.push(row);
            }
        }
        InjectionKind::Global => {
            let margin: Vec<f64> = (0..d)
                .map(|j| {
                    if hi[j] > lo[j] {
                        0.1 * (hi[j] - lo[j])
                    } else {
                        0.1
                    }
                })
                .collect();
            for _ in 0..k {
                loop {
                    let row: Vec<f64> = (0..d)
                        .map(|j| rng.random_range((lo[j] - margin[j])..(hi[j] + margin[j])))
                        .collect();
                    if row.iter().enumerate().any(|(j, &x)| x < lo[j] || x > hi[j]) {
                        injected.push(row);
                        break;
                    }
                }
            }
        }
        InjectionKind::Group => {
            let pooled = (std.iter().map(|s| s * s).sum::<f64>() / d as f64).sqrt();
            let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            dir.iter_mut().for_each(|x| *x /= norm);
            let center: Vec<f64> = (0..d)
                .map(|j| mean[j] + spec.scale_alpha * pooled * dir[j])
                .collect();
            for _ in 0..k {
                let row = (0..d)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        center[j] + std[j] / spec.scale_alpha * z
                    })
                    .collect();
                injected.push(row);
            }
        }
    }

    let features = ds
        .features()
        .iter()
        .zip(&columns)
        .enumerate()
        .map(|(j, (f, c))| {
            let mut v = c.to_vec();
            v.extend(injected.iter().map(|r| r[j]));
            Feature::numerical(f.name.clone(), v)
        })
        .collect();
    let mut labels = vec![false; n];
    labels.extend(std::iter::repeat_n(true, k));
    MixedDataset::new(features, Some(labels))
}
