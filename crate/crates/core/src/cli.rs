//! Command-line front end: `detect`, `views`, `inject`, `eval`, `stats`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    inject_outliers, load_dataset, InjectionKind, InjectionSpec, MixedDataset, SchemaSource,
};
use crate::error::{Error, Result};
use crate::evaluation::{self, RankTable, TableKind, ThresholdRule};
use crate::fusion::{run_pipeline, PipelineConfig};
use crate::granular::generate_views;
use crate::wsvm::SmoOptions;

#[derive(Debug, Parser)]
#[command(
    name = "msgod",
    version,
    about = "Multi-scale granular-ball outlier detection for mixed data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every sample and write per-sample probabilities and regions.
    Detect(DetectArgs),
    /// Dump the granular-ball view hierarchy.
    Views(ViewsArgs),
    /// Append seeded synthetic outliers to a dataset.
    Inject(InjectArgs),
    /// Precision/recall, ROC and AUROC of a score file against labels.
    Eval(EvalArgs),
    /// Friedman and Nemenyi statistics of a method comparison table.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Schema sidecar (`name: kind` per line). Defaults to `<input>.schema`
    /// when that file exists, otherwise column kinds are inferred.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Ignore any sidecar and infer column kinds from the data.
    #[arg(long, conflicts_with = "schema")]
    pub infer_schema: bool,
}

impl InputArgs {
    fn load(&self) -> Result<MixedDataset> {
        let sidecar = self.input.with_extension("schema");
        let source = match (&self.schema, self.infer_schema) {
            (Some(p), _) => SchemaSource::Sidecar(p),
            (None, false) if sidecar.is_file() => SchemaSource::Sidecar(&sidecar),
            _ => SchemaSource::Infer,
        };
        load_dataset(&self.input, source)
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Similarity threshold δ (ε_a = std(a)/δ).
    #[arg(long)]
    pub delta: f64,
    /// Density weighting λ.
    #[arg(long)]
    pub lambda: f64,
    /// Assumed outlier proportion t.
    #[arg(long)]
    pub contamination: f64,
    /// Three-way band width Δ.
    #[arg(long, default_value_t = 0.7)]
    pub tw_delta: f64,
    /// Inlier penalty C⁻; C⁺ = C⁻·t/(1−t).
    #[arg(long, default_value_t = 1.0)]
    pub c_minus: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use C⁺/C⁻ = (1−t)/t instead.
    #[arg(long)]
    pub invert_cost_ratio: bool,
    /// Use only the finest k views.
    #[arg(long)]
    pub max_views: Option<usize>,
    /// Let the SVM re-order only the boundary region.
    #[arg(long)]
    pub boundary_only: bool,
    /// SMO stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Per-sample CSV: id, fused, final, region.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Run report (key: value lines); stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also dump the view hierarchy here.
    #[arg(long)]
    pub views: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ViewsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub delta: f64,
    /// TSV of `level ball size radius center members`.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Local,
    Global,
    Group,
}

impl From<KindArg> for InjectionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Local => InjectionKind::Local,
            KindArg::Global => InjectionKind::Global,
            KindArg::Group => InjectionKind::Group,
        }
    }
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Injected rows = ⌈ratio·n⌉.
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spread multiplier for local and group outliers.
    #[arg(long, default_value_t = 5.0)]
    pub scale: f64,
    /// Drop rows already labeled as outliers before injecting.
    #[arg(long)]
    pub inliers_only: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum RuleArg {
    #[default]
    Strict,
    Inclusive,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score CSV with a header (as written by `detect`).
    #[arg(long)]
    pub scores: PathBuf,
    /// Column of the score file to evaluate.
    #[arg(long, default_value = "final")]
    pub column: String,
    /// Dataset CSV carrying the ground-truth label column.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub labels_schema: Option<PathBuf>,
    /// Contamination levels; defaults to 0.05, 0.10, …, 1.00.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Whether samples tied with the threshold count as flagged.
    #[arg(long, value_enum, default_value_t = RuleArg::Strict)]
    pub rule: RuleArg,
    /// ROC points as `fpr<TAB>tpr`.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableArg {
    /// Cells are scores (higher is better), ranked per row.
    Scores,
    /// Cells are ranks.
    Ranks,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV: name column followed by one column per method.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, value_enum, default_value_t = TableArg::Scores)]
    pub kind: TableArg,
    /// Tukey critical value q_φ for the Nemenyi test.
    #[arg(long)]
    pub q: f64,
    /// Treat the rows' mean ranks as averages over this many datasets
    /// (for tables that hold only average ranks).
    #[arg(long)]
    pub datasets: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let started = Instant::now();
    let ds = a.input.load()?.normalize();
    let cfg = PipelineConfig {
        delta: a.delta,
        lambda: a.lambda,
        contamination: a.contamination,
        delta_tw: a.tw_delta,
        c_minus: a.c_minus,
        seed: a.seed,
        invert_cost_ratio: a.invert_cost_ratio,
        max_views: a.max_views,
        rescore_boundary_only: a.boundary_only,
        smo: SmoOptions {
            tol: a.tol,
            ..SmoOptions::default()
        },
    };
    let out = run_pipeline(&ds, &cfg)?;
    let st = &out.state;
    let regions = st.regions.region_of(ds.n_samples());

    with_file(&a.output, |w| {
        writeln!(w, "id,fused,final,region")?;
        for i in 0..ds.n_samples() {
            writeln!(
                w,
                "{i},{},{},{}",
                st.fused[i], out.final_probabilities[i], regions[i]
            )?;
        }
        Ok(())
    })?;
    if let Some(p) = &a.views {
        with_file(p, |w| out.hierarchy.write_records(&ds, w))?;
    }

    let mut r = String::new();
    let _ = writeln!(r, "input: {}", a.input.input.display());
    let _ = writeln!(r, "samples: {}", ds.n_samples());
    let _ = writeln!(r, "features: {}", ds.n_features());
    let _ = writeln!(r, "delta: {}", cfg.delta);
    let _ = writeln!(r, "lambda: {}", cfg.lambda);
    let _ = writeln!(r, "contamination: {}", cfg.contamination);
    let _ = writeln!(r, "tw_delta: {}", cfg.delta_tw);
    let (cp, cm) = cfg.penalties();
    let _ = writeln!(r, "c_plus: {cp}");
    let _ = writeln!(r, "c_minus: {cm}");
    let _ = writeln!(r, "seed: {}", cfg.seed);
    let _ = writeln!(r, "views: {}", st.per_view.len());
    for v in &st.per_view {
        let _ = writeln!(
            r,
            "view_{}: balls={} weight={}",
            v.level, v.ball_count, v.view_weight
        );
    }
    let _ = writeln!(r, "alpha: {}", st.alpha);
    let _ = writeln!(r, "beta: {}", st.beta);
    let _ = writeln!(r, "pos: {}", st.regions.positive.len());
    let _ = writeln!(r, "bnd: {}", st.regions.boundary.len());
    let _ = writeln!(r, "neg: {}", st.regions.negative.len());
    if let Some(m) = &out.model {
        let _ = writeln!(r, "svm_converged: {}", m.converged);
        let _ = writeln!(r, "svm_iterations: {}", m.iterations);
    }
    if let Some(labels) = ds.labels() {
        if let Ok(v) = evaluation::auroc(&out.final_probabilities, labels) {
            let _ = writeln!(r, "auroc: {v:.4}");
        }
        if let Ok(v) = evaluation::auroc(&st.fused, labels) {
            let _ = writeln!(r, "auroc_fused: {v:.4}");
        }
    }
    match &out.fallback {
        Some(f) => {
            let _ = writeln!(r, "warning: {f}");
        }
        None => {
            let _ = writeln!(r, "warnings: none");
        }
    }
    let _ = writeln!(r, "wall_time_ms: {}", started.elapsed().as_millis());
    write_text(a.report.as_deref(), &r)
}

pub fn cmd_views(a: &ViewsArgs) -> Result<()> {
    let ds = a.input.load()?.normalize();
    let h = generate_views(&ds, a.delta)?;
    with_file(&a.output, |w| h.write_records(&ds, w))?;
    let mut r = format!("views: {}\n", h.len());
    for v in &h.views {
        let _ = writeln!(r, "view_{}: balls={}", v.level, v.len());
    }
    write_text(None, &r)
}

pub fn cmd_inject(a: &InjectArgs) -> Result<()> {
    let mut ds = a.input.load()?;
    if a.inliers_only {
        ds = ds.select(&ds.inlier_indices())?;
    }
    let mut spec = InjectionSpec::new(a.kind.into(), a.ratio, a.seed);
    spec.scale_alpha = a.scale;
    let out = inject_outliers(&ds.normalize(), &spec)?;
    with_file(&a.output, |w| out.write_csv(w))?;
    write_text(
        None,
        &format!(
            "rows: {}\ninjected: {}\n",
            out.n_samples(),
            out.n_samples() - ds.n_samples()
        ),
    )
}

fn read_score_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(f);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let idx = match header.iter().position(|h| h == column) {
        Some(i) => i,
        None if header.len() == 1 => 0,
        None => {
            return Err(Error::Schema(format!(
                "{}: no column named '{column}'",
                path.display()
            )))
        }
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        let cell = rec.get(idx).unwrap_or("");
        let v = cell.parse::<f64>().map_err(|_| Error::Cell {
            row,
            column: header[idx].to_string(),
            message: format!("'{cell}' is not a number"),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let probs = read_score_column(&a.scores, &a.column)?;
    let source = match &a.labels_schema {
        Some(p) => SchemaSource::Sidecar(p),
        None => SchemaSource::Infer,
    };
    let ds = load_dataset(&a.labels, source)?;
    let labels = ds
        .labels()
        .ok_or_else(|| Error::Schema(format!("{}: no label column", a.labels.display())))?;
    let grid = if a.t.is_empty() {
        evaluation::default_grid()
    } else {
        a.t.clone()
    };
    let rule = match a.rule {
        RuleArg::Strict => ThresholdRule::Strict,
        RuleArg::Inclusive => ThresholdRule::Inclusive,
    };
    let rep = evaluation::metric_report(&probs, labels, &grid, rule)?;
    if let Some(p) = &a.roc {
        with_file(p, |w| {
            writeln!(w, "fpr\ttpr")?;
            for (f, t) in &rep.roc_points {
                writeln!(w, "{f}\t{t}")?;
            }
            Ok(())
        })?;
    }
    let mut r = format!("samples: {}\nauroc: {:.4}\n", probs.len(), rep.auroc);
    r.push_str("t,precision,recall\n");
    for (t, p, rc) in &rep.pr_curve {
        let _ = writeln!(r, "{t:.2},{p:.4},{rc:.4}");
    }
    write_text(a.report.as_deref(), &r)
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let kind = match a.kind {
        TableArg::Scores => TableKind::Scores,
        TableArg::Ranks => TableKind::Ranks,
    };
    let rt = RankTable::read_path(&a.table, kind)?;
    let avg = rt.average_ranks();
    let n = a.datasets.unwrap_or(rt.datasets.len());
    let (chi2, f) = evaluation::friedman_from_average_ranks(&avg, n)?;
    let cd = evaluation::nemenyi_cd(rt.methods.len(), n, a.q)?;
    let mut r = format!("methods: {}\ndatasets: {n}\n", rt.methods.len());
    for (m, v) in rt.methods.iter().zip(&avg) {
        let _ = writeln!(r, "rank_{m}: {v:.4}");
    }
    let _ = writeln!(r, "tau_chi2: {chi2:.4}");
    let _ = writeln!(r, "tau_f: {f:.4}");
    let _ = writeln!(r, "cd: {cd:.4}");
    write_text(a.report.as_deref(), &r)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Views(a) => cmd_views(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stats(a) => cmd_stats(a),
    }
}
