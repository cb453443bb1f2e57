//! Outlier detection for mixed nominal/numerical tables.
//!
//! Samples are scored with fuzzy granule densities, re-scored on a
//! hierarchy of coarser granular-ball views, fused into a single outlier
//! probability, split into reliable/uncertain regions, and finally refined
//! by a per-sample weighted linear SVM.
//!
//! ```no_run
//! use msgod::{load_dataset, run_pipeline, PipelineConfig, SchemaSource};
//!
//! let ds = load_dataset("iris.csv", SchemaSource::Infer)?.normalize();
//! let out = run_pipeline(&ds, &PipelineConfig::new(0.1, 10.0, 0.1))?;
//! println!("{:?}", &out.final_probabilities[..5]);
//! # Ok::<(), msgod::Error>(())
//! ```

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fgd;
pub mod fusion;
pub mod granular;
pub mod wsvm;

pub use dataset::{
    inject_outliers, load_dataset, AttributeKind, AttributeSchema, Column, Feature, InjectionKind,
    InjectionSpec, MixedDataset, SchemaSource,
};
pub use error::{Error, Result};
pub use evaluation::{auroc, nemenyi_cd, precision_recall, roc_points, RankTable, ThresholdRule};
pub use fgd::{outlier_scores, SimilarityMatrix};
pub use fusion::{run_pipeline, FusionState, PipelineConfig, PipelineResult, Region};
pub use granular::{generate_views, GranularBall, ScaleView, ViewHierarchy};
pub use wsvm::{SmoOptions, TrainingSet, WsvmModel};
