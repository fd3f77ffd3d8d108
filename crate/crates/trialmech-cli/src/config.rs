//! TOML run configuration.
//!
//! ```toml
//! [model]
//! lambda = 1.0
//! T = 5.0
//! mu0 = 0.5
//! # r = 0.1            # discount rate, infinite-horizon extension only
//!
//! [distribution]
//! family = "uniform"   # or "tabulated" with points = [[v, F], ...]
//! lo = 0.9
//! hi = 1.1
//! # normalize = true
//!
//! [task]
//! kind = "solve"       # must match the subcommand when present
//! wl = 0.0
//!
//! [extension]          # ExtendedParams, extension task only
//! u = 0.2
//!
//! [output]
//! dir = "out"
//! ```

use serde::Deserialize;
use std::path::PathBuf;
use trialmech::extensions::ExtendedParams;
use trialmech::oracle::ThresholdMode;
use trialmech::primitives::{DistOptions, Family};

/// Whole configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub distribution: DistBlock,
    #[serde(default)]
    pub task: TaskBlock,
    #[serde(default)]
    pub extension: Option<ExtendedParams>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// `[model]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub lambda: f64,
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    pub mu0: f64,
    #[serde(default)]
    pub r: Option<f64>,
}

/// `[distribution]`: a family plus construction switches.
#[derive(Debug, Clone, Deserialize)]
pub struct DistBlock {
    #[serde(flatten)]
    pub family: Family,
    #[serde(flatten)]
    pub options: DistOptions,
}

/// Extension selected by the extension task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    InfiniteHorizon,
    Cancellable,
    BadNews,
    MixedNews,
}

/// `[task]`: task kind and task-specific parameters (all optional).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    pub kind: Option<String>,
    pub wl: Option<f64>,
    /// Frontier weight-grid size.
    pub grid: Option<usize>,
    /// Explicit frontier weights.
    pub weights: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    /// Oracle time bins.
    pub k: Option<usize>,
    /// Oracle value-grid size.
    pub m: Option<usize>,
    pub mode: Option<ThresholdMode>,
    /// Switch candidates of the control search.
    pub switch_bins: Option<usize>,
    /// Screening set `[[I, q], ...]`.
    pub screening: Option<Vec<[f64; 2]>>,
    /// Priors for the welfare comparison.
    pub mu0_grid: Option<Vec<f64>>,
    pub extension: Option<ExtensionKind>,
}

/// `[output]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}
