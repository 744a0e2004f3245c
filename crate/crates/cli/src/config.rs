//! Run configuration: a JSON-file schema mirrored by command-line overrides.
//! Precedence is defaults < config file < preset < explicit flags.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sensa::dataset::{ColumnKind, ColumnSpec};
use sensa::models::{ExamClass, Organ, SirOutput};
use sensa::resampling::BootstrapPlan;

use crate::pipeline::PipelineError;

/// Sensitivity measures the pipeline can report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Shapley,
    Pme,
    TotalSobol,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Shapley => "shapley",
            Method::Pme => "pme",
            Method::TotalSobol => "total-sobol",
        }
    }
}

/// Where the sample comes from: a CSV file with declared column types, or
/// one of the built-in synthetic generators.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSpec {
    /// CSV with a header row; `columns` declares names, types and which one
    /// is the output (or leave that to `target`).
    Csv {
        path: PathBuf,
        columns: Vec<ColumnSpec>,
    },
    /// Synthetic CT examinations with organ dose as the output.
    CtScan {
        organ: Organ,
        exam_class: ExamClass,
        n: usize,
        /// Seed for the synthetic coefficient tables (independent of the
        /// run seed so populations can vary over fixed tables).
        #[serde(default)]
        tables_seed: u64,
        /// Load coefficient tables from a JSON file instead of synthesizing.
        #[serde(default)]
        tables_path: Option<PathBuf>,
    },
    /// `Y = Σ wᵢXᵢ` on correlated standard normals.
    LinearGaussian {
        n: usize,
        weights: Vec<f64>,
        correlation: Vec<Vec<f64>>,
    },
    /// The three-input Ishigami benchmark.
    Ishigami { n: usize, a: f64, b: f64 },
    /// SIR epidemic demo over correlated (beta, gamma, i0).
    Sir {
        n: usize,
        correlation: Vec<Vec<f64>>,
        output: SirOutput,
    },
}

impl InputSpec {
    /// Output column name a synthetic generator will produce, if static.
    fn synthetic_output(&self) -> Option<&str> {
        match self {
            InputSpec::Csv { .. } => None,
            InputSpec::CtScan { .. } => Some("dose"),
            InputSpec::LinearGaussian { .. } | InputSpec::Ishigami { .. } => Some("y"),
            InputSpec::Sir { output, .. } => Some(output.column_name()),
        }
    }
}

/// Bootstrap settings as configured; the run seed completes them into a
/// [`BootstrapPlan`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub repetitions: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_quantiles")]
    pub quantiles: (f64, f64),
    #[serde(default)]
    pub bias_correct: bool,
}

fn default_fraction() -> f64 {
    0.9
}

fn default_quantiles() -> (f64, f64) {
    (0.05, 0.95)
}

impl BootstrapConfig {
    pub fn plan(&self, seed: u64) -> BootstrapPlan {
        let mut plan = BootstrapPlan::new(self.repetitions, self.fraction, self.quantiles, seed);
        plan.bias_correct = self.bias_correct;
        plan
    }
}

/// One batch run: input, methods, estimator settings, optional bootstrap,
/// output paths.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    /// Output column; optional when the input declares it (CSV `output`
    /// flag) or the generator fixes it.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    #[serde(default)]
    pub ann_epsilon: f64,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    /// Rescale shapley/pme shares to sum to exactly one.
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_json: Option<PathBuf>,
    #[serde(default)]
    pub out_svg: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Shapley, Method::Pme]
}

fn default_neighbors() -> usize {
    3
}

/// The two bundled protocols: a quick survey profile and the heavyweight
/// per-examination profile (exact search, 200 bias-corrected repetitions,
/// shares forced to sum to one).
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    CovidProtocol,
    CtProtocol,
}

impl Preset {
    pub fn apply(self, config: &mut RunConfig) {
        match self {
            Preset::CovidProtocol => {
                config.neighbors = 3;
                config.ann_epsilon = 0.0;
                config.bootstrap = Some(BootstrapConfig {
                    repetitions: 100,
                    fraction: 0.8,
                    quantiles: (0.025, 0.975),
                    bias_correct: false,
                });
                config.renormalize = false;
            }
            Preset::CtProtocol => {
                config.neighbors = 100;
                config.ann_epsilon = 0.0;
                config.bootstrap = Some(BootstrapConfig {
                    repetitions: 200,
                    fraction: 0.9,
                    quantiles: (0.05, 0.95),
                    bias_correct: true,
                });
                config.renormalize = true;
            }
        }
    }
}

impl RunConfig {
    /// Structural validation; everything here fails before any data is
    /// loaded or generated.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let config = |msg: String| Err(PipelineError::Config(msg));
        if self.methods.is_empty() {
            return config("no methods requested".into());
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return config(format!("method {} requested twice", m.name()));
            }
            seen.push(*m);
        }
        if self.neighbors < 2 {
            return config(format!("neighbors must be at least 2, got {}", self.neighbors));
        }
        if !self.ann_epsilon.is_finite() || self.ann_epsilon < 0.0 {
            return config(format!("ann_epsilon must be finite and >= 0, got {}", self.ann_epsilon));
        }
        if let Some(b) = &self.bootstrap {
            b.plan(self.seed)
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        match &self.input {
            InputSpec::Csv { columns, .. } => {
                if columns.is_empty() {
                    return config("csv input declares no columns".into());
                }
                match &self.target {
                    Some(target) => {
                        let Some(spec) = columns.iter().find(|c| &c.name == target) else {
                            return config(format!("target column {target:?} is not declared"));
                        };
                        if !matches!(spec.kind, ColumnKind::Numeric { .. }) {
                            return config(format!("target column {target:?} must be numeric"));
                        }
                    }
                    None => {
                        let outputs = columns.iter().filter(|c| c.output).count();
                        if outputs != 1 {
                            return config(format!(
                                "csv input needs exactly one output column (or a target), found {outputs}"
                            ));
                        }
                    }
                }
            }
            synthetic => {
                let produced = synthetic.synthetic_output().expect("synthetic inputs are static");
                if let Some(target) = &self.target {
                    if target != produced {
                        return config(format!(
                            "target column {target:?} does not exist; this generator produces {produced:?}"
                        ));
                    }
                }
                match synthetic {
                    InputSpec::CtScan { n, .. } if *n < 100 => {
                        return config(format!("ct-scan generator needs n >= 100, got {n}"));
                    }
                    InputSpec::LinearGaussian { n, .. }
                    | InputSpec::Ishigami { n, .. }
                    | InputSpec::Sir { n, .. }
                        if *n < 2 =>
                    {
                        return config(format!("generator needs n >= 2, got {n}"));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// CSV column list with the output designated by `target` (when set).
    pub fn csv_specs(&self) -> Option<Vec<ColumnSpec>> {
        let InputSpec::Csv { columns, .. } = &self.input else {
            return None;
        };
        let mut specs = columns.clone();
        if let Some(target) = &self.target {
            for spec in &mut specs {
                spec.output = &spec.name == target;
            }
        }
        Some(specs)
    }
}
