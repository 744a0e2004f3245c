//! Config → dataset → game(s) → shares. One entry point, [`run`], producing
//! a [`ResultDocument`] ready for serialization.

use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use sensa::allocations::{allocate, renormalize, Allocation, AllocationError, AllocationMethod};
use sensa::dataset::{load_csv, Dataset, DatasetError};
use sensa::estimate::{estimate_game, EstimateError};
use sensa::game::{Coalition, CooperativeGame};
use sensa::models::{
    ishigami_sample, linear_gaussian_sample, ncict_sample, sir_demo_sample, synth_dose_tables,
    DoseTables, ModelError,
};
use sensa::resampling::{bootstrap_games, share_report, IntervalReport, ResamplingError};

use crate::config::{InputSpec, Method, RunConfig};
use crate::report::{InputResult, MethodResult, ResultDocument, RunMeta};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dose tables {path}: {source}")]
    Tables {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("model generation: {0}")]
    Model(#[from] ModelError),
    #[error("estimation: {0}")]
    Estimate(#[from] EstimateError),
    #[error("allocation ({method}): {source}")]
    Allocation {
        method: &'static str,
        #[source]
        source: AllocationError,
    },
    #[error("bootstrap repetition {rep}: {source}")]
    Repetition {
        rep: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("bootstrap: {0}")]
    Resampling(#[from] ResamplingError),
}

/// Builds the dataset a config describes (loading a CSV or running one of
/// the generators).
pub fn build_dataset(config: &RunConfig) -> Result<Dataset, PipelineError> {
    match &config.input {
        InputSpec::Csv { path, .. } => {
            let specs = config.csv_specs().expect("csv input");
            Ok(load_csv(path, &specs)?)
        }
        InputSpec::CtScan {
            organ,
            exam_class,
            n,
            tables_seed,
            tables_path,
        } => {
            let tables = match tables_path {
                Some(path) => load_dose_tables(path)?,
                None => synth_dose_tables(*tables_seed),
            };
            Ok(ncict_sample(&tables, *organ, *exam_class, *n, config.seed)?)
        }
        InputSpec::LinearGaussian {
            n,
            weights,
            correlation,
        } => Ok(linear_gaussian_sample(*n, weights, correlation, config.seed)?),
        InputSpec::Ishigami { n, a, b } => Ok(ishigami_sample(*n, *a, *b, config.seed)?),
        InputSpec::Sir { n, correlation, output } => {
            Ok(sir_demo_sample(*n, correlation, *output, config.seed)?)
        }
    }
}

fn load_dose_tables(path: &PathBuf) -> Result<DoseTables, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Tables {
        path: path.clone(),
        source,
    })
}

fn game_allocation(
    game: &CooperativeGame,
    method: AllocationMethod,
    renorm: bool,
) -> Result<Allocation, AllocationError> {
    let alloc = allocate(game, method)?;
    if renorm {
        renormalize(&alloc)
    } else {
        Ok(alloc)
    }
}

/// Drops above this size count as monotonicity violations in the audit.
const AUDIT_DROP_TOLERANCE: f64 = 0.02;

/// Reports how non-monotone the estimated game came out. kNN conditional
/// variances over-smooth in large coalitions, so adjacent worths can invert;
/// downstream clipping handles it, but the extent is worth surfacing.
fn audit_warning(game: &CooperativeGame, warnings: &mut Vec<String>) {
    let audit = game.monotonicity_audit(AUDIT_DROP_TOLERANCE);
    if audit.violations > 0 {
        warnings.push(format!(
            "monotonicity audit: {} of {} adjacent coalition pairs drop more than {} (worst {:.4})",
            audit.violations, audit.edges, AUDIT_DROP_TOLERANCE, audit.worst_drop,
        ));
    }
}

/// Total Sobol' indices read off a normalized variance game: the dual's
/// singleton worths. Never renormalized — their sum exceeding one measures
/// interaction and dependence.
fn total_sobol_shares(game: &CooperativeGame) -> Vec<f64> {
    let dual = game.dual();
    (0..game.players())
        .map(|i| dual.value(Coalition::singleton(i)))
        .collect()
}

fn method_shares(
    game: &CooperativeGame,
    method: Method,
    renorm: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, PipelineError> {
    let shares = match method {
        Method::TotalSobol => total_sobol_shares(game),
        Method::Shapley | Method::Pme => {
            let inner = match method {
                Method::Shapley => AllocationMethod::Shapley,
                _ => AllocationMethod::Pme,
            };
            let alloc =
                game_allocation(game, inner, renorm).map_err(|source| PipelineError::Allocation {
                    method: method.name(),
                    source,
                })?;
            for w in &alloc.diagnostics.warnings {
                warnings.push(format!("{}: {w}", method.name()));
            }
            alloc.shares
        }
    };
    Ok(shares)
}

/// Competition ranking by descending share; ties keep input order.
fn ranks(shares: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[b].partial_cmp(&shares[a]).unwrap().then(a.cmp(&b)));
    let mut rank = vec![0usize; shares.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    rank
}

fn method_result(
    method: Method,
    names: &[String],
    shares: Vec<f64>,
    report: Option<&IntervalReport>,
) -> MethodResult {
    let rank = ranks(&shares);
    let inputs = names
        .iter()
        .enumerate()
        .map(|(i, name)| InputResult {
            name: name.clone(),
            estimate: shares[i],
            ci_low: report.map(|r| r.intervals[i].ci_low),
            ci_high: report.map(|r| r.intervals[i].ci_high),
            rank: rank[i],
        })
        .collect();
    MethodResult { method, inputs }
}

/// Runs one configured analysis end to end.
///
/// With a bootstrap configured, the expensive estimation pass (full data
/// plus every repetition) happens once and all requested methods are read
/// off the same games.
pub fn run(config: &RunConfig) -> Result<ResultDocument, PipelineError> {
    config.validate()?;
    let ds = build_dataset(config)?;
    log::info!(
        "dataset ready: n = {}, d = {}, output {:?}",
        ds.n(),
        ds.d(),
        ds.output_name()
    );
    let names: Vec<String> = ds.input_names().iter().map(|s| s.to_string()).collect();
    let mut warnings = Vec::new();
    let mut results = Vec::new();

    match &config.bootstrap {
        None => {
            let start = std::time::Instant::now();
            let game = estimate_game(&ds, config.neighbors, config.ann_epsilon)?;
            log::info!("game estimated in {:.1} s", start.elapsed().as_secs_f64());
            audit_warning(&game, &mut warnings);
            for &method in &config.methods {
                let renorm = config.renormalize && method != Method::TotalSobol;
                let shares = method_shares(&game, method, renorm, &mut warnings)?;
                results.push(method_result(method, &names, shares, None));
            }
        }
        Some(bootstrap) => {
            let plan = bootstrap.plan(config.seed);
            let start = std::time::Instant::now();
            let games = bootstrap_games(&ds, config.neighbors, config.ann_epsilon, &plan)?;
            log::info!(
                "estimated 1 + {} games in {:.1} s",
                games.repetitions.len(),
                start.elapsed().as_secs_f64()
            );
            audit_warning(&games.full, &mut warnings);
            for &method in &config.methods {
                let renorm = config.renormalize && method != Method::TotalSobol;
                let full = method_shares(&games.full, method, renorm, &mut warnings)?;
                let reps = games
                    .repetitions
                    .iter()
                    .enumerate()
                    .map(|(rep, game)| {
                        let mut sink = Vec::new();
                        method_shares(game, method, renorm, &mut sink).map_err(|e| {
                            PipelineError::Repetition {
                                rep,
                                source: Box::new(e),
                            }
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let report = share_report(&plan, &full, reps)?;
                results.push(method_result(method, &names, full, Some(&report)));
            }
        }
    }

    Ok(ResultDocument {
        meta: RunMeta {
            n: ds.n(),
            d: ds.d(),
            target: ds.output_name().to_string(),
            neighbors: config.neighbors,
            ann_epsilon: config.ann_epsilon,
            seed: config.seed,
            renormalize: config.renormalize,
            bootstrap: config.bootstrap.clone(),
            warnings,
        },
        results,
    })
}
