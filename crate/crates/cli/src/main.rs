mod config;
mod pipeline;
mod report;
mod svg;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;

use crate::config::{BootstrapConfig, InputSpec, Method, Preset, RunConfig};
use crate::report::ResultDocument;

/// Given-data sensitivity analysis: Shapley effects, proportional marginal
/// effects, and total Sobol' indices for dependent, mixed-type inputs.
#[derive(Parser, Debug)]
#[command(name = "sensa", version)]
struct Cli {
    /// JSON run configuration (see the repository README for the schema).
    #[arg(long)]
    config: PathBuf,

    /// Replace the CSV path of a csv-kind config.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output column to explain.
    #[arg(long)]
    target: Option<String>,

    /// Method to compute; repeat for several. Overrides the config list.
    #[arg(long = "method", value_name = "METHOD")]
    methods: Vec<Method>,

    /// Nearest neighbors per conditional-variance estimate.
    #[arg(long)]
    neighbors: Option<usize>,

    /// Approximation slack for the neighbor search (0 = exact).
    #[arg(long)]
    ann_epsilon: Option<f64>,

    /// Bootstrap repetitions (enables the bootstrap if the config has none).
    #[arg(long)]
    reps: Option<usize>,

    /// Rows kept per bootstrap repetition, as a fraction of n.
    #[arg(long)]
    subsample_fraction: Option<f64>,

    /// Bootstrap CI quantiles, e.g. --ci 0.05 0.95.
    #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"])]
    ci: Option<Vec<f64>>,

    /// Report 2·full − mean(repetitions) instead of the full-data estimate.
    #[arg(long)]
    bias_correct: bool,

    /// Force shapley/pme shares to sum to one.
    #[arg(long)]
    renormalize: bool,

    /// Seed for sampling, subsampling, and any Monte Carlo fallback.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the result document as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,

    /// Write a bar chart of the shares as SVG.
    #[arg(long)]
    out_svg: Option<PathBuf>,

    /// Apply a bundled protocol after the config file, before other flags.
    #[arg(long)]
    preset: Option<Preset>,
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Folds the command-line overrides into the file config. Order of
/// precedence: file < preset < flags.
fn apply_overrides(config: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(preset) = cli.preset {
        preset.apply(config);
    }
    if let Some(path) = &cli.input {
        match &mut config.input {
            InputSpec::Csv { path: slot, .. } => *slot = path.clone(),
            _ => bail!("--input replaces a CSV path, but the config's input is not csv-kind"),
        }
    }
    if let Some(target) = &cli.target {
        config.target = Some(target.clone());
    }
    if !cli.methods.is_empty() {
        config.methods = cli.methods.clone();
    }
    if let Some(k) = cli.neighbors {
        config.neighbors = k;
    }
    if let Some(eps) = cli.ann_epsilon {
        config.ann_epsilon = eps;
    }
    let wants_bootstrap = cli.reps.is_some()
        || cli.subsample_fraction.is_some()
        || cli.ci.is_some()
        || cli.bias_correct;
    if wants_bootstrap {
        let bootstrap = match (&mut config.bootstrap, cli.reps) {
            (Some(b), _) => b,
            (slot @ None, Some(reps)) => slot.insert(BootstrapConfig {
                repetitions: reps,
                fraction: 0.9,
                quantiles: (0.05, 0.95),
                bias_correct: false,
            }),
            (None, None) => {
                bail!("--subsample-fraction/--ci/--bias-correct need --reps or a bootstrap section")
            }
        };
        if let Some(reps) = cli.reps {
            bootstrap.repetitions = reps;
        }
        if let Some(fraction) = cli.subsample_fraction {
            bootstrap.fraction = fraction;
        }
        if let Some(ci) = &cli.ci {
            bootstrap.quantiles = (ci[0], ci[1]);
        }
        if cli.bias_correct {
            bootstrap.bias_correct = true;
        }
    }
    if cli.renormalize {
        config.renormalize = true;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(path) = &cli.out_json {
        config.out_json = Some(path.clone());
    }
    if let Some(path) = &cli.out_svg {
        config.out_svg = Some(path.clone());
    }
    Ok(())
}

fn print_summary(doc: &ResultDocument) {
    let meta = &doc.meta;
    println!(
        "n = {}, d = {}, target = {}, k = {}, seed = {}",
        meta.n, meta.d, meta.target, meta.neighbors, meta.seed
    );
    for warning in &meta.warnings {
        println!("warning: {warning}");
    }
    for result in &doc.results {
        let sum: f64 = result.inputs.iter().map(|i| i.estimate).sum();
        println!("\n{} (sum {:.4})", result.method.name(), sum);
        let name_width = result
            .inputs
            .iter()
            .map(|i| i.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        for input in &result.inputs {
            let ci = match (input.ci_low, input.ci_high) {
                (Some(lo), Some(hi)) => format!("  [{lo:.4}, {hi:.4}]"),
                _ => String::new(),
            };
            println!(
                "  {:>2}  {:<name_width$}  {:>8.4}{}",
                input.rank, input.name, input.estimate, ci
            );
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = load_config(&cli.config)?;
    apply_overrides(&mut config, &cli)?;
    let doc = pipeline::run(&config)?;
    print_summary(&doc);
    if let Some(path) = &config.out_json {
        fs::write(path, doc.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    if let Some(path) = &config.out_svg {
        fs::write(path, svg::render(&doc)?)
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
