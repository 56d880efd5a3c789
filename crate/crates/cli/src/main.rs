//! Command-line front end: simulation grid, estimation, forecast evaluation,
//! network summaries and partition-prior calibration.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sbmvar::dgp::run_simulation_grid;
use sbmvar::forecast::{recursive_evaluation, EvaluationModel, EvaluationSpec, VariableGroup};
use sbmvar::io::config::{parse_config, ForecastModelSpec, RunConfig};
use sbmvar::io::data::load_panel;
use sbmvar::io::store::{load_store, save_store};
use sbmvar::metrics::{summarize_network, NetworkSummary};
use sbmvar::model::{NetworkPrior, TimeSeriesPanel, VarConfig};
use sbmvar::partition::{calibrate, PriorVariant};
use sbmvar::sampler::run_chain;

#[derive(Debug, Parser)]
#[command(name = "sbmvar", version, about = "Bayesian VAR with a block-model network prior on the error precision")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel chains, cells and origins.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded deterministic mode.
    #[arg(long, global = true)]
    reproducible: bool,
    #[arg(long, global = true, default_value = "output")]
    output_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo grid and write hit-rate tables.
    Simulate,
    /// Fit one model, persist its draws and summarise the network.
    Estimate,
    /// Recursive out-of-sample evaluation with log predictive scores.
    Forecast,
    /// Network summaries from a persisted draw store.
    Metrics {
        /// Store directory; defaults to `<output-dir>/draws`.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Report the parameter giving a target prior expected number of blocks.
    Calibrate {
        /// Variants to calibrate (GN, DM, DP, PY); all four by default.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Prior expected number of blocks; falls back to `[calibration] target`.
        #[arg(long)]
        target: Option<f64>,
        /// Number of variables; falls back to `[calibration] nodes`, then the data section.
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn load_config(global: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.model.seed = seed;
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn load_data(cfg: &RunConfig) -> anyhow::Result<TimeSeriesPanel> {
    let spec = cfg.data.as_ref().ok_or_else(|| anyhow!("the configuration has no [data] section"))?;
    let panel = load_panel(&spec.path, &spec.variable_list()?)?;
    Ok(if spec.standardize { panel.standardized()? } else { panel })
}

fn simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let results = run_simulation_grid(&cfg.simulation)?;
    results.write_csv(create(out, "hit_rates.csv")?)?;
    results.write_replications_csv(create(out, "hit_rates_replications.csv")?)?;
    for c in &results.cells {
        log::info!(
            "M={} T={} {}: {:?} ({} completed, {} failed)",
            c.m,
            c.t,
            if c.clustered { "clustered" } else { "unclustered" },
            c.mean_hit_rate,
            c.completed,
            c.failed
        );
    }
    println!("wrote {}", out.join("hit_rates.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport {
    config_hash: String,
    n_series: usize,
    n_obs: usize,
    retained_draws: usize,
    log_vol_acceptance: f64,
    ar_acceptance: f64,
    network: NetworkSummary,
}

fn write_edge_frequencies(out: &Path, names: &[String], freq: &nalgebra::DMatrix<f64>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(create(out, "edge_frequencies.csv")?);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..names.len()).map(|j| format!("{:.6}", freq[(i, j)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn estimate(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let panel = load_data(cfg)?;
    let model = cfg.calibrated_model(panel.n_series())?;
    let chain = run_chain(&panel, &model)?;
    let hash = cfg.hash();
    save_store(&chain.draws, &out.join("draws"), &hash)?;
    let network = summarize_network(&chain.draws, cfg.metrics.modularity)?;
    write_edge_frequencies(out, panel.names(), &chain.draws.edge_frequencies())?;
    let report = EstimateReport {
        config_hash: hash,
        n_series: panel.n_series(),
        n_obs: panel.n_obs(),
        retained_draws: chain.draws.len(),
        log_vol_acceptance: chain.diagnostics.log_vol_acceptance,
        ar_acceptance: chain.diagnostics.ar_acceptance,
        network,
    };
    write_json(out, "estimate.json", &report)?;
    println!(
        "{} draws; {} blocks, modularity {:.4}, average degree {:.3}",
        report.retained_draws, report.network.n_groups, report.network.modularity, report.network.average_degree
    );
    Ok(())
}

/// Row count from an integer, or the number of rows before a date label so
/// that the first forecast target is that date.
fn resolve_origin(panel: &TimeSeriesPanel, value: &str) -> anyhow::Result<usize> {
    if let Ok(n) = value.parse::<usize>() {
        return Ok(n);
    }
    let dates = panel.dates().ok_or_else(|| anyhow!("the panel has no dates to match `{value}`"))?;
    dates
        .iter()
        .position(|d| d == value)
        .ok_or_else(|| anyhow!("date `{value}` is not in the panel"))
}

fn forecast_model(cfg: &RunConfig, spec: &ForecastModelSpec, m: usize) -> anyhow::Result<VarConfig> {
    let f = &cfg.forecast;
    let mut model = VarConfig {
        n_draws: f.n_draws,
        burn_in: f.burn_in,
        thin: f.thin,
        network: spec.network.clone(),
        ..cfg.model.clone()
    };
    if spec.network == NetworkPrior::Sbm {
        if let Some(v) = &spec.variant {
            model.partition_prior = calibrate(PriorVariant::from_name(v)?, m, f.calibration_target.min(m as f64))?.spec;
        }
    }
    Ok(model)
}

fn forecast(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let panel = load_data(cfg)?;
    let (t, m) = (panel.n_obs(), panel.n_series());
    let f = &cfg.forecast;
    let models = f
        .models
        .iter()
        .map(|s| Ok(EvaluationModel { label: s.label.clone(), config: forecast_model(cfg, s, m)? }))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let focus: Vec<usize> = if f.focus.is_empty() {
        (0..m.min(3)).collect()
    } else {
        f.focus
            .iter()
            .map(|n| panel.names().iter().position(|x| x == n).ok_or_else(|| anyhow!("unknown focus variable `{n}`")))
            .collect::<anyhow::Result<_>>()?
    };
    let eval_start = match &f.eval_start {
        Some(v) => resolve_origin(&panel, v)?,
        None => t * 3 / 4,
    };
    let eval_end = f.eval_end.as_deref().map(|v| resolve_origin(&panel, v)).transpose()?;
    let spec = EvaluationSpec {
        eval_start,
        eval_end,
        horizons: f.horizons.clone(),
        groups: vec![
            VariableGroup { name: "FOCUS".into(), indices: focus.clone() },
            VariableGroup { name: "ALL".into(), indices: (0..m).collect() },
        ],
        focus,
        baseline: f.baseline.clone(),
        seed: cfg.model.seed,
    };
    let results = recursive_evaluation(&panel, &models, &spec)?;
    results.write_scores_csv(create(out, "lpl_scores.csv")?)?;
    results.write_summary_csv(create(out, "lpl_summary.csv")?)?;
    results.write_cumulative_csv(create(out, "lpl_cumulative.csv")?)?;
    if !results.failed_origins.is_empty() {
        log::warn!("{} origins failed: {:?}", results.failed_origins.len(), results.failed_origins);
    }
    println!("wrote {}", out.join("lpl_summary.csv").display());
    Ok(())
}

fn metrics(cfg: &RunConfig, out: &Path, store: Option<PathBuf>) -> anyhow::Result<()> {
    let dir = store.unwrap_or_else(|| out.join("draws"));
    let (store, _) = load_store(&dir, Some(&cfg.hash()))?;
    let summary = summarize_network(&store, cfg.metrics.modularity)?;
    write_json(out, "network_summary.json", &summary)?;
    println!(
        "{} blocks, modularity {:.4}, average degree {:.3}",
        summary.n_groups, summary.modularity, summary.average_degree
    );
    Ok(())
}

fn calibrate_report(cfg: &RunConfig, out: &Path, variants: Vec<String>, target: Option<f64>, nodes: Option<usize>) -> anyhow::Result<()> {
    let target = target
        .or(cfg.calibration.as_ref().map(|c| c.target))
        .ok_or_else(|| anyhow!("no calibration target: pass --target or set [calibration] target"))?;
    let nodes = match nodes.or(cfg.calibration.as_ref().and_then(|c| c.nodes)) {
        Some(n) => n,
        None => match &cfg.data {
            Some(d) => d.variable_list()?.len(),
            None => bail!("no node count: pass --nodes or set [calibration] nodes"),
        },
    };
    let variants = if variants.is_empty() {
        match &cfg.calibration {
            Some(c) => vec![c.variant.clone()],
            None => ["GN", "DM", "DP", "PY"].iter().map(|s| s.to_string()).collect(),
        }
    } else {
        variants
    };
    let mut w = csv::Writer::from_writer(create(out, "calibration.csv")?);
    w.write_record(["variant", "nodes", "target", "prior", "expected_blocks", "iterations"])?;
    for v in &variants {
        let variant = match &cfg.calibration {
            Some(c) if c.variant.eq_ignore_ascii_case(v) => c.prior_variant()?,
            _ => PriorVariant::from_name(v)?,
        };
        let c = calibrate(variant, nodes, target)?;
        let prior = serde_json::to_string(&c.spec)?;
        println!("{}: {prior} gives E[H] = {:.6}", variant.name(), c.expected);
        w.write_record([
            variant.name().to_string(),
            nodes.to_string(),
            target.to_string(),
            prior,
            format!("{:.10}", c.expected),
            c.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = if cli.global.reproducible { Some(1) } else { cli.global.threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let cfg = load_config(&cli.global)?;
    let out = &cli.global.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Simulate => simulate(&cfg, out),
        Command::Estimate => estimate(&cfg, out),
        Command::Forecast => forecast(&cfg, out),
        Command::Metrics { store } => metrics(&cfg, out, store),
        Command::Calibrate { variants, target, nodes } => calibrate_report(&cfg, out, variants, target, nodes),
    }
}

/// 2 for numerical failures inside the sampler, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<sbmvar::Error>() {
        Some(err) if err.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
