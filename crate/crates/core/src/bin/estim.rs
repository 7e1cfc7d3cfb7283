use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use estim::harness::{
    emit_plotdata, load_bundle, metric_table, run_to_dir, ExperimentConfig, MetricRow, Preset, Scale,
};
use estim::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "estim", version, about = "Neural parameter estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write its result files.
    Run {
        preset: String,
        /// Override a config field, e.g. `sequential.n0=500` or `truth=[2.0]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default `results/<preset>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_name = "basic|literal")]
        bounds_rule: Option<String>,
        #[arg(long, value_name = "smoke|small|paper", default_value = "small")]
        scale: String,
        /// Start from a JSON config file instead of the preset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Exit with status 4 when any replicate hits the iteration limit.
        #[arg(long)]
        require_convergence: bool,
    },
    /// Recompute the metric table from a result directory's estimates.
    Metrics { dir: PathBuf },
    /// Write plot data CSVs into a result directory.
    Plotdata { dir: PathBuf },
    /// Print the default config of a preset.
    Config {
        preset: String,
        #[arg(long, default_value = "small")]
        scale: String,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn build_config(
    preset: &str,
    scale: &str,
    config: Option<PathBuf>,
    set: &[String],
    seed: Option<u64>,
    bounds_rule: Option<String>,
) -> estim::Result<ExperimentConfig> {
    let preset: Preset = preset.parse()?;
    let scale: Scale = scale.parse()?;
    let mut cfg = match config {
        Some(path) => {
            let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
            if cfg.preset != preset {
                return Err(Error::Config(format!(
                    "config file is for preset {}, not {preset}",
                    cfg.preset
                )));
            }
            cfg
        }
        None => ExperimentConfig::preset(preset, scale),
    };
    for s in set {
        cfg.apply_set(s)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(rule) = bounds_rule {
        cfg.set_bounds_rule(rule.parse()?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_metrics(rows: &[MetricRow]) {
    println!("stage\tparameter\testimator\tcount\tbias\tsd\trmse");
    for r in rows {
        println!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.stage, r.parameter, r.estimator, r.count, r.bias, r.sd, r.rmse
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: estim::Result<u8> = (|| match cli.command {
        Command::Run {
            preset,
            set,
            seed,
            out,
            bounds_rule,
            scale,
            config,
            require_convergence,
        } => {
            let cfg = build_config(&preset, &scale, config, &set, seed, bounds_rule)?;
            let out = out.unwrap_or_else(|| PathBuf::from("results").join(cfg.preset.id()));
            let bundle = run_to_dir(&cfg, &out)?;
            println!("wrote {} (config {})", out.display(), bundle.config_hash);
            print_metrics(&bundle.metrics);
            if !bundle.failed.is_empty() {
                eprintln!(
                    "{} of {} replicates failed (see {}): {:?}",
                    bundle.failed.len(),
                    cfg.replicates,
                    out.join(estim::harness::TRACE_FILE).display(),
                    bundle.failed
                );
                return Ok(EXIT_RUNTIME);
            }
            if !bundle.not_converged.is_empty() {
                eprintln!(
                    "{} of {} replicates did not converge: {:?}",
                    bundle.not_converged.len(),
                    cfg.replicates,
                    bundle.not_converged
                );
                if require_convergence {
                    return Ok(EXIT_NOT_CONVERGED);
                }
            }
            Ok(0)
        }
        Command::Metrics { dir } => {
            let bundle = load_bundle(&dir)?;
            let table = metric_table(&bundle.estimates)?;
            print_metrics(&table);
            if table != bundle.metrics {
                eprintln!("metric table in {} differs from the recomputed one", dir.display());
                return Ok(EXIT_RUNTIME);
            }
            Ok(0)
        }
        Command::Plotdata { dir } => {
            let bundle = load_bundle(&dir)?;
            for p in emit_plotdata(&bundle, &dir)? {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Config { preset, scale } => {
            let cfg = ExperimentConfig::preset(preset.parse()?, scale.parse()?);
            println!("{}", cfg.to_json()?);
            Ok(0)
        }
    })();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
