//! `whflow`: run density-flow scenarios, verify module invariants, and
//! measure convergence orders under parameter refinement.
//!
//! Exit codes: 0 when everything executed passes, 1 when a check or run
//! fails, 2 on usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use whflow::scenarios::{self, OracleConfig, RunReport, ScenarioConfig, ScenarioKind};
use whflow::verify;

#[derive(Parser)]
#[command(
    name = "whflow",
    version,
    about = "Hamiltonian flows on the probability density manifold over the periodic torus"
)]
struct Cli {
    /// Print only failures and final results.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file or a built-in preset name.
    Run {
        /// Path to a config JSON, or one of the preset names from `info`.
        #[arg(value_name = "CONFIG", required_unless_present = "config_flag")]
        config: Option<String>,
        /// Flag form of the config path.
        #[arg(long = "config", value_name = "PATH", conflicts_with = "config")]
        config_flag: Option<String>,
        /// Override a config field before validation, e.g. `time.dt=5e-4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides `output_dir` from the config).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Override the oracle seed (particles oracle only).
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Run the module invariant suites on small grids.
    Verify,
    /// Re-run a scenario over a list of values of one config field and
    /// print the measured convergence orders.
    Sweep {
        /// Path to a config JSON, or a preset name.
        #[arg(value_name = "CONFIG", required_unless_present = "config_flag")]
        config: Option<String>,
        /// Flag form of the config path.
        #[arg(long = "config", value_name = "PATH", conflicts_with = "config")]
        config_flag: Option<String>,
        /// Dotted config key to vary, e.g. `time.dt`.
        #[arg(long, value_name = "KEY")]
        param: String,
        /// Comma-separated values for the swept key.
        #[arg(long, value_name = "V1,V2,...", value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Additional fixed overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Override the oracle seed (particles oracle only).
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// List the built-in scenario presets.
    Info,
}

enum Failure {
    /// Usage or configuration problem (exit 2).
    Usage(String),
    /// A run or check failed (exit 1).
    Run(String),
}

impl From<whflow::Error> for Failure {
    fn from(e: whflow::Error) -> Self {
        match e {
            whflow::Error::InvalidConfig(_) | whflow::Error::Format { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Run {
            config,
            config_flag,
            set,
            out,
            seed,
        } => {
            let source = config.or(config_flag).expect("clap enforces one");
            cmd_run(&source, &set, out, seed, quiet)
        }
        Command::Verify => cmd_verify(quiet),
        Command::Sweep {
            config,
            config_flag,
            param,
            values,
            set,
            seed,
        } => {
            let source = config.or(config_flag).expect("clap enforces one");
            cmd_sweep(&source, &param, &values, &set, seed, quiet)
        }
        Command::Info => cmd_info(),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Load a config as a JSON value (preset name or file path), apply
/// overrides, then deserialize strictly.
fn load_config(
    source: &str,
    sets: &[String],
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ScenarioConfig, Failure> {
    let mut value = if let Some(kind) = ScenarioKind::from_name(source) {
        serde_json::to_value(scenarios::preset(kind)).expect("presets serialize")
    } else {
        let text = std::fs::read_to_string(source)
            .map_err(|e| Failure::Usage(format!("cannot read config `{source}`: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("config `{source}` is not valid JSON: {e}")))?
    };

    for entry in sets {
        let (key, raw) = entry.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("override `{entry}` must have the form key=value"))
        })?;
        scenarios::apply_override(&mut value, key, raw).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(dir) = out {
        let dir = dir.to_string_lossy().into_owned();
        scenarios::apply_override(&mut value, "output_dir", &format!("{dir:?}"))
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(seed) = seed {
        let is_particles = value
            .pointer("/oracle/kind")
            .and_then(|v| v.as_str())
            .map(|k| k == "particles")
            .unwrap_or(false);
        if !is_particles {
            return Err(Failure::Usage(
                "--seed applies only to configs with the particles oracle".to_string(),
            ));
        }
        scenarios::apply_override(&mut value, "oracle.seed", &seed.to_string())
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }

    serde_json::from_value(value)
        .map_err(|e| Failure::Usage(format!("config does not match the schema: {e}")))
}

fn cmd_run(
    source: &str,
    sets: &[String],
    out: Option<PathBuf>,
    seed: Option<u64>,
    quiet: bool,
) -> Result<ExitCode, Failure> {
    let config = load_config(source, sets, out, seed)?;
    let report = scenarios::run(&config)?;
    if !quiet {
        println!("{}", report.to_json());
        if let Some(dir) = &config.output_dir {
            eprintln!("outputs written to {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(quiet: bool) -> Result<ExitCode, Failure> {
    let outcomes = verify::run_all();
    if quiet {
        for o in outcomes.iter().filter(|o| !o.passed) {
            println!("FAIL {} ({})", o.name, o.detail);
        }
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        println!("{} checks, {} failed", outcomes.len(), failed);
    } else {
        print!("{}", verify::render(&outcomes));
    }
    if outcomes.iter().all(|o| o.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

/// Metrics tracked across a sweep, in print order.
const SWEEP_METRICS: [&str; 5] = [
    "hamiltonian_drift_rel",
    "primal_residual_mid",
    "oracle_l1",
    "continuity_residual",
    "hj_residual",
];

fn metric_value(report: &RunReport, name: &str) -> Option<f64> {
    match name {
        "hamiltonian_drift_rel" => Some(report.hamiltonian_drift_rel),
        "primal_residual_mid" => Some(report.primal_residual_mid),
        "oracle_l1" => report.oracle_l1,
        other => report.extras.get(other).copied(),
    }
}

fn cmd_sweep(
    source: &str,
    param: &str,
    values: &[String],
    sets: &[String],
    seed: Option<u64>,
    quiet: bool,
) -> Result<ExitCode, Failure> {
    if values.len() < 2 {
        return Err(Failure::Usage(
            "a sweep needs at least two --values entries".to_string(),
        ));
    }
    let mut reports = Vec::new();
    for v in values {
        let mut sets = sets.to_vec();
        sets.push(format!("{param}={v}"));
        // Sweeps are measurement runs; they do not write files.
        let mut config = load_config(source, &sets, None, seed)?;
        config.output_dir = None;
        let report = scenarios::run(&config)?;
        if !quiet {
            let shown: Vec<String> = SWEEP_METRICS
                .iter()
                .filter_map(|m| metric_value(&report, m).map(|x| format!("{m}={x:.6e}")))
                .collect();
            println!("{param}={v}: {}", shown.join(" "));
        }
        reports.push(report);
    }

    let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    match numeric {
        Some(xs) => {
            println!("convergence orders ({param}):");
            for metric in SWEEP_METRICS {
                let ys: Vec<Option<f64>> = reports.iter().map(|r| metric_value(r, metric)).collect();
                if ys.iter().any(|y| y.is_none()) {
                    continue;
                }
                let orders: Vec<String> = xs
                    .windows(2)
                    .zip(ys.windows(2))
                    .map(|(x, y)| {
                        let (a, b) = (y[0].unwrap(), y[1].unwrap());
                        if a <= 0.0 || b <= 0.0 {
                            "n/a".to_string()
                        } else {
                            format!("{:.2}", (a / b).ln() / (x[0] / x[1]).ln())
                        }
                    })
                    .collect();
                println!("  {metric}: {}", orders.join(", "));
            }
        }
        None => println!("(non-numeric sweep values; orders not computed)"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_info() -> Result<ExitCode, Failure> {
    println!("built-in scenario presets (run with `whflow run <name>`):\n");
    for kind in ScenarioKind::ALL {
        let config = scenarios::preset(kind);
        let energy: Vec<String> = config
            .energy
            .iter()
            .map(|t| match t {
                scenarios::EnergyTermConfig::LinearPotential { coefficient, .. } => {
                    format!("{coefficient} * linear potential")
                }
                scenarios::EnergyTermConfig::Interaction { coefficient, .. } => {
                    format!("{coefficient} * pairwise interaction")
                }
                scenarios::EnergyTermConfig::FisherInformation { coefficient } => {
                    format!("{coefficient} * Fisher information")
                }
            })
            .collect();
        let energy = if energy.is_empty() {
            "none (free flow)".to_string()
        } else {
            energy.join(" + ")
        };
        let oracle = match &config.oracle {
            OracleConfig::None => "none".to_string(),
            OracleConfig::Particles {
                n_particles, seed, ..
            } => format!("particle characteristics (N={n_particles}, seed {seed})"),
            OracleConfig::Schrodinger => "split-step wave solver".to_string(),
            OracleConfig::Bridge { .. } => "forward/backward heat pair".to_string(),
        };
        println!(
            "  {:<17} d={} n={} dt={} T={} energy: {energy}; oracle: {oracle}",
            kind.name(),
            config.grid.dim,
            config.grid.n,
            config.time.dt,
            config.time.t_final,
        );
    }
    Ok(ExitCode::SUCCESS)
}
