//! Config-driven experiment runner: parsing, experiment drivers and the
//! subcommand table shared by the binary and the integration tests.

pub mod config;
pub mod experiments;

use std::path::PathBuf;

use config::{Experiment, ExperimentConfig};

/// Subcommand table: name, one-line description.
pub const SUBCOMMANDS: [(&str, &str); 8] = [
    ("simulate-pj", "nonlinear evolution with stability diagnostics"),
    ("simulate-ipm", "blow-up run with self-similar rate fitting"),
    ("linear-decay", "weighted damping of the linear problems"),
    ("steady-classify", "stationary-state classification oracle"),
    ("characteristics", "characteristic tracing and conserved quantities"),
    ("instability", "low-regularity cusp experiment"),
    ("bridge", "change-of-variables round trip"),
    ("verify", "run the full acceptance suite"),
];

pub fn experiment_for(subcommand: &str) -> Option<Experiment> {
    Some(match subcommand {
        "simulate-pj" | "characteristics" => Experiment::PjStability,
        "simulate-ipm" => Experiment::IpmBlowup,
        "linear-decay" => Experiment::LinearDecay,
        "steady-classify" => Experiment::SteadyClassify,
        "instability" => Experiment::Instability,
        "bridge" => Experiment::BridgeRoundtrip,
        "verify" => Experiment::Acceptance,
        _ => return None,
    })
}

pub struct CliArgs {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub output_dir: Option<PathBuf>,
}

pub fn parse_args(args: &[String]) -> Result<CliArgs, String> {
    let mut it = args.iter();
    let subcommand = it.next().ok_or_else(usage)?.clone();
    if !SUBCOMMANDS.iter().any(|(s, _)| *s == subcommand) {
        return Err(format!("unknown subcommand '{subcommand}'\n{}", usage()));
    }
    let mut out = CliArgs {
        subcommand,
        config_path: None,
        overrides: Vec::new(),
        output_dir: None,
    };
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                out.config_path = Some(PathBuf::from(it.next().ok_or("--config needs a path")?));
            }
            "--output-dir" => {
                out.output_dir = Some(PathBuf::from(
                    it.next().ok_or("--output-dir needs a path")?,
                ));
            }
            "--set" => {
                let kv = it.next().ok_or("--set needs key=value")?;
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("--set expects key=value, got '{kv}'"))?;
                out.overrides.push((k.to_string(), v.to_string()));
            }
            other => return Err(format!("unknown argument '{other}'\n{}", usage())),
        }
    }
    Ok(out)
}

pub fn usage() -> String {
    let mut s = String::from(
        "usage: pjipm <subcommand> [--config PATH] [--set key=value ...] [--output-dir DIR]\n\nsubcommands:\n",
    );
    for (name, desc) in SUBCOMMANDS {
        s.push_str(&format!("  {name:<16} {desc}\n"));
    }
    s.push_str(
        "\nkeys use section.key addressing (e.g. policy.dt_max, weights.theta);\nPJIPM_OUTPUT_DIR sets the default output root.\n",
    );
    s
}

/// Build the effective config for a parsed command line. The `characteristics`
/// subcommand runs the stability experiment and then traces from z0; it is
/// handled by the binary on top of the pj run.
pub fn effective_config(args: &CliArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config_path {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if args.config_path.is_none() {
        if let Some(exp) = experiment_for(&args.subcommand) {
            cfg.experiment = exp;
        }
        match args.subcommand.as_str() {
            "simulate-ipm" | "bridge" => cfg.horizon = 10.0,
            "instability" => cfg.grid_n = 4096,
            "linear-decay" => {
                cfg.initial_data = config::InitialData::SinCubed;
                cfg.horizon = 6.0;
            }
            "steady-classify" => {
                cfg.initial_data = config::InitialData::CosK { k: 2, mu: 3.0 };
            }
            _ => {}
        }
    }
    for (k, v) in &args.overrides {
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}
