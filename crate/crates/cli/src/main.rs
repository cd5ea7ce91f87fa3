//! `landau-kit`: experiment driver for the landau-core toolkit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{ExperimentConfig, EXPERIMENTS};
use experiments::RunError;
use output::OutputDir;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "landau-kit", version, about = "Landau damping experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`; default `runs/<config stem>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered experiments.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run the Penrose stability check from a config, whatever its experiment.
    Penrose {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-process a finished run directory into `diagnose.json`.
    Diagnose { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out, None),
        Command::Penrose { config, out } => run(&config, out, Some("penrose")),
        Command::List { json } => {
            list(json);
            Ok(())
        }
        Command::Diagnose { dir } => diagnose_dir(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Numerical(_) => EXIT_NUMERICAL,
                RunError::Config(_) | RunError::Io(_) => EXIT_CONFIG,
            })
        }
    }
}

/// `LANDAU_KIT_THREADS` caps the worker pool.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LANDAU_KIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LANDAU_KIT_THREADS: expected a positive integer, found `{v}`"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn list(as_json: bool) {
    if as_json {
        let rows: Vec<Value> = EXPERIMENTS
            .iter()
            .map(|(n, d)| json!({"name": n, "description": d}))
            .collect();
        println!("{}", serde_json::to_string_pretty(&json!({"experiments": rows})).unwrap());
    } else {
        let width = EXPERIMENTS.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        for (n, d) in EXPERIMENTS {
            println!("{n:width$}  {d}");
        }
    }
}

fn run(path: &Path, out: Option<PathBuf>, force: Option<&str>) -> Result<(), RunError> {
    let config_err = |e: config::ConfigError| RunError::Config(e.to_string());
    let mut cfg = ExperimentConfig::load(path).map_err(config_err)?;
    if let Some(name) = force {
        cfg.experiment = name.to_string();
    }
    let cfg = cfg.resolve().map_err(config_err)?;
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        Path::new("runs").join(stem)
    });
    let mut out = OutputDir::create(&dir)?;
    out.write_text("config.resolved.json", &cfg.to_json())?;
    let headline = experiments::run(&cfg, &mut out)?;
    let summary = json!({
        "experiment": cfg.experiment,
        "version": config::SCHEMA_VERSION,
        "results": headline,
        "files": out.files(),
    });
    out.write_json("summary.json", &summary)?;
    println!("{}", out.path().join("summary.json").display());
    Ok(())
}

fn read_ndjson(path: &Path) -> Result<Vec<Value>, RunError> {
    let f = std::fs::File::open(path)?;
    std::io::BufReader::new(f)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Summary statistics over the time series a run left behind.
fn diagnose_dir(dir: &Path) -> Result<(), RunError> {
    let cfg_path = dir.join("config.resolved.json");
    if !cfg_path.is_file() {
        return Err(RunError::Config(format!("{}: not a run directory (no config.resolved.json)", dir.display())));
    }
    let cfg = ExperimentConfig::load(&cfg_path).map_err(|e| RunError::Config(e.to_string()))?;
    let mut report = json!({"experiment": cfg.experiment});

    let density = dir.join("density.ndjson");
    if density.is_file() {
        let rows = read_ndjson(&density)?;
        let t: Vec<f64> = rows.iter().filter_map(|r| r["t"].as_f64()).collect();
        let e: Vec<f64> = rows.iter().map(|r| r["e_norm"].as_f64().unwrap_or(f64::NAN)).collect();
        let mut modes: Vec<Value> = Vec::new();
        if let Some(first) = rows.first().and_then(|r| r["rho"].as_array()) {
            for (j, m) in first.iter().enumerate() {
                let amp: Vec<f64> = rows
                    .iter()
                    .map(|r| {
                        let c = &r["rho"][j];
                        c["re"].as_f64().unwrap_or(0.0).hypot(c["im"].as_f64().unwrap_or(0.0))
                    })
                    .collect();
                let (i_max, peak) = amp
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                modes.push(json!({
                    "k": m["k"],
                    "peak_time": t.get(i_max),
                    "peak_amplitude": peak,
                    "final_amplitude": amp.last(),
                }));
            }
        }
        let e_finite: Vec<f64> = e.iter().copied().filter(|x| x.is_finite()).collect();
        report["density"] = json!({
            "samples": rows.len(),
            "t_final": t.last(),
            "e_norm_initial": e_finite.first(),
            "e_norm_final": e_finite.last(),
            "e_norm_max": e_finite.iter().copied().reduce(f64::max),
            "modes": modes,
        });
    }

    let diag = dir.join("diagnostics.ndjson");
    if diag.is_file() {
        let rows = read_ndjson(&diag)?;
        let drift = |key: &str| -> Option<f64> {
            let v: Vec<f64> = rows.iter().filter_map(|r| r[key].as_f64()).collect();
            let v0 = *v.first()?;
            let scale = if v0 != 0.0 { v0.abs() } else { 1.0 };
            v.iter().map(|x| (x - v0).abs() / scale).reduce(f64::max)
        };
        report["conservation"] = json!({
            "samples": rows.len(),
            "mass_drift": drift("mass"),
            "l2_drift": drift("l2"),
            "energy_drift": drift("energy"),
            "entropy_drift": drift("entropy"),
            "min_value": rows.iter().filter_map(|r| r["min_value"].as_f64()).reduce(f64::min),
        });
    }

    let mut out = OutputDir::create(dir)?;
    out.write_json("diagnose.json", &report)?;
    println!("{}", dir.join("diagnose.json").display());
    Ok(())
}
