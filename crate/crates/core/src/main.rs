//! Command-line front end: wires JSON configs to the library modules and
//! emits CSV/JSON artifacts with reproducibility headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use lrdwave::config::RunConfig;
use lrdwave::error::Error;
use lrdwave::filters::{Family, FilterBank};
use lrdwave::limit::{LimitCov, LimitSpec};
use lrdwave::mc;
use lrdwave::spectra::{memory_param, MemoryModel};
use lrdwave::synth::{sample_path, PathConfig};
use lrdwave::transform::coeffs_from_path;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "lrdwave",
    about = "Simulation and wavelet-domain scaling analysis of nonlinear long-memory processes",
    version
)]
struct Cli {
    /// Output directory for artifacts (falls back to $LRDWAVE_OUT, then '.')
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one (X, Y) path and write `index,x,y` CSV
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Self-convolved spectral density f^{(*q)} on the grid
    Spectrum {
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 1 << 16)]
        n_grid: usize,
    },
    /// Vanishing moments, smoothness constant and limit-transfer agreement
    FiltersCheck {
        #[arg(long, default_value = "db2")]
        family: String,
        #[arg(long, default_value_t = 8)]
        levels: u32,
        /// Load a bank from a plain-text filter file instead of a family
        #[arg(long, conflicts_with_all = ["family", "levels"])]
        file: Option<PathBuf>,
    },
    /// Wavelet coefficients of one synthesized path
    Coeffs {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo scaling experiment (long-range target 2(d(q0)+K))
    Scaling {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo scaling experiment in the short-range regime (target 2K)
    ShortRange {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact limit covariances on an (m, k) block
    LimitCov {
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 1)]
        q: u32,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, default_value = "db2")]
        family: String,
        #[arg(long, default_value_t = 2)]
        m_max: i32,
        #[arg(long, default_value_t = 3)]
        lag_max: i64,
    },
    /// Memory exponent from the wavelet log-variance regression
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        j1: Option<u32>,
        #[arg(long)]
        j2: Option<u32>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument => EXIT_USAGE,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("LRDWAVE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match run(cli.command, &out_dir) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            };
            ExitCode::from(code)
        }
    }
}

fn artifact(out_dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), Error> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    Ok((BufWriter::new(File::create(&path)?), path))
}

fn header(w: &mut impl Write, command: &str, resolved: &str) -> std::io::Result<()> {
    writeln!(w, "# lrdwave command={command} config={resolved}")
}

fn run(command: Command, out_dir: &Path) -> Result<String, Error> {
    match command {
        Command::Synth { config } => {
            let (cfg, provenance) = RunConfig::load(&config)?;
            let path_cfg = PathConfig {
                model: cfg.model()?,
                filter: cfg.filter()?,
                k: cfg.k,
                n: cfg.n,
                seed: cfg.seed,
                replicate: 0,
            };
            let (x, y) = sample_path(&path_cfg)?;
            let (mut w, path) = artifact(out_dir, "series.csv")?;
            header(&mut w, "synth", &cfg.resolved_json())?;
            writeln!(w, "index,x,y")?;
            for (i, (xv, yv)) in x.iter().zip(&y).enumerate() {
                writeln!(w, "{i},{xv},{yv}")?;
            }
            w.flush()?;
            let var_y = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            Ok(serde_json::json!({
                "command": "synth",
                "artifact": path,
                "n": cfg.n,
                "seed": cfg.seed,
                "y_second_moment": var_y,
                "defaults": provenance,
            })
            .to_string())
        }

        Command::Spectrum { d, q, n_grid } => {
            let model = MemoryModel::new(
                d,
                lrdwave::spectra::FStar::Const(
                    MemoryModel::farima(d)?.fstar_zero(),
                ),
                n_grid,
            )?;
            let grid = model.self_convolve(q)?;
            let (mut w, path) = artifact(out_dir, &format!("spectrum_q{q}.csv"))?;
            header(
                &mut w,
                "spectrum",
                &serde_json::json!({"d": d, "q": q, "n_grid": n_grid}).to_string(),
            )?;
            grid.to_csv(&mut w)?;
            w.flush()?;
            // stabilized weighted value near the origin
            let beta = grid.singular_exponent.unwrap_or(0.0);
            let step = grid.step();
            let half = grid.len() / 2;
            let lo = ((1e-3 / step).ceil() as usize).max(5);
            let hi = ((1e-2 / step).floor() as usize).max(lo + 1);
            let weighted: Vec<f64> = (lo..=hi)
                .map(|i| grid.values[half + i] * (step * i as f64).powf(beta))
                .collect();
            let mean = weighted.iter().sum::<f64>() / weighted.len() as f64;
            let spread = weighted
                .iter()
                .fold(0.0f64, |m, v| m.max((v - mean).abs()))
                / mean.abs().max(1e-300);
            Ok(serde_json::json!({
                "command": "spectrum",
                "artifact": path,
                "singular_exponent": beta,
                "weighted_level": mean,
                "relative_variation": spread,
            })
            .to_string())
        }

        Command::FiltersCheck {
            family,
            levels,
            file,
        } => {
            let bank = match &file {
                Some(path) => {
                    FilterBank::read_text(std::io::BufReader::new(File::open(path)?))?
                }
                None => FilterBank::builtin(Family::parse(&family)?, levels)?,
            };
            let c_hat = bank.check_uniform_smoothness();
            let (_, growth_ratio) = bank.smoothness_growth();
            let agreement = bank.limit_transfer_agreement();
            let (mut w, path) = artifact(out_dir, "transfer.csv")?;
            header(
                &mut w,
                "filters-check",
                &serde_json::json!({"family": family, "levels": levels, "file": file}).to_string(),
            )?;
            bank.transfer_csv(256, &mut w)?;
            w.flush()?;
            Ok(serde_json::json!({
                "command": "filters-check",
                "artifact": path,
                "m": bank.m,
                "alpha": bank.alpha,
                "c_hat": c_hat,
                "c_hat_growth_ratio": growth_ratio,
                "limit_agreement": agreement.map(|(sup, warn)| {
                    serde_json::json!({"sup_diff": sup, "convergence_warning": warn})
                }),
            })
            .to_string())
        }

        Command::Coeffs { config } => {
            let (cfg, _) = RunConfig::load(&config)?;
            let path_cfg = PathConfig {
                model: cfg.model()?,
                filter: cfg.filter()?,
                k: cfg.k,
                n: cfg.n,
                seed: cfg.seed,
                replicate: 0,
            };
            let bank = cfg.bank()?;
            let (_, y) = sample_path(&path_cfg)?;
            let matrix = coeffs_from_path(&bank, &y, cfg.j_range)?;
            let (mut w, path) = artifact(out_dir, "coeffs.csv")?;
            header(&mut w, "coeffs", &cfg.resolved_json())?;
            matrix.to_csv(&mut w)?;
            w.flush()?;
            let (mut jw, jpath) = artifact(out_dir, "coeffs_summary.json")?;
            let doc = serde_json::json!({
                "config": serde_json::from_str::<serde_json::Value>(&cfg.resolved_json())?,
                "levels": matrix.summaries(),
                "warnings": matrix.warnings,
            });
            writeln!(jw, "{doc}")?;
            jw.flush()?;
            Ok(serde_json::json!({
                "command": "coeffs",
                "artifacts": [path, jpath],
                "levels": matrix.levels.len(),
            })
            .to_string())
        }

        Command::Scaling { config } => scaling_command(&config, out_dir, false),
        Command::ShortRange { config } => scaling_command(&config, out_dir, true),

        Command::LimitCov {
            d,
            q,
            k,
            family,
            m_max,
            lag_max,
        } => {
            let bank = FilterBank::builtin(Family::parse(&family)?, 8)?;
            let spec = LimitSpec::new(q, d, k, &bank)?;
            let mut index = Vec::new();
            for m in 0..=m_max {
                for lag in 0..=lag_max {
                    index.push((m, lag));
                }
            }
            let block = LimitCov::compute(&spec, &index)?;
            let (mut w, path) = artifact(out_dir, "limit_cov.csv")?;
            header(
                &mut w,
                "limit-cov",
                &serde_json::json!({"d": d, "q": q, "K": k, "family": family}).to_string(),
            )?;
            block.to_csv(&mut w)?;
            w.flush()?;
            Ok(serde_json::json!({
                "command": "limit-cov",
                "artifact": path,
                "entries": index.len() * index.len(),
                "min_eigenvalue_ratio": block.min_eigenvalue_ratio(),
                "ss_exponent": lrdwave::limit::ss_exponent(q, d, k),
            })
            .to_string())
        }

        Command::Estimate { config, j1, j2 } => {
            let (cfg, _) = RunConfig::load(&config)?;
            let bank = cfg.bank()?;
            let mc_cfg = cfg.mc_config()?;
            let j1 = j1.unwrap_or(cfg.j_range.0);
            let j2 = j2.unwrap_or(cfg.j_range.1);
            let coeffs = mc::replicate_coefficients(&mc_cfg, &bank, (j1, j2))?;
            let est = mc::estimate_memory(&coeffs, j1, j2, cfg.seed)?;
            let (mut w, path) = artifact(out_dir, "estimate.json")?;
            let doc = serde_json::json!({
                "config": serde_json::from_str::<serde_json::Value>(&cfg.resolved_json())?,
                "estimate": est,
                "estimand": "d(q0) + K",
            });
            writeln!(w, "{doc}")?;
            w.flush()?;
            Ok(serde_json::json!({
                "command": "estimate",
                "artifact": path,
                "estimate": est.estimate,
                "ci": est.ci,
            })
            .to_string())
        }
    }
}

fn scaling_command(config: &Path, out_dir: &Path, short_range: bool) -> Result<String, Error> {
    let (cfg, _) = RunConfig::load(config)?;
    let bank = cfg.bank()?;
    let mc_cfg = cfg.mc_config()?;
    let report = if short_range {
        mc::short_range_experiment(&mc_cfg, &bank, cfg.j_range)?
    } else {
        mc::scaling_experiment(&mc_cfg, &bank, cfg.j_range)?
    };
    let name = if short_range { "short_range" } else { "scaling" };
    let (mut w, csv_path) = artifact(out_dir, &format!("{name}.csv"))?;
    header(&mut w, name, &cfg.resolved_json())?;
    report.to_csv(&mut w)?;
    w.flush()?;
    let (mut jw, json_path) = artifact(out_dir, &format!("{name}.json"))?;
    let doc = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&cfg.resolved_json())?,
        "report": report,
    });
    writeln!(jw, "{doc}")?;
    jw.flush()?;
    let q0 = cfg.filter()?.rank() as u32;
    Ok(serde_json::json!({
        "command": name,
        "artifacts": [csv_path, json_path],
        "slope": report.slope,
        "ci": report.ci,
        "target_slope": report.target_slope,
        "long_range": report.long_range,
        "d_q0": memory_param(cfg.d, q0),
    })
    .to_string())
}
