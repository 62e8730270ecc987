//! `densecode`: sweeps, Monte Carlo runs and QKD experiments.
//!
//! Every subcommand computes its full result before touching the output
//! path, then writes through a temporary file and a rename.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use densecode::qkd::{csv_row, simulate_qkd, QkdReport};
use densecode::sim::{run_simulation, DecodingStrategy};
use densecode::sweep::{format_float, sweep_me, sweep_multistage, sweep_sep, DEFAULT_MARGIN};
use densecode::SchmidtState;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "densecode", version, about = "Dense coding with non-maximally entangled qudits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum-error mutual information over the Schmidt simplex.
    SweepMe(Common),
    /// Separation success probability and information against ξ.
    SweepSep(Common),
    /// Single- and two-stage max-confidence decoding over the simplex.
    SweepMultistage(Common),
    /// Seeded simulation of the full protocol circuit.
    Montecarlo(Common),
    /// Intercept-resend key distribution over the symmetric states.
    Qkd(Common),
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON experiment configuration; flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Lattice points per simplex axis.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, value_name = "N")]
    xi_steps: Option<usize>,
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    #[arg(long, value_name = "N", env = "DENSECODE_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! flag {
            ($($f:ident),*) => { $( if self.$f.is_some() { cfg.$f = self.$f.clone(); } )* };
        }
        flag!(out, seed, grid, xi_steps, trials, threads);
        Ok(cfg)
    }
}

struct Output {
    csv: String,
    json: Option<serde_json::Value>,
    summary: String,
}

fn sweep_dims(cfg: &ExperimentConfig) -> (usize, usize) {
    cfg.dims((3, 4))
}

fn run(command: &Command, cfg: &ExperimentConfig) -> Result<Output> {
    let margin = cfg.margin.unwrap_or(DEFAULT_MARGIN);
    match command {
        Command::SweepMe(_) => {
            let (d1, d2) = sweep_dims(cfg);
            let t = sweep_me(d1, d2, cfg.grid()?, margin)?;
            Ok(Output {
                summary: format!("{} grid points", t.rows.len()),
                csv: t.to_csv(),
                json: None,
            })
        }
        Command::SweepSep(_) => {
            let steps = cfg.xi_steps.unwrap_or(100);
            let t = sweep_sep(&cfg.state()?, steps)?;
            Ok(Output {
                summary: format!("{} values of xi", t.rows.len()),
                csv: t.to_csv(),
                json: None,
            })
        }
        Command::SweepMultistage(_) => {
            let (d1, d2) = sweep_dims(cfg);
            let t = sweep_multistage(d1, d2, cfg.grid()?, margin)?;
            Ok(Output {
                summary: format!("{} grid points", t.rows.len()),
                csv: t.to_csv(),
                json: None,
            })
        }
        Command::Montecarlo(_) => montecarlo(cfg),
        Command::Qkd(_) => qkd(cfg),
    }
}

fn montecarlo(cfg: &ExperimentConfig) -> Result<Output> {
    let state = cfg.state()?;
    let strategy = cfg.strategy.clone().unwrap_or(DecodingStrategy::Me);
    let report = run_simulation(&state, &strategy, cfg.trials()?, cfg.seed.unwrap_or(0))?;
    let mut csv = String::from("cell,count,empirical,analytic,three_sigma\n");
    for (key, count, emp, p, s3) in report.cell_rows() {
        csv.push_str(&format!(
            "\"{key}\",{count},{},{},{}\n",
            format_float(emp),
            format_float(p),
            format_float(s3)
        ));
    }
    Ok(Output {
        summary: format!(
            "{}: empirical {} bits, analytic {} bits",
            strategy.describe(),
            format_float(report.empirical_mutual_info_bits),
            format_float(report.analytic_mutual_info_bits)
        ),
        csv,
        json: Some(report.to_json()),
    })
}

fn qkd(cfg: &ExperimentConfig) -> Result<Output> {
    let state: SchmidtState = cfg.state()?;
    let (n, seed) = (cfg.trials()?, cfg.seed.unwrap_or(0));
    let reports = cfg
        .eves()
        .iter()
        .map(|eve| simulate_qkd(state.coeffs(), eve, n, seed).map_err(anyhow::Error::from))
        .collect::<Result<Vec<QkdReport>>>()?;
    let mut csv = String::from(QkdReport::CSV_HEADER);
    csv.push('\n');
    for r in &reports {
        csv.push_str(&csv_row(r, format_float));
        csv.push('\n');
    }
    Ok(Output {
        summary: format!("{} eavesdropping strategies", reports.len()),
        csv,
        json: Some(serde_json::to_value(&reports)?),
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))
}

fn emit(out: &Output, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(json) = &out.json {
                write_atomic(&p.with_extension("json"), &serde_json::to_string_pretty(json)?)?;
            }
            write_atomic(p, &out.csv)?;
            eprintln!("{} -> {}", out.summary, p.display());
        }
        None => {
            std::io::stdout().lock().write_all(out.csv.as_bytes())?;
            eprintln!("{}", out.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::SweepMe(c)
        | Command::SweepSep(c)
        | Command::SweepMultistage(c)
        | Command::Montecarlo(c)
        | Command::Qkd(c) => c,
    };
    let result = common.resolve().and_then(|cfg| {
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")?;
        }
        let out = run(&cli.command, &cfg)?;
        emit(&out, cfg.out.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
