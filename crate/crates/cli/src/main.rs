use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use trustnet_core::harness::{
    load_config, rows_to_csv, run_defense_experiment, run_latency_experiment, ExperimentConfig, Network, ResultRow,
};
use trustnet_core::ledger::verify_jsonl;

#[derive(Parser)]
#[command(name = "trustnet", version, about = "Consensus-coordinated power allocation simulator")]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Round latency per protocol across the reliability sweep.
    SimulateConsensus {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Average defense of each allocation strategy.
    DefendFbs {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// End-to-end rounds; prints each committed block as JSON.
    Pipeline {
        #[arg(long, default_value_t = 1)]
        rounds: u64,
        /// Writes the resulting chain as JSON lines.
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Writes the last round's scenario as JSON.
        #[arg(long)]
        scenario_out: Option<PathBuf>,
    },
    /// Checks a JSON-lines chain file.
    VerifyChain { file: PathBuf },
}

fn config(cli: &Cli, trials: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    let text = rows_to_csv(rows)?;
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pipeline(cfg: ExperimentConfig, rounds: u64, chain: Option<&Path>, scenario_out: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let mut net = Network::new(cfg)?;
    let mut rows = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for _ in 0..rounds {
        let r = net.run_round()?;
        for f in &r.failures {
            eprintln!("responder {} failed, used uniform fallback: {}", f.node, f.reason);
        }
        writeln!(stdout, "{}", r.block.to_json_line())?;
        let round = r.outcome.round.to_string();
        for (metric, v) in [
            ("defense", r.defense),
            ("latency_s", r.outcome.latency_s),
            ("message_count", r.outcome.message_count as f64),
            ("views", r.outcome.views as f64),
            ("winner", r.outcome.winner.proposer.0 as f64),
        ] {
            rows.push(ResultRow::from_samples("pipeline", &round, metric, &[v]));
        }
        if let Some(path) = scenario_out {
            std::fs::write(path, r.scenario.to_json())?;
        }
    }
    if let Some(path) = chain {
        net.replicas()[0].write_jsonl(path)?;
    }
    if let Some(path) = out {
        emit(&rows, Some(path))?;
    }
    Ok(())
}

fn verify(file: &Path, out: Option<&Path>) -> Result<bool> {
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let (ok, blocks) = match verify_jsonl(&bytes) {
        Ok(n) => {
            println!("chain ok: {n} blocks");
            (true, n)
        }
        Err(f) => {
            println!("chain invalid at block {}: {}", f.index, f.reason);
            (false, 0)
        }
    };
    if let Some(path) = out {
        let mut row = ResultRow::from_samples("verify-chain", &file.display().to_string(), "valid", &[f64::from(u8::from(ok))]);
        row.trials = blocks;
        emit(&[row], Some(path))?;
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::SimulateConsensus { trials } => emit(&run_latency_experiment(&config(cli, *trials)?)?, out)?,
        Command::DefendFbs { trials } => emit(&run_defense_experiment(&config(cli, *trials)?)?, out)?,
        Command::Pipeline {
            rounds,
            chain,
            scenario_out,
        } => pipeline(config(cli, None)?, *rounds, chain.as_deref(), scenario_out.as_deref(), out)?,
        Command::VerifyChain { file } => return verify(file, out),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
