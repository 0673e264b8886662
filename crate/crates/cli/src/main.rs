use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use frontier_cli::commands::{self, Outcome};
use frontier_cli::config::Config;
use frontier_cli::error::{CliError, Result};
use frontier_cli::record::{Command, RunRecord, RunStore};
use frontier_core::exponents::Mode;

#[derive(Parser)]
#[command(name = "frontier", version, about = "Planar Brownian frontier experiments")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; records go to OUT/runs/.
    #[arg(long, global = true, default_value = "frontier-runs")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Re-run a stored record and check the results are identical.
    #[arg(long)]
    replay: Option<String>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Sub {
    /// Table of the disconnection exponents xi(k).
    Xi,
    /// Estimate xi(k) from disconnection probabilities.
    Disconnect {
        #[arg(long)]
        k: Option<u32>,
        /// plain, mixed:L or conditioned
        #[arg(long)]
        mode: Option<Mode>,
        /// Range of n, e.g. 1..4
        #[arg(long, value_parser = parse_range)]
        n_sweep: Option<(u32, u32)>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Good-square census over independent paths.
    Census {
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Fit range, e.g. 6..9
        #[arg(long, value_parser = parse_range)]
        levels: Option<(u32, u32)>,
    },
    /// Frontier of one walk and its box-counting dimension.
    Frontier {
        #[arg(long)]
        steps: Option<u64>,
    },
}

fn parse_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

fn configure(cli: &Cli) -> Result<(Command, Config)> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let command = match &cli.command {
        None => return Err(CliError::Config("a subcommand or --replay is required".into())),
        Some(Sub::Xi) => Command::Xi,
        Some(Sub::Disconnect { k, mode, n_sweep, trials }) => {
            let d = &mut cfg.disconnect;
            if let Some(k) = k {
                d.k = *k;
            }
            if let Some(m) = mode {
                d.mode = *m;
            }
            if let Some((a, b)) = n_sweep {
                (d.n_from, d.n_to) = (*a, *b);
            }
            if let Some(t) = trials {
                d.trials = *t;
            }
            Command::Disconnect
        }
        Some(Sub::Census { paths, delta, levels }) => {
            let c = &mut cfg.census;
            if let Some(p) = paths {
                c.paths = *p;
            }
            if let Some(d) = delta {
                c.delta = *d;
            }
            if let Some(l) = levels {
                c.levels = *l;
            }
            Command::Census
        }
        Some(Sub::Frontier { steps }) => {
            if let Some(s) = steps {
                cfg.frontier.steps = *s;
            }
            Command::Frontier
        }
    };
    Ok((command, cfg))
}

fn emit(format: Format, record: &RunRecord, out: &Outcome) -> Result<()> {
    match format {
        Format::Text => {
            print!("{}", out.summary);
            println!("run {}", record.run_id);
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(record)?),
        Format::Csv => print!("{}", String::from_utf8_lossy(&out.csv)),
    }
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let store = RunStore::new(&cli.out);
    if let Some(id) = &cli.replay {
        let record = store.load(id)?;
        commands::replay(&record)?;
        println!("replay of {id}: identical");
        return Ok(());
    }
    let (command, cfg) = configure(&cli)?;
    let (record, out) = commands::run(command, &cfg)?;
    store.save(&record)?;
    store.save_extra(&record.run_id, "csv", &out.csv)?;
    if let Some(svg) = &out.svg {
        store.save_extra(&record.run_id, "svg", svg.as_bytes())?;
    }
    emit(cli.format, &record, &out)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
