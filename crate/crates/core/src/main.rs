use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use semcom::appo::Variant;
use semcom::config::SimConfig;
use semcom::corpus::{tokenize, Vocabulary};
use semcom::experiment::{
    compare, compare_csv, corpus_stats_csv, importance_csv, importance_rows, prepare, run_training,
    to_json, write_run_dir,
};
use semcom::mss::{mss, DEFAULT_PHI};
use semcom::scenario::corpus_for;
use semcom::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "semcom", version, about = "Semantic downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// key = value configuration file; defaults apply to missing keys
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set U=4 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> semcom::Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Appo,
    Apg,
}

#[derive(Subcommand)]
enum Command {
    /// Score a recovered text against its original
    Score {
        original: PathBuf,
        recovered: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PHI)]
        phi: f64,
    },
    /// Print the attention importance of one document's triples
    Importance {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        doc: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Train a policy and write a run directory
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Appo)]
        method: Method,
    },
    /// Compare all methods over the configured seed list
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the per-user, per-RB MSS table as CSV
    Table {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Text and graph sizes of every corpus document as CSV
    Stats {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> semcom::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Score {
            original,
            recovered,
            phi,
        } => {
            let (a, b) = (read_text(&original)?, read_text(&recovered)?);
            let mut vocab = Vocabulary::new();
            let orig = tokenize(&a, &mut vocab, false)?;
            let rec = if b.trim().is_empty() {
                Vec::new()
            } else {
                tokenize(&b, &mut vocab, false)?
            };
            println!("{}", to_json(&mss(&orig, &rec, phi)?)?);
        }
        Command::Importance {
            config,
            doc,
            format,
        } => {
            let rows = importance_rows(&config.load()?, &doc)?;
            match format {
                Format::Json => println!("{}", to_json(&rows)?),
                Format::Csv => print!("{}", importance_csv(&rows)),
            }
        }
        Command::Train {
            config,
            out,
            method,
        } => {
            let cfg = config.load()?;
            let variant = match method {
                Method::Appo => Variant::Appo,
                Method::Apg => Variant::Apg,
            };
            let run = run_training(&cfg, variant)?;
            write_run_dir(&out, &cfg, &run)?;
            if !run.summary.converged {
                eprintln!("warning: no convergence within {} rounds", cfg.max_outer);
            }
            println!("{}", to_json(&run.summary)?);
        }
        Command::Compare { config, out } => {
            let (rows, _) = compare(&config.load()?)?;
            emit(out.as_deref(), &compare_csv(&rows))?;
        }
        Command::Table { config, out } => {
            let prepared = prepare(&config.load()?)?;
            emit(out.as_deref(), &prepared.table.to_csv())?;
        }
        Command::Stats { config, out } => {
            let corpus = corpus_for(&config.load()?)?;
            emit(out.as_deref(), &corpus_stats_csv(&corpus))?;
        }
    }
    Ok(())
}

/// Bad input (config, arguments, missing or malformed files) is a usage error;
/// anything else failed at run time.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        Some(
            Error::Config(_)
            | Error::Input(_)
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::DuplicateId(_)
            | Error::EmptyDocument,
        ) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
