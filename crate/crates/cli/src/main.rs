use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chordgen_cli::evaluate::{evaluate_cmd, read_evaluation, EvaluateArgs};
use chordgen_cli::generate_cmd::{generate_cmd, ChordSource, GenerateArgs};
use chordgen_cli::prepare::{prepare, PrepareArgs};
use chordgen_cli::report::{render_csv, render_markdown, render_text};
use chordgen_cli::train_cmd::{train_cmd, TrainArgs};
use chordgen_cli::{CliError, Config};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chordgen", version, about = "Chord-conditioned melody and bass generation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a kern corpus into train/test token datasets.
    Prepare {
        kern_dir: PathBuf,
        out_dir: PathBuf,
        /// Comma-separated set names held out for testing.
        #[arg(long, value_delimiter = ',')]
        test_sets: Option<Vec<String>>,
    },
    /// Train one strategy on a prepared dataset.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        d_model: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long)]
        target_loss: Option<f64>,
        /// Continue from a checkpoint with optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample bass and melody lines for chord progressions.
    Generate {
        checkpoint: PathBuf,
        /// Text file with one Harte progression per line.
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        chords: Option<PathBuf>,
        /// Prepared dataset whose progressions are reused.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        top_p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute metrics and significance flags against ground truth.
    Evaluate {
        ground_truth: PathBuf,
        /// Output directories of `generate`, one per strategy.
        #[arg(required = true)]
        generated: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        entropy_base: Option<f64>,
    },
    /// Print a stored evaluation table.
    Report {
        evaluation: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Markdown,
    Csv,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = Config::load_or_default(cli.config.as_deref()).context("loading configuration")?;
    match cli.command {
        Command::Prepare { kern_dir, out_dir, test_sets } => {
            set(&mut cfg.prepare.test_sets, test_sets);
            let m = prepare(&PrepareArgs { kern_dir, out_dir, test_sets: cfg.prepare.test_sets })?;
            println!(
                "prepared {} train and {} test phrases ({} skipped)",
                m.train_phrases,
                m.test_phrases,
                m.failures.len()
            );
        }
        Command::Train {
            dataset,
            strategy,
            out,
            epochs,
            d_model,
            seed,
            max_steps,
            lr,
            warmup,
            target_loss,
            resume,
        } => {
            set(&mut cfg.train.epochs, epochs);
            set(&mut cfg.model.d_model, d_model);
            set(&mut cfg.train.seed, seed);
            set(&mut cfg.train.base_lr, lr);
            set(&mut cfg.train.warmup, warmup);
            if max_steps.is_some() {
                cfg.train.max_steps = max_steps;
            }
            if target_loss.is_some() {
                cfg.train.target_loss = target_loss;
            }
            let s = train_cmd(&TrainArgs { dataset, strategy, out_dir: out, config: cfg, resume })?;
            println!(
                "{}: steps {}..{}, loss {:.4} -> {:.4}, {} parameters, saved {}",
                s.strategy,
                s.first_step,
                s.total_steps,
                s.initial_loss,
                s.final_loss,
                s.parameters,
                s.checkpoint.display()
            );
        }
        Command::Generate { checkpoint, chords, dataset, out, top_p, seed } => {
            set(&mut cfg.generate.top_p, top_p);
            set(&mut cfg.generate.seed, seed);
            let source = match (chords, dataset) {
                (Some(c), _) => ChordSource::File(c),
                (None, Some(d)) => ChordSource::Dataset(d),
                (None, None) => return Err(CliError::InvalidConfig("give --chords or --dataset".into()).into()),
            };
            let run = generate_cmd(&GenerateArgs { checkpoint, source, out_dir: out.clone(), config: cfg.generate })?;
            println!("{}: generated {} phrases into {}", run.strategy, run.count, out.display());
        }
        Command::Evaluate { ground_truth, generated, out, alpha, entropy_base } => {
            set(&mut cfg.evaluate.alpha, alpha);
            set(&mut cfg.evaluate.entropy_base, entropy_base);
            let eval = evaluate_cmd(&EvaluateArgs { ground_truth, generated, out_dir: out, config: cfg.evaluate })?;
            print!("{}", render_text(&eval.table));
        }
        Command::Report { evaluation, format } => {
            let eval = read_evaluation(&evaluation)?;
            let text = match format {
                Format::Text => render_text(&eval.table),
                Format::Markdown => render_markdown(&eval.table),
                Format::Csv => render_csv(&eval.table),
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
