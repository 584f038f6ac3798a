//! `disent`: train disentangling VAEs, score them, and run sweeps on the
//! built-in synthetic ground-truth-factor dataset.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use disent::config::ExperimentConfig;
use disent::dataset::build_dataset;
use disent::metrics::{evaluate_all, evaluate_rep, RepresentationMatrix};
use disent::runner::{
    aggregate, emit_aggregate_csv, emit_csv, emit_report, load_records, rank_csv, run_sweep,
    GroupField, ResultRow,
};
use disent::training::{
    encode_dataset, init_run, save_checkpoint, stream_rng, train_steps, LossTrace, TrainedModel,
};
use disent::Result;

#[derive(Parser)]
#[command(
    name = "disent",
    version,
    about = "Disentangled representation learning toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Train a single model and score it.
    Train {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (trace, checkpoint, representation, scores).
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Score a representation CSV (columns z0..z{d-1}, f0..f{K-1}).
    Eval {
        #[arg(long)]
        rep: PathBuf,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Optional config supplying [metrics].
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the configured sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Aggregate a records file into a report with charts.
    Report {
        /// records.jsonl produced by `sweep`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a metric-table CSV and print the winner.
    Rank {
        /// CSV with a label column and factor_vae/sap/dci/irs/mig columns.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Render every factor configuration to PNG plus a factors.csv index.
    Dump {
        /// Experiment config (TOML) supplying [dataset].
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Data { command } => match command {
            DataCommand::Dump { spec, out } => {
                let cfg = ExperimentConfig::load(&spec)?;
                let dataset = build_dataset(cfg.dataset)?;
                let count = dataset.dump_pngs(&out)?;
                println!("wrote {count} images and factors.csv to {}", out.display());
                Ok(())
            }
        },
        Command::Train { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mut train_cfg = cfg.train_config()?;
            if let Some(seed) = seed {
                train_cfg.seed = seed;
            }
            let dataset = build_dataset(cfg.dataset.clone())?;
            std::fs::create_dir_all(&out)?;

            let run_id = format!(
                "{}_d{}_s{}_seed{}",
                train_cfg.regularizer.kind.as_str(),
                train_cfg.model.latent_dim,
                train_cfg.steps,
                train_cfg.seed
            );
            println!("training {run_id} ({} steps)", train_cfg.steps);
            let started = std::time::Instant::now();
            let mut state = init_run(&dataset, &train_cfg)?;
            let mut trace = LossTrace::default();
            train_steps(&mut state, &dataset, train_cfg.steps, &mut trace)?;
            println!("trained in {:.1}s", started.elapsed().as_secs_f64());

            trace.write_csv(&out.join("trace.csv"))?;
            save_checkpoint(&state, &run_id, &out.join("model.ckpt"))?;

            let model = TrainedModel::from_state(&state);
            let mut rep_rng = stream_rng(cfg.metrics.seed, train_cfg.seed);
            let rep = encode_dataset(&model, &dataset, cfg.metrics.mig_samples, &mut rep_rng)?;
            rep.write_csv(&out.join("rep.csv"))?;

            let mut eval_rng = stream_rng(cfg.metrics.seed, train_cfg.seed);
            let eval = evaluate_all(&model, &dataset, &cfg.metrics, &mut eval_rng)?;
            let scores_json = serde_json::json!({
                "run_id": run_id,
                "scores": eval.report,
                "dci_completeness": eval.dci_completeness,
                "dci_informativeness": eval.dci_informativeness,
                "final_recon": trace.records.last().map(|r| r.recon),
                "metrics_config": cfg.metrics,
            });
            std::fs::write(
                out.join("metrics.json"),
                serde_json::to_string_pretty(&scores_json)?,
            )?;
            println!(
                "scores: factor_vae={:.4} sap={:.4} dci={:.4} irs={:.4} mig={:.4}",
                eval.report.factor_vae,
                eval.report.sap,
                eval.report.dci,
                eval.report.irs,
                eval.report.mig
            );
            println!("artifacts in {}", out.display());
            Ok(())
        }
        Command::Eval { rep, out, config } => {
            let metrics = match config {
                Some(path) => ExperimentConfig::load(&path)?.metrics,
                None => Default::default(),
            };
            let rep = RepresentationMatrix::read_csv(&rep, None)?;
            let eval = evaluate_rep(&rep, &metrics)?;
            let json = serde_json::json!({
                "scores": eval.report,
                "dci_completeness": eval.dci_completeness,
                "dci_informativeness": eval.dci_informativeness,
                "num_samples": rep.num_samples(),
                "latent_dim": rep.latent_dim(),
                "metrics_config": metrics,
            });
            std::fs::write(&out, serde_json::to_string_pretty(&json)?)?;
            println!(
                "factor_vae={:.4} sap={:.4} dci={:.4} irs={:.4} mig={:.4} -> {}",
                eval.report.factor_vae,
                eval.report.sap,
                eval.report.dci,
                eval.report.irs,
                eval.report.mig,
                out.display()
            );
            Ok(())
        }
        Command::Sweep { config, workers } => {
            let cfg = ExperimentConfig::load(&config)?;
            let spec = cfg.sweep_spec()?;
            for warning in spec.warnings() {
                eprintln!("warning: {warning}");
            }
            let records = run_sweep(&spec, workers)?;
            let rows: Vec<ResultRow> = records.iter().filter_map(ResultRow::from_record).collect();
            emit_csv(&rows, &spec.out_dir.join("results.csv"))?;
            let aggregates = aggregate(
                &records,
                &[GroupField::Kind, GroupField::LatentDim, GroupField::Steps],
            );
            emit_aggregate_csv(&aggregates, &spec.out_dir.join("aggregates.csv"))?;
            emit_report(&aggregates, &spec.out_dir)?;
            let failures = records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} runs recorded ({} failed); results in {}",
                records.len(),
                failures,
                spec.out_dir.display()
            );
            Ok(())
        }
        Command::Report { input, out } => {
            let records = load_records(&input)?;
            let aggregates = aggregate(
                &records,
                &[GroupField::Kind, GroupField::LatentDim, GroupField::Steps],
            );
            emit_report(&aggregates, &out)?;
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::Rank { input } => {
            let ranked = rank_csv(&input)?;
            println!("rank | label | factor_vae | sap | dci | irs | mig | mean");
            for (i, row) in ranked.iter().enumerate() {
                let label = if i == 0 {
                    format!("**{}**", row.label)
                } else {
                    row.label.clone()
                };
                println!(
                    "{:>4} | {label} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4}",
                    i + 1,
                    row.scores[0],
                    row.scores[1],
                    row.scores[2],
                    row.scores[3],
                    row.scores[4],
                    row.mean
                );
            }
            println!("winner: {}", ranked[0].label);
            Ok(())
        }
    }
}
