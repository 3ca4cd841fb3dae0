use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multiamc::archs::Model;
use multiamc::dataset::{save_dataset, split, Dataset};
use multiamc::harness::{
    evaluate, export_curves, gradient_suite, load_or_generate, pooled_reports, run_experiment, train, Config,
    EvalReport, HarnessError, SUITE_TOLERANCE,
};

#[derive(Parser)]
#[command(name = "multiamc", version, about = "Multi-antenna modulation recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file; built-in desk defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the configured dataset and write it to a file.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the training half and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Dataset file to use instead of the configured one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test half.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train and test every configured curve and write them as CSV.
    ExportCurves {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the finite-difference gradient suite.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<Config, HarnessError> {
    let mut config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn halves(config: &Config, dataset: Option<&Path>) -> Result<(Dataset, Dataset), HarnessError> {
    let mut config = config.clone();
    if let Some(p) = dataset {
        config.dataset_path = Some(p.to_path_buf());
    }
    let data = load_or_generate(&config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    Ok(split(&data, config.manifest.split_ratio, &mut rng)?)
}

fn print_report(r: &EvalReport) {
    println!("{} N_r={} accuracy {:.4}", r.label, r.n_antennas, r.accuracy());
    for s in &r.by_snr {
        println!("  snr {:>6.1} dB  {:.4}  ({}/{})", s.snr_db, s.accuracy(), s.correct, s.total);
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Generate { common, out } => {
            let mut config = load_config(&common)?;
            config.dataset_path = None;
            let data = load_or_generate(&config)?;
            save_dataset(&data, &out)?;
            println!("wrote {} examples to {}", data.len(), out.display());
        }
        Command::Train { common, out, dataset } => {
            let config = load_config(&common)?;
            let (train_set, _) = halves(&config, dataset.as_deref())?;
            let train_set = train_set.select_antennas(config.train.n_antennas)?;
            let outcome = train(&config.train, &train_set, |e| {
                let val = e.val_accuracy.map_or("-".into(), |a| format!("{a:.4}"));
                eprintln!("epoch {} loss {:.4} val {}", e.epoch, e.train_loss, val);
            })?;
            outcome.model.save(&out)?;
            println!("best epoch {}; wrote {}", outcome.best_epoch, out.display());
        }
        Command::Eval { common, model, dataset } => {
            let config = load_config(&common)?;
            let model = Model::<f32>::load(&model)?;
            let (_, test_set) = halves(&config, dataset.as_deref())?;
            let test_set = test_set.select_antennas(model.config().n_antennas)?;
            print_report(&evaluate(&model, &test_set, config.train.batch_size)?);
        }
        Command::ExportCurves { common, out } => {
            let config = load_config(&common)?;
            let runs = run_experiment(&config, |line| eprintln!("{line}"))?;
            let pooled = pooled_reports(&runs)?;
            pooled.iter().for_each(print_report);
            export_curves(&pooled, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Gradcheck { common } => {
            let config = load_config(&common)?;
            let entries = gradient_suite(config.train.seed)?;
            let mut failed = Vec::new();
            for e in &entries {
                let ok = e.passes(SUITE_TOLERANCE);
                println!(
                    "{:<4} {:<36} max rel err {:.3e}  checked {}  skipped {}",
                    if ok { "ok" } else { "FAIL" },
                    e.name,
                    e.max_rel_error,
                    e.checked,
                    e.skipped
                );
                if !ok {
                    failed.push(e.name.clone());
                }
            }
            if !failed.is_empty() {
                return Err(HarnessError::GradCheck(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
