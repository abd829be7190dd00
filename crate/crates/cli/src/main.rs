use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lgin::data::FeatureMode;
use lgin::experiment::{self, ExperimentConfig};
use lgin::model::{CurvatureMode, Model, ModelConfig};
use lgin::{stats, wl, Error};

#[derive(Parser)]
#[command(name = "lgin", version, about = "Hyperboloid graph isomorphism network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 10-fold cross-validated training
    Train(RunArgs),
    /// {with, without parallel transport} x {fixed, variable curvature} grid
    Ablate(RunArgs),
    /// WL distinguishability vs. untrained embedding separation, as CSV
    WlCheck(WlArgs),
    /// Paired t-test on the test_acc columns of two folds.csv files
    Ttest(TtestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CurvatureArg {
    Fixed,
    Variable,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    NodeLabels,
    DegreeOnehot,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// JSON-lines dataset instead of a TU directory
    #[arg(long)]
    jsonl: Option<PathBuf>,
    #[arg(long, value_enum)]
    curvature: Option<CurvatureArg>,
    #[arg(long, value_enum)]
    features: Option<FeatureArg>,
    #[arg(long)]
    no_pt: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Run folds sequentially
    #[arg(long)]
    deterministic: bool,
    /// Run folds on separate threads
    #[arg(long, conflicts_with = "deterministic")]
    parallel: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if let Some(v) = &self.data_root {
            c.data_root = v.clone();
        }
        if let Some(v) = &self.jsonl {
            c.jsonl = Some(v.clone());
        }
        if let Some(v) = self.curvature {
            c.curvature_mode = match v {
                CurvatureArg::Fixed => CurvatureMode::Fixed,
                CurvatureArg::Variable => CurvatureMode::Variable,
            };
        }
        if let Some(v) = self.features {
            c.feature_mode = match v {
                FeatureArg::NodeLabels => FeatureMode::NodeLabels,
                FeatureArg::DegreeOnehot => FeatureMode::DegreeOnehot,
            };
        }
        if self.no_pt {
            c.use_parallel_transport = false;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.deterministic {
            c.deterministic = true;
        }
        if self.parallel {
            c.deterministic = false;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.folds {
            c.folds = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct WlArgs {
    /// Width of the constant node features
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TtestArgs {
    folds_a: PathBuf,
    folds_b: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Parse { .. } => "parse",
        Error::MissingFile(_) => "missing_file",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
        Error::Fold { .. } => "fold",
        Error::Checkpoint(_) => "checkpoint",
        Error::NanForward { .. } | Error::NanGradient { .. } | Error::NonFinite(_) => "numerical",
        Error::DimensionMismatch { .. } | Error::Shape { .. } => "dimension",
        _ => "geometry",
    }
}

fn wl_check(args: &WlArgs) -> Result<String, Error> {
    let model = Model::new(ModelConfig {
        layer_dims: vec![args.dim, 16, 32, 64],
        seed: args.seed,
        ..ModelConfig::default()
    })?;
    let mut out = String::from("pair,wl_distinguishes,separation\n");
    for p in wl::pair_suite(args.dim, args.seed) {
        let sep = wl::embedding_separation(&model, &p.first, &p.second)?;
        out.push_str(&format!("{},{},{:e}\n", p.name, wl::wl_distinguishes(&p.first, &p.second), sep));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a.resolve()?;
            let (dir, s) = experiment::run_and_record(&cfg)?;
            println!(
                "{}: test accuracy {:.2} ± {:.2} %, train {:.2} % ({:.0} s) -> {}",
                s.dataset,
                100.0 * s.mean_test_acc,
                100.0 * s.std_test_acc,
                100.0 * s.mean_train_acc,
                s.wall_time_s,
                dir.display()
            );
        }
        Command::Ablate(a) => {
            let cfg = a.resolve()?;
            let (dir, rows) = experiment::ablate_and_record(&cfg)?;
            for r in &rows {
                println!(
                    "{:?}/{:?}: {:.2} ± {:.2} %",
                    r.update_mode,
                    r.curvature_mode,
                    100.0 * r.summary.mean_test_acc,
                    100.0 * r.summary.std_test_acc
                );
            }
            println!("-> {}", dir.join("ablation.csv").display());
        }
        Command::WlCheck(a) => {
            let csv = wl_check(&a)?;
            match &a.out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Ttest(a) => {
            let x = experiment::read_fold_accuracies(&a.folds_a)?;
            let y = experiment::read_fold_accuracies(&a.folds_b)?;
            let r = stats::paired_t_test(&x, &y, a.alpha)?;
            println!("{}", serde_json::to_string(&r)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
