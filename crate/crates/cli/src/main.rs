//! `udft`: command-line driver for the feature-transfer pipeline.

mod logger;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use udft::clustering::KMeansModel;
use udft::evaluation::render_table;
use udft::feature_store::{split, FileFormat};
use udft::grid_search::{render_grid, run_grid, GridSpec};
use udft::pipeline::{
    self, load_input, save_binary, stage_cluster, stage_evaluate, stage_pseudo_label,
    stage_train_svm, stage_train_transfer, stage_transform, write_history, write_report,
    Artifacts, Baseline, PipelineConfig,
};
use udft::feature_store::generate_synthetic;
use udft::{FeatureDataset, OvrSvmModel, SyntheticConfig, TransferNet};

#[derive(Parser)]
#[command(name = "udft", version, about = "Unsupervised deep feature transfer for low-resolution classification")]
struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, env = "UDFT_THREADS", default_value_t = 0)]
    threads: usize,

    /// More log output (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a paired HR/LR synthetic dataset.
    Synth(SynthArgs),
    /// Cluster HR training features (k-means).
    Cluster(StageArgs),
    /// Label LR training features with their nearest HR centroid.
    PseudoLabel(StageArgs),
    /// Train the transfer network on pseudo-labelled LR features.
    TrainTransfer(StageArgs),
    /// Map LR train/test features through the trained network.
    Transform(StageArgs),
    /// Train one-vs-rest SVMs on transferred training features.
    TrainSvm(StageArgs),
    /// Score the SVMs on transferred test features.
    Evaluate(StageArgs),
    /// Run every stage in sequence.
    Pipeline(StageArgs),
    /// Train and evaluate SVMs on raw HR or LR features.
    Baseline(BaselineArgs),
    /// Sweep the network widths N1 × N2.
    GridSearch(GridArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    per_cluster: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    lr_rank: usize,
    #[arg(long, default_value_t = 2.0)]
    lr_noise: f64,
    /// Distance between cluster centres in within-cluster standard deviations.
    #[arg(long, default_value_t = SyntheticConfig::default().hr_separation)]
    separation: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write train/test splits holding this fraction for training.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, value_enum, default_value = "binary")]
    format: FormatArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Binary,
    Csv,
}

/// Settings shared by every pipeline command. Precedence: defaults, then
/// `--config`, then `--set`, then the dedicated flags.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    hr_train: Option<PathBuf>,
    #[arg(long)]
    hr_test: Option<PathBuf>,
    #[arg(long)]
    lr_train: Option<PathBuf>,
    #[arg(long)]
    lr_test: Option<PathBuf>,
    #[arg(long)]
    total_iters: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    ap_mode: Option<String>,
    #[arg(long)]
    normalize: Option<String>,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Cluster count; also the network's second-layer width.
    #[arg(long, visible_alias = "n2")]
    k: Option<usize>,
    /// First-layer width.
    #[arg(long)]
    n1: Option<usize>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_parser = ["hr", "lr"])]
    which: String,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated first-layer widths.
    #[arg(long, value_delimiter = ',', required = true)]
    n1: Vec<usize>,
    /// Comma-separated second-layer widths (= cluster counts).
    #[arg(long, value_delimiter = ',', required = true)]
    n2: Vec<usize>,
    /// Run the cells of each row concurrently.
    #[arg(long)]
    parallel: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        for item in &self.overrides {
            let Some((key, value)) = item.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {item:?}");
            };
            config.set(key.trim(), value.trim())?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let flags = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("out_dir", path(&self.out_dir)),
            ("hr_train", path(&self.hr_train)),
            ("hr_test", path(&self.hr_test)),
            ("lr_train", path(&self.lr_train)),
            ("lr_test", path(&self.lr_test)),
            ("total_iters", self.total_iters.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("lr0", self.lr0.map(|v| v.to_string())),
            ("svm_c", self.svm_c.map(|v| v.to_string())),
            ("ap_mode", self.ap_mode.clone()),
            ("normalize", self.normalize.clone()),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        Ok(config)
    }
}

impl StageArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = self.config.resolve()?;
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(n1) = self.n1 {
            config.n1 = n1;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Creates the output directory and starts logging into it.
fn prepare_out_dir(config: &PipelineConfig) -> Result<Artifacts> {
    let artifacts = config.artifacts();
    artifacts.create_dir()?;
    logger::attach_file(&artifacts.dir.join("udft.log"))
        .with_context(|| format!("opening log file in {}", artifacts.dir.display()))?;
    Ok(artifacts)
}

fn load_raw(path: &Path, config: &PipelineConfig, what: &str) -> Result<FeatureDataset> {
    if path.as_os_str().is_empty() {
        bail!("no {what} feature file configured");
    }
    load_input(path, config.normalize).with_context(|| format!("loading {what} features"))
}

fn load_artifact(path: &Path) -> Result<FeatureDataset> {
    udft::feature_store::load_features(path, FileFormat::Binary)
        .with_context(|| format!("loading {} (run the previous stage first)", path.display()))
}

fn synth(args: &SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        n_clusters: args.clusters,
        n_per_cluster: args.per_cluster,
        d: args.dim,
        hr_separation: args.separation,
        lr_noise_sigma: args.lr_noise,
        lr_rank: args.lr_rank,
        seed: args.seed,
    };
    let (hr, lr) = generate_synthetic(&config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (format, ext) = match args.format {
        FormatArg::Binary => (FileFormat::Binary, "udft"),
        FormatArg::Csv => (FileFormat::Csv, "csv"),
    };
    let mut outputs = vec![("hr", hr.clone()), ("lr", lr.clone())];
    if let Some(fraction) = args.train_fraction {
        let (hr_train, hr_test) = split(&hr, fraction, args.seed)?;
        let (lr_train, lr_test) = split(&lr, fraction, args.seed)?;
        outputs.extend([
            ("hr_train", hr_train),
            ("hr_test", hr_test),
            ("lr_train", lr_train),
            ("lr_test", lr_test),
        ]);
    }
    for (name, ds) in outputs {
        let path = args.out.join(format!("{name}.{ext}"));
        udft::feature_store::save_features(&ds, &path, format)?;
        log::info!("synth: wrote {} ({} × {})", path.display(), ds.n(), ds.d());
    }
    Ok(())
}

fn run_stage(command: &Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth(args),
        Command::Cluster(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let hr = load_raw(&config.hr_train, &config, "HR training")?;
            stage_cluster(&config, &hr)?.save(&out.kmeans())?;
            Ok(())
        }
        Command::PseudoLabel(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let model = KMeansModel::load(&out.kmeans()).context("loading k-means model")?;
            let lr = load_raw(&config.lr_train, &config, "LR training")?;
            save_binary(&stage_pseudo_label(&model, &lr)?, &out.pseudo_labelled())?;
            Ok(())
        }
        Command::TrainTransfer(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let labelled = load_artifact(&out.pseudo_labelled())?;
            let (net, history) = stage_train_transfer(&config, &labelled)?;
            net.save(&out.checkpoint())?;
            write_history(&history, &out.history())?;
            Ok(())
        }
        Command::Transform(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let net = TransferNet::load(&out.checkpoint()).context("loading checkpoint")?;
            let labelled = load_artifact(&out.pseudo_labelled())?;
            let test = load_raw(&config.lr_test, &config, "LR test")?;
            save_binary(&stage_transform(&net, &labelled)?, &out.train_transferred())?;
            save_binary(&stage_transform(&net, &test)?, &out.test_transferred())?;
            Ok(())
        }
        Command::TrainSvm(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let train = load_artifact(&out.train_transferred())?;
            stage_train_svm(&config, &train)?.save(&out.svm())?;
            Ok(())
        }
        Command::Evaluate(args) => {
            let config = args.resolve()?;
            let out = prepare_out_dir(&config)?;
            let svm = OvrSvmModel::load(&out.svm()).context("loading SVM models")?;
            let test = load_artifact(&out.test_transferred())?;
            let report = stage_evaluate(&config, &svm, &test)?;
            write_report(&report, "Ours", &out.report(), &out.report_table())?;
            print!("{}", render_table(&[("Ours", &report)]));
            Ok(())
        }
        Command::Pipeline(args) => {
            let config = args.resolve()?;
            prepare_out_dir(&config)?;
            let report = pipeline::run_pipeline(&config)?;
            print!("{}", render_table(&[("Ours", &report)]));
            Ok(())
        }
        Command::Baseline(args) => {
            let config = args.config.resolve()?;
            config.validate()?;
            prepare_out_dir(&config)?;
            let which: Baseline = args.which.parse()?;
            let report = pipeline::run_baseline(&config, which)?;
            let label = match which {
                Baseline::Hr => "Baseline-HR",
                Baseline::Lr => "Baseline-LR",
            };
            print!("{}", render_table(&[(label, &report)]));
            Ok(())
        }
        Command::GridSearch(args) => {
            let config = args.config.resolve()?;
            let out = prepare_out_dir(&config)?;
            let hr = load_raw(&config.hr_train, &config, "HR training")?;
            let lr_train = load_raw(&config.lr_train, &config, "LR training")?;
            let lr_test = load_raw(&config.lr_test, &config, "LR test")?;
            let spec = GridSpec {
                n1_values: args.n1.clone(),
                n2_values: args.n2.clone(),
                seed: config.seed,
                base_config: config,
                parallel: args.parallel,
            };
            let result = run_grid(&spec, &hr, &lr_train, &lr_test)?;
            let table = render_grid(&result);
            let lines_path = out.dir.join("grid.txt");
            let table_path = out.dir.join("grid_table.txt");
            fs::write(&lines_path, result.to_lines())
                .with_context(|| format!("writing {}", lines_path.display()))?;
            fs::write(&table_path, &table)
                .with_context(|| format!("writing {}", table_path.display()))?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logger::init(cli.verbose, cli.quiet);
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run_stage(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            if !logger::enabled(log::Level::Error) {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
