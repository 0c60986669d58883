//! End-to-end runs: cluster → pseudo-label → train → transform → SVM → evaluate,
//! and the two no-transfer baselines.
//!
//! Each stage is a public function so that the CLI can run them one at a time
//! through files; [`run_pipeline`] calls the same functions in memory and
//! writes the same artifacts, so both routes give identical reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::clustering::{kmeans_fit, KMeansModel, KMeansParams};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, render_table, ApMode, EvalReport};
use crate::feature_store::{load_features, save_features, FeatureDataset, FileFormat};
use crate::pseudo_label::{assign_pseudo_labels, PseudoLabeling};
use crate::svm::{svm_train_ovr, OvrSvmModel, SvmParams};
use crate::transfer_net::{train, transform_dataset, SgdHyper, TrainHistory, TransferNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    #[default]
    None,
    /// Unit Euclidean norm per row.
    L2,
}

impl fmt::Display for Normalize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalize::None => "none",
            Normalize::L2 => "l2",
        })
    }
}

impl FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalize::None),
            "l2" => Ok(Normalize::L2),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Hr,
    Lr,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Hr => "hr",
            Baseline::Lr => "lr",
        })
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hr" => Ok(Baseline::Hr),
            "lr" => Ok(Baseline::Lr),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Everything a run depends on.
///
/// The cluster count `k` is also the width of the network's second layer, so
/// the config file keys `k` and `n2` set the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub hr_train: PathBuf,
    /// Only needed by the HR baseline.
    pub hr_test: Option<PathBuf>,
    pub lr_train: PathBuf,
    pub lr_test: PathBuf,
    pub out_dir: PathBuf,
    pub k: usize,
    pub n1: usize,
    pub sgd: SgdHyper,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub svm: SvmParams,
    pub ap_mode: ApMode,
    pub normalize: Normalize,
    pub seed: u64,
    pub class_names: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let kmeans = KMeansParams::new(100);
        PipelineConfig {
            hr_train: PathBuf::new(),
            hr_test: None,
            lr_train: PathBuf::new(),
            lr_test: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            k: 100,
            n1: 4096,
            sgd: SgdHyper::default(),
            kmeans_max_iter: kmeans.max_iter,
            kmeans_tol: kmeans.tol,
            svm: SvmParams::default(),
            ap_mode: ApMode::default(),
            normalize: Normalize::default(),
            seed: 0,
            class_names: None,
        }
    }
}

impl PipelineConfig {
    pub fn n2(&self) -> usize {
        self.k
    }

    /// Parses flat `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_kv_text(text)?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_text(&text)
    }

    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Format(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Sets one key; used for both config files and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "hr_train" => self.hr_train = value.into(),
            "hr_test" => self.hr_test = (!value.is_empty()).then(|| value.into()),
            "lr_train" => self.lr_train = value.into(),
            "lr_test" => self.lr_test = value.into(),
            "out_dir" => self.out_dir = value.into(),
            "k" | "n2" => self.k = num(key, value)?,
            "n1" => self.n1 = num(key, value)?,
            "lr0" => self.sgd.lr0 = num(key, value)?,
            "momentum" => self.sgd.momentum = num(key, value)?,
            "weight_decay" => self.sgd.weight_decay = num(key, value)?,
            "batch_size" => self.sgd.batch_size = num(key, value)?,
            "step_size" => self.sgd.step_size = num(key, value)?,
            "gamma" => self.sgd.gamma = num(key, value)?,
            "total_iters" => self.sgd.total_iters = num(key, value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = num(key, value)?,
            "kmeans_tol" => self.kmeans_tol = num(key, value)?,
            "svm_c" => self.svm.c = num(key, value)?,
            "svm_tol" => self.svm.tol = num(key, value)?,
            "svm_max_iter" => self.svm.max_iter = num(key, value)?,
            "ap_mode" => self.ap_mode = value.parse()?,
            "normalize" => self.normalize = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "class_names" => {
                self.class_names = (!value.is_empty())
                    .then(|| value.split(',').map(|s| s.trim().to_string()).collect())
            }
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// The resolved configuration as ordered key/value pairs; feeding them back
    /// through [`PipelineConfig::set`] reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let path = |p: &Path| p.display().to_string();
        let mut pairs = vec![
            ("hr_train", path(&self.hr_train)),
            ("hr_test", self.hr_test.as_deref().map(path).unwrap_or_default()),
            ("lr_train", path(&self.lr_train)),
            ("lr_test", path(&self.lr_test)),
            ("out_dir", path(&self.out_dir)),
            ("k", self.k.to_string()),
            ("n1", self.n1.to_string()),
            ("lr0", self.sgd.lr0.to_string()),
            ("momentum", self.sgd.momentum.to_string()),
            ("weight_decay", self.sgd.weight_decay.to_string()),
            ("batch_size", self.sgd.batch_size.to_string()),
            ("step_size", self.sgd.step_size.to_string()),
            ("gamma", self.sgd.gamma.to_string()),
            ("total_iters", self.sgd.total_iters.to_string()),
            ("kmeans_max_iter", self.kmeans_max_iter.to_string()),
            ("kmeans_tol", self.kmeans_tol.to_string()),
            ("svm_c", self.svm.c.to_string()),
            ("svm_tol", self.svm.tol.to_string()),
            ("svm_max_iter", self.svm.max_iter.to_string()),
            ("ap_mode", self.ap_mode.to_string()),
            ("normalize", self.normalize.to_string()),
            ("seed", self.seed.to_string()),
        ];
        if let Some(names) = &self.class_names {
            pairs.push(("class_names", names.join(",")));
        }
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_kv_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n1 == 0 {
            return Err(Error::InvalidArgument("k and n1 must be at least 1".into()));
        }
        self.sgd.validate()?;
        if !(self.svm.c > 0.0) {
            return Err(Error::InvalidArgument("svm_c must be > 0".into()));
        }
        Ok(())
    }

    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            k: self.k,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
            seed: self.seed,
        }
    }

    pub fn sgd_hyper(&self) -> SgdHyper {
        SgdHyper {
            seed: self.seed,
            ..self.sgd.clone()
        }
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            seed: self.seed,
            ..self.svm.clone()
        }
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts {
            dir: self.out_dir.clone(),
        }
    }
}

/// File names of everything a run writes under its output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn kmeans(&self) -> PathBuf {
        self.dir.join("kmeans.ukmc")
    }
    pub fn pseudo_labelled(&self) -> PathBuf {
        self.dir.join("lr_train.pseudo.udft")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("transfer.utnp")
    }
    pub fn history(&self) -> PathBuf {
        self.dir.join("train_history.csv")
    }
    pub fn train_transferred(&self) -> PathBuf {
        self.dir.join("lr_train.transferred.udft")
    }
    pub fn test_transferred(&self) -> PathBuf {
        self.dir.join("lr_test.transferred.udft")
    }
    pub fn svm(&self) -> PathBuf {
        self.dir.join("svm.usvm")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.txt")
    }
    pub fn report_table(&self) -> PathBuf {
        self.dir.join("report_table.txt")
    }
    pub fn baseline_svm(&self, which: Baseline) -> PathBuf {
        self.dir.join(format!("baseline_{which}.usvm"))
    }
    pub fn baseline_report(&self, which: Baseline) -> PathBuf {
        self.dir.join(format!("baseline_{which}_report.txt"))
    }
    pub fn baseline_table(&self, which: Baseline) -> PathBuf {
        self.dir.join(format!("baseline_{which}_report_table.txt"))
    }
    pub fn failure_marker(&self) -> PathBuf {
        self.dir.join("FAILED")
    }

    pub fn create_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }
}

/// Loads a raw feature file and applies the configured normalization.
pub fn load_input(path: &Path, normalize: Normalize) -> Result<FeatureDataset> {
    let ds = load_features(path, FileFormat::from_path(path))?;
    match normalize {
        Normalize::None => Ok(ds),
        Normalize::L2 => ds.l2_normalized(),
    }
}

pub fn save_binary(ds: &FeatureDataset, path: &Path) -> Result<()> {
    save_features(ds, path, FileFormat::Binary)
}

fn require_labels(ds: &FeatureDataset, what: &str) -> Result<()> {
    if ds.class_labels().is_none() {
        return Err(Error::Validation(format!("{what} carries no class labels")));
    }
    Ok(())
}

fn timed<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    log::info!("{stage}: done in {:.3}s", start.elapsed().as_secs_f64());
    Ok(out)
}

pub fn stage_cluster(config: &PipelineConfig, hr_train: &FeatureDataset) -> Result<KMeansModel> {
    timed("cluster", || {
        let model = kmeans_fit(hr_train.data(), &config.kmeans_params())?;
        log::info!(
            "cluster: k={}, {} iterations, objective {:.6e}",
            model.k(),
            model.iterations,
            model.objective
        );
        Ok(model)
    })
}

/// `lr_train` with its nearest-centroid pseudo-labels attached.
pub fn stage_pseudo_label(model: &KMeansModel, lr_train: &FeatureDataset) -> Result<FeatureDataset> {
    timed("pseudo-label", || {
        let labeling = assign_pseudo_labels(model, lr_train)?;
        if labeling.empty_classes() > 0 {
            log::warn!(
                "pseudo-label: {} of {} pseudo-classes received no LR sample",
                labeling.empty_classes(),
                labeling.k
            );
        }
        labeling.attach(lr_train)
    })
}

pub fn stage_train_transfer(
    config: &PipelineConfig,
    labelled: &FeatureDataset,
) -> Result<(TransferNet, TrainHistory)> {
    timed("train-transfer", || {
        let labeling = PseudoLabeling::from_dataset(labelled)
            .ok_or_else(|| Error::Validation("training features carry no pseudo-labels".into()))?;
        if labeling.k != config.n2() {
            return Err(Error::InvalidArgument(format!(
                "pseudo-labels use k = {} but the network has N2 = {}",
                labeling.k,
                config.n2()
            )));
        }
        let (net, history) = train(labelled, &labeling, config.n1, &config.sgd_hyper())?;
        if let (Some(first), Some(last)) = (history.losses.first(), history.final_loss()) {
            log::info!("train-transfer: loss {first:.6} -> {last:.6}");
        }
        Ok((net, history))
    })
}

pub fn stage_transform(net: &TransferNet, ds: &FeatureDataset) -> Result<FeatureDataset> {
    timed("transform", || transform_dataset(net, ds))
}

pub fn stage_train_svm(config: &PipelineConfig, train: &FeatureDataset) -> Result<OvrSvmModel> {
    timed("train-svm", || {
        require_labels(train, "SVM training set")?;
        svm_train_ovr(train.data(), train.class_labels().unwrap(), &config.svm_params())
    })
}

pub fn stage_evaluate(
    config: &PipelineConfig,
    models: &OvrSvmModel,
    test: &FeatureDataset,
) -> Result<EvalReport> {
    timed("evaluate", || {
        require_labels(test, "test set")?;
        let report = evaluate(
            models,
            test.data(),
            test.class_labels().unwrap(),
            config.ap_mode,
            config.class_names.as_deref(),
        )?
        .with_run_config(config.to_pairs());
        for (name, ap) in &report.per_class_ap {
            log::info!("evaluate: AP[{name}] = {:.4}", ap);
        }
        log::info!("evaluate: mAP = {:.4}", report.map);
        Ok(report)
    })
}

pub fn write_report(report: &EvalReport, row_label: &str, kv: &Path, table: &Path) -> Result<()> {
    fs::write(kv, report.to_key_value()).map_err(|e| Error::io(kv, e))?;
    fs::write(table, render_table(&[(row_label, report)])).map_err(|e| Error::io(table, e))
}

pub fn write_history(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut text = String::from("iter,loss,lr\n");
    for (i, (loss, lr)) in history.losses.iter().zip(&history.learning_rates).enumerate() {
        text.push_str(&format!("{i},{loss},{lr}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Every intermediate product of one in-memory pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub kmeans: KMeansModel,
    pub labelled: FeatureDataset,
    pub net: TransferNet,
    pub history: TrainHistory,
    pub train_transferred: FeatureDataset,
    pub test_transferred: FeatureDataset,
    pub svm: OvrSvmModel,
    pub report: EvalReport,
}

/// Clustering and pseudo-labelling only; depends on `k` but not on `n1`.
pub fn cluster_and_label(
    config: &PipelineConfig,
    hr_train: &FeatureDataset,
    lr_train: &FeatureDataset,
) -> Result<(KMeansModel, FeatureDataset)> {
    let kmeans = stage_cluster(config, hr_train)?;
    let labelled = stage_pseudo_label(&kmeans, lr_train)?;
    Ok((kmeans, labelled))
}

/// The stages after pseudo-labelling.
pub fn transfer_and_classify(
    config: &PipelineConfig,
    kmeans: KMeansModel,
    labelled: FeatureDataset,
    lr_test: &FeatureDataset,
) -> Result<PipelineRun> {
    let (net, history) = stage_train_transfer(config, &labelled)?;
    let train_transferred = stage_transform(&net, &labelled)?;
    let test_transferred = stage_transform(&net, lr_test)?;
    let svm = stage_train_svm(config, &train_transferred)?;
    let report = stage_evaluate(config, &svm, &test_transferred)?;
    Ok(PipelineRun {
        kmeans,
        labelled,
        net,
        history,
        train_transferred,
        test_transferred,
        svm,
        report,
    })
}

/// The full method on already-loaded (and normalized) features.
pub fn run_in_memory(
    config: &PipelineConfig,
    hr_train: &FeatureDataset,
    lr_train: &FeatureDataset,
    lr_test: &FeatureDataset,
) -> Result<PipelineRun> {
    config.validate()?;
    let (kmeans, labelled) = cluster_and_label(config, hr_train, lr_train)?;
    transfer_and_classify(config, kmeans, labelled, lr_test)
}

/// Runs the full method from the configured files and writes every artifact
/// under `config.out_dir`. On failure a `FAILED` marker names the stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    let artifacts = config.artifacts();
    artifacts.create_dir()?;
    let _ = fs::remove_file(artifacts.failure_marker());
    let result = run_pipeline_inner(config, &artifacts);
    if let Err(e) = &result {
        mark_failed(&artifacts, e);
    }
    result
}

fn run_pipeline_inner(config: &PipelineConfig, artifacts: &Artifacts) -> Result<EvalReport> {
    let (hr_train, lr_train, lr_test) = timed("load", || {
        Ok((
            load_input(&config.hr_train, config.normalize)?,
            load_input(&config.lr_train, config.normalize)?,
            load_input(&config.lr_test, config.normalize)?,
        ))
    })?;
    config.validate()?;
    let (kmeans, labelled) = cluster_and_label(config, &hr_train, &lr_train)?;
    kmeans.save(&artifacts.kmeans())?;
    save_binary(&labelled, &artifacts.pseudo_labelled())?;
    let run = transfer_and_classify(config, kmeans, labelled, &lr_test)?;
    run.net.save(&artifacts.checkpoint())?;
    write_history(&run.history, &artifacts.history())?;
    save_binary(&run.train_transferred, &artifacts.train_transferred())?;
    save_binary(&run.test_transferred, &artifacts.test_transferred())?;
    run.svm.save(&artifacts.svm())?;
    write_report(&run.report, "Ours", &artifacts.report(), &artifacts.report_table())?;
    Ok(run.report)
}

pub fn mark_failed(artifacts: &Artifacts, error: &Error) {
    let stage = match error {
        Error::Stage { stage, .. } => stage,
        _ => "setup",
    };
    let _ = fs::write(
        artifacts.failure_marker(),
        format!("stage={stage}\nerror={error}\n"),
    );
}

/// OVR SVMs straight on the raw features of one resolution, evaluated on the
/// matching test features.
pub fn baseline_in_memory(
    config: &PipelineConfig,
    which: Baseline,
    train: &FeatureDataset,
    test: &FeatureDataset,
) -> Result<(OvrSvmModel, EvalReport)> {
    let svm = stage_train_svm(config, train)?;
    let mut report = stage_evaluate(config, &svm, test)?;
    report.run_config.push(("baseline".into(), which.to_string()));
    Ok((svm, report))
}

pub fn run_baseline(config: &PipelineConfig, which: Baseline) -> Result<EvalReport> {
    let artifacts = config.artifacts();
    artifacts.create_dir()?;
    let result = (|| {
        let (train_path, test_path) = match which {
            Baseline::Hr => (
                config.hr_train.clone(),
                config.hr_test.clone().ok_or_else(|| {
                    Error::InvalidArgument("the HR baseline needs hr_test".into())
                })?,
            ),
            Baseline::Lr => (config.lr_train.clone(), config.lr_test.clone()),
        };
        let (train, test) = timed("load", || {
            Ok((
                load_input(&train_path, config.normalize)?,
                load_input(&test_path, config.normalize)?,
            ))
        })?;
        let (svm, report) = baseline_in_memory(config, which, &train, &test)?;
        svm.save(&artifacts.baseline_svm(which))?;
        let label = match which {
            Baseline::Hr => "Baseline-HR",
            Baseline::Lr => "Baseline-LR",
        };
        write_report(
            &report,
            label,
            &artifacts.baseline_report(which),
            &artifacts.baseline_table(which),
        )?;
        Ok(report)
    })();
    if let Err(e) = &result {
        mark_failed(&artifacts, e);
    }
    result
}
