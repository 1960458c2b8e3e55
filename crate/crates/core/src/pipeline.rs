//! Run configuration and the subcommand implementations behind the CLI.
//!
//! A run is driven by one TOML file. Every omitted key takes its default,
//! relative paths are resolved against the config file's directory, and the
//! resolved configuration is echoed into every artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifiers::{
    stacking::train_stacking_with, ClassifierKind, ClassifierSpec, ForestParams, Hyperparams,
    LogisticParams, MlpParams, NaiveBayesParams, StackingMode, StackingModel, TrainedModel,
    TreeParams,
};
use crate::encoding::tables::{self, PropertyTable};
use crate::encoding::{
    Encoder, EncoderConfigs, EncoderKind, FeatureMatrix, FourierConfig, PseAacConfig, SparseConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    accuracy_f1, confusion, evaluate_features, mcc, BalanceMode, CvConfig, EvaluationReport,
    ExperimentSetup, ModelChoice, REPORT_SCHEMA,
};
use crate::gan::{balance_dataset, GanConfig, PUBLISHED_LEARNING_RATE};
use crate::par::Exec;
use crate::rng;
use crate::sequence_io::{load_dataset, Dataset, DatasetRegistry};

pub const TOOLKIT: &str = "ampgan";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseAacSettings {
    pub lambda: usize,
    pub weight: f64,
    /// Bundled table names or paths to table files.
    pub properties: Vec<String>,
}

impl Default for PseAacSettings {
    fn default() -> Self {
        PseAacSettings {
            lambda: 5,
            weight: 0.05,
            properties: tables::default_pseaac_tables()
                .into_iter()
                .map(|t| t.id)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyschemSettings {
    pub tables: Vec<String>,
}

impl Default for PhyschemSettings {
    fn default() -> Self {
        PhyschemSettings {
            tables: tables::default_physchem_tables()
                .into_iter()
                .map(|t| t.id)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierSettings {
    pub table: String,
    pub n_fft: usize,
    pub normalize_by_length: bool,
}

impl Default for FourierSettings {
    fn default() -> Self {
        let d = FourierConfig::default();
        FourierSettings {
            table: d.table.id,
            n_fft: d.n_fft,
            normalize_by_length: d.normalize_by_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub enabled: Vec<EncoderKind>,
    pub sparse: SparseConfig,
    pub pseaac: PseAacSettings,
    pub physchem: PhyschemSettings,
    pub fourier: FourierSettings,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            enabled: EncoderKind::ALL.to_vec(),
            sparse: SparseConfig::default(),
            pseaac: PseAacSettings::default(),
            physchem: PhyschemSettings::default(),
            fourier: FourierSettings::default(),
        }
    }
}

/// A bundled table name, or a path to a table file.
pub fn resolve_table(reference: &str) -> Result<PropertyTable> {
    if let Some(t) = tables::bundled::by_name(reference) {
        return Ok(t);
    }
    let path = Path::new(reference);
    if path.exists() {
        return PropertyTable::from_file(path);
    }
    Err(Error::Config(format!(
        "unknown property table '{reference}' (bundled: {})",
        tables::bundled::NAMES.join(", ")
    )))
}

impl EncoderSettings {
    pub fn to_configs(&self) -> Result<EncoderConfigs> {
        let load = |refs: &[String]| refs.iter().map(|r| resolve_table(r)).collect::<Result<Vec<_>>>();
        Ok(EncoderConfigs {
            sparse: self.sparse.clone(),
            pseaac: PseAacConfig {
                lambda: self.pseaac.lambda,
                weight: self.pseaac.weight,
                properties: load(&self.pseaac.properties)?,
            },
            physchem: load(&self.physchem.tables)?,
            fourier: FourierConfig {
                table: resolve_table(&self.fourier.table)?,
                n_fft: self.fourier.n_fft,
                normalize_by_length: self.fourier.normalize_by_length,
            },
        })
    }

    pub fn build(&self) -> Result<Encoder> {
        Encoder::new(self.to_configs()?, &self.enabled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub base: Vec<ClassifierKind>,
    pub ensemble: bool,
    pub stacking_mode: StackingMode,
    pub logistic: LogisticParams,
    pub forest: ForestParams,
    pub gaussian_nb: NaiveBayesParams,
    pub tree: TreeParams,
    pub mlp: MlpParams,
    /// Meta-classifier of the ensemble.
    pub meta: LogisticParams,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            base: ClassifierKind::ALL.to_vec(),
            ensemble: true,
            stacking_mode: StackingMode::Paper,
            logistic: LogisticParams::default(),
            forest: ForestParams::default(),
            gaussian_nb: NaiveBayesParams::default(),
            tree: TreeParams::default(),
            mlp: MlpParams::default(),
            meta: LogisticParams::default(),
        }
    }
}

impl ClassifierSettings {
    /// Spec for `kind`, seeded from the global seed.
    pub fn spec(&self, kind: ClassifierKind, seed: u64) -> ClassifierSpec {
        let params = match kind {
            ClassifierKind::Logistic => Hyperparams::Logistic(self.logistic.clone()),
            ClassifierKind::Forest => Hyperparams::Forest(self.forest.clone()),
            ClassifierKind::GaussianNb => Hyperparams::GaussianNb(self.gaussian_nb.clone()),
            ClassifierKind::Tree => Hyperparams::Tree(self.tree.clone()),
            ClassifierKind::Mlp => Hyperparams::Mlp(self.mlp.clone()),
        };
        ClassifierSpec {
            params,
            seed: rng::derive_tag(seed, kind.name()),
        }
    }

    pub fn meta_spec(&self, seed: u64) -> ClassifierSpec {
        ClassifierSpec {
            params: Hyperparams::Logistic(self.meta.clone()),
            seed: rng::derive_tag(seed, "meta"),
        }
    }

    /// The configured bases in order, then the ensemble if enabled.
    pub fn models(&self, seed: u64) -> Vec<ModelChoice> {
        let bases: Vec<ClassifierSpec> = self.base.iter().map(|&k| self.spec(k, seed)).collect();
        let mut out: Vec<ModelChoice> = bases.iter().cloned().map(ModelChoice::Base).collect();
        if self.ensemble {
            out.push(ModelChoice::Ensemble {
                bases,
                meta: self.meta_spec(seed),
                mode: self.stacking_mode,
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Balance mode used for the `+G` runs; `off` skips them.
    pub balance: BalanceMode,
    /// Pre-split balancing with the published GAN learning rate.
    pub paper_faithful: bool,
    /// Run folds and independent models on the thread pool.
    pub parallel: bool,
    pub datasets: Vec<DatasetEntry>,
    pub encoders: EncoderSettings,
    pub classifiers: ClassifierSettings,
    /// `gan.seed` is replaced by a stream derived from `seed`.
    pub gan: GanConfig,
    pub cv: CvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("ampgan-out"),
            balance: BalanceMode::PerFold,
            paper_faithful: false,
            parallel: true,
            datasets: Vec::new(),
            encoders: EncoderSettings::default(),
            classifiers: ClassifierSettings::default(),
            gan: GanConfig::default(),
            cv: CvConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub dataset: Option<String>,
    pub paper_faithful: bool,
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn rebase_table(base: &Path, r: &mut String) {
    if tables::bundled::by_name(r).is_none() {
        *r = rebase(base, Path::new(r.as_str())).to_string_lossy().into_owned();
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            d.path = rebase(base, &d.path);
        }
        cfg.output_dir = rebase(base, &cfg.output_dir);
        for r in cfg
            .encoders
            .pseaac
            .properties
            .iter_mut()
            .chain(cfg.encoders.physchem.tables.iter_mut())
            .chain(std::iter::once(&mut cfg.encoders.fourier.table))
        {
            rebase_table(base, r);
        }
        Ok(cfg)
    }

    /// Apply overrides and derived values, then validate.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(name) = &o.dataset {
            self.datasets.retain(|d| &d.name == name);
            if self.datasets.is_empty() {
                return Err(Error::Config(format!("no dataset named '{name}' in the config")));
            }
        }
        self.paper_faithful |= o.paper_faithful;
        if self.paper_faithful {
            self.balance = BalanceMode::PaperFaithful;
            self.gan.learning_rate = PUBLISHED_LEARNING_RATE;
        }
        self.gan.seed = rng::derive_tag(self.seed, "gan");
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return Err(Error::Config(format!("dataset '{}' listed twice", d.name)));
            }
        }
        self.encoders.build()?;
        self.gan.validate()?;
        if self.classifiers.base.is_empty() {
            return Err(Error::Config("no base classifiers configured".into()));
        }
        if self.classifiers.ensemble && self.classifiers.base.len() < 2 {
            return Err(Error::Config(
                "the ensemble needs at least 2 base classifiers".into(),
            ));
        }
        for m in self.classifiers.models(self.seed) {
            if let ModelChoice::Base(s) = m {
                s.validate()?;
            }
        }
        self.classifiers.meta_spec(self.seed).validate()?;
        if self.cv.n_folds == 0 || !(self.cv.test_fraction > 0.0 && self.cv.test_fraction < 1.0) {
            return Err(Error::Config("cv needs n_folds >= 1 and test_fraction in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.cv.threshold) {
            return Err(Error::Config("cv.threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn setup(&self, balance: BalanceMode) -> ExperimentSetup {
        ExperimentSetup {
            balance,
            gan: self.gan.clone(),
            cv: self.cv.clone(),
            seed: self.seed,
            exec: self.exec(),
        }
    }
}

/// Version and config block embedded in every artifact.
pub fn provenance_block(cfg: &RunConfig) -> Value {
    json!({
        "toolkit": TOOLKIT,
        "version": VERSION,
        "balance_mode": cfg.balance.name(),
        "paper_faithful": cfg.paper_faithful,
        "config": cfg.to_json(),
    })
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Writes `path` and a `<stem>.meta.json` sidecar with version and config.
fn write_csv_artifact(path: &Path, csv: &str, cfg: &RunConfig, extra: Value) -> Result<()> {
    write_file(path, csv)?;
    let mut meta = provenance_block(cfg);
    meta["artifact"] = json!(path.file_name().map(|f| f.to_string_lossy().into_owned()));
    if let Value::Object(m) = extra {
        for (k, v) in m {
            meta[k] = v;
        }
    }
    write_file(&path.with_extension("meta.json"), &pretty(&meta))
}

/// Outcome of a command that processes several datasets independently.
#[derive(Debug, Default)]
pub struct CommandSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(String, Error)>,
}

impl CommandSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn load_entry(d: &DatasetEntry) -> Result<Dataset> {
    load_dataset(&d.name, &d.path, &DatasetRegistry::published())
}

fn require_datasets(cfg: &RunConfig) -> Result<()> {
    if cfg.datasets.is_empty() {
        return Err(Error::Config("the config lists no datasets".into()));
    }
    Ok(())
}

/// Encode every configured dataset to `<out>/features/<name>.csv`.
pub fn cmd_encode(cfg: &RunConfig) -> Result<CommandSummary> {
    require_datasets(cfg)?;
    let encoder = cfg.encoders.build()?;
    let mut summary = CommandSummary::default();
    for d in &cfg.datasets {
        let res = load_entry(d).and_then(|ds| {
            let fm = encoder.encode_dataset(&ds, cfg.exec())?;
            let path = cfg.output_dir.join("features").join(format!("{}.csv", d.name));
            write_csv_artifact(&path, &fm.to_csv(), cfg, json!({ "dataset": d.name }))?;
            Ok(path)
        });
        match res {
            Ok(p) => summary.written.push(p),
            Err(e) => {
                log::error!("dataset {}: {e}", d.name);
                summary.failures.push((d.name.clone(), e));
            }
        }
    }
    Ok(summary)
}

pub fn read_features(path: &Path) -> Result<(FeatureMatrix, Option<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::from_csv(&text)
}

/// Balance a feature CSV; the output carries a `provenance` column.
pub fn cmd_balance(cfg: &RunConfig, features: &Path, out: &Path) -> Result<PathBuf> {
    let (fm, _) = read_features(features)?;
    let b = balance_dataset(fm.rows.view(), &fm.labels, &cfg.gan)?;
    let n_real = fm.n_samples();
    let n_synthetic = b.n_synthetic();
    let mut row_ids = fm.row_ids.clone();
    row_ids.extend((0..n_synthetic).map(|i| format!("synthetic_{:05}", i + 1)));
    let balanced = FeatureMatrix {
        rows: b.features,
        schema: fm.schema.clone(),
        row_ids,
        labels: b.labels,
    };
    let prov: Vec<&str> = b.provenance.iter().map(|p| p.as_str()).collect();
    let csv = balanced.to_csv_with(Some(("provenance", &prov)));
    write_csv_artifact(
        out,
        &csv,
        cfg,
        json!({
            "source": features.to_string_lossy(),
            "n_real": n_real,
            "n_synthetic": n_synthetic,
            "minority_label": b.minority_label,
            "gan_seed": cfg.gan.seed,
            "training_log": b.training_log,
        }),
    )?;
    Ok(out.to_path_buf())
}

/// `stacking` or a base classifier name.
pub fn parse_model_name(name: &str) -> Result<Option<ClassifierKind>> {
    if name == "stacking" || name == "ensemble" {
        return Ok(None);
    }
    ClassifierKind::ALL
        .into_iter()
        .find(|k| k.name() == name || k.short().eq_ignore_ascii_case(name))
        .map(Some)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown model '{name}' (expected one of logistic, forest, gaussian_nb, tree, mlp, stacking)"
            ))
        })
}

fn with_provenance(checkpoint: String, cfg: &RunConfig, features: &Path) -> String {
    let mut v: Value = serde_json::from_str(&checkpoint).expect("checkpoint is json");
    v["toolkit"] = json!(TOOLKIT);
    v["toolkit_version"] = json!(VERSION);
    v["trained_on"] = json!(features.to_string_lossy());
    v["config"] = cfg.to_json();
    serde_json::to_string(&v).expect("json serializes")
}

/// Fit one model on a (possibly balanced) feature CSV and write a checkpoint.
pub fn cmd_train(cfg: &RunConfig, features: &Path, model: &str, out: &Path) -> Result<PathBuf> {
    let kind = parse_model_name(model)?;
    let (fm, _) = read_features(features)?;
    let text = match kind {
        Some(k) => {
            let spec = cfg.classifiers.spec(k, cfg.seed);
            crate::classifiers::train_with(&spec, fm.rows.view(), &fm.labels, cfg.exec())?
                .to_checkpoint()
        }
        None => {
            let specs: Vec<ClassifierSpec> = cfg
                .classifiers
                .base
                .iter()
                .map(|&k| cfg.classifiers.spec(k, cfg.seed))
                .collect();
            train_stacking_with(
                &specs,
                &cfg.classifiers.meta_spec(cfg.seed),
                fm.rows.view(),
                &fm.labels,
                cfg.classifiers.stacking_mode,
                cfg.exec(),
            )?
            .to_checkpoint()
        }
    };
    write_file(out, &with_provenance(text, cfg, features))?;
    Ok(out.to_path_buf())
}

/// Either kind of saved model.
pub enum LoadedModel {
    Base(TrainedModel),
    Stacking(StackingModel),
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)?;
        match v.get("format").and_then(Value::as_str) {
            Some("ampgan-classifier") => Ok(LoadedModel::Base(TrainedModel::from_checkpoint(&text)?)),
            Some("ampgan-stacking") => Ok(LoadedModel::Stacking(StackingModel::from_checkpoint(&text)?)),
            other => Err(Error::Schema(format!("{}: not a model checkpoint ({other:?})", path.display()))),
        }
    }

    pub fn predict_proba(&self, x: ndarray::ArrayView2<f64>) -> Result<ndarray::Array1<f64>> {
        match self {
            LoadedModel::Base(m) => m.predict_proba(x),
            LoadedModel::Stacking(m) => m.predict_proba(x),
        }
    }
}

/// Score a saved model on a labelled feature CSV.
pub fn cmd_evaluate_model(cfg: &RunConfig, model: &Path, features: &Path, out: &Path) -> Result<Value> {
    let m = LoadedModel::load(model)?;
    let (fm, prov) = read_features(features)?;
    if prov.as_ref().is_some_and(|p| p.iter().any(|s| s == "synthetic")) {
        log::warn!("{}: scoring rows of synthetic provenance", features.display());
    }
    let p = m.predict_proba(fm.rows.view())?;
    let pred = crate::classifiers::threshold_labels(&p, cfg.cv.threshold)?;
    let cm = confusion(&fm.labels, &pred)?;
    let (accuracy, f1) = accuracy_f1(&cm)?;
    let mut v = provenance_block(cfg);
    v["model"] = json!(model.to_string_lossy());
    v["features"] = json!(features.to_string_lossy());
    v["metrics"] = json!({
        "confusion": cm,
        "mcc": mcc(&cm),
        "accuracy": accuracy,
        "f1": f1,
    });
    write_file(out, &pretty(&v))?;
    Ok(v)
}

/// MCCV evaluation of every configured model on a feature CSV.
pub fn cmd_evaluate_features(cfg: &RunConfig, features: &Path) -> Result<Vec<EvaluationReport>> {
    let (fm, prov) = read_features(features)?;
    if prov.is_some() {
        return Err(Error::Config(
            "cross-validation input must be unbalanced features; balancing happens per fold".into(),
        ));
    }
    let name = features
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "features".into());
    let models = cfg.classifiers.models(cfg.seed);
    let mut reports = Vec::new();
    for mode in balance_modes(cfg.balance) {
        reports.extend(evaluate_features(&name, &fm, &models, &cfg.setup(mode))?);
    }
    write_reports(cfg, &reports)?;
    Ok(reports)
}

fn balance_modes(mode: BalanceMode) -> Vec<BalanceMode> {
    match mode {
        BalanceMode::Off => vec![BalanceMode::Off],
        m => vec![BalanceMode::Off, m],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub toolkit: String,
    pub version: String,
    pub generated_at: u64,
    pub config: Value,
    pub report: EvaluationReport,
}

pub fn report_file_name(r: &EvaluationReport) -> String {
    let flag = if r.balancing == "+G" { "plusG" } else { "minusG" };
    format!("{}__{}__{}.json", r.dataset, r.classifier, flag)
}

fn write_reports(cfg: &RunConfig, reports: &[EvaluationReport]) -> Result<Vec<PathBuf>> {
    let dir = cfg.output_dir.join("reports");
    let mut out = Vec::new();
    for r in reports {
        let env = ReportEnvelope {
            toolkit: TOOLKIT.into(),
            version: VERSION.into(),
            generated_at: now_unix(),
            config: cfg.to_json(),
            report: r.clone(),
        };
        let path = dir.join(report_file_name(r));
        write_file(&path, &pretty(&serde_json::to_value(&env)?))?;
        out.push(path);
    }
    Ok(out)
}

/// Ensemble `-G` versus `+G` comparison for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCheck {
    pub dataset: String,
    pub minus_g: f64,
    pub plus_g: f64,
    /// `+G`, `-G` or `tie`.
    pub higher: String,
}

pub fn directional_checks(reports: &[EvaluationReport]) -> Vec<DirectionalCheck> {
    let mut by: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.classifier == "stacking") {
        let e = by.entry(&r.dataset).or_default();
        if r.balancing == "+G" {
            e.1 = Some(r.mean_mcc);
        } else {
            e.0 = Some(r.mean_mcc);
        }
    }
    by.into_iter()
        .filter_map(|(d, (m, p))| {
            let (m, p) = (m?, p?);
            let higher = if p > m {
                "+G"
            } else if m > p {
                "-G"
            } else {
                "tie"
            };
            Some(DirectionalCheck {
                dataset: d.to_string(),
                minus_g: m,
                plus_g: p,
                higher: higher.into(),
            })
        })
        .collect()
}

fn model_order(name: &str) -> usize {
    ClassifierKind::ALL
        .iter()
        .position(|k| k.name() == name)
        .unwrap_or(ClassifierKind::ALL.len())
}

fn short_name(name: &str) -> &str {
    ClassifierKind::ALL
        .iter()
        .find(|k| k.name() == name)
        .map(|k| k.short())
        .unwrap_or(if name == "stacking" { "Ensemble" } else { name })
}

fn column_label(r: &EvaluationReport) -> String {
    let mut s = format!("{}{}", short_name(&r.classifier), r.balancing);
    if r.balance_mode == BalanceMode::PaperFaithful {
        s.push_str("[paper_faithful]");
    }
    s
}

/// Rows are datasets, columns are `<model>-G`/`<model>+G` pairs, cells are
/// `mean ± std` of fold MCC.
pub fn mcc_table(reports: &[EvaluationReport]) -> String {
    let mut cols: Vec<(usize, bool, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String), String> = BTreeMap::new();
    for r in reports {
        let label = column_label(r);
        let key = (model_order(&r.classifier), r.balancing == "+G", label.clone());
        if !cols.contains(&key) {
            cols.push(key);
        }
        cells.insert(
            (r.dataset.clone(), label),
            format!("{:.4} ± {:.4}", r.mean_mcc, r.std_mcc),
        );
    }
    cols.sort();
    let datasets: BTreeSet<&str> = reports.iter().map(|r| r.dataset.as_str()).collect();
    let mut out = String::from("dataset");
    for (_, _, c) in &cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for d in datasets {
        out.push_str(d);
        for (_, _, c) in &cols {
            out.push(',');
            if let Some(v) = cells.get(&(d.to_string(), c.clone())) {
                out.push_str(v);
            }
        }
        out.push('\n');
    }
    out
}

pub fn summary_text(reports: &[EvaluationReport], checks: &[DirectionalCheck]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&format!(
            "{:<24} {:<12} {} ({}) MCC {:.4} ± {:.4}  acc {:.4}  f1 {:.4}\n",
            r.dataset,
            r.classifier,
            r.balancing,
            r.balance_mode,
            r.mean_mcc,
            r.std_mcc,
            r.mean_accuracy,
            r.mean_f1
        ));
    }
    for c in checks {
        s.push_str(&format!(
            "directional check {}: ensemble -G {:.4} vs +G {:.4}; higher: {}\n",
            c.dataset, c.minus_g, c.plus_g, c.higher
        ));
    }
    let scored: usize = reports.iter().map(|r| r.synthetic_rows_scored()).sum();
    if scored > 0 {
        s.push_str(&format!(
            "warning: {scored} synthetic row(s) were scored (balancing ran before splitting)\n"
        ));
    }
    s
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub reports: Vec<EvaluationReport>,
    pub checks: Vec<DirectionalCheck>,
    pub failures: Vec<(String, Error)>,
}

/// Encode, balance, train and score every dataset × model × {-G, +G}.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    require_datasets(cfg)?;
    let encoder = cfg.encoders.build()?;
    let models = cfg.classifiers.models(cfg.seed);
    let mut outcome = RunOutcome::default();
    for d in &cfg.datasets {
        log::info!("dataset {}: start", d.name);
        let res = load_entry(d).and_then(|ds| {
            let fm = encoder.encode_dataset(&ds, cfg.exec())?;
            let mut reports = Vec::new();
            for mode in balance_modes(cfg.balance) {
                log::info!("dataset {}: {} ({})", d.name, mode.flag(), mode);
                reports.extend(evaluate_features(&d.name, &fm, &models, &cfg.setup(mode))?);
            }
            Ok(reports)
        });
        match res {
            Ok(r) => {
                write_reports(cfg, &r)?;
                outcome.reports.extend(r);
            }
            Err(e) => {
                log::error!("dataset {}: {e}", d.name);
                outcome.failures.push((d.name.clone(), e));
            }
        }
    }
    outcome.checks = directional_checks(&outcome.reports);
    let checks_json = serde_json::to_value(&outcome.checks)?;
    write_csv_artifact(
        &cfg.output_dir.join("table_mcc.csv"),
        &mcc_table(&outcome.reports),
        cfg,
        json!({ "directional_checks": checks_json }),
    )?;
    write_file(
        &cfg.output_dir.join("summary.txt"),
        &summary_text(&outcome.reports, &outcome.checks),
    )?;
    write_file(&cfg.output_dir.join("config.resolved.toml"), &cfg.to_toml())?;
    let mut run = provenance_block(cfg);
    run["generated_at"] = json!(now_unix());
    run["directional_checks"] = checks_json;
    run["failures"] = json!(outcome
        .failures
        .iter()
        .map(|(d, e)| json!({ "dataset": d, "error": e.to_string() }))
        .collect::<Vec<_>>());
    write_file(&cfg.output_dir.join("run_summary.json"), &pretty(&run))?;
    Ok(outcome)
}

/// Collect report JSONs from `dir` (or `dir/reports`) and merge them.
pub fn load_reports(dir: &Path) -> Result<Vec<EvaluationReport>> {
    let mut files = Vec::new();
    for d in [dir.to_path_buf(), dir.join("reports")] {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries {
            let p = e.map_err(|e| Error::io(&d, e))?.path();
            if p.extension().is_some_and(|x| x == "json") {
                files.push(p);
            }
        }
    }
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "report directory not found"),
        ));
    }
    files.sort();
    let mut reports = Vec::new();
    let mut versions = BTreeSet::new();
    for p in files {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let v: Value = serde_json::from_str(&text)?;
        let Some(r) = v.get("report") else { continue };
        let version = r.get("schema_version").and_then(Value::as_u64);
        versions.insert(version);
        if versions.len() > 1 {
            return Err(Error::Schema(format!(
                "mixed schema versions in {}: {versions:?}",
                dir.display()
            )));
        }
        if version != Some(u64::from(REPORT_SCHEMA)) {
            return Err(Error::Schema(format!(
                "{}: unsupported report schema {version:?}",
                p.display()
            )));
        }
        reports.push(serde_json::from_value::<EvaluationReport>(r.clone())?);
    }
    if reports.is_empty() {
        return Err(Error::Precondition(format!("no reports found in {}", dir.display())));
    }
    Ok(reports)
}

/// Merged table and summary text for a report directory.
pub fn cmd_report(dir: &Path) -> Result<(String, String)> {
    let reports = load_reports(dir)?;
    let checks = directional_checks(&reports);
    Ok((mcc_table(&reports), summary_text(&reports, &checks)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_all_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.encoders.pseaac.properties.len(), 3);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default().resolve(&Overrides::default()).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn paper_faithful_override() {
        let cfg = RunConfig::default()
            .resolve(&Overrides {
                paper_faithful: true,
                seed: Some(7),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(cfg.balance, BalanceMode::PaperFaithful);
        assert_eq!(cfg.gan.learning_rate, PUBLISHED_LEARNING_RATE);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.gan.seed, rng::derive_tag(7, "gan"));
    }

    #[test]
    fn dataset_filter() {
        let cfg = RunConfig {
            datasets: vec![
                DatasetEntry { name: "a".into(), path: "a.fa".into() },
                DatasetEntry { name: "b".into(), path: "b.fa".into() },
            ],
            ..Default::default()
        };
        let o = Overrides { dataset: Some("b".into()), ..Default::default() };
        assert_eq!(cfg.clone().resolve(&o).unwrap().datasets.len(), 1);
        let o = Overrides { dataset: Some("c".into()), ..Default::default() };
        assert!(cfg.resolve(&o).is_err());
    }

    #[test]
    fn model_list() {
        let m = ClassifierSettings::default().models(0);
        assert_eq!(m.len(), 6);
        assert_eq!(m[5].name(), "stacking");
        assert!(parse_model_name("RF").unwrap() == Some(ClassifierKind::Forest));
        assert!(parse_model_name("stacking").unwrap().is_none());
        assert!(parse_model_name("svm").is_err());
    }

    #[test]
    fn table_resolution() {
        assert_eq!(resolve_table("eiip").unwrap().id, "eiip");
        assert!(matches!(resolve_table("nope"), Err(Error::Config(_))));
    }
}
