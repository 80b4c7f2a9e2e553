//! Experiment configuration, end-to-end runs and parameter sweeps.
//!
//! A run generates a training and a test set from disjoint seed families,
//! trains every configured SVM and the ensemble, scores the test events and
//! writes one ROC per classifier next to the hard-fusion baselines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::FadingParams;
use crate::ensemble::{train_ensemble, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::eval::{pd_pfa_at, roc_curve, RocCurve};
use crate::fusion::{binomial_tail, fusion_scores, local_decision, FusionRule};
use crate::rng::{derive_seed, tags};
use crate::sensing::{fmt_f64, Dataset, Label, SensingConfig, Sensor};
use crate::svm::{train_smo, KernelSpec, SmoParams, SvmModel};

/// Per-sample SNR convention puts the default scenario in the AUC
/// mid-range at this window length.
pub const DEFAULT_NUM_SAMPLES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fading: FadingSection,
    pub sensing: SensingSection,
    pub data: DataSection,
    pub classifiers: ClassifierSection,
    pub fusion: FusionSection,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    pub alpha: f64,
    pub kappa: f64,
    pub mu: f64,
    pub gamma_bar_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    #[serde(rename = "M")]
    pub num_samples: usize,
    #[serde(rename = "N")]
    pub num_sus: usize,
    pub prior_h1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(rename = "L_train")]
    pub train_size: usize,
    #[serde(rename = "L_test")]
    pub test_size: usize,
}

/// One SVM: `kernel` is `linear`, `polynomial` (needs `degree`) or `rbf`
/// (needs `sigma`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub enabled: bool,
    pub bases: Vec<SvmSpec>,
    pub b_per_spec: usize,
    pub bag_fraction: f64,
    pub stacking_split: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    pub svms: Vec<SvmSpec>,
    pub ensemble: EnsembleSection,
    pub tol: f64,
    pub max_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub k_values: Vec<usize>,
    /// Common local thresholds on the normalized energy for the operating
    /// point table.
    pub local_thresholds: Vec<f64>,
}

impl SvmSpec {
    pub fn new(kernel: KernelSpec, theta: f64) -> Self {
        let (kernel_name, degree, sigma) = match kernel {
            KernelSpec::Linear => ("linear", None, None),
            KernelSpec::Polynomial { degree } => ("polynomial", Some(degree), None),
            KernelSpec::Rbf { sigma } => ("rbf", None, Some(sigma)),
        };
        SvmSpec {
            name: None,
            kernel: kernel_name.into(),
            degree,
            sigma,
            theta,
        }
    }

    fn kernel_spec(&self, key: &str) -> Result<KernelSpec> {
        let missing = |field: &str| Error::Config {
            key: format!("{key}.{field}"),
            message: format!("required for kernel `{}`", self.kernel),
        };
        let spec = match self.kernel.as_str() {
            "linear" => KernelSpec::Linear,
            "polynomial" => KernelSpec::Polynomial {
                degree: self.degree.ok_or_else(|| missing("degree"))?,
            },
            "rbf" => KernelSpec::Rbf {
                sigma: self.sigma.ok_or_else(|| missing("sigma"))?,
            },
            other => {
                return Err(Error::Config {
                    key: format!("{key}.kernel"),
                    message: format!("unknown kernel `{other}`; expected linear, polynomial or rbf"),
                })
            }
        };
        spec.validate().map_err(|e| Error::Config {
            key: key.into(),
            message: e.to_string(),
        })?;
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config {
                key: format!("{key}.theta"),
                message: format!("must be positive, got {}", self.theta),
            });
        }
        Ok(spec)
    }

    /// Display name; defaults to `linear`, `poly`, `rbf`.
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.kernel.as_str() {
            "polynomial" => "poly".into(),
            k => k.into(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let specs = vec![
            SvmSpec::new(KernelSpec::Linear, 1.0),
            SvmSpec::new(KernelSpec::Polynomial { degree: 2 }, 1.0),
            SvmSpec::new(KernelSpec::Rbf { sigma: 1.0 }, 1.0),
        ];
        ExperimentConfig {
            fading: FadingSection {
                alpha: 2.0,
                kappa: 2.0,
                mu: 2.0,
                gamma_bar_db: 0.0,
            },
            sensing: SensingSection {
                num_samples: DEFAULT_NUM_SAMPLES,
                num_sus: 3,
                prior_h1: 0.5,
            },
            data: DataSection {
                train_size: 2000,
                test_size: 4000,
            },
            classifiers: ClassifierSection {
                svms: specs.clone(),
                ensemble: EnsembleSection {
                    enabled: true,
                    bases: specs,
                    b_per_spec: 3,
                    bag_fraction: 1.0,
                    stacking_split: 0.2,
                },
                tol: 1e-3,
                max_passes: 10,
            },
            fusion: FusionSection {
                k_values: vec![1, 2, 3],
                local_thresholds: (10..=30).map(|i| i as f64 / 10.0).collect(),
            },
            seed: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Validated view of a config.
#[derive(Debug, Clone)]
pub struct Plan {
    pub sensing: SensingConfig,
    pub svms: Vec<(String, KernelSpec, f64)>,
    pub ensemble: Option<EnsembleConfig>,
    pub smo: SmoParams,
    pub fusion_rules: Vec<FusionRule>,
}

impl ExperimentConfig {
    /// Parses JSON; every key is required and unknown keys are rejected.
    /// Errors name the offending key path, e.g. `sensing.M`.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut key = e.path().to_string();
            let message = e.inner().to_string();
            if let Some(field) = message
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next())
            {
                key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
            }
            let message = message.split(" at line ").next().unwrap_or(&message).to_string();
            config_error(&key, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn fading_params(&self) -> Result<FadingParams> {
        let f = &self.fading;
        FadingParams::from_db(f.alpha, f.kappa, f.mu, f.gamma_bar_db).map_err(|e| config_error("fading", e.to_string()))
    }

    pub fn plan(&self) -> Result<Plan> {
        let fading = self.fading_params()?;
        let s = &self.sensing;
        if s.num_samples < 1 {
            return Err(config_error("sensing.M", "must be at least 1"));
        }
        if s.num_sus < 1 {
            return Err(config_error("sensing.N", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&s.prior_h1) {
            return Err(config_error("sensing.prior_h1", "must lie in [0, 1]"));
        }
        let sensing = SensingConfig::new(s.num_samples, s.num_sus, s.prior_h1, fading)?;
        if self.data.train_size < 10 {
            return Err(config_error("data.L_train", "must be at least 10"));
        }
        if self.data.test_size < 10 {
            return Err(config_error("data.L_test", "must be at least 10"));
        }
        let c = &self.classifiers;
        if !(c.tol > 0.0 && c.tol.is_finite()) {
            return Err(config_error("classifiers.tol", "must be positive"));
        }
        if c.max_passes == 0 {
            return Err(config_error("classifiers.max_passes", "must be at least 1"));
        }
        let smo = SmoParams {
            tol: c.tol,
            max_passes: c.max_passes,
            ..SmoParams::default()
        };
        let mut svms = Vec::new();
        for (i, spec) in c.svms.iter().enumerate() {
            let key = format!("classifiers.svms[{i}]");
            let kernel = spec.kernel_spec(&key)?;
            let name = spec.display_name();
            if name == "ensemble" || name.starts_with("fusion") || svms.iter().any(|(n, _, _)| *n == name) {
                return Err(config_error(&format!("{key}.name"), format!("duplicate or reserved name `{name}`")));
            }
            if name.is_empty() || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                return Err(config_error(&format!("{key}.name"), "use letters, digits, `_` or `-`"));
            }
            svms.push((name, kernel, spec.theta));
        }
        let e = &c.ensemble;
        let ensemble = if e.enabled {
            let mut base_specs = Vec::new();
            for (i, spec) in e.bases.iter().enumerate() {
                base_specs.push((spec.kernel_spec(&format!("classifiers.ensemble.bases[{i}]"))?, spec.theta));
            }
            let cfg = EnsembleConfig {
                base_specs,
                b_per_spec: e.b_per_spec,
                bag_fraction: e.bag_fraction,
                stacking_split: e.stacking_split,
                smo: smo.clone(),
            };
            cfg.validate().map_err(|err| config_error("classifiers.ensemble", err.to_string()))?;
            Some(cfg)
        } else {
            None
        };
        let mut fusion_rules = Vec::new();
        for (i, &k) in self.fusion.k_values.iter().enumerate() {
            let rule = FusionRule::new(k, s.num_sus)
                .map_err(|err| config_error(&format!("fusion.k_values[{i}]"), err.to_string()))?;
            if !fusion_rules.contains(&rule) {
                fusion_rules.push(rule);
            }
        }
        if let Some(i) = self.fusion.local_thresholds.iter().position(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(config_error(&format!("fusion.local_thresholds[{i}]"), "must be a finite value >= 0"));
        }
        Ok(Plan {
            sensing,
            svms,
            ensemble,
            smo,
            fusion_rules,
        })
    }
}

/// One line of `summary.csv`; NaN metrics mark a classifier that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub classifier: String,
    pub auc: f64,
    pub pd_at_pfa: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub enum Trained {
    Svm(SvmModel),
    Ensemble(EnsembleModel),
}

impl Trained {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Trained::Svm(m) => m.decision_value(x),
            Trained::Ensemble(m) => m.score(x),
        }
    }
}

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<SummaryRow>,
    pub curves: Vec<(String, RocCurve)>,
}

impl RunOutcome {
    pub fn auc_of(&self, classifier: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.classifier == classifier).map(|r| r.auc)
    }
}

pub fn generate(plan: &Plan, config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let sensor = Sensor::new(plan.sensing)?;
    let train = sensor.generate_dataset(config.data.train_size, derive_seed(config.seed, tags::TRAIN))?;
    let test = sensor.generate_dataset(config.data.test_size, derive_seed(config.seed, tags::TEST))?;
    Ok((train, test))
}

/// Trains every classifier in config order; failures are kept per entry.
pub fn train_all(plan: &Plan, train: &Dataset, seed: u64) -> Vec<(String, Result<Trained>)> {
    let mut jobs: Vec<(String, Option<(KernelSpec, f64)>)> =
        plan.svms.iter().map(|(n, k, t)| (n.clone(), Some((*k, *t)))).collect();
    if plan.ensemble.is_some() {
        jobs.push(("ensemble".into(), None));
    }
    jobs.into_par_iter()
        .map(|(name, job)| {
            let result = match job {
                Some((kernel, theta)) => {
                    let params = SmoParams { theta, ..plan.smo.clone() };
                    train_smo(train, kernel, &params).map(Trained::Svm)
                }
                None => {
                    let cfg = plan.ensemble.as_ref().expect("ensemble job only when configured");
                    train_ensemble(train, cfg, derive_seed(seed, tags::ENSEMBLE)).map(Trained::Ensemble)
                }
            };
            (name, result)
        })
        .collect()
}

fn evaluate_scores(scores: Result<Vec<f64>>, labels: &[Label]) -> Result<RocCurve> {
    roc_curve(&scores?, labels)
}

fn failed(name: &str, e: &Error) -> SummaryRow {
    SummaryRow {
        classifier: name.into(),
        auc: f64::NAN,
        pd_at_pfa: f64::NAN,
        error: Some(e.to_string()),
    }
}

/// Scores the test set with each trained model and with the fusion rules.
pub fn evaluate(plan: &Plan, models: &[(String, Result<Trained>)], test: &Dataset) -> RunOutcome {
    let labels = test.labels();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut record = |name: String, curve: Result<RocCurve>| match curve {
        Ok(c) => {
            rows.push(SummaryRow {
                classifier: name.clone(),
                auc: c.auc,
                pd_at_pfa: c.pd_at_pfa(0.1),
                error: None,
            });
            curves.push((name, c));
        }
        Err(e) => rows.push(failed(&name, &e)),
    };
    let scored: Vec<(String, Result<RocCurve>)> = models
        .par_iter()
        .map(|(name, model)| {
            let curve = match model {
                Ok(m) => evaluate_scores(test.rows.iter().map(|r| m.score(&r.energies)).collect(), &labels),
                Err(e) => Err(Error::Training(e.to_string())),
            };
            (name.clone(), curve)
        })
        .collect();
    for (name, curve) in scored {
        record(name, curve);
    }
    for rule in &plan.fusion_rules {
        let name = rule.name(plan.sensing.num_sus);
        record(name, evaluate_scores(fusion_scores(test, *rule), &labels));
    }
    RunOutcome { rows, curves }
}

/// Generates, trains and evaluates without touching the filesystem.
pub fn run_in_memory(config: &ExperimentConfig) -> Result<RunOutcome> {
    let plan = config.plan()?;
    let (train, test) = generate(&plan, config)?;
    let models = train_all(&plan, &train, config.seed);
    Ok(evaluate(&plan, &models, &test))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("classifier,auc,pd_at_pfa_0.1\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.classifier, fmt_metric(r.auc), fmt_metric(r.pd_at_pfa));
    }
    out
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        fmt_f64(v)
    }
}

/// Empirical operating points of each fusion rule on the local threshold
/// grid, with the binomial prediction from the measured per-SU rates.
pub fn fusion_grid_csv(plan: &Plan, thresholds: &[f64], test: &Dataset) -> Result<String> {
    let labels = test.labels();
    let n = plan.sensing.num_sus;
    let mut out = String::from("rule,tau,pd,pfa,pd_binomial,pfa_binomial\n");
    for rule in &plan.fusion_rules {
        for &tau in thresholds {
            let fused: Vec<f64> = test
                .rows
                .iter()
                .map(|r| {
                    let votes = r.energies.iter().filter(|&&y| local_decision(y, tau) == Label::Present).count();
                    votes as f64
                })
                .collect();
            let (pd, pfa) = pd_pfa_at(&fused, &labels, rule.k as f64 - 0.5)?;
            let local: Vec<f64> = test.rows.iter().flat_map(|r| r.energies.iter().copied()).collect();
            let local_labels: Vec<Label> = test.rows.iter().flat_map(|r| std::iter::repeat_n(r.label, n)).collect();
            let (lpd, lpfa) = pd_pfa_at(&local, &local_labels, tau)?;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                rule.name(n),
                fmt_f64(tau),
                fmt_f64(pd),
                fmt_f64(pfa),
                fmt_f64(binomial_tail(n, lpd, rule.k)),
                fmt_f64(binomial_tail(n, lpfa, rule.k))
            );
        }
    }
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `generate` stage: writes `train.csv`, `test.csv` and their sidecars.
pub fn generate_stage(config: &ExperimentConfig, out: &Path) -> Result<(Dataset, Dataset)> {
    let plan = config.plan()?;
    ensure_dir(out)?;
    let (train, test) = generate(&plan, config)?;
    train.save(out, "train")?;
    test.save(out, "test")?;
    write(&out.join("config.json"), &config.to_json())?;
    Ok((train, test))
}

fn load_or_generate(config: &ExperimentConfig, plan: &Plan, out: &Path) -> Result<(Dataset, Dataset)> {
    let (train_path, test_path) = (out.join("train.csv"), out.join("test.csv"));
    if train_path.exists() && test_path.exists() {
        let train = Dataset::load_csv(&train_path)?;
        let test = Dataset::load_csv(&test_path)?;
        if train.dimension() != plan.sensing.num_sus || test.dimension() != plan.sensing.num_sus {
            return Err(config_error("sensing.N", "existing datasets in the output directory have a different N"));
        }
        Ok((train, test))
    } else {
        generate_stage(config, out)
    }
}

/// `train` stage: fits every classifier on `train.csv` (generated if
/// absent) and writes `models/<name>.svm`, `models/ensemble.manifest`, or
/// `models/<name>.error` for a failure.
pub fn train_stage(config: &ExperimentConfig, out: &Path) -> Result<Vec<(String, Result<Trained>)>> {
    let plan = config.plan()?;
    let (train, _) = load_or_generate(config, &plan, out)?;
    let models = train_all(&plan, &train, config.seed);
    save_models(&models, out)?;
    Ok(models)
}

fn save_models(models: &[(String, Result<Trained>)], out: &Path) -> Result<()> {
    let dir = out.join("models");
    ensure_dir(&dir)?;
    for (name, model) in models {
        let error_path = dir.join(format!("{name}.error"));
        if error_path.exists() {
            fs::remove_file(&error_path).map_err(|e| Error::io(&error_path, e))?;
        }
        match model {
            Ok(Trained::Svm(m)) => m.save(&dir.join(format!("{name}.svm")))?,
            Ok(Trained::Ensemble(m)) => m.save(&dir.join(format!("{name}.manifest")))?,
            Err(e) => write(&error_path, &format!("{e}\n"))?,
        }
    }
    Ok(())
}

fn load_models(plan: &Plan, out: &Path) -> Vec<(String, Result<Trained>)> {
    let dir = out.join("models");
    let mut names: Vec<String> = plan.svms.iter().map(|(n, _, _)| n.clone()).collect();
    if plan.ensemble.is_some() {
        names.push("ensemble".into());
    }
    names
        .into_iter()
        .map(|name| {
            let error_path = dir.join(format!("{name}.error"));
            let model = if let Ok(message) = fs::read_to_string(&error_path) {
                Err(Error::Training(message.trim().to_string()))
            } else if name == "ensemble" {
                EnsembleModel::load(&dir.join("ensemble.manifest")).map(Trained::Ensemble)
            } else {
                SvmModel::load(&dir.join(format!("{name}.svm"))).map(Trained::Svm)
            };
            (name, model)
        })
        .collect()
}

fn write_evaluation(plan: &Plan, config: &ExperimentConfig, outcome: &RunOutcome, test: &Dataset, out: &Path) -> Result<()> {
    let roc_dir = out.join("roc");
    ensure_dir(&roc_dir)?;
    for (name, curve) in &outcome.curves {
        curve.save(
            &roc_dir,
            name,
            &[
                ("classifier", name.clone()),
                ("test_size", test.len().to_string()),
                ("seed", config.seed.to_string()),
            ],
        )?;
    }
    write(&out.join("summary.csv"), &summary_csv(&outcome.rows))?;
    write(
        &out.join("fusion_grid.csv"),
        &fusion_grid_csv(plan, &config.fusion.local_thresholds, test)?,
    )?;
    let errors: String = outcome
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}\n", r.classifier)))
        .collect();
    let errors_path = out.join("errors.txt");
    if errors.is_empty() {
        if errors_path.exists() {
            fs::remove_file(&errors_path).map_err(|e| Error::io(&errors_path, e))?;
        }
    } else {
        write(&errors_path, &errors)?;
    }
    Ok(())
}

/// `eval` stage: loads `test.csv` and the saved models and writes ROCs and
/// the summary.
pub fn eval_stage(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let plan = config.plan()?;
    let test_path = out.join("test.csv");
    let test = Dataset::load_csv(&test_path)?;
    if test.dimension() != plan.sensing.num_sus {
        return Err(config_error("sensing.N", "test set dimension does not match N"));
    }
    let models = load_models(&plan, out);
    let outcome = evaluate(&plan, &models, &test);
    write_evaluation(&plan, config, &outcome, &test, out)?;
    Ok(outcome)
}

/// Full pipeline into `out`: datasets, models, ROC curves, `summary.csv`,
/// `fusion_grid.csv` and the resolved `config.json`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let plan = config.plan()?;
    ensure_dir(out)?;
    let (train, test) = generate(&plan, config)?;
    train.save(out, "train")?;
    test.save(out, "test")?;
    let models = train_all(&plan, &train, config.seed);
    save_models(&models, out)?;
    let outcome = evaluate(&plan, &models, &test);
    write_evaluation(&plan, config, &outcome, &test, out)?;
    write(&out.join("config.json"), &config.to_json())?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SampleSize,
    SnrDb,
    NumSus,
    TrainSize,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "M" | "sample_size" => Ok(SweepAxis::SampleSize),
            "snr_db" => Ok(SweepAxis::SnrDb),
            "N" | "num_sus" => Ok(SweepAxis::NumSus),
            "L" | "train_size" => Ok(SweepAxis::TrainSize),
            other => Err(config_error("axis", format!("unknown sweep axis `{other}`; expected M, snr_db, N or L"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SampleSize => "M",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::NumSus => "N",
            SweepAxis::TrainSize => "L",
        }
    }

    /// `base` with the axis set to `value` and the seed replaced by `seed`.
    /// On the N axis fusion rules with `k > N` are dropped.
    pub fn apply(&self, base: &ExperimentConfig, value: f64, seed: u64) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        c.seed = seed;
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
                Ok(v as usize)
            } else {
                Err(config_error("values", format!("axis {} needs positive integers, got {v}", self.name())))
            }
        };
        match self {
            SweepAxis::SampleSize => c.sensing.num_samples = count(value)?,
            SweepAxis::SnrDb => {
                if !value.is_finite() {
                    return Err(config_error("values", "snr_db values must be finite"));
                }
                c.fading.gamma_bar_db = value;
            }
            SweepAxis::NumSus => {
                let n = count(value)?;
                c.sensing.num_sus = n;
                c.fusion.k_values.retain(|&k| k <= n);
            }
            SweepAxis::TrainSize => c.data.train_size = count(value)?,
        }
        Ok(c)
    }
}

/// Seed of sweep point `index`.
pub fn sweep_seed(seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(seed, tags::SWEEP), index as u64)
}

pub fn sweep_configs(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(config_error("values", "sweep needs at least one value"));
    }
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| axis.apply(config, v, sweep_seed(config.seed, i)))
        .collect::<Result<_>>()?;
    for c in &configs {
        c.plan()?;
    }
    Ok(configs)
}

fn fmt_axis_value(v: f64) -> String {
    format!("{v}")
}

/// Runs every sweep point into `out/<axis>_<index>` and writes `sweep.csv`.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64], out: &Path) -> Result<Vec<(f64, RunOutcome)>> {
    let configs = sweep_configs(config, axis, values)?;
    ensure_dir(out)?;
    let outcomes: Vec<RunOutcome> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut c = c.clone();
            let dir = out.join(format!("{}_{i:02}", axis.name()));
            c.output_dir = dir.clone();
            run(&c, &dir)
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("axis_value,classifier,auc\n");
    for (v, o) in values.iter().zip(&outcomes) {
        for r in &o.rows {
            let _ = writeln!(csv, "{},{},{}", fmt_axis_value(*v), r.classifier, fmt_metric(r.auc));
        }
    }
    write(&out.join("sweep.csv"), &csv)?;
    write(&out.join("config.json"), &config.to_json())?;
    Ok(values.iter().copied().zip(outcomes).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        c.plan().unwrap();
    }

    #[test]
    fn missing_and_unknown_keys_are_named() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["sensing"].as_object_mut().unwrap().remove("M");
        let e = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "sensing.M"), "{e}");

        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["fusion"]["k_vals"] = serde_json::json!([1]);
        let e = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "fusion.k_vals"), "{e}");

        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        let e = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "seed"), "{e}");
    }

    #[test]
    fn invalid_values_are_named() {
        let mut c = ExperimentConfig::default();
        c.data.train_size = 5;
        assert!(matches!(c.plan().unwrap_err(), Error::Config { key, .. } if key == "data.L_train"));
        let mut c = ExperimentConfig::default();
        c.classifiers.svms[2].sigma = None;
        assert!(matches!(c.plan().unwrap_err(), Error::Config { key, .. } if key == "classifiers.svms[2].sigma"));
        let mut c = ExperimentConfig::default();
        c.fusion.k_values = vec![4];
        assert!(matches!(c.plan().unwrap_err(), Error::Config { key, .. } if key == "fusion.k_values[0]"));
    }

    #[test]
    fn sweep_axis_application() {
        let c = ExperimentConfig::default();
        let n2 = SweepAxis::NumSus.apply(&c, 2.0, 9).unwrap();
        assert_eq!(n2.sensing.num_sus, 2);
        assert_eq!(n2.fusion.k_values, vec![1, 2]);
        assert_eq!(n2.seed, 9);
        assert!(SweepAxis::SampleSize.apply(&c, 2.5, 0).is_err());
        assert!(sweep_configs(&c, SweepAxis::SnrDb, &[]).is_err());
        assert!(SweepAxis::parse("bogus").is_err());
    }
}
