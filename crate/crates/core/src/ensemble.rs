//! Bagged and stacked ensemble of SVMs.
//!
//! The training set is split into a base part and a stacking part. Each
//! base spec is trained on `b_per_spec` bootstrap replicas of the base part,
//! and a linear SVM fitted on the base models' decision values over the
//! stacking part combines them. The combiner is stored folded back into raw
//! base-score space, so `score(x) = Σ w_k f_k(x) + b`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream, tags};
use crate::sensing::{fmt_f64, Dataset, Label};
use crate::svm::{train, train_smo, KernelSpec, SmoParams, SvmModel};

/// Retries for a single-class bootstrap replica.
const MAX_REDRAWS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub base_specs: Vec<(KernelSpec, f64)>,
    pub b_per_spec: usize,
    pub bag_fraction: f64,
    pub stacking_split: f64,
    /// Solver settings shared by base models and combiner; `theta` is taken
    /// from each spec.
    pub smo: SmoParams,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            base_specs: vec![
                (KernelSpec::Linear, 1.0),
                (KernelSpec::Polynomial { degree: 2 }, 1.0),
                (KernelSpec::Rbf { sigma: 1.0 }, 1.0),
            ],
            b_per_spec: 3,
            bag_fraction: 1.0,
            stacking_split: 0.2,
            smo: SmoParams::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_specs.is_empty() {
            return Err(Error::domain("ensemble needs at least one base spec"));
        }
        for (kernel, theta) in &self.base_specs {
            kernel.validate()?;
            if !(*theta > 0.0 && theta.is_finite()) {
                return Err(Error::domain(format!("theta must be positive, got {theta}")));
            }
        }
        if self.b_per_spec == 0 {
            return Err(Error::domain("b_per_spec must be at least 1"));
        }
        check_fraction(self.bag_fraction)?;
        if !(self.stacking_split > 0.0 && self.stacking_split < 1.0) {
            return Err(Error::domain(format!(
                "stacking_split must lie in (0, 1), got {}",
                self.stacking_split
            )));
        }
        Ok(())
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!("bag fraction must lie in (0, 1], got {fraction}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub base_models: Vec<SvmModel>,
    /// One weight per base model, applied to its raw decision value.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub bag_fraction: f64,
    pub stacking_split: f64,
}

/// `round(fraction · L)` rows drawn uniformly with replacement.
pub fn bootstrap_sample<R: Rng + ?Sized>(data: &Dataset, fraction: f64, rng: &mut R) -> Result<Dataset> {
    check_fraction(fraction)?;
    if data.is_empty() {
        return Err(Error::domain("cannot bootstrap an empty dataset"));
    }
    let n = ((fraction * data.len() as f64).round() as usize).max(1);
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..data.len())).collect();
    Ok(data.subset(&indices))
}

/// Trains the base models and the stacking combiner. `seed` fixes the split
/// and every bootstrap replica.
pub fn train_ensemble(data: &Dataset, config: &EnsembleConfig, seed: u64) -> Result<EnsembleModel> {
    config.validate()?;
    if !data.has_both_classes() {
        return Err(Error::Training("ensemble training data must contain both classes".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut substream(derive_seed(seed, tags::SPLIT), 0));
    let n_stack = (config.stacking_split * data.len() as f64).round() as usize;
    let (stack_idx, base_idx) = order.split_at(n_stack);
    let stack = data.subset(stack_idx);
    let base = data.subset(base_idx);
    if stack.is_empty() || !stack.has_both_classes() {
        return Err(Error::Training(format!(
            "stacking split of {} rows lacks a class; use a larger stacking_split or a different seed",
            stack.len()
        )));
    }
    if !base.has_both_classes() {
        return Err(Error::Training("base split lacks a class; use a smaller stacking_split".into()));
    }

    let boot_seed = derive_seed(seed, tags::BOOTSTRAP);
    let jobs: Vec<(usize, KernelSpec, f64)> = config
        .base_specs
        .iter()
        .flat_map(|&(k, t)| std::iter::repeat_n((k, t), config.b_per_spec))
        .enumerate()
        .map(|(j, (k, t))| (j, k, t))
        .collect();
    let results: Vec<Result<SvmModel>> = jobs
        .par_iter()
        .map(|&(j, kernel, theta)| {
            let mut replica = None;
            for attempt in 0..MAX_REDRAWS {
                let mut rng = substream(boot_seed, j as u64 * 16 + attempt);
                let sample = bootstrap_sample(&base, config.bag_fraction, &mut rng)?;
                if sample.has_both_classes() {
                    replica = Some(sample);
                    break;
                }
            }
            let replica = replica.ok_or_else(|| {
                Error::Training(format!("bootstrap replica {j} stayed single-class after {MAX_REDRAWS} draws"))
            })?;
            let params = SmoParams { theta, ..config.smo.clone() };
            train_smo(&replica, kernel, &params)
        })
        .collect();

    let mut base_models = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(m) => base_models.push(m),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if base_models.is_empty() {
        return Err(first_error.expect("at least one job ran"));
    }

    let meta: Vec<Vec<f64>> = stack
        .rows
        .iter()
        .map(|row| base_scores(&base_models, &row.energies))
        .collect::<Result<_>>()?;
    let meta_rows: Vec<&[f64]> = meta.iter().map(|r| r.as_slice()).collect();
    let params = SmoParams {
        theta: 1.0,
        standardize: true,
        ..config.smo.clone()
    };
    let combiner = train(&meta_rows, &stack.labels(), KernelSpec::Linear, &params)?;
    let (weights, bias) = fold_linear(&combiner);
    EnsembleModel::new(base_models, weights, bias, config.bag_fraction, config.stacking_split)
}

fn base_scores(models: &[SvmModel], x: &[f64]) -> Result<Vec<f64>> {
    models.iter().map(|m| m.decision_value(x)).collect()
}

/// Primal weights of a linear-kernel model in its input space.
fn fold_linear(model: &SvmModel) -> (Vec<f64>, f64) {
    let dim = model.dimension();
    let mut w = vec![0.0; dim];
    for ((sv, a), y) in model.support_vectors.iter().zip(&model.alphas).zip(&model.sv_labels) {
        for (wk, v) in w.iter_mut().zip(sv) {
            *wk += a * y.sign() * v;
        }
    }
    let s = &model.standardizer;
    let mut bias = model.bias;
    for ((wk, scale), mean) in w.iter_mut().zip(&s.scale).zip(&s.mean) {
        *wk /= scale;
        bias -= *wk * mean;
    }
    (w, bias)
}

impl EnsembleModel {
    pub fn new(
        base_models: Vec<SvmModel>,
        weights: Vec<f64>,
        bias: f64,
        bag_fraction: f64,
        stacking_split: f64,
    ) -> Result<Self> {
        if base_models.is_empty() {
            return Err(Error::domain("ensemble needs at least one base model"));
        }
        if weights.len() != base_models.len() {
            return Err(Error::domain(format!(
                "{} combiner weights for {} base models",
                weights.len(),
                base_models.len()
            )));
        }
        let dim = base_models[0].dimension();
        if base_models.iter().any(|m| m.dimension() != dim) {
            return Err(Error::domain("base models disagree on input dimension"));
        }
        Ok(EnsembleModel {
            base_models,
            weights,
            bias,
            bag_fraction,
            stacking_split,
        })
    }

    pub fn dimension(&self) -> usize {
        self.base_models[0].dimension()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let s = base_scores(&self.base_models, x)?;
        Ok(self.weights.iter().zip(&s).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_score(self.score(x)?))
    }

    /// Manifest text naming each base model file.
    pub fn manifest(&self, base_files: &[String]) -> String {
        let mut out = String::from("coopsense-ensemble v1\n");
        let _ = writeln!(out, "bag_fraction={}", fmt_f64(self.bag_fraction));
        let _ = writeln!(out, "stacking_split={}", fmt_f64(self.stacking_split));
        let _ = writeln!(out, "bias={}", fmt_f64(self.bias));
        let _ = writeln!(out, "base_count={}", self.base_models.len());
        for (i, (w, f)) in self.weights.iter().zip(base_files).enumerate() {
            let _ = writeln!(out, "base{i}={},{f}", fmt_f64(*w));
        }
        out
    }

    /// Writes the manifest to `path` and base models beside it as
    /// `<stem>.base<i>.svm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "ensemble".into());
        let mut names = Vec::with_capacity(self.base_models.len());
        for (i, m) in self.base_models.iter().enumerate() {
            let name = format!("{stem}.base{i}.svm");
            m.save(&dir.join(&name))?;
            names.push(name);
        }
        fs::write(path, self.manifest(&names)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let err = |line: usize, message: String| Error::Parse {
            path: source.clone(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l) != Some("coopsense-ensemble v1") {
            return Err(err(1, "missing `coopsense-ensemble v1` header".into()));
        }
        let mut fields = std::collections::HashMap::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected key=value, got `{line}`")))?;
            fields.insert(k.to_string(), (i + 1, v.to_string()));
        }
        let get = |key: &str| fields.get(key).ok_or_else(|| err(0, format!("missing key `{key}`")));
        let num = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse::<f64>().map_err(|e| err(*line, format!("{key}: {e}")))
        };
        let count = {
            let (line, v) = get("base_count")?;
            v.parse::<usize>().map_err(|e| err(*line, format!("base_count: {e}")))?
        };
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let mut base_models = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for i in 0..count {
            let key = format!("base{i}");
            let (line, v) = get(&key)?;
            let (w, file) = v
                .split_once(',')
                .ok_or_else(|| err(*line, format!("{key}: expected weight,file")))?;
            weights.push(w.parse::<f64>().map_err(|e| err(*line, format!("{key}: {e}")))?);
            base_models.push(SvmModel::load(&dir.join(file))?);
        }
        EnsembleModel::new(base_models, weights, num("bias")?, num("bag_fraction")?, num("stacking_split")?)
    }
}

pub fn ensemble_score(model: &EnsembleModel, x: &[f64]) -> Result<f64> {
    model.score(x)
}

pub fn ensemble_classify(model: &EnsembleModel, x: &[f64]) -> Result<Label> {
    model.classify(x)
}
