//! Soft-margin kernel SVM trained on the dual problem.
//!
//! The dual
//!
//! ```text
//! max  W(α) = Σ α_i − ½ Σ_i Σ_j y_i y_j α_i α_j k(x_i, x_j)
//! s.t. Σ y_i α_i = 0,  0 ≤ α_i ≤ θ
//! ```
//!
//! is solved by sequential two-variable updates. Each step picks the maximal
//! violating index `i` and the partner `j` with the largest second-order
//! gain, updates the pair analytically inside the box, and keeps the
//! gradient of the objective current. Training stops once the maximal KKT
//! violation gap is below `tol`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sensing::{fmt_f64, Dataset, Label};

/// Second-order curvature floor for duplicate or collinear pairs.
const TAU: f64 = 1e-12;
/// Gram matrices above this many rows are not cached.
pub const GRAM_CACHE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32 },
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree } if degree >= 2 => Ok(()),
            KernelSpec::Polynomial { degree } => Err(Error::domain(format!(
                "polynomial kernel needs degree >= 2, got {degree}"
            ))),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Rbf { sigma } => Err(Error::domain(format!(
                "rbf kernel needs sigma > 0, got {sigma}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    #[inline]
    fn apply(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree } => (dot(x, y) + 1.0).powi(degree as i32),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "kernel arguments differ in dimension: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    kernel.validate()?;
    Ok(kernel.apply(x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoParams {
    /// Soft-margin constant, the upper bound of every multiplier.
    pub theta: f64,
    pub tol: f64,
    /// Consecutive sweeps (one sweep = `L` pair updates) without any change in
    /// the dual objective before training is declared stalled.
    pub max_passes: usize,
    /// Cap on sweeps.
    pub max_sweeps: usize,
    /// Z-score features with training statistics before kernel evaluation.
    pub standardize: bool,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            theta: 1.0,
            tol: 1e-3,
            max_passes: 10,
            max_sweeps: 100_000,
            standardize: true,
        }
    }
}

impl SmoParams {
    pub fn with_theta(theta: f64) -> Self {
        SmoParams {
            theta,
            ..Default::default()
        }
    }

    pub fn raw(mut self) -> Self {
        self.standardize = false;
        self
    }
}

/// Per-dimension affine map `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.scale.iter().all(|&s| s == 1.0)
    }
}

/// A trained classifier. Support vectors are stored in kernel-input
/// (standardized) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub theta: f64,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub sv_labels: Vec<Label>,
    /// Position of each support vector in the training set.
    pub sv_indices: Vec<usize>,
    /// Size of the training set the multipliers refer to.
    pub training_size: usize,
}

impl SvmModel {
    pub fn dimension(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::domain(format!(
                "query has dimension {}, model expects {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// Pre-sign score `Σ α_i y_i k(x, x_i) + β`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let z = self.standardizer.apply(x);
        Ok(self.score_standardized(&z))
    }

    fn score_standardized(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.sv_labels)
            .map(|((sv, a), y)| a * y.sign() * self.kernel.apply(sv, z))
            .sum::<f64>()
            + self.bias
    }

    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_score(self.decision_value(x)?))
    }

    /// Gradient of [`SvmModel::decision_value`] with respect to the raw query.
    pub fn decision_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let z = self.standardizer.apply(x);
        let mut grad = vec![0.0; z.len()];
        for ((sv, a), y) in self.support_vectors.iter().zip(&self.alphas).zip(&self.sv_labels) {
            let c = a * y.sign();
            match self.kernel {
                KernelSpec::Linear => {
                    for (g, s) in grad.iter_mut().zip(sv) {
                        *g += c * s;
                    }
                }
                KernelSpec::Polynomial { degree } => {
                    let d = degree as f64;
                    let f = d * (dot(sv, &z) + 1.0).powi(degree as i32 - 1);
                    for (g, s) in grad.iter_mut().zip(sv) {
                        *g += c * f * s;
                    }
                }
                KernelSpec::Rbf { sigma } => {
                    let k = self.kernel.apply(sv, &z);
                    for ((g, s), zi) in grad.iter_mut().zip(sv).zip(&z) {
                        *g += c * k * (s - zi) / (sigma * sigma);
                    }
                }
            }
        }
        for (g, s) in grad.iter_mut().zip(&self.standardizer.scale) {
            *g /= s;
        }
        Ok(grad)
    }

    /// Dual objective `W(α)` over the stored multipliers.
    pub fn dual_objective(&self) -> f64 {
        let n = self.alphas.len();
        let mut quad = 0.0;
        for i in 0..n {
            let ci = self.alphas[i] * self.sv_labels[i].sign();
            for j in 0..n {
                let cj = self.alphas[j] * self.sv_labels[j].sign();
                quad += ci * cj * self.kernel.apply(&self.support_vectors[i], &self.support_vectors[j]);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    /// Multiplier of every training point (zero off the support set).
    pub fn full_alphas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.training_size];
        for (&i, &a) in self.sv_indices.iter().zip(&self.alphas) {
            if i < out.len() {
                out[i] = a;
            }
        }
        out
    }

    /// Largest KKT residual over the training set (see [`kkt_violation`]).
    pub fn kkt_violation(&self, data: &[&[f64]], labels: &[Label]) -> Result<f64> {
        if data.len() != self.training_size || labels.len() != data.len() {
            return Err(Error::domain(format!(
                "model was trained on {} rows, got {} rows and {} labels",
                self.training_size,
                data.len(),
                labels.len()
            )));
        }
        let alphas = self.full_alphas();
        let bound = self.theta * (1.0 - 1e-12);
        let mut worst = 0.0_f64;
        for ((x, y), a) in data.iter().zip(labels).zip(alphas) {
            let margin = y.sign() * self.decision_value(x)?;
            let residual = if a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if a >= bound {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(residual);
        }
        Ok(worst)
    }

    /// Self-describing text form; every float printed with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::from("coopsense-svm v1\n");
        let _ = writeln!(out, "kernel={}", self.kernel.name());
        match self.kernel {
            KernelSpec::Polynomial { degree } => {
                let _ = writeln!(out, "degree={degree}");
            }
            KernelSpec::Rbf { sigma } => {
                let _ = writeln!(out, "sigma={}", fmt_f64(sigma));
            }
            KernelSpec::Linear => {}
        }
        let _ = writeln!(out, "theta={}", fmt_f64(self.theta));
        let _ = writeln!(out, "bias={}", fmt_f64(self.bias));
        let _ = writeln!(out, "dimension={}", self.dimension());
        let _ = writeln!(out, "mean={}", join(&self.standardizer.mean));
        let _ = writeln!(out, "scale={}", join(&self.standardizer.scale));
        let _ = writeln!(out, "training_size={}", self.training_size);
        let _ = writeln!(
            out,
            "sv_index={}",
            self.sv_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(out, "sv_count={}", self.alphas.len());
        out.push_str("support_vectors\n");
        for ((sv, a), y) in self.support_vectors.iter().zip(&self.alphas).zip(&self.sv_labels) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*a), y.as_i8(), join(sv));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "coopsense-svm v1")) => {}
            _ => return Err(err(1, "missing `coopsense-svm v1` header".into())),
        }
        let mut header = std::collections::HashMap::new();
        let mut body_start = None;
        for (i, line) in lines.by_ref() {
            if line == "support_vectors" {
                body_start = Some(i);
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected key=value, got `{line}`")))?;
            header.insert(k.to_string(), (i + 1, v.to_string()));
        }
        let body_start = body_start.ok_or_else(|| err(0, "missing `support_vectors` section".into()))?;
        let get = |key: &str| {
            header
                .get(key)
                .ok_or_else(|| err(0, format!("missing key `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse::<f64>().map_err(|e| err(*line, format!("{key}: {e}")))
        };
        let count = |key: &str| -> Result<usize> {
            let (line, v) = get(key)?;
            v.parse::<usize>().map_err(|e| err(*line, format!("{key}: {e}")))
        };
        let floats = |key: &str| -> Result<Vec<f64>> {
            let (line, v) = get(key)?;
            parse_list(v).map_err(|e| err(*line, format!("{key}: {e}")))
        };

        let kernel = match get("kernel")?.1.as_str() {
            "linear" => KernelSpec::Linear,
            "polynomial" => KernelSpec::Polynomial {
                degree: count("degree")? as u32,
            },
            "rbf" => KernelSpec::Rbf { sigma: num("sigma")? },
            other => return Err(err(get("kernel")?.0, format!("unknown kernel `{other}`"))),
        };
        kernel.validate()?;
        let dimension = count("dimension")?;
        let standardizer = Standardizer {
            mean: floats("mean")?,
            scale: floats("scale")?,
        };
        if standardizer.mean.len() != dimension || standardizer.scale.len() != dimension {
            return Err(err(0, "standardization vectors do not match dimension".into()));
        }
        let sv_indices = {
            let (line, v) = get("sv_index")?;
            if v.is_empty() {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(*line, format!("sv_index: {e}")))?
            }
        };
        let sv_count = count("sv_count")?;

        let mut support_vectors = Vec::with_capacity(sv_count);
        let mut alphas = Vec::with_capacity(sv_count);
        let mut sv_labels = Vec::with_capacity(sv_count);
        for (i, line) in text.lines().enumerate().skip(body_start + 1) {
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<&str> = line.split(',').collect();
            if values.len() != dimension + 2 {
                return Err(err(i + 1, format!("expected {} fields", dimension + 2)));
            }
            alphas.push(values[0].parse::<f64>().map_err(|e| err(i + 1, e.to_string()))?);
            let y = values[1].parse::<i64>().map_err(|e| err(i + 1, e.to_string()))?;
            sv_labels.push(Label::from_i64(y)?);
            support_vectors.push(
                values[2..]
                    .iter()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(i + 1, e.to_string()))?,
            );
        }
        if alphas.len() != sv_count || sv_indices.len() != sv_count {
            return Err(err(0, format!("expected {sv_count} support vectors")));
        }
        Ok(SvmModel {
            kernel,
            theta: num("theta")?,
            bias: num("bias")?,
            standardizer,
            support_vectors,
            alphas,
            sv_labels,
            sv_indices,
            training_size: count("training_size")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SvmModel::from_text(&text, &path.display().to_string())
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| s.parse::<f64>()).collect()
}

/// Trains on a sensing dataset.
pub fn train_smo(data: &Dataset, kernel: KernelSpec, params: &SmoParams) -> Result<SvmModel> {
    let features = data.features();
    let labels = data.labels();
    train(&features, &labels, kernel, params)
}

/// Largest KKT residual of `model` over its training set:
/// `max(0, 1 − y f)` where `α = 0`, `|y f − 1|` where `0 < α < θ`,
/// `max(0, y f − 1)` where `α = θ`.
pub fn kkt_violation(model: &SvmModel, data: &Dataset) -> Result<f64> {
    model.kkt_violation(&data.features(), &data.labels())
}

pub fn dual_objective(model: &SvmModel) -> f64 {
    model.dual_objective()
}

enum Gram {
    Full { n: usize, values: Vec<f64> },
    OnDemand,
}

struct Problem<'a> {
    x: Vec<Vec<f64>>,
    y: &'a [f64],
    kernel: KernelSpec,
    gram: Gram,
    diag: Vec<f64>,
}

impl Problem<'_> {
    /// Row `i` of `K` written into `buf` unless cached.
    fn row<'b>(&'b self, i: usize, buf: &'b mut Vec<f64>) -> &'b [f64] {
        match &self.gram {
            Gram::Full { n, values } => &values[i * n..(i + 1) * n],
            Gram::OnDemand => {
                buf.clear();
                buf.extend(self.x.iter().map(|xj| self.kernel.apply(&self.x[i], xj)));
                buf
            }
        }
    }
}

/// Trains on raw feature rows and labels.
pub fn train(features: &[&[f64]], labels: &[Label], kernel: KernelSpec, params: &SmoParams) -> Result<SvmModel> {
    kernel.validate()?;
    if !(params.theta > 0.0) || !params.theta.is_finite() {
        return Err(Error::domain(format!("theta must be > 0, got {}", params.theta)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::domain(format!("tol must be > 0, got {}", params.tol)));
    }
    if features.len() != labels.len() {
        return Err(Error::domain("features and labels differ in length"));
    }
    if features.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|r| r.len() != dim) {
        return Err(Error::domain("training rows must share a nonzero dimension"));
    }
    if features.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::domain("training features must be finite"));
    }
    let positives = labels.iter().filter(|l| **l == Label::Present).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Training(
            "training data contains a single class; both labels are required".into(),
        ));
    }

    let standardizer = if params.standardize {
        Standardizer::fit(features)
    } else {
        Standardizer::identity(dim)
    };
    let x: Vec<Vec<f64>> = features.iter().map(|r| standardizer.apply(r)).collect();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let n = x.len();
    let gram = if n <= GRAM_CACHE_LIMIT {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel.apply(&x[i], &x[j]);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Gram::Full { n, values }
    } else {
        Gram::OnDemand
    };
    let diag = x.iter().map(|xi| kernel.apply(xi, xi)).collect();
    let problem = Problem {
        x,
        y: &y,
        kernel,
        gram,
        diag,
    };

    let alpha = solve(&problem, params)?;
    let Problem { x, .. } = problem;
    let bias = alpha.bias;

    let mut model = SvmModel {
        kernel,
        theta: params.theta,
        bias,
        standardizer,
        support_vectors: Vec::new(),
        alphas: Vec::new(),
        sv_labels: Vec::new(),
        sv_indices: Vec::new(),
        training_size: n,
    };
    for (i, (a, xi)) in alpha.values.into_iter().zip(x).enumerate() {
        if a > 0.0 {
            model.support_vectors.push(xi);
            model.alphas.push(a);
            model.sv_labels.push(labels[i]);
            model.sv_indices.push(i);
        }
    }
    Ok(model)
}

struct Solution {
    values: Vec<f64>,
    bias: f64,
}

fn solve(p: &Problem<'_>, params: &SmoParams) -> Result<Solution> {
    let n = p.y.len();
    let c = params.theta;
    let y = p.y;
    let mut alpha = vec![0.0; n];
    // gradient of f(α) = ½ αᵀQα − eᵀα with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let mut buf_i = Vec::new();
    let mut buf_j = Vec::new();

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        // f = ½ Σ α_i (G_i − 1); the dual objective W is −f
        -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };

    let max_iter = params.max_sweeps.saturating_mul(n.max(1));
    let mut iter = 0usize;
    let mut stalled_sweeps = 0usize;
    let mut last_objective = 0.0;
    let mut gap;
    loop {
        // working-set selection
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_gain = f64::INFINITY;
        let row_i = if i_sel != usize::MAX {
            Some(p.row(i_sel, &mut buf_i).to_vec())
        } else {
            None
        };
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            if v < gmin {
                gmin = v;
            }
            if let Some(ki) = &row_i {
                let b = gmax - v;
                if b > 0.0 {
                    let a = p.diag[i_sel] + p.diag[t] - 2.0 * ki[t];
                    let a = if a > 0.0 { a } else { TAU };
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if gap < params.tol || j_sel == usize::MAX {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                max_violation: gap,
                objective: objective(&alpha, &grad),
            });
        }

        let (i, j) = (i_sel, j_sel);
        let ki = row_i.expect("working index selected");
        let kij = ki[j];
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_ai, old_aj);
        if y[i] != y[j] {
            let quad = (p.diag[i] + p.diag[j] - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (p.diag[i] + p.diag[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let dai = (ai - old_ai) * y[i];
        let daj = (aj - old_aj) * y[j];
        let kj = p.row(j, &mut buf_j);
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * dai + kj[t] * daj);
        }

        iter += 1;
        if iter.is_multiple_of(n.max(1)) {
            let obj = objective(&alpha, &grad);
            if (obj - last_objective).abs() <= 1e-15 * obj.abs().max(1.0) {
                stalled_sweeps += 1;
                if stalled_sweeps >= params.max_passes {
                    return Err(Error::NonConvergence {
                        iterations: iter,
                        max_violation: gap,
                        objective: obj,
                    });
                }
            } else {
                stalled_sweeps = 0;
            }
            last_objective = obj;
        }
    }

    Ok(Solution {
        bias: compute_bias(&alpha, &grad, y, c),
        values: alpha,
    })
}

/// Average of `−y_i G_i` over free multipliers, or the midpoint of the
/// feasible interval when every multiplier sits at a bound.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (upper + lower)
    };
    -rho
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> SvmModel {
        let x: [&[f64]; 2] = [&[0.0], &[2.0]];
        train(&x, &[Label::Absent, Label::Present], KernelSpec::Linear, &SmoParams::with_theta(100.0).raw()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(kernel_eval(&KernelSpec::Rbf { sigma: 0.3 }, &[1.0, -2.0], &[1.0, -2.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::Polynomial { degree: 2 }, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 4.0);
        assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::Polynomial { degree: 1 }.validate().is_err());
        assert!(KernelSpec::Rbf { sigma: 0.0 }.validate().is_err());
    }

    #[test]
    fn two_point_solution() {
        let m = two_point();
        let full = m.full_alphas();
        assert!((full[0] - 0.5).abs() < 1e-6 && (full[1] - 0.5).abs() < 1e-6, "{full:?}");
        assert!((m.bias + 1.0).abs() < 1e-6);
        assert!((m.decision_value(&[0.0]).unwrap() + 1.0).abs() < 1e-6);
        assert!(m.decision_value(&[1.0]).unwrap().abs() < 1e-6);
        assert_eq!(m.classify(&[2.0]).unwrap(), Label::Present);
        assert_eq!(m.classify(&[-5.0]).unwrap(), Label::Absent);
        assert!((m.dual_objective() - 0.5).abs() < 1e-6);
        // primal ½‖w‖² with w = Σ α_i y_i x_i = 1
        let w: f64 = m.support_vectors.iter().zip(&m.alphas).zip(&m.sv_labels).map(|((s, a), y)| a * y.sign() * s[0]).sum();
        assert!((m.dual_objective() - 0.5 * w * w).abs() < 1e-6);
        let x: [&[f64]; 2] = [&[0.0], &[2.0]];
        assert!(m.kkt_violation(&x, &[Label::Absent, Label::Present]).unwrap() < 1e-6);
    }

    #[test]
    fn symmetric_pair_has_zero_bias() {
        let x: [&[f64]; 2] = [&[-1.5, 0.5, 2.0], &[1.5, -0.5, -2.0]];
        let m = train(&x, &[Label::Absent, Label::Present], KernelSpec::Linear, &SmoParams::default().raw()).unwrap();
        assert!(m.bias.abs() < 1e-6);
    }

    #[test]
    fn zeroed_alphas_violate_margins() {
        let mut m = two_point();
        m.alphas.clear();
        m.support_vectors.clear();
        m.sv_labels.clear();
        m.sv_indices.clear();
        let x: [&[f64]; 2] = [&[0.0], &[2.0]];
        assert!(m.kkt_violation(&x, &[Label::Absent, Label::Present]).unwrap() >= 1.0);
        assert_eq!(m.dual_objective(), 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let x: [&[f64]; 2] = [&[0.0], &[2.0]];
        let err = train(&x, &[Label::Present, Label::Present], KernelSpec::Linear, &SmoParams::default()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn tie_breaks_to_present() {
        let mut m = two_point();
        m.bias = 0.0;
        m.alphas = vec![0.0; m.alphas.len()];
        assert_eq!(m.decision_value(&[3.0]).unwrap(), 0.0);
        assert_eq!(m.classify(&[3.0]).unwrap(), Label::Present);
    }

    #[test]
    fn text_round_trip() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() * 2.0]).collect();
        let rows: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
        let labels: Vec<Label> = x.iter().map(|r| Label::from_score(r[0] + 0.3 * r[1])).collect();
        for kernel in [KernelSpec::Linear, KernelSpec::Polynomial { degree: 3 }, KernelSpec::Rbf { sigma: 0.7 }] {
            let m = train(&rows, &labels, kernel, &SmoParams::with_theta(5.0)).unwrap();
            let back = SvmModel::from_text(&m.to_text(), "mem").unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_text(), m.to_text());
        }
        assert!(SvmModel::from_text("nonsense", "mem").is_err());
    }

    #[test]
    fn on_demand_gram_matches_cached() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 0.71).sin(), (i as f64 * 0.23).cos()]).collect();
        let labels: Vec<Label> = x.iter().map(|r| Label::from_score(r[0] * r[1])).collect();
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let kernel = KernelSpec::Rbf { sigma: 0.5 };
        let diag = x.iter().map(|xi| kernel.apply(xi, xi)).collect::<Vec<_>>();
        let n = x.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = kernel.apply(&x[i], &x[j]);
            }
        }
        let params = SmoParams::with_theta(2.0);
        let cached = solve(&Problem { x: x.clone(), y: &y, kernel, gram: Gram::Full { n, values }, diag: diag.clone() }, &params).unwrap();
        let lazy = solve(&Problem { x, y: &y, kernel, gram: Gram::OnDemand, diag }, &params).unwrap();
        assert_eq!(cached.values, lazy.values);
        assert_eq!(cached.bias, lazy.bias);
    }
}
