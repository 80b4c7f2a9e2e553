//! Python bindings. Built as the `coopsense` extension module.

use std::path::PathBuf;

use coopsense::channel;
use coopsense::ensemble::{self, EnsembleConfig};
use coopsense::eval;
use coopsense::experiment::{self, ExperimentConfig};
use coopsense::fusion::{self, FusionRule};
use coopsense::numerics;
use coopsense::rng::substream;
use coopsense::sensing::{self, EnergyVector, Label, SensingConfig, Sensor};
use coopsense::svm::{self, KernelSpec, SmoParams};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(coopsense, CoopsenseError, PyException);

fn py_err(e: coopsense::Error) -> PyErr {
    CoopsenseError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for coopsense::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn label(v: i64) -> PyResult<Label> {
    Label::from_i64(v).py()
}

fn kernel(name: &str, degree: u32, sigma: f64) -> PyResult<KernelSpec> {
    let k = match name {
        "linear" => KernelSpec::Linear,
        "poly" | "polynomial" => KernelSpec::Polynomial { degree },
        "rbf" => KernelSpec::Rbf { sigma },
        other => {
            return Err(CoopsenseError::new_err(format!("unknown kernel {other:?}")));
        }
    };
    k.validate().py()?;
    Ok(k)
}

#[pyclass(name = "FadingParams", frozen)]
struct PyFadingParams(channel::FadingParams);

#[pymethods]
impl PyFadingParams {
    #[new]
    #[pyo3(signature = (alpha, kappa, mu, gamma_bar_db))]
    fn new(alpha: f64, kappa: f64, mu: f64, gamma_bar_db: f64) -> PyResult<Self> {
        Ok(Self(channel::FadingParams::from_db(alpha, kappa, mu, gamma_bar_db).py()?))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }

    #[getter]
    fn gamma_bar(&self) -> f64 {
        self.0.gamma_bar
    }

    #[getter]
    fn gamma_bar_db(&self) -> f64 {
        self.0.gamma_bar_db()
    }

    fn pdf(&self, gamma: f64) -> PyResult<f64> {
        channel::snr_pdf(&self.0, gamma).py()
    }

    /// `count` SNR draws from substream `seed`.
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<f64>> {
        let table = channel::make_snr_sampler(&self.0).py()?;
        Ok(channel::sample_snr(&table, &mut substream(seed, 0), count))
    }

    fn __repr__(&self) -> String {
        format!(
            "FadingParams(alpha={}, kappa={}, mu={}, gamma_bar_db={})",
            self.0.alpha,
            self.0.kappa,
            self.0.mu,
            self.0.gamma_bar_db()
        )
    }
}

#[pyfunction]
fn snr_pdf(params: &PyFadingParams, gamma: f64) -> PyResult<f64> {
    channel::snr_pdf(&params.0, gamma).py()
}

#[pyfunction]
fn marcum_q(m: f64, a: f64, b: f64) -> PyResult<f64> {
    numerics::marcum_q(m, a, b).py()
}

#[pyfunction]
fn log_besseli(order: f64, x: f64) -> PyResult<f64> {
    numerics::log_besseli(order, x).py()
}

#[pyfunction]
fn reg_gamma_upper(shape: f64, x: f64) -> PyResult<f64> {
    numerics::reg_gamma_upper(shape, x).py()
}

/// Returns `(pd, pfa)` of a single detector with `n` samples at total SNR `snr`.
#[pyfunction]
fn analytic_ed_performance(n: usize, snr: f64, threshold: f64) -> PyResult<(f64, f64)> {
    sensing::analytic_ed_performance(n, snr, threshold).py()
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset(sensing::Dataset);

#[pymethods]
impl PyDataset {
    /// Rows of normalized energies plus labels in {-1, +1}.
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<i64>) -> PyResult<Self> {
        if features.len() != labels.len() {
            return Err(CoopsenseError::new_err(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let rows = features
            .into_iter()
            .zip(labels)
            .map(|(energies, l)| Ok(EnergyVector { energies, label: label(l)? }))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self(sensing::Dataset::from_rows(rows).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (fading, num_samples, num_sus, count, seed, prior_h1 = 0.5))]
    fn generate(
        fading: &PyFadingParams,
        num_samples: usize,
        num_sus: usize,
        count: usize,
        seed: u64,
        prior_h1: f64,
    ) -> PyResult<Self> {
        let config = SensingConfig::new(num_samples, num_sus, prior_h1, fading.0).py()?;
        let sensor = Sensor::new(config).py()?;
        Ok(Self(sensor.generate_dataset(count, seed).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(sensing::Dataset::load_csv(&path).py()?))
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.meta`.
    fn save(&self, dir: PathBuf, stem: &str) -> PyResult<()> {
        self.0.save(&dir, stem).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.0.rows.iter().map(|r| r.energies.clone()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<i8> {
        self.0.rows.iter().map(|r| r.label.as_i8()).collect()
    }
}

#[pyclass(name = "SvmModel", frozen)]
struct PySvmModel(svm::SvmModel);

#[pymethods]
impl PySvmModel {
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (data, kernel_name = "rbf", degree = 2, sigma = 1.0, theta = 1.0, tol = 1e-3, max_passes = 10))]
    fn train(
        py: Python<'_>,
        data: &PyDataset,
        kernel_name: &str,
        degree: u32,
        sigma: f64,
        theta: f64,
        tol: f64,
        max_passes: usize,
    ) -> PyResult<Self> {
        let k = kernel(kernel_name, degree, sigma)?;
        let params = SmoParams {
            tol,
            max_passes,
            ..SmoParams::with_theta(theta)
        };
        let model = py.detach(|| svm::train_smo(&data.0, k, &params)).py()?;
        Ok(Self(model))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(svm::SvmModel::load(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    fn decision_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.decision_value(&x).py()
    }

    fn classify(&self, x: Vec<f64>) -> PyResult<i8> {
        Ok(self.0.classify(&x).py()?.as_i8())
    }

    fn scores(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        data.0.rows.iter().map(|r| self.0.decision_value(&r.energies).py()).collect()
    }

    fn kkt_violation(&self, data: &PyDataset) -> PyResult<f64> {
        svm::kkt_violation(&self.0, &data.0).py()
    }

    fn dual_objective(&self) -> f64 {
        self.0.dual_objective()
    }

    #[getter]
    fn kernel(&self) -> &'static str {
        self.0.kernel.name()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias
    }

    #[getter]
    fn num_support_vectors(&self) -> usize {
        self.0.alphas.len()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }
}

#[pyclass(name = "EnsembleModel", frozen)]
struct PyEnsembleModel(ensemble::EnsembleModel);

#[pymethods]
impl PyEnsembleModel {
    /// Bags of linear, degree-2 polynomial and rbf bases with a linear combiner.
    #[staticmethod]
    #[pyo3(signature = (data, seed, b_per_spec = 3, bag_fraction = 1.0, stacking_split = 0.2))]
    fn train(
        py: Python<'_>,
        data: &PyDataset,
        seed: u64,
        b_per_spec: usize,
        bag_fraction: f64,
        stacking_split: f64,
    ) -> PyResult<Self> {
        let config = EnsembleConfig {
            b_per_spec,
            bag_fraction,
            stacking_split,
            ..EnsembleConfig::default()
        };
        let model = py.detach(|| ensemble::train_ensemble(&data.0, &config, seed)).py()?;
        Ok(Self(model))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(ensemble::EnsembleModel::load(&path).py()?))
    }

    /// Writes the manifest and one `.svm` file per base beside it.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.score(&x).py()
    }

    fn classify(&self, x: Vec<f64>) -> PyResult<i8> {
        Ok(self.0.classify(&x).py()?.as_i8())
    }

    fn scores(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        data.0.rows.iter().map(|r| self.0.score(&r.energies).py()).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias
    }

    #[getter]
    fn num_bases(&self) -> usize {
        self.0.base_models.len()
    }
}

fn labels_of(labels: &[i64]) -> PyResult<Vec<Label>> {
    labels.iter().map(|&l| label(l)).collect()
}

/// Returns `(points, auc)` where `points` is a list of `(pfa, pd)`.
#[pyfunction]
fn roc_curve(scores: Vec<f64>, labels: Vec<i64>) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let curve = eval::roc_curve(&scores, &labels_of(&labels)?).py()?;
    Ok((curve.points, curve.auc))
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<i64>) -> PyResult<f64> {
    Ok(eval::roc_curve(&scores, &labels_of(&labels)?).py()?.auc)
}

#[pyfunction]
fn pd_at_pfa(scores: Vec<f64>, labels: Vec<i64>, target: f64) -> PyResult<f64> {
    Ok(eval::roc_curve(&scores, &labels_of(&labels)?).py()?.pd_at_pfa(target))
}

#[pyfunction]
fn binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    fusion::binomial_tail(n, p, k)
}

/// System `(pd, pfa)` of the k-out-of-n rule from local rates.
#[pyfunction]
fn fusion_system_curve(p_d: f64, p_fa: f64, n: usize, k: usize) -> PyResult<(f64, f64)> {
    fusion::fusion_system_curve(p_d, p_fa, n, k).py()
}

/// Per-row scores whose ROC is the k-out-of-n rule over all local thresholds.
#[pyfunction]
fn fusion_scores(data: &PyDataset, k: usize) -> PyResult<Vec<f64>> {
    let rule = FusionRule::new(k, data.0.dimension()).py()?;
    fusion::fusion_scores(&data.0, rule).py()
}

#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_json()
}

/// Runs a full experiment from a JSON config. With `out_dir` the artifacts are
/// written there. Returns `[(classifier, auc, pd_at_pfa_0.1)]`.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None))]
fn run(py: Python<'_>, config_json: &str, out_dir: Option<PathBuf>) -> PyResult<Vec<(String, f64, f64)>> {
    let config = ExperimentConfig::from_json(config_json).py()?;
    let outcome = py
        .detach(|| match &out_dir {
            Some(dir) => experiment::run(&config, dir),
            None => experiment::run_in_memory(&config),
        })
        .py()?;
    Ok(outcome
        .rows
        .into_iter()
        .map(|r| (r.classifier, r.auc, r.pd_at_pfa))
        .collect())
}

#[pymodule]
#[pyo3(name = "coopsense")]
fn coopsense_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CoopsenseError", m.py().get_type::<CoopsenseError>())?;
    m.add_class::<PyFadingParams>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySvmModel>()?;
    m.add_class::<PyEnsembleModel>()?;
    m.add_function(wrap_pyfunction!(snr_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(marcum_q, m)?)?;
    m.add_function(wrap_pyfunction!(log_besseli, m)?)?;
    m.add_function(wrap_pyfunction!(reg_gamma_upper, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_ed_performance, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(pd_at_pfa, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_tail, m)?)?;
    m.add_function(wrap_pyfunction!(fusion_system_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fusion_scores, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
