//! Energy detection at each secondary user and fusion-center datasets.
//!
//! Noise samples are circularly-symmetric complex Gaussian with unit power.
//! Under H1 every SU receives a constant-modulus primary signal whose
//! per-sample power is the SNR drawn for that SU and event, so an event with
//! per-sample SNR `γ` carries aggregate SNR `M·γ` over the sensing window.
//! `y = 2M·Y` is then chi-square with `2M` degrees of freedom under H0 and
//! noncentral with noncentrality `2Mγ` under H1.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{draw_snr, linear_to_db, make_snr_sampler, FadingParams};
use crate::error::{Error, Result};
use crate::numerics::{marcum_q, reg_gamma_upper, QuantileTable};
use crate::rng::{substream, Stream};

/// Class label; `Present` is H1 (+1), `Absent` is H0 (−1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Absent,
    Present,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Absent => -1.0,
            Label::Present => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Absent => -1,
            Label::Present => 1,
        }
    }

    pub fn from_i64(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Present),
            -1 => Ok(Label::Absent),
            other => Err(Error::domain(format!("label must be 1 or -1, got {other}"))),
        }
    }

    /// Sign rule shared by every classifier: a score of exactly 0 is `Present`.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Present
        } else {
            Label::Absent
        }
    }
}

pub type Hypothesis = Label;

/// Source of the per-sample SNR of each SU under H1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrModel {
    Fading(FadingParams),
    /// Degenerate fading: every SU sees this per-sample SNR (linear).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingConfig {
    pub num_samples: usize,
    pub num_sus: usize,
    pub prior_h1: f64,
    pub snr: SnrModel,
}

impl SensingConfig {
    pub fn new(num_samples: usize, num_sus: usize, prior_h1: f64, fading: FadingParams) -> Result<Self> {
        let config = SensingConfig {
            num_samples,
            num_sus,
            prior_h1,
            snr: SnrModel::Fading(fading),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 1 {
            return Err(Error::domain("sensing needs M >= 1 samples"));
        }
        if self.num_sus < 1 {
            return Err(Error::domain("sensing needs N >= 1 secondary users"));
        }
        if !(0.0..=1.0).contains(&self.prior_h1) {
            return Err(Error::domain(format!(
                "prior_h1 must lie in [0, 1], got {}",
                self.prior_h1
            )));
        }
        match self.snr {
            SnrModel::Fading(p) => p.validate(),
            SnrModel::Fixed(g) if g >= 0.0 && g.is_finite() => Ok(()),
            SnrModel::Fixed(g) => Err(Error::domain(format!("fixed SNR must be >= 0, got {g}"))),
        }
    }
}

/// A sensing configuration with its SNR sampler built once.
#[derive(Debug, Clone)]
pub struct Sensor {
    config: SensingConfig,
    sampler: Option<QuantileTable>,
}

impl Sensor {
    pub fn new(config: SensingConfig) -> Result<Self> {
        config.validate()?;
        let sampler = match config.snr {
            SnrModel::Fading(p) => Some(make_snr_sampler(&p)?),
            SnrModel::Fixed(_) => None,
        };
        Ok(Sensor { config, sampler })
    }

    pub fn config(&self) -> &SensingConfig {
        &self.config
    }

    fn draw_snr<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (&self.config.snr, &self.sampler) {
            (SnrModel::Fixed(g), _) => *g,
            (SnrModel::Fading(_), Some(table)) => draw_snr(table, rng),
            (SnrModel::Fading(_), None) => unreachable!("fading sensor without sampler"),
        }
    }

    /// One sensing event: the energy statistic of every SU under `hypothesis`.
    pub fn simulate_event<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> EnergyVector {
        let m = self.config.num_samples;
        let energies = (0..self.config.num_sus)
            .map(|_| {
                let signal = match hypothesis {
                    Label::Absent => Complex64::new(0.0, 0.0),
                    Label::Present => {
                        let snr = self.draw_snr(rng);
                        let phase = rng.random::<f64>() * std::f64::consts::TAU;
                        Complex64::from_polar(snr.sqrt(), phase)
                    }
                };
                let mut acc = 0.0;
                for _ in 0..m {
                    let z = signal + complex_noise(rng);
                    acc += z.norm_sqr();
                }
                acc / m as f64
            })
            .collect();
        EnergyVector {
            energies,
            label: hypothesis,
        }
    }

    /// Draws the hypothesis from `prior_h1` and simulates the event.
    pub fn simulate_random_event<R: Rng + ?Sized>(&self, rng: &mut R) -> EnergyVector {
        let hypothesis = if rng.random::<f64>() < self.config.prior_h1 {
            Label::Present
        } else {
            Label::Absent
        };
        self.simulate_event(hypothesis, rng)
    }

    /// `count` events; event `i` uses substream `i` of `seed`.
    pub fn generate_dataset(&self, count: usize, seed: u64) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::domain("dataset size must be at least 1"));
        }
        let rows = (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng: Stream = substream(seed, i);
                self.simulate_random_event(&mut rng)
            })
            .collect();
        Ok(Dataset {
            rows,
            provenance: Some(Provenance {
                config: self.config,
                seed,
            }),
        })
    }
}

/// `E|w|² = 1`, variance 1/2 per component.
fn complex_noise<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Normalized received energy `(1/M) Σ |z(i)|²`.
pub fn energy_statistic(samples: &[Complex64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("energy statistic of an empty sample sequence"));
    }
    Ok(samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64)
}

/// Closed-form `(pd, pfa)` of a single energy detector thresholding
/// `y = 2M·Y` at `threshold`, where `n = M` and `snr` is the aggregate
/// SNR of the event (per-sample SNR times `M`).
pub fn analytic_ed_performance(n: usize, snr: f64, threshold: f64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::domain("time-bandwidth product must be >= 1"));
    }
    if !(snr >= 0.0) || !(threshold >= 0.0) {
        return Err(Error::domain(format!(
            "snr and threshold must be >= 0, got snr={snr}, threshold={threshold}"
        )));
    }
    let n = n as f64;
    let pfa = reg_gamma_upper(n, threshold / 2.0)?;
    let pd = if snr == 0.0 {
        pfa
    } else {
        marcum_q(n, (2.0 * snr).sqrt(), threshold.sqrt())?
    };
    Ok((pd, pfa))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyVector {
    pub energies: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub config: SensingConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<EnergyVector>,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    /// Builds a dataset from rows of equal dimension.
    pub fn from_rows(rows: Vec<EnergyVector>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let dim = first.energies.len();
            if rows.iter().any(|r| r.energies.len() != dim) {
                return Err(Error::domain("all dataset rows must have the same dimension"));
            }
        }
        Ok(Dataset {
            rows,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, |r| r.energies.len())
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.energies.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        self.count_label(Label::Present) > 0 && self.count_label(Label::Absent) > 0
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance,
        }
    }

    /// CSV with header `y_1,...,y_N,label`.
    pub fn to_csv(&self) -> String {
        let dim = self.dimension();
        let mut out = String::new();
        for j in 1..=dim {
            let _ = write!(out, "y_{j},");
        }
        out.push_str("label\n");
        for row in &self.rows {
            for e in &row.energies {
                out.push_str(&fmt_f64(*e));
                out.push(',');
            }
            let _ = writeln!(out, "{}", row.label.as_i8());
        }
        out
    }

    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.last() != Some(&"label") {
            return Err(parse_err(1, "last column must be `label`".into()));
        }
        let dim = columns.len() - 1;
        for (j, c) in columns[..dim].iter().enumerate() {
            if *c != format!("y_{}", j + 1) {
                return Err(parse_err(1, format!("expected column y_{}, got `{c}`", j + 1)));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(parse_err(i + 1, format!("expected {} fields, got {}", dim + 1, fields.len())));
            }
            let energies = fields[..dim]
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            let label = fields[dim]
                .trim()
                .parse::<i64>()
                .map_err(|e| parse_err(i + 1, e.to_string()))
                .and_then(|v| Label::from_i64(v).map_err(|e| parse_err(i + 1, e.to_string())))?;
            rows.push(EnergyVector { energies, label });
        }
        Dataset::from_rows(rows)
    }

    /// `key=value` sidecar describing how the dataset was generated.
    pub fn metadata(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            match p.config.snr {
                SnrModel::Fading(f) => {
                    let _ = writeln!(out, "channel=alpha_kappa_mu");
                    let _ = writeln!(out, "alpha={}", f.alpha);
                    let _ = writeln!(out, "kappa={}", f.kappa);
                    let _ = writeln!(out, "mu={}", f.mu);
                    let _ = writeln!(out, "gamma_bar_db={}", f.gamma_bar_db());
                }
                SnrModel::Fixed(g) => {
                    let _ = writeln!(out, "channel=fixed");
                    let _ = writeln!(out, "gamma_bar_db={}", linear_to_db(g));
                }
            }
            let _ = writeln!(out, "M={}", p.config.num_samples);
            let _ = writeln!(out, "N={}", p.config.num_sus);
            let _ = writeln!(out, "prior_h1={}", p.config.prior_h1);
        } else {
            let _ = writeln!(out, "N={}", self.dimension());
        }
        let _ = writeln!(out, "L={}", self.len());
        if let Some(p) = &self.provenance {
            let _ = writeln!(out, "seed={}", p.seed);
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.meta` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let meta = dir.join(format!("{stem}.meta"));
        fs::write(&meta, self.metadata()).map_err(|e| Error::io(&meta, e))?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_csv(&text, &path.display().to_string())
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(m: usize, n: usize, snr: f64) -> Sensor {
        Sensor::new(SensingConfig {
            num_samples: m,
            num_sus: n,
            prior_h1: 0.5,
            snr: SnrModel::Fixed(snr),
        })
        .unwrap()
    }

    #[test]
    fn energy_statistic_examples() {
        let zeros = vec![Complex64::new(0.0, 0.0); 8];
        assert_eq!(energy_statistic(&zeros).unwrap(), 0.0);
        let units = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert_eq!(energy_statistic(&units).unwrap(), 1.0);
        let samples = [Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let scaled: Vec<_> = samples.iter().map(|z| z * 3.0).collect();
        let ratio = energy_statistic(&scaled).unwrap() / energy_statistic(&samples).unwrap();
        assert!((ratio - 9.0).abs() < 1e-12);
        assert!(energy_statistic(&[]).is_err());
    }

    #[test]
    fn h0_mean_energy_is_one() {
        let sensor = fixed(1000, 1, 0.0);
        let mut rng = substream(5, 0);
        let mean = (0..10_000)
            .map(|_| sensor.simulate_event(Label::Absent, &mut rng).energies[0])
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn h1_mean_energy_shift() {
        // aggregate SNR 50 over M = 1000 samples
        let sensor = fixed(1000, 1, 0.05);
        let mut rng = substream(6, 0);
        let mean = (0..10_000)
            .map(|_| sensor.simulate_event(Label::Present, &mut rng).energies[0])
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 1.05).abs() < 0.005, "{mean}");
    }

    #[test]
    fn analytic_examples() {
        assert_eq!(analytic_ed_performance(4, 3.0, 0.0).unwrap(), (1.0, 1.0));
        let (pd, pfa) = analytic_ed_performance(6, 0.0, 9.0).unwrap();
        assert_eq!(pd, pfa);
        let (_, pfa) = analytic_ed_performance(1, 2.0, 2.0 * std::f64::consts::LN_2).unwrap();
        assert!((pfa - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dataset_rules() {
        let sensor = fixed(10, 3, 0.5);
        assert!(sensor.generate_dataset(0, 1).is_err());
        let a = sensor.generate_dataset(200, 42).unwrap();
        let b = sensor.generate_dataset(200, 42).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.rows.iter().all(|r| r.energies.len() == 3));
        assert_ne!(a.to_csv(), sensor.generate_dataset(200, 43).unwrap().to_csv());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let sensor = fixed(4, 2, 1.0);
        let data = sensor.generate_dataset(50, 3).unwrap();
        let text = data.to_csv();
        assert!(text.starts_with("y_1,y_2,label\n"));
        let back = Dataset::from_csv(&text, "mem").unwrap();
        assert_eq!(back.rows, data.rows);
        assert!(Dataset::from_csv("y_1,label\n0.5,2\n", "mem").is_err());
        assert!(Dataset::from_csv("y_2,label\n0.5,1\n", "mem").is_err());
    }

    #[test]
    fn metadata_keys() {
        let fading = FadingParams::from_db(2.0, 2.0, 2.0, 0.0).unwrap();
        let sensor = Sensor::new(SensingConfig::new(8, 3, 0.5, fading).unwrap()).unwrap();
        let data = sensor.generate_dataset(20, 9).unwrap();
        let meta = data.metadata();
        for key in ["alpha=2", "kappa=2", "mu=2", "gamma_bar_db=0", "M=8", "N=3", "prior_h1=0.5", "L=20", "seed=9"] {
            assert!(meta.lines().any(|l| l == key), "missing {key} in\n{meta}");
        }
    }

    #[test]
    fn invalid_configs() {
        let f = FadingParams::rayleigh(1.0).unwrap();
        assert!(SensingConfig::new(0, 3, 0.5, f).is_err());
        assert!(SensingConfig::new(5, 0, 0.5, f).is_err());
        assert!(SensingConfig::new(5, 3, 1.5, f).is_err());
    }
}
