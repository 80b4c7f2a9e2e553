//! The α-κ-μ fading model for the instantaneous received SNR.
//!
//! With `r = γ/γ̄` and `s = √r`, the SNR density is
//!
//! ```text
//!            μ α κ^((1-μ)/2) (1+κ)^((1+μ)/2) s^(α/2 + αμ/2 - 1)
//! f(γ) = ---------------------------------------------------------  I_{μ-1}(2μ √(κ(1+κ)) s^(α/2))
//!              2 √(γ γ̄) exp[μ(κ + (1+κ) s^α)]
//! ```
//!
//! It reduces to Rician (α=2, μ=1), Nakagami-m (α=2, κ→0, μ=m), Rayleigh
//! (α=2, μ=1, κ→0) and the α-μ law (κ→0). Below `κ = 1e-6` the κ→0 limit is
//! evaluated in closed form because the prefactor `κ^((1-μ)/2)` alone diverges.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{build_quantile_table, integrate_on_grid, ln_gamma, log_besseli, QuantileTable};

/// κ below which the analytic κ→0 limit is used.
pub const KAPPA_LIMIT: f64 = 1e-6;

const SAMPLER_POINTS: usize = 8192;
const SAMPLER_LO: f64 = 1e-8;
const SAMPLER_MASS: f64 = 1.0 - 1e-6;
const SAMPLER_MAX_DOUBLINGS: usize = 40;

/// α-κ-μ channel parameters. `gamma_bar` is linear, not dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub alpha: f64,
    pub kappa: f64,
    pub mu: f64,
    pub gamma_bar: f64,
}

impl FadingParams {
    pub fn new(alpha: f64, kappa: f64, mu: f64, gamma_bar: f64) -> Result<Self> {
        let params = FadingParams {
            alpha,
            kappa,
            mu,
            gamma_bar,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same as [`FadingParams::new`] with the average SNR given in dB.
    pub fn from_db(alpha: f64, kappa: f64, mu: f64, gamma_bar_db: f64) -> Result<Self> {
        Self::new(alpha, kappa, mu, db_to_linear(gamma_bar_db))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.mu > 0.0
            && self.kappa >= 0.0
            && self.gamma_bar > 0.0
            && [self.alpha, self.kappa, self.mu, self.gamma_bar]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "fading parameters need alpha > 0, kappa >= 0, mu > 0, gamma_bar > 0; got {self}"
            )))
        }
    }

    pub fn gamma_bar_db(&self) -> f64 {
        linear_to_db(self.gamma_bar)
    }

    pub fn rayleigh(gamma_bar: f64) -> Result<Self> {
        Self::new(2.0, 0.0, 1.0, gamma_bar)
    }

    pub fn rician(k_factor: f64, gamma_bar: f64) -> Result<Self> {
        Self::new(2.0, k_factor, 1.0, gamma_bar)
    }

    pub fn nakagami(m: f64, gamma_bar: f64) -> Result<Self> {
        Self::new(2.0, 0.0, m, gamma_bar)
    }
}

impl std::fmt::Display for FadingParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "alpha={}, kappa={}, mu={}, gamma_bar={}",
            self.alpha, self.kappa, self.mu, self.gamma_bar
        )
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// `ln f(γ)`; `-inf` where the density vanishes.
pub fn ln_snr_pdf(params: &FadingParams, gamma: f64) -> Result<f64> {
    params.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "snr_pdf requires finite gamma > 0, got {gamma}"
        )));
    }
    let FadingParams {
        alpha,
        kappa,
        mu,
        gamma_bar,
    } = *params;
    let ln_r = (gamma / gamma_bar).ln();
    // s^α = r^(α/2)
    let s_alpha = (0.5 * alpha * ln_r).exp();

    if kappa < KAPPA_LIMIT {
        // α-μ law: α μ^μ r^(αμ/2) / (2 γ Γ(μ)) · exp(-μ r^(α/2))
        return Ok(alpha.ln() + mu * mu.ln() + 0.5 * alpha * mu * ln_r
            - std::f64::consts::LN_2
            - gamma.ln()
            - ln_gamma(mu)
            - mu * s_alpha);
    }

    let ln_s = 0.5 * ln_r;
    let bessel_arg = 2.0 * mu * (kappa * (1.0 + kappa)).sqrt() * (0.5 * alpha * ln_s).exp();
    let order = mu - 1.0;
    let ln_bessel = if order >= 0.0 {
        log_besseli(order, bessel_arg)?
    } else {
        ln_besseli_negative_order(order, bessel_arg)?
    };

    Ok(mu.ln() + alpha.ln() + 0.5 * (1.0 - mu) * kappa.ln() + 0.5 * (1.0 + mu) * (1.0 + kappa).ln()
        + (0.5 * alpha + 0.5 * alpha * mu - 1.0) * ln_s
        - std::f64::consts::LN_2
        - 0.5 * (gamma * gamma_bar).ln()
        - mu * (kappa + (1.0 + kappa) * s_alpha)
        + ln_bessel)
}

/// `ln I_ν(x)` for fractional `-1 < ν < 0`, from the power series, which
/// stays positive for these orders.
fn ln_besseli_negative_order(order: f64, x: f64) -> Result<f64> {
    debug_assert!(order > -1.0 && order < 0.0);
    // I_ν(x) = Σ (x/2)^(2k+ν) / (k! Γ(k+ν+1)); every term is positive for ν > -1
    let half = 0.5 * x;
    let mut log_terms = Vec::new();
    let mut k = 0.0_f64;
    let mut best = f64::NEG_INFINITY;
    loop {
        let lt = (2.0 * k + order) * half.ln() - ln_gamma(k + 1.0) - ln_gamma(k + order + 1.0);
        best = best.max(lt);
        log_terms.push(lt);
        if lt < best - 40.0 && k > half {
            break;
        }
        k += 1.0;
        if k > 1e6 {
            return Err(Error::domain(format!("bessel series for order {order} did not converge at {x}")));
        }
    }
    let sum: f64 = log_terms.iter().map(|lt| (lt - best).exp()).sum();
    Ok(best + sum.ln())
}

/// α-κ-μ SNR density at `gamma > 0`.
pub fn snr_pdf(params: &FadingParams, gamma: f64) -> Result<f64> {
    Ok(ln_snr_pdf(params, gamma)?.exp())
}

/// Tabulates the SNR CDF for inverse-transform sampling.
///
/// The lower end starts at `γ̄·1e-8` and moves down until the density mass
/// below it is negligible; the upper end starts at `8·γ̄` and doubles until
/// the captured mass reaches `1 - 1e-6`.
pub fn make_snr_sampler(params: &FadingParams) -> Result<QuantileTable> {
    params.validate()?;
    let pdf = |g: f64| snr_pdf(params, g).unwrap_or(0.0);
    let gamma_bar = params.gamma_bar;

    let mut lo = gamma_bar * SAMPLER_LO;
    // mass below lo is of order lo·f(lo) for power-law behaviour at the origin
    while lo * pdf(lo) > 1e-10 && lo > gamma_bar * 1e-280 {
        lo *= 1e-4;
    }

    let mut hi = gamma_bar * 8.0;
    for _ in 0..SAMPLER_MAX_DOUBLINGS {
        let (_, cumulative) = integrate_on_grid(&pdf, lo, hi, SAMPLER_POINTS)
            .map_err(|e| Error::Sampler(format!("{params}: {e}")))?;
        let mass = *cumulative.last().unwrap();
        if mass >= SAMPLER_MASS {
            return build_quantile_table(pdf, lo, hi, SAMPLER_POINTS)
                .map_err(|e| Error::Sampler(format!("{params}: {e}")));
        }
        hi *= 2.0;
    }
    Err(Error::Sampler(format!(
        "{params}: captured mass stayed below 1 - 1e-6 up to gamma = {hi}"
    )))
}

/// Draws `count` SNR values by inverse transform.
pub fn sample_snr<R: Rng + ?Sized>(table: &QuantileTable, rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| draw_snr(table, rng)).collect()
}

pub(crate) fn draw_snr<R: Rng + ?Sized>(table: &QuantileTable, rng: &mut R) -> f64 {
    table.quantile(rng.random::<f64>())
}
