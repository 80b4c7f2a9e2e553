//! Special functions and the tabulated inverse-CDF sampler.
//!
//! Everything here works in log-space where magnitudes can leave the `f64`
//! range: the Bessel function of a high-SNR fading density, the Poisson
//! weights of a large noncentrality, the gamma prefactors of a long
//! integration window.

use crate::error::{Error, Result};

/// Relative size below which series terms are dropped.
const SERIES_EPS: f64 = 1e-17;
/// Poisson-weight cutoff for the Marcum Q mixture.
const MARCUM_TERM_EPS: f64 = 1e-14;
const MARCUM_MAX_TERMS: usize = 1_000_000;
const GAMMA_MAX_ITER: usize = 1_000_000;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Natural log of the modified Bessel function of the first kind, `ln I_ν(x)`.
///
/// Uses the large-argument asymptotic expansion when it converges to full
/// precision and otherwise a power series summed outward from its largest
/// term, so that neither branch overflows for large `x`.
pub fn log_besseli(order: f64, x: f64) -> Result<f64> {
    if !(order >= 0.0) || !(x >= 0.0) || !order.is_finite() || x.is_nan() {
        return Err(Error::domain(format!(
            "log_besseli requires order >= 0 and x >= 0, got order={order}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(if order == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x > 30.0 && x > order * order {
        if let Some(v) = log_besseli_asymptotic(order, x) {
            return Ok(v);
        }
    }
    Ok(log_besseli_series(order, x))
}

fn log_besseli_asymptotic(order: f64, x: f64) -> Option<f64> {
    let mu4 = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu4 - odd * odd) / (kf * 8.0 * x);
        if next == 0.0 {
            // half-integer order: the expansion terminates and is exact
            return Some(x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln());
        }
        if next.abs() > term.abs() {
            return None;
        }
        sum += next;
        term = next;
        if term.abs() < SERIES_EPS * sum.abs() {
            return Some(x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln());
        }
    }
    None
}

fn log_besseli_series(order: f64, x: f64) -> f64 {
    // term_k = (x/2)^(2k+ν) / (k! Γ(k+ν+1)); peaks near k(k+ν) = (x/2)^2
    let half = 0.5 * x;
    let half_sq = half * half;
    let peak = ((-order + (order * order + x * x).sqrt()) * 0.5).floor().max(0.0);
    let log_peak = (2.0 * peak + order) * half.ln() - ln_gamma(peak + 1.0) - ln_gamma(peak + order + 1.0);

    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = peak;
    loop {
        term *= half_sq / ((k + 1.0) * (k + 1.0 + order));
        sum += term;
        k += 1.0;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    let mut term = 1.0;
    let mut k = peak;
    while k > 0.0 {
        term *= k * (k + order) / half_sq;
        sum += term;
        k -= 1.0;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    log_peak + sum.ln()
}

/// Regularized upper incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn reg_gamma_upper(shape: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::domain(format!(
            "reg_gamma_upper requires shape > 0, got {shape}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "reg_gamma_upper requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let q = if x < shape + 1.0 {
        1.0 - gamma_lower_series(shape, x)
    } else {
        gamma_upper_fraction(shape, x)
    };
    Ok(q.clamp(0.0, 1.0))
}

/// Regularized lower incomplete gamma function `P(a, x) = 1 - Q(a, x)`.
pub fn reg_gamma_lower(shape: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() || !(x >= 0.0) {
        return Err(Error::domain(format!(
            "reg_gamma_lower requires shape > 0 and x >= 0, got shape={shape}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let p = if x < shape + 1.0 {
        gamma_lower_series(shape, x)
    } else {
        1.0 - gamma_upper_fraction(shape, x)
    };
    Ok(p.clamp(0.0, 1.0))
}

fn gamma_log_prefactor(shape: f64, x: f64) -> f64 {
    shape * x.ln() - x - ln_gamma(shape)
}

fn gamma_lower_series(shape: f64, x: f64) -> f64 {
    let mut ap = shape;
    let mut del = 1.0 / shape;
    let mut sum = del;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * gamma_log_prefactor(shape, x).exp()
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_upper_fraction(shape: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - shape;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - shape);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (gamma_log_prefactor(shape, x).exp() * h).max(0.0)
}

/// Generalized Marcum Q function `Q_m(a, b)`, the upper tail at `b²` of a
/// noncentral chi-square law with `2m` degrees of freedom and noncentrality `a²`.
///
/// Summed as a Poisson(a²/2) mixture of regularized gamma tails
/// `Q(m + j, b²/2)`, walking the weights outward from their mode.
pub fn marcum_q(m: f64, a: f64, b: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain(format!("marcum_q requires m > 0, got {m}")));
    }
    if !(a >= 0.0) || !(b >= 0.0) || a.is_infinite() {
        return Err(Error::domain(format!(
            "marcum_q requires finite a >= 0 and b >= 0, got a={a}, b={b}"
        )));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let x = 0.5 * b * b;
    let lambda = 0.5 * a * a;
    if lambda == 0.0 {
        return reg_gamma_upper(m, x);
    }

    let log_weight = |j: f64| -lambda + j * lambda.ln() - ln_gamma(j + 1.0);
    let mode = lambda.floor();
    let mut lo = mode;
    while lo > 0.0 && log_weight(lo - 1.0).exp() >= MARCUM_TERM_EPS {
        lo -= 1.0;
    }

    // Q(s + 1, x) = Q(s, x) + x^s e^{-x} / Γ(s + 1)
    let mut tail = reg_gamma_upper(m + lo, x)?;
    let mut total = 0.0;
    let mut j = lo;
    for _ in 0..MARCUM_MAX_TERMS {
        let w = log_weight(j).exp();
        total += w * tail;
        if j > mode && w < MARCUM_TERM_EPS {
            break;
        }
        let s = m + j;
        tail += (s * x.ln() - x - ln_gamma(s + 1.0)).exp();
        tail = tail.min(1.0);
        j += 1.0;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Monotone piecewise-linear CDF on a strictly increasing grid, used for
/// inverse-transform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuantileTable {
    /// Builds a table from explicit abscissae and CDF values.
    pub fn new(grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != cdf.len() {
            return Err(Error::domain(
                "quantile table needs at least two points and matching lengths",
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("quantile grid must be strictly increasing"));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::domain(
                "quantile cdf must be nondecreasing within [0, 1]",
            ));
        }
        if cdf[0] > 1e-6 || cdf[cdf.len() - 1] < 1.0 - 1e-6 {
            return Err(Error::domain("quantile cdf must span [0, 1]"));
        }
        Ok(QuantileTable { grid, cdf })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Inverse CDF. `u` is clamped to `[0, 1]`; the endpoints map to the
    /// grid boundaries.
    pub fn quantile(&self, u: f64) -> f64 {
        let last = self.grid.len() - 1;
        if !(u > 0.0) {
            return self.grid[0];
        }
        if u >= 1.0 {
            return self.grid[last];
        }
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, last);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        if c1 <= c0 {
            return g1;
        }
        g0 + (u - c0) / (c1 - c0) * (g1 - g0)
    }

    /// Interpolated CDF; 0 below the grid and 1 above it.
    pub fn cdf(&self, x: f64) -> f64 {
        let last = self.grid.len() - 1;
        if x <= self.grid[0] {
            return self.cdf[0];
        }
        if x >= self.grid[last] {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g < x).clamp(1, last);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (x - g0) / (g1 - g0) * (c1 - c0)
    }
}

/// Integrates `pdf` over `[lo, hi]` on a log-dense grid and tabulates its CDF.
///
/// The grid is the union of a geometric and a uniform grid, each with
/// `points / 2` nodes, so resolution is fine near `lo` and never coarse
/// elsewhere. On a positive domain the trapezoid rule is applied in `ln x`
/// (to `x·pdf(x)`), which is exact in the limit for power-law behaviour near
/// zero. The CDF is renormalized to end at exactly 1.
pub fn build_quantile_table<F>(pdf: F, lo: f64, hi: f64, points: usize) -> Result<QuantileTable>
where
    F: Fn(f64) -> f64,
{
    let (grid, cumulative) = integrate_on_grid(&pdf, lo, hi, points)?;
    let mass = *cumulative.last().unwrap();
    if !((1.0 - 1e-4)..=(1.0 + 1e-4)).contains(&mass) {
        return Err(Error::Truncation { mass, lo, hi });
    }
    let mut cdf: Vec<f64> = cumulative.iter().map(|c| (c / mass).min(1.0)).collect();
    *cdf.last_mut().unwrap() = 1.0;
    Ok(QuantileTable { grid, cdf })
}

/// Unnormalized cumulative integral of `pdf` on the table grid.
pub(crate) fn integrate_on_grid<F>(pdf: &F, lo: f64, hi: f64, points: usize) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!(
            "quantile table needs finite lo < hi, got [{lo}, {hi}]"
        )));
    }
    if points < 256 {
        return Err(Error::domain(format!(
            "quantile table needs at least 256 points, got {points}"
        )));
    }
    let grid = log_dense_grid(lo, hi, points);
    let values: Vec<f64> = grid.iter().map(|&x| pdf(x)).collect();
    if let Some((x, v)) = grid
        .iter()
        .zip(&values)
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::domain(format!(
            "pdf must be finite and nonnegative, got {v} at {x}"
        )));
    }

    let mut cumulative = Vec::with_capacity(grid.len());
    cumulative.push(0.0);
    let mut acc = 0.0;
    for i in 1..grid.len() {
        let (x0, x1) = (grid[i - 1], grid[i]);
        let piece = if lo > 0.0 {
            0.5 * (x0 * values[i - 1] + x1 * values[i]) * (x1 / x0).ln()
        } else {
            0.5 * (values[i - 1] + values[i]) * (x1 - x0)
        };
        acc += piece;
        cumulative.push(acc);
    }
    Ok((grid, cumulative))
}

fn log_dense_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let half = points / 2;
    let mut grid = Vec::with_capacity(points + 1);
    let span = hi - lo;
    for i in 0..half {
        grid.push(lo + span * i as f64 / (half - 1) as f64);
    }
    if lo > 0.0 {
        let ratio = (hi / lo).ln();
        for i in 0..half {
            grid.push(lo * (ratio * i as f64 / (half - 1) as f64).exp());
        }
    } else {
        // geometric offsets from lo, down to 1e-12 of the span
        let ratio = (1e12_f64).ln();
        for i in 0..half {
            let t = -ratio * (1.0 - i as f64 / (half - 1) as f64);
            grid.push(lo + span * t.exp());
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(f64::MIN_POSITIVE));
    grid[0] = lo;
    let last = grid.len() - 1;
    grid[last] = hi;
    grid
}
