//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code path it is used to check.
#![allow(dead_code)]

use coopsense::channel::{snr_pdf, FadingParams};

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre over `[a, b]` with `panels` equal panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for &(x, w) in rule {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

/// The SNR density rewritten in `t = (γ/γ̄)^(α/2)`, where it is smooth at the
/// origin for μ ≥ 1.
pub fn pdf_in_t(p: &FadingParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let gamma = p.gamma_bar * t.powf(2.0 / p.alpha);
    let jacobian = p.gamma_bar * (2.0 / p.alpha) * t.powf(2.0 / p.alpha - 1.0);
    snr_pdf(p, gamma).unwrap() * jacobian
}

/// ∫ snr_pdf over (0, ∞), integrating in `t` up to where the tail is negligible.
pub fn snr_pdf_mass(p: &FadingParams, rule: &[(f64, f64)]) -> f64 {
    let t_max = 80.0 / p.mu + 4.0 * p.kappa;
    integrate(|t| pdf_in_t(p, t), 0.0, t_max, 2000, rule)
}

/// Analytic CDF by quadrature evaluated at ascending points.
pub fn snr_cdf_at_sorted(p: &FadingParams, sorted_gammas: &[f64], rule: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(sorted_gammas.len());
    let mut acc = 0.0;
    let mut prev_t = 0.0;
    for &g in sorted_gammas {
        let t = (g / p.gamma_bar).powf(p.alpha / 2.0);
        if t > prev_t {
            let panels = if prev_t == 0.0 { 64 } else { 1 };
            acc += integrate(|s| pdf_in_t(p, s), prev_t, t, panels, rule);
            prev_t = t;
        }
        out.push(acc);
    }
    out
}

/// Two-sided Kolmogorov–Smirnov statistic of ascending samples against CDF values.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (c - lo).abs().max((hi - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Maximizes the SVM dual by accelerated projected-gradient ascent. Returns
/// the optimal objective value and multipliers.
pub fn dual_qp_oracle(gram: &[Vec<f64>], y: &[f64], theta: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * gram[i][j]).collect())
        .collect();
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;
    let objective = |a: &[f64]| {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let project = |v: &[f64]| -> Vec<f64> {
        let feasible = |lam: f64| -> Vec<f64> {
            v.iter()
                .zip(y)
                .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, theta))
                .collect()
        };
        let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
        let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + theta + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(&feasible(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        feasible(0.5 * (lo + hi))
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0_f64;
    let mut best = (objective(&a), a.clone());
    for _ in 0..40_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>())
            .collect();
        let stepped: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi + step * gi).collect();
        let next = project(&stepped);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&a)
            .map(|(nx, ax)| nx + (t - 1.0) / t_next * (nx - ax))
            .collect();
        a = next;
        t = t_next;
        let obj = objective(&a);
        if obj > best.0 {
            best = (obj, a.clone());
        }
    }
    best
}

/// Mann–Whitney estimate of P(score⁺ > score⁻) with ties counted ½.
pub fn mann_whitney_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|(_, p)| **p).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|(_, p)| !**p).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// P(Binomial(n, p) ≥ k) by direct enumeration of outcome counts.
pub fn binomial_tail_enumerated(n: usize, p: f64, k: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones() as usize;
        if ones >= k {
            total += p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32);
        }
    }
    total
}
