//! Hard-decision fusion at the fusion center: each SU thresholds its own
//! energy and the FC counts votes. `k = 1` is OR, `k = N` is AND.

use crate::error::{Error, Result};
use crate::sensing::{Dataset, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionRule {
    pub k: usize,
}

impl FusionRule {
    pub fn new(k: usize, num_sus: usize) -> Result<Self> {
        if k == 0 || k > num_sus {
            return Err(Error::domain(format!("fusion k={k} outside [1, {num_sus}]")));
        }
        Ok(FusionRule { k })
    }

    pub fn or() -> Self {
        FusionRule { k: 1 }
    }

    pub fn and(num_sus: usize) -> Self {
        FusionRule { k: num_sus.max(1) }
    }

    pub fn name(&self, num_sus: usize) -> String {
        match self.k {
            1 => "fusion_or".to_string(),
            k if k == num_sus => "fusion_and".to_string(),
            k => format!("fusion_{k}_of_{num_sus}"),
        }
    }
}

/// `Present` iff `energy > tau`.
pub fn local_decision(energy: f64, tau: f64) -> Label {
    if energy > tau {
        Label::Present
    } else {
        Label::Absent
    }
}

/// `Present` iff at least `rule.k` of the decisions are `Present`.
pub fn fuse(decisions: &[Label], rule: FusionRule) -> Result<Label> {
    if rule.k == 0 || rule.k > decisions.len() {
        return Err(Error::domain(format!(
            "fusion k={} outside [1, {}]",
            rule.k,
            decisions.len()
        )));
    }
    let votes = decisions.iter().filter(|d| **d == Label::Present).count();
    Ok(if votes >= rule.k { Label::Present } else { Label::Absent })
}

/// Fused decision for one energy vector with a common local threshold.
pub fn fuse_energies(energies: &[f64], tau: f64, rule: FusionRule) -> Result<Label> {
    let decisions: Vec<Label> = energies.iter().map(|&y| local_decision(y, tau)).collect();
    fuse(&decisions, rule)
}

/// `P(Binomial(n, p) ≥ k)`.
pub fn binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    let mut total = 0.0;
    let mut coeff = 1.0;
    for j in 0..=n {
        if j > 0 {
            coeff = coeff * (n - j + 1) as f64 / j as f64;
        }
        if j >= k {
            total += coeff * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
    }
    total.min(1.0)
}

/// System `(pd, pfa)` of the k-out-of-N rule for independent SUs with
/// identical local rates.
pub fn fusion_system_curve(p_local_d: f64, p_local_fa: f64, num_sus: usize, k: usize) -> Result<(f64, f64)> {
    for (name, p) in [("p_local_d", p_local_d), ("p_local_fa", p_local_fa)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("{name}={p} outside [0, 1]")));
        }
    }
    FusionRule::new(k, num_sus)?;
    Ok((binomial_tail(num_sus, p_local_d, k), binomial_tail(num_sus, p_local_fa, k)))
}

/// Scores whose threshold sweep reproduces the k-out-of-N rule over all
/// local thresholds: at least `k` energies exceed `tau` exactly when the
/// k-th largest does.
pub fn fusion_scores(data: &Dataset, rule: FusionRule) -> Result<Vec<f64>> {
    FusionRule::new(rule.k, data.dimension())?;
    Ok(data
        .rows
        .iter()
        .map(|row| {
            let mut e = row.energies.clone();
            e.sort_by(|a, b| b.total_cmp(a));
            e[rule.k - 1]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Absent as N, Present as P};

    #[test]
    fn local_rule_is_strict() {
        assert_eq!(local_decision(0.0, 0.5), N);
        assert_eq!(local_decision(1.2, 1.0), P);
        assert_eq!(local_decision(1.0, 1.0), N);
    }

    #[test]
    fn vote_counting() {
        assert_eq!(fuse(&[N, N, P], FusionRule::or()).unwrap(), P);
        assert_eq!(fuse(&[P, P, N], FusionRule::and(3)).unwrap(), N);
        assert_eq!(fuse(&[P, P, N], FusionRule { k: 2 }).unwrap(), P);
        assert!(fuse(&[P, P], FusionRule { k: 3 }).is_err());
        assert!(fuse(&[P, P], FusionRule { k: 0 }).is_err());
    }

    #[test]
    fn closed_forms() {
        let (_, pfa) = fusion_system_curve(0.5, 0.1, 3, 1).unwrap();
        assert!((pfa - 0.271).abs() < 1e-12);
        let (pd, _) = fusion_system_curve(0.9, 0.1, 2, 2).unwrap();
        assert!((pd - 0.81).abs() < 1e-12);
        let (pd, pfa) = fusion_system_curve(0.5, 0.5, 3, 2).unwrap();
        assert!((pd - 0.5).abs() < 1e-12 && (pfa - 0.5).abs() < 1e-12);
        assert!(fusion_system_curve(1.1, 0.1, 3, 1).is_err());
        assert!(fusion_system_curve(0.5, 0.1, 3, 4).is_err());
    }

    #[test]
    fn names() {
        assert_eq!(FusionRule::or().name(3), "fusion_or");
        assert_eq!(FusionRule::and(3).name(3), "fusion_and");
        assert_eq!(FusionRule { k: 2 }.name(3), "fusion_2_of_3");
    }
}
