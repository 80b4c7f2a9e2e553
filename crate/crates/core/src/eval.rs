//! Detection and false-alarm rates, ROC curves and AUC.
//!
//! `Pd = P[decide +1 | PU present]` and `Pfa = P[decide +1 | PU absent]`.
//! A score is declared H1 when it is strictly greater than the threshold.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sensing::{fmt_f64, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(pfa, pd)` sorted by `pfa`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn check(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::domain(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|l| **l == Label::Present).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::domain("both classes must be present to define Pd and Pfa"));
    }
    Ok((pos, neg))
}

/// Empirical `(pd, pfa)` of the rule `score > threshold`.
pub fn pd_pfa_at(scores: &[f64], labels: &[Label], threshold: f64) -> Result<(f64, f64)> {
    let (pos, neg) = check(scores, labels)?;
    let mut hits = 0usize;
    let mut alarms = 0usize;
    for (s, l) in scores.iter().zip(labels) {
        if *s > threshold {
            match l {
                Label::Present => hits += 1,
                Label::Absent => alarms += 1,
            }
        }
    }
    Ok((hits as f64 / pos as f64, alarms as f64 / neg as f64))
}

/// Threshold sweep over every distinct score. Tied scores move together, so
/// each distinct score contributes one operating point.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Present => tp += 1,
                Label::Absent => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = trapezoid(&points);
    Ok(RocCurve { points, auc })
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Trapezoidal area under the stored points.
pub fn auc(curve: &RocCurve) -> f64 {
    trapezoid(&curve.points)
}

impl RocCurve {
    /// Builds a curve from explicit points and checks the invariants.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.first() != Some(&(0.0, 0.0)) || points.last() != Some(&(1.0, 1.0)) {
            return Err(Error::domain("ROC curve must run from (0,0) to (1,1)"));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::domain("ROC points must be nondecreasing in both coordinates"));
        }
        let auc = trapezoid(&points);
        Ok(RocCurve { points, auc })
    }

    /// Detection rate at false-alarm rate `target`, reading the curve as
    /// piecewise linear between operating points.
    pub fn pd_at_pfa(&self, target: f64) -> f64 {
        let target = target.clamp(0.0, 1.0);
        let last = self
            .points
            .iter()
            .rposition(|p| p.0 <= target)
            .unwrap_or(0);
        let (x0, y0) = self.points[last];
        match self.points.get(last + 1) {
            Some(&(x1, y1)) if x1 > x0 => y0 + (y1 - y0) * (target - x0) / (x1 - x0),
            _ => y0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pfa,pd\n");
        for (pfa, pd) in &self.points {
            let _ = writeln!(out, "{},{}", fmt_f64(*pfa), fmt_f64(*pd));
        }
        out
    }

    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l) != Some("pfa,pd") {
            return Err(err(1, "expected header `pfa,pd`".into()));
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| err(i + 1, "expected two fields".into()))?;
            let pfa = a.parse::<f64>().map_err(|e| err(i + 1, e.to_string()))?;
            let pd = b.parse::<f64>().map_err(|e| err(i + 1, e.to_string()))?;
            points.push((pfa, pd));
        }
        RocCurve::from_points(points)
    }

    /// Writes `<stem>.csv` and a `<stem>.meta` sidecar holding the AUC and
    /// any extra `key=value` pairs.
    pub fn save(&self, dir: &Path, stem: &str, extra: &[(&str, String)]) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let mut meta = String::new();
        let _ = writeln!(meta, "auc={}", fmt_f64(self.auc));
        let _ = writeln!(meta, "pd_at_pfa_0.1={}", fmt_f64(self.pd_at_pfa(0.1)));
        let _ = writeln!(meta, "points={}", self.points.len());
        for (k, v) in extra {
            let _ = writeln!(meta, "{k}={v}");
        }
        let path = dir.join(format!("{stem}.meta"));
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}
