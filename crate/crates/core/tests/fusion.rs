mod common;

use coopsense::eval::{pd_pfa_at, roc_curve};
use coopsense::fusion::{binomial_tail, fuse, fuse_energies, fusion_scores, fusion_system_curve, FusionRule};
use coopsense::rng::substream;
use coopsense::sensing::{Dataset, EnergyVector, Label};
use rand::Rng;

#[test]
fn binomial_tail_matches_enumeration() {
    for n in 1..=8 {
        for k in 0..=n {
            for p in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
                let direct = common::binomial_tail_enumerated(n, p, k);
                assert!((binomial_tail(n, p, k) - direct).abs() < 1e-12, "n={n} k={k} p={p}");
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_system_curve() {
    let (p_d, p_fa) = (0.65, 0.15);
    let events = 100_000u64;
    for k in 1..=3 {
        let rule = FusionRule::new(k, 3).unwrap();
        let (pd, pfa) = fusion_system_curve(p_d, p_fa, 3, k).unwrap();
        let rate = |p: f64, seed: u64| {
            (0..events)
                .filter(|&i| {
                    let mut rng = substream(seed, i);
                    let local: Vec<Label> = (0..3)
                        .map(|_| if rng.random::<f64>() < p { Label::Present } else { Label::Absent })
                        .collect();
                    fuse(&local, rule).unwrap() == Label::Present
                })
                .count() as f64
                / events as f64
        };
        assert!((rate(p_d, 1) - pd).abs() < 0.01);
        assert!((rate(p_fa, 2) - pfa).abs() < 0.01);
    }
}

#[test]
fn system_rates_are_nonincreasing_in_k() {
    for n in 1..=7 {
        for (p_d, p_fa) in [(0.9, 0.1), (0.5, 0.5), (0.3, 0.05)] {
            let mut prev = (1.0, 1.0);
            for k in 1..=n {
                let (pd, pfa) = fusion_system_curve(p_d, p_fa, n, k).unwrap();
                assert!(pd <= prev.0 + 1e-15 && pfa <= prev.1 + 1e-15);
                prev = (pd, pfa);
            }
        }
    }
}

#[test]
fn order_statistic_scores_reproduce_the_rule() {
    let mut rng = substream(4, 0);
    let rows: Vec<EnergyVector> = (0..400)
        .map(|i| EnergyVector {
            energies: (0..4).map(|_| rng.random_range(0.0..3.0)).collect(),
            label: if i % 3 == 0 { Label::Present } else { Label::Absent },
        })
        .collect();
    let data = Dataset::from_rows(rows).unwrap();
    let labels = data.labels();
    for k in 1..=4 {
        let rule = FusionRule::new(k, 4).unwrap();
        let scores = fusion_scores(&data, rule).unwrap();
        for tau in [0.2, 0.9, 1.5, 2.4] {
            let direct: Vec<f64> = data
                .rows
                .iter()
                .map(|r| if fuse_energies(&r.energies, tau, rule).unwrap() == Label::Present { 1.0 } else { 0.0 })
                .collect();
            assert_eq!(pd_pfa_at(&direct, &labels, 0.5).unwrap(), pd_pfa_at(&scores, &labels, tau).unwrap());
        }
        roc_curve(&scores, &labels).unwrap();
    }
    assert!(fusion_scores(&data, FusionRule { k: 5 }).is_err());
}
