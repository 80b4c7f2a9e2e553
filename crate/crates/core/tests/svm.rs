mod common;

use coopsense::rng::substream;
use coopsense::sensing::Label;
use coopsense::svm::{kernel_eval, train, KernelSpec, SmoParams, SvmModel};
use proptest::prelude::*;
use rand::Rng;

fn gram(kernel: &KernelSpec, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| x.iter().map(|b| kernel_eval(kernel, a, b).unwrap()).collect())
        .collect()
}

fn rows(x: &[Vec<f64>]) -> Vec<&[f64]> {
    x.iter().map(|r| r.as_slice()).collect()
}

fn equality_residual(model: &SvmModel) -> f64 {
    model
        .alphas
        .iter()
        .zip(&model.sv_labels)
        .map(|(a, y)| a * y.sign())
        .sum::<f64>()
        .abs()
}

#[test]
fn xor_with_rbf_matches_qp_oracle() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [Label::Absent, Label::Absent, Label::Present, Label::Present];
    let kernel = KernelSpec::Rbf { sigma: 1.0 };
    let model = train(&rows(&x), &labels, kernel, &SmoParams::with_theta(10.0).raw()).unwrap();
    for (xi, li) in x.iter().zip(&labels) {
        assert_eq!(model.classify(xi).unwrap(), *li);
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let (oracle, _) = common::dual_qp_oracle(&gram(&kernel, &x), &y, 10.0);
    assert!((model.dual_objective() - oracle).abs() < 1e-4, "{} vs {oracle}", model.dual_objective());
}

#[test]
fn small_random_problems_match_qp_oracle() {
    let kernels = [
        KernelSpec::Linear,
        KernelSpec::Polynomial { degree: 2 },
        KernelSpec::Rbf { sigma: 1.0 },
    ];
    for kernel in kernels {
        let mut worst_gap = 0.0_f64;
        let mut worst_kkt = 0.0_f64;
        for seed in 0..100u64 {
            let mut rng = substream(1000 + seed, 0);
            let n = rng.random_range(2..=6);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let mut labels: Vec<Label> = (0..n)
                .map(|_| if rng.random::<bool>() { Label::Present } else { Label::Absent })
                .collect();
            labels[0] = Label::Present;
            labels[1] = Label::Absent;
            let theta = rng.random_range(0.1..10.0);
            let model = train(&rows(&x), &labels, kernel, &SmoParams::with_theta(theta).raw()).unwrap();
            let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
            let (oracle, _) = common::dual_qp_oracle(&gram(&kernel, &x), &y, theta);
            worst_gap = worst_gap.max((model.dual_objective() - oracle).abs());
            worst_kkt = worst_kkt.max(model.kkt_violation(&rows(&x), &labels).unwrap());
            assert!(equality_residual(&model) < 1e-8);
            assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= theta));
        }
        assert!(worst_gap < 1e-4, "{kernel:?}: objective gap {worst_gap}");
        assert!(worst_kkt <= 1e-3, "{kernel:?}: kkt {worst_kkt}");
    }
}

fn blobs(seed: u64, n: usize, dim: usize, overlap: f64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = substream(seed, 0);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Present } else { Label::Absent };
        let centre = label.sign();
        x.push((0..dim).map(|_| centre + overlap * rng.random_range(-1.5..1.5)).collect());
        labels.push(label);
    }
    (x, labels)
}

#[test]
fn constraints_hold_on_larger_overlapping_data() {
    let (x, labels) = blobs(3, 300, 3, 1.5);
    for kernel in [KernelSpec::Linear, KernelSpec::Polynomial { degree: 3 }, KernelSpec::Rbf { sigma: 0.8 }] {
        let model = train(&rows(&x), &labels, kernel, &SmoParams::with_theta(2.0)).unwrap();
        assert!(equality_residual(&model) < 1e-8);
        assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= 2.0));
        assert!(model.kkt_violation(&rows(&x), &labels).unwrap() <= 1e-3);
        // free support vectors sit on the margin
        for ((sv_idx, a), y) in model.sv_indices.iter().zip(&model.alphas).zip(&model.sv_labels) {
            if *a < 2.0 * (1.0 - 1e-9) {
                let score = model.decision_value(&x[*sv_idx]).unwrap();
                assert!((y.sign() * score - 1.0).abs() <= 1e-3);
            }
        }
    }
}

#[test]
fn classify_agrees_with_decision_sign() {
    let (x, labels) = blobs(4, 120, 2, 1.0);
    let model = train(&rows(&x), &labels, KernelSpec::Rbf { sigma: 1.0 }, &SmoParams::default()).unwrap();
    let mut rng = substream(5, 0);
    for _ in 0..1000 {
        let q = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let score = model.decision_value(&q).unwrap();
        assert!(score.is_finite());
        assert_eq!(model.classify(&q).unwrap(), Label::from_score(score));
    }
}

#[test]
fn linear_kernel_scale_equivariance() {
    let (x, labels) = blobs(6, 80, 2, 1.2);
    let c = 3.5;
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
    let base = train(&rows(&x), &labels, KernelSpec::Linear, &SmoParams { tol: 1e-6, ..SmoParams::with_theta(1.0).raw() }).unwrap();
    let big = train(&rows(&scaled), &labels, KernelSpec::Linear, &SmoParams { tol: 1e-6, ..SmoParams::with_theta(1.0 / (c * c)).raw() }).unwrap();
    let mut rng = substream(7, 0);
    let mut checked = 0;
    for _ in 0..500 {
        let q = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let s = base.decision_value(&q).unwrap();
        if s.abs() < 1e-3 {
            continue;
        }
        let qs = [q[0] * c, q[1] * c];
        assert_eq!(base.classify(&q).unwrap(), big.classify(&qs).unwrap());
        checked += 1;
    }
    assert!(checked > 400);
}

#[test]
fn rbf_score_is_lipschitz_and_gradient_matches_finite_differences() {
    let (x, labels) = blobs(8, 100, 2, 1.3);
    let sigma = 0.9;
    let model = train(&rows(&x), &labels, KernelSpec::Rbf { sigma }, &SmoParams::with_theta(3.0).raw()).unwrap();
    let lipschitz = model.alphas.iter().sum::<f64>() / sigma * (-0.5_f64).exp();
    let mut rng = substream(9, 0);
    for _ in 0..100 {
        let q = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let d = vec![rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
        let moved: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + b).collect();
        let change = (model.decision_value(&moved).unwrap() - model.decision_value(&q).unwrap()).abs();
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        assert!(change <= lipschitz * norm + 1e-12);

        let grad = model.decision_gradient(&q).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (model.decision_value(&plus).unwrap() - model.decision_value(&minus).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-4 * grad[k].abs().max(1e-2), "{fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn saved_model_reproduces_scores() {
    let (x, labels) = blobs(10, 150, 3, 1.4);
    let model = train(&rows(&x), &labels, KernelSpec::Polynomial { degree: 2 }, &SmoParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poly.svm");
    model.save(&path).unwrap();
    let loaded = SvmModel::load(&path).unwrap();
    for q in &x {
        assert_eq!(loaded.decision_value(q).unwrap(), model.decision_value(q).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_constraints_hold(
        points in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>()), 4..40),
        theta in 0.05f64..20.0,
        kind in 0usize..3,
    ) {
        let x: Vec<Vec<f64>> = points.iter().map(|(a, b, _)| vec![*a, *b]).collect();
        let mut labels: Vec<Label> = points.iter().map(|(_, _, p)| if *p { Label::Present } else { Label::Absent }).collect();
        labels[0] = Label::Present;
        labels[1] = Label::Absent;
        let kernel = [KernelSpec::Linear, KernelSpec::Polynomial { degree: 2 }, KernelSpec::Rbf { sigma: 0.7 }][kind];
        let model = train(&rows(&x), &labels, kernel, &SmoParams::with_theta(theta)).unwrap();
        prop_assert!(equality_residual(&model) < 1e-8);
        prop_assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= theta));
        prop_assert!(model.kkt_violation(&rows(&x), &labels).unwrap() <= 1e-3);
    }
}
