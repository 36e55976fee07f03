//! Finite-difference checks of parameter gradients per loss family and of
//! input-derivative bundles.

use dualkan::loss::{bundle, evaluate_loss, loss_and_gradient, LossData, LossWeights};
use dualkan::networks::{Backbone, DualNetwork, KanNetwork, MlpNetwork, Side};
use dualkan::problems::{ProblemDefinition, ProblemId};
use dualkan::sampling::{substream, CollocationSet, SamplingPlan};
use rand::Rng;

fn dual(kan: bool, seed: u64, lo: [f64; 2], hi: [f64; 2]) -> DualNetwork {
    let mut rng = substream(seed, 50);
    let mut make = || {
        if kan {
            Backbone::Kan(KanNetwork::random(&[2, 3, 3, 1], 6, 3, [lo, hi], &mut rng).unwrap())
        } else {
            Backbone::Mlp(MlpNetwork::glorot(&[2, 8, 8, 1], &mut rng).unwrap())
        }
    };
    let (a, b) = (make(), make());
    DualNetwork::new(a, b).unwrap()
}

/// Weights selecting one family: interior, boundary, value jump, flux jump.
fn families() -> [(&'static str, LossWeights); 4] {
    let zero = LossWeights {
        omega1: 0.0,
        omega2: 0.0,
        gamma_value: 0.0,
        gamma_flux: 0.0,
        boundary1: 0.0,
        boundary2: 0.0,
    };
    [
        ("interior", LossWeights { omega1: 1.0, omega2: 1.0, ..zero }),
        ("boundary", LossWeights { boundary1: 1.0, boundary2: 1.0, ..zero }),
        ("value jump", LossWeights { gamma_value: 1.0, ..zero }),
        ("flux jump", LossWeights { gamma_flux: 1.0, ..zero }),
    ]
}

fn check(problem: ProblemId, kan: bool) {
    let def = ProblemDefinition::builtin(problem);
    let (lo, hi) = def.decomposition.bounding_box();
    let plan = SamplingPlan {
        n_interior1: 10,
        n_interior2: 12,
        n_interface: 8,
        n_boundary1: if matches!(problem, ProblemId::E5 | ProblemId::E6) { 6 } else { 0 },
        n_boundary2: 8,
    };
    for seed in 0..5 {
        let mut net = dual(kan, seed, lo, hi);
        let colloc = CollocationSet::generate(&def.decomposition, &plan, seed).unwrap();
        let data = LossData::new(&def, &colloc);
        let theta = net.params();
        let mut rng = substream(seed, 51);
        for (family, w) in families() {
            let (_, grad) = loss_and_gradient(&net, &data, &w);
            for _ in 0..12 {
                let i = rng.gen_range(0..theta.len());
                let h = 1e-5 * theta[i].abs().max(1.0);
                let mut at = |d: f64| {
                    let mut t = theta.clone();
                    t[i] += d;
                    net.set_params(&t).unwrap();
                    evaluate_loss(&net, &data, &w).total
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
                assert!(
                    rel < 1e-4,
                    "{problem} kan={kan} seed {seed} {family} component {i}: fd {fd} vs {}",
                    grad[i]
                );
            }
            net.set_params(&theta).unwrap();
        }
    }
}

#[test]
fn kan_gradients_per_family() {
    for id in [ProblemId::E1, ProblemId::E5] {
        check(id, true);
    }
}

#[test]
fn mlp_gradients_per_family() {
    for id in [ProblemId::E4, ProblemId::E6] {
        check(id, false);
    }
}

#[test]
fn bundles_match_finite_differences() {
    let h = 1e-4;
    for kan in [false, true] {
        for seed in 0..5 {
            let net = dual(kan, seed, [-1.0, -1.0], [1.0, 1.0]);
            let mut rng = substream(seed, 52);
            for _ in 0..10 {
                let p = [rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)];
                let b = bundle(&net, Side::Side2, p);
                let u = |dx: f64, dy: f64| net.net(Side::Side2).forward([p[0] + dx, p[1] + dy]);
                let u0 = u(0.0, 0.0);
                let grad = [(u(h, 0.0) - u(-h, 0.0)) / (2.0 * h), (u(0.0, h) - u(0.0, -h)) / (2.0 * h)];
                let hess = [
                    (u(h, 0.0) - 2.0 * u0 + u(-h, 0.0)) / (h * h),
                    (u(0.0, h) - 2.0 * u0 + u(0.0, -h)) / (h * h),
                    (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4.0 * h * h),
                ];
                assert!((b.u - u0).abs() <= 1e-14 * u0.abs().max(1.0));
                for k in 0..2 {
                    let rel = (grad[k] - b.grad[k]).abs() / grad[k].abs().max(1e-2);
                    assert!(rel < 1e-4, "kan={kan} grad[{k}] {} vs fd {}", b.grad[k], grad[k]);
                }
                for k in 0..3 {
                    let rel = (hess[k] - b.hess[k]).abs() / hess[k].abs().max(1e-2);
                    assert!(rel < 1e-3, "kan={kan} hess[{k}] {} vs fd {}", b.hess[k], hess[k]);
                }
            }
        }
    }
}
