use dualkan::config::ExperimentConfig;
use dualkan::experiment::init_networks;
use dualkan::loss::{evaluate_loss, LossData, LossWeights};
use dualkan::networks::spline::SplineGrid;
use dualkan::networks::spline_basis;
use dualkan::problems::{ProblemDefinition, ProblemId};
use dualkan::reporting::relative_l2;
use dualkan::sampling::{latin_hypercube_seeded, rard_density, CollocationSet, SamplingPlan};
use dualkan::training::{adam_step, AdamConfig, AdamState};
use proptest::prelude::*;

fn small_plan() -> SamplingPlan {
    SamplingPlan {
        n_interior1: 12,
        n_interior2: 15,
        n_interface: 10,
        n_boundary1: 0,
        n_boundary2: 9,
    }
}

fn shuffled<T: Clone>(v: &[T], key: u64) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by_key(|&i| (i as u64).wrapping_mul(2654435761).wrapping_add(key) % 1009);
    idx.into_iter().map(|i| v[i].clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_l2_is_scale_invariant(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..50),
        s in 1e-3..1e3f64,
    ) {
        let (u, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3));
        let a = relative_l2(&u, &v).unwrap();
        let su: Vec<f64> = u.iter().map(|x| x * s).collect();
        let sv: Vec<f64> = v.iter().map(|x| x * s).collect();
        let b = relative_l2(&su, &sv).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(relative_l2(&u, &u).unwrap() == 0.0);
    }

    #[test]
    fn rard_density_is_a_monotone_distribution(
        r in prop::collection::vec(0.0..5.0f64, 1..40),
        k in 0.5..3.0f64,
        c in 0.0..2.0f64,
    ) {
        let d = rard_density(&r, k, c).unwrap();
        let sum: f64 = d.probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(d.probs.iter().all(|p| *p >= 0.0));
        for i in 0..r.len() {
            for j in 0..r.len() {
                if r[i] > r[j] {
                    prop_assert!(d.probs[i] >= d.probs[j]);
                }
            }
        }
    }

    #[test]
    fn splines_partition_unity(g in 1usize..20, m in 1usize..=5, t in 0.0..=1.0f64) {
        let grid = SplineGrid::new(-2.0, 3.0, g, m);
        let x = -2.0 + 5.0 * t;
        let b = spline_basis(&grid.knots(), m, x);
        prop_assert_eq!(b.len(), g + m);
        prop_assert!(b.iter().all(|v| *v >= -1e-15));
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn latin_hypercube_fills_every_stratum(n in 1usize..200, seed in any::<u64>()) {
        let pts = latin_hypercube_seeded(n, [0.0, -1.0], [2.0, 1.0], seed);
        prop_assert_eq!(pts.len(), n);
        for axis in 0..2 {
            let (lo, w) = if axis == 0 { (0.0, 2.0) } else { (-1.0, 2.0) };
            let mut seen = vec![false; n];
            for p in &pts {
                let b = (((p[axis] - lo) / w) * n as f64).floor() as usize;
                prop_assert!(!seen[b.min(n - 1)]);
                seen[b.min(n - 1)] = true;
            }
        }
    }

    #[test]
    fn first_adam_step_has_learning_rate_size(g in prop::collection::vec(-1e3..1e3f64, 1..20)) {
        prop_assume!(g.iter().all(|v| v.abs() > 1e-3));
        let hyper = AdamConfig::default();
        let mut theta = vec![0.0; g.len()];
        let mut st = AdamState::new(g.len());
        adam_step(&mut theta, &g, &mut st, &hyper).unwrap();
        for (t, gi) in theta.iter().zip(&g) {
            prop_assert!((t.abs() - hyper.learning_rate).abs() < 1e-8 * hyper.learning_rate.max(1.0));
            prop_assert!(t.signum() == -gi.signum());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Loss terms are means, so reordering or duplicating points leaves them
    /// unchanged.
    #[test]
    fn loss_ignores_order_and_duplication(seed in 0u64..1000, key in any::<u64>(), kan in any::<bool>()) {
        let preset = if kan { "e1-kan" } else { "e1-mlp" };
        let mut cfg = ExperimentConfig::preset(preset).unwrap();
        cfg.seed = seed;
        let def = ProblemDefinition::builtin(ProblemId::E1);
        let dual = init_networks(&cfg, &def).unwrap();
        let c = CollocationSet::generate(&def.decomposition, &small_plan(), seed).unwrap();
        let w = LossWeights::default();
        let base = evaluate_loss(&dual, &LossData::new(&def, &c), &w);

        let mut p = c.clone();
        p.interior1 = shuffled(&c.interior1, key);
        p.interior2 = shuffled(&c.interior2, key);
        p.boundary2 = shuffled(&c.boundary2, key);
        let pairs: Vec<_> = c.interface.iter().cloned().zip(c.normals.iter().cloned()).collect();
        let pairs = shuffled(&pairs, key);
        p.interface = pairs.iter().map(|x| x.0).collect();
        p.normals = pairs.iter().map(|x| x.1).collect();
        let permuted = evaluate_loss(&dual, &LossData::new(&def, &p), &w);

        let mut d = c.clone();
        for v in [&mut d.interior1, &mut d.interior2, &mut d.interface, &mut d.normals, &mut d.boundary2] {
            let copy = v.clone();
            v.extend(copy);
        }
        let doubled = evaluate_loss(&dual, &LossData::new(&def, &d), &w);

        for other in [permuted, doubled] {
            for (a, b) in base.components().iter().zip(other.components()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }
}
