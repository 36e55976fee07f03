//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing output capture) before asserting.
//!
//! Criteria 6 to 8 train 24 full-length runs (E1 and E4, four configurations,
//! three seeds); expect well over an hour on one core.

use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use dualkan::config::{preset_names, ExperimentConfig};
use dualkan::experiment::{comparison_configs, run_experiment, COMPARISON_LABELS};
use dualkan::loss::{bundle, evaluate_loss, loss_and_gradient, ExactField, LossData, LossWeights};
use dualkan::networks::spline::SplineGrid;
use dualkan::networks::{kan_param_count, mlp_param_count, spline_basis, Side};
use dualkan::problems::{verify_manufactured, ProblemDefinition, ProblemId};
use dualkan::reporting::ErrorReport;
use dualkan::sampling::{rard_density, rard_resample, substream, CollocationSet, RardConfig};
use dualkan::training::Silent;
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id:>2} {} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn note(msg: &str) {
    let _ = std::io::stderr().write_all(format!("  {msg}\n").as_bytes());
}

#[test]
fn criterion_01_manufactured_solutions() {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ProblemId::ALL {
        let def = ProblemDefinition::builtin(id);
        let r = verify_manufactured(&def, 2000, 1e-5, 1e-8, 0);
        ok &= r.passed;
        parts.push(format!("{id} pde {:.1e} jump {:.1e}", r.max_interior_residual, r.max_jump_mismatch));
    }
    let secs = t.elapsed().as_secs_f64();
    report(1, "manufactured solutions", ok && secs < 10.0, &format!("{}; {secs:.1}s", parts.join(", ")));
}

#[test]
fn criterion_02_zero_at_truth() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for id in ProblemId::ALL {
        let def = ProblemDefinition::builtin(id);
        let cfg = dualkan::config::preset(id, dualkan::config::BackboneKind::Kan, false);
        let colloc = CollocationSet::generate(&def.decomposition, &cfg.sampling, 0).unwrap();
        let data = LossData::new(&def, &colloc);
        let l = evaluate_loss(&ExactField(&def), &data, &LossWeights::default());
        worst = worst.max(l.total);
    }
    let secs = t.elapsed().as_secs_f64();
    report(2, "zero at truth", worst < 1e-10 && secs < 30.0, &format!("max total loss {worst:.2e}; {secs:.1}s"));
}

/// Central-difference check of the training gradient on 32 components.
fn parameter_fd_error(backbone: &str) -> f64 {
    let mut cfg = ExperimentConfig::preset(&format!("e1-{backbone}")).unwrap();
    cfg.seed = 11;
    let def = ProblemDefinition::builtin(ProblemId::E1);
    let mut dual = dualkan::experiment::init_networks(&cfg, &def).unwrap();
    let colloc = CollocationSet::generate(&def.decomposition, &cfg.sampling, 11).unwrap();
    let data = LossData::new(&def, &colloc);
    let w = LossWeights::default();
    let (_, grad) = loss_and_gradient(&dual, &data, &w);
    let theta = dual.params();
    let mut rng = substream(11, 99);
    let mut worst: f64 = 0.0;
    for _ in 0..32 {
        let i = rng.gen_range(0..theta.len());
        let h = 1e-5 * theta[i].abs().max(1.0);
        let mut at = |d: f64| {
            let mut t = theta.clone();
            t[i] += d;
            dual.set_params(&t).unwrap();
            evaluate_loss(&dual, &data, &w).total
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        // Denominator floor keeps components with vanishing gradient from
        // dividing roundoff by zero.
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
        worst = worst.max(rel);
    }
    dual.set_params(&theta).unwrap();
    worst
}

/// Worst relative mismatch of the Hessian against second differences.
fn hessian_fd_error(backbone: &str) -> f64 {
    let cfg = ExperimentConfig::preset(&format!("e1-{backbone}")).unwrap();
    let def = ProblemDefinition::builtin(ProblemId::E1);
    let dual = dualkan::experiment::init_networks(&cfg, &def).unwrap();
    let mut rng = substream(5, 98);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let p = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        for side in [Side::Side1, Side::Side2] {
            let net = dual.net(side);
            let u = |dx: f64, dy: f64| net.forward([p[0] + dx, p[1] + dy]);
            let b = bundle(&dual, side, p);
            let u0 = u(0.0, 0.0);
            let fd = [
                (u(h, 0.0) - 2.0 * u0 + u(-h, 0.0)) / (h * h),
                (u(0.0, h) - 2.0 * u0 + u(0.0, -h)) / (h * h),
                (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4.0 * h * h),
            ];
            for k in 0..3 {
                let rel = (fd[k] - b.hess[k]).abs() / fd[k].abs().max(b.hess[k].abs()).max(1e-2);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

#[test]
fn criterion_03_differentiation() {
    let t = Instant::now();
    let g_kan = parameter_fd_error("kan");
    let g_mlp = parameter_fd_error("mlp");
    let h_kan = hessian_fd_error("kan");
    let h_mlp = hessian_fd_error("mlp");
    let secs = t.elapsed().as_secs_f64();
    let ok = g_kan < 1e-4 && g_mlp < 1e-4 && h_kan < 1e-3 && h_mlp < 1e-3 && secs < 60.0;
    report(
        3,
        "differentiation",
        ok,
        &format!("param grad kan {g_kan:.1e} mlp {g_mlp:.1e}; hessian kan {h_kan:.1e} mlp {h_mlp:.1e}; {secs:.1}s"),
    );
}

#[test]
fn criterion_04_spline_properties() {
    let mut pu: f64 = 0.0;
    let mut jump: f64 = 0.0;
    let mut rng = substream(4, 0);
    for g in [5, 10, 15] {
        for m in [2, 3] {
            let grid = SplineGrid::new(-1.0, 1.0, g, m);
            let knots = grid.knots();
            for i in 0..=1000 {
                let x = -1.0 + 2.0 * i as f64 / 1000.0;
                let s: f64 = spline_basis(&knots, m, x).iter().sum();
                pu = pu.max((s - 1.0).abs());
            }
            let coeffs: Vec<f64> = (0..grid.basis_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eps = 1e-9;
            for j in 1..g {
                let x = -1.0 + 2.0 * j as f64 / g as f64;
                for d in 0..m {
                    let (l, r) = (grid.eval(&coeffs, x - eps, d), grid.eval(&coeffs, x + eps, d));
                    jump = jump.max((l - r).abs() / l.abs().max(1.0));
                }
            }
        }
    }
    report(
        4,
        "spline properties",
        pu < 1e-12 && jump < 1e-5,
        &format!("partition of unity {pu:.1e}; max C^(m-1) jump at knots {jump:.1e}"),
    );
}

#[test]
fn criterion_05_rard_units() {
    let d = rard_density(&[1.0, 2.0], 2.0, 0.0).unwrap();
    let hand = (d.probs[0] - 0.2).abs() < 1e-15 && (d.probs[1] - 0.8).abs() < 1e-15;
    let uni = rard_density(&[3.0; 7], 2.0, 0.5).unwrap();
    let uniform = uni.probs.iter().all(|p| (p - 1.0 / 7.0).abs() < 1e-15);
    let r = [0.3, 1.7, 0.01, 2.2, 0.9];
    let base = rard_density(&r, 2.0, 0.0).unwrap();
    let scaled = rard_density(&r.map(|v| v * 1e3), 2.0, 0.0).unwrap();
    let scale = base.probs.iter().zip(&scaled.probs).all(|(a, b)| (a - b).abs() < 1e-14);
    let cfg = RardConfig {
        k: 2.0,
        c: 0.0,
        warmup_steps: 0,
        resample_period: 1,
        pool_multiplier: 3,
    };
    let current: Vec<[f64; 2]> = (0..20).map(|i| [i as f64 / 20.0, 0.5]).collect();
    let draw = || {
        let mut rng = substream(9, 6);
        rard_resample(
            &current,
            |n, rng: &mut rand_chacha::ChaCha8Rng| Ok((0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()),
            |pool: &[[f64; 2]]| pool.iter().map(|p| p[0] + p[1]).collect(),
            &cfg,
            &mut rng,
        )
        .unwrap()
    };
    let deterministic = draw() == draw();
    report(
        5,
        "rar-d units",
        hand && uniform && scale && deterministic,
        &format!("hand case {hand}, uniform {uniform}, scale invariance {scale}, seeded determinism {deterministic}"),
    );
}

struct RunSummary {
    errors: ErrorReport,
    /// `(step, total loss)` history.
    totals: Vec<(usize, f64)>,
}

type RunKey = (ProblemId, &'static str, u64);

const SEEDS: [u64; 3] = [0, 1, 2];

/// All comparison runs on E1 and E4, computed once per test binary.
fn comparison_runs() -> &'static HashMap<RunKey, RunSummary> {
    static RUNS: OnceLock<HashMap<RunKey, RunSummary>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut out = HashMap::new();
        for problem in [ProblemId::E1, ProblemId::E4] {
            for seed in SEEDS {
                for ((label, cfg), key) in comparison_configs(problem, seed).into_iter().zip(COMPARISON_LABELS) {
                    let t = Instant::now();
                    let run = run_experiment(&cfg, &mut Silent).unwrap_or_else(|e| panic!("{problem} {label}: {e}"));
                    note(&format!(
                        "{problem} {label:<8} seed {seed}: e_omega1 {:.3e} e_omega2 {:.3e} e_gamma {:.3e} e_boundary2 {:.3e} max_abs {:.3e} ({:.0}s)",
                        run.errors.e_omega1,
                        run.errors.e_omega2,
                        run.errors.e_gamma,
                        run.errors.e_boundary2,
                        run.errors.max_abs,
                        t.elapsed().as_secs_f64()
                    ));
                    let totals = run.report.history.iter().map(|h| (h.step, h.loss.total)).collect();
                    out.insert(
                        (problem, key, seed),
                        RunSummary {
                            errors: run.errors,
                            totals,
                        },
                    );
                }
            }
        }
        out
    })
}

/// The five reported columns: four relative errors and the max-abs error.
fn columns(e: &ErrorReport) -> [f64; 5] {
    [e.e_omega1, e.e_omega2, e.e_gamma, e.e_boundary2, e.max_abs]
}

/// Column-wise minimum over the seeds.
fn best_of_seeds(problem: ProblemId, label: &str) -> [f64; 5] {
    let runs = comparison_runs();
    let mut best = [f64::INFINITY; 5];
    for seed in SEEDS {
        let key = COMPARISON_LABELS.iter().find(|l| **l == label).unwrap();
        let c = columns(&runs[&(problem, *key, seed)].errors);
        for k in 0..5 {
            best[k] = best[k].min(c[k]);
        }
    }
    best
}

fn wins(a: [f64; 5], b: [f64; 5]) -> usize {
    a.iter().zip(&b).filter(|(x, y)| x < y).count()
}

#[test]
fn criterion_06_e1_kans_a_envelope() {
    let target = [1.035e-4, 1.927e-4, 1.680e-4, 6.512e-4];
    let best = best_of_seeds(ProblemId::E1, "KANs-A");
    let ratios: Vec<f64> = best.iter().zip(&target).map(|(b, t)| b / t).collect();
    let ok = ratios.iter().all(|r| (0.1..=10.0).contains(r));
    report(
        6,
        "E1 KANs-A within 10x",
        ok,
        &format!(
            "best errors {:.3e} {:.3e} {:.3e} {:.3e}; ratios to reference {:.2} {:.2} {:.2} {:.2}",
            best[0], best[1], best[2], best[3], ratios[0], ratios[1], ratios[2], ratios[3]
        ),
    );
}

#[test]
fn criterion_07_orderings() {
    let mut ok = true;
    let mut parts = Vec::new();
    for problem in [ProblemId::E1, ProblemId::E4] {
        let [pinn, kan, pinn_a, kan_a] = COMPARISON_LABELS.map(|l| best_of_seeds(problem, l));
        let a = wins(kan, pinn);
        let b_pinn = wins(pinn_a, pinn);
        let b_kan = wins(kan_a, kan);
        ok &= a >= 4 && b_pinn >= 3 && b_kan >= 3;
        parts.push(format!(
            "{problem}: KANs<PINNs {a}/5, PINNs-A<PINNs {b_pinn}/5, KANs-A<KANs {b_kan}/5"
        ));
    }
    report(7, "qualitative orderings", ok, &parts.join("; "));
}

/// First logged step with total loss at or below `level`.
fn steps_to_reach(totals: &[(usize, f64)], level: f64) -> Option<usize> {
    totals.iter().find(|(_, l)| *l <= level).map(|(s, _)| *s)
}

#[test]
fn criterion_08_kan_convergence_speed() {
    let runs = comparison_runs();
    let mut fractions = Vec::new();
    for seed in SEEDS {
        let pinn = &runs[&(ProblemId::E1, "PINNs", seed)].totals;
        let kan = &runs[&(ProblemId::E1, "KANs", seed)].totals;
        let (pinn_steps, pinn_final) = *pinn.last().unwrap();
        let frac = steps_to_reach(kan, pinn_final).map_or(f64::INFINITY, |s| s as f64 / pinn_steps as f64);
        fractions.push(frac);
    }
    let mut sorted = fractions.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[1];
    report(
        8,
        "KAN reaches PINN final loss early",
        median <= 0.5,
        &format!("step fractions per seed {fractions:?}; median {median}"),
    );
}

#[test]
fn criterion_09_parameter_counts() {
    let kan = kan_param_count(&[2, 3, 3, 3, 1], 10, 3);
    let mlp = mlp_param_count(&[2, 20, 20, 20, 1]);
    report(9, "parameter counts", kan == 405 && mlp == 921 && kan < mlp, &format!("KAN {kan}, MLP {mlp}"));
}

fn bits(e: &ErrorReport) -> Vec<u64> {
    let mut v: Vec<u64> = e.columns().iter().map(|(_, x)| x.to_bits()).collect();
    v.extend([e.e_gamma_side1.to_bits(), e.e_gamma_side2.to_bits()]);
    v
}

#[test]
fn criterion_10_determinism() {
    let mut mismatched = Vec::new();
    let names = preset_names();
    for name in &names {
        let mut cfg = ExperimentConfig::preset(name).unwrap();
        cfg.seed = 3;
        cfg.set_total_steps(300);
        if let Some(r) = cfg.train.rard.as_mut() {
            r.warmup_steps = 100;
            r.resample_period = 100;
        }
        let a = run_experiment(&cfg, &mut Silent).unwrap();
        let b = run_experiment(&cfg, &mut Silent).unwrap();
        let same = a.report.history == b.report.history
            && a.report.resample_events == b.report.resample_events
            && bits(&a.errors) == bits(&b.errors)
            && a.report.final_params.iter().map(|x| x.to_bits()).eq(b.report.final_params.iter().map(|x| x.to_bits()));
        if !same {
            mismatched.push(name.clone());
        }
    }
    report(
        10,
        "determinism",
        mismatched.is_empty(),
        &format!("{} presets run twice; mismatches: {mismatched:?}", names.len()),
    );
}
