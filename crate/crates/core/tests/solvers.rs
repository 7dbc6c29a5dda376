mod common;

use common::{region, standard_input, Identity};
use petkin::kinetics::{KineticParams, TacModel, TimeGrid};
use petkin::optim::{projected_lm, reg_as_tr, FitResult, LmConfig, ResidualProblem, StopReason, TrConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn assert_strictly_positive(fit: &FitResult) {
    for k in fit.iterates() {
        assert!(k.iter().all(|&x| x > 0.0), "iterate {k:?}");
    }
}

#[test]
fn identity_problem_recovers_data() {
    let problem = ResidualProblem::new(Identity(4), vec![1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
    let fit = reg_as_tr(&problem, &[0.5; 4], &TrConfig::default(), None).unwrap();
    for (k, y) in fit.k.iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((k - y).abs() < 1e-6, "{:?} ({})", fit.k, fit.reason);
    }
    assert_strictly_positive(&fit);
}

#[test]
fn identity_problem_with_active_bound() {
    let problem = ResidualProblem::new(Identity(4), vec![-1.0, 2.0, 2.0, 2.0], 0.0).unwrap();
    let fit = reg_as_tr(&problem, &[0.5; 4], &TrConfig::default(), None).unwrap();
    for (k, y) in fit.k.iter().zip([0.0, 2.0, 2.0, 2.0]) {
        assert!((k - y).abs() < 1e-4, "{:?} ({})", fit.k, fit.reason);
    }
    assert!(fit.k[0] > 0.0);
    assert_strictly_positive(&fit);
}

#[test]
fn lm_identity_problem_recovers_data() {
    let problem = ResidualProblem::new(Identity(4), vec![1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
    let fit = projected_lm(&problem, &[0.5; 4], &LmConfig::default(), None).unwrap();
    for (k, y) in fit.k.iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((k - y).abs() < 1e-6);
    }
}

fn noise_free_problem(r: usize) -> (ResidualProblem<TacModel>, KineticParams) {
    let k = region(r);
    let model = TacModel::new(&standard_input(), &TimeGrid::standard_fdg(), k.v).unwrap();
    let data = model.evaluate(&k.rates());
    (ResidualProblem::new(model, data, 0.0).unwrap(), k)
}

fn recovered(fit: &FitResult, truth: &KineticParams) -> bool {
    fit.k.iter().zip(truth.rates()).all(|(a, b)| (a - b).abs() < 0.01 * b)
}

#[test]
fn noise_free_single_voxel_recovery_region_one() {
    let (problem, truth) = noise_free_problem(1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let runs = 100;
    let mut ok = 0;
    for _ in 0..runs {
        let k0: Vec<f64> = (0..4).map(|_| rng.random_range(0.001..0.5)).collect();
        let fit = reg_as_tr(&problem, &k0, &TrConfig::default(), None).unwrap();
        assert_strictly_positive(&fit);
        ok += usize::from(recovered(&fit, &truth));
    }
    assert!(ok >= 95, "{ok}/{runs} recovered");
}

#[test]
fn lm_noise_free_region_three() {
    let (problem, truth) = noise_free_problem(3);
    let fit = projected_lm(&problem, &[0.1, 0.1, 0.1, 0.05], &LmConfig::default(), None).unwrap();
    for (a, b) in fit.k.iter().zip(truth.rates()) {
        assert!((a - b).abs() < 0.05 * b, "{:?}", fit.k);
    }
}

#[test]
fn lm_runs_are_bitwise_repeatable() {
    let (problem, _) = noise_free_problem(2);
    let a = projected_lm(&problem, &[0.2, 0.3, 0.1, 0.05], &LmConfig::default(), None).unwrap();
    let b = projected_lm(&problem, &[0.2, 0.3, 0.1, 0.05], &LmConfig::default(), None).unwrap();
    assert_eq!(a, b);
}

fn noisy_problem(r: usize, sigma_rel: f64, seed: u64) -> (ResidualProblem<TacModel>, KineticParams) {
    let k = region(r);
    let model = TacModel::new(&standard_input(), &TimeGrid::standard_fdg(), k.v).unwrap();
    let clean = model.evaluate(&k.rates());
    let peak = clean.iter().cloned().fold(0.0, f64::max);
    let sigma = sigma_rel * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..clean.len())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let delta = noise.iter().map(|e| e * e).sum::<f64>().sqrt();
    let data = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
    (ResidualProblem::new(model, data, delta).unwrap(), k)
}

#[test]
fn discrepancy_stop_is_the_first_crossing() {
    let cfg = TrConfig::default();
    let mut stopped = 0;
    for seed in 0..20 {
        let (problem, _) = noisy_problem(1 + (seed as usize % 4), 0.02, seed);
        let fit = reg_as_tr(&problem, &[0.2, 0.2, 0.2, 0.05], &cfg, None).unwrap();
        if fit.reason != StopReason::Discrepancy {
            continue;
        }
        stopped += 1;
        let bound = cfg.tau * problem.delta;
        let eps = fit.residual_history();
        let (last, earlier) = eps.split_last().unwrap();
        assert!(*last <= bound);
        assert!(earlier.iter().all(|&e| e > bound), "{eps:?} vs {bound}");
    }
    assert!(stopped > 0);
}

fn param_error(k: &[f64], truth: &KineticParams) -> f64 {
    k.iter()
        .zip(truth.rates())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn steps_contract_and_iterates_stay_positive() {
    let (problem, _) = noisy_problem(2, 0.01, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let k0: Vec<f64> = (0..4).map(|_| rng.random_range(0.001..0.5)).collect();
        let fit = reg_as_tr(&problem, &k0, &TrConfig::default(), None).unwrap();
        assert_strictly_positive(&fit);
        for rec in &fit.history {
            assert!(rec.feasible_step_norm <= rec.step_norm * (1.0 + 1e-12));
        }
    }
}

/// Early stopping must still make progress: the discrepancy iterate is closer to the truth
/// than the start, and running on without the discrepancy rule never leaves the orthant.
#[test]
fn discrepancy_iterate_improves_on_the_start() {
    let cfg = TrConfig::default();
    let k0 = [0.2, 0.2, 0.2, 0.05];
    let mut stopped = 0;
    for seed in 0..8u64 {
        let (problem, truth) = noisy_problem(1 + (seed as usize % 4), 0.03, 100 + seed);
        let fit = reg_as_tr(&problem, &k0, &cfg, None).unwrap();
        if fit.reason != StopReason::Discrepancy {
            continue;
        }
        stopped += 1;
        assert!(param_error(&fit.k, &truth) < param_error(&k0, &truth));
        let long_cfg = TrConfig {
            max_iter: 3 * fit.iterations(),
            ..cfg.clone()
        };
        let free = ResidualProblem::new(&problem.model, problem.data.as_slice().to_vec(), 0.0).unwrap();
        let long = reg_as_tr(&free, &k0, &long_cfg, None).unwrap();
        assert_strictly_positive(&long);
        assert!(long.final_residual() <= fit.final_residual());
    }
    assert!(stopped >= 5);
}

/// Counts accepted iterations meeting the q-condition `q_j ≥ q` and, among them, those where
/// the distance to the truth grew by more than `1e-10`.
fn monotonicity_violations(fit: &FitResult, truth: &[f64], q: f64) -> (usize, usize) {
    let dist = |k: &[f64]| k.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut prev = dist(&fit.initial_k);
    let (mut checked, mut violations) = (0, 0);
    for rec in fit.history.iter().filter(|r| r.accepted) {
        let d = dist(&rec.k);
        if rec.q_ratio >= q {
            checked += 1;
            violations += usize::from(d > prev + 1e-10);
        }
        prev = d;
    }
    (checked, violations)
}

fn start_in_ball(rng: &mut ChaCha8Rng, centre: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        let len = radius * rng.random::<f64>().powf(0.25);
        let k: Vec<f64> = centre.iter().zip(&dir).map(|(c, d)| c + len * d / norm).collect();
        if k.iter().all(|&x| x > 0.0) {
            return k;
        }
    }
}

#[test]
fn error_decreases_under_the_q_condition() {
    let cfg = TrConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for r in 1..=4 {
        let (problem, truth) = noise_free_problem(r);
        let truth = truth.rates();
        let mut checked = 0;
        for _ in 0..50 {
            let k0 = start_in_ball(&mut rng, &truth, 0.05);
            let fit = reg_as_tr(&problem, &k0, &cfg, None).unwrap();
            let (c, v) = monotonicity_violations(&fit, &truth, cfg.q);
            assert_eq!(v, 0, "region {r} from {k0:?}");
            checked += c;
        }
        assert!(checked > 0);
    }
}
