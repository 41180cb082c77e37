use std::sync::Arc;

use jssp_core::agent::{policy_backward, policy_with_tape, ModelConfig, ParameterSet};
use jssp_core::instance::{generate_uniform_benchmark, Interval};
use jssp_core::ppo::{
    clipped_surrogate, collect_episode, compute_gae, ppo_objective, ConvergenceDetector, PpoConfig, Sample, Step,
};
use jssp_testkit::gae_explicit;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_trajectory(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let len = rng.gen_range(1..=60);
    let rewards = (0..len).map(|_| -(rng.gen_range(0..40) as f64)).collect();
    let values = (0..len).map(|_| rng.gen_range(-200.0..10.0)).collect();
    (rewards, values)
}

#[test]
fn gae_recursion_equals_explicit_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let (r, v) = random_trajectory(&mut rng);
        let gamma = if i % 2 == 0 { 1.0 } else { rng.gen_range(0.8..1.0) };
        let lambda = rng.gen_range(0.0..=1.0);
        let fast = compute_gae(&r, &v, gamma, lambda);
        let slow = gae_explicit(&r, &v, gamma, lambda);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10, "trajectory {i}: {a} vs {b}");
        }
    }
}

#[test]
fn lambda_zero_is_one_step_td() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (r, v) = random_trajectory(&mut rng);
        let gamma = rng.gen_range(0.5..=1.0);
        let adv = compute_gae(&r, &v, gamma, 0.0);
        for t in 0..r.len() {
            let next = v.get(t + 1).copied().unwrap_or(0.0);
            assert_eq!(adv[t], r[t] + gamma * next - v[t]);
        }
    }
}

#[test]
fn clip_matches_formula_on_a_grid() {
    let ratios = [0.0, 0.3, 0.79, 0.8, 0.81, 1.0, 1.19, 1.2, 1.21, 1.5, 3.0];
    let advs = [-2.0, -0.5, 0.0, 0.5, 2.0];
    let clips = [0.05, 0.1, 0.2, 0.3, 1.0];
    for &r in &ratios {
        for &a in &advs {
            for &e in &clips {
                let (v, d) = clipped_surrogate(r, a, e);
                let clipped = r.max(1.0 - e).min(1.0 + e);
                assert_eq!(v, (r * a).min(clipped * a), "r {r} A {a} eps {e}");
                // Off the kinks the derivative is A on the unclipped branch, else 0.
                if (r - (1.0 - e)).abs() > 1e-9 && (r - (1.0 + e)).abs() > 1e-9 {
                    let h = 1e-7;
                    let fd = (clipped_surrogate(r + h, a, e).0 - clipped_surrogate(r - h, a, e).0) / (2.0 * h);
                    assert!((fd - d).abs() < 1e-6, "r {r} A {a} eps {e}: {d} vs {fd}");
                }
            }
        }
    }
    assert_eq!(clipped_surrogate(1.5, 2.0, 0.2).0, 2.4);
}

fn steps(params: &ParameterSet, seed: u64) -> Vec<Step> {
    let inst = Arc::new(generate_uniform_benchmark(seed, 3, 4, Interval::new(1, 99)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    collect_episode(inst, params, &PpoConfig::default(), &mut rng).unwrap().steps
}

/// Without clipping, value loss or entropy, and at the collecting
/// parameters, the objective's gradient is `mean[A grad log pi(a)]`.
#[test]
fn unclipped_objective_reduces_to_vanilla_policy_gradient() {
    let params = ParameterSet::new(ModelConfig { hidden: 64, ..ModelConfig::default() }, 4);
    let config = PpoConfig { clip: 1e12, value_coef: 0.0, entropy_coef: 0.0, ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let all: Vec<Step> = (0..4).flat_map(|s| steps(&params, s)).collect();
    let batch: Vec<Sample> =
        all.iter().map(|s| Sample { step: s, advantage: rng.gen_range(-5.0..5.0), target: 0.0 }).collect();
    let (parts, grads) = ppo_objective(&params, &batch, &config).unwrap();
    let mean_adv = batch.iter().map(|s| s.advantage).sum::<f64>() / batch.len() as f64;
    assert!((parts.surrogate - mean_adv).abs() < 1e-12);

    let mut expected = params.zero_gradients();
    for s in &batch {
        let (out, tape) = policy_with_tape(&params, &s.step.input, &s.step.candidates).unwrap();
        let a = s.step.action;
        let d: Vec<f64> = out
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| s.advantage * (if j == a { 1.0 } else { 0.0 } - p) / batch.len() as f64)
            .collect();
        policy_backward(&params, &tape, &d, 0.0, &mut expected).unwrap();
    }
    let scale = expected.l2_norm();
    assert!(scale > 0.0);
    for (g, e) in grads.tensors.iter().flatten().zip(expected.tensors.iter().flatten()) {
        assert!((g - e).abs() <= 1e-12 * scale, "{g} vs {e}");
    }
}

proptest! {
    #[test]
    fn convergence_detector_is_pure(stream in proptest::collection::vec(100.0f64..200.0, 0..60), window in 1usize..8) {
        let run = |xs: &[f64]| {
            let mut d = ConvergenceDetector::new(window, 1e-3);
            xs.iter().map(|&x| d.observe(x)).collect::<Vec<bool>>()
        };
        prop_assert_eq!(run(&stream), run(&stream));
    }

    #[test]
    fn detector_never_stops_while_improving(start in 100.0f64..1000.0, window in 1usize..6) {
        let mut d = ConvergenceDetector::new(window, 1e-3);
        let mut x = start;
        for _ in 0..50 {
            prop_assert!(!d.observe(x));
            x *= 0.99;
        }
        let x = d.best().unwrap();
        for i in 0..window {
            prop_assert_eq!(d.observe(x), i + 1 == window);
        }
    }
}
