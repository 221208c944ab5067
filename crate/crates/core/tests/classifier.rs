mod common;

use fedpandemic::classifier::{
    adam_step, forward, init_params, loss_and_gradient, train_local, AdamState, LabeledInput, MlpParameters,
    TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};
use fedpandemic::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn forward_matches_straight_line_oracle() {
    for seed in 0..20 {
        let mut rng = seeded(1000 + seed);
        let params = init_params(&mut rng);
        // nonzero biases exercise the affine terms too
        let values: Vec<f64> = params.values().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let params = params.with_values(&values).unwrap();
        let x = random_vec(&mut rng, 50);
        let got = forward(&params, &x).unwrap();
        let want = common::oracle_forward(&params, &x);
        assert!(((got - want) / want).abs() <= 1e-12, "seed {seed}: {got} vs {want}");
        assert!(got > 0.0 && got < 1.0);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let h = 1e-4;
    for seed in 0..20 {
        let (params, xs, labels) = common::gradient_case(&mut seeded(seed), 1e-2);
        let values = params.to_vec();
        let batch: Vec<LabeledInput> = xs.iter().zip(&labels).map(|(x, &y)| (x.as_slice(), y)).collect();
        let (loss, grad) = loss_and_gradient(&params, &batch);
        assert!((loss - common::oracle_loss(&params, &batch)).abs() <= 1e-12);

        let analytic = grad.to_vec();
        let mut worst = 0.0f64;
        for (k, &g) in analytic.iter().enumerate() {
            let mut plus = values.clone();
            plus[k] += h;
            let mut minus = values.clone();
            minus[k] -= h;
            let fd = (common::oracle_loss(&params.with_values(&plus).unwrap(), &batch)
                - common::oracle_loss(&params.with_values(&minus).unwrap(), &batch))
                / (2.0 * h);
            let scale = g.abs().max(fd.abs());
            if scale < 1e-3 {
                assert!((g - fd).abs() <= 1e-7, "seed {seed} component {k}: {g} vs {fd}");
            } else {
                let rel = (g - fd).abs() / scale;
                worst = worst.max(rel);
                assert!(rel <= 1e-5, "seed {seed} component {k}: {g} vs {fd} (rel {rel})");
            }
        }
        assert!(worst <= 1e-5);
    }
}

/// Textbook scalar Adam.
fn scalar_adam(theta0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> Vec<f64> {
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = grad(theta);
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g;
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m / (1.0 - ADAM_BETA1.powf(t as f64));
        let v_hat = v / (1.0 - ADAM_BETA2.powf(t as f64));
        theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        out.push(theta);
    }
    out
}

#[test]
fn adam_reproduces_scalar_oracle_on_a_quadratic() {
    // f(θ) = (θ − 3)², one tracked component; every other gradient is zero.
    let lr = 0.05;
    let expected = scalar_adam(0.0, lr, 100, |t| 2.0 * (t - 3.0));
    let mut params = MlpParameters::zeros();
    let mut state = AdamState::new(lr);
    for (step, want) in expected.iter().enumerate() {
        let theta = params.layers()[3].bias[0];
        let mut grad = MlpParameters::zeros();
        grad.layers_mut()[3].bias[0] = 2.0 * (theta - 3.0);
        adam_step(&mut params, &grad, &mut state).unwrap();
        let got = params.layers()[3].bias[0];
        assert!((got - want).abs() <= 1e-10, "step {step}: {got} vs {want}");
    }
    assert_eq!(state.step_count, 100);
    assert!(state.second_moment.values().all(|&v| v >= 0.0));
    assert!(params.values().take(params.num_values() - 1).all(|&v| v == 0.0));
}

#[test]
fn adam_first_step_displacement() {
    let mut params = MlpParameters::zeros();
    let g: Vec<f64> = (0..params.num_values()).map(|i| ((i % 7) as f64 - 3.0) * 0.37).collect();
    let grad = params.with_values(&g).unwrap();
    let mut state = AdamState::new(0.001);
    adam_step(&mut params, &grad, &mut state).unwrap();
    for (theta, g) in params.values().zip(&g) {
        let want = -0.001 * g / (g.abs() + ADAM_EPSILON);
        assert!((theta - want).abs() <= 1e-15);
    }
}

#[test]
fn adam_rejects_non_finite_gradient_without_side_effects() {
    let mut params = init_params(&mut seeded(3));
    let before = params.clone();
    let mut grad = MlpParameters::zeros();
    grad.layers_mut()[1].weights[4] = f64::NAN;
    let mut state = AdamState::new(0.001);
    assert!(adam_step(&mut params, &grad, &mut state).is_err());
    assert_eq!(params, before);
    assert_eq!(state, AdamState::new(0.001));
}

#[test]
fn separable_fixture_is_learned() {
    let ds = common::separable_dataset();
    for seed in 0..10 {
        let p0 = init_params(&mut seeded(500 + seed));
        let out = train_local(&p0, &ds, &TrainConfig::default(), &mut seeded(600 + seed)).unwrap();
        assert_eq!(common::training_accuracy(&out.params, &ds), 1.0, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_in_open_unit_interval(seed in any::<u64>(), scale in 0.0f64..5.0) {
        let mut rng = seeded(seed);
        let params = init_params(&mut rng);
        let x: Vec<f64> = random_vec(&mut rng, 50).into_iter().map(|v| v * scale).collect();
        let p = forward(&params, &x).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn duplicated_batch_invariance(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let params = init_params(&mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 50)).collect();
        let batch: Vec<LabeledInput> = xs.iter().map(|x| (x.as_slice(), 1.0)).collect();
        let doubled: Vec<LabeledInput> = batch.iter().chain(batch.iter()).copied().collect();
        let (l1, g1) = loss_and_gradient(&params, &batch);
        let (l2, g2) = loss_and_gradient(&params, &doubled);
        prop_assert!((l1 - l2).abs() <= 1e-12);
        for (a, b) in g1.values().zip(g2.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
