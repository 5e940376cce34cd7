//! Independent numerical checks used by the `selftest` subcommand and by the
//! test suites: finite-difference gradients, sum-tree sampling frequencies and
//! channel stationarity. None of these reuse the code path they verify.

use crate::env::{evolve_channels, sample_initial_channels, SystemConfig};
use crate::nn::{Activation, Gradients, LayerSpec, Mlp};
use crate::replay::{ExperienceUnit, PrioritizedBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference gradients of `output_gradient . net(x)` with respect to
/// every parameter and input coordinate. Built on the forward pass only, so it
/// is an independent oracle for [`Mlp::backward`].
pub fn finite_difference_gradients(net: &Mlp, x: &[f64], output_gradient: &[f64], h: f64) -> Gradients {
    let scalar = |net: &Mlp, x: &[f64]| -> f64 {
        let out = net.forward_value(x).expect("probe input length");
        out.iter().zip(output_gradient).map(|(o, g)| o * g).sum()
    };
    let mut grads = Gradients::zeros_like(net);
    for (l, layer) in net.layers().iter().enumerate() {
        for w in 0..layer.weights.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            perturb_weight(&mut plus, l, w, h);
            perturb_weight(&mut minus, l, w, -h);
            grads.layers[l].weights[w] = (scalar(&plus, x) - scalar(&minus, x)) / (2.0 * h);
        }
        for b in 0..layer.bias.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            perturb_bias(&mut plus, l, b, h);
            perturb_bias(&mut minus, l, b, -h);
            grads.layers[l].bias[b] = (scalar(&plus, x) - scalar(&minus, x)) / (2.0 * h);
        }
    }
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        grads.input[i] = (scalar(net, &xp) - scalar(net, &xm)) / (2.0 * h);
    }
    grads
}

fn perturb_weight(net: &mut Mlp, layer: usize, idx: usize, delta: f64) {
    net.layers_mut()[layer].weights[idx] += delta;
}

fn perturb_bias(net: &mut Mlp, layer: usize, idx: usize, delta: f64) {
    net.layers_mut()[layer].bias[idx] += delta;
}

/// Relative error with a small absolute floor so coordinates that are exactly
/// zero on both sides compare as equal.
pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst = 0.0f64;
    let mut consider = |x: f64, y: f64| {
        let denom = x.abs().max(y.abs()).max(1e-6);
        worst = worst.max((x - y).abs() / denom);
    };
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for (x, y) in la.weights.iter().zip(&lb.weights) {
            consider(*x, *y);
        }
        for (x, y) in la.bias.iter().zip(&lb.bias) {
            consider(*x, *y);
        }
    }
    for (x, y) in a.input.iter().zip(&b.input) {
        consider(*x, *y);
    }
    worst
}

/// Runs the backprop-versus-finite-differences comparison over a seeded matrix
/// of random layer configurations (depths 1-3, every activation).
pub struct GradientCheckReport {
    pub configurations: usize,
    pub max_relative_error: f64,
}

pub fn gradient_check_suite(seed: u64) -> GradientCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let activations = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ];
    let mut configurations = 0;
    let mut worst = 0.0f64;
    for depth in 1..=3 {
        for &act in &activations {
            for _ in 0..2 {
                let mut specs = Vec::new();
                let mut prev = rng.random_range(2..6);
                for _ in 0..depth {
                    let next = rng.random_range(2..7);
                    specs.push(LayerSpec::new(prev, next, act));
                    prev = next;
                }
                let net = Mlp::init(&specs, &mut rng).expect("valid specs");
                let x: Vec<f64> = (0..net.input_size())
                    .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                    .collect();
                let g: Vec<f64> = (0..net.output_size())
                    .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                    .collect();
                let (_, cache) = net.forward(&x).expect("probe input");
                let analytic = net.backward(cache, &g).expect("probe gradient");
                let numeric = finite_difference_gradients(&net, &x, &g, 1e-5);
                worst = worst.max(max_relative_error(&analytic, &numeric));
                configurations += 1;
            }
        }
    }
    GradientCheckReport {
        configurations,
        max_relative_error: worst,
    }
}

pub struct SumTreeCheckReport {
    pub draws: usize,
    pub max_frequency_error: f64,
    pub chi_square: f64,
    pub chi_square_critical: f64,
    pub churn_operations: usize,
    pub root_deviation: f64,
}

/// Checks the proportional sampling law on priorities (1, 1, 2) with
/// `alpha = 1` against the exact probabilities (0.25, 0.25, 0.5), then hammers
/// a second tree with random pushes and priority updates and verifies the
/// node-sum invariant.
pub fn sum_tree_check(seed: u64, draws: usize, churn_operations: usize) -> SumTreeCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |tag: f64| ExperienceUnit {
        state_features: vec![tag],
        action_raw: vec![tag],
        reward: 0,
        next_state_features: vec![tag],
    };

    let mut buf = PrioritizedBuffer::new(4, 1.0, 0.4, 0.01);
    for i in 0..3 {
        buf.push(unit(i as f64));
    }
    // |td| + 0.01 lands exactly on the target priorities.
    buf.update_priorities(&[0, 1, 2], &[0.99, 0.99, 1.99])
        .expect("fresh indices");
    let expected = [0.25, 0.25, 0.5];
    let mut counts = [0usize; 3];
    let batch = 4;
    for _ in 0..draws / batch {
        let sampled = buf.sample(batch, &mut rng).expect("enough units");
        for ix in sampled.indices {
            counts[ix] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let mut max_frequency_error = 0.0f64;
    let mut chi_square = 0.0;
    for (count, expect) in counts.iter().zip(expected) {
        let freq = *count as f64 / total as f64;
        max_frequency_error = max_frequency_error.max((freq - expect).abs());
        let expected_count = expect * total as f64;
        chi_square += (*count as f64 - expected_count).powi(2) / expected_count;
    }

    let mut churn = PrioritizedBuffer::new(128, 0.6, 0.4, 0.01);
    for step in 0..churn_operations {
        if churn.len() < 4 || rng.random::<f64>() < 0.5 {
            churn.push(unit(step as f64));
        } else {
            let idx = rng.random_range(0..churn.len());
            let td = rng.random::<f64>() * 8.0 - 4.0;
            churn.update_priorities(&[idx], &[td]).expect("valid index");
        }
    }
    churn
        .check_tree_consistency(1e-9)
        .expect("sum tree invariant");

    SumTreeCheckReport {
        draws: total,
        max_frequency_error,
        chi_square,
        // 0.99 quantile of chi-square with 2 degrees of freedom.
        chi_square_critical: 9.210,
        churn_operations,
        root_deviation: churn.root_deviation(),
    }
}

pub struct StationarityReport {
    /// (rho, worst relative deviation of pooled E|h|^2 from sigma^2).
    pub per_rho: Vec<(f64, f64)>,
    /// Bit-exact invariance held in the rho = 1 run.
    pub identity_exact: bool,
}

/// Starts each hop from its stationary law and evolves `steps` slots,
/// pooling `|h|^2` over time and coefficients; the pooled mean must stay
/// within the Monte-Carlo tolerance of the configured variance.
pub fn stationarity_check(seed: u64, steps: usize, rhos: &[f64]) -> StationarityReport {
    let mut per_rho = Vec::new();
    let mut identity_exact = true;
    for (i, &rho) in rhos.iter().enumerate() {
        let config = SystemConfig {
            correlation: rho,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut state = sample_initial_channels(&config, &mut rng);
        let initial = state.clone();
        let mut sum_first = 0.0;
        let mut n_first = 0usize;
        let mut sum_second = 0.0;
        let mut n_second = 0usize;
        for _ in 0..steps {
            state = evolve_channels(&state, &config, &mut rng);
            for v in &state.first_hop {
                for c in &v.coefficients {
                    sum_first += c.norm_sqr();
                    n_first += 1;
                }
            }
            for v in &state.second_hop {
                for c in &v.coefficients {
                    sum_second += c.norm_sqr();
                    n_second += 1;
                }
            }
        }
        if rho == 1.0 {
            identity_exact &= state.first_hop == initial.first_hop
                && state.second_hop == initial.second_hop;
        }
        let dev_first =
            (sum_first / n_first as f64 - config.channel_variance_first_hop).abs()
                / config.channel_variance_first_hop;
        let dev_second =
            (sum_second / n_second as f64 - config.channel_variance_second_hop).abs()
                / config.channel_variance_second_hop;
        per_rho.push((rho, dev_first.max(dev_second)));
    }
    StationarityReport {
        per_rho,
        identity_exact,
    }
}
