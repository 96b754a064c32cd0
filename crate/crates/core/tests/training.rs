use std::ops::ControlFlow;

use qvgc::autodiff::{batch_gradient, grad_finite_difference, grad_theta_parameter_shift, parameter_shift_report};
use qvgc::encoders::FeatureMapSpec;
use qvgc::gnn::{GnnConfig, GnnModel, Graph};
use qvgc::optim::{adam_step, nft_minimize_observed, Adam, NftConfig, TraceRecord};
use qvgc::vqc::{Label, VqcModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, f_in: usize, rng: &mut impl Rng) -> Graph {
    let features = (0..n * f_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.35) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, f_in, features, edges, rng.gen_range(0..2)).unwrap()
}

#[test]
fn amplitude_theta_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let d = rng.gen_range(2..=12);
        let model = VqcModel::with_random_theta(FeatureMapSpec::amplitude(d), 2, case).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let label = Label::from_class(rng.gen_range(0..2));
        let ps = grad_theta_parameter_shift(&model, &x, label).unwrap();
        let fd = grad_finite_difference(&model, &x, label, 1e-5).unwrap();
        for (a, b) in ps.iter().zip(&fd.d_theta_q) {
            assert!((a - b).abs() < 1e-6, "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let model = VqcModel::with_random_theta(FeatureMapSpec::zz(3, 2), 2, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
    let ys: Vec<Label> = (0..7).map(|i| Label::from_class(i % 2)).collect();
    let batch = batch_gradient(&model, &xs, &ys, true).unwrap();
    let mut mean = vec![0.0; model.n_params()];
    for (x, &y) in xs.iter().zip(&ys) {
        let r = parameter_shift_report(&model, x, y).unwrap();
        for (m, g) in mean.iter_mut().zip(&r.d_theta_q) {
            *m += g / xs.len() as f64;
        }
    }
    for (a, b) in batch.d_theta_q.iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((batch.loss - model.loss(&xs, &ys).unwrap()).abs() < 1e-12);
}

#[test]
fn nft_with_verification_never_increases_the_loss() {
    let model = VqcModel::with_random_theta(FeatureMapSpec::zz(2, 1), 2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<Vec<f64>> = (0..12).map(|_| (0..2).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
    let ys: Vec<Label> = (0..12).map(|i| Label::from_class((i % 2) as u8)).collect();
    let objective = |t: &[f64]| model.loss_with(&xs, &ys, t);
    let mut last = objective(&model.theta_q).unwrap();
    let config = NftConfig {
        sweeps: 3,
        verify_steps: true,
    };
    let r = nft_minimize_observed(objective, &model.theta_q, config, |_: &TraceRecord, p: &[f64]| {
        let v = model.loss_with(&xs, &ys, p).unwrap();
        assert!(v <= last + 1e-12, "{v} > {last}");
        last = v;
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(r.value <= model.loss(&xs, &ys).unwrap());
}

#[test]
fn adam_matches_hand_rolled_update() {
    let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
    let grads = [[0.5, -2.0], [0.1, 0.3], [-1.0, 0.0]];
    let mut state = Adam::new(2, lr);
    let mut x = vec![1.0, -1.0];
    let (mut m, mut v, mut y) = ([0.0; 2], [0.0; 2], [1.0, -1.0]);
    for (t, g) in grads.iter().enumerate() {
        x = adam_step(&mut state, &x, g).unwrap();
        let t = (t + 1) as i32;
        for i in 0..2 {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1.powi(t));
            let vh = v[i] / (1.0 - b2.powi(t));
            y[i] -= lr * mh / (vh.sqrt() + eps);
        }
        for i in 0..2 {
            assert!((x[i] - y[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn gnn_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = GnnConfig {
        f_in: 3,
        hidden: 5,
        n_layers: 2,
        embed_dim: 4,
        head_hidden: 0,
    };
    for seed in 0..5 {
        let model = GnnModel::init(config, seed).unwrap();
        let graph = random_graph(7, 3, &mut rng);
        let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |m: &GnnModel| -> f64 { m.embed(&graph).unwrap().iter().zip(&weights).map(|(a, b)| a * b).sum() };
        let cache = model.forward(&graph).unwrap();
        let grad = model.backward(&graph, &cache, &weights).unwrap();
        let h = 1e-6;
        for k in 0..model.n_params() {
            let mut up = model.clone();
            up.params_mut()[k] += h;
            let mut down = model.clone();
            down.params_mut()[k] -= h;
            let fd = (objective(&up) - objective(&down)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "seed {seed} param {k}: {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn gnn_embedding_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = GnnModel::init(GnnConfig::new(4, 6), 1).unwrap();
    for _ in 0..10 {
        let graph = random_graph(12, 4, &mut rng);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut rng);
        let a = model.embed(&graph).unwrap();
        let b = model.embed(&graph.permuted(&perm).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn classification_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = GnnConfig {
        f_in: 3,
        hidden: 4,
        n_layers: 2,
        embed_dim: 3,
        head_hidden: 5,
    };
    let model = GnnModel::init(config, 4).unwrap();
    let graph = random_graph(6, 3, &mut rng);
    let (_, grad) = model.classification_loss_grad(&graph).unwrap();
    let h = 1e-6;
    for k in 0..model.n_params() {
        let mut up = model.clone();
        up.params_mut()[k] += h;
        let mut down = model.clone();
        down.params_mut()[k] -= h;
        let fd = (up.classification_loss_grad(&graph).unwrap().0 - down.classification_loss_grad(&graph).unwrap().0) / (2.0 * h);
        assert!((fd - grad[k]).abs() < 1e-6, "param {k}: {fd} vs {}", grad[k]);
    }
}
