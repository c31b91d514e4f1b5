use super::*;
use crate::seed::Rng;
use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;

fn tr(state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, terminal: bool) -> Transition {
    Transition {
        state,
        action,
        reward,
        next_state: next,
        terminal,
    }
}

#[test]
fn zero_network_outputs_zero() {
    let net = QNetwork::zeros(&[4, 8, 11]);
    let out = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
    assert_eq!(out, vec![0.0; 11]);
}

#[test]
fn single_layer_forward_matches_hand_computation() {
    // One linear layer, dims [2, 2]: W = [[1, 2], [3, -1]], b = [0.5, -0.5].
    let mut net = QNetwork::zeros(&[2, 2]);
    net.layer_weights_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, -1.0]);
    net.layer_biases_mut(0).copy_from_slice(&[0.5, -0.5]);
    let out = net.forward(&[2.0, 1.0]).unwrap();
    assert_eq!(out, vec![1.0 * 2.0 + 2.0 * 1.0 + 0.5, 3.0 * 2.0 - 1.0 * 1.0 - 0.5]);
}

#[test]
fn relu_blocks_negative_preactivations() {
    // Two layers: the hidden unit is driven negative, so the output must be
    // exactly the bias of the head regardless of the hidden weight.
    let mut net = QNetwork::zeros(&[1, 1, 1]);
    net.layer_weights_mut(0)[0] = 5.0; // z = 5x
    net.layer_weights_mut(1)[0] = 3.0;
    net.layer_biases_mut(1)[0] = 0.25;
    let neg = net.forward(&[-2.0]).unwrap();
    assert_eq!(neg, vec![0.25], "dead ReLU passes only the head bias");
    let pos = net.forward(&[2.0]).unwrap();
    assert_eq!(pos, vec![3.0 * 10.0 + 0.25]);
}

#[test]
fn forward_rejects_bad_input_length() {
    let net = QNetwork::zeros(&[4, 11]);
    assert!(matches!(net.forward(&[1.0]), Err(AgentError::Dimension(_))));
}

#[test]
fn network_arity_is_eleven_for_default_config() {
    let cfg = TrainConfig::default();
    let mut rng = Rng::seed_from_u64(0);
    let net = QNetwork::random(&cfg.dims(50), &mut rng);
    assert_eq!(net.dims(), &[50, 128, 256, 128, 11]);
    assert_eq!(net.output_dim(), crate::env::ACTION_COUNT);
    assert!(net.is_finite());
}

#[test]
fn td_target_arithmetic() {
    // Online argmax at s' is action 2 where the target net holds 10:
    // y = 5 + 0.99 * 10 = 14.9.
    let mut online = QNetwork::zeros(&[1, 3]);
    online.layer_biases_mut(0).copy_from_slice(&[0.0, 1.0, 2.0]); // argmax = 2
    let mut target = QNetwork::zeros(&[1, 3]);
    target.layer_biases_mut(0).copy_from_slice(&[7.0, 3.0, 10.0]);
    let t = tr(vec![0.0], 0, 5.0, vec![0.0], false);
    let y = td_targets(&[&t], &online, &target, 0.99, true).unwrap();
    assert!((y[0] - 14.9).abs() < 1e-12);
}

#[test]
fn terminal_transitions_use_raw_reward() {
    let net = QNetwork::zeros(&[1, 3]);
    let t = tr(vec![0.0], 1, -120.0, vec![0.0], true);
    let y = td_targets(&[&t], &net, &net, 0.99, true).unwrap();
    assert_eq!(y, vec![-120.0]);
}

#[test]
fn double_dqn_uses_online_argmax_on_target_net() {
    // Online prefers action 0; the target net's own max is action 1. Double
    // DQN must evaluate the online argmax on the target net — the vanilla
    // max would give a different number.
    let mut online = QNetwork::zeros(&[1, 2]);
    online.layer_biases_mut(0).copy_from_slice(&[5.0, 1.0]); // argmax = 0
    let mut target = QNetwork::zeros(&[1, 2]);
    target.layer_biases_mut(0).copy_from_slice(&[2.0, 9.0]); // max at 1
    let t = tr(vec![0.0], 0, 0.0, vec![0.0], false);
    let double = td_targets(&[&t], &online, &target, 1.0, true).unwrap()[0];
    let vanilla = td_targets(&[&t], &online, &target, 1.0, false).unwrap()[0];
    assert_eq!(double, 2.0, "target value at the online argmax");
    assert_eq!(vanilla, 9.0, "vanilla max differs");
    assert_ne!(double, vanilla);
}

#[test]
fn zero_residual_gives_zero_gradients() {
    let mut rng = Rng::seed_from_u64(3);
    let net = QNetwork::random(&[4, 6, 3], &mut rng);
    let t = tr(vec![0.3, -0.2, 0.9, 0.1], 1, 0.0, vec![0.0; 4], true);
    let q = net.forward(&t.state).unwrap()[t.action];
    let (grads, loss) = td_gradients(&net, &[&t], &[q]).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.weights.iter().all(|l| l.iter().all(|g| *g == 0.0)));
    assert!(grads.biases.iter().all(|l| l.iter().all(|g| *g == 0.0)));
}

#[test]
fn single_linear_layer_gradient_closed_form() {
    // One sample, one linear layer: dL/dW_a = -2 (y - q) x, dL/db_a likewise.
    let mut net = QNetwork::zeros(&[2, 2]);
    net.layer_weights_mut(0).copy_from_slice(&[0.5, -1.0, 0.25, 0.75]);
    let x = vec![1.5, -2.0];
    let t = tr(x.clone(), 0, 0.0, vec![0.0; 2], true);
    let y = 3.0;
    let q = net.forward(&x).unwrap()[0];
    let (grads, _) = td_gradients(&net, &[&t], &[y]).unwrap();
    let expect = -2.0 * (y - q);
    assert!((grads.weights[0][0] - expect * x[0]).abs() < 1e-12);
    assert!((grads.weights[0][1] - expect * x[1]).abs() < 1e-12);
    assert!((grads.biases[0][0] - expect).abs() < 1e-12);
    // Untaken action row untouched.
    assert_eq!(grads.weights[0][2], 0.0);
    assert_eq!(grads.weights[0][3], 0.0);
    assert_eq!(grads.biases[0][1], 0.0);
}

/// Draw a random small net and batch, rejecting draws whose pre-activations
/// sit within `margin` of a ReLU kink (central differences would straddle
/// the non-differentiable point there).
pub(super) fn random_gradcheck_case(
    seed: u64,
    margin: f64,
) -> (QNetwork, Vec<Transition>, Vec<f64>) {
    let mut attempt = 0u64;
    loop {
        let mut rng = Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9).wrapping_add(attempt));
        let input = rng.gen_range(2..=8usize);
        let depth = rng.gen_range(1..=2usize);
        let mut dims = vec![input];
        for _ in 0..depth {
            dims.push(rng.gen_range(2..=8usize));
        }
        dims.push(rng.gen_range(2..=4usize));
        let net = QNetwork::random(&dims, &mut rng);
        let batch_size = rng.gen_range(1..=4usize);
        let batch: Vec<Transition> = (0..batch_size)
            .map(|_| {
                let state: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let action = rng.gen_range(0..*dims.last().unwrap());
                tr(state, action, 0.0, vec![0.0; input], true)
            })
            .collect();
        let targets: Vec<f64> = (0..batch_size).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let clear = batch.iter().all(|t| {
            let cache = net.forward_cached(&t.state).unwrap();
            cache.pre_activations[..cache.pre_activations.len() - 1]
                .iter()
                .all(|z| z.iter().all(|v| v.abs() > margin))
        });
        if clear {
            return (net, batch, targets);
        }
        attempt += 1;
    }
}

/// Relative error with a floor so near-zero components compare absolutely.
pub(super) fn gradcheck_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

#[test]
fn gradients_match_central_finite_differences() {
    for seed in 0..10 {
        let (net, batch, targets) = random_gradcheck_case(seed, 1e-3);
        let refs: Vec<&Transition> = batch.iter().collect();
        let (analytic, _) = td_gradients(&net, &refs, &targets).unwrap();
        let numeric = finite_difference_gradients(&net, &refs, &targets, 1e-5).unwrap();
        for l in 0..net.layer_count() {
            for i in 0..analytic.weights[l].len() {
                let e = gradcheck_rel_err(analytic.weights[l][i], numeric.weights[l][i]);
                assert!(e < 1e-4, "seed {seed} layer {l} w[{i}]: rel err {e}");
            }
            for i in 0..analytic.biases[l].len() {
                let e = gradcheck_rel_err(analytic.biases[l][i], numeric.biases[l][i]);
                assert!(e < 1e-4, "seed {seed} layer {l} b[{i}]: rel err {e}");
            }
        }
    }
}

#[test]
fn adam_leaves_parameters_alone_on_zero_gradient() {
    let mut rng = Rng::seed_from_u64(5);
    let mut net = QNetwork::random(&[3, 4, 2], &mut rng);
    let before = net.clone();
    let grads = GradientBuffers::zeros_like(&net);
    let mut state = AdamState::new(&net);
    adam_step(&mut net, &grads, &mut state, 1e-3);
    assert_eq!(net, before);
}

#[test]
fn adam_first_step_is_sign_scaled() {
    // At t=1 with bias correction, the update is -lr * g / (|g| + eps).
    let mut net = QNetwork::zeros(&[1, 1]);
    let mut grads = GradientBuffers::zeros_like(&net);
    grads.weights[0][0] = 0.3;
    let mut state = AdamState::new(&net);
    adam_step(&mut net, &grads, &mut state, 0.01);
    let expect = -0.01 * 0.3 / (0.3 + 1e-8);
    assert!((net.layer_weights(0)[0] - expect).abs() < 1e-12);
}

#[test]
fn adam_descends_a_quadratic_monotonically() {
    // Minimise f(w) = w^2 starting at w=1 with a step small enough that the
    // sign-scaled updates cannot overshoot.
    let mut net = QNetwork::zeros(&[1, 1]);
    net.layer_weights_mut(0)[0] = 1.0;
    let mut state = AdamState::new(&net);
    let mut last = 1.0f64;
    for _ in 0..100 {
        let w = net.layer_weights(0)[0];
        let mut grads = GradientBuffers::zeros_like(&net);
        grads.weights[0][0] = 2.0 * w;
        adam_step(&mut net, &grads, &mut state, 0.005);
        let f = net.layer_weights(0)[0].powi(2);
        assert!(f < last, "loss must decrease: {f} vs {last}");
        last = f;
    }
}

#[test]
fn soft_update_blends_and_converges() {
    let mut target = QNetwork::zeros(&[1, 1]);
    let mut online = QNetwork::zeros(&[1, 1]);
    online.layer_weights_mut(0)[0] = 1.0;
    soft_update(&mut target, &online, 0.005);
    assert!((target.layer_weights(0)[0] - 0.005).abs() < 1e-15);

    // target == online stays put.
    let mut same = online.clone();
    soft_update(&mut same, &online, 0.005);
    assert_eq!(same, online);

    // Repeated updates close the gap geometrically at ratio (1 - tau).
    let mut t = QNetwork::zeros(&[1, 1]);
    let mut gap = 1.0f64;
    for _ in 0..1000 {
        soft_update(&mut t, &online, 0.005);
        let new_gap = 1.0 - t.layer_weights(0)[0];
        assert!((new_gap - gap * 0.995).abs() < 1e-12);
        gap = new_gap;
    }
    assert!(gap < (0.995f64).powi(999));
}

#[test]
fn greedy_selection_and_tie_break() {
    let mut rng = Rng::seed_from_u64(7);
    let q = vec![0.0, 1.0, 5.0, 2.0, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0];
    // Tie between indices 2 and 7: lowest wins.
    assert_eq!(select_action(&q, 0.0, &mut rng), 2);
}

#[test]
fn full_exploration_is_uniform() {
    let mut rng = Rng::seed_from_u64(11);
    let q = vec![0.0; 11];
    let n = 100_000;
    let mut counts = [0usize; 11];
    for _ in 0..n {
        counts[select_action(&q, 1.0, &mut rng)] += 1;
    }
    for c in counts {
        let freq = c as f64 / n as f64;
        assert!((freq - 1.0 / 11.0).abs() < 0.01, "freq {freq}");
    }
}

#[test]
fn replay_evicts_fifo_at_capacity() {
    let mut buf = ReplayBuffer::new(REPLAY_CAPACITY);
    for k in 0..=REPLAY_CAPACITY {
        buf.push(tr(vec![k as f64], 0, 0.0, vec![0.0], false));
    }
    assert_eq!(buf.len(), REPLAY_CAPACITY);
    assert!(
        buf.iter().all(|t| t.state[0] != 0.0),
        "the first pushed item must be evicted"
    );
    assert!(buf.iter().any(|t| t.state[0] == REPLAY_CAPACITY as f64));
}

#[test]
fn replay_sampling_rules() {
    let mut rng = Rng::seed_from_u64(13);
    let mut buf = ReplayBuffer::new(8);
    assert!(buf.sample(1, &mut rng).is_none(), "underfilled buffer");
    buf.push(tr(vec![42.0], 3, 1.0, vec![0.0], false));
    let got = buf.sample(1, &mut rng).unwrap();
    assert_eq!(got[0].state[0], 42.0);
    assert!(buf.sample(2, &mut rng).is_none());
}

#[test]
fn replay_sampling_is_uniform() {
    let mut rng = Rng::seed_from_u64(17);
    let mut buf = ReplayBuffer::new(10);
    for k in 0..10 {
        buf.push(tr(vec![k as f64], 0, 0.0, vec![0.0], false));
    }
    let mut counts = [0usize; 10];
    let n = 100_000;
    for _ in 0..n / 10 {
        for t in buf.sample(10, &mut rng).unwrap() {
            counts[t.state[0] as usize] += 1;
        }
    }
    for c in counts {
        let freq = c as f64 / n as f64;
        assert!((freq - 0.1).abs() < 0.01, "freq {freq}");
    }
}

#[test]
fn weights_file_round_trips_bit_exact() {
    let mut rng = Rng::seed_from_u64(19);
    let net = QNetwork::random(&[50, 128, 256, 128, 11], &mut rng);
    let file = WeightsFile::from_network(&net, InputMode::Sequence, 8);
    let json = file.to_json();
    let parsed = WeightsFile::from_json(&json).unwrap();
    assert_eq!(parsed.m, 8);
    assert_eq!(parsed.input_mode, InputMode::Sequence);
    let back = parsed.into_network().unwrap();
    assert_eq!(net, back, "round-trip must be bit-exact");
    // Serialising again yields the identical document.
    assert_eq!(json, WeightsFile::from_network(&back, InputMode::Sequence, 8).to_json());
}

#[test]
fn weights_file_rejects_shape_mismatch() {
    let net = QNetwork::zeros(&[4, 3]);
    let mut file = WeightsFile::from_network(&net, InputMode::Phase, 2);
    file.layers[0].b.pop();
    assert!(matches!(file.into_network(), Err(AgentError::Weights(_))));
}

#[test]
fn training_step_is_bit_reproducible() {
    let run = || {
        let cfg = TrainConfig::default();
        let mut rng = Rng::seed_from_u64(23);
        let mut online = QNetwork::random(&[6, 8, 8, 4], &mut rng);
        let mut target = online.clone();
        let mut buf = ReplayBuffer::new(cfg.replay_capacity);
        for _ in 0..64 {
            let s: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s2: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            buf.push(tr(s, rng.gen_range(0..4), rng.gen_range(-120.0..100.0), s2, false));
        }
        let mut adam = AdamState::new(&online);
        for _ in 0..5 {
            let batch = buf.sample(cfg.batch_size, &mut rng).unwrap();
            let targets =
                td_targets(&batch, &online, &target, cfg.discount, cfg.double_dqn).unwrap();
            let (grads, _) = td_gradients(&online, &batch, &targets).unwrap();
            adam_step(&mut online, &grads, &mut adam, cfg.learning_rate);
            soft_update(&mut target, &online, cfg.tau);
        }
        (online, target)
    };
    let (a1, t1) = run();
    let (a2, t2) = run();
    assert_eq!(a1, a2);
    assert_eq!(t1, t2);
}

#[test]
fn epsilon_schedule_anneals_linearly_then_flattens() {
    let cfg = TrainConfig::default();
    let total = 1000;
    assert_eq!(cfg.epsilon_for_episode(0, total), 1.0);
    let mid = cfg.epsilon_for_episode(300, total);
    assert!((mid - 0.525).abs() < 1e-12, "halfway through the anneal: {mid}");
    assert!((cfg.epsilon_for_episode(600, total) - 0.05).abs() < 1e-12);
    assert!((cfg.epsilon_for_episode(999, total) - 0.05).abs() < 1e-12);
}
