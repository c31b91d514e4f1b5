//! Nested sequential training of relays in post-order.
//!
//! Relays train one at a time, leaf-most first. During relay i's phase the
//! already-trained relays act greedily from their frozen networks, relays
//! later in the order hold the null action, and relay i explores
//! epsilon-greedily with replay-gradient steps and soft target updates every
//! environment step. When relay i backs up a downstream neighbour, that
//! neighbour's per-episode deactivation coin is honoured so backup behaviour
//! is actually exercised.

pub mod artifacts;

pub use artifacts::{load_run, run_training_to_dir, Manifest, ManifestRelay};

use crate::agent::{
    adam_step, argmax, select_action, soft_update, td_gradients, td_targets, AdamState,
    AgentError, QNetwork, ReplayBuffer, TrainConfig, Transition,
};
use crate::env::{generate_scenario, Env, EnvConfig, EnvError, EpisodeTrace, RelayAction};
use crate::feeder::{training_order, FeederNetwork};
use crate::harness::classify_relay;
use crate::seed::SeedLineage;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Episodes in the trailing window used for the false-operation trace.
pub const FALSE_OP_WINDOW: usize = 50;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("relay `{relay}` produced non-finite weights")]
    NonFiniteWeights { relay: String },
    #[error("artifact error: {0}")]
    Artifact(String),
}

/// One point of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningCurvePoint {
    pub episode: usize,
    pub episodic_return: f64,
    /// False operations of the trained relay within the trailing
    /// [`FALSE_OP_WINDOW`] episodes (inclusive of this one).
    pub false_operations_in_window: usize,
}

/// Outcome of one relay's training phase.
#[derive(Debug, Clone)]
pub struct RelayTrainResult {
    pub relay_id: String,
    pub weights: QNetwork,
    pub curve: Vec<LearningCurvePoint>,
    /// Scenarios rejected or aborted for power-flow non-convergence; they do
    /// not count towards the episode budget.
    pub resampled_scenarios: usize,
}

/// A completed (or partially completed) nested run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub order: Vec<String>,
    pub results: Vec<RelayTrainResult>,
}

/// Train one relay for `episodes` episodes against frozen downstream
/// policies. Relays after it in the training order hold the null action.
pub fn train_relay(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    train_cfg: &TrainConfig,
    relay: usize,
    frozen: &BTreeMap<usize, QNetwork>,
    episodes: usize,
    lineage: &SeedLineage,
) -> Result<RelayTrainResult, TrainError> {
    env_cfg.validate().map_err(TrainError::Env)?;
    train_cfg.validate().map_err(TrainError::Agent)?;
    let relay_id = network.relays()[relay].id.clone();

    let dims = train_cfg.dims(env_cfg.observation_len());
    let mut init_rng = lineage.rng(&format!("init/{relay_id}"), 0);
    let mut online = QNetwork::random(&dims, &mut init_rng);
    let mut target = online.clone();
    let mut adam = AdamState::new(&online);
    let mut buffer = ReplayBuffer::new(train_cfg.replay_capacity);
    let mut explore_rng = lineage.rng(&format!("explore/{relay_id}"), 0);

    // Backup behaviour is trained by honouring the deactivation coin of the
    // immediate downstream relays; post-order guarantees they are frozen.
    let honored: BTreeSet<usize> = network
        .downstream_relays(relay)
        .into_iter()
        .filter(|d| frozen.contains_key(d))
        .collect();

    let mut frozen_policies: BTreeMap<usize, &QNetwork> =
        frozen.iter().map(|(k, v)| (*k, v)).collect();
    frozen_policies.remove(&relay);

    let mut curve = Vec::with_capacity(episodes);
    let mut window: VecDeque<bool> = VecDeque::with_capacity(FALSE_OP_WINDOW);
    let mut resampled = 0usize;
    let mut scenario_cursor = 0u64;
    let scenario_label = format!("scenario/{relay_id}");

    let mut episode = 0usize;
    while episode < episodes {
        let epsilon = train_cfg.epsilon_for_episode(episode, episodes);
        let seed = lineage.derive(&scenario_label, scenario_cursor);
        scenario_cursor += 1;
        let scenario = generate_scenario(seed, env_cfg, network);
        let mut env = match Env::reset(network, env_cfg, scenario, honored.clone()) {
            Ok(env) => env,
            Err(EnvError::NonConvergence { .. }) => {
                resampled += 1;
                continue;
            }
            Err(other) => return Err(other.into()),
        };

        let mut obs = env.observations();
        let mut episodic_return = 0.0;
        let trace: EpisodeTrace = loop {
            let actions = choose_actions(
                network,
                relay,
                &frozen_policies,
                &online,
                &obs,
                epsilon,
                &mut explore_rng,
            )?;
            let result = match env.step(&actions) {
                Ok(r) => r,
                Err(EnvError::NonConvergence { .. }) => {
                    // Aborted episode: resample; transitions already pushed
                    // remain valid experience.
                    resampled += 1;
                    break EpisodeTrace::aborted();
                }
                Err(other) => return Err(other.into()),
            };

            buffer.push(Transition {
                state: std::mem::take(&mut obs[relay]),
                action: actions[relay].0,
                reward: result.rewards[relay],
                next_state: result.observations[relay].clone(),
                terminal: result.done,
            });
            episodic_return += result.rewards[relay];

            if buffer.len() >= train_cfg.warmup_transitions.max(train_cfg.batch_size) {
                let batch = buffer
                    .sample(train_cfg.batch_size, &mut explore_rng)
                    .expect("buffer holds at least a batch");
                let targets = td_targets(
                    &batch,
                    &online,
                    &target,
                    train_cfg.discount,
                    train_cfg.double_dqn,
                )?;
                let (grads, _loss) = td_gradients(&online, &batch, &targets)?;
                adam_step(&mut online, &grads, &mut adam, train_cfg.learning_rate);
                soft_update(&mut target, &online, train_cfg.tau);
            }

            obs = result.observations;
            if result.done {
                break env.into_trace();
            }
        };

        if !trace.complete {
            continue; // aborted mid-episode, does not count towards M
        }

        let false_op = !classify_relay(&trace, network, env_cfg, relay).is_correct();
        if window.len() == FALSE_OP_WINDOW {
            window.pop_front();
        }
        window.push_back(false_op);
        curve.push(LearningCurvePoint {
            episode,
            episodic_return,
            false_operations_in_window: window.iter().filter(|&&x| x).count(),
        });
        episode += 1;
    }

    if !online.is_finite() {
        return Err(TrainError::NonFiniteWeights { relay: relay_id });
    }
    Ok(RelayTrainResult {
        relay_id,
        weights: online,
        curve,
        resampled_scenarios: resampled,
    })
}

pub(crate) fn choose_actions(
    network: &FeederNetwork,
    trained: usize,
    frozen: &BTreeMap<usize, &QNetwork>,
    online: &QNetwork,
    obs: &[Vec<f64>],
    epsilon: f64,
    rng: &mut crate::seed::Rng,
) -> Result<Vec<RelayAction>, AgentError> {
    let mut actions = Vec::with_capacity(network.relays().len());
    for r in 0..network.relays().len() {
        let a = if r == trained {
            let q = online.forward(&obs[r])?;
            RelayAction(select_action(&q, epsilon, rng))
        } else if let Some(net) = frozen.get(&r) {
            RelayAction(argmax(&net.forward(&obs[r])?))
        } else {
            crate::env::ACTION_RESET
        };
        actions.push(a);
    }
    Ok(actions)
}

/// Train every relay in post-order, freezing each result before the next
/// phase. `on_phase_complete` fires after each phase so callers can persist
/// partial runs.
pub fn train_all(
    network: &FeederNetwork,
    env_cfg: &EnvConfig,
    train_cfg: &TrainConfig,
    episodes_per_relay: usize,
    lineage: &SeedLineage,
    mut on_phase_complete: impl FnMut(&RelayTrainResult) -> Result<(), TrainError>,
) -> Result<TrainingRun, TrainError> {
    let order = training_order(network);
    let mut frozen: BTreeMap<usize, QNetwork> = BTreeMap::new();
    let mut results = Vec::with_capacity(order.len());
    for id in &order {
        let relay = network.relay_index(id).expect("order yields known relays");
        let result = train_relay(
            network,
            env_cfg,
            train_cfg,
            relay,
            &frozen,
            episodes_per_relay,
            lineage,
        )?;
        frozen.insert(relay, result.weights.clone());
        on_phase_complete(&result)?;
        results.push(result);
    }
    Ok(TrainingRun { order, results })
}

/// Learning-curve CSV: one row per (relay, episode).
pub fn learning_curve_csv(results: &[RelayTrainResult]) -> String {
    let mut out = String::from("relay,episode,episodic_return,false_operations_trailing50\n");
    for r in results {
        for p in &r.curve {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.relay_id, p.episode, p.episodic_return, p.false_operations_in_window
            ));
        }
    }
    out
}

/// Mean and (population) standard deviation of episodic return per episode
/// index across repeated runs, for envelope plots.
pub fn aggregate_curves(runs: &[Vec<LearningCurvePoint>]) -> Vec<(usize, f64, f64)> {
    let Some(len) = runs.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|e| {
            let vals: Vec<f64> = runs.iter().map(|r| r[e].episodic_return).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            (e, mean, var.sqrt())
        })
        .collect()
}
