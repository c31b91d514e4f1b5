// Scratch probe: desk-scale training speed and failure rate.
use relayrl_core::agent::{GreedyNetPolicy, Policy, TrainConfig};
use relayrl_core::env::EnvConfig;
use relayrl_core::feeder::bundled;
use relayrl_core::harness::{evaluate, EvalScenarioKind};
use relayrl_core::seed::SeedLineage;
use relayrl_core::trainer::train_relay;
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let episodes: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300);
    let eval_n: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);

    let net = bundled::feeder5().retain_relays(&["R1"]).unwrap();
    let env_cfg = EnvConfig::default();
    let train_cfg = TrainConfig::default();
    let lineage = SeedLineage::new(20240811);

    let t0 = Instant::now();
    let result = train_relay(&net, &env_cfg, &train_cfg, 0, &BTreeMap::new(), episodes, &lineage)
        .unwrap();
    let train_secs = t0.elapsed().as_secs_f64();

    let tail = &result.curve[result.curve.len().saturating_sub(50)..];
    let tail_mean: f64 = tail.iter().map(|p| p.episodic_return).sum::<f64>() / tail.len() as f64;
    let tail_fo = result.curve.last().unwrap().false_operations_in_window;
    println!(
        "train: {episodes} episodes in {train_secs:.1}s ({:.1} ms/episode); tail mean return {tail_mean:.1}; false ops in final window {tail_fo}",
        1000.0 * train_secs / episodes as f64
    );

    let t1 = Instant::now();
    let mut policies: BTreeMap<String, Box<dyn Policy>> = BTreeMap::from([(
        "R1".to_string(),
        Box::new(GreedyNetPolicy::new(result.weights)) as Box<dyn Policy>,
    )]);
    let report = evaluate(
        &net,
        &env_cfg,
        &mut policies,
        eval_n,
        &SeedLineage::new(777),
        "feeder5",
        EvalScenarioKind::Fault,
    )
    .unwrap();
    println!(
        "eval: {eval_n} episodes in {:.1}s; successes {} failures {:?} rate {:.2}%",
        t1.elapsed().as_secs_f64(),
        report.successes,
        report.failures,
        100.0 * report.failure_rate()
    );
    println!("primary histograms: {:?}", report.response.primary);
}
