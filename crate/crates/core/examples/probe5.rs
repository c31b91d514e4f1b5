// Scratch probe: nested two-relay coordination on feeder13.
use relayrl_core::agent::{GreedyNetPolicy, Policy, TrainConfig};
use relayrl_core::env::EnvConfig;
use relayrl_core::feeder::bundled;
use relayrl_core::harness::{evaluate, median_delay, EvalScenarioKind};
use relayrl_core::seed::SeedLineage;
use relayrl_core::trainer::train_all;
use std::collections::BTreeMap;
use std::time::Instant;

fn main() {
    let episodes: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(800);
    let eval_n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(500);

    let net = bundled::feeder13();
    let env_cfg = EnvConfig::default();
    let train_cfg = TrainConfig::default();
    let lineage = SeedLineage::new(31);

    let t0 = Instant::now();
    let run = train_all(&net, &env_cfg, &train_cfg, episodes, &lineage, |r| {
        println!(
            "phase {} done: final-window false ops {}",
            r.relay_id,
            r.curve.last().unwrap().false_operations_in_window
        );
        Ok(())
    })
    .unwrap();
    println!("trained both in {:.0}s", t0.elapsed().as_secs_f64());

    let mut policies: BTreeMap<String, Box<dyn Policy>> = run
        .results
        .iter()
        .map(|r| {
            (
                r.relay_id.clone(),
                Box::new(GreedyNetPolicy::new(r.weights.clone())) as Box<dyn Policy>,
            )
        })
        .collect();
    let report = evaluate(
        &net,
        &env_cfg,
        &mut policies,
        eval_n,
        &SeedLineage::new(999),
        "feeder13",
        EvalScenarioKind::Fault,
    )
    .unwrap();
    println!(
        "joint eval: successes {}/{} failures {:?}",
        report.successes, eval_n, report.failures
    );
    println!("primary: {:?}", report.response.primary);
    println!("backup:  {:?}", report.response.backup);
    let mid_primary = report.response.primary.get("MID").map(median_delay_flat);
    let sub_backup = report.response.backup.get("SUB").map(median_delay_flat);
    println!("median MID primary delay: {mid_primary:?}; median SUB backup delay: {sub_backup:?}");

    fn median_delay_flat(h: &relayrl_core::harness::DelayHistogram) -> f64 {
        median_delay(h).unwrap_or(f64::NAN)
    }
}
