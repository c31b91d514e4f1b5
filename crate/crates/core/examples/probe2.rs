// Scratch probe: failure breakdown by fault type and impedance decade.
use relayrl_core::agent::{GreedyNetPolicy, Policy, TrainConfig};
use relayrl_core::env::{generate_scenario, Env, EnvConfig};
use relayrl_core::feeder::bundled;
use relayrl_core::harness::classify_episode;
use relayrl_core::powerflow::FaultType;
use relayrl_core::seed::SeedLineage;
use relayrl_core::trainer::train_relay;
use std::collections::BTreeMap;

fn main() {
    let episodes: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(600);
    let eval_n: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300);

    let net = bundled::feeder5().retain_relays(&["R1"]).unwrap();
    let env_cfg = EnvConfig::default();
    let train_cfg = TrainConfig::default();
    let lineage = SeedLineage::new(20240811);
    let result =
        train_relay(&net, &env_cfg, &train_cfg, 0, &BTreeMap::new(), episodes, &lineage).unwrap();
    let tail_fo = result.curve.last().unwrap().false_operations_in_window;
    println!("final-window false ops: {tail_fo}/50");

    let mut policy = GreedyNetPolicy::new(result.weights);
    let eval_lineage = SeedLineage::new(777);
    let mut by_bucket: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ep in 0..eval_n {
        let seed = eval_lineage.derive("eval-scenario", ep as u64);
        let scenario = generate_scenario(seed, &env_cfg, &net);
        let f = scenario.fault.unwrap();
        let decade = if f.impedance_ohms < 0.01 {
            "0.001-0.01"
        } else if f.impedance_ohms < 0.1 {
            "0.01-0.1"
        } else if f.impedance_ohms < 1.0 {
            "0.1-1"
        } else if f.impedance_ohms < 5.0 {
            "1-5"
        } else if f.impedance_ohms < 10.0 {
            "5-10"
        } else {
            "10-20"
        };
        let key = format!("{:4} z={}", label(f.fault_type), decade);
        let mut env = Env::reset(&net, &env_cfg, scenario, Default::default()).unwrap();
        let mut obs = env.observations();
        loop {
            let actions = vec![policy.act(&obs[0])];
            let r = env.step(&actions).unwrap();
            obs = r.observations;
            if r.done {
                break;
            }
        }
        let trace = env.into_trace();
        let c = classify_episode(&trace, &net, &env_cfg);
        let e = by_bucket.entry(key).or_insert((0, 0));
        e.1 += 1;
        if !c.success {
            e.0 += 1;
        }
    }
    let mut fail_total = 0;
    for (k, (fail, total)) in &by_bucket {
        println!("{k}: {fail}/{total} failures");
        fail_total += fail;
    }
    println!("total: {fail_total}/{eval_n}");
}

fn label(t: FaultType) -> &'static str {
    t.label()
}
