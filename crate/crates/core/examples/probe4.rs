// Scratch probe: train, save weights, then inspect Q-values on weak faults.
use relayrl_core::agent::{QNetwork, TrainConfig, WeightsFile};
use relayrl_core::env::{generate_scenario, Env, EnvConfig, RelayAction, ACTION_RESET};
use relayrl_core::feeder::{bundled, Phase, PhaseSet};
use relayrl_core::powerflow::{FaultSpec, FaultType};
use relayrl_core::seed::SeedLineage;
use relayrl_core::trainer::train_relay;
use std::collections::BTreeMap;

fn main() {
    let path = "/tmp/probe4.weights.json";
    let net = bundled::feeder5().retain_relays(&["R1"]).unwrap();
    let env_cfg = EnvConfig::default();

    let weights: QNetwork = if let Ok(text) = std::fs::read_to_string(path) {
        WeightsFile::from_json(&text).unwrap().into_network().unwrap()
    } else {
        let episodes: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
        let train_cfg = TrainConfig::default();
        let lineage = SeedLineage::new(20240811);
        let r = train_relay(&net, &env_cfg, &train_cfg, 0, &BTreeMap::new(), episodes, &lineage).unwrap();
        std::fs::write(path, WeightsFile::from_network(&r.weights, env_cfg.input_mode, env_cfg.m).to_json()).unwrap();
        r.weights
    };

    // Weak SLG at the far bus.
    for z in [8.0, 15.0, 19.0] {
        let mut s = generate_scenario(5000, &env_cfg, &net);
        s.fault = Some(FaultSpec {
            bus: net.bus_index("5").unwrap(),
            fault_type: FaultType::Slg,
            phases: PhaseSet::from_phases(&[Phase::A]),
            impedance_ohms: z,
        });
        s.fault_onset = 20;
        println!("=== SLG z={z} at bus 5, onset 20 ===");
        let mut env = Env::reset(&net, &env_cfg, s, Default::default()).unwrap();
        let mut obs = env.observations();
        for t in 1..=30 {
            let q = weights.forward(&obs[0]).unwrap();
            let best = relayrl_core::agent::argmax(&q);
            let action = RelayAction(best);
            if (18..=28).contains(&t) {
                let qr: Vec<String> = q.iter().map(|v| format!("{v:6.1}")).collect();
                let block = &obs[0][obs[0].len() - 2 - 6..obs[0].len() - 2];
                println!(
                    "t={t:2} act={best:2} q=[{}] |I0|={:.3} |I1|={:.3} |I2|={:.3}",
                    qr.join(","),
                    block[3],
                    block[4],
                    block[5]
                );
            }
            let r = env.step(&[if t < 50 { action } else { ACTION_RESET }]).unwrap();
            obs = r.observations;
            if r.done {
                break;
            }
        }
    }
}
