//! Protection zones and the nested-training relay order.

use super::FeederNetwork;
use std::collections::BTreeSet;

/// Primary and backup responsibility of one relay, as bus-id sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionZone {
    pub relay_id: String,
    /// Buses between the relay and the next downstream protective device.
    pub primary: BTreeSet<String>,
    /// Union of the primary zones of the immediate downstream relays;
    /// empty for leaf relays.
    pub backup: BTreeSet<String>,
}

/// Relay ids in post-order depth-first traversal from the source root: every
/// relay in a relay's downstream subtree appears before it. Sibling subtrees
/// are visited in ascending bus-id order.
pub fn training_order(network: &FeederNetwork) -> Vec<String> {
    let mut order = Vec::with_capacity(network.relays().len());
    post_order(network, network.source().bus, &mut order);
    order
}

fn post_order(network: &FeederNetwork, bus: usize, order: &mut Vec<String>) {
    for &child in network.children(bus) {
        post_order(network, child, order);
        let line = network.parent_line(child).expect("child has a parent line");
        if let Some(relay) = network
            .relays()
            .iter()
            .find(|r| r.line == line)
        {
            order.push(relay.id.clone());
        }
    }
}

/// Protection zones for every relay, in the network's relay order.
pub fn protection_zones(network: &FeederNetwork) -> Vec<ProtectionZone> {
    (0..network.relays().len())
        .map(|ri| {
            let primary: BTreeSet<String> = network
                .primary_zone(ri)
                .into_iter()
                .map(|b| network.bus_id(b).to_string())
                .collect();
            let backup: BTreeSet<String> = network
                .downstream_relays(ri)
                .into_iter()
                .flat_map(|d| network.primary_zone(d))
                .map(|b| network.bus_id(b).to_string())
                .collect();
            ProtectionZone {
                relay_id: network.relays()[ri].id.clone(),
                primary,
                backup,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::parse_feeder;

    /// Straight chain 1-2-3-4 with relays A on (1,2), B on (2,3), C on (3,4),
    /// mirroring a three-relay radial line.
    fn chain() -> FeederNetwork {
        let z = serde_json::json!(
            [[[0.05,0.1],[0.0,0.0],[0.0,0.0]],
             [[0.0,0.0],[0.05,0.1],[0.0,0.0]],
             [[0.0,0.0],[0.0,0.0],[0.05,0.1]]]);
        let doc = serde_json::json!({
            "buses": [
                {"id": "1", "nominal_voltage_v": 2400.0, "phases": "ABC"},
                {"id": "2", "nominal_voltage_v": 2400.0, "phases": "ABC"},
                {"id": "3", "nominal_voltage_v": 2400.0, "phases": "ABC"},
                {"id": "4", "nominal_voltage_v": 2400.0, "phases": "ABC"}
            ],
            "lines": [
                {"from": "1", "to": "2", "impedance_ohms": z},
                {"from": "2", "to": "3", "impedance_ohms": z},
                {"from": "3", "to": "4", "impedance_ohms": z}
            ],
            "loads": [
                {"bus": "4", "power_va": [[100000.0,0.0],[100000.0,0.0],[100000.0,0.0]]}
            ],
            "generators": [],
            "source": {"bus": "1", "voltage_v":
                [[2400.0,0.0],[-1200.0,-2078.4609690826528],[-1200.0,2078.4609690826528]]},
            "relays": [
                {"id": "A", "from": "1", "to": "2"},
                {"id": "B", "from": "2", "to": "3"},
                {"id": "C", "from": "3", "to": "4"}
            ]
        });
        parse_feeder(&doc.to_string()).unwrap()
    }

    #[test]
    fn chain_trains_leaf_first() {
        let order = training_order(&chain());
        assert_eq!(order, vec!["C", "B", "A"]);
    }

    #[test]
    fn chain_zones_and_backups() {
        let net = chain();
        let zones = protection_zones(&net);
        let by_id = |id: &str| zones.iter().find(|z| z.relay_id == id).unwrap();
        assert_eq!(by_id("A").primary, ["2"].iter().map(|s| s.to_string()).collect());
        assert_eq!(by_id("B").primary, ["3"].iter().map(|s| s.to_string()).collect());
        assert_eq!(by_id("C").primary, ["4"].iter().map(|s| s.to_string()).collect());
        // B backs up C's zone, C is a leaf relay.
        assert_eq!(by_id("B").backup, by_id("C").primary);
        assert!(by_id("C").backup.is_empty());
    }

    #[test]
    fn single_relay_order_is_singleton() {
        let net = chain().retain_relays(&["B"]).unwrap();
        assert_eq!(training_order(&net), vec!["B"]);
        // With only B the primary zone extends to the end of the feeder.
        let zones = protection_zones(&net);
        assert_eq!(
            zones[0].primary,
            ["3", "4"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn zone_partition_covers_all_downstream_buses() {
        let net = chain();
        let zones = protection_zones(&net);
        let mut seen = std::collections::BTreeMap::new();
        for z in &zones {
            for b in &z.primary {
                *seen.entry(b.clone()).or_insert(0usize) += 1;
            }
        }
        for bus in ["2", "3", "4"] {
            assert_eq!(seen.get(bus), Some(&1), "bus {bus} owned exactly once");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random radial feeder document: bus i attaches to a random earlier
        /// bus; a random subset of lines carries relays.
        fn random_feeder(n: usize, parents: &[usize], relay_lines: &[bool]) -> FeederNetwork {
            let z = serde_json::json!(
                [[[0.5,1.0],[0.0,0.0],[0.0,0.0]],
                 [[0.0,0.0],[0.5,1.0],[0.0,0.0]],
                 [[0.0,0.0],[0.0,0.0],[0.5,1.0]]]);
            let buses: Vec<_> = (1..=n)
                .map(|i| serde_json::json!({"id": i.to_string(), "nominal_voltage_v": 7200.0, "phases": "ABC"}))
                .collect();
            let lines: Vec<_> = (2..=n)
                .map(|i| {
                    serde_json::json!({
                        "from": (parents[i - 2] + 1).to_string(),
                        "to": i.to_string(),
                        "impedance_ohms": z
                    })
                })
                .collect();
            let relays: Vec<_> = lines
                .iter()
                .enumerate()
                .filter(|(li, _)| relay_lines[*li])
                .map(|(li, l)| {
                    serde_json::json!({"id": format!("P{li}"), "from": l["from"], "to": l["to"]})
                })
                .collect();
            let doc = serde_json::json!({
                "buses": buses,
                "lines": lines,
                "loads": [],
                "generators": [],
                "source": {"bus": "1", "voltage_v":
                    [[7200.0,0.0],[-3600.0,-6235.382907247958],[-3600.0,6235.382907247958]]},
                "relays": relays,
            });
            parse_feeder(&doc.to_string()).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn order_is_subtree_consistent_and_zones_partition(
                n in 2usize..12,
                seed in any::<u64>(),
            ) {
                use rand::{Rng as _, SeedableRng as _};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let parents: Vec<usize> = (2..=n).map(|i| rng.gen_range(0..i - 1)).collect();
                let relay_lines: Vec<bool> = (0..n - 1).map(|_| rng.gen_bool(0.5)).collect();
                let net = random_feeder(n, &parents, &relay_lines);

                // Tree invariant holds by construction/validation.
                prop_assert_eq!(net.lines().len(), net.buses().len() - 1);

                // training_order is a permutation of relay ids...
                let order = training_order(&net);
                let mut sorted = order.clone();
                sorted.sort();
                let mut ids: Vec<String> =
                    net.relays().iter().map(|r| r.id.clone()).collect();
                ids.sort();
                prop_assert_eq!(sorted, ids);

                // ...and every relay in a relay's downstream subtree appears
                // strictly before it (explicit ancestor check).
                let position: std::collections::BTreeMap<&str, usize> =
                    order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                for (ri, relay) in net.relays().iter().enumerate() {
                    let mut anc = net.lines()[relay.line].from;
                    // Walk to the root collecting ancestor relays.
                    loop {
                        let Some(line) = net.parent_line(anc) else { break };
                        if let Some(up) = net.relays().iter().find(|r| r.line == line) {
                            prop_assert!(
                                position[relay.id.as_str()] < position[up.id.as_str()],
                                "relay {} must precede its ancestor {}",
                                relay.id,
                                up.id
                            );
                        }
                        anc = net.parent(anc).unwrap();
                    }
                    let _ = ri;
                }

                // Zones partition: every bus below the first relay belongs to
                // exactly one primary zone.
                let zones = protection_zones(&net);
                let mut owners: std::collections::BTreeMap<String, usize> = Default::default();
                for z in &zones {
                    for bus in &z.primary {
                        *owners.entry(bus.clone()).or_default() += 1;
                    }
                }
                for (bus, count) in &owners {
                    prop_assert_eq!(*count, 1, "bus {} owned by {} zones", bus, count);
                }
                for b in 0..net.buses().len() {
                    let covered = owners.contains_key(net.bus_id(b));
                    prop_assert_eq!(covered, net.zone_owner(b).is_some());
                }
            }
        }
    }
}
