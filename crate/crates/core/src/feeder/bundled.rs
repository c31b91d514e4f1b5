//! Feeders shipped with the crate for tests, demos and the CLI.
//!
//! - `feeder2`: minimal two-bus feeder with one relay.
//! - `feeder5`: Y-shaped five-bus feeder; relays on both branches and at the
//!   root, with balanced loads.
//! - `feeder13`: thirteen-bus feeder with unbalanced loads and a two-relay
//!   substation / mid-feeder protection scheme.

use super::{parse_feeder, FeederNetwork};

pub const FEEDER2_JSON: &str = include_str!("../../data/feeder2.json");
pub const FEEDER5_JSON: &str = include_str!("../../data/feeder5.json");
pub const FEEDER13_JSON: &str = include_str!("../../data/feeder13.json");

pub fn feeder2() -> FeederNetwork {
    parse_feeder(FEEDER2_JSON).expect("bundled feeder2 is valid")
}

pub fn feeder5() -> FeederNetwork {
    parse_feeder(FEEDER5_JSON).expect("bundled feeder5 is valid")
}

pub fn feeder13() -> FeederNetwork {
    parse_feeder(FEEDER13_JSON).expect("bundled feeder13 is valid")
}

/// Look up a bundled feeder by its short name.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "feeder2" => Some(FEEDER2_JSON),
        "feeder5" => Some(FEEDER5_JSON),
        "feeder13" => Some(FEEDER13_JSON),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{protection_zones, training_order};

    #[test]
    fn feeder2_is_minimal() {
        let net = feeder2();
        assert_eq!(net.buses().len(), 2);
        assert_eq!(net.lines().len(), 1);
        assert_eq!(net.loads().len(), 1);
        assert_eq!(net.relays().len(), 1);
    }

    #[test]
    fn feeder5_matches_three_relay_radial_layout() {
        let net = feeder5();
        assert_eq!(net.buses().len(), 5);
        assert_eq!(net.lines().len(), 4);
        assert_eq!(net.relays().len(), 3);
    }

    #[test]
    fn feeder5_training_order_branches_before_root() {
        // Y shape: branch relays R3 and R4 precede the root relay R1, with
        // the bus-3 branch first by the bus-id tiebreak.
        let order = training_order(&feeder5());
        assert_eq!(order, vec!["R3", "R4", "R1"]);
    }

    #[test]
    fn feeder5_zones_by_subtree_enumeration() {
        let zones = protection_zones(&feeder5());
        let by_id = |id: &str| zones.iter().find(|z| z.relay_id == id).unwrap().clone();
        let set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect();
        assert_eq!(by_id("R3").primary, set(&["3"]));
        assert_eq!(by_id("R4").primary, set(&["4", "5"]));
        assert_eq!(by_id("R1").primary, set(&["2"]));
        assert_eq!(by_id("R1").backup, set(&["3", "4", "5"]));
        assert!(by_id("R3").backup.is_empty());
        assert!(by_id("R4").backup.is_empty());
    }

    #[test]
    fn feeder13_two_relay_scheme() {
        let net = feeder13();
        assert_eq!(net.buses().len(), 13);
        assert_eq!(net.relays().len(), 2);
        assert_eq!(training_order(&net), vec!["MID", "SUB"]);
        let zones = protection_zones(&net);
        let mid = zones.iter().find(|z| z.relay_id == "MID").unwrap();
        let sub = zones.iter().find(|z| z.relay_id == "SUB").unwrap();
        assert_eq!(
            mid.primary,
            ["7", "11", "12", "13"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(sub.backup, mid.primary);
        // SUB owns everything else below the source.
        assert_eq!(sub.primary.len(), 8);
    }
}
