// Scratch probe: sequence-feature magnitudes around faults.
use relayrl_core::feeder::{bundled, Phase, PhaseSet};
use relayrl_core::powerflow::{
    measure, sequence_components, solve, FaultSpec, FaultType, OperatingCondition,
};

fn main() {
    let net = bundled::feeder5();
    let nominal = solve(&net, &OperatingCondition::nominal()).unwrap();
    let (v0, i0) = measure(&net, &nominal, "R1").unwrap();
    println!(
        "R1 pre-fault:  |Vseq| {:?}  |Iseq| {:?}",
        sequence_components(&v0).magnitudes(),
        sequence_components(&i0).magnitudes()
    );
    for (t, phases, z) in [
        (FaultType::Slg, vec![Phase::A], 0.001),
        (FaultType::Slg, vec![Phase::A], 5.0),
        (FaultType::Slg, vec![Phase::A], 19.0),
        (FaultType::Ll, vec![Phase::A, Phase::B], 19.0),
        (FaultType::Llg, vec![Phase::A, Phase::B], 19.0),
        (FaultType::ThreePhase, vec![Phase::A, Phase::B, Phase::C], 19.0),
    ] {
        let mut cond = OperatingCondition::nominal();
        cond.fault = Some(FaultSpec {
            bus: net.bus_index("5").unwrap(),
            fault_type: t,
            phases: PhaseSet::from_phases(&phases),
            impedance_ohms: z,
        });
        let sol = solve(&net, &cond).unwrap();
        let (v, i) = measure(&net, &sol, "R1").unwrap();
        println!(
            "R1 {} z={:6}: |Vseq| {:?}  |Iseq| {:?}",
            t.label(),
            z,
            sequence_components(&v).magnitudes().map(|x| (x * 1e4).round() / 1e4),
            sequence_components(&i).magnitudes().map(|x| (x * 1e4).round() / 1e4)
        );
    }
}
