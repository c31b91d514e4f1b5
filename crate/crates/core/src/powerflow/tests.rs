use super::model::V_CONST_POWER_MIN_PU;
use super::*;
use crate::feeder::{bundled, parse_feeder, Phase};

fn no_load_feeder5() -> FeederNetwork {
    let mut doc: serde_json::Value = serde_json::from_str(bundled::FEEDER5_JSON).unwrap();
    doc["loads"] = serde_json::json!([]);
    parse_feeder(&doc.to_string()).unwrap()
}

fn slg_a(network: &FeederNetwork, bus: &str, ohms: f64) -> FaultSpec {
    FaultSpec {
        bus: network.bus_index(bus).unwrap(),
        fault_type: FaultType::Slg,
        phases: crate::feeder::PhaseSet::from_phases(&[Phase::A]),
        impedance_ohms: ohms,
    }
}

fn assert_close_to_oracle(network: &FeederNetwork, cond: &OperatingCondition, tol: f64) {
    let swept = solve(network, cond).unwrap();
    let reference = oracle::solve_newton(network, cond).unwrap();
    assert!(swept.converged, "sweep did not converge");
    assert!(reference.converged, "oracle did not converge");
    for b in 0..network.buses().len() {
        for p in 0..3 {
            let d = (swept.bus_voltage[b][p] - reference.bus_voltage[b][p]).norm();
            assert!(
                d <= tol,
                "bus {} phase {p}: sweep {:?} vs oracle {:?} (|d|={d:.3e})",
                network.bus_id(b),
                swept.bus_voltage[b][p],
                reference.bus_voltage[b][p]
            );
        }
    }
    for li in 0..network.lines().len() {
        for p in 0..3 {
            let d = (swept.line_current[li][p] - reference.line_current[li][p]).norm();
            assert!(d <= tol, "line {li} phase {p} current differs by {d:.3e}");
        }
    }
}

#[test]
fn zero_load_no_fault_gives_flat_profile() {
    let net = no_load_feeder5();
    let sol = solve(&net, &OperatingCondition::nominal()).unwrap();
    assert!(sol.converged);
    for b in 0..net.buses().len() {
        for p in 0..3 {
            let src = net.source().voltage_v[p] / net.buses()[net.source().bus].nominal_voltage_v;
            assert!((sol.bus_voltage[b][p] - src).norm() < 1e-12);
        }
    }
    for li in 0..net.lines().len() {
        for p in 0..3 {
            assert!(sol.line_current[li][p].norm() < 1e-12);
        }
    }
}

#[test]
fn two_bus_balanced_case_matches_oracle() {
    let net = bundled::feeder2();
    assert_close_to_oracle(&net, &OperatingCondition::nominal(), 1e-6);
}

#[test]
fn two_bus_regression_voltage() {
    // Frozen from the Newton oracle: balanced 0.5 pu unity-pf load behind
    // z = 0.01 + 0.02j pu gives |V2| = 0.994923977632.
    let net = bundled::feeder2();
    let sol = oracle::solve_newton(&net, &OperatingCondition::nominal()).unwrap();
    let vmag = sol.bus_voltage[net.bus_index("2").unwrap()][0].norm();
    assert!((vmag - 0.994923977632).abs() < 1e-9, "oracle |V2| = {vmag}");
    let swept = solve(&net, &OperatingCondition::nominal()).unwrap();
    let smag = swept.bus_voltage[net.bus_index("2").unwrap()][0].norm();
    assert!((vmag - smag).abs() < 1e-6);
}

#[test]
fn bolted_three_phase_fault_at_feeder5_leaf() {
    let net = bundled::feeder5();
    let nominal = solve(&net, &OperatingCondition::nominal()).unwrap();
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(FaultSpec {
        bus: net.bus_index("5").unwrap(),
        fault_type: FaultType::ThreePhase,
        phases: crate::feeder::PhaseSet::ABC,
        impedance_ohms: 0.001,
    });
    let sol = solve(&net, &cond).unwrap();
    assert!(sol.converged, "mismatch {}", sol.max_mismatch);

    let leaf = net.bus_index("5").unwrap();
    for p in 0..3 {
        assert!(
            sol.bus_voltage[leaf][p].norm() < 0.05,
            "leaf voltage {}",
            sol.bus_voltage[leaf][p].norm()
        );
    }
    let head = net.parent_line(net.bus_index("2").unwrap()).unwrap();
    for p in 0..3 {
        let ratio = sol.line_current[head][p].norm() / nominal.line_current[head][p].norm();
        assert!(ratio > 5.0, "head current ratio {ratio}");
    }
    // Regression fixtures frozen from the oracle run.
    assert!((sol.bus_voltage[leaf][0].norm() - 0.000460225247).abs() < 1e-8);
    assert!((sol.line_current[head][0].norm() - 24.144080282812).abs() < 1e-6);
    assert_close_to_oracle(&net, &cond, 1e-6);
}

#[test]
fn fault_types_agree_with_oracle_across_decades() {
    let net = bundled::feeder5();
    let phases_for = |t: FaultType| match t {
        FaultType::Slg => crate::feeder::PhaseSet::from_phases(&[Phase::B]),
        FaultType::Ll => crate::feeder::PhaseSet::from_phases(&[Phase::A, Phase::C]),
        FaultType::Llg => crate::feeder::PhaseSet::from_phases(&[Phase::B, Phase::C]),
        FaultType::ThreePhase => crate::feeder::PhaseSet::ABC,
    };
    for t in [FaultType::Slg, FaultType::Ll, FaultType::Llg, FaultType::ThreePhase] {
        for ohms in [0.001, 0.01, 0.1, 1.0, 10.0, 20.0] {
            let mut cond = OperatingCondition::nominal();
            cond.fault = Some(FaultSpec {
                bus: net.bus_index("4").unwrap(),
                fault_type: t,
                phases: phases_for(t),
                impedance_ohms: ohms,
            });
            assert_close_to_oracle(&net, &cond, 1e-6);
        }
    }
}

#[test]
fn ll_fault_has_no_ground_path() {
    // Phase-to-phase stamp: shunt current on A equals (Va-Vb)/zf and the
    // faulted-phase currents cancel.
    let net = bundled::feeder2();
    let zf = 0.5;
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(FaultSpec {
        bus: net.bus_index("2").unwrap(),
        fault_type: FaultType::Ll,
        phases: crate::feeder::PhaseSet::from_phases(&[Phase::A, Phase::B]),
        impedance_ohms: zf,
    });
    let sol = solve(&net, &cond).unwrap();
    let b2 = net.bus_index("2").unwrap();
    let v_nom = net.buses()[net.source().bus].nominal_voltage_v;
    let z_base = v_nom * v_nom / S_BASE_VA;
    let zf_pu = zf / z_base;
    let va = sol.bus_voltage[b2][0];
    let vb = sol.bus_voltage[b2][1];
    let i_fault = (va - vb) / Complex64::new(zf_pu, 0.0);
    // KCL at bus 2: line current = load draw + fault shunt current.
    let line = sol.line_current[0];
    let load_s = Complex64::new(0.5, 0.0);
    let ia_load = model::injection_current(load_s, va);
    let ib_load = model::injection_current(load_s, vb);
    assert!((line[0] - ia_load - i_fault).norm() < 1e-7);
    assert!((line[1] - ib_load + i_fault).norm() < 1e-7);
}

#[test]
fn slg_fault_depresses_the_faulted_phase() {
    let net = bundled::feeder5();
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(slg_a(&net, "3", 0.01));
    let sol = solve(&net, &cond).unwrap();
    let b3 = net.bus_index("3").unwrap();
    let [va, vb, vc] = PhasorTriple(sol.bus_voltage[b3]).magnitudes();
    assert!(va < 0.2, "faulted phase sags, |Va| = {va}");
    assert!(vb > 0.8 && vc > 0.8, "healthy phases stay up");
    assert_close_to_oracle(&net, &cond, 1e-6);
}

#[test]
fn open_breaker_matches_reduced_network() {
    // Opening R4 on feeder5 de-energises buses 4 and 5; the energised part
    // must match a fresh solve of the network with that subtree removed.
    let net = bundled::feeder5();
    let mut cond = OperatingCondition::nominal();
    cond.open_breakers.insert(net.relay_index("R4").unwrap());
    let sol = solve(&net, &cond).unwrap();
    assert!(sol.converged);
    for bus in ["4", "5"] {
        let b = net.bus_index(bus).unwrap();
        assert!(!sol.energized[b]);
        for p in 0..3 {
            assert_eq!(sol.bus_voltage[b][p], Complex64::default());
        }
    }
    for bus in ["4", "5"] {
        let b = net.bus_index(bus).unwrap();
        let li = net.parent_line(b).unwrap();
        for p in 0..3 {
            assert_eq!(sol.line_current[li][p], Complex64::default());
        }
    }

    let mut doc: serde_json::Value = serde_json::from_str(bundled::FEEDER5_JSON).unwrap();
    let keep_bus = |v: &serde_json::Value| {
        let id = v["id"].as_str().unwrap_or_default();
        id != "4" && id != "5"
    };
    doc["buses"] = serde_json::Value::Array(
        doc["buses"].as_array().unwrap().iter().filter(|v| keep_bus(v)).cloned().collect(),
    );
    let no45 = |v: &serde_json::Value, keys: &[&str]| {
        keys.iter().all(|k| {
            let id = v[k].as_str().unwrap_or_default();
            id != "4" && id != "5"
        })
    };
    doc["lines"] = serde_json::Value::Array(
        doc["lines"].as_array().unwrap().iter().filter(|v| no45(v, &["from", "to"])).cloned().collect(),
    );
    doc["loads"] = serde_json::Value::Array(
        doc["loads"].as_array().unwrap().iter().filter(|v| no45(v, &["bus"])).cloned().collect(),
    );
    doc["relays"] = serde_json::Value::Array(
        doc["relays"].as_array().unwrap().iter().filter(|v| no45(v, &["from", "to"])).cloned().collect(),
    );
    let reduced = parse_feeder(&doc.to_string()).unwrap();
    let rsol = solve(&reduced, &OperatingCondition::nominal()).unwrap();
    for bus in ["1", "2", "3"] {
        let b = net.bus_index(bus).unwrap();
        let rb = reduced.bus_index(bus).unwrap();
        for p in 0..3 {
            let d = (sol.bus_voltage[b][p] - rsol.bus_voltage[rb][p]).norm();
            assert!(d < 1e-9, "bus {bus} phase {p} differs by {d:.3e}");
        }
    }
}

#[test]
fn certificate_holds_for_converged_solutions() {
    let net = bundled::feeder13();
    let mut cond = OperatingCondition::nominal();
    cond.global_multiplier = 1.2;
    cond.fault = Some(slg_a(&net, "11", 2.0));
    let sol = solve(&net, &cond).unwrap();
    assert!(sol.converged);
    let cert = verify::certify(&net, &cond, &sol).unwrap();
    assert!(cert.max_power_mismatch <= TOLERANCE_PU, "{}", cert.max_power_mismatch);
    assert!(cert.max_current_residual < 1e-9, "{}", cert.max_current_residual);
}

#[test]
fn measure_open_breaker_reads_zero_current() {
    let net = bundled::feeder5();
    let mut cond = OperatingCondition::nominal();
    cond.open_breakers.insert(net.relay_index("R4").unwrap());
    let sol = solve(&net, &cond).unwrap();
    let (_, i) = measure(&net, &sol, "R4").unwrap();
    assert_eq!(i.magnitudes(), [0.0; 3]);
    assert!(matches!(
        measure(&net, &sol, "nope"),
        Err(PowerFlowError::UnknownRelay(_))
    ));
}

#[test]
fn measure_slg_fault_raises_phase_current() {
    let net = bundled::feeder5();
    let nominal = solve(&net, &OperatingCondition::nominal()).unwrap();
    let (_, i0) = measure(&net, &nominal, "R4").unwrap();
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(slg_a(&net, "5", 5.0));
    let sol = solve(&net, &cond).unwrap();
    let (_, i1) = measure(&net, &sol, "R4").unwrap();
    assert!(
        i1.magnitudes()[0] > i0.magnitudes()[0],
        "phase A current should rise: {} vs {}",
        i1.magnitudes()[0],
        i0.magnitudes()[0]
    );
}

#[test]
fn generators_reduce_head_current() {
    let net = bundled::feeder5();
    let nominal = solve(&net, &OperatingCondition::nominal()).unwrap();
    let mut cond = OperatingCondition::nominal();
    cond.generators.push(ActiveGenerator {
        bus: net.bus_index("5").unwrap(),
        power_va: [Complex64::new(150_000.0, 0.0); 3],
        fraction: 1.0,
    });
    let sol = solve(&net, &cond).unwrap();
    let head = net.parent_line(net.bus_index("2").unwrap()).unwrap();
    for p in 0..3 {
        assert!(sol.line_current[head][p].norm() < nominal.line_current[head][p].norm());
    }
    assert_close_to_oracle(&net, &cond, 1e-6);
}

#[test]
fn below_threshold_loads_follow_constant_impedance() {
    // A bolted fault at the load bus pulls the voltage under the constant
    // power threshold; drawn power must scale with |V|^2.
    let net = bundled::feeder2();
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(FaultSpec {
        bus: net.bus_index("2").unwrap(),
        fault_type: FaultType::ThreePhase,
        phases: crate::feeder::PhaseSet::ABC,
        impedance_ohms: 0.001,
    });
    let sol = solve(&net, &cond).unwrap();
    let b2 = net.bus_index("2").unwrap();
    let vm = sol.bus_voltage[b2][0].norm();
    assert!(vm < V_CONST_POWER_MIN_PU);
    let drawn = model::injection_power(Complex64::new(0.5, 0.0), sol.bus_voltage[b2][0]);
    assert!((drawn.re - 0.5 * vm * vm / (V_CONST_POWER_MIN_PU * V_CONST_POWER_MIN_PU)).abs() < 1e-12);
}

#[test]
fn invalid_conditions_are_rejected() {
    let net = bundled::feeder2();
    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(FaultSpec {
        bus: net.bus_index("2").unwrap(),
        fault_type: FaultType::Slg,
        phases: crate::feeder::PhaseSet::ABC, // wrong cardinality
        impedance_ohms: 1.0,
    });
    assert!(matches!(solve(&net, &cond), Err(PowerFlowError::Config(_))));

    let mut cond = OperatingCondition::nominal();
    cond.fault = Some(slg_a(&net, "2", 100.0)); // impedance out of range
    assert!(matches!(solve(&net, &cond), Err(PowerFlowError::Config(_))));

    let mut cond = OperatingCondition::nominal();
    cond.global_multiplier = -1.0;
    assert!(matches!(solve(&net, &cond), Err(PowerFlowError::Config(_))));
}
