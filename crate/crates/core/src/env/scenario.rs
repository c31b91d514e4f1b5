//! Monte Carlo episode scenarios.
//!
//! Every stochastic choice for one episode is drawn up front from the
//! episode seed: load multipliers, DG placement, the fault, its onset step
//! and the per-relay deactivation coin flips. Given the seed the scenario is
//! fully deterministic, so training and evaluation can replay identical
//! episodes.

use super::{DisturbanceKind, EnvConfig, EnvError};
use crate::feeder::{FeederNetwork, Phase, PhaseSet};
use crate::powerflow::{FaultSpec, FaultType};
use crate::seed::Rng;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One distributed generator placed for an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DgPlacement {
    pub bus: usize,
    /// Per-phase rated power, VA (unity power factor).
    pub power_va: [Complex64; 3],
}

/// A no-fault disturbance injected mid-episode by the robustness harness.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub onset_step: usize,
    /// Step-down fraction in [0.10, 0.40].
    pub magnitude: f64,
    /// Indices into `dgs` disconnected at onset (loss-of-DG only).
    pub dropped_dgs: Vec<usize>,
}

/// Everything sampled for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeScenario {
    pub seed: u64,
    pub global_multiplier: f64,
    pub load_multipliers: Vec<f64>,
    pub dgs: Vec<DgPlacement>,
    pub fault: Option<FaultSpec>,
    /// Step at which the fault becomes active (unused when `fault` is None).
    pub fault_onset: usize,
    /// Per-relay primary-failure coin flips, aligned with `network.relays()`.
    pub deactivated: Vec<bool>,
    pub disturbance: Option<Disturbance>,
}

/// Sample a fault episode. Fault type follows the configured weights, the
/// faulted bus is uniform over non-source buses that carry enough phases,
/// and the faulted phase set is uniform over qualifying subsets.
pub fn generate_scenario(
    seed: u64,
    config: &EnvConfig,
    network: &FeederNetwork,
) -> EpisodeScenario {
    let mut rng = Rng::seed_from_u64(seed);
    let mut scenario = draw_common(&mut rng, seed, config, network);
    scenario.fault = Some(draw_fault(&mut rng, config, network));
    scenario.fault_onset = rng.gen_range(config.fault_window.0..=config.fault_window.1);
    scenario
}

/// Sample a disturbance episode: no fault, a sudden loss of load or DG at a
/// random mid-episode step instead.
pub fn generate_disturbance_scenario(
    seed: u64,
    config: &EnvConfig,
    network: &FeederNetwork,
    kind: DisturbanceKind,
) -> EpisodeScenario {
    let mut rng = Rng::seed_from_u64(seed);
    let mut scenario = draw_common(&mut rng, seed, config, network);
    if kind == DisturbanceKind::LossOfDg && scenario.dgs.is_empty() {
        // A DG-loss episode needs at least one DG to lose.
        let load = &network.loads()[rng.gen_range(0..network.loads().len())];
        let frac = rng.gen_range(config.dg_sizing_range.0..config.dg_sizing_range.1);
        scenario.dgs.push(DgPlacement {
            bus: load.bus,
            power_va: dg_power(load.power_va, frac),
        });
    }
    let onset_step = rng.gen_range(config.fault_window.0..=config.fault_window.1);
    let magnitude = rng.gen_range(0.10..=0.40);
    let dropped_dgs = match kind {
        DisturbanceKind::LossOfLoad => Vec::new(),
        DisturbanceKind::LossOfDg => {
            let count = ((scenario.dgs.len() as f64 * magnitude).ceil() as usize)
                .clamp(1, scenario.dgs.len());
            let mut idx: Vec<usize> = (0..scenario.dgs.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(count);
            idx.sort_unstable();
            idx
        }
    };
    scenario.disturbance = Some(Disturbance {
        kind,
        onset_step,
        magnitude,
        dropped_dgs,
    });
    scenario
}

fn draw_common(
    rng: &mut Rng,
    seed: u64,
    config: &EnvConfig,
    network: &FeederNetwork,
) -> EpisodeScenario {
    let global_multiplier = rng.gen_range(
        config.global_multiplier_range.0..config.global_multiplier_range.1,
    );
    let load_multipliers: Vec<f64> = (0..network.loads().len())
        .map(|_| rng.gen_range(config.load_multiplier_range.0..config.load_multiplier_range.1))
        .collect();

    let hi = config.dg_count_range.1.min(network.loads().len());
    let lo = config.dg_count_range.0.min(hi);
    let count = rng.gen_range(lo..=hi);
    let mut load_idx: Vec<usize> = (0..network.loads().len()).collect();
    load_idx.shuffle(rng);
    let dgs = load_idx
        .into_iter()
        .take(count)
        .map(|i| {
            let load = &network.loads()[i];
            let frac = rng.gen_range(config.dg_sizing_range.0..config.dg_sizing_range.1);
            DgPlacement {
                bus: load.bus,
                power_va: dg_power(load.power_va, frac),
            }
        })
        .collect();

    let deactivated = (0..network.relays().len())
        .map(|_| rng.gen_bool(config.deactivation_probability))
        .collect();

    EpisodeScenario {
        seed,
        global_multiplier,
        load_multipliers,
        dgs,
        fault: None,
        fault_onset: 0,
        deactivated,
        disturbance: None,
    }
}

/// DG sized as a fraction of the bus load, at unity power factor.
fn dg_power(load_va: [Complex64; 3], frac: f64) -> [Complex64; 3] {
    let mut p = [Complex64::default(); 3];
    for i in 0..3 {
        p[i] = Complex64::new(load_va[i].re * frac, 0.0);
    }
    p
}

fn draw_fault(rng: &mut Rng, config: &EnvConfig, network: &FeederNetwork) -> FaultSpec {
    let fault_type = draw_fault_type(rng, &config.fault_type_weights);
    let need = fault_type.phase_count();
    let candidates: Vec<usize> = (0..network.buses().len())
        .filter(|&b| b != network.source().bus && network.buses()[b].phases.len() >= need)
        .collect();
    assert!(
        !candidates.is_empty(),
        "no bus can host a {} fault",
        fault_type.label()
    );
    let bus = candidates[rng.gen_range(0..candidates.len())];
    let present: Vec<Phase> = network.buses()[bus].phases.iter().collect();
    let phases = choose_phases(rng, &present, need);
    let impedance_ohms =
        rng.gen_range(config.fault_impedance_range.0..=config.fault_impedance_range.1);
    FaultSpec {
        bus,
        fault_type,
        phases,
        impedance_ohms,
    }
}

fn draw_fault_type(rng: &mut Rng, weights: &[f64; 4]) -> FaultType {
    let kinds = [FaultType::Slg, FaultType::Ll, FaultType::Llg, FaultType::ThreePhase];
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (k, w) in kinds.iter().zip(weights) {
        if x < *w {
            return *k;
        }
        x -= w;
    }
    FaultType::ThreePhase
}

fn choose_phases(rng: &mut Rng, present: &[Phase], need: usize) -> PhaseSet {
    let mut pool = present.to_vec();
    pool.shuffle(rng);
    pool.truncate(need);
    PhaseSet::from_phases(&pool)
}

// --- external JSON form ------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub seed: u64,
    pub global_multiplier: f64,
    pub load_multipliers: Vec<f64>,
    pub dgs: Vec<DgDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fault: Option<FaultDoc>,
    pub fault_onset: usize,
    pub deactivated: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disturbance: Option<DisturbanceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DgDoc {
    pub bus: String,
    pub power_va: [[f64; 2]; 3],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FaultDoc {
    pub bus: String,
    #[serde(rename = "type")]
    pub fault_type: FaultType,
    pub phases: String,
    pub impedance_ohms: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DisturbanceDoc {
    pub kind: DisturbanceKind,
    pub onset_step: usize,
    pub magnitude: f64,
    pub dropped_dgs: Vec<usize>,
}

impl EpisodeScenario {
    pub fn to_doc(&self, network: &FeederNetwork) -> ScenarioDoc {
        ScenarioDoc {
            seed: self.seed,
            global_multiplier: self.global_multiplier,
            load_multipliers: self.load_multipliers.clone(),
            dgs: self
                .dgs
                .iter()
                .map(|d| DgDoc {
                    bus: network.bus_id(d.bus).to_string(),
                    power_va: [
                        [d.power_va[0].re, d.power_va[0].im],
                        [d.power_va[1].re, d.power_va[1].im],
                        [d.power_va[2].re, d.power_va[2].im],
                    ],
                })
                .collect(),
            fault: self.fault.map(|f| FaultDoc {
                bus: network.bus_id(f.bus).to_string(),
                fault_type: f.fault_type,
                phases: f.phases.to_string(),
                impedance_ohms: f.impedance_ohms,
            }),
            fault_onset: self.fault_onset,
            deactivated: network
                .relays()
                .iter()
                .zip(&self.deactivated)
                .map(|(r, d)| (r.id.clone(), *d))
                .collect(),
            disturbance: self.disturbance.as_ref().map(|d| DisturbanceDoc {
                kind: d.kind,
                onset_step: d.onset_step,
                magnitude: d.magnitude,
                dropped_dgs: d.dropped_dgs.clone(),
            }),
        }
    }

    pub fn from_doc(doc: &ScenarioDoc, network: &FeederNetwork) -> Result<Self, EnvError> {
        let bus = |id: &str| {
            network
                .bus_index(id)
                .ok_or_else(|| EnvError::Config(format!("scenario references unknown bus `{id}`")))
        };
        let mut deactivated = vec![false; network.relays().len()];
        for (id, flag) in &doc.deactivated {
            let ri = network
                .relay_index(id)
                .ok_or_else(|| EnvError::Config(format!("scenario references unknown relay `{id}`")))?;
            deactivated[ri] = *flag;
        }
        Ok(Self {
            seed: doc.seed,
            global_multiplier: doc.global_multiplier,
            load_multipliers: doc.load_multipliers.clone(),
            dgs: doc
                .dgs
                .iter()
                .map(|d| {
                    Ok(DgPlacement {
                        bus: bus(&d.bus)?,
                        power_va: [
                            Complex64::new(d.power_va[0][0], d.power_va[0][1]),
                            Complex64::new(d.power_va[1][0], d.power_va[1][1]),
                            Complex64::new(d.power_va[2][0], d.power_va[2][1]),
                        ],
                    })
                })
                .collect::<Result<_, EnvError>>()?,
            fault: doc
                .fault
                .as_ref()
                .map(|f| -> Result<FaultSpec, EnvError> {
                    let phases = PhaseSet::parse(&f.phases).ok_or_else(|| {
                        EnvError::Config(format!("bad fault phases `{}`", f.phases))
                    })?;
                    Ok(FaultSpec {
                        bus: bus(&f.bus)?,
                        fault_type: f.fault_type,
                        phases,
                        impedance_ohms: f.impedance_ohms,
                    })
                })
                .transpose()?,
            fault_onset: doc.fault_onset,
            deactivated,
            disturbance: doc.disturbance.as_ref().map(|d| Disturbance {
                kind: d.kind,
                onset_step: d.onset_step,
                magnitude: d.magnitude,
                dropped_dgs: d.dropped_dgs.clone(),
            }),
        })
    }
}
