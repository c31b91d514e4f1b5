//! Training-run persistence: per-relay weight files, a run manifest and the
//! learning-curve CSV. The manifest is rewritten after every phase, so a run
//! aborted mid-way leaves the completed phases on disk.

use super::{learning_curve_csv, train_all, RelayTrainResult, TrainError, TrainingRun};
use crate::agent::{QNetwork, TrainConfig, WeightsFile};
use crate::env::EnvConfig;
use crate::feeder::{training_order, FeederNetwork};
use crate::seed::SeedLineage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub feeder: String,
    pub order: Vec<String>,
    pub seed: u64,
    pub episodes_per_relay: usize,
    pub env_config_sha256: String,
    pub agent_config_sha256: String,
    pub relays: Vec<ManifestRelay>,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRelay {
    pub id: String,
    pub weights_file: String,
    pub episodes: usize,
    pub resampled_scenarios: usize,
    pub final_window_false_operations: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_hex(data: &str) -> String {
    let digest = Sha256::digest(data.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run nested training and persist everything under `out_dir`.
pub fn run_training_to_dir(
    network: &FeederNetwork,
    feeder_label: &str,
    env_cfg: &EnvConfig,
    train_cfg: &TrainConfig,
    episodes_per_relay: usize,
    lineage: &SeedLineage,
    out_dir: &Path,
) -> Result<(TrainingRun, Manifest), TrainError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| TrainError::Artifact(format!("creating {}: {e}", out_dir.display())))?;

    let env_json = serde_json::to_string(env_cfg).expect("env config serializes");
    let agent_json = serde_json::to_string(train_cfg).expect("train config serializes");
    let mut manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        feeder: feeder_label.to_string(),
        order: training_order(network),
        seed: lineage.master(),
        episodes_per_relay,
        env_config_sha256: sha256_hex(&env_json),
        agent_config_sha256: sha256_hex(&agent_json),
        relays: Vec::new(),
        complete: false,
    };
    write_manifest(out_dir, &manifest)?;

    let mut phase_start = now_unix();
    let mut completed: Vec<RelayTrainResult> = Vec::new();
    let run = train_all(
        network,
        env_cfg,
        train_cfg,
        episodes_per_relay,
        lineage,
        |result| {
            let file = format!("{}.weights.json", result.relay_id);
            let weights = WeightsFile::from_network(&result.weights, env_cfg.input_mode, env_cfg.m);
            std::fs::write(out_dir.join(&file), weights.to_json())
                .map_err(|e| TrainError::Artifact(format!("writing {file}: {e}")))?;
            manifest.relays.push(ManifestRelay {
                id: result.relay_id.clone(),
                weights_file: file,
                episodes: result.curve.len(),
                resampled_scenarios: result.resampled_scenarios,
                final_window_false_operations: result
                    .curve
                    .last()
                    .map(|p| p.false_operations_in_window)
                    .unwrap_or(0),
                started_unix: phase_start,
                finished_unix: now_unix(),
            });
            phase_start = now_unix();
            completed.push(result.clone());
            std::fs::write(out_dir.join(CURVES_FILE), learning_curve_csv(&completed))
                .map_err(|e| TrainError::Artifact(format!("writing curves: {e}")))?;
            write_manifest(out_dir, &manifest)?;
            Ok(())
        },
    )?;

    manifest.complete = true;
    write_manifest(out_dir, &manifest)?;
    Ok((run, manifest))
}

fn write_manifest(out_dir: &Path, manifest: &Manifest) -> Result<(), TrainError> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(out_dir.join(MANIFEST_FILE), json)
        .map_err(|e| TrainError::Artifact(format!("writing manifest: {e}")))
}

/// Load a persisted run: the manifest plus each relay's frozen network.
pub fn load_run(dir: &Path) -> Result<(Manifest, BTreeMap<String, QNetwork>), TrainError> {
    let manifest_text = std::fs::read_to_string(dir.join(MANIFEST_FILE))
        .map_err(|e| TrainError::Artifact(format!("reading manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| TrainError::Artifact(format!("parsing manifest: {e}")))?;
    let mut nets = BTreeMap::new();
    for relay in &manifest.relays {
        let text = std::fs::read_to_string(dir.join(&relay.weights_file))
            .map_err(|e| TrainError::Artifact(format!("reading {}: {e}", relay.weights_file)))?;
        let file = WeightsFile::from_json(&text).map_err(TrainError::Agent)?;
        nets.insert(relay.id.clone(), file.into_network().map_err(TrainError::Agent)?);
    }
    Ok((manifest, nets))
}
