//! Command-line surface for the relay training toolkit.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relayrl_core::agent::{GreedyNetPolicy, Policy, TrainConfig};
use relayrl_core::env::{generate_scenario, DisturbanceKind, EnvConfig, InputMode};
use relayrl_core::feeder::{bundled, parse_feeder, FeederNetwork};
use relayrl_core::harness::{
    evaluate_with, format_robustness_tables, format_text_report, response_histogram_csv,
    robustness_disturbance, robustness_peak, EvalScenarioKind,
};
use relayrl_core::powerflow::schema::{ConditionDoc, SolutionDoc};
use relayrl_core::seed::SeedLineage;
use relayrl_core::trainer::{load_run, run_training_to_dir};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "relayrl",
    about = "Train and evaluate reinforcement-learning protective relays on simulated radial feeders",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Feeder document path, or a bundled name: feeder2, feeder5, feeder13.
    #[arg(long)]
    feeder: String,
    /// JSON config file with optional "env" and "agent" sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measurement input mode fed to the agents.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<InputMode>,
    /// Keep only these relays (comma separated), e.g. a single substation
    /// relay on a multi-relay feeder.
    #[arg(long, value_delimiter = ',')]
    relays: Vec<String>,
}

fn parse_mode(s: &str) -> Result<InputMode, String> {
    match s {
        "phase" => Ok(InputMode::Phase),
        "sequence" => Ok(InputMode::Sequence),
        other => Err(format!("unknown mode `{other}` (expected phase|sequence)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Nested training over all relays in post-order; writes weights,
    /// manifest and learning curves.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for weights, manifest and curves.
        #[arg(long)]
        out: PathBuf,
        /// Episodes per relay.
        #[arg(long, default_value_t = 1500)]
        episodes: usize,
    },
    /// Evaluate trained policies over fresh scenarios and emit the
    /// failure-rate report.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding manifest.json and weight files from `train`.
        #[arg(long)]
        run: PathBuf,
        /// Report JSON path (defaults to <run>/report.json).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        /// Dump per-step episode traces as JSON Lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Robustness sweeps: peak-load increase and loss-of-load / loss-of-DG
    /// disturbances.
    Robustness {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        /// Peak-load increase levels in percent.
        #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
        levels: Vec<f64>,
        /// Which sweep to run: peak, loss-of-load, loss-of-dg or all.
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Solve one operating condition and print the solution.
    Powerflow {
        #[command(flatten)]
        common: CommonArgs,
        /// Operating-condition JSON; nominal condition when omitted.
        #[arg(long)]
        condition: Option<PathBuf>,
        /// Write the solution JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample episode scenarios to a JSON Lines file for reuse.
    GenerateScenarios {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_network(common: &CommonArgs) -> Result<FeederNetwork> {
    let text = match bundled::by_name(&common.feeder) {
        Some(text) => text.to_string(),
        None => std::fs::read_to_string(&common.feeder)
            .with_context(|| format!("reading feeder `{}`", common.feeder))?,
    };
    let mut network = parse_feeder(&text).context("parsing feeder document")?;
    if !common.relays.is_empty() {
        let keep: Vec<&str> = common.relays.iter().map(String::as_str).collect();
        network = network.retain_relays(&keep).context("reducing relay set")?;
    }
    Ok(network)
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    env: Option<EnvConfig>,
    agent: Option<TrainConfig>,
}

fn load_configs(common: &CommonArgs) -> Result<(EnvConfig, TrainConfig)> {
    let file: ConfigFile = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config `{}`", path.display()))?;
            serde_json::from_str(&text).context("parsing config file")?
        }
        None => ConfigFile::default(),
    };
    let mut env = file.env.unwrap_or_default();
    if let Some(mode) = common.mode {
        env.input_mode = mode;
    }
    env.validate().context("validating environment config")?;
    let agent = file.agent.unwrap_or_default();
    agent.validate().context("validating agent config")?;
    Ok((env, agent))
}

fn load_policies(run: &Path, network: &FeederNetwork) -> Result<BTreeMap<String, Box<dyn Policy>>> {
    let (_, nets) = load_run(run).context("loading trained run")?;
    let mut policies: BTreeMap<String, Box<dyn Policy>> = BTreeMap::new();
    for relay in network.relays() {
        let net = nets
            .get(&relay.id)
            .with_context(|| format!("run has no weights for relay `{}`", relay.id))?;
        policies.insert(relay.id.clone(), Box::new(GreedyNetPolicy::new(net.clone())));
    }
    Ok(policies)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, out, episodes } => {
            let network = load_network(&common)?;
            let (env_cfg, train_cfg) = load_configs(&common)?;
            let lineage = SeedLineage::new(common.seed);
            let (_, manifest) = run_training_to_dir(
                &network,
                &common.feeder,
                &env_cfg,
                &train_cfg,
                episodes,
                &lineage,
                &out,
            )?;
            println!(
                "trained {} relay(s) in order {:?}; artifacts in {}",
                manifest.relays.len(),
                manifest.order,
                out.display()
            );
            Ok(())
        }
        Command::Evaluate { common, run, out, episodes, trace } => {
            let network = load_network(&common)?;
            let (env_cfg, _) = load_configs(&common)?;
            let mut policies = load_policies(&run, &network)?;
            let lineage = SeedLineage::new(common.seed);
            let mut trace_file = match &trace {
                Some(path) => Some(std::io::BufWriter::new(
                    std::fs::File::create(path)
                        .with_context(|| format!("creating {}", path.display()))?,
                )),
                None => None,
            };
            let report = evaluate_with(
                &network,
                &env_cfg,
                &mut policies,
                episodes,
                &lineage,
                &common.feeder,
                EvalScenarioKind::Fault,
                |episode_trace, _| {
                    if let Some(w) = trace_file.as_mut() {
                        episode_trace.write_jsonl(w).expect("trace write");
                    }
                },
            )?;
            if let Some(w) = trace_file.as_mut() {
                w.flush().ok();
            }
            print!("{}", format_text_report(&report));
            let out = out.unwrap_or_else(|| run.join("report.json"));
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)
                .with_context(|| format!("writing {}", out.display()))?;
            let hist = out.with_extension("histogram.csv");
            std::fs::write(&hist, response_histogram_csv(&report))
                .with_context(|| format!("writing {}", hist.display()))?;
            println!("report: {}", out.display());
            if report.aborted > 0 {
                bail!("{} episode(s) aborted on non-convergent power flow", report.aborted);
            }
            Ok(())
        }
        Command::Robustness { common, run, out, episodes, levels, kind } => {
            let network = load_network(&common)?;
            let (env_cfg, _) = load_configs(&common)?;
            let mut policies = load_policies(&run, &network)?;
            let lineage = SeedLineage::new(common.seed);
            let mut peak_rows = Vec::new();
            let mut disturbance_rows = Vec::new();
            if kind == "all" || kind == "peak" {
                peak_rows = robustness_peak(
                    &network,
                    &env_cfg,
                    &mut policies,
                    &levels,
                    episodes,
                    &lineage,
                    &common.feeder,
                )?;
            }
            if kind == "all" || kind == "loss-of-load" {
                disturbance_rows.push(robustness_disturbance(
                    &network,
                    &env_cfg,
                    &mut policies,
                    DisturbanceKind::LossOfLoad,
                    episodes,
                    &lineage,
                    &common.feeder,
                )?);
            }
            if kind == "all" || kind == "loss-of-dg" {
                disturbance_rows.push(robustness_disturbance(
                    &network,
                    &env_cfg,
                    &mut policies,
                    DisturbanceKind::LossOfDg,
                    episodes,
                    &lineage,
                    &common.feeder,
                )?);
            }
            if peak_rows.is_empty() && disturbance_rows.is_empty() {
                bail!("unknown robustness kind `{kind}` (peak|loss-of-load|loss-of-dg|all)");
            }
            print!("{}", format_robustness_tables(&peak_rows, &disturbance_rows));
            let out = out.unwrap_or_else(|| run.join("robustness.json"));
            let doc = serde_json::json!({
                "feeder": common.feeder,
                "episodes": episodes,
                "peak": peak_rows,
                "disturbances": disturbance_rows,
            });
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("report: {}", out.display());
            Ok(())
        }
        Command::Powerflow { common, condition, out } => {
            let network = load_network(&common)?;
            let cond = match condition {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading condition `{}`", path.display()))?;
                    ConditionDoc::parse(&text)?.resolve(&network)?
                }
                None => relayrl_core::powerflow::OperatingCondition::nominal(),
            };
            let solution = relayrl_core::powerflow::solve(&network, &cond)?;
            let doc = SolutionDoc::from_solution(&network, &solution);
            print!("{}", doc.to_table());
            let json = serde_json::to_string_pretty(&doc)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("solution: {}", path.display());
                }
                None => println!("{json}"),
            }
            if !solution.converged {
                bail!("power flow did not converge (mismatch {:.3e})", solution.max_mismatch);
            }
            Ok(())
        }
        Command::GenerateScenarios { common, out, episodes } => {
            let network = load_network(&common)?;
            let (env_cfg, _) = load_configs(&common)?;
            let lineage = SeedLineage::new(common.seed);
            let mut file = std::io::BufWriter::new(
                std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?,
            );
            for k in 0..episodes {
                let seed = lineage.derive("scenario-file", k as u64);
                let scenario = generate_scenario(seed, &env_cfg, &network);
                let doc = scenario.to_doc(&network);
                writeln!(file, "{}", serde_json::to_string(&doc)?)?;
            }
            file.flush()?;
            println!("wrote {episodes} scenarios to {}", out.display());
            Ok(())
        }
    }
}
