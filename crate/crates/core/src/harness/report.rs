//! Human-readable report tables and CSV exports.

use super::{DisturbanceRow, EvaluationReport, PeakRobustnessRow};
use crate::env::{DisturbanceKind, InputMode};
use std::fmt::Write as _;

fn pct(num: usize, den: usize) -> String {
    if den == 0 {
        "-".to_string()
    } else {
        format!("{:.2} %", 100.0 * num as f64 / den as f64)
    }
}

/// Failure-rate table in the two-row (single relay), three-row (single
/// relay, phase input) or four-row (multi relay) shape.
pub fn format_text_report(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let counted = report.episodes - report.aborted;
    let f = &report.failures;
    writeln!(out, "Failure Rate — feeder {}, {} relay(s), {} episodes ({} aborted)",
        report.feeder, report.relay_ids.len(), report.episodes, report.aborted).unwrap();
    writeln!(out, "{:<28} {:<16} {:>13} {:>12}", "Scenario", "False Operation", "Occurrences", "Probability").unwrap();
    let mut row = |scenario: &str, op: &str, count: usize| {
        writeln!(out, "{:<28} {:<16} {:>7} / {:<5} {:>10}", scenario, op, count, counted, pct(count, counted)).unwrap();
    };
    if report.multi_relay() {
        row("No Fault", "Trip", f.no_fault_trip);
        row("Local Fault", "Hold", f.local_fault_hold);
        row("Remote Fault", "Trip", f.remote_fault_trip);
        row("Backup", "Hold", f.backup_hold);
    } else if report.input_mode == InputMode::Phase {
        row("No Fault", "Trip", f.no_fault_trip);
        row("After Fault in Assigned Phase", "Hold", f.local_fault_hold);
        row("After Fault in Other Phases", "Trip", f.remote_fault_trip);
    } else {
        row("No Fault", "Trip", f.no_fault_trip);
        row("After Fault", "Hold", f.local_fault_hold + f.remote_fault_trip + f.backup_hold);
    }
    writeln!(out, "Successful episodes: {} / {} (failure rate {:.2} %)",
        report.successes, counted, 100.0 * report.failure_rate()).unwrap();

    if report.response.total_trips() > 0 {
        writeln!(out).unwrap();
        writeln!(out, "Response Speed After Faults (steps from onset, {} ms per step)", report.step_ms).unwrap();
        for (title, hists) in [("primary", &report.response.primary), ("backup", &report.response.backup)] {
            for (relay, hist) in hists {
                if hist.is_empty() {
                    continue;
                }
                let total: usize = hist.values().sum();
                write!(out, "  {relay} ({title}): ").unwrap();
                let parts: Vec<String> = hist
                    .iter()
                    .map(|(d, c)| format!("{d} steps ({:.0} ms): {c}/{total}", *d as f64 * report.step_ms))
                    .collect();
                writeln!(out, "{}", parts.join(", ")).unwrap();
            }
        }
    }
    out
}

/// Robustness tables: peak sweep plus the two disturbance rows.
pub fn format_robustness_tables(
    peak: &[PeakRobustnessRow],
    disturbances: &[DisturbanceRow],
) -> String {
    let mut out = String::new();
    if !peak.is_empty() {
        writeln!(out, "Robustness Against Peak Load Increase").unwrap();
        write!(out, "{:<18}", "Peak Load Increase").unwrap();
        for row in peak {
            write!(out, " {:>9}", format!("{:.0} %", row.level_percent)).unwrap();
        }
        writeln!(out).unwrap();
        write!(out, "{:<18}", "Failure Rate").unwrap();
        for row in peak {
            write!(out, " {:>9}", format!("{:.2} %", 100.0 * row.failure_rate)).unwrap();
        }
        writeln!(out).unwrap();
    }
    if !disturbances.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "Robustness Against Loss of Load/DG").unwrap();
        writeln!(out, "{:<14} {:>13} {:>12}", "Scenario", "Occurrences", "Probability").unwrap();
        for row in disturbances {
            let name = match row.kind {
                DisturbanceKind::LossOfLoad => "Loss of Load",
                DisturbanceKind::LossOfDg => "Loss of DG",
            };
            writeln!(
                out,
                "{:<14} {:>7} / {:<5} {:>10}",
                name,
                row.trips,
                row.episodes,
                pct(row.trips, row.episodes)
            )
            .unwrap();
        }
    }
    out
}

/// Response-delay histogram as CSV: relay, duty, delay steps/ms, count.
pub fn response_histogram_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("relay,duty,delay_steps,delay_ms,count\n");
    for (duty, hists) in [("primary", &report.response.primary), ("backup", &report.response.backup)] {
        for (relay, hist) in hists {
            for (delay, count) in hist {
                writeln!(
                    out,
                    "{relay},{duty},{delay},{},{count}",
                    *delay as f64 * report.step_ms
                )
                .unwrap();
            }
        }
    }
    out
}
