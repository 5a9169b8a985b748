//! Structured diagnosis reports and their human-readable rendering.
//!
//! The machine document is JSON with stable key order; the table view is
//! derived from the same struct so the two can never disagree.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::behavioral::HypothesisBelief;
use crate::monitor::{MonitorConfig, ProbeState, ProbeVerdict};
use crate::simulator::{FaultScenario, TrialMetrics};
use crate::structural::SuspectReport;

pub const REPORT_SCHEMA: &str = "diagnosis-report/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub schema: String,
    /// Wall-clock stamp; omitted in reproducible (seeded) runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub config: MonitorConfig,
    pub verdicts: Vec<ProbeVerdict>,
    pub suspects: SuspectReport,
    pub beliefs: Vec<HypothesisBelief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<FaultScenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<TrialMetrics>,
}

impl DiagnosisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Render the human table from the machine document.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let bad: Vec<&ProbeVerdict> = self
            .verdicts
            .iter()
            .filter(|v| v.state == ProbeState::Bad)
            .collect();
        let _ = writeln!(
            out,
            "probes: {} total, {} BAD (alpha = {})",
            self.verdicts.len(),
            bad.len(),
            self.config.alpha
        );
        if !bad.is_empty() {
            let _ = writeln!(out, "\nBAD probes:");
            let _ = writeln!(out, "  {:<20} {:>12} {:>5}", "probe", "statistic", "dof");
            for v in &bad {
                let _ = writeln!(out, "  {:<20} {:>12.3} {:>5}", v.probe, v.statistic, v.dof);
            }
        }
        if !self.suspects.is_empty() {
            let _ = writeln!(out, "\nsuspects ({}):", self.suspects.entries.len());
            let _ = writeln!(
                out,
                "  {:<20} {:>4}/{:<4} {:>7}",
                "component", "bad", "tot", "ratio"
            );
            for e in &self.suspects.entries {
                let _ = writeln!(
                    out,
                    "  {:<20} {:>4}/{:<4} {:>7.3}",
                    e.component, e.bad_probes, e.total_probes, e.ratio
                );
            }
            let multi: Vec<_> = self
                .suspects
                .ambiguity_classes
                .iter()
                .filter(|c| c.len() > 1)
                .collect();
            if !multi.is_empty() {
                let _ = writeln!(out, "\nambiguity classes:");
                for class in multi {
                    let ids: Vec<&str> = class.iter().map(|c| c.as_str()).collect();
                    let _ = writeln!(out, "  {{{}}}", ids.join(", "));
                }
            }
        }
        if !self.beliefs.is_empty() {
            let _ = writeln!(out, "\nhypotheses (by belief):");
            let _ = writeln!(
                out,
                "  {:<20} {:<16} {:>8} {:>10} {:>4}",
                "component", "failure", "cf", "posterior", "ev"
            );
            for b in &self.beliefs {
                let posterior = b
                    .posterior
                    .map(|p| format!("{p:.4}"))
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "  {:<20} {:<16} {:>8.4} {:>10} {:>4}",
                    b.hypothesis.component,
                    b.hypothesis.failure_type,
                    b.combined_cf,
                    posterior,
                    b.evidence.len()
                );
            }
        }
        if let Some(m) = &self.metrics {
            let _ = writeln!(
                out,
                "\nmetrics: contained={} suspects={} true_rank={:?}",
                m.contained, m.suspect_size, m.true_rank
            );
        }
        out
    }
}
