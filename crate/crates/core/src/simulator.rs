//! Synthetic detector simulator with fault injection.
//!
//! Generates a scintillator-array-like topology, synthesizes nominal and
//! faulty event batches with known ground truth, and runs end-to-end trials
//! measuring detection, containment, and ranking quality.
//!
//! Topology per channel: slat -> pmt -> cable -> splitter -> (ADC board
//! channel, TDC board channel), exposing one amplitude and one timing probe.
//! HV supplies power groups of PMTs; crates power groups of boards. The
//! component census is closed-form:
//!
//! ```text
//! channels   C = n_slats * pmts_per_slat
//! components = n_slats + 3C + ceil(C / board_group) * 2
//!            + ceil(C / hv_group)
//!            + ceil(2 * ceil(C / board_group) / boards_per_crate)
//! probes     = 2C
//! ```
//!
//! Every channel's {pmt, cable, splitter} triple shares one signature, so
//! the worst-case ambiguity class has size 3.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavioral::{diagnose, HypothesisBelief};
use crate::model::{
    BehaviorEntry, ComponentClass, ComponentId, DetectorModel, ProbeId, TrendDirection, TrendSpec,
};
use crate::monitor::{
    build_baseline, extract_features, monitor_sweep, BaselineArchive, EventBatch, FeatureName,
    FeatureVector, MonitorConfig, ProbeState, ProbeVerdict,
};
use crate::structural::{suspect_report, SuspectReport};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("unknown fault {failure_type} for class {class}")]
    UnknownFault { class: String, failure_type: String },
    #[error("scenario target {0} not in model")]
    UnknownTarget(ComponentId),
    #[error("fault magnitude {0} must be > 0")]
    BadMagnitude(f64),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Monitor(#[from] crate::monitor::MonitorError),
    #[error(transparent)]
    Structural(#[from] crate::structural::StructuralError),
    #[error(transparent)]
    Behavioral(#[from] crate::behavioral::BehavioralError),
}

/// Parameters of the generated detector and its nominal signal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_slats: usize,
    pub pmts_per_slat: usize,
    /// PMTs per high-voltage supply.
    pub hv_group: usize,
    /// Channels per ADC board and per TDC board.
    pub board_group: usize,
    pub boards_per_crate: usize,
    pub amplitude_mean: f64,
    pub amplitude_sd: f64,
    pub timing_mean: f64,
    pub timing_sd: f64,
    /// Probability of a hit per channel per event.
    pub occupancy: f64,
    /// Trend parameters of the shipped behavioral model.
    pub trend_weight: f64,
    pub trend_slope: f64,
    pub trend_cutoff: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_slats: 136,
            pmts_per_slat: 2,
            hv_group: 16,
            board_group: 16,
            boards_per_crate: 8,
            amplitude_mean: 100.0,
            amplitude_sd: 10.0,
            timing_mean: 50.0,
            timing_sd: 5.0,
            occupancy: 0.95,
            trend_weight: 0.9,
            trend_slope: 2.0,
            trend_cutoff: 6.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        for (name, v) in [
            ("n_slats", self.n_slats),
            ("pmts_per_slat", self.pmts_per_slat),
            ("hv_group", self.hv_group),
            ("board_group", self.board_group),
            ("boards_per_crate", self.boards_per_crate),
        ] {
            if v < 1 {
                return Err(SimulatorError::InvalidSpec(format!("{name} must be >= 1")));
            }
        }
        if !(self.occupancy > 0.0 && self.occupancy <= 1.0) {
            return Err(SimulatorError::InvalidSpec(format!(
                "occupancy {} not in (0, 1]",
                self.occupancy
            )));
        }
        for (name, v) in [("amplitude_sd", self.amplitude_sd), ("timing_sd", self.timing_sd)] {
            if !(v > 0.0) {
                return Err(SimulatorError::InvalidSpec(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.n_slats * self.pmts_per_slat
    }

    fn boards(&self) -> usize {
        self.channels().div_ceil(self.board_group)
    }

    fn hv_supplies(&self) -> usize {
        self.channels().div_ceil(self.hv_group)
    }

    fn crates(&self) -> usize {
        (2 * self.boards()).div_ceil(self.boards_per_crate)
    }

    /// Closed-form component census of the generated topology.
    pub fn component_census(&self) -> usize {
        self.n_slats + 3 * self.channels() + 2 * self.boards() + self.hv_supplies() + self.crates()
    }

    pub fn probe_census(&self) -> usize {
        2 * self.channels()
    }
}

/// A fault to inject: which component fails, how, and how hard.
/// `magnitude` is in units of the nominal per-reading sd (mean shifts) or a
/// fractional change (sd inflation), per the effects table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub target: ComponentId,
    pub failure_type: String,
    pub magnitude: f64,
    pub seed: u64,
}

/// Per-channel parameter shifts produced by a fault. Mean shifts are in
/// units of the nominal sd; multipliers apply to the nominal value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelShift {
    pub amp_occupancy_mul: f64,
    pub tim_occupancy_mul: f64,
    pub amp_mean_shift_sd: f64,
    pub amp_sd_mul: f64,
    pub tim_mean_shift_sd: f64,
    pub tim_sd_mul: f64,
    /// When set, the sign of the timing mean shift comes from the scenario
    /// seed (trend direction "either").
    pub tim_shift_sign_from_seed: bool,
}

impl ChannelShift {
    fn identity() -> Self {
        ChannelShift {
            amp_occupancy_mul: 1.0,
            tim_occupancy_mul: 1.0,
            amp_mean_shift_sd: 0.0,
            amp_sd_mul: 1.0,
            tim_mean_shift_sd: 0.0,
            tim_sd_mul: 1.0,
            tim_shift_sign_from_seed: false,
        }
    }
}

/// The documented fault-effects table. Kept consistent with the shipped
/// behavioral model (see `check_effects_consistency`).
pub fn fault_effects(
    class: &str,
    failure_type: &str,
    magnitude: f64,
) -> Result<ChannelShift, SimulatorError> {
    if !(magnitude > 0.0) {
        return Err(SimulatorError::BadMagnitude(magnitude));
    }
    let m = magnitude;
    let mut s = ChannelShift::identity();
    match (class, failure_type) {
        ("pmt", "gain_drop") => s.amp_mean_shift_sd = -m,
        ("pmt", "gain_rise") => s.amp_mean_shift_sd = m,
        ("pmt", "dead") => {
            s.amp_occupancy_mul = 0.0;
            s.tim_occupancy_mul = 0.0;
        }
        ("pmt", "noisy") => s.amp_sd_mul = 1.0 + m,
        ("hv_supply", "off") => {
            s.amp_occupancy_mul = 0.0;
            s.tim_occupancy_mul = 0.0;
        }
        ("hv_supply", "sag") => s.amp_mean_shift_sd = -m,
        ("adc_board", "pedestal_shift") => s.amp_mean_shift_sd = m,
        ("adc_board", "stuck") => s.amp_sd_mul = 1e-3,
        ("tdc_board", "drift") => {
            s.tim_mean_shift_sd = m;
            s.tim_shift_sign_from_seed = true;
        }
        ("tdc_board", "stuck") => s.tim_sd_mul = 1e-3,
        ("cable", "attenuation") | ("splitter", "attenuation") => {
            s.amp_mean_shift_sd = -m;
            s.tim_mean_shift_sd = m;
        }
        ("cable", "open") | ("splitter", "open") => {
            s.amp_occupancy_mul = 0.0;
            s.tim_occupancy_mul = 0.0;
        }
        ("slat", "degraded") => s.amp_mean_shift_sd = -m,
        ("crate", "off") => {
            s.amp_occupancy_mul = 0.0;
            s.tim_occupancy_mul = 0.0;
        }
        _ => {
            return Err(SimulatorError::UnknownFault {
                class: class.into(),
                failure_type: failure_type.into(),
            })
        }
    }
    Ok(s)
}

/// All (class, failure_type) pairs of the effects table.
pub const EFFECTS_TABLE: [(&str, &str); 16] = [
    ("pmt", "gain_drop"),
    ("pmt", "gain_rise"),
    ("pmt", "dead"),
    ("pmt", "noisy"),
    ("hv_supply", "off"),
    ("hv_supply", "sag"),
    ("adc_board", "pedestal_shift"),
    ("adc_board", "stuck"),
    ("tdc_board", "drift"),
    ("tdc_board", "stuck"),
    ("cable", "attenuation"),
    ("cable", "open"),
    ("splitter", "attenuation"),
    ("splitter", "open"),
    ("slat", "degraded"),
    ("crate", "off"),
];

fn class_defs() -> Vec<ComponentClass> {
    let mut map: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (class, ft) in EFFECTS_TABLE {
        map.entry(class).or_default().push(ft.to_string());
    }
    map.into_iter()
        .map(|(name, failure_types)| ComponentClass {
            name: name.to_string(),
            failure_types,
        })
        .collect()
}

fn behavior_entries(spec: &SyntheticSpec) -> Vec<BehaviorEntry> {
    let trend = |direction| TrendSpec {
        direction,
        weight: spec.trend_weight,
        slope: spec.trend_slope,
        cutoff: spec.trend_cutoff,
    };
    use FeatureName::*;
    use TrendDirection::*;
    let raw: &[(&str, &str, FeatureName, &str, TrendDirection)] = &[
        ("pmt", "gain_drop", Mean, "amplitude", Decreasing),
        ("pmt", "gain_rise", Mean, "amplitude", Increasing),
        ("pmt", "dead", Occupancy, "amplitude", Decreasing),
        ("pmt", "dead", Occupancy, "timing", Decreasing),
        ("pmt", "noisy", Std, "amplitude", Increasing),
        ("pmt", "noisy", UnderflowFrac, "amplitude", Increasing),
        ("pmt", "noisy", OverflowFrac, "amplitude", Increasing),
        ("hv_supply", "off", Occupancy, "amplitude", Decreasing),
        ("hv_supply", "off", Occupancy, "timing", Decreasing),
        ("hv_supply", "sag", Mean, "amplitude", Decreasing),
        ("adc_board", "pedestal_shift", Mean, "amplitude", Increasing),
        ("adc_board", "stuck", Std, "amplitude", Decreasing),
        ("tdc_board", "drift", Mean, "timing", Either),
        ("tdc_board", "stuck", Std, "timing", Decreasing),
        ("cable", "attenuation", Mean, "amplitude", Decreasing),
        ("cable", "attenuation", Mean, "timing", Increasing),
        ("cable", "open", Occupancy, "amplitude", Decreasing),
        ("cable", "open", Occupancy, "timing", Decreasing),
        ("splitter", "attenuation", Mean, "amplitude", Decreasing),
        ("splitter", "attenuation", Mean, "timing", Increasing),
        ("splitter", "open", Occupancy, "amplitude", Decreasing),
        ("splitter", "open", Occupancy, "timing", Decreasing),
        ("slat", "degraded", Mean, "amplitude", Decreasing),
        ("crate", "off", Occupancy, "amplitude", Decreasing),
        ("crate", "off", Occupancy, "timing", Decreasing),
    ];
    raw.iter()
        .map(|&(class, ft, feature, role, dir)| BehaviorEntry {
            class: class.into(),
            failure_type: ft.into(),
            feature,
            probe_role: role.into(),
            trend: trend(dir),
        })
        .collect()
}

/// A generated detector: the model plus the per-channel probe wiring needed
/// for event synthesis.
pub struct SyntheticDetector {
    pub spec: SyntheticSpec,
    pub model: DetectorModel,
    channels: Vec<(ProbeId, ProbeId)>,
}

/// Generate the synthetic detector model for `spec`.
pub fn build_synthetic_model(spec: &SyntheticSpec) -> Result<SyntheticDetector, SimulatorError> {
    spec.validate()?;
    let n_channels = spec.channels();
    let amp_probe = |ch: usize| ProbeId::new(format!("c{ch:04}.amp"));
    let tim_probe = |ch: usize| ProbeId::new(format!("c{ch:04}.tim"));

    let mut probes = Vec::with_capacity(2 * n_channels);
    let mut components = Vec::new();
    let mut depends: BTreeMap<ComponentId, BTreeSet<ProbeId>> = BTreeMap::new();
    let mut channels = Vec::with_capacity(n_channels);

    for ch in 0..n_channels {
        probes.push((amp_probe(ch), "amplitude".to_string()));
        probes.push((tim_probe(ch), "timing".to_string()));
        channels.push((amp_probe(ch), tim_probe(ch)));
    }

    let both = |ch: usize| BTreeSet::from([amp_probe(ch), tim_probe(ch)]);

    for slat in 0..spec.n_slats {
        let id = ComponentId::new(format!("slat{slat:04}"));
        let mut sig = BTreeSet::new();
        for ch in slat * spec.pmts_per_slat..(slat + 1) * spec.pmts_per_slat {
            sig.extend(both(ch));
        }
        components.push((id.clone(), "slat".to_string()));
        depends.insert(id, sig);
    }

    for ch in 0..n_channels {
        for (prefix, class) in [("pmt", "pmt"), ("cable", "cable"), ("splitter", "splitter")] {
            let id = ComponentId::new(format!("{prefix}_c{ch:04}"));
            components.push((id.clone(), class.to_string()));
            depends.insert(id, both(ch));
        }
    }

    let n_boards = spec.boards();
    for b in 0..n_boards {
        let lo = b * spec.board_group;
        let hi = ((b + 1) * spec.board_group).min(n_channels);
        let adc = ComponentId::new(format!("adc_b{b:03}"));
        components.push((adc.clone(), "adc_board".to_string()));
        depends.insert(adc, (lo..hi).map(amp_probe).collect());
        let tdc = ComponentId::new(format!("tdc_b{b:03}"));
        components.push((tdc.clone(), "tdc_board".to_string()));
        depends.insert(tdc, (lo..hi).map(tim_probe).collect());
    }

    for h in 0..spec.hv_supplies() {
        let lo = h * spec.hv_group;
        let hi = ((h + 1) * spec.hv_group).min(n_channels);
        let id = ComponentId::new(format!("hv{h:03}"));
        components.push((id.clone(), "hv_supply".to_string()));
        depends.insert(id, (lo..hi).flat_map(&both).collect());
    }

    // boards are racked in order: all ADC boards, then all TDC boards
    let board_signature = |global: usize| -> BTreeSet<ProbeId> {
        if global < n_boards {
            let lo = global * spec.board_group;
            let hi = ((global + 1) * spec.board_group).min(n_channels);
            (lo..hi).map(amp_probe).collect()
        } else {
            let b = global - n_boards;
            let lo = b * spec.board_group;
            let hi = ((b + 1) * spec.board_group).min(n_channels);
            (lo..hi).map(tim_probe).collect()
        }
    };
    for k in 0..spec.crates() {
        let lo = k * spec.boards_per_crate;
        let hi = ((k + 1) * spec.boards_per_crate).min(2 * n_boards);
        let id = ComponentId::new(format!("crate{k:02}"));
        components.push((id.clone(), "crate".to_string()));
        depends.insert(id, (lo..hi).flat_map(board_signature).collect());
    }

    let model = DetectorModel::from_parts(
        components,
        probes,
        depends,
        class_defs(),
        behavior_entries(spec),
        BTreeMap::new(),
    )?;
    Ok(SyntheticDetector {
        spec: spec.clone(),
        model,
        channels,
    })
}

// splitmix64; per-channel substream seeds
fn stream_seed(seed: u64, channel: u64) -> u64 {
    let mut z = seed ^ channel.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl SyntheticDetector {
    /// Resolved per-channel shifts for a scenario: identity everywhere, the
    /// fault's shift on channels reached through the target (per probe side).
    fn channel_shifts(
        &self,
        scenario: Option<&FaultScenario>,
    ) -> Result<Vec<ChannelShift>, SimulatorError> {
        let mut shifts = vec![ChannelShift::identity(); self.channels.len()];
        let Some(sc) = scenario else {
            return Ok(shifts);
        };
        let class = self
            .model
            .component_class(&sc.target)
            .map_err(|_| SimulatorError::UnknownTarget(sc.target.clone()))?
            .name
            .clone();
        let shift = fault_effects(&class, &sc.failure_type, sc.magnitude)?;
        let affected = self.model.dependent_probes(&sc.target)?;
        let tim_sign = if stream_seed(sc.seed, u64::MAX) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        for (ch, (amp, tim)) in self.channels.iter().enumerate() {
            let amp_hit = affected.contains(amp);
            let tim_hit = affected.contains(tim);
            if !amp_hit && !tim_hit {
                continue;
            }
            let s = &mut shifts[ch];
            if amp_hit {
                s.amp_occupancy_mul = shift.amp_occupancy_mul;
                s.amp_mean_shift_sd = shift.amp_mean_shift_sd;
                s.amp_sd_mul = shift.amp_sd_mul;
            }
            if tim_hit {
                s.tim_occupancy_mul = shift.tim_occupancy_mul;
                s.tim_sd_mul = shift.tim_sd_mul;
                s.tim_mean_shift_sd = if shift.tim_shift_sign_from_seed {
                    tim_sign * shift.tim_mean_shift_sd
                } else {
                    shift.tim_mean_shift_sd
                };
            }
        }
        Ok(shifts)
    }

    /// Synthesize one event batch. Deterministic in (spec, scenario,
    /// n_events, seed): each channel owns a substream seeded from
    /// splitmix64(seed, channel) and consumes exactly three draws per event
    /// (hit roll, amplitude, timing) whether or not the hit lands.
    pub fn generate_events(
        &self,
        scenario: Option<&FaultScenario>,
        n_events: usize,
        seed: u64,
    ) -> Result<EventBatch, SimulatorError> {
        let shifts = self.channel_shifts(scenario)?;
        let spec = &self.spec;
        let mut readings: BTreeMap<ProbeId, Vec<Option<f64>>> = BTreeMap::new();
        for (ch, (amp_probe, tim_probe)) in self.channels.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, ch as u64));
            let s = &shifts[ch];
            let amp_mu = spec.amplitude_mean + s.amp_mean_shift_sd * spec.amplitude_sd;
            let amp_sd = spec.amplitude_sd * s.amp_sd_mul;
            let tim_mu = spec.timing_mean + s.tim_mean_shift_sd * spec.timing_sd;
            let tim_sd = spec.timing_sd * s.tim_sd_mul;
            let mut amp_col = Vec::with_capacity(n_events);
            let mut tim_col = Vec::with_capacity(n_events);
            for _ in 0..n_events {
                let u: f64 = rng.gen();
                let ga: f64 = rng.sample(StandardNormal);
                let gt: f64 = rng.sample(StandardNormal);
                let amp_hit = u < spec.occupancy * s.amp_occupancy_mul;
                let tim_hit = u < spec.occupancy * s.tim_occupancy_mul;
                amp_col.push(amp_hit.then_some(amp_mu + amp_sd * ga));
                tim_col.push(tim_hit.then_some(tim_mu + tim_sd * gt));
            }
            readings.insert(amp_probe.clone(), amp_col);
            readings.insert(tim_probe.clone(), tim_col);
        }
        Ok(EventBatch::new(n_events, readings))
    }

    /// Build the fault-free baseline archive (`baseline_samples` batches of
    /// `sample_size` events, substream seeds derived from `seed`).
    pub fn build_baseline_archive(
        &self,
        config: &MonitorConfig,
        seed: u64,
    ) -> Result<BaselineArchive, SimulatorError> {
        let batches: Result<Vec<EventBatch>, _> = (0..config.baseline_samples)
            .map(|i| self.generate_events(None, config.sample_size, stream_seed(seed, 1 + i as u64)))
            .collect();
        Ok(build_baseline(&batches?, config)?)
    }

    pub fn features_for(
        &self,
        batch: &EventBatch,
        archive: &BaselineArchive,
    ) -> BTreeMap<ProbeId, FeatureVector> {
        batch
            .readings
            .iter()
            .map(|(p, col)| {
                let range = archive.probes.get(p).map(|b| b.range());
                (p.clone(), extract_features(col, range))
            })
            .collect()
    }
}

/// Outcome of one end-to-end trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub verdicts: Vec<ProbeVerdict>,
    pub suspects: SuspectReport,
    pub beliefs: Vec<HypothesisBelief>,
    pub ground_truth: Option<FaultScenario>,
    pub metrics: TrialMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// True component in the suspect set.
    pub contained: bool,
    pub bad_probes: usize,
    pub suspect_size: usize,
    /// 1-based rank of the exact (target, failure type) hypothesis.
    pub true_rank: Option<usize>,
    /// 1-based rank of the first hypothesis on the target's ambiguity class
    /// whose belief equals the true hypothesis's belief. Structurally
    /// indistinguishable components score identically, so this credits a
    /// diagnosis that is correct up to that indistinguishability.
    pub class_rank: Option<usize>,
}

fn compute_metrics(
    verdicts: &[ProbeVerdict],
    suspects: &SuspectReport,
    beliefs: &[HypothesisBelief],
    truth: Option<&FaultScenario>,
) -> TrialMetrics {
    let bad_probes = verdicts
        .iter()
        .filter(|v| v.state == ProbeState::Bad)
        .count();
    let suspect_size = suspects.entries.len();
    let (contained, true_rank, class_rank) = match truth {
        Some(t) => {
            let contained = suspects.rank_of(&t.target).is_some();
            let true_rank = beliefs
                .iter()
                .position(|b| {
                    b.hypothesis.component == t.target && b.hypothesis.failure_type == t.failure_type
                })
                .map(|i| i + 1);
            let class: Vec<ComponentId> = suspects
                .class_of(&t.target)
                .map(|c| c.to_vec())
                .unwrap_or_default();
            let true_cf = true_rank.map(|r| beliefs[r - 1].combined_cf);
            let class_rank = true_cf.and_then(|cf| {
                beliefs
                    .iter()
                    .position(|b| {
                        class.contains(&b.hypothesis.component)
                            && b.combined_cf.to_bits() == cf.to_bits()
                    })
                    .map(|i| i + 1)
            });
            (contained, true_rank, class_rank)
        }
        None => (false, None, None),
    };
    TrialMetrics {
        contained,
        bad_probes,
        suspect_size,
        true_rank,
        class_rank,
    }
}

/// Run the full pipeline once: faulty batch -> sweep -> structural -> behavioral.
pub fn run_trial_with(
    detector: &SyntheticDetector,
    archive: &BaselineArchive,
    scenario: Option<&FaultScenario>,
    config: &MonitorConfig,
) -> Result<TrialResult, SimulatorError> {
    let seed = scenario.map(|s| s.seed).unwrap_or(0);
    let batch = detector.generate_events(scenario, config.sample_size, seed)?;
    let verdicts = monitor_sweep(&batch, archive, config)?;
    let suspects = suspect_report(&detector.model, &verdicts)?;
    let beliefs = if suspects.is_empty() {
        Vec::new()
    } else {
        let features = detector.features_for(&batch, archive);
        diagnose(&suspects, &detector.model, &features, archive)?
    };
    let metrics = compute_metrics(&verdicts, &suspects, &beliefs, scenario);
    Ok(TrialResult {
        verdicts,
        suspects,
        beliefs,
        ground_truth: scenario.cloned(),
        metrics,
    })
}

/// Build model + baseline and run one trial. `baseline_seed` feeds the
/// fault-free archive; the scenario's own seed feeds the faulty batch.
pub fn run_trial(
    spec: &SyntheticSpec,
    scenario: Option<&FaultScenario>,
    config: &MonitorConfig,
    baseline_seed: u64,
) -> Result<TrialResult, SimulatorError> {
    let detector = build_synthetic_model(spec)?;
    let archive = detector.build_baseline_archive(config, baseline_seed)?;
    run_trial_with(&detector, &archive, scenario, config)
}

/// A campaign: one spec and config, many scenarios sharing a baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    #[serde(default)]
    pub spec: SyntheticSpec,
    #[serde(default)]
    pub config: MonitorConfig,
    pub baseline_seed: u64,
    pub scenarios: Vec<FaultScenario>,
}

/// Aggregate metrics over a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub trials: usize,
    /// Trials with at least one BAD probe.
    pub alerted_trials: usize,
    /// Containment rate over alerted trials.
    pub containment_rate: f64,
    pub mean_suspect_size: f64,
    pub median_suspect_size: f64,
    /// Histogram of exact true-hypothesis ranks (rank -> count).
    pub true_rank_histogram: BTreeMap<usize, usize>,
    /// Fraction of alerted trials diagnosed correctly at rank 1, up to
    /// structural indistinguishability within the target's ambiguity class.
    pub class_top1_rate: f64,
}

/// Run every scenario of a campaign against one shared baseline.
pub fn run_campaign(campaign: &Campaign) -> Result<(Vec<TrialResult>, CampaignSummary), SimulatorError> {
    let detector = build_synthetic_model(&campaign.spec)?;
    let archive = detector.build_baseline_archive(&campaign.config, campaign.baseline_seed)?;
    let mut results = Vec::with_capacity(campaign.scenarios.len());
    for scenario in &campaign.scenarios {
        results.push(run_trial_with(
            &detector,
            &archive,
            Some(scenario),
            &campaign.config,
        )?);
    }
    let summary = summarize(&results);
    Ok((results, summary))
}

pub fn summarize(results: &[TrialResult]) -> CampaignSummary {
    let trials = results.len();
    let alerted: Vec<&TrialResult> = results.iter().filter(|r| r.metrics.bad_probes > 0).collect();
    let alerted_trials = alerted.len();
    let contained = alerted.iter().filter(|r| r.metrics.contained).count();
    let mut sizes: Vec<usize> = results.iter().map(|r| r.metrics.suspect_size).collect();
    sizes.sort_unstable();
    let median = if sizes.is_empty() {
        0.0
    } else if sizes.len() % 2 == 1 {
        sizes[sizes.len() / 2] as f64
    } else {
        (sizes[sizes.len() / 2 - 1] + sizes[sizes.len() / 2]) as f64 / 2.0
    };
    let mean = if sizes.is_empty() {
        0.0
    } else {
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
    };
    let mut rank_hist = BTreeMap::new();
    for r in results {
        if let Some(rank) = r.metrics.true_rank {
            *rank_hist.entry(rank).or_insert(0) += 1;
        }
    }
    let class_top1 = alerted
        .iter()
        .filter(|r| r.metrics.class_rank == Some(1))
        .count();
    CampaignSummary {
        trials,
        alerted_trials,
        containment_rate: if alerted_trials == 0 {
            0.0
        } else {
            contained as f64 / alerted_trials as f64
        },
        mean_suspect_size: mean,
        median_suspect_size: median,
        true_rank_histogram: rank_hist,
        class_top1_rate: if alerted_trials == 0 {
            0.0
        } else {
            class_top1 as f64 / alerted_trials as f64
        },
    }
}

/// Cross-validate the effects table against the shipped behavioral model:
/// every injected shift must have at least one behavioral entry whose
/// direction matches its sign convention. Returns human-readable mismatches.
pub fn check_effects_consistency(spec: &SyntheticSpec) -> Vec<String> {
    let entries = behavior_entries(spec);
    let mut problems = Vec::new();
    for (class, ft) in EFFECTS_TABLE {
        let shift = match fault_effects(class, ft, 5.0) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("({class}, {ft}): {e}"));
                continue;
            }
        };
        // expected feature movements implied by the shift, per probe role
        let mut implied: Vec<(FeatureName, &str, TrendDirection)> = Vec::new();
        use FeatureName::*;
        use TrendDirection::*;
        if shift.amp_occupancy_mul < 1.0 {
            implied.push((Occupancy, "amplitude", Decreasing));
        }
        if shift.tim_occupancy_mul < 1.0 {
            implied.push((Occupancy, "timing", Decreasing));
        }
        if shift.amp_mean_shift_sd < 0.0 {
            implied.push((Mean, "amplitude", Decreasing));
        }
        if shift.amp_mean_shift_sd > 0.0 {
            implied.push((Mean, "amplitude", Increasing));
        }
        if shift.tim_mean_shift_sd != 0.0 {
            let dir = if shift.tim_shift_sign_from_seed {
                Either
            } else if shift.tim_mean_shift_sd > 0.0 {
                Increasing
            } else {
                Decreasing
            };
            implied.push((Mean, "timing", dir));
        }
        if shift.amp_sd_mul > 1.0 {
            implied.push((Std, "amplitude", Increasing));
        }
        if shift.amp_sd_mul < 1.0 {
            implied.push((Std, "amplitude", Decreasing));
        }
        if shift.tim_sd_mul > 1.0 {
            implied.push((Std, "timing", Increasing));
        }
        if shift.tim_sd_mul < 1.0 {
            implied.push((Std, "timing", Decreasing));
        }
        for (feature, role, dir) in implied {
            let matched = entries.iter().any(|e| {
                e.class == class
                    && e.failure_type == ft
                    && e.feature == feature
                    && e.probe_role == role
                    && (e.trend.direction == dir || e.trend.direction == Either)
            });
            if !matched {
                problems.push(format!(
                    "({class}, {ft}): no behavioral entry matches {feature} {dir:?} on {role} probes"
                ));
            }
        }
    }
    problems
}
