//! Level 1: statistical probe monitoring.
//!
//! Aggregates event batches into per-probe histograms and feature vectors,
//! maintains the fault-free baseline archive, and classifies each probe
//! OK/BAD with a chi-square goodness-of-fit test against the archived
//! expected histogram.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ProbeId;

/// Spread floor below which a Z-score is considered degenerate.
pub const SPREAD_FLOOR: f64 = 1e-9;
/// |z| substituted when the baseline spread is degenerate.
pub const DEGENERATE_Z: f64 = 10.0;
/// Minimum expected count per merged histogram cell.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("bin edges must be strictly increasing with at least 3 edges")]
    NonMonotoneEdges,
    #[error("baseline requires at least 2 batches, got {0}")]
    TooFewBatches(usize),
    #[error("expected {expected} baseline batches, got {got}")]
    BatchCountMismatch { expected: usize, got: usize },
    #[error("baseline batches do not cover the same probe set")]
    ProbeSetMismatch,
    #[error("batch event counts differ across baseline batches")]
    EventCountMismatch,
    #[error("probe {0} missing from baseline archive")]
    ProbeNotInArchive(ProbeId),
    #[error("probe {0} missing from event batch")]
    ProbeNotInBatch(ProbeId),
    #[error("observed and expected cell vectors differ in length ({0} vs {1})")]
    CellMismatch(usize, usize),
    #[error("expected cell count {0} is not positive")]
    NonPositiveExpected(f64),
    #[error("need at least 2 cells for a chi-square test")]
    TooFewCells,
    #[error("baseline spread is degenerate (s_x <= {SPREAD_FLOOR:e})")]
    DegenerateSpread,
    #[error("probe {0} has too few baseline counts for a chi-square test")]
    InsufficientBaseline(ProbeId),
    #[error("invalid monitor config: {0}")]
    InvalidConfig(String),
    #[error("malformed event batch: {0}")]
    BadBatch(String),
}

/// Features extracted per probe from one event batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Mean,
    Std,
    Occupancy,
    UnderflowFrac,
    OverflowFrac,
}

impl FeatureName {
    pub const ALL: [FeatureName; 5] = [
        FeatureName::Mean,
        FeatureName::Std,
        FeatureName::Occupancy,
        FeatureName::UnderflowFrac,
        FeatureName::OverflowFrac,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureName::Mean => "mean",
            FeatureName::Std => "std",
            FeatureName::Occupancy => "occupancy",
            FeatureName::UnderflowFrac => "underflow_frac",
            FeatureName::OverflowFrac => "overflow_frac",
        }
    }
}

impl std::fmt::Display for FeatureName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-probe feature vector for one batch. `mean` and `std` are absent when
/// the probe recorded no hits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub occupancy: f64,
    pub underflow_frac: f64,
    pub overflow_frac: f64,
}

impl FeatureVector {
    pub fn get(&self, name: FeatureName) -> Option<f64> {
        match name {
            FeatureName::Mean => self.mean,
            FeatureName::Std => self.std,
            FeatureName::Occupancy => Some(self.occupancy),
            FeatureName::UnderflowFrac => Some(self.underflow_frac),
            FeatureName::OverflowFrac => Some(self.overflow_frac),
        }
    }
}

/// One batch of raw per-probe readings. `None` marks a no-hit event.
#[derive(Clone, Debug, PartialEq)]
pub struct EventBatch {
    pub event_count: usize,
    pub readings: BTreeMap<ProbeId, Vec<Option<f64>>>,
}

impl EventBatch {
    pub fn new(event_count: usize, readings: BTreeMap<ProbeId, Vec<Option<f64>>>) -> Self {
        debug_assert!(readings.values().all(|v| v.len() == event_count));
        EventBatch {
            event_count,
            readings,
        }
    }

    pub fn probe_ids(&self) -> impl Iterator<Item = &ProbeId> {
        self.readings.keys()
    }

    /// Parse a batch from JSON-lines (one `{probe_id: value}` object per
    /// event; absent probes mark no-hit) or CSV (header row of probe ids,
    /// one row per event, empty fields mark no-hit). The format is sniffed
    /// from the first non-whitespace character.
    pub fn parse(text: &str) -> Result<Self, MonitorError> {
        match text.trim_start().chars().next() {
            Some('{') => Self::parse_jsonl(text),
            Some(_) => Self::parse_csv(text),
            None => Err(MonitorError::BadBatch("empty batch file".into())),
        }
    }

    fn parse_jsonl(text: &str) -> Result<Self, MonitorError> {
        let mut rows: Vec<BTreeMap<String, f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: BTreeMap<String, f64> = serde_json::from_str(line)
                .map_err(|e| MonitorError::BadBatch(format!("line {}: {e}", i + 1)))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(MonitorError::BadBatch("batch has no events".into()));
        }
        let probes: BTreeSet<String> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
        let event_count = rows.len();
        let mut readings = BTreeMap::new();
        for p in probes {
            let column = rows.iter().map(|r| r.get(&p).copied()).collect();
            readings.insert(ProbeId::new(p), column);
        }
        Ok(EventBatch::new(event_count, readings))
    }

    fn parse_csv(text: &str) -> Result<Self, MonitorError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| MonitorError::BadBatch("missing CSV header".into()))?;
        let probes: Vec<ProbeId> = header.split(',').map(|s| ProbeId::new(s.trim())).collect();
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); probes.len()];
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != probes.len() {
                return Err(MonitorError::BadBatch(format!(
                    "row {} has {} fields, expected {}",
                    i + 2,
                    fields.len(),
                    probes.len()
                )));
            }
            for (j, field) in fields.iter().enumerate() {
                let field = field.trim();
                if field.is_empty() {
                    columns[j].push(None);
                } else {
                    let v = field.parse::<f64>().map_err(|e| {
                        MonitorError::BadBatch(format!("row {}, column {}: {e}", i + 2, j + 1))
                    })?;
                    columns[j].push(Some(v));
                }
            }
        }
        let event_count = columns.first().map(|c| c.len()).unwrap_or(0);
        if event_count == 0 {
            return Err(MonitorError::BadBatch("batch has no events".into()));
        }
        let readings = probes.into_iter().zip(columns).collect();
        Ok(EventBatch::new(event_count, readings))
    }

    /// Render as JSON-lines, probes sorted within each event.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for i in 0..self.event_count {
            let row: BTreeMap<&str, f64> = self
                .readings
                .iter()
                .filter_map(|(p, col)| col[i].map(|v| (p.as_str(), v)))
                .collect();
            out.push_str(&serde_json::to_string(&row).expect("row serialization cannot fail"));
            out.push('\n');
        }
        out
    }
}

/// Histogram with fixed edges plus underflow/overflow counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Extended cell vector: [underflow, bins..., overflow].
    pub fn cells(&self) -> Vec<f64> {
        let mut cells = Vec::with_capacity(self.counts.len() + 2);
        cells.push(self.underflow as f64);
        cells.extend(self.counts.iter().map(|&c| c as f64));
        cells.push(self.overflow as f64);
        cells
    }
}

/// Bin readings into half-open bins [e_i, e_{i+1}); readings below the first
/// edge go to underflow, at or above the last edge to overflow.
pub fn build_histogram(
    readings: impl IntoIterator<Item = f64>,
    edges: &[f64],
) -> Result<Histogram, MonitorError> {
    if edges.len() < 3 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MonitorError::NonMonotoneEdges);
    }
    let mut counts = vec![0u64; edges.len() - 1];
    let mut underflow = 0u64;
    let mut overflow = 0u64;
    for x in readings {
        if x < edges[0] {
            underflow += 1;
        } else if x >= edges[edges.len() - 1] {
            overflow += 1;
        } else {
            // index of the last edge <= x
            let i = edges.partition_point(|&e| e <= x) - 1;
            counts[i] += 1;
        }
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
        underflow,
        overflow,
    })
}

/// Monitoring configuration. `sample_size` is the nominal events per batch,
/// `baseline_samples` the number of fault-free batches behind the archive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub sample_size: usize,
    pub baseline_samples: usize,
    pub bins: usize,
    pub alpha: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            sample_size: 1000,
            baseline_samples: 10,
            bins: 20,
            alpha: 0.01,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), MonitorError> {
        if self.sample_size < 30 {
            return Err(MonitorError::InvalidConfig(format!(
                "sample_size {} < 30",
                self.sample_size
            )));
        }
        if self.bins < 2 {
            return Err(MonitorError::InvalidConfig(format!(
                "bins {} < 2",
                self.bins
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MonitorError::InvalidConfig(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if self.baseline_samples < 2 {
            return Err(MonitorError::InvalidConfig(format!(
                "baseline_samples {} < 2",
                self.baseline_samples
            )));
        }
        Ok(())
    }
}

/// Mean and spread of one feature over the baseline batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub avg: f64,
    pub sd: f64,
}

/// Per-probe baseline: frozen bin edges, the merged-cell plan, expected
/// counts per merged cell, and per-feature norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBaseline {
    pub edges: Vec<f64>,
    /// Half-open ranges over the extended cell vector [underflow, bins, overflow].
    pub merge_plan: Vec<(usize, usize)>,
    /// Expected count per merged cell at the baseline sample size.
    pub expected: Vec<f64>,
    pub feature_norms: BTreeMap<FeatureName, FeatureNorm>,
}

impl ProbeBaseline {
    /// Fold an observed histogram into this baseline's merged cells.
    pub fn fold(&self, hist: &Histogram) -> Result<Vec<f64>, MonitorError> {
        let cells = hist.cells();
        let n = self.merge_plan.last().map(|r| r.1).unwrap_or(0);
        if cells.len() != n {
            return Err(MonitorError::CellMismatch(cells.len(), n));
        }
        Ok(self
            .merge_plan
            .iter()
            .map(|&(lo, hi)| cells[lo..hi].iter().sum())
            .collect())
    }

    /// Expected merged cells scaled to an observed event count.
    pub fn expected_cells(&self, scale: f64) -> Vec<f64> {
        self.expected.iter().map(|e| e * scale).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }
}

/// Write-once archive of fault-free expectations, keyed by probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineArchive {
    pub sample_size: usize,
    pub baseline_samples: usize,
    pub probes: BTreeMap<ProbeId, ProbeBaseline>,
}

impl BaselineArchive {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, MonitorError> {
        serde_json::from_str(text).map_err(|e| MonitorError::BadBatch(e.to_string()))
    }
}

/// Probe state after a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeState {
    Ok,
    Bad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub probe: ProbeId,
    pub state: ProbeState,
    pub statistic: f64,
    pub dof: usize,
}

/// Features of the non-missing readings of one probe. Under/overflow
/// fractions are relative to `range` when given, zero otherwise.
pub fn extract_features(readings: &[Option<f64>], range: Option<(f64, f64)>) -> FeatureVector {
    let event_count = readings.len().max(1);
    let hits: Vec<f64> = readings.iter().flatten().copied().collect();
    let n = hits.len();
    let occupancy = n as f64 / event_count as f64;
    if n == 0 {
        return FeatureVector {
            occupancy: 0.0,
            ..Default::default()
        };
    }
    let mean = hits.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss = hits.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (under, over) = match range {
        Some((lo, hi)) => {
            let u = hits.iter().filter(|&&x| x < lo).count();
            let o = hits.iter().filter(|&&x| x >= hi).count();
            (u as f64 / n as f64, o as f64 / n as f64)
        }
        None => (0.0, 0.0),
    };
    FeatureVector {
        mean: Some(mean),
        std: Some(std),
        occupancy,
        underflow_frac: under,
        overflow_frac: over,
    }
}

/// z = (x - x_avg) / s_x. Errors when the spread is at or below the floor.
pub fn z_score(x: f64, x_avg: f64, s_x: f64) -> Result<f64, MonitorError> {
    if s_x <= SPREAD_FLOOR {
        return Err(MonitorError::DegenerateSpread);
    }
    Ok((x - x_avg) / s_x)
}

/// Z-score with the degenerate-spread policy applied: on a degenerate
/// spread, substitute |z| = 10 with the sign of x - x_avg (zero when the
/// value sits exactly on the degenerate baseline).
pub fn z_score_or_substitute(x: f64, x_avg: f64, s_x: f64) -> f64 {
    match z_score(x, x_avg, s_x) {
        Ok(z) => z,
        Err(_) => {
            if x == x_avg {
                0.0
            } else if x > x_avg {
                DEGENERATE_Z
            } else {
                -DEGENERATE_Z
            }
        }
    }
}

/// Merge adjacent cells outside-in until every cell's expected count reaches
/// the floor (or only two cells remain). Returns half-open ranges over the
/// input cell vector.
fn merge_plan(expected: &[f64]) -> Vec<(usize, usize)> {
    let mut ranges: Vec<(usize, usize)> = (0..expected.len()).map(|i| (i, i + 1)).collect();
    let sum = |r: &(usize, usize)| expected[r.0..r.1].iter().sum::<f64>();
    loop {
        if ranges.len() <= 2 {
            break;
        }
        if sum(&ranges[0]) < MIN_EXPECTED {
            let merged = (ranges[0].0, ranges[1].1);
            ranges.splice(0..2, [merged]);
            continue;
        }
        let last = ranges.len() - 1;
        if sum(&ranges[last]) < MIN_EXPECTED {
            let merged = (ranges[last - 1].0, ranges[last].1);
            ranges.splice(last - 1..=last, [merged]);
            continue;
        }
        // interior low cell: merge into the smaller neighbor
        match (1..ranges.len() - 1).find(|&i| sum(&ranges[i]) < MIN_EXPECTED) {
            Some(i) => {
                if sum(&ranges[i - 1]) <= sum(&ranges[i + 1]) {
                    let merged = (ranges[i - 1].0, ranges[i].1);
                    ranges.splice(i - 1..=i, [merged]);
                } else {
                    let merged = (ranges[i].0, ranges[i + 1].1);
                    ranges.splice(i..=i + 1, [merged]);
                }
            }
            None => break,
        }
    }
    ranges
}

/// Build the baseline archive from fault-free batches.
///
/// Bin edges are frozen per probe at x_avg ± 4·s of the pooled readings in
/// `config.bins` equal bins; expected cells are per-bin mean counts over the
/// batches, merged until every cell holds at least 5 expected counts.
/// Feature norms carry the mean and n-1 standard deviation of the per-batch
/// feature values.
pub fn build_baseline(
    batches: &[EventBatch],
    config: &MonitorConfig,
) -> Result<BaselineArchive, MonitorError> {
    config.validate()?;
    if batches.len() < 2 {
        return Err(MonitorError::TooFewBatches(batches.len()));
    }
    if batches.len() != config.baseline_samples {
        return Err(MonitorError::BatchCountMismatch {
            expected: config.baseline_samples,
            got: batches.len(),
        });
    }
    let probe_set: BTreeSet<&ProbeId> = batches[0].readings.keys().collect();
    if batches
        .iter()
        .any(|b| b.readings.keys().collect::<BTreeSet<_>>() != probe_set)
    {
        return Err(MonitorError::ProbeSetMismatch);
    }
    let event_count = batches[0].event_count;
    if batches.iter().any(|b| b.event_count != event_count) {
        return Err(MonitorError::EventCountMismatch);
    }

    let m = batches.len();
    let mut probes = BTreeMap::new();
    for probe in probe_set {
        let pooled: Vec<f64> = batches
            .iter()
            .flat_map(|b| b.readings[probe].iter().flatten().copied())
            .collect();
        if (pooled.len() as f64) < MIN_EXPECTED * m as f64 {
            return Err(MonitorError::InsufficientBaseline((*probe).clone()));
        }
        let n = pooled.len() as f64;
        let mu = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
        let mut s = var.sqrt();
        if !(s > 0.0) {
            s = 1.0; // constant readings: any span works, all mass lands in one bin
        }
        let lo = mu - 4.0 * s;
        let hi = mu + 4.0 * s;
        let edges: Vec<f64> = (0..=config.bins)
            .map(|i| lo + (hi - lo) * i as f64 / config.bins as f64)
            .collect();

        let mut cell_sums = vec![0.0f64; config.bins + 2];
        let mut per_batch_features = Vec::with_capacity(m);
        for batch in batches {
            let col = &batch.readings[probe];
            let hist = build_histogram(col.iter().flatten().copied(), &edges)?;
            for (acc, c) in cell_sums.iter_mut().zip(hist.cells()) {
                *acc += c;
            }
            per_batch_features.push(extract_features(col, Some((lo, hi))));
        }
        let expected_raw: Vec<f64> = cell_sums.iter().map(|s| s / m as f64).collect();
        let plan = merge_plan(&expected_raw);
        let expected: Vec<f64> = plan
            .iter()
            .map(|&(a, b)| expected_raw[a..b].iter().sum())
            .collect();
        if expected.len() < 2 || expected.iter().any(|&e| !(e > 0.0)) {
            return Err(MonitorError::InsufficientBaseline((*probe).clone()));
        }

        let mut feature_norms = BTreeMap::new();
        for name in FeatureName::ALL {
            let values: Vec<f64> = per_batch_features.iter().filter_map(|f| f.get(name)).collect();
            if values.len() != m {
                continue; // feature absent in some batch: no norm
            }
            let avg = values.iter().sum::<f64>() / m as f64;
            let ss = values.iter().map(|v| (v - avg).powi(2)).sum::<f64>();
            let sd = (ss / (m - 1) as f64).sqrt();
            feature_norms.insert(name, FeatureNorm { avg, sd });
        }

        probes.insert(
            (*probe).clone(),
            ProbeBaseline {
                edges,
                merge_plan: plan,
                expected,
                feature_norms,
            },
        );
    }

    Ok(BaselineArchive {
        sample_size: event_count,
        baseline_samples: m,
        probes,
    })
}

/// Pearson statistic sum((O-E)^2/E) over aligned cells; dof = cells - 1.
pub fn chi_square_stat(observed: &[f64], expected: &[f64]) -> Result<(f64, usize), MonitorError> {
    if observed.len() != expected.len() {
        return Err(MonitorError::CellMismatch(observed.len(), expected.len()));
    }
    if observed.len() < 2 {
        return Err(MonitorError::TooFewCells);
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if !(e > 0.0) {
            return Err(MonitorError::NonPositiveExpected(e));
        }
        let d = o - e;
        stat += d * d / e;
    }
    Ok((stat, observed.len() - 1))
}

/// Rational approximation to the standard normal quantile (Acklam),
/// relative error below 1.2e-9 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Upper critical value of the chi-square distribution via the
/// Wilson-Hilferty cube approximation.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    assert!(dof >= 1 && alpha > 0.0 && alpha < 1.0);
    let d = dof as f64;
    let z = normal_quantile(1.0 - alpha);
    let t = 1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt();
    d * t.powi(3)
}

/// BAD iff the statistic exceeds the critical value at (dof, alpha).
pub fn classify_probe(statistic: f64, dof: usize, alpha: f64) -> ProbeState {
    if statistic > chi_square_critical(dof, alpha) {
        ProbeState::Bad
    } else {
        ProbeState::Ok
    }
}

/// Run the chi-square test for every probe in the batch against the archive.
/// Verdicts are sorted by probe id; the sweep is a pure function of inputs.
///
/// The Pearson statistic is corrected for baseline-estimation variance by
/// the factor 1 + c/m (c = event-count ratio, m = baseline batches); with an
/// expected histogram that is itself an m-sample estimate, the raw statistic
/// is inflated by exactly that factor, which would break the false-positive
/// calibration at alpha.
pub fn monitor_sweep(
    batch: &EventBatch,
    archive: &BaselineArchive,
    config: &MonitorConfig,
) -> Result<Vec<ProbeVerdict>, MonitorError> {
    config.validate()?;
    let mut verdicts = Vec::with_capacity(batch.readings.len());
    for (probe, col) in &batch.readings {
        let baseline = archive
            .probes
            .get(probe)
            .ok_or_else(|| MonitorError::ProbeNotInArchive(probe.clone()))?;
        let hist = build_histogram(col.iter().flatten().copied(), &baseline.edges)?;
        let scale = batch.event_count as f64 / archive.sample_size as f64;
        let observed = baseline.fold(&hist)?;
        let expected = baseline.expected_cells(scale);
        let (raw, dof) = chi_square_stat(&observed, &expected)?;
        let statistic = raw / (1.0 + scale / archive.baseline_samples as f64);
        let state = classify_probe(statistic, dof, config.alpha);
        verdicts.push(ProbeVerdict {
            probe: probe.clone(),
            state,
            statistic,
            dof,
        });
    }
    Ok(verdicts)
}
