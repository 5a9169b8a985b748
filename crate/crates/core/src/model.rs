//! Structural and behavioral knowledge about the monitored system: the
//! component/probe graph, the dependency map, component classes with their
//! failure types, and expected-trend specifications per failure type.
//!
//! A `DetectorModel` is immutable after load and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::FeatureName;

/// Opaque component identifier. Nonempty, unique within a model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub String);

/// Opaque probe identifier. Nonempty, unique within a model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbeId(pub String);

impl ComponentId {
    pub fn new(s: impl Into<String>) -> Self {
        ComponentId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl ProbeId {
    pub fn new(s: impl Into<String>) -> Self {
        ProbeId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Expected movement of a feature under a failure type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendDirection {
    Increasing,
    Decreasing,
    Either,
    NoChange,
}

/// Parameterized trend expectation: direction plus the evidential weight,
/// slope, and cutoff that shape the relational mapping from a Z-score to a
/// certainty factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    pub direction: TrendDirection,
    pub weight: f64,
    pub slope: f64,
    pub cutoff: f64,
}

impl TrendSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(ModelError::InvalidTrend(format!(
                "weight {} not in (0, 1]",
                self.weight
            )));
        }
        if !(self.slope > 0.0) {
            return Err(ModelError::InvalidTrend(format!(
                "slope {} must be > 0",
                self.slope
            )));
        }
        if !self.cutoff.is_finite() {
            return Err(ModelError::InvalidTrend("cutoff must be finite".into()));
        }
        Ok(())
    }
}

/// A class of components sharing the same failure modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentClass {
    pub name: String,
    pub failure_types: Vec<String>,
}

/// One behavioral-model entry: for components of `class` failing as
/// `failure_type`, the feature `feature` on dependent probes whose kind
/// matches `probe_role` is expected to trend per `trend`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEntry {
    pub class: String,
    pub failure_type: String,
    pub feature: FeatureName,
    pub probe_role: String,
    pub trend: TrendSpec,
}

/// Behavioral model: trend expectations keyed by (class, failure type).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BehavioralModel {
    entries: Vec<BehaviorEntry>,
    index: BTreeMap<(String, String), Vec<usize>>,
}

impl BehavioralModel {
    pub fn new(mut entries: Vec<BehaviorEntry>) -> Self {
        entries.sort_by(|a, b| {
            (&a.class, &a.failure_type, &a.feature, &a.probe_role).cmp(&(
                &b.class,
                &b.failure_type,
                &b.feature,
                &b.probe_role,
            ))
        });
        let mut index: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            index
                .entry((e.class.clone(), e.failure_type.clone()))
                .or_default()
                .push(i);
        }
        BehavioralModel { entries, index }
    }

    pub fn entries(&self) -> &[BehaviorEntry] {
        &self.entries
    }

    /// Entries for one (class, failure type) pair, in deterministic order.
    pub fn entries_for(&self, class: &str, failure_type: &str) -> Vec<&BehaviorEntry> {
        self.index
            .get(&(class.to_string(), failure_type.to_string()))
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The full structural/behavioral model of the monitored system.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    components: BTreeMap<ComponentId, String>,
    classes: BTreeMap<String, ComponentClass>,
    probes: BTreeMap<ProbeId, String>,
    depends: BTreeMap<ComponentId, BTreeSet<ProbeId>>,
    inverse: BTreeMap<ProbeId, BTreeSet<ComponentId>>,
    behavior: BehavioralModel,
    priors: BTreeMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("empty identifier in {0}")]
    EmptyIdentifier(String),
    #[error("duplicate component id {0}")]
    DuplicateComponent(ComponentId),
    #[error("duplicate probe id {0}")]
    DuplicateProbe(ProbeId),
    #[error("component {component} depends on undeclared probe {probe}")]
    DanglingProbe {
        component: ComponentId,
        probe: ProbeId,
    },
    #[error("dependency map references undeclared component {0}")]
    DanglingComponent(ComponentId),
    #[error("component {component} declared with unknown class {class}")]
    UnknownClass { component: ComponentId, class: String },
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("unknown probe {0}")]
    UnknownProbe(ProbeId),
    #[error("class {0} has no failure types")]
    EmptyFailureTypes(String),
    #[error("class {class} lists failure type {failure_type} more than once")]
    DuplicateFailureType { class: String, failure_type: String },
    #[error("behavior entry references unknown class {0}")]
    BehaviorUnknownClass(String),
    #[error("behavior entry references unknown failure type {failure_type} of class {class}")]
    BehaviorUnknownFailureType { class: String, failure_type: String },
    #[error("invalid trend spec: {0}")]
    InvalidTrend(String),
    #[error("prior for class {class} is {value}, must be in (0, 1)")]
    InvalidPrior { class: String, value: f64 },
}

/// Validation diagnostic severity. Errors indicate invariant violations;
/// warnings flag structurally suspicious but loadable models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn warn(message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message,
        }
    }
}

// On-disk schema. Unknown keys are rejected.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    components: Vec<ComponentDecl>,
    probes: Vec<ProbeDecl>,
    depends: BTreeMap<String, Vec<String>>,
    classes: BTreeMap<String, ClassDecl>,
    behavior: Vec<BehaviorDecl>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    priors: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDecl {
    id: String,
    class: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeDecl {
    id: String,
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDecl {
    failure_types: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorDecl {
    class: String,
    failure_type: String,
    feature: FeatureName,
    probe_role: String,
    direction: TrendDirection,
    weight: f64,
    slope: f64,
    cutoff: f64,
}

impl DetectorModel {
    /// Assemble and validate a model from its parts. All loading paths and
    /// the synthetic generator funnel through here.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        components: Vec<(ComponentId, String)>,
        probes: Vec<(ProbeId, String)>,
        depends: BTreeMap<ComponentId, BTreeSet<ProbeId>>,
        classes: Vec<ComponentClass>,
        behavior: Vec<BehaviorEntry>,
        priors: BTreeMap<String, f64>,
    ) -> Result<Self, ModelError> {
        let mut class_map = BTreeMap::new();
        for class in classes {
            if class.name.is_empty() {
                return Err(ModelError::EmptyIdentifier("class name".into()));
            }
            if class.failure_types.is_empty() {
                return Err(ModelError::EmptyFailureTypes(class.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for ft in &class.failure_types {
                if !seen.insert(ft.clone()) {
                    return Err(ModelError::DuplicateFailureType {
                        class: class.name.clone(),
                        failure_type: ft.clone(),
                    });
                }
            }
            class_map.insert(class.name.clone(), class);
        }

        let mut component_map = BTreeMap::new();
        for (id, class) in components {
            if id.0.is_empty() {
                return Err(ModelError::EmptyIdentifier("component id".into()));
            }
            if !class_map.contains_key(&class) {
                return Err(ModelError::UnknownClass {
                    component: id,
                    class,
                });
            }
            if component_map.insert(id.clone(), class).is_some() {
                return Err(ModelError::DuplicateComponent(id));
            }
        }

        let mut probe_map = BTreeMap::new();
        for (id, kind) in probes {
            if id.0.is_empty() {
                return Err(ModelError::EmptyIdentifier("probe id".into()));
            }
            if probe_map.insert(id.clone(), kind).is_some() {
                return Err(ModelError::DuplicateProbe(id));
            }
        }

        let mut dep_map: BTreeMap<ComponentId, BTreeSet<ProbeId>> = BTreeMap::new();
        let mut inverse: BTreeMap<ProbeId, BTreeSet<ComponentId>> = BTreeMap::new();
        for probe in probe_map.keys() {
            inverse.insert(probe.clone(), BTreeSet::new());
        }
        for (component, probe_set) in depends {
            if !component_map.contains_key(&component) {
                return Err(ModelError::DanglingComponent(component));
            }
            for probe in &probe_set {
                if !probe_map.contains_key(probe) {
                    return Err(ModelError::DanglingProbe {
                        component: component.clone(),
                        probe: probe.clone(),
                    });
                }
                inverse.get_mut(probe).unwrap().insert(component.clone());
            }
            dep_map.insert(component, probe_set);
        }
        // components absent from the depends map get an empty set
        for component in component_map.keys() {
            dep_map.entry(component.clone()).or_default();
        }

        for entry in &behavior {
            entry.trend.validate()?;
            let class = class_map
                .get(&entry.class)
                .ok_or_else(|| ModelError::BehaviorUnknownClass(entry.class.clone()))?;
            if !class.failure_types.contains(&entry.failure_type) {
                return Err(ModelError::BehaviorUnknownFailureType {
                    class: entry.class.clone(),
                    failure_type: entry.failure_type.clone(),
                });
            }
        }

        for (class, &p) in &priors {
            if !(p > 0.0 && p < 1.0) {
                return Err(ModelError::InvalidPrior {
                    class: class.clone(),
                    value: p,
                });
            }
        }

        Ok(DetectorModel {
            components: component_map,
            classes: class_map,
            probes: probe_map,
            depends: dep_map,
            inverse,
            behavior: BehavioralModel::new(behavior),
            priors,
        })
    }

    /// Parse and validate a model document.
    pub fn load(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let components = doc
            .components
            .into_iter()
            .map(|c| (ComponentId(c.id), c.class))
            .collect();
        let probes = doc
            .probes
            .into_iter()
            .map(|p| (ProbeId(p.id), p.kind))
            .collect();
        let depends = doc
            .depends
            .into_iter()
            .map(|(c, ps)| {
                (
                    ComponentId(c),
                    ps.into_iter().map(ProbeId).collect::<BTreeSet<_>>(),
                )
            })
            .collect();
        let classes = doc
            .classes
            .into_iter()
            .map(|(name, decl)| ComponentClass {
                name,
                failure_types: decl.failure_types,
            })
            .collect();
        let behavior = doc
            .behavior
            .into_iter()
            .map(|b| BehaviorEntry {
                class: b.class,
                failure_type: b.failure_type,
                feature: b.feature,
                probe_role: b.probe_role,
                trend: TrendSpec {
                    direction: b.direction,
                    weight: b.weight,
                    slope: b.slope,
                    cutoff: b.cutoff,
                },
            })
            .collect();
        Self::from_parts(components, probes, depends, classes, behavior, doc.priors)
    }

    /// Serialize to the model-document format, sorted for determinism.
    /// `load(serialize(m))` yields a model equal to `m`.
    pub fn serialize(&self) -> String {
        let doc = ModelDoc {
            components: self
                .components
                .iter()
                .map(|(id, class)| ComponentDecl {
                    id: id.0.clone(),
                    class: class.clone(),
                })
                .collect(),
            probes: self
                .probes
                .iter()
                .map(|(id, kind)| ProbeDecl {
                    id: id.0.clone(),
                    kind: kind.clone(),
                })
                .collect(),
            depends: self
                .depends
                .iter()
                .filter(|(_, ps)| !ps.is_empty())
                .map(|(c, ps)| (c.0.clone(), ps.iter().map(|p| p.0.clone()).collect()))
                .collect(),
            classes: self
                .classes
                .iter()
                .map(|(name, class)| {
                    (
                        name.clone(),
                        ClassDecl {
                            failure_types: class.failure_types.clone(),
                        },
                    )
                })
                .collect(),
            behavior: self
                .behavior
                .entries()
                .iter()
                .map(|e| BehaviorDecl {
                    class: e.class.clone(),
                    failure_type: e.failure_type.clone(),
                    feature: e.feature,
                    probe_role: e.probe_role.clone(),
                    direction: e.trend.direction,
                    weight: e.trend.weight,
                    slope: e.trend.slope,
                    cutoff: e.trend.cutoff,
                })
                .collect(),
            priors: self.priors.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    pub fn components(&self) -> impl Iterator<Item = (&ComponentId, &str)> {
        self.components.iter().map(|(id, c)| (id, c.as_str()))
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn probes(&self) -> impl Iterator<Item = (&ProbeId, &str)> {
        self.probes.iter().map(|(id, k)| (id, k.as_str()))
    }

    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }

    pub fn probe_ids(&self) -> impl Iterator<Item = &ProbeId> {
        self.probes.keys()
    }

    pub fn has_probe(&self, p: &ProbeId) -> bool {
        self.probes.contains_key(p)
    }

    pub fn probe_kind(&self, p: &ProbeId) -> Option<&str> {
        self.probes.get(p).map(|k| k.as_str())
    }

    pub fn component_class(&self, c: &ComponentId) -> Result<&ComponentClass, ModelError> {
        let class = self
            .components
            .get(c)
            .ok_or_else(|| ModelError::UnknownComponent(c.clone()))?;
        Ok(&self.classes[class])
    }

    pub fn classes(&self) -> impl Iterator<Item = &ComponentClass> {
        self.classes.values()
    }

    pub fn behavior(&self) -> &BehavioralModel {
        &self.behavior
    }

    pub fn class_prior(&self, class: &str) -> Option<f64> {
        self.priors.get(class).copied()
    }

    /// The probes structurally dependent on component `c`, sorted by id.
    pub fn dependent_probes(&self, c: &ComponentId) -> Result<&BTreeSet<ProbeId>, ModelError> {
        self.depends
            .get(c)
            .ok_or_else(|| ModelError::UnknownComponent(c.clone()))
    }

    /// The components probe `p` structurally depends on, sorted by id.
    pub fn upstream_components(&self, p: &ProbeId) -> Result<&BTreeSet<ComponentId>, ModelError> {
        self.inverse
            .get(p)
            .ok_or_else(|| ModelError::UnknownProbe(p.clone()))
    }

    /// Pure structural sanity pass: warnings for probe-less components,
    /// component-less probes, and (class, failure type) pairs with no
    /// behavioral entries.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (c, probes) in &self.depends {
            if probes.is_empty() {
                out.push(Diagnostic::warn(format!(
                    "component {c} has no dependent probes and is undiagnosable"
                )));
            }
        }
        for (p, comps) in &self.inverse {
            if comps.is_empty() {
                out.push(Diagnostic::warn(format!(
                    "probe {p} is not depended on by any component"
                )));
            }
        }
        let used_classes: BTreeSet<&String> = self.components.values().collect();
        for class in self.classes.values() {
            if !used_classes.contains(&class.name) {
                continue;
            }
            for ft in &class.failure_types {
                if self.behavior.entries_for(&class.name, ft).is_empty() {
                    out.push(Diagnostic::warn(format!(
                        "class {} has no behavioral entries for failure type {}",
                        class.name, ft
                    )));
                }
            }
        }
        out
    }
}
