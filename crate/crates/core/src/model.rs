use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::ExpressionAst;
use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub name: String,
    /// Free-text entity type, e.g. "source code" or "product".
    pub kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Base,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Ratio,
    Ordinal,
    Nominal,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct Measure<S: Scalar> {
    pub id: String,
    pub name: String,
    pub kind: MeasureKind,
    /// Present iff kind is derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<ExpressionAst<S>>,
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    SingleMeasure,
    DerivedMeasure,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Factor {
    pub id: String,
    pub entity: String,
    pub property: String,
    /// Ordered; single-measure and derived-measure factors list exactly one.
    pub measures: Vec<String>,
    pub kind: FactorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct NormalizationSpec<S: Scalar> {
    pub direction: Direction,
    /// Acceptance threshold T in the measure's unit; must be > 0.
    pub threshold: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct Impact<S: Scalar> {
    pub id: String,
    pub factor: String,
    pub aspect: String,
    pub direction: Direction,
    pub justification: String,
    /// Weights over the factor's measures; required iff the factor is
    /// abstract (its value is never computed, so measures aggregate here).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_weights: Option<BTreeMap<String, S>>,
    /// Normalization per factor value (measured factors).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationSpec<S>>,
    /// Normalization per measure (abstract factors).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_normalizations: Option<BTreeMap<String, NormalizationSpec<S>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct GradeBoundary<S: Scalar> {
    pub lower_bound: S,
    pub grade: u8,
}

/// Step function from [0,1] values to the 6-grade ordinal scale, grade 1
/// best. Boundaries are listed with strictly decreasing lower bounds and
/// matched inclusively (lowerBound <= value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct GradingKey<S: Scalar> {
    pub boundaries: Vec<GradeBoundary<S>>,
}

impl<S: Scalar> GradingKey<S> {
    /// Standard German school (IHK) boundaries: 1 from 0.92, 2 from 0.81,
    /// 3 from 0.67, 4 from 0.50, 5 from 0.30, 6 from 0.
    pub fn german_school() -> Self {
        let bounds = [0.92, 0.81, 0.67, 0.50, 0.30, 0.0];
        GradingKey {
            boundaries: bounds
                .iter()
                .zip(1u8..)
                .map(|(b, grade)| GradeBoundary {
                    lower_bound: cast(*b),
                    grade,
                })
                .collect(),
        }
    }

    /// Structural check shared by validation: grades 1..6 in order, bounds
    /// strictly decreasing within [0,1], grade 6 anchored at 0.
    pub fn check(&self) -> Result<(), String> {
        if self.boundaries.len() != 6 {
            return Err(format!(
                "grading key must list 6 boundaries, found {}",
                self.boundaries.len()
            ));
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            let expected = (i + 1) as u8;
            if b.grade != expected {
                return Err(format!(
                    "grades must ascend 1..6 as bounds descend; position {} has grade {}",
                    i + 1,
                    b.grade
                ));
            }
            if !(b.lower_bound >= S::zero() && b.lower_bound <= S::one()) {
                return Err(format!(
                    "lower bound {} for grade {} outside [0,1]",
                    b.lower_bound, b.grade
                ));
            }
            if i > 0 && b.lower_bound >= self.boundaries[i - 1].lower_bound {
                return Err(format!(
                    "lower bounds must strictly decrease; grade {} bound {} is not below grade {} bound {}",
                    b.grade,
                    b.lower_bound,
                    self.boundaries[i - 1].grade,
                    self.boundaries[i - 1].lower_bound
                ));
            }
        }
        if self.boundaries[5].lower_bound != S::zero() {
            return Err(format!(
                "grade 6 lower bound must be 0, found {}",
                self.boundaries[5].lower_bound
            ));
        }
        Ok(())
    }
}

impl<S: Scalar> Default for GradingKey<S> {
    fn default() -> Self {
        GradingKey::german_school()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct QualityAspect<S: Scalar> {
    pub id: String,
    pub name: String,
    /// Sub-aspect ids; the aspect hierarchy is a tree.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
    /// Impact ids attached here; impacts may attach to non-leaf aspects.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impacts: Vec<String>,
    /// Weight per entry of children ∪ impacts; each in [0,1], sum 1.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub child_weights: BTreeMap<String, S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading_key: Option<GradingKey<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "S: Scalar")]
pub struct QualityModel<S: Scalar> {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<Entity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<Measure<S>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<Factor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impacts: Vec<Impact<S>>,
    /// Non-root aspects; the root is stored separately.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aspects: Vec<QualityAspect<S>>,
    pub root: QualityAspect<S>,
    /// Serialized as `gradingKey`; applies wherever an aspect defines none.
    #[serde(rename = "gradingKey", default)]
    pub default_grading_key: GradingKey<S>,
    /// Per-measure grading keys for the grade-early variant; empty means
    /// every measure grade uses the aspect or default key.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measure_grading_keys: BTreeMap<String, GradingKey<S>>,
}

/// Which node class an id belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    Measure,
    Factor,
    Impact,
    Aspect,
}

/// Basic evaluation activities a node class supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Activity {
    Weighting,
    Aggregation,
    Evaluation,
}

/// Measures support none; factors only aggregation (derived-measure
/// computation); impacts and aspects all three.
pub fn applicable_activities(kind: NodeKind) -> &'static [Activity] {
    match kind {
        NodeKind::Measure => &[],
        NodeKind::Factor => &[Activity::Aggregation],
        NodeKind::Impact | NodeKind::Aspect => &[
            Activity::Weighting,
            Activity::Aggregation,
            Activity::Evaluation,
        ],
    }
}

/// Borrowing id lookup over one model. Duplicate ids resolve to the last
/// occurrence; validation reports duplicates separately.
pub struct ModelIndex<'a, S: Scalar> {
    pub entities: BTreeMap<&'a str, &'a Entity>,
    pub measures: BTreeMap<&'a str, &'a Measure<S>>,
    pub factors: BTreeMap<&'a str, &'a Factor>,
    pub impacts: BTreeMap<&'a str, &'a Impact<S>>,
    /// Root included.
    pub aspects: BTreeMap<&'a str, &'a QualityAspect<S>>,
}

impl<S: Scalar> QualityModel<S> {
    pub fn index(&self) -> ModelIndex<'_, S> {
        ModelIndex {
            entities: self.entities.iter().map(|e| (e.id.as_str(), e)).collect(),
            measures: self.measures.iter().map(|m| (m.id.as_str(), m)).collect(),
            factors: self.factors.iter().map(|f| (f.id.as_str(), f)).collect(),
            impacts: self.impacts.iter().map(|i| (i.id.as_str(), i)).collect(),
            aspects: self.all_aspects().map(|a| (a.id.as_str(), a)).collect(),
        }
    }

    /// Root first, then the non-root aspects in declaration order.
    pub fn all_aspects(&self) -> impl Iterator<Item = &QualityAspect<S>> {
        std::iter::once(&self.root).chain(self.aspects.iter())
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.all_aspects().any(|a| a.id == id) {
            Some(NodeKind::Aspect)
        } else if self.impacts.iter().any(|i| i.id == id) {
            Some(NodeKind::Impact)
        } else if self.factors.iter().any(|f| f.id == id) {
            Some(NodeKind::Factor)
        } else if self.measures.iter().any(|m| m.id == id) {
            Some(NodeKind::Measure)
        } else {
            None
        }
    }

    /// Grading key for an aspect: its own if set, else the model default.
    pub fn grading_key_for<'a>(&'a self, aspect: &'a QualityAspect<S>) -> &'a GradingKey<S> {
        aspect
            .grading_key
            .as_ref()
            .unwrap_or(&self.default_grading_key)
    }
}
