use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expr::{eval_expression, print_expression, ExprEvalError};
use crate::ingest::MeasurementDataset;
use crate::model::{
    Direction, Factor, FactorKind, GradingKey, Impact, ModelIndex, NormalizationSpec, QualityModel,
};
use crate::scalar::{cast, weight_sum_tolerance, Scalar};

/// How measured values turn into grades.
///
/// direct: normalize at impacts, weighted sums up the tree, grades at
/// aspects and root. grade-early: grade each measure immediately, then
/// average integer grades (unweighted, rounded half-up) level by level.
/// fulfillment: each impact attains up to 1; aspects report attained/maximum
/// accumulated over their whole subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Direct,
    GradeEarly,
    Fulfillment,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Direct => "direct",
            Variant::GradeEarly => "grade-early",
            Variant::Fulfillment => "fulfillment",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Variant::Direct),
            "grade-early" => Ok(Variant::GradeEarly),
            "fulfillment" => Ok(Variant::Fulfillment),
            other => Err(format!(
                "unknown variant `{other}`; expected direct, grade-early, or fulfillment"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Expression(#[from] ExprEvalError),
    #[error("cannot normalize negative value {value}")]
    NegativeValue { value: String },
    #[error("value {value} outside [0,1]")]
    ValueOutOfRange { value: String },
    #[error("normalization threshold must be positive, found {threshold}")]
    NonPositiveThreshold { threshold: String },
    #[error("impact `{impact}`: no normalization spec for {target}")]
    MissingNormalization { impact: String, target: String },
    #[error("impact `{impact}`: measureWeights required because factor `{factor}` is abstract")]
    MissingMeasureWeights { impact: String, factor: String },
    #[error("impact `{impact}`: no weight for measure `{measure}`")]
    MissingWeight { impact: String, measure: String },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: String },
    #[error("aggregation arity mismatch: {weights} weights, {values} values")]
    LengthMismatch { weights: usize, values: usize },
    #[error("derived measure `{id}` has no expression")]
    MissingExpression { id: String },
    #[error("unknown id `{id}` referenced during evaluation")]
    UnknownId { id: String },
    #[error("`{node}` has nothing to aggregate")]
    EmptyNode { node: String },
    #[error("cycle through `{id}` during evaluation")]
    Cycle { id: String },
}

/// One evaluated intermediate. Composite nodes like `I1:M1` are the
/// per-measure grading steps of the grade-early variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRecord<S: Scalar> {
    pub node: String,
    pub kind: &'static str,
    pub formula: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, S>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<S>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grade: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationResult<S: Scalar> {
    pub subject: String,
    pub variant: Variant,
    /// Computed value per node: raw values for measured factors,
    /// normalized/aggregated values in [0,1] for impacts and aspects.
    pub node_values: BTreeMap<String, S>,
    /// Raw pre-normalization factor values; abstract factors are absent.
    pub factor_values: BTreeMap<String, S>,
    pub grades: BTreeMap<String, u8>,
    pub trace: Vec<TraceRecord<S>>,
}

impl<S: Scalar> EvaluationResult<S> {
    /// Pretty JSON, sorted keys, trailing newline; byte-identical for
    /// identical inputs.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("result serialization cannot fail");
        text.push('\n');
        text
    }
}

/// Linear threshold normalization: positive direction rewards growth up
/// to T (min(1, x/T)), negative direction penalizes growth up to T
/// (max(0, 1 - x/T)). Defined for x >= 0 only.
pub fn normalize<S: Scalar>(x: S, spec: &NormalizationSpec<S>) -> Result<S, EvalError> {
    if x.is_nan() || x < S::zero() {
        return Err(EvalError::NegativeValue {
            value: format!("{x}"),
        });
    }
    if !spec.threshold.is_finite() || spec.threshold <= S::zero() {
        return Err(EvalError::NonPositiveThreshold {
            threshold: format!("{}", spec.threshold),
        });
    }
    let ratio = x / spec.threshold;
    Ok(match spec.direction {
        Direction::Positive => ratio.min(S::one()),
        Direction::Negative => (S::one() - ratio).max(S::zero()),
    })
}

/// The additive value function: sum of w_j * g_j. Weights must sum to 1;
/// inputs are expected in [0,1], and the result is clamped there to shed
/// rounding dust.
pub fn aggregate<S: Scalar>(weights: &[S], values: &[S]) -> Result<S, EvalError> {
    if weights.len() != values.len() {
        return Err(EvalError::LengthMismatch {
            weights: weights.len(),
            values: values.len(),
        });
    }
    let sum = weights.iter().fold(S::zero(), |acc, w| acc + *w);
    if (sum - S::one()).abs() > weight_sum_tolerance::<S>() {
        return Err(EvalError::WeightSum {
            sum: format!("{sum}"),
        });
    }
    let total = weights
        .iter()
        .zip(values)
        .fold(S::zero(), |acc, (w, v)| acc + *w * *v);
    Ok(total.min(S::one()).max(S::zero()))
}

/// Maps a [0,1] value to a grade: the first boundary (descending bounds)
/// whose lowerBound <= value wins, so exact boundary values take the
/// better grade.
pub fn grade<S: Scalar>(value: S, key: &GradingKey<S>) -> Result<u8, EvalError> {
    if !(value >= S::zero() && value <= S::one()) {
        return Err(EvalError::ValueOutOfRange {
            value: format!("{value}"),
        });
    }
    for boundary in &key.boundaries {
        if value >= boundary.lower_bound {
            return Ok(boundary.grade);
        }
    }
    Err(EvalError::ValueOutOfRange {
        value: format!("{value}"),
    })
}

/// Arithmetic mean of integer grades, rounded half-up toward the worse
/// grade: 3.5 -> 4.
pub(crate) fn round_half_up_mean(grades: &[u8]) -> Option<u8> {
    if grades.is_empty() {
        return None;
    }
    let sum: u32 = grades.iter().map(|g| *g as u32).sum();
    let mean = sum as f64 / grades.len() as f64;
    Some((mean + 0.5).floor() as u8)
}

/// Raw factor value: the measure's value for single-measure and
/// derived-measure factors, absent for abstract factors (their measures
/// aggregate at the impact instead).
pub fn measure_factor<S: Scalar>(
    model: &QualityModel<S>,
    factor: &Factor,
    data: &MeasurementDataset<S>,
) -> Result<Option<S>, EvalError> {
    let mut engine = Engine::new(model, data);
    let resolved = engine
        .index
        .factors
        .get(factor.id.as_str())
        .copied()
        .ok_or_else(|| EvalError::UnknownId {
            id: factor.id.clone(),
        })?;
    engine.factor_raw(resolved)
}

/// Impact value in [0,1]: normalize the factor value when there is one,
/// otherwise the weighted sum of the normalized measure values.
pub fn evaluate_impact<S: Scalar>(
    model: &QualityModel<S>,
    impact: &Impact<S>,
    factor_value: Option<S>,
    data: &MeasurementDataset<S>,
) -> Result<S, EvalError> {
    match factor_value {
        Some(value) => {
            let spec =
                impact
                    .normalization
                    .as_ref()
                    .ok_or_else(|| EvalError::MissingNormalization {
                        impact: impact.id.clone(),
                        target: format!("factor `{}`", impact.factor),
                    })?;
            normalize(value, spec)
        }
        None => {
            let mut engine = Engine::new(model, data);
            let factor = engine
                .index
                .factors
                .get(impact.factor.as_str())
                .copied()
                .ok_or_else(|| EvalError::UnknownId {
                    id: impact.factor.clone(),
                })?;
            engine.impact_over_measures(impact, factor).map(|r| r.value)
        }
    }
}

/// Runs the selected variant over the whole model. Assumes a valid model
/// and complete data (the CLI enforces both); structural defects surface
/// as errors, never wrong numbers.
pub fn evaluate<S: Scalar>(
    model: &QualityModel<S>,
    data: &MeasurementDataset<S>,
    variant: Variant,
) -> Result<EvaluationResult<S>, EvalError> {
    let mut engine = Engine::new(model, data);
    let root = model.root.id.clone();
    match variant {
        Variant::Direct => {
            engine.aspect_direct(&root)?;
        }
        Variant::GradeEarly => {
            engine.aspect_grade_early(&root)?;
        }
        Variant::Fulfillment => {
            engine.aspect_fulfillment(&root)?;
        }
    }
    engine
        .trace
        .sort_by(|a, b| (a.node.as_str(), a.kind).cmp(&(b.node.as_str(), b.kind)));
    Ok(EvaluationResult {
        subject: data.subject.clone(),
        variant,
        node_values: engine.node_values,
        factor_values: engine.factor_values,
        grades: engine.grades,
        trace: engine.trace,
    })
}

struct MeasureAggregation<S> {
    value: S,
    inputs: BTreeMap<String, S>,
    weights: BTreeMap<String, S>,
}

struct Engine<'m, S: Scalar> {
    model: &'m QualityModel<S>,
    index: ModelIndex<'m, S>,
    env: MeasurementDataset<S>,
    computing: BTreeSet<String>,
    visiting_aspects: BTreeSet<String>,
    node_values: BTreeMap<String, S>,
    factor_values: BTreeMap<String, S>,
    grades: BTreeMap<String, u8>,
    trace: Vec<TraceRecord<S>>,
    traced_factors: BTreeSet<String>,
}

impl<'m, S: Scalar> Engine<'m, S> {
    fn new(model: &'m QualityModel<S>, data: &MeasurementDataset<S>) -> Self {
        Engine {
            model,
            index: model.index(),
            env: data.clone(),
            computing: BTreeSet::new(),
            visiting_aspects: BTreeSet::new(),
            node_values: BTreeMap::new(),
            factor_values: BTreeMap::new(),
            grades: BTreeMap::new(),
            trace: Vec::new(),
            traced_factors: BTreeSet::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        node: &str,
        kind: &'static str,
        formula: String,
        inputs: BTreeMap<String, S>,
        weights: BTreeMap<String, S>,
        value: Option<S>,
        grade: Option<u8>,
    ) {
        self.trace.push(TraceRecord {
            node: node.to_string(),
            kind,
            formula,
            inputs,
            weights,
            value,
            grade,
        });
    }

    /// Base measures read the dataset; derived measures are computed on
    /// demand (memoized into the environment) with a cycle guard.
    fn measure_value(&mut self, id: &str) -> Result<S, EvalError> {
        if let Some(v) = self.env.values.get(id) {
            return Ok(*v);
        }
        let measure = self
            .index
            .measures
            .get(id)
            .copied()
            .ok_or_else(|| EvalError::UnknownId { id: id.to_string() })?;
        match measure.kind {
            crate::model::MeasureKind::Base => {
                Err(ExprEvalError::MissingMeasure { id: id.to_string() }.into())
            }
            crate::model::MeasureKind::Derived => {
                let expr = measure
                    .expression
                    .as_ref()
                    .ok_or_else(|| EvalError::MissingExpression { id: id.to_string() })?;
                if !self.computing.insert(id.to_string()) {
                    return Err(EvalError::Cycle { id: id.to_string() });
                }
                let mut inputs = BTreeMap::new();
                for referenced in expr.measure_refs() {
                    let v = self.measure_value(referenced)?;
                    inputs.insert(referenced.to_string(), v);
                }
                let value = eval_expression(expr, &self.env)?;
                self.computing.remove(id);
                self.env.values.insert(id.to_string(), value);
                self.record(
                    id,
                    "measure",
                    print_expression(expr),
                    inputs,
                    BTreeMap::new(),
                    Some(value),
                    None,
                );
                Ok(value)
            }
        }
    }

    fn factor_raw(&mut self, factor: &'m Factor) -> Result<Option<S>, EvalError> {
        if factor.kind == FactorKind::Abstract {
            return Ok(None);
        }
        let measure_id = factor
            .measures
            .first()
            .ok_or_else(|| EvalError::EmptyNode {
                node: factor.id.clone(),
            })?;
        let value = self.measure_value(measure_id)?;
        if self.traced_factors.insert(factor.id.clone()) {
            self.node_values.insert(factor.id.clone(), value);
            self.factor_values.insert(factor.id.clone(), value);
            self.record(
                &factor.id,
                "factor",
                format!("value of measure `{measure_id}`"),
                [(measure_id.clone(), value)].into_iter().collect(),
                BTreeMap::new(),
                Some(value),
                None,
            );
        }
        Ok(Some(value))
    }

    fn spec_for_measure(
        impact: &'m Impact<S>,
        measure_id: &str,
    ) -> Result<&'m NormalizationSpec<S>, EvalError> {
        impact
            .measure_normalizations
            .as_ref()
            .and_then(|specs| specs.get(measure_id))
            .ok_or_else(|| EvalError::MissingNormalization {
                impact: impact.id.clone(),
                target: format!("measure `{measure_id}`"),
            })
    }

    /// Weighted measure aggregation for impacts on abstract factors.
    fn impact_over_measures(
        &mut self,
        impact: &'m Impact<S>,
        factor: &'m Factor,
    ) -> Result<MeasureAggregation<S>, EvalError> {
        let weight_map =
            impact
                .measure_weights
                .as_ref()
                .ok_or_else(|| EvalError::MissingMeasureWeights {
                    impact: impact.id.clone(),
                    factor: factor.id.clone(),
                })?;
        let mut weights = Vec::new();
        let mut normalized = Vec::new();
        let mut inputs = BTreeMap::new();
        for measure_id in &factor.measures {
            let w =
                weight_map
                    .get(measure_id)
                    .copied()
                    .ok_or_else(|| EvalError::MissingWeight {
                        impact: impact.id.clone(),
                        measure: measure_id.clone(),
                    })?;
            let raw = self.measure_value(measure_id)?;
            let spec = Self::spec_for_measure(impact, measure_id)?;
            weights.push(w);
            normalized.push(normalize(raw, spec)?);
            inputs.insert(measure_id.clone(), raw);
        }
        let value = aggregate(&weights, &normalized)?;
        Ok(MeasureAggregation {
            value,
            inputs,
            weights: weight_map.clone(),
        })
    }

    fn impact_direct(&mut self, impact: &'m Impact<S>) -> Result<S, EvalError> {
        if let Some(v) = self.node_values.get(impact.id.as_str()) {
            return Ok(*v);
        }
        let factor = self
            .index
            .factors
            .get(impact.factor.as_str())
            .copied()
            .ok_or_else(|| EvalError::UnknownId {
                id: impact.factor.clone(),
            })?;
        let (value, formula, inputs, weights) = match self.factor_raw(factor)? {
            Some(raw) => {
                let spec = impact.normalization.as_ref().ok_or_else(|| {
                    EvalError::MissingNormalization {
                        impact: impact.id.clone(),
                        target: format!("factor `{}`", factor.id),
                    }
                })?;
                let value = normalize(raw, spec)?;
                (
                    value,
                    format!(
                        "normalize({}, {}, T={})",
                        factor.id,
                        direction_name(spec.direction),
                        spec.threshold
                    ),
                    [(factor.id.clone(), raw)].into_iter().collect(),
                    BTreeMap::new(),
                )
            }
            None => {
                let agg = self.impact_over_measures(impact, factor)?;
                (
                    agg.value,
                    "sum of weight * normalize(measure) over the factor's measures".to_string(),
                    agg.inputs,
                    agg.weights,
                )
            }
        };
        self.node_values.insert(impact.id.clone(), value);
        self.record(
            &impact.id,
            "impact",
            formula,
            inputs,
            weights,
            Some(value),
            None,
        );
        Ok(value)
    }

    fn enter_aspect(&mut self, id: &str) -> Result<&'m crate::model::QualityAspect<S>, EvalError> {
        if !self.visiting_aspects.insert(id.to_string()) {
            return Err(EvalError::Cycle { id: id.to_string() });
        }
        self.index
            .aspects
            .get(id)
            .copied()
            .ok_or_else(|| EvalError::UnknownId { id: id.to_string() })
    }

    fn leave_aspect(&mut self, id: &str) {
        self.visiting_aspects.remove(id);
    }

    fn aspect_direct(&mut self, id: &str) -> Result<S, EvalError> {
        let aspect = self.enter_aspect(id)?;
        let mut weights = Vec::new();
        let mut values = Vec::new();
        let mut inputs = BTreeMap::new();
        for (child, w) in &aspect.child_weights {
            let value = if self.index.aspects.contains_key(child.as_str()) {
                self.aspect_direct(child)?
            } else if let Some(impact) = self.index.impacts.get(child.as_str()).copied() {
                self.impact_direct(impact)?
            } else {
                self.leave_aspect(id);
                return Err(EvalError::UnknownId { id: child.clone() });
            };
            weights.push(*w);
            values.push(value);
            inputs.insert(child.clone(), value);
        }
        self.leave_aspect(id);
        if values.is_empty() {
            return Err(EvalError::EmptyNode {
                node: id.to_string(),
            });
        }
        let value = aggregate(&weights, &values)?;
        let g = grade(value, self.model.grading_key_for(aspect))?;
        self.node_values.insert(aspect.id.clone(), value);
        self.grades.insert(aspect.id.clone(), g);
        self.record(
            &aspect.id,
            "aspect",
            "sum of weight * value over sub-aspects and impacts".to_string(),
            inputs,
            aspect.child_weights.clone(),
            Some(value),
            Some(g),
        );
        Ok(value)
    }

    /// Grading key for a measure grade: the measure's own key if the model
    /// configures one, else the key of the aspect the impact feeds.
    fn grade_key_for_measure(&self, measure_id: &str, impact: &Impact<S>) -> &'m GradingKey<S> {
        if let Some(key) = self.model.measure_grading_keys.get(measure_id) {
            return key;
        }
        match self.index.aspects.get(impact.aspect.as_str()) {
            Some(aspect) => self.model.grading_key_for(aspect),
            None => &self.model.default_grading_key,
        }
    }

    fn impact_grade_early(&mut self, impact: &'m Impact<S>) -> Result<u8, EvalError> {
        if let Some(g) = self.grades.get(impact.id.as_str()) {
            return Ok(*g);
        }
        let factor = self
            .index
            .factors
            .get(impact.factor.as_str())
            .copied()
            .ok_or_else(|| EvalError::UnknownId {
                id: impact.factor.clone(),
            })?;
        let g = match self.factor_raw(factor)? {
            Some(raw) => {
                let spec = impact.normalization.as_ref().ok_or_else(|| {
                    EvalError::MissingNormalization {
                        impact: impact.id.clone(),
                        target: format!("factor `{}`", factor.id),
                    }
                })?;
                let normalized = normalize(raw, spec)?;
                let key = self.grade_key_for_measure(&factor.measures[0], impact);
                let g = grade(normalized, key)?;
                self.record(
                    &impact.id,
                    "impact",
                    format!(
                        "grade(normalize({}, {}, T={}))",
                        factor.id,
                        direction_name(spec.direction),
                        spec.threshold
                    ),
                    [(factor.id.clone(), raw)].into_iter().collect(),
                    BTreeMap::new(),
                    Some(normalized),
                    Some(g),
                );
                g
            }
            None => {
                let mut measure_grades = Vec::new();
                let mut inputs = BTreeMap::new();
                for measure_id in &factor.measures {
                    let raw = self.measure_value(measure_id)?;
                    let spec = Self::spec_for_measure(impact, measure_id)?;
                    let normalized = normalize(raw, spec)?;
                    let key = self.grade_key_for_measure(measure_id, impact);
                    let g = grade(normalized, key)?;
                    let step_inputs = [
                        ("raw".to_string(), raw),
                        ("normalized".to_string(), normalized),
                    ]
                    .into_iter()
                    .collect();
                    self.record(
                        &format!("{}:{}", impact.id, measure_id),
                        "measure-grade",
                        format!(
                            "grade(normalize({measure_id}, {}, T={}))",
                            direction_name(spec.direction),
                            spec.threshold
                        ),
                        step_inputs,
                        BTreeMap::new(),
                        Some(normalized),
                        Some(g),
                    );
                    measure_grades.push(g);
                    inputs.insert(measure_id.clone(), grade_as_scalar(g));
                }
                let g =
                    round_half_up_mean(&measure_grades).ok_or_else(|| EvalError::EmptyNode {
                        node: impact.id.clone(),
                    })?;
                self.record(
                    &impact.id,
                    "impact",
                    "round half-up of the mean measure grade".to_string(),
                    inputs,
                    BTreeMap::new(),
                    None,
                    Some(g),
                );
                g
            }
        };
        self.grades.insert(impact.id.clone(), g);
        Ok(g)
    }

    fn aspect_grade_early(&mut self, id: &str) -> Result<u8, EvalError> {
        let aspect = self.enter_aspect(id)?;
        let mut child_grades = Vec::new();
        let mut inputs = BTreeMap::new();
        for child in &aspect.children {
            let g = self.aspect_grade_early(child)?;
            child_grades.push(g);
            inputs.insert(child.clone(), grade_as_scalar(g));
        }
        for impact_id in &aspect.impacts {
            let impact = self
                .index
                .impacts
                .get(impact_id.as_str())
                .copied()
                .ok_or_else(|| EvalError::UnknownId {
                    id: impact_id.clone(),
                })?;
            let g = self.impact_grade_early(impact)?;
            child_grades.push(g);
            inputs.insert(impact_id.clone(), grade_as_scalar(g));
        }
        self.leave_aspect(id);
        let g = round_half_up_mean(&child_grades).ok_or_else(|| EvalError::EmptyNode {
            node: id.to_string(),
        })?;
        self.grades.insert(aspect.id.clone(), g);
        self.record(
            &aspect.id,
            "aspect",
            "round half-up of the mean grade over sub-aspects and impacts".to_string(),
            inputs,
            BTreeMap::new(),
            None,
            Some(g),
        );
        Ok(g)
    }

    fn impact_fulfillment(&mut self, impact: &'m Impact<S>) -> Result<S, EvalError> {
        if let Some(v) = self.node_values.get(impact.id.as_str()) {
            return Ok(*v);
        }
        let factor = self
            .index
            .factors
            .get(impact.factor.as_str())
            .copied()
            .ok_or_else(|| EvalError::UnknownId {
                id: impact.factor.clone(),
            })?;
        let (attained, formula, inputs) = match self.factor_raw(factor)? {
            Some(raw) => {
                let spec = impact.normalization.as_ref().ok_or_else(|| {
                    EvalError::MissingNormalization {
                        impact: impact.id.clone(),
                        target: format!("factor `{}`", factor.id),
                    }
                })?;
                (
                    normalize(raw, spec)?,
                    format!(
                        "attained = normalize({}, {}, T={}), maximum 1",
                        factor.id,
                        direction_name(spec.direction),
                        spec.threshold
                    ),
                    [(factor.id.clone(), raw)].into_iter().collect(),
                )
            }
            None => {
                let k = factor.measures.len();
                if k == 0 {
                    return Err(EvalError::EmptyNode {
                        node: factor.id.clone(),
                    });
                }
                let share = S::one() / S::from_usize(k).expect("small fan-out");
                let mut attained = S::zero();
                let mut inputs = BTreeMap::new();
                for measure_id in &factor.measures {
                    let raw = self.measure_value(measure_id)?;
                    let spec = Self::spec_for_measure(impact, measure_id)?;
                    attained = attained + share * normalize(raw, spec)?;
                    inputs.insert(measure_id.clone(), raw);
                }
                (
                    attained.min(S::one()).max(S::zero()),
                    format!("attained = sum of (1/{k}) * normalize(measure), maximum 1"),
                    inputs,
                )
            }
        };
        self.node_values.insert(impact.id.clone(), attained);
        self.record(
            &impact.id,
            "impact",
            formula,
            inputs,
            BTreeMap::new(),
            Some(attained),
            None,
        );
        Ok(attained)
    }

    /// Returns (attained, maximum) accumulated over the aspect's subtree:
    /// every impact contributes its attained value out of a maximum of 1,
    /// sub-aspects contribute their accumulated pairs.
    fn aspect_fulfillment(&mut self, id: &str) -> Result<(S, S), EvalError> {
        let aspect = self.enter_aspect(id)?;
        let mut attained = S::zero();
        let mut maximum = S::zero();
        let mut inputs = BTreeMap::new();
        for child in &aspect.children {
            let (a, m) = self.aspect_fulfillment(child)?;
            attained = attained + a;
            maximum = maximum + m;
            inputs.insert(child.clone(), a);
        }
        for impact_id in &aspect.impacts {
            let impact = self
                .index
                .impacts
                .get(impact_id.as_str())
                .copied()
                .ok_or_else(|| EvalError::UnknownId {
                    id: impact_id.clone(),
                })?;
            let a = self.impact_fulfillment(impact)?;
            attained = attained + a;
            maximum = maximum + S::one();
            inputs.insert(impact_id.clone(), a);
        }
        self.leave_aspect(id);
        if maximum <= S::zero() {
            return Err(EvalError::EmptyNode {
                node: id.to_string(),
            });
        }
        let ratio = (attained / maximum).min(S::one()).max(S::zero());
        let g = grade(ratio, self.model.grading_key_for(aspect))?;
        inputs.insert("attained".to_string(), attained);
        inputs.insert("maximum".to_string(), maximum);
        self.node_values.insert(aspect.id.clone(), ratio);
        self.grades.insert(aspect.id.clone(), g);
        self.record(
            &aspect.id,
            "aspect",
            "fulfillment = attained / maximum over the subtree".to_string(),
            inputs,
            BTreeMap::new(),
            Some(ratio),
            Some(g),
        );
        Ok((attained, maximum))
    }
}

fn direction_name(direction: Direction) -> &'static str {
    match direction {
        Direction::Positive => "positive",
        Direction::Negative => "negative",
    }
}

fn grade_as_scalar<S: Scalar>(g: u8) -> S {
    cast(g as f64)
}
