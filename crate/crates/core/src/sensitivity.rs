use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::eval::{evaluate, EvalError, EvaluationResult, Variant};
use crate::ingest::MeasurementDataset;
use crate::model::QualityModel;
use crate::scalar::{cast, weight_sum_tolerance, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensitivityError {
    #[error("unknown aspect `{node}`")]
    UnknownNode { node: String },
    #[error("aspect `{node}` has no child weight for `{child}`")]
    UnknownChild { node: String, child: String },
    #[error("perturbed weight {value} for `{node}`/`{child}` is outside [0,1]")]
    WeightOutOfRange {
        node: String,
        child: String,
        value: String,
    },
    #[error("`{node}` has no siblings to absorb a weight change of `{child}`")]
    NoSiblings { node: String, child: String },
    #[error("unknown impact `{impact}`")]
    UnknownImpact { impact: String },
    #[error("impact `{impact}` has no normalization for {target}")]
    NoThreshold { impact: String, target: String },
    #[error("perturbed threshold {value} is not positive")]
    NonPositiveThreshold { value: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One-at-a-time sweep configuration. Deltas are signed: additive for
/// weights, relative for thresholds (T scales by 1+delta).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityPlan<S> {
    pub weight_deltas: Vec<S>,
    pub threshold_rel_deltas: Vec<S>,
    pub targets: TargetFilter,
}

/// `Named` entries match either a full target label ("weight:Q/QA2",
/// "threshold:I3") or just the perturbed node's id ("Q", "I3").
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TargetFilter {
    All,
    Named(Vec<String>),
}

impl Default for SensitivityPlan<f64> {
    fn default() -> Self {
        SensitivityPlan {
            weight_deltas: vec![-0.20, -0.10, -0.05, -0.01, 0.01, 0.05, 0.10, 0.20],
            threshold_rel_deltas: vec![-0.25, -0.10, -0.05, 0.05, 0.10, 0.25],
            targets: TargetFilter::All,
        }
    }
}

impl<S: Scalar> SensitivityPlan<S> {
    pub fn standard() -> Self {
        let default = SensitivityPlan::default();
        SensitivityPlan {
            weight_deltas: default.weight_deltas.iter().map(|d| cast(*d)).collect(),
            threshold_rel_deltas: default
                .threshold_rel_deltas
                .iter()
                .map(|d| cast(*d))
                .collect(),
            targets: TargetFilter::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Perturbation<S: Scalar> {
    pub target: String,
    pub delta: S,
    pub resulting_grades: BTreeMap<String, u8>,
    /// Node ids whose grade differs from the baseline; empty means the
    /// perturbation was absorbed.
    pub changed: Vec<String>,
}

/// Grid points that cannot be applied (weight would leave [0,1], threshold
/// would become non-positive) are recorded, not silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SkippedPerturbation<S: Scalar> {
    pub target: String,
    pub delta: S,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityMargin<S> {
    /// Smallest |delta| in the tested grid that changed this node's grade.
    Margin(S),
    StableAtMaxTested,
}

impl<S: Serialize> Serialize for StabilityMargin<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        match self {
            StabilityMargin::Margin(v) => v.serialize(serializer),
            StabilityMargin::StableAtMaxTested => "stable at max tested".serialize(serializer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SensitivityReport<S: Scalar> {
    pub subject: String,
    pub baseline: EvaluationResult<S>,
    pub perturbations: Vec<Perturbation<S>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedPerturbation<S>>,
    pub stability_margin: BTreeMap<String, StabilityMargin<S>>,
    /// Distance of each graded node's baseline value to the nearest
    /// grade boundary above zero: a cheap proxy for grading-key
    /// sensitivity, which the sweep does not perturb.
    pub boundary_proximity: BTreeMap<String, S>,
}

impl<S: Scalar> SensitivityReport<S> {
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }
}

/// Shifts one child weight by `delta` and rescales its siblings
/// proportionally so the vector still sums to the same total. Sibling
/// ratios survive, so the original pairwise judgments stay respected.
pub fn perturb_weight<S: Scalar>(
    model: &QualityModel<S>,
    node_id: &str,
    child_id: &str,
    delta: S,
) -> Result<QualityModel<S>, SensitivityError> {
    let mut perturbed = model.clone();
    let aspect = if perturbed.root.id == node_id {
        &mut perturbed.root
    } else {
        perturbed
            .aspects
            .iter_mut()
            .find(|a| a.id == node_id)
            .ok_or_else(|| SensitivityError::UnknownNode {
                node: node_id.to_string(),
            })?
    };
    let old =
        *aspect
            .child_weights
            .get(child_id)
            .ok_or_else(|| SensitivityError::UnknownChild {
                node: node_id.to_string(),
                child: child_id.to_string(),
            })?;
    let slack = weight_sum_tolerance::<S>();
    let new = old + delta;
    if new < -slack || new > S::one() + slack {
        return Err(SensitivityError::WeightOutOfRange {
            node: node_id.to_string(),
            child: child_id.to_string(),
            value: format!("{new}"),
        });
    }
    let new = new.min(S::one()).max(S::zero());
    let total = aspect
        .child_weights
        .values()
        .fold(S::zero(), |acc, w| acc + *w);
    let sibling_sum = total - old;
    let sibling_count = aspect.child_weights.len() - 1;
    if sibling_sum > S::zero() {
        let factor = (total - new) / sibling_sum;
        for (id, w) in aspect.child_weights.iter_mut() {
            if id != child_id {
                *w = *w * factor;
            }
        }
    } else if sibling_count == 0 {
        if delta.abs() > slack {
            return Err(SensitivityError::NoSiblings {
                node: node_id.to_string(),
                child: child_id.to_string(),
            });
        }
    } else {
        // All siblings are 0: the freed mass is spread equally.
        let share = -delta / S::from_usize(sibling_count).expect("small fan-out");
        if share < -slack {
            return Err(SensitivityError::WeightOutOfRange {
                node: node_id.to_string(),
                child: child_id.to_string(),
                value: format!("{share}"),
            });
        }
        let share = share.max(S::zero());
        for (id, w) in aspect.child_weights.iter_mut() {
            if id != child_id {
                *w = share;
            }
        }
    }
    aspect.child_weights.insert(child_id.to_string(), new);
    Ok(perturbed)
}

/// Scales one normalization threshold by (1 + rel). `measure` selects a
/// per-measure spec on an abstract-factor impact; `None` targets the
/// impact-level spec.
pub fn perturb_threshold<S: Scalar>(
    model: &QualityModel<S>,
    impact_id: &str,
    measure: Option<&str>,
    rel: S,
) -> Result<QualityModel<S>, SensitivityError> {
    let mut perturbed = model.clone();
    let impact = perturbed
        .impacts
        .iter_mut()
        .find(|i| i.id == impact_id)
        .ok_or_else(|| SensitivityError::UnknownImpact {
            impact: impact_id.to_string(),
        })?;
    let spec = match measure {
        Some(m) => impact
            .measure_normalizations
            .as_mut()
            .and_then(|specs| specs.get_mut(m))
            .ok_or_else(|| SensitivityError::NoThreshold {
                impact: impact_id.to_string(),
                target: format!("measure `{m}`"),
            })?,
        None => impact
            .normalization
            .as_mut()
            .ok_or_else(|| SensitivityError::NoThreshold {
                impact: impact_id.to_string(),
                target: "the factor value".to_string(),
            })?,
    };
    let new = spec.threshold * (S::one() + rel);
    if !new.is_finite() || new <= S::zero() {
        return Err(SensitivityError::NonPositiveThreshold {
            value: format!("{new}"),
        });
    }
    spec.threshold = new;
    Ok(perturbed)
}

enum TargetKind {
    Weight {
        node: String,
        child: String,
    },
    Threshold {
        impact: String,
        measure: Option<String>,
    },
}

struct Target {
    label: String,
    kind: TargetKind,
}

impl Target {
    fn node_part(&self) -> &str {
        match &self.kind {
            TargetKind::Weight { node, .. } => node,
            TargetKind::Threshold { impact, .. } => impact,
        }
    }

    fn apply<S: Scalar>(
        &self,
        model: &QualityModel<S>,
        delta: S,
    ) -> Result<QualityModel<S>, SensitivityError> {
        match &self.kind {
            TargetKind::Weight { node, child } => perturb_weight(model, node, child, delta),
            TargetKind::Threshold { impact, measure } => {
                perturb_threshold(model, impact, measure.as_deref(), delta)
            }
        }
    }
}

fn enumerate_targets<S: Scalar>(model: &QualityModel<S>, filter: &TargetFilter) -> Vec<Target> {
    let mut targets = Vec::new();
    for aspect in model.all_aspects() {
        for child in aspect.child_weights.keys() {
            targets.push(Target {
                label: format!("weight:{}/{}", aspect.id, child),
                kind: TargetKind::Weight {
                    node: aspect.id.clone(),
                    child: child.clone(),
                },
            });
        }
    }
    for impact in &model.impacts {
        if impact.normalization.is_some() {
            targets.push(Target {
                label: format!("threshold:{}", impact.id),
                kind: TargetKind::Threshold {
                    impact: impact.id.clone(),
                    measure: None,
                },
            });
        }
        if let Some(specs) = &impact.measure_normalizations {
            for measure in specs.keys() {
                targets.push(Target {
                    label: format!("threshold:{}/{}", impact.id, measure),
                    kind: TargetKind::Threshold {
                        impact: impact.id.clone(),
                        measure: Some(measure.clone()),
                    },
                });
            }
        }
    }
    if let TargetFilter::Named(names) = filter {
        targets.retain(|t| names.iter().any(|n| n == &t.label || n == t.node_part()));
    }
    targets.sort_by(|a, b| a.label.cmp(&b.label));
    targets
}

/// One-at-a-time sweep: perturb each target by each grid delta, re-run the
/// full evaluation, and record which grades moved. Infeasible grid points
/// are skipped with a reason; evaluation failures propagate.
pub fn sweep<S: Scalar>(
    model: &QualityModel<S>,
    data: &MeasurementDataset<S>,
    variant: Variant,
    plan: &SensitivityPlan<S>,
) -> Result<SensitivityReport<S>, SensitivityError> {
    let baseline = evaluate(model, data, variant)?;
    let mut perturbations = Vec::new();
    let mut skipped = Vec::new();
    for target in enumerate_targets(model, &plan.targets) {
        let deltas = match target.kind {
            TargetKind::Weight { .. } => &plan.weight_deltas,
            TargetKind::Threshold { .. } => &plan.threshold_rel_deltas,
        };
        for &delta in deltas {
            let perturbed = match target.apply(model, delta) {
                Ok(m) => m,
                Err(
                    err @ (SensitivityError::WeightOutOfRange { .. }
                    | SensitivityError::NoSiblings { .. }
                    | SensitivityError::NonPositiveThreshold { .. }),
                ) => {
                    skipped.push(SkippedPerturbation {
                        target: target.label.clone(),
                        delta,
                        reason: err.to_string(),
                    });
                    continue;
                }
                Err(err) => return Err(err),
            };
            let result = evaluate(&perturbed, data, variant)?;
            let changed: Vec<String> = baseline
                .grades
                .iter()
                .filter(|(node, g)| result.grades.get(*node) != Some(g))
                .map(|(node, _)| node.clone())
                .collect();
            perturbations.push(Perturbation {
                target: target.label.clone(),
                delta,
                resulting_grades: result.grades,
                changed,
            });
        }
    }
    let sort_key = |p: &Perturbation<S>| (p.target.clone(), p.delta);
    perturbations.sort_by(|a, b| {
        sort_key(a)
            .partial_cmp(&sort_key(b))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    skipped.sort_by(|a, b| {
        (a.target.clone(), a.delta)
            .partial_cmp(&(b.target.clone(), b.delta))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let stability_margin = stability_margins(&baseline, &perturbations);
    let boundary_proximity = boundary_proximities(model, &baseline);
    Ok(SensitivityReport {
        subject: baseline.subject.clone(),
        baseline,
        perturbations,
        skipped,
        stability_margin,
        boundary_proximity,
    })
}

fn stability_margins<S: Scalar>(
    baseline: &EvaluationResult<S>,
    perturbations: &[Perturbation<S>],
) -> BTreeMap<String, StabilityMargin<S>> {
    let mut margins = BTreeMap::new();
    for node in baseline.grades.keys() {
        let smallest = perturbations
            .iter()
            .filter(|p| p.changed.iter().any(|c| c == node))
            .map(|p| p.delta.abs())
            .fold(None::<S>, |best, d| match best {
                Some(b) if b <= d => Some(b),
                _ => Some(d),
            });
        margins.insert(
            node.clone(),
            match smallest {
                Some(d) => StabilityMargin::Margin(d),
                None => StabilityMargin::StableAtMaxTested,
            },
        );
    }
    margins
}

fn boundary_proximities<S: Scalar>(
    model: &QualityModel<S>,
    baseline: &EvaluationResult<S>,
) -> BTreeMap<String, S> {
    let index = model.index();
    let mut proximities = BTreeMap::new();
    for (node, value) in &baseline.node_values {
        if !baseline.grades.contains_key(node) {
            continue;
        }
        let Some(aspect) = index.aspects.get(node.as_str()) else {
            continue;
        };
        let key = model.grading_key_for(aspect);
        let nearest = key
            .boundaries
            .iter()
            .filter(|b| b.lower_bound > S::zero())
            .map(|b| (*value - b.lower_bound).abs())
            .fold(None::<S>, |best, d| match best {
                Some(b) if b <= d => Some(b),
                _ => Some(d),
            });
        if let Some(d) = nearest {
            proximities.insert(node.clone(), d);
        }
    }
    proximities
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn three_impact_model(weights: [f64; 3]) -> QualityModel<f64> {
        QualityModel {
            entities: vec![Entity {
                id: "src".into(),
                name: "source".into(),
                kind: "source code".into(),
            }],
            measures: (1..=3)
                .map(|i| Measure {
                    id: format!("m{i}"),
                    name: format!("m{i}"),
                    kind: MeasureKind::Base,
                    expression: None,
                    scale: Scale::Ratio,
                    unit: None,
                })
                .collect(),
            factors: (1..=3)
                .map(|i| Factor {
                    id: format!("f{i}"),
                    entity: "src".into(),
                    property: format!("p{i}"),
                    measures: vec![format!("m{i}")],
                    kind: FactorKind::SingleMeasure,
                })
                .collect(),
            impacts: (1..=3)
                .map(|i| Impact {
                    id: format!("i{i}"),
                    factor: format!("f{i}"),
                    aspect: "Q".into(),
                    direction: Direction::Negative,
                    justification: "j".into(),
                    measure_weights: None,
                    normalization: Some(NormalizationSpec {
                        direction: Direction::Negative,
                        threshold: 10.0,
                    }),
                    measure_normalizations: None,
                })
                .collect(),
            aspects: vec![],
            root: QualityAspect {
                id: "Q".into(),
                name: "quality".into(),
                children: vec![],
                impacts: vec!["i1".into(), "i2".into(), "i3".into()],
                child_weights: (1..=3).map(|i| (format!("i{i}"), weights[i - 1])).collect(),
                grading_key: None,
            },
            default_grading_key: GradingKey::german_school(),
            measure_grading_keys: Default::default(),
        }
    }

    fn dataset(values: [f64; 3]) -> MeasurementDataset<f64> {
        MeasurementDataset {
            subject: "s".into(),
            values: (1..=3).map(|i| (format!("m{i}"), values[i - 1])).collect(),
            provenance: Default::default(),
        }
    }

    fn weight_of(model: &QualityModel<f64>, child: &str) -> f64 {
        model.root.child_weights[child]
    }

    #[test]
    fn proportional_rescale_matches_hand_arithmetic() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let perturbed = perturb_weight(&model, "Q", "i1", 0.1).unwrap();
        assert!((weight_of(&perturbed, "i1") - 0.6).abs() < 1e-12);
        assert!((weight_of(&perturbed, "i2") - 0.24).abs() < 1e-12);
        assert!((weight_of(&perturbed, "i3") - 0.16).abs() < 1e-12);
        let sum: f64 = perturbed.root.child_weights.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_sibling_absorbs_the_whole_shift() {
        let mut model = three_impact_model([0.6, 0.4, 0.0]);
        model.root.impacts.truncate(2);
        model.root.child_weights.remove("i3");
        let perturbed = perturb_weight(&model, "Q", "i1", 0.1).unwrap();
        assert!((weight_of(&perturbed, "i1") - 0.7).abs() < 1e-12);
        assert!((weight_of(&perturbed, "i2") - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_delta_leaves_weights_bit_identical() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let perturbed = perturb_weight(&model, "Q", "i2", 0.0).unwrap();
        assert_eq!(perturbed.root.child_weights, model.root.child_weights);
    }

    #[test]
    fn weight_leaving_unit_interval_is_rejected() {
        let model = three_impact_model([0.9, 0.05, 0.05]);
        assert!(matches!(
            perturb_weight(&model, "Q", "i1", 0.2),
            Err(SensitivityError::WeightOutOfRange { .. })
        ));
        assert!(matches!(
            perturb_weight(&model, "Q", "i2", -0.1),
            Err(SensitivityError::WeightOutOfRange { .. })
        ));
    }

    #[test]
    fn all_zero_siblings_share_the_freed_mass() {
        let model = three_impact_model([1.0, 0.0, 0.0]);
        let perturbed = perturb_weight(&model, "Q", "i1", -0.3).unwrap();
        assert!((weight_of(&perturbed, "i1") - 0.7).abs() < 1e-12);
        assert!((weight_of(&perturbed, "i2") - 0.15).abs() < 1e-12);
        assert!((weight_of(&perturbed, "i3") - 0.15).abs() < 1e-12);
        assert!(matches!(
            perturb_weight(&model, "Q", "i1", 0.1),
            Err(SensitivityError::WeightOutOfRange { .. })
        ));
    }

    #[test]
    fn unknown_targets_are_reported() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        assert!(matches!(
            perturb_weight(&model, "nope", "i1", 0.0),
            Err(SensitivityError::UnknownNode { .. })
        ));
        assert!(matches!(
            perturb_weight(&model, "Q", "nope", 0.0),
            Err(SensitivityError::UnknownChild { .. })
        ));
        assert!(matches!(
            perturb_threshold(&model, "nope", None, 0.1),
            Err(SensitivityError::UnknownImpact { .. })
        ));
    }

    #[test]
    fn threshold_perturbation_is_multiplicative() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let perturbed = perturb_threshold(&model, "i1", None, -0.25).unwrap();
        let spec = perturbed.impacts[0].normalization.as_ref().unwrap();
        assert!((spec.threshold - 7.5).abs() < 1e-12);
        assert!(matches!(
            perturb_threshold(&model, "i1", None, -1.0),
            Err(SensitivityError::NonPositiveThreshold { .. })
        ));
    }

    #[test]
    fn zero_delta_sweep_reports_no_flips() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let plan = SensitivityPlan {
            weight_deltas: vec![0.0],
            threshold_rel_deltas: vec![0.0],
            targets: TargetFilter::All,
        };
        let report = sweep(&model, &dataset([5.0, 5.0, 1.0]), Variant::Direct, &plan).unwrap();
        assert!(!report.perturbations.is_empty());
        for p in &report.perturbations {
            assert!(p.changed.is_empty(), "{}", p.target);
            assert_eq!(p.resulting_grades, report.baseline.grades);
        }
        assert!(report.skipped.is_empty());
        assert_eq!(
            report.stability_margin["Q"],
            StabilityMargin::StableAtMaxTested
        );
    }

    #[test]
    fn equal_child_values_absorb_any_weight_shift() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let data = dataset([5.0, 5.0, 5.0]);
        let baseline = evaluate(&model, &data, Variant::Direct).unwrap();
        for delta in [-0.2, -0.05, 0.05, 0.2] {
            let perturbed = perturb_weight(&model, "Q", "i1", delta).unwrap();
            let result = evaluate(&perturbed, &data, Variant::Direct).unwrap();
            assert!((result.node_values["Q"] - baseline.node_values["Q"]).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_entries_match_fresh_evaluations() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let data = dataset([5.0, 2.0, 9.0]);
        let plan = SensitivityPlan::<f64>::standard();
        let report = sweep(&model, &data, Variant::Direct, &plan).unwrap();
        for p in report.perturbations.iter().step_by(7) {
            let (kind, rest) = p.target.split_once(':').unwrap();
            let perturbed = match kind {
                "weight" => {
                    let (node, child) = rest.split_once('/').unwrap();
                    perturb_weight(&model, node, child, p.delta).unwrap()
                }
                "threshold" => perturb_threshold(&model, rest, None, p.delta).unwrap(),
                other => panic!("unexpected target kind {other}"),
            };
            let fresh = evaluate(&perturbed, &data, Variant::Direct).unwrap();
            assert_eq!(fresh.grades, p.resulting_grades, "{}", p.target);
        }
    }

    #[test]
    fn margins_shrink_or_hold_under_grid_refinement() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let data = dataset([5.0, 2.0, 9.0]);
        let coarse = SensitivityPlan {
            weight_deltas: vec![-0.2, 0.2],
            threshold_rel_deltas: vec![-0.25, 0.25],
            targets: TargetFilter::All,
        };
        let fine = SensitivityPlan {
            weight_deltas: vec![-0.2, -0.1, -0.05, 0.05, 0.1, 0.2],
            threshold_rel_deltas: vec![-0.25, -0.1, 0.1, 0.25],
            targets: TargetFilter::All,
        };
        let coarse_report = sweep(&model, &data, Variant::Direct, &coarse).unwrap();
        let fine_report = sweep(&model, &data, Variant::Direct, &fine).unwrap();
        for (node, coarse_margin) in &coarse_report.stability_margin {
            if let StabilityMargin::Margin(c) = coarse_margin {
                match &fine_report.stability_margin[node] {
                    StabilityMargin::Margin(f) => assert!(f <= c),
                    StabilityMargin::StableAtMaxTested => {
                        panic!("refined grid lost a flip for {node}")
                    }
                }
            }
        }
    }

    #[test]
    fn named_filter_restricts_targets() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        let data = dataset([5.0, 2.0, 9.0]);
        let plan = SensitivityPlan {
            weight_deltas: vec![0.05],
            threshold_rel_deltas: vec![0.05],
            targets: TargetFilter::Named(vec!["i2".into(), "weight:Q/i1".into()]),
        };
        let report = sweep(&model, &data, Variant::Direct, &plan).unwrap();
        let targets: Vec<&str> = report
            .perturbations
            .iter()
            .map(|p| p.target.as_str())
            .collect();
        assert_eq!(targets, ["threshold:i2", "weight:Q/i1"]);
    }

    #[test]
    fn infeasible_grid_points_are_recorded_as_skipped() {
        let model = three_impact_model([0.95, 0.04, 0.01]);
        let data = dataset([5.0, 2.0, 9.0]);
        let plan = SensitivityPlan {
            weight_deltas: vec![-0.1, 0.1],
            threshold_rel_deltas: vec![],
            targets: TargetFilter::Named(vec!["weight:Q/i1".into(), "weight:Q/i3".into()]),
        };
        let report = sweep(&model, &data, Variant::Direct, &plan).unwrap();
        assert!(report
            .skipped
            .iter()
            .any(|s| s.target == "weight:Q/i1" && s.delta == 0.1));
        assert!(report
            .skipped
            .iter()
            .any(|s| s.target == "weight:Q/i3" && s.delta == -0.1));
        assert_eq!(report.perturbations.len(), 2);
    }

    #[test]
    fn boundary_proximity_reflects_distance_to_nearest_positive_bound() {
        let model = three_impact_model([0.5, 0.3, 0.2]);
        // Norms: 0.5, 0.8, 0.1 -> Q = 0.25 + 0.24 + 0.02 = 0.51.
        let report = sweep(
            &model,
            &dataset([5.0, 2.0, 9.0]),
            Variant::Direct,
            &SensitivityPlan {
                weight_deltas: vec![0.0],
                threshold_rel_deltas: vec![],
                targets: TargetFilter::All,
            },
        )
        .unwrap();
        // Q = 0.51: boundaries 0.50 and 0.67 bracket it; 0.50 is nearer.
        assert!((report.boundary_proximity["Q"] - 0.01).abs() < 1e-12);
    }
}
