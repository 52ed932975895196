//! Deterministic generators for tests and benchmarks. Everything here is
//! seeded: the same seed always yields the same model, dataset, or matrix.
//! Generated models are valid by construction and generated datasets are
//! complete for their model, so property tests can distinguish "generator
//! broke" from "checker broke".

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{BinaryOp, ExpressionAst};
use crate::ingest::MeasurementDataset;
use crate::model::{
    Direction, Entity, Factor, FactorKind, GradingKey, Impact, Measure, MeasureKind,
    NormalizationSpec, QualityAspect, QualityModel, Scale,
};
use crate::weights::ComparisonMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The worked example shipped under fixtures/: two quality aspects over
/// three factors (one abstract over two warning counts, two derived-measure
/// factors for comment ratio and defect density), with the thresholds and
/// weights that make the hand-computed values round.
pub fn example_model() -> QualityModel<f64> {
    let negative = |threshold: f64| NormalizationSpec {
        direction: Direction::Negative,
        threshold,
    };
    let warning_weights = [("M1".to_string(), 0.5), ("M2".to_string(), 0.5)]
        .into_iter()
        .collect();
    let warning_norms: std::collections::BTreeMap<String, NormalizationSpec<f64>> = [
        ("M1".to_string(), negative(10.0)),
        ("M2".to_string(), negative(100.0)),
    ]
    .into_iter()
    .collect();
    QualityModel {
        entities: vec![Entity {
            id: "source-code".into(),
            name: "Source code".into(),
            kind: "product part".into(),
        }],
        measures: vec![
            base_measure("M1", "Critical static-analysis warnings", Some("findings")),
            base_measure("M2", "Minor static-analysis warnings", Some("findings")),
            base_measure("M3", "Comment lines", Some("lines")),
            base_measure("M4", "Lines of code", Some("lines")),
            base_measure("M5", "Known defects", Some("defects")),
            derived_measure("D1", "Comment ratio", "M3 / M4"),
            derived_measure("D2", "Defect density", "M5 / M4"),
        ],
        factors: vec![
            Factor {
                id: "F1".into(),
                entity: "source-code".into(),
                property: "rule compliance".into(),
                measures: vec!["M1".into(), "M2".into()],
                kind: FactorKind::Abstract,
            },
            Factor {
                id: "F2".into(),
                entity: "source-code".into(),
                property: "documentation degree".into(),
                measures: vec!["D1".into()],
                kind: FactorKind::DerivedMeasure,
            },
            Factor {
                id: "F3".into(),
                entity: "source-code".into(),
                property: "defect density".into(),
                measures: vec!["D2".into()],
                kind: FactorKind::DerivedMeasure,
            },
        ],
        impacts: vec![
            Impact {
                id: "I1.1".into(),
                factor: "F1".into(),
                aspect: "QA1".into(),
                direction: Direction::Negative,
                justification: "Rule violations make code harder to analyze and change".into(),
                measure_weights: Some(warning_weights),
                normalization: None,
                measure_normalizations: Some(warning_norms.clone()),
            },
            Impact {
                id: "I1.2".into(),
                factor: "F1".into(),
                aspect: "QA2".into(),
                direction: Direction::Negative,
                justification: "Rule violations correlate with latent faults".into(),
                measure_weights: Some(
                    [("M1".to_string(), 0.5), ("M2".to_string(), 0.5)]
                        .into_iter()
                        .collect(),
                ),
                normalization: None,
                measure_normalizations: Some(warning_norms),
            },
            Impact {
                id: "I2".into(),
                factor: "F2".into(),
                aspect: "QA1".into(),
                direction: Direction::Positive,
                justification: "Commented code is easier to understand".into(),
                normalization: Some(NormalizationSpec {
                    direction: Direction::Positive,
                    threshold: 1.0,
                }),
                measure_weights: None,
                measure_normalizations: None,
            },
            Impact {
                id: "I3".into(),
                factor: "F3".into(),
                aspect: "QA2".into(),
                direction: Direction::Negative,
                justification: "Each defect per line of code erodes trust in releases; \
                                0.1 defects per line (100 per thousand lines) counts as \
                                total loss"
                    .into(),
                normalization: Some(negative(0.1)),
                measure_weights: None,
                measure_normalizations: None,
            },
        ],
        aspects: vec![
            QualityAspect {
                id: "QA1".into(),
                name: "Maintainability".into(),
                children: vec![],
                impacts: vec!["I1.1".into(), "I2".into()],
                child_weights: [("I1.1".to_string(), 0.5), ("I2".to_string(), 0.5)]
                    .into_iter()
                    .collect(),
                grading_key: None,
            },
            QualityAspect {
                id: "QA2".into(),
                name: "Reliability".into(),
                children: vec![],
                impacts: vec!["I1.2".into(), "I3".into()],
                child_weights: [("I1.2".to_string(), 0.5), ("I3".to_string(), 0.5)]
                    .into_iter()
                    .collect(),
                grading_key: None,
            },
        ],
        root: QualityAspect {
            id: "Q".into(),
            name: "Product quality".into(),
            children: vec!["QA1".into(), "QA2".into()],
            impacts: vec![],
            child_weights: [("QA1".to_string(), 0.6), ("QA2".to_string(), 0.4)]
                .into_iter()
                .collect(),
            grading_key: None,
        },
        default_grading_key: GradingKey::german_school(),
        measure_grading_keys: Default::default(),
    }
}

/// Measurements for the worked example: normalizes to 0.5 almost
/// everywhere, which makes every aggregation step checkable by eye.
pub fn example_dataset() -> MeasurementDataset<f64> {
    MeasurementDataset {
        subject: "demo-product".into(),
        values: [
            ("M1", 5.0),
            ("M2", 50.0),
            ("M3", 500.0),
            ("M4", 1000.0),
            ("M5", 10.0),
        ]
        .into_iter()
        .map(|(id, v)| (id.to_string(), v))
        .collect(),
        provenance: Default::default(),
    }
}

fn base_measure(id: &str, name: &str, unit: Option<&str>) -> Measure<f64> {
    Measure {
        id: id.into(),
        name: name.into(),
        kind: MeasureKind::Base,
        expression: None,
        scale: Scale::Ratio,
        unit: unit.map(str::to_string),
    }
}

fn derived_measure(id: &str, name: &str, expression: &str) -> Measure<f64> {
    Measure {
        id: id.into(),
        name: name.into(),
        kind: MeasureKind::Derived,
        expression: Some(crate::expr::parse_expression(expression).expect("fixture expression")),
        scale: Scale::Ratio,
        unit: None,
    }
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn pick_ref(rng: &mut impl Rng, ids: &[String]) -> ExpressionAst<f64> {
    ExpressionAst::MeasureRef(ids[rng.gen_range(0..ids.len())].clone())
}

fn random_expression(rng: &mut impl Rng, base_ids: &[String]) -> ExpressionAst<f64> {
    let left = pick_ref(rng, base_ids);
    let op = match rng.gen_range(0..3) {
        0 => BinaryOp::Add,
        1 => BinaryOp::Mul,
        _ => BinaryOp::Div,
    };
    // Division by a measure is safe: random_dataset keeps values >= 0.1.
    let right = if op == BinaryOp::Div && rng.gen_bool(0.5) {
        ExpressionAst::Literal(rng.gen_range(0.5..10.0))
    } else {
        pick_ref(rng, base_ids)
    };
    ExpressionAst::BinaryOp {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// A random model that passes validation: unique ids, resolvable
/// references, weights summing to 1, positive thresholds, every aspect
/// non-empty, every impact attached exactly once.
pub fn random_model(rng: &mut impl Rng) -> QualityModel<f64> {
    let n_base = rng.gen_range(2..=5usize);
    let n_derived = rng.gen_range(0..=2usize);
    let base_ids: Vec<String> = (1..=n_base).map(|i| format!("M{i}")).collect();

    let mut measures: Vec<Measure<f64>> = base_ids
        .iter()
        .map(|id| base_measure(id, id, None))
        .collect();
    for d in 1..=n_derived {
        measures.push(Measure {
            id: format!("D{d}"),
            name: format!("D{d}"),
            kind: MeasureKind::Derived,
            expression: Some(random_expression(rng, &base_ids)),
            scale: Scale::Ratio,
            unit: None,
        });
    }

    let mut factors = Vec::new();
    let mut impacts: Vec<Impact<f64>> = Vec::new();
    let n_factors = rng.gen_range(1..=3usize);
    for f in 1..=n_factors {
        let factor_id = format!("F{f}");
        let kind = match rng.gen_range(0..3) {
            0 if n_derived > 0 => FactorKind::DerivedMeasure,
            1 => FactorKind::Abstract,
            _ => FactorKind::SingleMeasure,
        };
        let factor_measures: Vec<String> = match kind {
            FactorKind::SingleMeasure => {
                vec![base_ids[rng.gen_range(0..base_ids.len())].clone()]
            }
            FactorKind::DerivedMeasure => vec![format!("D{}", rng.gen_range(1..=n_derived))],
            FactorKind::Abstract => {
                let k = rng.gen_range(2..=n_base);
                let mut picked = base_ids.clone();
                while picked.len() > k {
                    picked.remove(rng.gen_range(0..picked.len()));
                }
                picked
            }
        };
        let direction = if rng.gen_bool(0.5) {
            Direction::Negative
        } else {
            Direction::Positive
        };
        let impact_id = format!("I{f}");
        let impact = if kind == FactorKind::Abstract {
            let weights = random_weights(rng, factor_measures.len());
            let mut norms = std::collections::BTreeMap::new();
            for m in &factor_measures {
                norms.insert(
                    m.clone(),
                    NormalizationSpec {
                        direction,
                        threshold: rng.gen_range(50.0..200.0),
                    },
                );
            }
            Impact {
                id: impact_id,
                factor: factor_id.clone(),
                aspect: String::new(), // patched when attached below
                direction,
                justification: "generated".into(),
                measure_weights: Some(factor_measures.iter().cloned().zip(weights).collect()),
                normalization: None,
                measure_normalizations: Some(norms),
            }
        } else {
            Impact {
                id: impact_id,
                factor: factor_id.clone(),
                aspect: String::new(),
                direction,
                justification: "generated".into(),
                measure_weights: None,
                normalization: Some(NormalizationSpec {
                    direction,
                    threshold: rng.gen_range(50.0..200.0),
                }),
                measure_normalizations: None,
            }
        };
        factors.push(Factor {
            id: factor_id,
            entity: "src".into(),
            property: format!("p{f}"),
            measures: factor_measures,
            kind,
        });
        impacts.push(impact);
    }

    // Mid-level aspects only when there are enough impacts for each to
    // hold at least one.
    let n_mid = rng.gen_range(0..=impacts.len().min(2));
    let mid_ids: Vec<String> = (1..=n_mid).map(|i| format!("QA{i}")).collect();
    let mut assignment: Vec<String> = Vec::new();
    for (i, _) in impacts.iter().enumerate() {
        let home = if n_mid == 0 {
            "Q".to_string()
        } else if i < n_mid {
            mid_ids[i].clone()
        } else {
            mid_ids[rng.gen_range(0..n_mid)].clone()
        };
        assignment.push(home);
    }
    for (impact, home) in impacts.iter_mut().zip(&assignment) {
        impact.aspect = home.clone();
    }

    let mut aspects = Vec::new();
    for mid in &mid_ids {
        let members: Vec<String> = impacts
            .iter()
            .filter(|i| &i.aspect == mid)
            .map(|i| i.id.clone())
            .collect();
        let weights = random_weights(rng, members.len());
        aspects.push(QualityAspect {
            id: mid.clone(),
            name: mid.clone(),
            children: vec![],
            impacts: members.clone(),
            child_weights: members.into_iter().zip(weights).collect(),
            grading_key: if rng.gen_bool(0.2) {
                Some(GradingKey::german_school())
            } else {
                None
            },
        });
    }

    let root_impacts: Vec<String> = impacts
        .iter()
        .filter(|i| i.aspect == "Q")
        .map(|i| i.id.clone())
        .collect();
    let mut root_members = mid_ids.clone();
    root_members.extend(root_impacts.iter().cloned());
    let weights = random_weights(rng, root_members.len());
    let root = QualityAspect {
        id: "Q".into(),
        name: "quality".into(),
        children: mid_ids,
        impacts: root_impacts,
        child_weights: root_members.into_iter().zip(weights).collect(),
        grading_key: None,
    };

    QualityModel {
        entities: vec![Entity {
            id: "src".into(),
            name: "source".into(),
            kind: "product part".into(),
        }],
        measures,
        factors,
        impacts,
        aspects,
        root,
        default_grading_key: GradingKey::german_school(),
        measure_grading_keys: Default::default(),
    }
}

/// A complete dataset for `model`: every base measure gets a value in
/// [0.1, 100), so derived expressions never divide by zero.
pub fn random_dataset(rng: &mut impl Rng, model: &QualityModel<f64>) -> MeasurementDataset<f64> {
    MeasurementDataset {
        subject: "generated".into(),
        values: model
            .measures
            .iter()
            .filter(|m| m.kind == MeasureKind::Base)
            .map(|m| (m.id.clone(), rng.gen_range(0.1..100.0)))
            .collect(),
        provenance: Default::default(),
    }
}

/// A perfectly consistent pairwise matrix built from a hidden weight
/// vector: entries w_i / w_j, so lambda_max = n and CR = 0 up to float
/// noise. Hidden weights stay in [1,3] to respect the judgment scale.
pub fn random_consistent_matrix(
    rng: &mut impl Rng,
    node_id: &str,
    n: usize,
) -> ComparisonMatrix<f64> {
    let hidden: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let items: Vec<String> = (1..=n).map(|i| format!("c{i}")).collect();
    let entries: Vec<Vec<f64>> = hidden
        .iter()
        .map(|wi| hidden.iter().map(|wj| wi / wj).collect())
        .collect();
    ComparisonMatrix::new(node_id.to_string(), items, entries)
        .expect("consistent construction satisfies all matrix invariants")
}

/// The hidden weights behind `random_consistent_matrix` for the same rng
/// state, normalized to sum 1. Call with a fresh rng seeded identically.
pub fn normalized_hidden_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let hidden: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let total: f64 = hidden.iter().sum();
    hidden.into_iter().map(|w| w / total).collect()
}
