//! Hierarchy-based multi-criteria evaluation of software product quality.
//!
//! A quality model relates measurable properties of a product (static
//! analysis findings, code metrics, defect counts) to abstract quality
//! aspects through factors and weighted impacts. This crate parses and
//! validates such models, ingests measurement data, derives weights from
//! pairwise comparisons, evaluates the hierarchy into values and grades
//! in three variants, and quantifies how stable the grades are under
//! parameter perturbation.
//!
//! All numeric code is generic over [`Scalar`] (implemented by `f32` and
//! `f64`); the crate root re-exports `f64` aliases for the common case.

pub mod eval;
pub mod expr;
pub mod ingest;
pub mod model;
pub mod parse;
pub mod scalar;
pub mod sensitivity;
pub mod validate;
pub mod weights;

#[cfg(feature = "testgen")]
pub mod testgen;

pub use eval::{aggregate, evaluate, evaluate_impact, grade, measure_factor, normalize, Variant};
pub use ingest::{
    check_completeness, findings_to_measures, load_dataset, parse_findings, parse_mapping,
};
pub use parse::{parse_model, serialize_model};
pub use scalar::Scalar;
pub use sensitivity::{perturb_threshold, perturb_weight, sweep};
pub use validate::{validate_model, ValidationReport, Violation};
pub use weights::{
    consistency_ratio, derive_weights, parse_comparisons, rebalance, weighable_nodes,
    LocalNormalize, RebalanceStrategy, CONSISTENCY_WARNING_THRESHOLD,
};

/// f64 instantiations of the generic types; the generic forms live in
/// their modules.
pub type QualityModel = model::QualityModel<f64>;
pub type QualityAspect = model::QualityAspect<f64>;
pub type Measure = model::Measure<f64>;
pub type Impact = model::Impact<f64>;
pub type GradingKey = model::GradingKey<f64>;
pub type NormalizationSpec = model::NormalizationSpec<f64>;
pub type ExpressionAst = expr::ExpressionAst<f64>;
pub type MeasurementDataset = ingest::MeasurementDataset<f64>;
pub type EvaluationResult = eval::EvaluationResult<f64>;
pub type ComparisonMatrix = weights::ComparisonMatrix<f64>;
pub type WeightVector = weights::WeightVector<f64>;
pub type SensitivityPlan = sensitivity::SensitivityPlan<f64>;
pub type SensitivityReport = sensitivity::SensitivityReport<f64>;
