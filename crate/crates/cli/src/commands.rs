use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use qmeval_core::sensitivity::{SensitivityPlan, TargetFilter};
use qmeval_core::weights::WeightError;
use qmeval_core::{
    check_completeness, consistency_ratio, derive_weights, findings_to_measures, load_dataset,
    parse_comparisons, parse_findings, parse_mapping, parse_model, rebalance, serialize_model,
    sweep, validate_model, weighable_nodes, EvaluationResult, MeasurementDataset, QualityModel,
    Variant, WeightVector, CONSISTENCY_WARNING_THRESHOLD,
};

use crate::render;
use crate::{Failure, Format};

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("error: cannot read `{}`: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::parse(format!("error: cannot write `{}`: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<QualityModel, Failure> {
    let text = read(path)?;
    parse_model(&text).map_err(|e| Failure::parse(format!("error: {}: {e}", path.display())))
}

fn load_valid_model(path: &Path) -> Result<QualityModel, Failure> {
    let model = load_model(path)?;
    let report = validate_model(&model);
    if report.is_empty() {
        Ok(model)
    } else {
        let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        Err(Failure::validation(lines.join("\n")))
    }
}

/// CSV files carry no subject, so the file stem names the product.
fn load_datasets(paths: &[impl AsRef<Path>]) -> Result<Vec<MeasurementDataset>, Failure> {
    let mut datasets = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let text = read(path)?;
        let mut dataset = load_dataset(&text)
            .map_err(|e| Failure::parse(format!("error: {}: {e}", path.display())))?;
        if dataset.subject.is_empty() {
            dataset.subject = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
        }
        datasets.push(dataset);
    }
    Ok(datasets)
}

fn check_complete(model: &QualityModel, dataset: &MeasurementDataset) -> Result<(), Failure> {
    let missing = check_completeness(model, dataset);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::completeness(format!(
            "error: dataset `{}` is missing measures: {}",
            dataset.subject,
            missing.join(", ")
        )))
    }
}

pub fn validate(model_path: &Path) -> Result<(), Failure> {
    let model = load_model(model_path)?;
    let report = validate_model(&model);
    if report.is_empty() {
        println!(
            "ok: {} satisfies all structural rules",
            model_path.display()
        );
        Ok(())
    } else {
        for violation in &report.violations {
            println!("{violation}");
        }
        Err(Failure {
            code: 2,
            message: String::new(),
        })
    }
}

pub fn weigh(
    model_path: &Path,
    comparisons_path: &Path,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let model = load_model(model_path)?;
    let text = read(comparisons_path)?;
    let matrices = parse_comparisons::<f64>(&text).map_err(|e| match e {
        WeightError::Parse(_) => {
            Failure::parse(format!("error: {}: {e}", comparisons_path.display()))
        }
        other => Failure::validation(format!("error: {other}")),
    })?;

    let mut vectors: Vec<WeightVector> = Vec::new();
    let mut covered: Vec<String> = Vec::new();
    for matrix in &matrices {
        let (vector, lambda) =
            derive_weights(matrix).map_err(|e| Failure::validation(format!("error: {e}")))?;
        let cr = consistency_ratio(lambda, matrix.order())
            .map_err(|e| Failure::validation(format!("error: {e}")))?;
        if cr > CONSISTENCY_WARNING_THRESHOLD {
            eprintln!(
                "consistency warning: node {}, CR={}",
                matrix.node_id(),
                render::sig4(cr)
            );
        }
        covered.push(vector.node_id.clone());
        vectors.push(vector);
    }

    // Single-member nodes need no judgment; their weight is 1.
    for (node, members) in weighable_nodes(&model) {
        if covered.iter().any(|c| c == &node) {
            continue;
        }
        if members.len() == 1 {
            vectors.push(WeightVector {
                node_id: node,
                weights: members.into_iter().map(|m| (m, 1.0)).collect(),
            });
        } else {
            return Err(Failure::validation(format!(
                "error: no comparison matrix for node `{node}` ({} members)",
                members.len()
            )));
        }
    }

    let reweighted =
        rebalance(&model, &vectors).map_err(|e| Failure::validation(format!("error: {e}")))?;
    emit(out, &serialize_model(&reweighted))
}

pub fn evaluate(
    model_path: &Path,
    data_paths: &[impl AsRef<Path>],
    variant: Variant,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let model = load_valid_model(model_path)?;
    let datasets = load_datasets(data_paths)?;
    let mut results: Vec<EvaluationResult> = Vec::new();
    for dataset in &datasets {
        check_complete(&model, dataset)?;
        let result = qmeval_core::evaluate(&model, dataset, variant)
            .map_err(|e| Failure::evaluation(format!("error: {e}")))?;
        results.push(result);
    }
    let text = match format {
        Format::Json => render::results_json(&results),
        Format::Markdown => render::results_markdown(&results, out.is_none()),
    };
    emit(out, &text)
}

#[allow(clippy::too_many_arguments)]
pub fn sensitivity(
    model_path: &Path,
    data_paths: &[impl AsRef<Path>],
    variant: Variant,
    format: Format,
    out: Option<&Path>,
    weight_deltas: Option<Vec<f64>>,
    threshold_deltas: Option<Vec<f64>>,
    targets: Vec<String>,
) -> Result<(), Failure> {
    let model = load_valid_model(model_path)?;
    let datasets = load_datasets(data_paths)?;
    let mut plan = SensitivityPlan::<f64>::standard();
    if let Some(deltas) = weight_deltas {
        plan.weight_deltas = deltas;
    }
    if let Some(deltas) = threshold_deltas {
        plan.threshold_rel_deltas = deltas;
    }
    if !targets.is_empty() {
        plan.targets = TargetFilter::Named(targets);
    }
    let mut reports = Vec::new();
    for dataset in &datasets {
        check_complete(&model, dataset)?;
        let report = sweep(&model, dataset, variant, &plan)
            .map_err(|e| Failure::evaluation(format!("error: {e}")))?;
        reports.push(report);
    }
    let text = match format {
        Format::Json => render::reports_json(&reports),
        Format::Markdown => render::reports_markdown(&reports, out.is_none()),
    };
    emit(out, &text)
}

pub fn findings_convert(
    findings_path: &Path,
    mapping_path: &Path,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let findings_text = read(findings_path)?;
    let report = parse_findings(&findings_text)
        .map_err(|e| Failure::parse(format!("error: {}: {e}", findings_path.display())))?;
    let mapping_text = read(mapping_path)?;
    let mapping: BTreeMap<String, String> = parse_mapping(&mapping_text)
        .map_err(|e| Failure::parse(format!("error: {}: {e}", mapping_path.display())))?;
    let (dataset, warnings) = findings_to_measures::<f64>(&report, &mapping);
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let mut text = serde_json::to_string_pretty(&dataset).expect("dataset serialization");
    text.push('\n');
    emit(out, &text)
}
