use std::collections::{BTreeMap, BTreeSet};
use std::num::NonZeroU64;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::model::{MeasureKind, QualityModel};
use crate::scalar::Scalar;

/// Application-level values for the base measures of one product.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeasurementDataset<S: Scalar> {
    pub subject: String,
    pub values: BTreeMap<String, S>,
    /// Source description per measure; informational only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

/// Static-analysis result summary: violation counts per rule, plus the
/// size baseline they are normalized against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FindingsReport {
    pub subject: String,
    pub lines_of_code: NonZeroU64,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("dataset line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("dataset line {line}: value `{value}` for `{id}` is not numeric")]
    NonNumeric {
        line: usize,
        id: String,
        value: String,
    },
    #[error("duplicate measure `{id}` in dataset")]
    DuplicateMeasure { id: String },
    #[error("measure `{id}` has a non-finite value")]
    NonFinite { id: String },
    #[error("dataset JSON: {0}")]
    Json(String),
    #[error("findings JSON: {0}")]
    FindingsJson(String),
    #[error("mapping JSON: {0}")]
    MappingJson(String),
}

// Collects object entries without key deduplication so duplicates can be
// rejected instead of silently last-winning.
fn measure_pairs<'de, D, S>(deserializer: D) -> Result<Vec<(String, S)>, D::Error>
where
    D: Deserializer<'de>,
    S: Deserialize<'de>,
{
    struct Pairs<S>(std::marker::PhantomData<S>);
    impl<'de, S: Deserialize<'de>> Visitor<'de> for Pairs<S> {
        type Value = Vec<(String, S)>;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a map of measure ids to numbers")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(entry) = map.next_entry()? {
                out.push(entry);
            }
            Ok(out)
        }
    }
    deserializer.deserialize_map(Pairs(std::marker::PhantomData))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawJsonDataset<S: Scalar> {
    subject: String,
    #[serde(deserialize_with = "measure_pairs", bound = "S: Scalar")]
    values: Vec<(String, S)>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

/// Loads a dataset from either format: JSON (`{subject, values:{...}}`)
/// when the document starts with `{`, otherwise CSV with header
/// `measure,value`. CSV carries no subject; callers name those datasets
/// themselves (the CLI uses the file stem).
pub fn load_dataset<S: Scalar>(document: &str) -> Result<MeasurementDataset<S>, IngestError> {
    if document.trim_start().starts_with('{') {
        load_json_dataset(document)
    } else {
        load_csv_dataset(document)
    }
}

fn load_json_dataset<S: Scalar>(document: &str) -> Result<MeasurementDataset<S>, IngestError> {
    let raw: RawJsonDataset<S> =
        serde_json::from_str(document).map_err(|e| IngestError::Json(e.to_string()))?;
    let mut values = BTreeMap::new();
    for (id, value) in raw.values {
        if !value.is_finite() {
            return Err(IngestError::NonFinite { id });
        }
        if values.insert(id.clone(), value).is_some() {
            return Err(IngestError::DuplicateMeasure { id });
        }
    }
    Ok(MeasurementDataset {
        subject: raw.subject,
        values,
        provenance: raw.provenance,
    })
}

fn load_csv_dataset<S: Scalar>(document: &str) -> Result<MeasurementDataset<S>, IngestError> {
    let mut lines = document.lines().enumerate();
    let header = lines.next().ok_or_else(|| IngestError::Csv {
        line: 1,
        message: "missing header `measure,value`".into(),
    })?;
    let header_cols: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if header_cols != ["measure", "value"] {
        return Err(IngestError::Csv {
            line: 1,
            message: format!(
                "expected header `measure,value`, found `{}`",
                header.1.trim()
            ),
        });
    }
    let mut values: BTreeMap<String, S> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, value_text) = line.split_once(',').ok_or_else(|| IngestError::Csv {
            line: line_no,
            message: "expected `measure,value` row".into(),
        })?;
        let id = id.trim();
        let value_text = value_text.trim();
        if id.is_empty() {
            return Err(IngestError::Csv {
                line: line_no,
                message: "empty measure id".into(),
            });
        }
        if value_text.contains(',') {
            return Err(IngestError::Csv {
                line: line_no,
                message: "too many columns".into(),
            });
        }
        let parsed: f64 = value_text.parse().map_err(|_| IngestError::NonNumeric {
            line: line_no,
            id: id.to_string(),
            value: value_text.to_string(),
        })?;
        if !parsed.is_finite() {
            return Err(IngestError::NonFinite { id: id.to_string() });
        }
        let value =
            S::from_f64(parsed).ok_or_else(|| IngestError::NonFinite { id: id.to_string() })?;
        if values.insert(id.to_string(), value).is_some() {
            return Err(IngestError::DuplicateMeasure { id: id.to_string() });
        }
    }
    Ok(MeasurementDataset {
        subject: String::new(),
        values,
        provenance: BTreeMap::new(),
    })
}

pub fn parse_findings(document: &str) -> Result<FindingsReport, IngestError> {
    serde_json::from_str(document).map_err(|e| IngestError::FindingsJson(e.to_string()))
}

pub fn parse_mapping(document: &str) -> Result<BTreeMap<String, String>, IngestError> {
    serde_json::from_str(document).map_err(|e| IngestError::MappingJson(e.to_string()))
}

/// Converts rule-violation counts to measure values in violations per
/// kLOC: value = count / (linesOfCode / 1000). Rules without a mapping are
/// skipped and reported in the warning list; rules mapping to the same
/// measure accumulate.
pub fn findings_to_measures<S: Scalar>(
    report: &FindingsReport,
    mapping: &BTreeMap<String, String>,
) -> (MeasurementDataset<S>, Vec<String>) {
    let loc = report.lines_of_code.get() as f64;
    let mut sums: BTreeMap<&str, u64> = BTreeMap::new();
    let mut rules_per_measure: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (rule, count) in &report.counts {
        match mapping.get(rule) {
            Some(measure) => {
                *sums.entry(measure.as_str()).or_insert(0) += count;
                rules_per_measure
                    .entry(measure.as_str())
                    .or_default()
                    .push(rule);
            }
            None => warnings.push(format!(
                "rule `{rule}` has no measure mapping ({count} findings ignored)"
            )),
        }
    }
    let mut values = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for (measure, total) in sums {
        let per_kloc = total as f64 * 1000.0 / loc;
        values.insert(
            measure.to_string(),
            S::from_f64(per_kloc).expect("finite ratio must be representable"),
        );
        let rules = &rules_per_measure[measure];
        provenance.insert(
            measure.to_string(),
            format!(
                "findings: rule{} {} over {} LOC",
                if rules.len() == 1 { "" } else { "s" },
                rules.join("+"),
                report.lines_of_code
            ),
        );
    }
    (
        MeasurementDataset {
            subject: report.subject.clone(),
            values,
            provenance,
        },
        warnings,
    )
}

/// Base measures reachable from the root: aspects (tree walk) → impacts →
/// factors → measures, with derived measures expanded through their
/// expressions. Unresolved ids are skipped; validation reports those.
pub(crate) fn reachable_base_measures<S: Scalar>(model: &QualityModel<S>) -> BTreeSet<String> {
    let index = model.index();
    let mut base = BTreeSet::new();
    let mut seen_aspects = BTreeSet::new();
    let mut seen_measures = BTreeSet::new();
    let mut queue = vec![model.root.id.as_str()];
    while let Some(aspect_id) = queue.pop() {
        if !seen_aspects.insert(aspect_id) {
            continue;
        }
        let Some(aspect) = index.aspects.get(aspect_id) else {
            continue;
        };
        queue.extend(aspect.children.iter().map(String::as_str));
        for impact_id in &aspect.impacts {
            let Some(impact) = index.impacts.get(impact_id.as_str()) else {
                continue;
            };
            let Some(factor) = index.factors.get(impact.factor.as_str()) else {
                continue;
            };
            for measure_id in &factor.measures {
                expand_measure(measure_id, &index, &mut base, &mut seen_measures);
            }
        }
    }
    base
}

fn expand_measure<S: Scalar>(
    id: &str,
    index: &crate::model::ModelIndex<'_, S>,
    base: &mut BTreeSet<String>,
    seen: &mut BTreeSet<String>,
) {
    if !seen.insert(id.to_string()) {
        return;
    }
    let Some(measure) = index.measures.get(id) else {
        return;
    };
    match measure.kind {
        MeasureKind::Base => {
            base.insert(id.to_string());
        }
        MeasureKind::Derived => {
            if let Some(expr) = &measure.expression {
                for referenced in expr.measure_refs() {
                    expand_measure(referenced, index, base, seen);
                }
            }
        }
    }
}

/// Ids of reachable base measures with no value in the dataset, sorted.
/// Empty means the dataset is complete for this model.
pub fn check_completeness<S: Scalar>(
    model: &QualityModel<S>,
    data: &MeasurementDataset<S>,
) -> Vec<String> {
    reachable_base_measures(model)
        .into_iter()
        .filter(|id| !data.values.contains_key(id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matches_reference_rows() {
        let csv = "measure,value\nM1,5\nM2,50\nM3,500\nM4,1000\nM5,10\n";
        let ds = load_dataset::<f64>(csv).unwrap();
        assert_eq!(ds.values.len(), 5);
        assert_eq!(ds.values["M1"], 5.0);
        assert_eq!(ds.values["M2"], 50.0);
        assert_eq!(ds.values["M3"], 500.0);
        assert_eq!(ds.values["M4"], 1000.0);
        assert_eq!(ds.values["M5"], 10.0);
    }

    #[test]
    fn csv_tolerates_blank_lines_and_spaces() {
        let csv = "measure,value\n\n M1 , 5 \n";
        let ds = load_dataset::<f64>(csv).unwrap();
        assert_eq!(ds.values["M1"], 5.0);
    }

    #[test]
    fn csv_non_numeric_value_is_an_error() {
        let csv = "measure,value\nM1, abc\n";
        let err = load_dataset::<f64>(csv).unwrap_err();
        assert_eq!(
            err,
            IngestError::NonNumeric {
                line: 2,
                id: "M1".into(),
                value: "abc".into()
            }
        );
    }

    #[test]
    fn csv_duplicate_measure_is_an_error() {
        let csv = "measure,value\nM1,5\nM1,6\n";
        assert_eq!(
            load_dataset::<f64>(csv).unwrap_err(),
            IngestError::DuplicateMeasure { id: "M1".into() }
        );
    }

    #[test]
    fn csv_bad_header_is_an_error() {
        let err = load_dataset::<f64>("id,val\nM1,5\n").unwrap_err();
        assert!(matches!(err, IngestError::Csv { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn json_dataset_with_empty_values_loads() {
        let ds = load_dataset::<f64>(r#"{"subject":"p","values":{}}"#).unwrap();
        assert_eq!(ds.subject, "p");
        assert!(ds.values.is_empty());
    }

    #[test]
    fn json_duplicate_key_is_an_error_not_last_wins() {
        let err = load_dataset::<f64>(r#"{"subject":"p","values":{"M1":1,"M1":2}}"#).unwrap_err();
        assert_eq!(err, IngestError::DuplicateMeasure { id: "M1".into() });
    }

    #[test]
    fn findings_normalize_per_kloc() {
        let report = FindingsReport {
            subject: "p".into(),
            lines_of_code: NonZeroU64::new(5000).unwrap(),
            counts: [("R1".to_string(), 50u64)].into_iter().collect(),
        };
        let mapping = [("R1".to_string(), "Mx".to_string())].into_iter().collect();
        let (ds, warnings) = findings_to_measures::<f64>(&report, &mapping);
        assert_eq!(ds.values["Mx"], 10.0);
        assert!(warnings.is_empty());
    }

    #[test]
    fn zero_count_rule_yields_zero_value() {
        let report = FindingsReport {
            subject: "p".into(),
            lines_of_code: NonZeroU64::new(1000).unwrap(),
            counts: [("R1".to_string(), 0u64)].into_iter().collect(),
        };
        let mapping = [("R1".to_string(), "Mx".to_string())].into_iter().collect();
        let (ds, _) = findings_to_measures::<f64>(&report, &mapping);
        assert_eq!(ds.values["Mx"], 0.0);
    }

    #[test]
    fn unmapped_rule_warns_and_is_absent() {
        let report = FindingsReport {
            subject: "p".into(),
            lines_of_code: NonZeroU64::new(1000).unwrap(),
            counts: [("R9".to_string(), 3u64)].into_iter().collect(),
        };
        let (ds, warnings) = findings_to_measures::<f64>(&report, &BTreeMap::new());
        assert!(ds.values.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("R9"), "{}", warnings[0]);
    }

    #[test]
    fn rules_mapping_to_one_measure_accumulate() {
        let report = FindingsReport {
            subject: "p".into(),
            lines_of_code: NonZeroU64::new(2000).unwrap(),
            counts: [("R1".to_string(), 3u64), ("R2".to_string(), 5u64)]
                .into_iter()
                .collect(),
        };
        let mapping = [
            ("R1".to_string(), "Mx".to_string()),
            ("R2".to_string(), "Mx".to_string()),
        ]
        .into_iter()
        .collect();
        let (ds, _) = findings_to_measures::<f64>(&report, &mapping);
        assert_eq!(ds.values["Mx"], 4.0); // 8 findings per 2 kLOC
    }

    #[test]
    fn findings_values_scale_linearly() {
        let counts: BTreeMap<String, u64> = [("R1".to_string(), 7u64), ("R2".to_string(), 11u64)]
            .into_iter()
            .collect();
        let mapping: BTreeMap<String, String> = [
            ("R1".to_string(), "A".to_string()),
            ("R2".to_string(), "B".to_string()),
        ]
        .into_iter()
        .collect();
        let base = FindingsReport {
            subject: "p".into(),
            lines_of_code: NonZeroU64::new(4000).unwrap(),
            counts: counts.clone(),
        };
        let doubled_counts = FindingsReport {
            counts: counts.iter().map(|(k, v)| (k.clone(), v * 2)).collect(),
            ..base.clone()
        };
        let doubled_loc = FindingsReport {
            lines_of_code: NonZeroU64::new(8000).unwrap(),
            ..base.clone()
        };
        let (d0, _) = findings_to_measures::<f64>(&base, &mapping);
        let (d1, _) = findings_to_measures::<f64>(&doubled_counts, &mapping);
        let (d2, _) = findings_to_measures::<f64>(&doubled_loc, &mapping);
        for id in ["A", "B"] {
            assert!(d0.values[id] >= 0.0);
            assert_eq!(d1.values[id], d0.values[id] * 2.0);
            assert_eq!(d2.values[id], d0.values[id] / 2.0);
        }
    }
}
