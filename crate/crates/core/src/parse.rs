use crate::model::QualityModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: {message}")]
    UnknownField {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate {collection} id `{id}`")]
    DuplicateId {
        collection: &'static str,
        id: String,
    },
}

/// Parses a model document. Structure only: cross-reference and weight
/// checks are validate_model's job, so invalid-but-well-formed models load
/// fine. Duplicate ids within one collection are rejected here because
/// later stages index by id.
pub fn parse_model<S: Scalar>(document: &str) -> Result<QualityModel<S>, ParseError> {
    let model: QualityModel<S> = serde_json::from_str(document).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        let message = e.to_string();
        if message.starts_with("unknown field") {
            ParseError::UnknownField {
                line,
                column,
                message,
            }
        } else {
            ParseError::Syntax {
                line,
                column,
                message,
            }
        }
    })?;
    check_collection_ids(&model)?;
    Ok(model)
}

fn check_collection_ids<S: Scalar>(model: &QualityModel<S>) -> Result<(), ParseError> {
    fn unique<'a>(
        collection: &'static str,
        ids: impl Iterator<Item = &'a str>,
    ) -> Result<(), ParseError> {
        let mut seen = std::collections::BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                return Err(ParseError::DuplicateId {
                    collection,
                    id: id.to_string(),
                });
            }
        }
        Ok(())
    }
    unique("entity", model.entities.iter().map(|e| e.id.as_str()))?;
    unique("measure", model.measures.iter().map(|m| m.id.as_str()))?;
    unique("factor", model.factors.iter().map(|f| f.id.as_str()))?;
    unique("impact", model.impacts.iter().map(|i| i.id.as_str()))?;
    unique("aspect", model.all_aspects().map(|a| a.id.as_str()))?;
    Ok(())
}

/// Pretty JSON with sorted map keys and a trailing newline;
/// parse_model(serialize_model(m)) == m structurally.
pub fn serialize_model<S: Scalar>(model: &QualityModel<S>) -> String {
    let mut text = serde_json::to_string_pretty(model).expect("model serialization cannot fail");
    text.push('\n');
    text
}
