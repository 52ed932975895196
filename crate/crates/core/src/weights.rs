use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use crate::model::{FactorKind, Impact, QualityModel};
use crate::scalar::{cast, power_iteration_tolerance, reciprocity_tolerance, Scalar};

/// Judgments above this consistency ratio are conventionally considered
/// incoherent; reported as a warning, never a hard failure.
pub const CONSISTENCY_WARNING_THRESHOLD: f64 = 0.1;

const POWER_ITERATION_CAP: usize = 1000;

/// Random-index table for n = 1..=10; CR is undefined beyond that here.
const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("comparison matrix for `{node}`: {message}")]
    InvalidMatrix { node: String, message: String },
    #[error("power iteration for `{node}` did not converge within {iterations} iterations")]
    NonConvergence { node: String, iterations: usize },
    #[error("consistency ratio undefined for n = {n}; supported range is 2..=10")]
    UnsupportedOrder { n: usize },
    #[error("weight vector for `{node}` does not match the node: {message}")]
    Mismatch { node: String, message: String },
    #[error("`{node}` does not take weights: {message}")]
    NotWeightable { node: String, message: String },
    #[error("comparison file: {0}")]
    Parse(String),
    #[error("weight vector for `{node}` cannot be normalized: {message}")]
    Degenerate { node: String, message: String },
}

/// Reciprocal pairwise-comparison judgments over one parent's children.
/// Valid by construction: square, unit diagonal, reciprocal within
/// relative 1e-9, entries within the Saaty scale [1/9, 9].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix<S: Scalar> {
    node_id: String,
    items: Vec<String>,
    entries: Vec<Vec<S>>,
}

impl<S: Scalar> ComparisonMatrix<S> {
    // Symmetric [i][j] vs [j][i] checks; index form is clearer here.
    #[allow(clippy::needless_range_loop)]
    pub fn new(
        node_id: impl Into<String>,
        items: Vec<String>,
        entries: Vec<Vec<S>>,
    ) -> Result<Self, WeightError> {
        let node_id = node_id.into();
        let n = items.len();
        let fail = |message: String| WeightError::InvalidMatrix {
            node: node_id.clone(),
            message,
        };
        if n < 2 {
            return Err(fail(format!("needs at least 2 items, found {n}")));
        }
        if items.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(fail("duplicate item ids".into()));
        }
        if entries.len() != n || entries.iter().any(|row| row.len() != n) {
            return Err(fail(format!("entries must form an {n}x{n} matrix")));
        }
        let lo = cast::<S>(1.0 / 9.0);
        let hi = cast::<S>(9.0);
        // Slack of one part in 1e9 so that reciprocals of scale bounds
        // (e.g. 1/9 written as 0.111111111) stay inside.
        let slack = cast::<S>(1e-9);
        let rec_tol = reciprocity_tolerance::<S>();
        for i in 0..n {
            for j in 0..n {
                let a = entries[i][j];
                if !a.is_finite() || a <= S::zero() {
                    return Err(fail(format!(
                        "entry [{i}][{j}] must be a positive finite number, found {a}"
                    )));
                }
                if a < lo * (S::one() - slack) || a > hi * (S::one() + slack) {
                    return Err(fail(format!(
                        "Saaty scale bound exceeded: entry [{i}][{j}] = {a} outside [1/9, 9]"
                    )));
                }
            }
            if entries[i][i] != S::one() {
                return Err(fail(format!(
                    "diagonal entry [{i}][{i}] must be 1, found {}",
                    entries[i][i]
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let expected = S::one() / entries[i][j];
                let actual = entries[j][i];
                if (actual - expected).abs() > rec_tol * expected.abs() {
                    return Err(fail(format!(
                        "not reciprocal: entry [{j}][{i}] = {actual}, expected 1/entry[{i}][{j}] = {expected}"
                    )));
                }
            }
        }
        Ok(ComparisonMatrix {
            node_id,
            items,
            entries,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn entries(&self) -> &[Vec<S>] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.items.len()
    }
}

/// Weights per child of one node; each in [0,1], summing to 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightVector<S: Scalar> {
    pub node_id: String,
    pub weights: BTreeMap<String, S>,
}

/// Principal eigenvector by power iteration (L1-normalized iterates,
/// convergence when successive iterates differ by less than 1e-10 in max
/// norm, cap 1000), plus the Rayleigh-quotient estimate of lambdaMax.
pub fn derive_weights<S: Scalar>(
    matrix: &ComparisonMatrix<S>,
) -> Result<(WeightVector<S>, S), WeightError> {
    derive_weights_with(
        matrix,
        power_iteration_tolerance::<S>(),
        POWER_ITERATION_CAP,
    )
}

pub(crate) fn derive_weights_with<S: Scalar>(
    matrix: &ComparisonMatrix<S>,
    tolerance: S,
    cap: usize,
) -> Result<(WeightVector<S>, S), WeightError> {
    let n = matrix.order();
    let a = &matrix.entries;
    let mut w = vec![S::one() / S::from_usize(n).expect("small n"); n];
    let mut converged = false;
    for _ in 0..cap {
        let mut next = vec![S::zero(); n];
        for i in 0..n {
            for j in 0..n {
                next[i] = next[i] + a[i][j] * w[j];
            }
        }
        let sum = next.iter().fold(S::zero(), |acc, x| acc + *x);
        for x in next.iter_mut() {
            *x = *x / sum;
        }
        let diff = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), |acc, d| acc.max(d));
        w = next;
        if diff < tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WeightError::NonConvergence {
            node: matrix.node_id.clone(),
            iterations: cap,
        });
    }
    // lambda = (w' A w) / (w' w)
    let mut aw = vec![S::zero(); n];
    for i in 0..n {
        for j in 0..n {
            aw[i] = aw[i] + a[i][j] * w[j];
        }
    }
    let num = aw
        .iter()
        .zip(&w)
        .fold(S::zero(), |acc, (x, y)| acc + *x * *y);
    let den = w.iter().fold(S::zero(), |acc, x| acc + *x * *x);
    let lambda_max = num / den;
    let weights = matrix
        .items
        .iter()
        .cloned()
        .zip(w.iter().copied())
        .collect();
    Ok((
        WeightVector {
            node_id: matrix.node_id.clone(),
            weights,
        },
        lambda_max,
    ))
}

/// CI = (lambdaMax - n)/(n - 1), CR = CI/RI(n). Orders 1 and 2 are
/// consistent by construction, so CR = 0. Negative rounding dust in CI is
/// clamped to 0.
pub fn consistency_ratio<S: Scalar>(lambda_max: S, n: usize) -> Result<S, WeightError> {
    if n > 10 {
        return Err(WeightError::UnsupportedOrder { n });
    }
    if n <= 2 {
        return Ok(S::zero());
    }
    let nf = S::from_usize(n).expect("small n");
    let ci = ((lambda_max - nf) / (nf - S::one())).max(S::zero());
    Ok(ci / cast(RANDOM_INDEX[n - 1]))
}

/// How rebalancing turns raw vectors into stored weights. The default
/// simply renormalizes each vector locally; richer global strategies can
/// slot in without interface changes.
pub trait RebalanceStrategy<S: Scalar> {
    fn name(&self) -> &'static str;
    /// Returns the weights to store for one node, given the raw vector.
    fn rebalance(
        &self,
        node_id: &str,
        raw: &BTreeMap<String, S>,
    ) -> Result<BTreeMap<String, S>, WeightError>;
}

/// Divides every entry by the vector sum, nothing else.
pub struct LocalNormalize;

impl<S: Scalar> RebalanceStrategy<S> for LocalNormalize {
    fn name(&self) -> &'static str {
        "local-normalize"
    }

    fn rebalance(
        &self,
        node_id: &str,
        raw: &BTreeMap<String, S>,
    ) -> Result<BTreeMap<String, S>, WeightError> {
        let sum = raw.values().fold(S::zero(), |acc, w| acc + *w);
        if !sum.is_finite() || sum <= S::zero() {
            return Err(WeightError::Degenerate {
                node: node_id.to_string(),
                message: format!("weights sum to {sum}"),
            });
        }
        for (child, w) in raw {
            if !w.is_finite() || *w < S::zero() {
                return Err(WeightError::Degenerate {
                    node: node_id.to_string(),
                    message: format!("weight {w} for `{child}` is not a non-negative number"),
                });
            }
        }
        Ok(raw.iter().map(|(k, w)| (k.clone(), *w / sum)).collect())
    }
}

/// Writes the vectors onto a copy of the model using the default
/// local-normalize strategy. Aspect vectors land in childWeights, vectors
/// for impacts on abstract factors in measureWeights.
pub fn rebalance<S: Scalar>(
    model: &QualityModel<S>,
    vectors: &[WeightVector<S>],
) -> Result<QualityModel<S>, WeightError> {
    rebalance_with(&LocalNormalize, model, vectors)
}

pub fn rebalance_with<S: Scalar>(
    strategy: &dyn RebalanceStrategy<S>,
    model: &QualityModel<S>,
    vectors: &[WeightVector<S>],
) -> Result<QualityModel<S>, WeightError> {
    let mut out = model.clone();
    for vector in vectors {
        let node = &vector.node_id;
        let expected = expected_children(model, node)?;
        let given: BTreeSet<&str> = vector.weights.keys().map(String::as_str).collect();
        if expected != given {
            let missing: Vec<&str> = expected.difference(&given).copied().collect();
            let extra: Vec<&str> = given.difference(&expected).copied().collect();
            return Err(WeightError::Mismatch {
                node: node.clone(),
                message: format!(
                    "items differ from the node's children (missing: [{}], extra: [{}])",
                    missing.join(", "),
                    extra.join(", ")
                ),
            });
        }
        let balanced = strategy.rebalance(node, &vector.weights)?;
        if let Some(aspect) = out.aspects.iter_mut().find(|a| &a.id == node) {
            aspect.child_weights = balanced;
        } else if out.root.id == *node {
            out.root.child_weights = balanced;
        } else if let Some(impact) = out.impacts.iter_mut().find(|i| &i.id == node) {
            impact.measure_weights = Some(balanced);
        }
    }
    Ok(out)
}

/// Every node that carries a weight vector, paired with the members the
/// vector must cover: aspects over children ∪ impacts, impacts on
/// abstract factors over the factor's measures. Order: root, declared
/// aspects, declared impacts.
pub fn weighable_nodes<S: Scalar>(model: &QualityModel<S>) -> Vec<(String, Vec<String>)> {
    let mut nodes = Vec::new();
    for aspect in model.all_aspects() {
        let mut members: Vec<String> = aspect.children.clone();
        members.extend(aspect.impacts.iter().cloned());
        if !members.is_empty() {
            nodes.push((aspect.id.clone(), members));
        }
    }
    for impact in &model.impacts {
        let abstract_factor = model
            .factors
            .iter()
            .any(|f| f.id == impact.factor && f.kind == FactorKind::Abstract);
        if abstract_factor {
            nodes.push((impact.id.clone(), impact_factor_measures(model, impact)));
        }
    }
    nodes
}

fn impact_factor_measures<S: Scalar>(model: &QualityModel<S>, impact: &Impact<S>) -> Vec<String> {
    model
        .factors
        .iter()
        .find(|f| f.id == impact.factor)
        .map(|f| f.measures.clone())
        .unwrap_or_default()
}

// The child-id set a weight vector for `node` must cover: children ∪
// impacts for an aspect, the factor's measures for an impact on an
// abstract factor.
fn expected_children<'m, S: Scalar>(
    model: &'m QualityModel<S>,
    node: &str,
) -> Result<BTreeSet<&'m str>, WeightError> {
    if let Some(aspect) = model.all_aspects().find(|a| a.id == node) {
        return Ok(aspect
            .children
            .iter()
            .chain(aspect.impacts.iter())
            .map(String::as_str)
            .collect());
    }
    if let Some(impact) = model.impacts.iter().find(|i| i.id == node) {
        let factor = model
            .factors
            .iter()
            .find(|f| f.id == impact.factor)
            .ok_or_else(|| WeightError::Mismatch {
                node: node.to_string(),
                message: format!("impact references unknown factor `{}`", impact.factor),
            })?;
        if factor.kind != FactorKind::Abstract {
            return Err(WeightError::NotWeightable {
                node: node.to_string(),
                message: format!(
                    "factor `{}` is measured directly; measure weights do not apply",
                    factor.id
                ),
            });
        }
        return Ok(factor.measures.iter().map(String::as_str).collect());
    }
    match model.node_kind(node) {
        Some(kind) => Err(WeightError::NotWeightable {
            node: node.to_string(),
            message: format!("weighting is not applicable to this node class ({kind:?})"),
        }),
        None => Err(WeightError::Mismatch {
            node: node.to_string(),
            message: "unknown node id".into(),
        }),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawMatrix<S> {
    node_id: String,
    items: Vec<String>,
    entries: Vec<Vec<Option<S>>>,
}

/// Loads comparison matrices from JSON: one object or an array of them.
/// Only the upper triangle is required; `null` (or omitted) entries below
/// the diagonal are filled by reciprocity.
#[allow(clippy::needless_range_loop)]
pub fn parse_comparisons<S: Scalar>(
    document: &str,
) -> Result<Vec<ComparisonMatrix<S>>, WeightError> {
    let raws: Vec<RawMatrix<S>> = if document.trim_start().starts_with('[') {
        serde_json::from_str(document).map_err(|e| WeightError::Parse(e.to_string()))?
    } else {
        vec![serde_json::from_str(document).map_err(|e| WeightError::Parse(e.to_string()))?]
    };
    let mut matrices = Vec::with_capacity(raws.len());
    for raw in raws {
        let n = raw.items.len();
        if raw.entries.len() != n || raw.entries.iter().any(|r| r.len() != n) {
            return Err(WeightError::InvalidMatrix {
                node: raw.node_id,
                message: format!("entries must form an {n}x{n} matrix"),
            });
        }
        let mut entries = vec![vec![S::one(); n]; n];
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = raw.entries[i][j] {
                    entries[i][j] = v;
                } else if j > i {
                    return Err(WeightError::InvalidMatrix {
                        node: raw.node_id,
                        message: format!(
                            "entry [{i}][{j}] missing; the upper triangle must be given"
                        ),
                    });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if raw.entries[j][i].is_none() {
                    entries[j][i] = S::one() / entries[i][j];
                }
            }
        }
        matrices.push(ComparisonMatrix::new(raw.node_id, raw.items, entries)?);
    }
    Ok(matrices)
}
