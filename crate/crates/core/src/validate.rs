use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{FactorKind, MeasureKind, NormalizationSpec, QualityModel};
use crate::scalar::{weight_sum_tolerance, Scalar};

/// One broken invariant. `rule` is a stable kebab-case identifier, `node`
/// the id of the offending element ("model" for model-level issues).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub node: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.node, self.message, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    /// Sorted by (node, rule, message); empty means the model is valid.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Checker<'a, S: Scalar> {
    model: &'a QualityModel<S>,
    index: crate::model::ModelIndex<'a, S>,
    violations: Vec<Violation>,
}

/// Checks every structural and numeric invariant: id uniqueness, reference
/// resolution, factor-kind consistency, derived-measure acyclicity, weight
/// ranges and sums, activity applicability, normalization specs, aspect
/// tree shape, impact attachment, and grading keys. Pure and idempotent.
pub fn validate_model<S: Scalar>(model: &QualityModel<S>) -> ValidationReport {
    let mut checker = Checker {
        model,
        index: model.index(),
        violations: Vec::new(),
    };
    checker.check_duplicate_ids();
    checker.check_measures();
    checker.check_factors();
    checker.check_impacts();
    checker.check_aspects();
    checker.check_aspect_tree();
    checker.check_impact_attachment();
    checker.check_grading_keys();
    checker.violations.sort_by(|a, b| {
        (a.node.as_str(), a.rule, a.message.as_str()).cmp(&(
            b.node.as_str(),
            b.rule,
            b.message.as_str(),
        ))
    });
    checker.violations.dedup();
    ValidationReport {
        violations: checker.violations,
    }
}

impl<'a, S: Scalar> Checker<'a, S> {
    fn push(&mut self, rule: &'static str, node: &str, message: String) {
        self.violations.push(Violation {
            rule,
            node: node.to_string(),
            message,
        });
    }

    fn check_duplicate_ids(&mut self) {
        let mut owners: BTreeMap<&str, Vec<&'static str>> = BTreeMap::new();
        for e in &self.model.entities {
            owners.entry(&e.id).or_default().push("entity");
        }
        for m in &self.model.measures {
            owners.entry(&m.id).or_default().push("measure");
        }
        for f in &self.model.factors {
            owners.entry(&f.id).or_default().push("factor");
        }
        for i in &self.model.impacts {
            owners.entry(&i.id).or_default().push("impact");
        }
        for a in self.model.all_aspects() {
            owners.entry(&a.id).or_default().push("aspect");
        }
        for (id, kinds) in owners {
            if kinds.len() > 1 {
                self.push(
                    "duplicate-id",
                    id,
                    format!("id declared {} times ({})", kinds.len(), kinds.join(", ")),
                );
            }
        }
    }

    fn check_measures(&mut self) {
        for measure in &self.model.measures {
            match (measure.kind, &measure.expression) {
                (MeasureKind::Base, Some(_)) => self.push(
                    "measure-expression",
                    &measure.id,
                    "base measure must not carry an expression".into(),
                ),
                (MeasureKind::Derived, None) => self.push(
                    "measure-expression",
                    &measure.id,
                    "derived measure requires an expression".into(),
                ),
                (MeasureKind::Derived, Some(expr)) => {
                    for referenced in expr.measure_refs() {
                        if !self.index.measures.contains_key(referenced) {
                            self.push(
                                "dangling-reference",
                                &measure.id,
                                format!("expression references unknown measure `{referenced}`"),
                            );
                        }
                    }
                }
                (MeasureKind::Base, None) => {}
            }
        }
        self.check_derived_cycles();
    }

    fn check_derived_cycles(&mut self) {
        // Tri-color DFS over the derived-measure reference graph.
        #[derive(PartialEq, Clone, Copy)]
        enum State {
            Visiting,
            Done,
        }
        let mut states: BTreeMap<&str, State> = BTreeMap::new();
        let mut cycles: BTreeSet<String> = BTreeSet::new();

        fn visit<'m, S: Scalar>(
            id: &'m str,
            index: &crate::model::ModelIndex<'m, S>,
            states: &mut BTreeMap<&'m str, State>,
            stack: &mut Vec<&'m str>,
            cycles: &mut BTreeSet<String>,
        ) {
            match states.get(id) {
                Some(State::Done) => return,
                Some(State::Visiting) => {
                    let start = stack.iter().position(|n| n == &id).unwrap_or(0);
                    let mut path: Vec<&str> = stack[start..].to_vec();
                    path.push(id);
                    cycles.insert(path.join(" -> "));
                    return;
                }
                None => {}
            }
            let Some(measure) = index.measures.get(id) else {
                return;
            };
            if measure.kind != MeasureKind::Derived {
                states.insert(id, State::Done);
                return;
            }
            states.insert(id, State::Visiting);
            stack.push(id);
            if let Some(expr) = &measure.expression {
                for referenced in expr.measure_refs() {
                    if let Some((key, _)) = index.measures.get_key_value(referenced) {
                        visit(key, index, states, stack, cycles);
                    }
                }
            }
            stack.pop();
            states.insert(id, State::Done);
        }

        for measure in &self.model.measures {
            if measure.kind == MeasureKind::Derived {
                let mut stack = Vec::new();
                visit(
                    measure.id.as_str(),
                    &self.index,
                    &mut states,
                    &mut stack,
                    &mut cycles,
                );
            }
        }
        for cycle in cycles {
            let node = cycle.split(" -> ").next().unwrap_or("").to_string();
            self.push(
                "derived-cycle",
                &node,
                format!("cycle in derived measures: {cycle}"),
            );
        }
    }

    fn check_factors(&mut self) {
        for factor in &self.model.factors {
            if !self.index.entities.contains_key(factor.entity.as_str()) {
                self.push(
                    "dangling-reference",
                    &factor.id,
                    format!("references unknown entity `{}`", factor.entity),
                );
            }
            if factor.measures.is_empty() {
                self.push(
                    "factor-kind",
                    &factor.id,
                    "factor must reference at least one measure".into(),
                );
                continue;
            }
            let mut resolved = true;
            for measure_id in &factor.measures {
                if !self.index.measures.contains_key(measure_id.as_str()) {
                    self.push(
                        "dangling-reference",
                        &factor.id,
                        format!("references unknown measure `{measure_id}`"),
                    );
                    resolved = false;
                }
            }
            let n = factor.measures.len();
            match factor.kind {
                FactorKind::SingleMeasure => {
                    if n != 1 {
                        self.push(
                            "factor-kind",
                            &factor.id,
                            format!("single-measure factor must reference exactly one measure, found {n}"),
                        );
                    } else if resolved {
                        let m = self.index.measures[factor.measures[0].as_str()];
                        if m.kind == MeasureKind::Derived {
                            self.push(
                                "factor-kind",
                                &factor.id,
                                format!(
                                    "single-measure factor references derived measure `{}`; declare it derived-measure",
                                    m.id
                                ),
                            );
                        }
                    }
                }
                FactorKind::DerivedMeasure => {
                    if n != 1 {
                        self.push(
                            "factor-kind",
                            &factor.id,
                            format!("derived-measure factor must reference exactly one measure, found {n}"),
                        );
                    } else if resolved {
                        let m = self.index.measures[factor.measures[0].as_str()];
                        if m.kind != MeasureKind::Derived {
                            self.push(
                                "factor-kind",
                                &factor.id,
                                format!(
                                    "derived-measure factor references base measure `{}`",
                                    m.id
                                ),
                            );
                        }
                    }
                }
                FactorKind::Abstract => {
                    if n < 2 {
                        self.push(
                            "factor-kind",
                            &factor.id,
                            format!(
                                "abstract factor must reference at least two measures, found {n}"
                            ),
                        );
                    }
                }
            }
        }
    }

    fn check_threshold(&mut self, node: &str, target: &str, spec: &NormalizationSpec<S>) {
        if !(spec.threshold > S::zero() && spec.threshold.is_finite()) {
            self.push(
                "normalization-threshold",
                node,
                format!(
                    "acceptance threshold for {target} must be a positive finite number, found {}",
                    spec.threshold
                ),
            );
        }
    }

    fn check_weight_values(&mut self, rule_node: &str, label: &str, weights: &BTreeMap<String, S>) {
        let mut sum = S::zero();
        for (child, w) in weights {
            sum = sum + *w;
            if !(*w >= S::zero() && *w <= S::one()) {
                self.push(
                    "weight-range",
                    rule_node,
                    format!("{label} weight {w} for `{child}` outside [0,1]"),
                );
            }
        }
        if !weights.is_empty() && (sum - S::one()).abs() > weight_sum_tolerance::<S>() {
            self.push(
                "weight-sum",
                rule_node,
                format!("{label} weights must sum to 1, found {sum}"),
            );
        }
    }

    fn check_impacts(&mut self) {
        for impact in &self.model.impacts {
            if !self.index.aspects.contains_key(impact.aspect.as_str()) {
                self.push(
                    "dangling-reference",
                    &impact.id,
                    format!("references unknown aspect `{}`", impact.aspect),
                );
            }
            let Some(factor) = self.index.factors.get(impact.factor.as_str()).copied() else {
                self.push(
                    "dangling-reference",
                    &impact.id,
                    format!("references unknown factor `{}`", impact.factor),
                );
                continue;
            };
            let factor_measures: BTreeSet<&str> =
                factor.measures.iter().map(String::as_str).collect();
            if factor.kind == FactorKind::Abstract {
                match &impact.measure_weights {
                    None => self.push(
                        "impact-measure-weights",
                        &impact.id,
                        format!(
                            "impact on abstract factor `{}` requires measureWeights",
                            factor.id
                        ),
                    ),
                    Some(weights) => {
                        let keys: BTreeSet<&str> = weights.keys().map(String::as_str).collect();
                        let missing: Vec<&&str> = factor_measures.difference(&keys).collect();
                        let extra: Vec<&&str> = keys.difference(&factor_measures).collect();
                        if !missing.is_empty() || !extra.is_empty() {
                            self.push(
                                "weight-keys",
                                &impact.id,
                                format!(
                                    "measureWeights keys must match the measures of factor `{}` (missing: [{}], extra: [{}])",
                                    factor.id,
                                    missing.iter().map(|s| **s).collect::<Vec<_>>().join(", "),
                                    extra.iter().map(|s| **s).collect::<Vec<_>>().join(", "),
                                ),
                            );
                        }
                        self.check_weight_values(&impact.id, "measure", weights);
                    }
                }
                match &impact.measure_normalizations {
                    None => self.push(
                        "impact-normalization",
                        &impact.id,
                        format!(
                            "impact on abstract factor `{}` requires measureNormalizations",
                            factor.id
                        ),
                    ),
                    Some(specs) => {
                        for measure_id in &factor.measures {
                            match specs.get(measure_id) {
                                None => self.push(
                                    "impact-normalization",
                                    &impact.id,
                                    format!("missing normalization for measure `{measure_id}`"),
                                ),
                                Some(spec) => {
                                    let target = format!("measure `{measure_id}`");
                                    self.check_threshold(&impact.id, &target, spec);
                                }
                            }
                        }
                        for key in specs.keys() {
                            if !factor_measures.contains(key.as_str()) {
                                self.push(
                                    "impact-normalization",
                                    &impact.id,
                                    format!(
                                        "normalization for `{key}` which is not a measure of factor `{}`",
                                        factor.id
                                    ),
                                );
                            }
                        }
                    }
                }
                if impact.normalization.is_some() {
                    self.push(
                        "impact-normalization",
                        &impact.id,
                        "factor-level normalization does not apply to an abstract factor; use measureNormalizations".into(),
                    );
                }
            } else {
                match &impact.normalization {
                    None => self.push(
                        "impact-normalization",
                        &impact.id,
                        format!(
                            "impact on measured factor `{}` requires a normalization spec",
                            factor.id
                        ),
                    ),
                    Some(spec) => {
                        let target = format!("factor `{}`", factor.id);
                        self.check_threshold(&impact.id, &target, spec);
                    }
                }
                if impact.measure_weights.is_some() {
                    self.push(
                        "impact-measure-weights",
                        &impact.id,
                        format!(
                            "measureWeights only apply to abstract factors; factor `{}` is measured",
                            factor.id
                        ),
                    );
                }
                if impact.measure_normalizations.is_some() {
                    self.push(
                        "impact-normalization",
                        &impact.id,
                        format!(
                            "measureNormalizations only apply to abstract factors; factor `{}` is measured",
                            factor.id
                        ),
                    );
                }
            }
        }
    }

    fn check_aspects(&mut self) {
        let aspects: Vec<&crate::model::QualityAspect<S>> = self.model.all_aspects().collect();
        for aspect in aspects {
            if aspect.children.is_empty() && aspect.impacts.is_empty() {
                self.push(
                    "empty-aspect",
                    &aspect.id,
                    "aspect has neither sub-aspects nor impacts".into(),
                );
            }
            for child in &aspect.children {
                if !self.index.aspects.contains_key(child.as_str()) {
                    match self.model.node_kind(child) {
                        None => self.push(
                            "dangling-reference",
                            &aspect.id,
                            format!("references unknown child aspect `{child}`"),
                        ),
                        Some(_) => self.push(
                            "aspect-tree",
                            &aspect.id,
                            format!("child `{child}` is not a quality aspect"),
                        ),
                    }
                }
            }
            for impact_id in &aspect.impacts {
                if !self.index.impacts.contains_key(impact_id.as_str()) {
                    match self.model.node_kind(impact_id) {
                        None => self.push(
                            "dangling-reference",
                            &aspect.id,
                            format!("references unknown impact `{impact_id}`"),
                        ),
                        Some(_) => self.push(
                            "impact-attachment",
                            &aspect.id,
                            format!("entry `{impact_id}` in impacts is not an impact"),
                        ),
                    }
                }
            }
            let expected: BTreeSet<&str> = aspect
                .children
                .iter()
                .chain(aspect.impacts.iter())
                .map(String::as_str)
                .collect();
            for key in aspect.child_weights.keys() {
                if expected.contains(key.as_str()) {
                    continue;
                }
                match self.model.node_kind(key) {
                    Some(crate::model::NodeKind::Factor) => self.push(
                        "applicability-weighting",
                        &aspect.id,
                        format!("weighting not applicable to factor `{key}`; factors connect through impacts"),
                    ),
                    Some(crate::model::NodeKind::Measure) => self.push(
                        "applicability-weighting",
                        &aspect.id,
                        format!("weighting not applicable to measure `{key}`"),
                    ),
                    Some(_) => self.push(
                        "weight-keys",
                        &aspect.id,
                        format!("weight for `{key}` which is not a child of this aspect"),
                    ),
                    None => self.push(
                        "dangling-reference",
                        &aspect.id,
                        format!("weight for unknown id `{key}`"),
                    ),
                }
            }
            for member in &expected {
                if !aspect.child_weights.contains_key(*member) {
                    self.push(
                        "weight-keys",
                        &aspect.id,
                        format!("missing weight for `{member}`"),
                    );
                }
            }
            self.check_weight_values(&aspect.id, "child", &aspect.child_weights);
        }
    }

    fn check_aspect_tree(&mut self) {
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for aspect in self.model.all_aspects() {
            for child in &aspect.children {
                if self.index.aspects.contains_key(child.as_str()) {
                    parents.entry(child.as_str()).or_default().push(&aspect.id);
                }
            }
        }
        if let Some(listers) = parents.get(self.model.root.id.as_str()) {
            let listers = listers.join(", ");
            self.push(
                "aspect-tree",
                &self.model.root.id,
                format!("root aspect must not be a child (listed by: {listers})"),
            );
        }
        for (child, listers) in &parents {
            if listers.len() > 1 {
                self.push(
                    "aspect-tree",
                    child,
                    format!("aspect has multiple parents ({})", listers.join(", ")),
                );
            }
        }
        // Reachability from the root catches both orphans and cycles.
        let mut reachable = BTreeSet::new();
        let mut queue = vec![self.model.root.id.as_str()];
        while let Some(id) = queue.pop() {
            if !reachable.insert(id) {
                continue;
            }
            if let Some(aspect) = self.index.aspects.get(id) {
                queue.extend(
                    aspect
                        .children
                        .iter()
                        .map(String::as_str)
                        .filter(|c| self.index.aspects.contains_key(*c)),
                );
            }
        }
        let unreachable: Vec<String> = self
            .model
            .aspects
            .iter()
            .filter(|a| !reachable.contains(a.id.as_str()))
            .map(|a| a.id.clone())
            .collect();
        for id in unreachable {
            self.push(
                "aspect-tree",
                &id,
                "aspect is not reachable from the root".into(),
            );
        }
    }

    fn check_impact_attachment(&mut self) {
        let mut listers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for aspect in self.model.all_aspects() {
            for impact_id in &aspect.impacts {
                if self.index.impacts.contains_key(impact_id.as_str()) {
                    listers
                        .entry(impact_id.as_str())
                        .or_default()
                        .push(&aspect.id);
                }
            }
        }
        for impact in &self.model.impacts {
            let listed_by = listers.get(impact.id.as_str()).cloned().unwrap_or_default();
            match listed_by.len() {
                0 => self.push(
                    "impact-attachment",
                    &impact.id,
                    "impact is not listed by any aspect".into(),
                ),
                1 => {
                    if listed_by[0] != impact.aspect {
                        self.push(
                            "impact-attachment",
                            &impact.id,
                            format!(
                                "impact declares aspect `{}` but is listed by `{}`",
                                impact.aspect, listed_by[0]
                            ),
                        );
                    }
                }
                _ => self.push(
                    "impact-attachment",
                    &impact.id,
                    format!(
                        "impact is listed by multiple aspects ({})",
                        listed_by.join(", ")
                    ),
                ),
            }
        }
    }

    fn check_grading_keys(&mut self) {
        if let Err(message) = self.model.default_grading_key.check() {
            self.push("grading-key", "model", message);
        }
        for aspect in self.model.all_aspects() {
            if let Some(key) = &aspect.grading_key {
                if let Err(message) = key.check() {
                    self.push("grading-key", &aspect.id, message);
                }
            }
        }
        for (id, key) in &self.model.measure_grading_keys {
            if !self.index.measures.contains_key(id.as_str()) {
                self.push(
                    "dangling-reference",
                    id,
                    "measure grading key for unknown measure".into(),
                );
            } else if let Err(message) = key.check() {
                self.push("grading-key", id, message);
            }
        }
    }
}
