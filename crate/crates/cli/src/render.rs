use std::fmt::Write as _;
use std::io::IsTerminal;

use qmeval_core::sensitivity::StabilityMargin;
use qmeval_core::{EvaluationResult, SensitivityReport};

/// Four significant digits, trailing zeros trimmed. Markdown only; JSON
/// keeps full precision.
pub fn sig4(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (3 - exponent).max(0) as usize;
    let text = format!("{v:.decimals$}");
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

fn color_enabled(to_terminal: bool) -> bool {
    to_terminal && std::env::var_os("QMEVAL_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn bold(text: &str, color: bool) -> String {
    if color {
        format!("\x1b[1m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn grade_cell(grade: u8, color: bool) -> String {
    if !color {
        return grade.to_string();
    }
    let code = match grade {
        1 | 2 => "32", // green
        3 | 4 => "33", // yellow
        _ => "31",     // red
    };
    format!("\x1b[{code}m{grade}\x1b[0m")
}

pub fn results_json(results: &[EvaluationResult]) -> String {
    if results.len() == 1 {
        results[0].to_json()
    } else {
        let mut text = serde_json::to_string_pretty(results).expect("result serialization");
        text.push('\n');
        text
    }
}

pub fn reports_json(reports: &[SensitivityReport]) -> String {
    if reports.len() == 1 {
        reports[0].to_json()
    } else {
        let mut text = serde_json::to_string_pretty(reports).expect("report serialization");
        text.push('\n');
        text
    }
}

pub fn results_markdown(results: &[EvaluationResult], to_terminal: bool) -> String {
    let color = color_enabled(to_terminal);
    let blocks: Vec<String> = results.iter().map(|r| result_markdown(r, color)).collect();
    blocks.join("\n---\n\n")
}

fn result_markdown(result: &EvaluationResult, color: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}",
        bold(&format!("# Quality evaluation: {}", result.subject), color)
    );
    let _ = writeln!(out, "\n- variant: {}", result.variant);

    let _ = writeln!(out, "\n{}\n", bold("## Grades", color));
    let _ = writeln!(out, "| node | value | grade |");
    let _ = writeln!(out, "|---|---:|---:|");
    for (node, grade) in &result.grades {
        let value = result
            .node_values
            .get(node)
            .map(|v| sig4(*v))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "| {node} | {value} | {} |", grade_cell(*grade, color));
    }

    let _ = writeln!(out, "\n{}\n", bold("## Factor values", color));
    if result.factor_values.is_empty() {
        let _ = writeln!(out, "(none)");
    } else {
        let _ = writeln!(out, "| factor | value |");
        let _ = writeln!(out, "|---|---:|");
        for (factor, value) in &result.factor_values {
            let _ = writeln!(out, "| {factor} | {} |", sig4(*value));
        }
    }

    let _ = writeln!(out, "\n{}\n", bold("## Trace", color));
    let _ = writeln!(out, "| node | kind | formula | value | grade |");
    let _ = writeln!(out, "|---|---|---|---:|---:|");
    for record in &result.trace {
        let value = record.value.map(sig4).unwrap_or_else(|| "-".into());
        let grade = record
            .grade
            .map(|g| g.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "| {} | {} | {} | {value} | {grade} |",
            record.node, record.kind, record.formula
        );
    }
    out
}

pub fn reports_markdown(reports: &[SensitivityReport], to_terminal: bool) -> String {
    let color = color_enabled(to_terminal);
    let blocks: Vec<String> = reports.iter().map(|r| report_markdown(r, color)).collect();
    blocks.join("\n---\n\n")
}

fn report_markdown(report: &SensitivityReport, color: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}",
        bold(&format!("# Sensitivity: {}", report.subject), color)
    );
    let _ = writeln!(out, "\n- variant: {}", report.baseline.variant);

    let _ = writeln!(out, "\n{}\n", bold("## Baseline grades", color));
    let _ = writeln!(out, "| node | value | grade |");
    let _ = writeln!(out, "|---|---:|---:|");
    for (node, grade) in &report.baseline.grades {
        let value = report
            .baseline
            .node_values
            .get(node)
            .map(|v| sig4(*v))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "| {node} | {value} | {} |", grade_cell(*grade, color));
    }

    let _ = writeln!(out, "\n{}\n", bold("## Perturbations", color));
    let _ = writeln!(out, "| target | delta | grade changes |");
    let _ = writeln!(out, "|---|---:|---|");
    for p in &report.perturbations {
        let changes = if p.changed.is_empty() {
            "none".to_string()
        } else {
            p.changed
                .iter()
                .map(|node| {
                    let before = report.baseline.grades.get(node).copied();
                    let after = p.resulting_grades.get(node).copied();
                    match (before, after) {
                        (Some(b), Some(a)) => format!("{node} {b}->{a}"),
                        _ => node.clone(),
                    }
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "| {} | {} | {changes} |", p.target, sig4(p.delta));
    }

    if !report.skipped.is_empty() {
        let _ = writeln!(out, "\n{}\n", bold("## Skipped grid points", color));
        let _ = writeln!(out, "| target | delta | reason |");
        let _ = writeln!(out, "|---|---:|---|");
        for s in &report.skipped {
            let _ = writeln!(out, "| {} | {} | {} |", s.target, sig4(s.delta), s.reason);
        }
    }

    let _ = writeln!(out, "\n{}\n", bold("## Stability margins", color));
    let _ = writeln!(out, "| node | smallest grade-changing delta |");
    let _ = writeln!(out, "|---|---:|");
    for (node, margin) in &report.stability_margin {
        let text = match margin {
            StabilityMargin::Margin(v) => sig4(*v),
            StabilityMargin::StableAtMaxTested => "stable at max tested".to_string(),
        };
        let _ = writeln!(out, "| {node} | {text} |");
    }

    let _ = writeln!(out, "\n{}\n", bold("## Boundary proximity", color));
    let _ = writeln!(out, "| node | distance to nearest boundary |");
    let _ = writeln!(out, "|---|---:|");
    for (node, distance) in &report.boundary_proximity {
        let _ = writeln!(out, "| {node} | {} |", sig4(*distance));
    }
    out
}
