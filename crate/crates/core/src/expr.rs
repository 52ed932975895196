use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ingest::MeasurementDataset;
use crate::scalar::Scalar;

/// Arithmetic expression over measure ids: `+ - * /`, parentheses,
/// decimal literals. Derived measures are defined with these.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpressionAst<S: Scalar> {
    MeasureRef(String),
    Literal(S),
    BinaryOp {
        op: BinaryOp,
        left: Box<ExpressionAst<S>>,
        right: Box<ExpressionAst<S>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprEvalError {
    #[error("measure `{id}` has no value in the dataset")]
    MissingMeasure { id: String },
    #[error("division by zero in `{expr}`")]
    DivisionByZero { expr: String },
    #[error("expression `{expr}` produced a non-finite value")]
    NonFinite { expr: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<S> {
    Ident(String),
    Num(S),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

/// Positions are 1-based character offsets; end-of-input reports len+1.
fn tokenize<S: Scalar>(text: &str) -> Result<Vec<(usize, Tok<S>)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((pos, Tok::Plus));
                i += 1;
            }
            '-' => {
                toks.push((pos, Tok::Minus));
                i += 1;
            }
            '*' => {
                toks.push((pos, Tok::Star));
                i += 1;
            }
            '/' => {
                toks.push((pos, Tok::Slash));
                i += 1;
            }
            '(' => {
                toks.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((pos, Tok::RParen));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                toks.push((pos, Tok::Ident(chars[start..i].iter().collect())));
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(ExprError::Syntax {
                            position: i + 1,
                            message: "expected digit after decimal point".into(),
                        });
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(ExprError::Syntax {
                            position: i + 1,
                            message: "expected digit in exponent".into(),
                        });
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let value: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    position: pos,
                    message: format!("invalid numeric literal `{lit}`"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        position: pos,
                        message: format!("numeric literal `{lit}` overflows"),
                    });
                }
                toks.push((
                    pos,
                    Tok::Num(S::from_f64(value).ok_or_else(|| ExprError::Syntax {
                        position: pos,
                        message: format!("numeric literal `{lit}` not representable"),
                    })?),
                ));
            }
            other => {
                return Err(ExprError::Syntax {
                    position: pos,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<S: Scalar> {
    toks: Vec<(usize, Tok<S>)>,
    cursor: usize,
    end: usize,
}

impl<S: Scalar> Parser<S> {
    fn peek(&self) -> Option<&(usize, Tok<S>)> {
        self.toks.get(self.cursor)
    }

    fn bump(&mut self) -> Option<(usize, Tok<S>)> {
        let t = self.toks.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn end_error(&self) -> ExprError {
        ExprError::Syntax {
            position: self.end,
            message: "unexpected end of expression".into(),
        }
    }

    // expr := term (("+"|"-") term)*
    fn expr(&mut self) -> Result<ExpressionAst<S>, ExprError> {
        let mut node = self.term()?;
        while let Some((_, tok)) = self.peek() {
            let op = match tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            node = ExpressionAst::BinaryOp {
                op,
                left: Box::new(node),
                right: Box::new(rhs),
            };
        }
        Ok(node)
    }

    // term := unary (("*"|"/") unary)*
    fn term(&mut self) -> Result<ExpressionAst<S>, ExprError> {
        let mut node = self.unary()?;
        while let Some((_, tok)) = self.peek() {
            let op = match tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            node = ExpressionAst::BinaryOp {
                op,
                left: Box::new(node),
                right: Box::new(rhs),
            };
        }
        Ok(node)
    }

    // unary := "-"? atom  (desugared: literal is negated in place,
    // anything else becomes 0 - atom, keeping the AST to three node kinds)
    fn unary(&mut self) -> Result<ExpressionAst<S>, ExprError> {
        if matches!(self.peek(), Some((_, Tok::Minus))) {
            self.bump();
            let inner = self.atom()?;
            return Ok(match inner {
                ExpressionAst::Literal(v) => ExpressionAst::Literal(-v),
                other => ExpressionAst::BinaryOp {
                    op: BinaryOp::Sub,
                    left: Box::new(ExpressionAst::Literal(S::zero())),
                    right: Box::new(other),
                },
            });
        }
        self.atom()
    }

    // atom := number | identifier | "(" expr ")"
    fn atom(&mut self) -> Result<ExpressionAst<S>, ExprError> {
        match self.bump() {
            None => Err(self.end_error()),
            Some((_, Tok::Num(v))) => Ok(ExpressionAst::Literal(v)),
            Some((_, Tok::Ident(id))) => Ok(ExpressionAst::MeasureRef(id)),
            Some((_, Tok::LParen)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    Some((pos, _)) => Err(ExprError::Syntax {
                        position: pos,
                        message: "expected `)`".into(),
                    }),
                    None => Err(self.end_error()),
                }
            }
            Some((pos, tok)) => Err(ExprError::Syntax {
                position: pos,
                message: format!("unexpected token `{}`", tok_text(&tok)),
            }),
        }
    }
}

fn tok_text<S: Scalar>(tok: &Tok<S>) -> String {
    match tok {
        Tok::Ident(s) => s.clone(),
        Tok::Num(v) => format!("{v}"),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
    }
}

pub fn parse_expression<S: Scalar>(text: &str) -> Result<ExpressionAst<S>, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let end = text.chars().count() + 1;
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        cursor: 0,
        end,
    };
    let ast = p.expr()?;
    if let Some((pos, tok)) = p.peek() {
        return Err(ExprError::Syntax {
            position: *pos,
            message: format!("unexpected token `{}` after expression", tok_text(tok)),
        });
    }
    Ok(ast)
}

/// Prints with the minimal parentheses needed so that
/// `parse_expression(print) == ast`.
pub fn print_expression<S: Scalar>(ast: &ExpressionAst<S>) -> String {
    fn prec(op: BinaryOp) -> u8 {
        match op {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }
    fn go<S: Scalar>(ast: &ExpressionAst<S>, out: &mut String) {
        match ast {
            ExpressionAst::MeasureRef(id) => out.push_str(id),
            ExpressionAst::Literal(v) => {
                if *v < S::zero() {
                    // leading minus binds like unary negation of the magnitude
                    out.push('-');
                    out.push_str(&format_scalar(-*v));
                } else {
                    out.push_str(&format_scalar(*v));
                }
            }
            ExpressionAst::BinaryOp { op, left, right } => {
                let p = prec(*op);
                wrap(left, child_needs_parens_left(*op, left, p), out);
                out.push(' ');
                out.push(op.symbol());
                out.push(' ');
                wrap(right, child_needs_parens_right(*op, right, p), out);
            }
        }
    }
    fn child_needs_parens_left<S: Scalar>(_op: BinaryOp, child: &ExpressionAst<S>, p: u8) -> bool {
        match child {
            ExpressionAst::BinaryOp { op: c, .. } => prec(*c) < p,
            ExpressionAst::Literal(v) => *v < S::zero(),
            _ => false,
        }
    }
    fn child_needs_parens_right<S: Scalar>(op: BinaryOp, child: &ExpressionAst<S>, p: u8) -> bool {
        match child {
            // left associativity: a - (b + c) and a / (b * c) need parens
            ExpressionAst::BinaryOp { op: c, .. } => {
                prec(*c) < p || (prec(*c) == p && matches!(op, BinaryOp::Sub | BinaryOp::Div))
            }
            ExpressionAst::Literal(v) => *v < S::zero(),
            _ => false,
        }
    }
    fn wrap<S: Scalar>(ast: &ExpressionAst<S>, parens: bool, out: &mut String) {
        if parens {
            out.push('(');
            go(ast, out);
            out.push(')');
        } else {
            go(ast, out);
        }
    }
    let mut out = String::new();
    go(ast, &mut out);
    out
}

fn format_scalar<S: Scalar>(v: S) -> String {
    // Shortest round-trip form via serde_json keeps printed literals exact;
    // integral values drop the ".0" so reprinted models stay terse.
    let text = serde_json::to_string(&v).unwrap_or_else(|_| format!("{v}"));
    match text.strip_suffix(".0") {
        Some(trimmed) => trimmed.to_string(),
        None => text,
    }
}

impl<S: Scalar> fmt::Display for ExpressionAst<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expression(self))
    }
}

impl<S: Scalar> ExpressionAst<S> {
    /// Ids of all measures the expression reads, deduplicated and sorted.
    pub fn measure_refs(&self) -> std::collections::BTreeSet<&str> {
        let mut refs = std::collections::BTreeSet::new();
        self.collect_refs(&mut refs);
        refs
    }

    fn collect_refs<'a>(&'a self, refs: &mut std::collections::BTreeSet<&'a str>) {
        match self {
            ExpressionAst::MeasureRef(id) => {
                refs.insert(id.as_str());
            }
            ExpressionAst::Literal(_) => {}
            ExpressionAst::BinaryOp { left, right, .. } => {
                left.collect_refs(refs);
                right.collect_refs(refs);
            }
        }
    }
}

/// Evaluates against the dataset. Every referenced measure must have a
/// value; division by zero and non-finite intermediates are errors, never
/// NaN/infinity results.
pub fn eval_expression<S: Scalar>(
    ast: &ExpressionAst<S>,
    data: &MeasurementDataset<S>,
) -> Result<S, ExprEvalError> {
    match ast {
        ExpressionAst::MeasureRef(id) => data
            .values
            .get(id)
            .copied()
            .ok_or_else(|| ExprEvalError::MissingMeasure { id: id.clone() }),
        ExpressionAst::Literal(v) => Ok(*v),
        ExpressionAst::BinaryOp { op, left, right } => {
            let l = eval_expression(left, data)?;
            let r = eval_expression(right, data)?;
            let value = match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => {
                    if r == S::zero() {
                        return Err(ExprEvalError::DivisionByZero {
                            expr: print_expression(ast),
                        });
                    }
                    l / r
                }
            };
            if !value.is_finite() {
                return Err(ExprEvalError::NonFinite {
                    expr: print_expression(ast),
                });
            }
            Ok(value)
        }
    }
}

impl<S: Scalar> Serialize for ExpressionAst<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_str(&print_expression(self))
    }
}

impl<'de, S: Scalar> Deserialize<'de> for ExpressionAst<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(|e| D::Error::custom(format!("expression: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn dataset(pairs: &[(&str, f64)]) -> MeasurementDataset<f64> {
        MeasurementDataset {
            subject: "t".into(),
            values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            provenance: BTreeMap::new(),
        }
    }

    #[test]
    fn parses_ratio_of_measures() {
        let ast = parse_expression::<f64>("M3 / M4").unwrap();
        assert_eq!(
            ast,
            ExpressionAst::BinaryOp {
                op: BinaryOp::Div,
                left: Box::new(ExpressionAst::MeasureRef("M3".into())),
                right: Box::new(ExpressionAst::MeasureRef("M4".into())),
            }
        );
    }

    #[test]
    fn parentheses_override_precedence() {
        let ast = parse_expression::<f64>("(M1 + M2) * 0.5").unwrap();
        assert_eq!(
            ast,
            ExpressionAst::BinaryOp {
                op: BinaryOp::Mul,
                left: Box::new(ExpressionAst::BinaryOp {
                    op: BinaryOp::Add,
                    left: Box::new(ExpressionAst::MeasureRef("M1".into())),
                    right: Box::new(ExpressionAst::MeasureRef("M2".into())),
                }),
                right: Box::new(ExpressionAst::Literal(0.5)),
            }
        );
    }

    #[test]
    fn precedence_without_parentheses() {
        // M1 + M2 * 2 groups as M1 + (M2 * 2)
        let ast = parse_expression::<f64>("M1 + M2 * 2").unwrap();
        match ast {
            ExpressionAst::BinaryOp {
                op: BinaryOp::Add,
                right,
                ..
            } => assert!(matches!(
                *right,
                ExpressionAst::BinaryOp {
                    op: BinaryOp::Mul,
                    ..
                }
            )),
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn left_associativity() {
        // 8 - 2 - 1 = 5, not 7
        let ast = parse_expression::<f64>("8 - 2 - 1").unwrap();
        let v = eval_expression(&ast, &dataset(&[])).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn incomplete_expression_reports_end_position() {
        let err = parse_expression::<f64>("M1 +").unwrap_err();
        assert_eq!(
            err,
            ExprError::Syntax {
                position: 5,
                message: "unexpected end of expression".into(),
            }
        );
    }

    #[test]
    fn empty_input_is_a_distinct_error() {
        assert_eq!(parse_expression::<f64>("").unwrap_err(), ExprError::Empty);
        assert_eq!(
            parse_expression::<f64>("   ").unwrap_err(),
            ExprError::Empty
        );
    }

    #[test]
    fn stray_token_after_expression_is_rejected() {
        let err = parse_expression::<f64>("M1 M2").unwrap_err();
        assert!(
            matches!(err, ExprError::Syntax { position: 4, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn unary_minus_on_literal_and_ref() {
        let ast = parse_expression::<f64>("-2 + M1").unwrap();
        let v = eval_expression(&ast, &dataset(&[("M1", 5.0)])).unwrap();
        assert_eq!(v, 3.0);
        let ast = parse_expression::<f64>("-M1").unwrap();
        let v = eval_expression(&ast, &dataset(&[("M1", 5.0)])).unwrap();
        assert_eq!(v, -5.0);
    }

    #[test]
    fn eval_matches_worked_ratios() {
        let ast = parse_expression::<f64>("M3 / M4").unwrap();
        let data = dataset(&[("M3", 500.0), ("M4", 1000.0)]);
        assert_eq!(eval_expression(&ast, &data).unwrap(), 0.5);

        let ast = parse_expression::<f64>("M5 / M4").unwrap();
        let data = dataset(&[("M5", 10.0), ("M4", 1000.0)]);
        assert_eq!(eval_expression(&ast, &data).unwrap(), 0.01);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let ast = parse_expression::<f64>("M1 / M2").unwrap();
        let data = dataset(&[("M1", 1.0), ("M2", 0.0)]);
        assert_eq!(
            eval_expression(&ast, &data).unwrap_err(),
            ExprEvalError::DivisionByZero {
                expr: "M1 / M2".into()
            }
        );
    }

    #[test]
    fn missing_measure_names_the_id() {
        let ast = parse_expression::<f64>("M1 + M9").unwrap();
        let data = dataset(&[("M1", 1.0)]);
        assert_eq!(
            eval_expression(&ast, &data).unwrap_err(),
            ExprEvalError::MissingMeasure { id: "M9".into() }
        );
    }

    #[test]
    fn print_parse_identity_on_samples() {
        for text in [
            "M3 / M4",
            "(M1 + M2) * 0.5",
            "M1 - (M2 - M3)",
            "M1 / (M2 * M3)",
            "1.5e3 * M1",
            "-M1 + 2",
            "M1.sub / M2",
        ] {
            let ast = parse_expression::<f64>(text).unwrap();
            let printed = print_expression(&ast);
            let reparsed = parse_expression::<f64>(&printed).unwrap();
            assert_eq!(ast, reparsed, "text={text:?} printed={printed:?}");
        }
    }

    #[test]
    fn measure_refs_are_sorted_and_deduplicated() {
        let ast = parse_expression::<f64>("M4 + M1 * M4 - M2").unwrap();
        let refs: Vec<&str> = ast.measure_refs().into_iter().collect();
        assert_eq!(refs, vec!["M1", "M2", "M4"]);
    }

    #[test]
    fn serde_round_trip_as_string() {
        let ast = parse_expression::<f64>("M3 / M4").unwrap();
        let json = serde_json::to_string(&ast).unwrap();
        assert_eq!(json, "\"M3 / M4\"");
        let back: ExpressionAst<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ast);
    }
}
