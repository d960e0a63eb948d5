//! Plain-language factor descriptions: a lookup file first, an AST template
//! otherwise.

use std::collections::BTreeMap;
use std::path::Path;

use super::ast::{AlphaExpr, BinaryOp, FieldRef, TsKind, UnaryOp};
use super::library::AlphaRecord;
use super::parse::parse;

/// Canned descriptions keyed by normalized expression text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptionBook {
    entries: BTreeMap<String, String>,
}

impl DescriptionBook {
    /// Reads `expression<TAB>description` lines; `#` lines and blanks are
    /// skipped. Unparseable expressions are reported with their line number.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut book = Self::default();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (expr, desc) = raw
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected expression<TAB>description", i + 1))?;
            let ast = parse(expr).map_err(|e| format!("line {}: {e}", i + 1))?;
            book.insert(&ast, desc.trim());
        }
        Ok(book)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| format!("{}: {e}", path.as_ref().display()))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, expr: &AlphaExpr, description: &str) {
        self.entries.insert(lookup_key(expr), description.to_string());
    }

    pub fn get(&self, expr: &AlphaExpr) -> Option<&str> {
        self.entries.get(&lookup_key(expr)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Removes multiplications by the literal 1 so that `1 * x` and `x` share a
/// lookup entry.
pub fn strip_unit_scale(expr: &AlphaExpr) -> AlphaExpr {
    use AlphaExpr::*;
    match expr {
        Binary(BinaryOp::Mul, l, r) if **l == Literal(1.0) => strip_unit_scale(r),
        Binary(BinaryOp::Mul, l, r) if **r == Literal(1.0) => strip_unit_scale(l),
        Literal(_) | Field(_) => expr.clone(),
        Unary(op, e) => AlphaExpr::unary(*op, strip_unit_scale(e)),
        Binary(op, l, r) => AlphaExpr::binary(*op, strip_unit_scale(l), strip_unit_scale(r)),
        Rank(e) => AlphaExpr::rank(strip_unit_scale(e)),
        Ts { kind, expr, window } => AlphaExpr::ts(*kind, strip_unit_scale(expr), *window),
        Corr { left, right, window } => AlphaExpr::corr(strip_unit_scale(left), strip_unit_scale(right), *window),
    }
}

fn lookup_key(expr: &AlphaExpr) -> String {
    strip_unit_scale(expr).to_string()
}

/// Lookup text when the book has an entry, otherwise the rendered template.
pub fn describe(record: &AlphaRecord, book: &DescriptionBook) -> String {
    match book.get(&record.expression) {
        Some(d) => d.to_string(),
        None => template(&record.expression),
    }
}

/// Template rendering. Every operator node contributes exactly one phrase.
pub fn template(expr: &AlphaExpr) -> String {
    match expr {
        AlphaExpr::Literal(v) => format!("the constant {v}"),
        AlphaExpr::Field(f) => field_phrase(*f),
        AlphaExpr::Unary(op, e) => {
            let inner = template(e);
            match op {
                UnaryOp::Neg => format!("the negation of {inner}"),
                UnaryOp::Abs => format!("the absolute value of {inner}"),
                UnaryOp::Log => format!("the natural logarithm of {inner}"),
            }
        }
        AlphaExpr::Binary(op, l, r) => {
            let word = match op {
                BinaryOp::Add => "plus",
                BinaryOp::Sub => "minus",
                BinaryOp::Mul => "times",
                BinaryOp::Div => "divided by",
            };
            format!("({} {word} {})", template(l), template(r))
        }
        AlphaExpr::Rank(e) => format!("the cross-sectional rank of {}", template(e)),
        AlphaExpr::Ts { kind, expr, window: w } => {
            let inner = template(expr);
            match kind {
                TsKind::Min => format!("the {w}-day minimum of {inner}"),
                TsKind::Max => format!("the {w}-day maximum of {inner}"),
                TsKind::Rank => format!("the {w}-day time-series rank of {inner}"),
                TsKind::ArgMax => format!("the position of the highest value within the last {w} days of {inner}"),
                TsKind::ArgMin => format!("the position of the lowest value within the last {w} days of {inner}"),
                TsKind::Stddev => format!("the {w}-day standard deviation of {inner}"),
                TsKind::Sum => format!("the {w}-day rolling total of {inner}"),
                TsKind::Mean => format!("the {w}-day average of {inner}"),
                TsKind::Delta => format!("the {w}-day change in {inner}"),
                TsKind::DecayLinear => format!("the {w}-day linearly decayed average of {inner}"),
            }
        }
        AlphaExpr::Corr { left, right, window } => {
            format!("the {window}-day correlation between {} and {}", template(left), template(right))
        }
    }
}

fn field_phrase(f: FieldRef) -> String {
    match f {
        FieldRef::Open => "the daily opening price".into(),
        FieldRef::High => "the daily high price".into(),
        FieldRef::Low => "the daily low price".into(),
        FieldRef::Close => "the daily closing price".into(),
        FieldRef::Volume => "the daily trading volume".into(),
        FieldRef::Vwap => "the approximate daily VWAP".into(),
        FieldRef::Adv(n) => format!("the {n}-day mean daily volume"),
    }
}

/// Phrase that marks each operator kind in [`template`] output.
pub fn operator_marker(expr: &AlphaExpr) -> Option<&'static str> {
    Some(match expr {
        AlphaExpr::Literal(_) | AlphaExpr::Field(_) => return None,
        AlphaExpr::Unary(UnaryOp::Neg, _) => "negation of",
        AlphaExpr::Unary(UnaryOp::Abs, _) => "absolute value of",
        AlphaExpr::Unary(UnaryOp::Log, _) => "natural logarithm of",
        AlphaExpr::Binary(BinaryOp::Add, ..) => " plus ",
        AlphaExpr::Binary(BinaryOp::Sub, ..) => " minus ",
        AlphaExpr::Binary(BinaryOp::Mul, ..) => " times ",
        AlphaExpr::Binary(BinaryOp::Div, ..) => " divided by ",
        AlphaExpr::Rank(_) => "cross-sectional rank of",
        AlphaExpr::Ts { kind, .. } => match kind {
            TsKind::Min => "-day minimum of",
            TsKind::Max => "-day maximum of",
            TsKind::Rank => "time-series rank of",
            TsKind::ArgMax => "position of the highest value within",
            TsKind::ArgMin => "position of the lowest value within",
            TsKind::Stddev => "standard deviation of",
            TsKind::Sum => "rolling total of",
            TsKind::Mean => "-day average of",
            TsKind::Delta => "-day change in",
            TsKind::DecayLinear => "linearly decayed average of",
        },
        AlphaExpr::Corr { .. } => "correlation between",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn close_base_case() {
        assert_eq!(template(&parse("close").unwrap()), "the daily closing price");
    }

    #[test]
    fn unit_scale_shares_entry() {
        let mut book = DescriptionBook::default();
        book.insert(&parse("ts_rank(stddev(high, 10), 5)").unwrap(), "x");
        assert_eq!(book.get(&parse("1 * ts_rank(stddev(high, 10), 5)").unwrap()), Some("x"));
        assert_eq!(book.get(&parse("2 * ts_rank(stddev(high, 10), 5)").unwrap()), None);
    }

    #[test]
    fn markers_counted_per_node() {
        let e = parse("rank(ts_argmax(corr(ts_rank(close, 10), ts_rank(volume, 10), 10), 5)) - log(abs(delta(vwap, 3)))")
            .unwrap();
        let text = template(&e);
        let mut expected: BTreeMap<&str, usize> = BTreeMap::new();
        e.walk(&mut |n| {
            if let Some(m) = operator_marker(n) {
                *expected.entry(m).or_default() += 1;
            }
        });
        for (m, n) in expected {
            assert_eq!(text.matches(m).count(), n, "{m} in {text}");
        }
    }
}
