use std::fmt;

use crate::market::Field;

/// Leaf inputs read straight from the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRef {
    Open,
    High,
    Low,
    Close,
    Volume,
    /// (high + low + close) / 3 on daily bars.
    Vwap,
    /// Trailing N-day mean volume.
    Adv(usize),
}

impl FieldRef {
    pub fn name(self) -> String {
        match self {
            FieldRef::Open => "open".into(),
            FieldRef::High => "high".into(),
            FieldRef::Low => "low".into(),
            FieldRef::Close => "close".into(),
            FieldRef::Volume => "volume".into(),
            FieldRef::Vwap => "vwap".into(),
            FieldRef::Adv(n) => format!("adv({n})"),
        }
    }

    pub(crate) fn bar_field(self) -> Option<Field> {
        Some(match self {
            FieldRef::Open => Field::Open,
            FieldRef::High => Field::High,
            FieldRef::Low => Field::Low,
            FieldRef::Close => Field::Close,
            FieldRef::Volume => Field::Volume,
            FieldRef::Vwap => Field::Vwap,
            FieldRef::Adv(_) => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Trailing-window operators applied per ticker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TsKind {
    Min,
    Max,
    Rank,
    ArgMax,
    ArgMin,
    Stddev,
    Sum,
    Mean,
    Delta,
    DecayLinear,
}

impl TsKind {
    pub const ALL: [TsKind; 10] = [
        TsKind::Min,
        TsKind::Max,
        TsKind::Rank,
        TsKind::ArgMax,
        TsKind::ArgMin,
        TsKind::Stddev,
        TsKind::Sum,
        TsKind::Mean,
        TsKind::Delta,
        TsKind::DecayLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TsKind::Min => "ts_min",
            TsKind::Max => "ts_max",
            TsKind::Rank => "ts_rank",
            TsKind::ArgMax => "ts_argmax",
            TsKind::ArgMin => "ts_argmin",
            TsKind::Stddev => "stddev",
            TsKind::Sum => "sum",
            TsKind::Mean => "mean",
            TsKind::Delta => "delta",
            TsKind::DecayLinear => "decay_linear",
        }
    }

    pub fn min_window(self) -> usize {
        match self {
            TsKind::Stddev => 2,
            _ => 1,
        }
    }
}

/// Minimum window accepted by `corr`.
pub const CORR_MIN_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaExpr {
    Literal(f64),
    Field(FieldRef),
    Unary(UnaryOp, Box<AlphaExpr>),
    Binary(BinaryOp, Box<AlphaExpr>, Box<AlphaExpr>),
    Rank(Box<AlphaExpr>),
    Ts { kind: TsKind, expr: Box<AlphaExpr>, window: usize },
    Corr { left: Box<AlphaExpr>, right: Box<AlphaExpr>, window: usize },
}

impl AlphaExpr {
    pub fn field(f: FieldRef) -> Self {
        AlphaExpr::Field(f)
    }

    pub fn unary(op: UnaryOp, e: AlphaExpr) -> Self {
        AlphaExpr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: AlphaExpr, r: AlphaExpr) -> Self {
        AlphaExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn rank(e: AlphaExpr) -> Self {
        AlphaExpr::Rank(Box::new(e))
    }

    pub fn ts(kind: TsKind, e: AlphaExpr, window: usize) -> Self {
        AlphaExpr::Ts { kind, expr: Box::new(e), window }
    }

    pub fn corr(l: AlphaExpr, r: AlphaExpr, window: usize) -> Self {
        AlphaExpr::Corr { left: Box::new(l), right: Box::new(r), window }
    }

    /// Operator nesting depth; leaves have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            AlphaExpr::Literal(_) | AlphaExpr::Field(_) => 0,
            AlphaExpr::Unary(_, e) | AlphaExpr::Rank(e) | AlphaExpr::Ts { expr: e, .. } => 1 + e.depth(),
            AlphaExpr::Binary(_, l, r) | AlphaExpr::Corr { left: l, right: r, .. } => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    /// Number of trading days (including the evaluation day) needed to
    /// produce a value.
    pub fn lookback(&self) -> usize {
        match self {
            AlphaExpr::Literal(_) => 1,
            AlphaExpr::Field(FieldRef::Adv(n)) => *n,
            AlphaExpr::Field(_) => 1,
            AlphaExpr::Unary(_, e) | AlphaExpr::Rank(e) => e.lookback(),
            AlphaExpr::Binary(_, l, r) => l.lookback().max(r.lookback()),
            AlphaExpr::Ts { kind: TsKind::Delta, expr, window } => expr.lookback() + window,
            AlphaExpr::Ts { expr, window, .. } => expr.lookback() + window - 1,
            AlphaExpr::Corr { left, right, window } => left.lookback().max(right.lookback()) + window - 1,
        }
    }

    /// Pre-order walk over every node.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a AlphaExpr)) {
        visit(self);
        match self {
            AlphaExpr::Literal(_) | AlphaExpr::Field(_) => {}
            AlphaExpr::Unary(_, e) | AlphaExpr::Rank(e) | AlphaExpr::Ts { expr: e, .. } => e.walk(visit),
            AlphaExpr::Binary(_, l, r) | AlphaExpr::Corr { left: l, right: r, .. } => {
                l.walk(visit);
                r.walk(visit);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

/// Canonical, fully parenthesised form. Parsing the output yields an equal AST.
impl fmt::Display for AlphaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaExpr::Literal(v) => write!(f, "{v}"),
            AlphaExpr::Field(r) => f.write_str(&r.name()),
            AlphaExpr::Unary(UnaryOp::Neg, e) => write!(f, "-({e})"),
            AlphaExpr::Unary(UnaryOp::Abs, e) => write!(f, "abs({e})"),
            AlphaExpr::Unary(UnaryOp::Log, e) => write!(f, "log({e})"),
            AlphaExpr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            AlphaExpr::Rank(e) => write!(f, "rank({e})"),
            AlphaExpr::Ts { kind, expr, window } => write!(f, "{}({expr}, {window})", kind.name()),
            AlphaExpr::Corr { left, right, window } => write!(f, "corr({left}, {right}, {window})"),
        }
    }
}
