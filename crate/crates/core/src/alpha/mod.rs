//! Factor expression language: parsing, evaluation over a panel, factor
//! libraries, score combination and descriptions.

mod ast;
pub mod combine;
pub mod describe;
mod eval;
pub mod library;
mod parse;

pub use ast::{AlphaExpr, BinaryOp, FieldRef, TsKind, UnaryOp, CORR_MIN_WINDOW};
pub use combine::{top_k_contributors, zscore, CombineOutput, FactorCombiner, LinearZScoreCombiner};
pub use describe::{describe, DescriptionBook};
pub use eval::{cross_sectional_rank, evaluate, evaluate_series, EvalError, Grid};
pub use library::{
    build_factor_matrix, load_library, parse_library, AlphaId, AlphaRecord, FactorMatrix, FactorSlice, LibraryError,
};
pub use parse::{parse, ParseError};
