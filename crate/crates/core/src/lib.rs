//! Kurzweil-Stieltjes integration `∫ [df] g` of regulated functions over
//! elementary sets, with an exact closed-form engine for piecewise
//! polynomials, a gauge-refinement oracle, tools for sequences of
//! integrands and Harnack-type extension over closed sets.

pub mod error;
pub mod expr;
pub mod functions;
pub mod harnack;
pub mod integrator;
pub mod interval_sets;
pub mod literal;
pub mod partitions;
pub mod poly;
pub mod random;
pub mod scalar;
pub mod sequences;

pub use error::{Error, ParseError, Result};
pub use expr::Expr;
pub use functions::{FunctionBuilder, Piece, PieceSpec, PiecewiseFunction, Side, Variation};
pub use harnack::{ClosedSetDescription, Grouping, HarnackReport};
pub use integrator::{Engine, IntegralResult, IntervalKind, Method, OracleConfig};
pub use interval_sets::{ElementarySet, Interval};
pub use partitions::{DeltaFineSystem, Gauge, TaggedPartition};
pub use poly::Poly;
pub use scalar::{Rational, Scalar};
pub use sequences::FunctionSequence;
