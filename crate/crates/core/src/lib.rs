//! Robust D-stability of polynomial matrix families.
//!
//! A family assigns each cell of an `n x n` matrix either a polytope of
//! polynomials (convex hull of vertices) or an interval polynomial. The
//! family is robustly stable when every member's determinant has all roots in
//! a region `D`. [`stab::analyze_family`] and [`stab::analyze_interval`] decide
//! this by checking a finite set of low-dimensional edge configurations;
//! [`oracle::sample_family`] samples members for cross-checks.

pub mod det;
pub mod edges;
pub mod error;
pub mod family;
pub mod oracle;
pub mod poly;
pub mod region;
pub mod stab;

pub use det::{ParametricDeterminant, PolyMatrix};
pub use edges::{count_configs, enumerate_configs, ConfigEnumerator, EdgeConfiguration};
pub use error::{Error, Result};
pub use family::{Entry, FamilyMode, IntervalEntry, MatrixFamily, PolytopeEntry};
pub use poly::{ComplexValue, Polynomial};
pub use region::Region;
