//! Sectional operators on `so(g)` for an indefinite symmetric form `g`.
//!
//! A sectional operator is a trace-symmetric map `R: so(g) -> so(g)` with
//! `[R(X), A] = [X, B]` for fixed `g`-symmetric `A`, `B`. The crate builds and
//! checks them ([`sectional`]), integrates the Euler equation they define
//! ([`flow`]), realizes formal curvature tensors by explicit metrics
//! ([`holonomy`]), and tests projectively equivalent metric pairs
//! ([`projective`]). [`scenario`] drives all of it from JSON.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod holonomy;
pub mod jet;
pub mod jordan;
pub mod linalg;
pub mod poly;
pub mod projective;
pub mod random;
pub mod scenario;
pub mod sectional;

pub use error::{Error, Result};
pub use geometry::MetricField;
pub use jordan::{JordanBlock, JordanSpec, RealizedJordan};
pub use linalg::{BilinearForm, MatrixOperator, Role, SoBasis};
pub use poly::MatrixPolynomial;
pub use scenario::{load_scenario, run, Kind, Report, Scenario};
pub use sectional::SectionalRep;
