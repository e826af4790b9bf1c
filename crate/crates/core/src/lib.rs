//! Numerical toolkit for finite metric measure spaces.
//!
//! The crate models a finite space as a distance matrix plus positive point
//! weights and provides, on top of that data:
//!
//! - generators and strict metric validation ([`space`]),
//! - exact quadratic optimal transport with Kantorovich potentials and
//!   displacement interpolation ([`transport`]),
//! - Rényi/Boltzmann entropy functionals and convexity verdicts along
//!   transport geodesics ([`curvature`]),
//! - slope fields, a graph Dirichlet form with its measure-valued Laplacian,
//!   heat flow and the gradient contraction diagnostic ([`calculus`]),
//! - Busemann fields from a supplied line, the induced translation flow, the
//!   quotient construction and the product-distance verification
//!   ([`splitting`]),
//! - file formats shared by the library and the CLI ([`formats`]).
//!
//! All operations are pure functions of immutable inputs; spaces, graphs and
//! fields can be shared freely across threads.

pub mod calculus;
pub mod curvature;
pub mod error;
pub mod formats;
pub(crate) mod par;
pub mod space;
pub mod splitting;
pub mod transport;

pub use error::{Error, Result};
pub use space::{
    bishop_gromov_profile, discrete_geodesic, generate_space, validate_space, DiscreteGeodesic,
    GeneratorSpec, MetricMeasureSpace, ValidationReport,
};
pub use transport::{Coupling, Potential, ProbMeasure};

/// Verdict of a tolerance-gated check.
///
/// `Inconclusive` is used when an upstream flag (an over-tolerance geodesic,
/// a low-confidence limit, an excluded-point cap) degrades the result: the
/// check neither passed nor demonstrably failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}
