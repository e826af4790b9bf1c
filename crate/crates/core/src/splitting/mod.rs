//! The geometric pipeline: Busemann fields from a supplied line, the induced
//! translation flow, the quotient space, and verification of the product
//! (Pythagorean) structure.

mod busemann;
mod flow;
mod quotient;

pub use busemann::{busemann_field, BusemannField, BusemannOptions};
pub use flow::{
    flow_diagnostics, gradient_flow_map, FlowDiagnostics, FlowMap, FlowStepper, FLOW_TIE_EPS,
};
pub use quotient::{
    pythagoras_check, quotient_split, PythagorasReport, PythagorasRow, QuotientOptions,
    QuotientSpace,
};

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

/// An isometric copy of an interval of the real line inside the space:
/// ordered point ids with matching time parameters.
#[derive(Clone, Debug)]
pub struct LineSpec {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    /// `[t_min, t_max]`.
    pub span: (f64, f64),
    /// Smallest time gap between consecutive points.
    pub step: f64,
}

impl LineSpec {
    /// Validates `|d(gamma_k, gamma_l) - |t_k - t_l|| <= line_tol` over all
    /// pairs.
    pub fn new(
        space: &MetricMeasureSpace,
        indices: Vec<usize>,
        times: Vec<f64>,
        line_tol: f64,
    ) -> Result<Self> {
        if indices.len() != times.len() || indices.len() < 2 {
            return Err(Error::InvalidLine(format!(
                "{} indices vs {} times",
                indices.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLine("times must be strictly increasing".into()));
        }
        if indices.iter().any(|&i| i >= space.n()) {
            return Err(Error::InvalidLine("index out of range".into()));
        }
        for (a, (&i, &ti)) in indices.iter().zip(&times).enumerate() {
            for (&j, &tj) in indices.iter().zip(&times).skip(a + 1) {
                let dev = (space.d(i, j) - (tj - ti).abs()).abs();
                if dev > line_tol {
                    return Err(Error::InvalidLine(format!(
                        "d(gamma_{ti}, gamma_{tj}) deviates from |t-s| by {dev}"
                    )));
                }
            }
        }
        let step = times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let span = (times[0], *times.last().unwrap());
        Ok(Self { indices, times, span, step })
    }

    pub fn span_length(&self) -> f64 {
        self.span.1 - self.span.0
    }

    /// Max over the space of the distance to the nearest line point.
    pub fn transverse_diameter(&self, space: &MetricMeasureSpace) -> f64 {
        (0..space.n())
            .map(|x| {
                self.indices
                    .iter()
                    .map(|&k| space.d(x, k))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Distance of `x` to the nearest line point.
    pub fn dist_to_line(&self, space: &MetricMeasureSpace, x: usize) -> f64 {
        self.indices
            .iter()
            .map(|&k| space.d(x, k))
            .fold(f64::INFINITY, f64::min)
    }
}
