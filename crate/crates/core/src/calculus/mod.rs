//! Discrete Sobolev calculus: slope fields, the gradient pairing with its
//! Hilbertianity defect, the measure-valued graph Laplacian with the
//! comparison diagnostic, heat flow, and the gradient contraction check.
//!
//! Two gradient notions coexist on purpose. The *slope* (neighborhood
//! difference-quotient maximum) backs the pointwise objects: local Lipschitz
//! constants, the gradient pairing, the contraction estimate. The *quadratic
//! Dirichlet form* carried by [`NeighborGraph`] conductances backs the
//! Laplacian, the energy and the heat flow. On a lattice no single discrete
//! object plays both roles exactly; every operation documents which notion
//! it uses.

mod graph;
pub(crate) mod heat;

pub use graph::{Edge, GraphRule, NeighborGraph};
pub use heat::{heat_flow, heat_kernel, GaussianDiagnostic};

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

/// A scalar field over the points of a space.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub(crate) space_uid: u64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: &MetricMeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n() {
            return Err(Error::ShapeMismatch("field length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("field entries must be finite".into()));
        }
        Ok(Self { space_uid: space.uid(), values })
    }

    pub fn from_fn(space: &MetricMeasureSpace, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new(space, (0..space.n()).map(f).collect())
    }

    /// The coordinate field along `axis`; requires generator coordinates.
    pub fn coordinate(space: &MetricMeasureSpace, axis: usize) -> Result<Self> {
        let values: Option<Vec<f64>> = (0..space.n()).map(|i| space.coord(i, axis)).collect();
        match values {
            Some(v) => Self::new(space, v),
            None => Err(Error::ShapeMismatch(format!(
                "space '{}' has no coordinate {axis}",
                space.label()
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// A signed measure: point masses, possibly negative.
#[derive(Clone, Debug)]
pub struct SignedMeasure {
    pub(crate) space_uid: u64,
    pub masses: Vec<f64>,
}

impl SignedMeasure {
    pub fn space_uid(&self) -> u64 {
        self.space_uid
    }
}

/// Which one-sided slope to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlopeMode {
    /// `max(lip_plus, lip_minus)`.
    Lip,
    /// `max over neighbors of (f(y) - f(x))^+ / d(x, y)`.
    LipPlus,
    /// `max over neighbors of (f(y) - f(x))^- / d(x, y)`.
    LipMinus,
}

/// Neighborhood difference-quotient slope; isolated points get zero.
pub fn slope_field(graph: &NeighborGraph, f: &ScalarField, mode: SlopeMode) -> Result<ScalarField> {
    graph.check_field(f)?;
    let values = (0..graph.n())
        .map(|x| {
            let mut best = 0.0f64;
            for &(y, d) in graph.neighbors(x) {
                let q = (f.values[y] - f.values[x]) / d;
                let v = match mode {
                    SlopeMode::Lip => q.abs(),
                    SlopeMode::LipPlus => q.max(0.0),
                    SlopeMode::LipMinus => (-q).max(0.0),
                };
                best = best.max(v);
            }
            best
        })
        .collect();
    Ok(ScalarField { space_uid: f.space_uid, values })
}

/// Result of [`carre_du_champ`].
#[derive(Clone, Debug)]
pub struct CarreDuChamp {
    /// The gradient pairing field, Cauchy-Schwarz clamped.
    pub field: ScalarField,
    /// Relative parallelogram defect of the squared-slope energies.
    pub hilbert_defect: f64,
    /// The epsilon actually used for the two-sided difference.
    pub eps_used: f64,
}

/// Gradient pairing by two-sided slope perturbation and the parallelogram
/// (Hilbertianity) defect.
///
/// For each epsilon the quotient `(W(g+ef)^2 - W(g-ef)^2) / 4e` is formed
/// pointwise with `W` the `Lip` slope; the returned field is the quotient at
/// the smallest epsilon (the two-sided form cancels the leading convexity
/// bias) clamped to `|field| <= W(f) W(g)`.
///
/// `hilbert_defect = |E2(f+g) + E2(f-g) - 2 E2(f) - 2 E2(g)| / (E2(f) + E2(g))`
/// where `E2(u) = sum W(u)^2 weight`.
pub fn carre_du_champ(
    graph: &NeighborGraph,
    f: &ScalarField,
    g: &ScalarField,
    eps_list: &[f64],
) -> Result<CarreDuChamp> {
    graph.check_field(f)?;
    graph.check_field(g)?;
    let eps_list = if eps_list.is_empty() {
        &[1e-2, 1e-3, 1e-4][..]
    } else {
        eps_list
    };
    for &e in eps_list {
        if e < 1e-12 {
            return Err(Error::EpsUnderflow(e));
        }
    }
    let eps = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);

    let combine = |a: f64, b: f64| -> Result<ScalarField> {
        let vals = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        ScalarField::new_raw(f.space_uid, vals)
    };

    let wf = slope_field(graph, f, SlopeMode::Lip)?;
    let wg = slope_field(graph, g, SlopeMode::Lip)?;
    let plus = slope_field(graph, &combine(eps, 1.0)?, SlopeMode::Lip)?;
    let minus = slope_field(graph, &combine(-eps, 1.0)?, SlopeMode::Lip)?;

    let values: Vec<f64> = (0..graph.n())
        .map(|x| {
            let raw = (plus.values[x] * plus.values[x] - minus.values[x] * minus.values[x])
                / (4.0 * eps);
            let bound = wf.values[x] * wg.values[x];
            raw.clamp(-bound, bound)
        })
        .collect();

    // interior-masked squared-slope energies: boundary stencils would smear
    // the parallelogram identity by a lattice-order amount
    let energy = |u: &ScalarField| -> f64 {
        u.values
            .iter()
            .zip(graph.weights())
            .enumerate()
            .filter(|(x, _)| graph.is_interior(*x))
            .map(|(_, (v, w))| v * v * w)
            .sum()
    };
    let w_sum = slope_field(graph, &combine(1.0, 1.0)?, SlopeMode::Lip)?;
    let w_diff = slope_field(graph, &combine(1.0, -1.0)?, SlopeMode::Lip)?;
    let base = 2.0 * (energy(&wf) + energy(&wg));
    let hilbert_defect = if base > 0.0 {
        (energy(&w_sum) + energy(&w_diff) - base).abs() / base
    } else {
        0.0
    };

    Ok(CarreDuChamp {
        field: ScalarField { space_uid: f.space_uid, values },
        hilbert_defect,
        eps_used: eps,
    })
}

impl ScalarField {
    pub(crate) fn new_raw(space_uid: u64, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("field entries must be finite".into()));
        }
        Ok(Self { space_uid, values })
    }
}

/// The graph Dirichlet form `E(f, g) = 1/2 sum_edges c (df)(dg)`.
pub fn dirichlet_energy(graph: &NeighborGraph, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    graph.check_field(f)?;
    graph.check_field(g)?;
    Ok(graph
        .edges()
        .iter()
        .map(|e| {
            e.conductance
                * (f.values[e.b] - f.values[e.a])
                * (g.values[e.b] - g.values[e.a])
        })
        .sum::<f64>()
        / 2.0)
}

/// The measure-valued Laplacian of `g` through the quadratic form:
/// `masses[x] = sum_y c_xy (g(y) - g(x))`.
///
/// By construction the defining identity
/// `-2 E(f, g) = sum_x f(x) masses[x]` holds for every field `f` up to fp
/// roundoff.
pub fn laplacian_measure(graph: &NeighborGraph, g: &ScalarField) -> Result<SignedMeasure> {
    graph.check_field(g)?;
    let mut masses = vec![0.0; graph.n()];
    for e in graph.edges() {
        let dg = g.values[e.b] - g.values[e.a];
        masses[e.a] += e.conductance * dg;
        masses[e.b] -= e.conductance * dg;
    }
    Ok(SignedMeasure { space_uid: g.space_uid, masses })
}

/// One annulus row of the Laplacian comparison diagnostic.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ComparisonRow {
    pub index: usize,
    pub radius: f64,
    /// `Lap d(., x0) / m` at the point.
    pub density: f64,
    /// `N / d`.
    pub bound: f64,
}

/// Report of [`laplacian_comparison`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// `max (density - bound)`, negative when the bound holds strictly.
    pub max_excess: f64,
    /// `max (density - bound) / bound` over the annulus.
    pub max_relative_excess: f64,
}

/// Evaluates the distance-function Laplacian density against `N / d` on the
/// annulus `r_min < d(., x0) < r_max`, interior points only.
pub fn laplacian_comparison(
    space: &MetricMeasureSpace,
    graph: &NeighborGraph,
    x0: usize,
    n_dim: f64,
    r_min: f64,
    r_max: f64,
) -> Result<ComparisonReport> {
    graph.check_space(space)?;
    if n_dim < 1.0 {
        return Err(Error::DimensionTooSmall(n_dim));
    }
    let dist_field = ScalarField::from_fn(space, |i| space.d(x0, i))?;
    let lap = laplacian_measure(graph, &dist_field)?;
    let mut rows = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_rel = f64::NEG_INFINITY;
    for x in 0..space.n() {
        let r = space.d(x0, x);
        if r <= r_min || r >= r_max || !graph.is_interior(x) {
            continue;
        }
        let density = lap.masses[x] / space.weight(x);
        let bound = n_dim / r;
        rows.push(ComparisonRow { index: x, radius: r, density, bound });
        max_excess = max_excess.max(density - bound);
        max_rel = max_rel.max((density - bound) / bound);
    }
    if rows.is_empty() {
        return Err(Error::ShapeMismatch("annulus contains no interior point".into()));
    }
    Ok(ComparisonReport { rows, max_excess, max_relative_excess: max_rel })
}

/// One `t` row of the gradient contraction check.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BakryEmeryRow {
    pub t: f64,
    /// `max interior [ slope(h_t f)^2 - h_t(slope(f)^2) ]`.
    pub max_violation: f64,
}

/// Gradient contraction along the heat flow:
/// `slope(h_t f)^2 <= h_t(slope(f)^2)` up to a lattice-order defect,
/// evaluated on interior points.
pub fn bakry_emery_check(
    graph: &NeighborGraph,
    f: &ScalarField,
    t_list: &[f64],
) -> Result<Vec<BakryEmeryRow>> {
    graph.check_field(f)?;
    let slope = slope_field(graph, f, SlopeMode::Lip)?;
    let slope_sq = ScalarField::new_raw(
        f.space_uid,
        slope.values.iter().map(|v| v * v).collect(),
    )?;
    let mut rows = Vec::new();
    for &t in t_list {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let flowed = heat_flow(graph, f, t)?;
        let flowed_slope = slope_field(graph, &flowed, SlopeMode::Lip)?;
        let rhs = heat_flow(graph, &slope_sq, t)?;
        let mut worst = f64::NEG_INFINITY;
        for x in 0..graph.n() {
            if graph.is_interior(x) {
                let v = flowed_slope.values[x] * flowed_slope.values[x] - rhs.values[x];
                worst = worst.max(v);
            }
        }
        rows.push(BakryEmeryRow { t, max_violation: worst });
    }
    Ok(rows)
}
