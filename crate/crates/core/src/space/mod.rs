//! Finite metric measure spaces: data model, validation, ball masses and
//! discrete geodesics.

mod exact;
mod generate;
mod geodesic;

pub use generate::{generate_space, GeneratorSpec, PNorm};
pub use geodesic::{discrete_geodesic, DiscreteGeodesic};

pub(crate) use generate::snap_up_to_metric as quantize_metric;

use crate::error::{Error, Result};
use crate::par;
use std::sync::atomic::{AtomicU64, Ordering};

fn next_uid() -> u64 {
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// A finite metric measure space: `n` points, a symmetric distance matrix and
/// strictly positive point weights. Immutable after construction.
///
/// `points` holds optional coordinate vectors used by generators and plotting;
/// no operation other than coordinate-field helpers reads them.
#[derive(Clone, Debug)]
pub struct MetricMeasureSpace {
    uid: u64,
    label: String,
    n: usize,
    points: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    weight: Vec<f64>,
    resolution: Option<f64>,
}

impl MetricMeasureSpace {
    /// Builds a space and rejects it unless every metric invariant holds
    /// exactly.
    pub fn new(
        label: impl Into<String>,
        dist: Vec<f64>,
        weight: Vec<f64>,
        points: Option<Vec<Vec<f64>>>,
        resolution: Option<f64>,
    ) -> Result<Self> {
        let space = Self::from_parts(label, dist, weight, points, resolution)?;
        let report = space.validate();
        if report.is_empty() {
            Ok(space)
        } else {
            Err(Error::InvalidSpace(report.summary()))
        }
    }

    /// Builds a space checking only shape and finiteness, deferring the metric
    /// invariants to [`validate_space`]. Needed to load and *report on*
    /// defective inputs.
    pub fn from_parts(
        label: impl Into<String>,
        dist: Vec<f64>,
        weight: Vec<f64>,
        points: Option<Vec<Vec<f64>>>,
        resolution: Option<f64>,
    ) -> Result<Self> {
        let n = weight.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("space must contain at least one point".into()));
        }
        if dist.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        if let Some(p) = &points {
            if p.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} coordinate rows for {} points",
                    p.len(),
                    n
                )));
            }
        }
        if dist.iter().any(|d| !d.is_finite()) || weight.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidSpace("non-finite entry".into()));
        }
        Ok(Self {
            uid: next_uid(),
            label: label.into(),
            n,
            points,
            dist,
            weight,
            resolution,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Runtime identity used to detect objects bound to a different space.
    pub fn uid(&self) -> u64 {
        self.uid
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn points(&self) -> Option<&[Vec<f64>]> {
        self.points.as_deref()
    }

    /// Coordinate of point `i` along `axis`, when coordinates exist.
    pub fn coord(&self, i: usize, axis: usize) -> Option<f64> {
        self.points.as_ref().and_then(|p| p[i].get(axis).copied())
    }

    /// Lattice step recorded by the generator, if any.
    pub fn resolution(&self) -> Option<f64> {
        self.resolution
    }

    pub fn total_mass(&self) -> f64 {
        self.weight.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Mass of the closed ball `{ d(x, x0) <= r }`.
    ///
    /// The comparison carries an fp guard of `1e-9 (1 + r)` so that lattice
    /// points at distance exactly `r` stay inside the ball regardless of the
    /// quantization of generated matrices.
    pub fn ball_mass(&self, x0: usize, r: f64) -> f64 {
        let guard = 1e-9 * (1.0 + r);
        (0..self.n)
            .filter(|&i| self.d(x0, i) <= r + guard)
            .map(|i| self.weight[i])
            .sum()
    }

    /// Checks every invariant exactly; see [`validate_space`].
    pub fn validate(&self) -> ValidationReport {
        validate_space(self)
    }

    pub(crate) fn check_uid(&self, other_uid: u64, what: &str) -> Result<()> {
        if self.uid == other_uid {
            Ok(())
        } else {
            Err(Error::MismatchedSpaces {
                left: format!("space #{} ({})", self.uid, self.label),
                right: format!("{what} bound to space #{other_uid}"),
            })
        }
    }
}

/// A single violated invariant, with the offending index or triple.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `d(i, i) != 0`.
    Diagonal { i: usize, value: f64 },
    /// `d(i, j) != d(j, i)` bit-exactly.
    Symmetry { i: usize, j: usize, forward: f64, backward: f64 },
    /// `d(i, j) > d(i, k) + d(k, j)` under exact rational comparison.
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
    /// `weight[i] <= 0`.
    NonpositiveWeight { i: usize, value: f64 },
    /// `d(i, j) < 0`.
    NegativeDistance { i: usize, j: usize, value: f64 },
}

/// Result of [`validate_space`]: empty iff the space is a valid metric
/// measure space.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.violations.is_empty() {
            return "valid".into();
        }
        let mut parts: Vec<String> = self
            .violations
            .iter()
            .take(8)
            .map(|v| match v {
                Violation::Diagonal { i, value } => format!("d({i},{i}) = {value}"),
                Violation::Symmetry { i, j, .. } => format!("symmetry violation at ({i},{j})"),
                Violation::Triangle { i, j, k, .. } => format!("triangle violation at ({i},{j},{k})"),
                Violation::NonpositiveWeight { i, value } => format!("weight[{i}] = {value}"),
                Violation::NegativeDistance { i, j, value } => format!("d({i},{j}) = {value}"),
            })
            .collect();
        if self.violations.len() > 8 {
            parts.push(format!("... {} violations total", self.violations.len()));
        }
        parts.join("; ")
    }
}

/// Reports every violated space invariant.
///
/// Diagonal and symmetry are compared bit-exactly. The triangle inequality is
/// decided in exact rational arithmetic over the stored `f64` entries: a
/// triple is reported iff `d(i,j) > d(i,k) + d(k,j)` holds for the exact real
/// values the floats denote, with no rounding in the sum.
pub fn validate_space(space: &MetricMeasureSpace) -> ValidationReport {
    let n = space.n;
    let mut violations = Vec::new();

    for i in 0..n {
        let v = space.d(i, i);
        if v != 0.0 {
            violations.push(Violation::Diagonal { i, value: v });
        }
        if space.weight[i] <= 0.0 {
            violations.push(Violation::NonpositiveWeight { i, value: space.weight[i] });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let f = space.d(i, j);
            let b = space.d(j, i);
            if f.to_bits() != b.to_bits() {
                violations.push(Violation::Symmetry { i, j, forward: f, backward: b });
            }
            if f < 0.0 {
                violations.push(Violation::NegativeDistance { i, j, value: f });
            }
        }
    }

    // Triangle scan. The fast f64 filter keeps only candidates within a few
    // ulps of equality; those are settled exactly.
    let mut rows: Vec<Vec<Violation>> = vec![Vec::new(); n];
    par::for_chunks(&mut rows, 4, |start, chunk| {
        for (off, row_out) in chunk.iter_mut().enumerate() {
            let i = start + off;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dij = space.d(i, j);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let dik = space.d(i, k);
                    let dkj = space.d(k, j);
                    let sum = dik + dkj;
                    let slack = sum - dij;
                    if slack > 8.0 * f64::EPSILON * (sum.abs() + dij.abs()) {
                        continue;
                    }
                    if exact::sum_strictly_less(dik, dkj, dij) {
                        row_out.push(Violation::Triangle { i, j, k, excess: dij - sum });
                    }
                }
            }
        }
    });
    for row in rows {
        violations.extend(row);
    }

    ValidationReport { violations }
}

/// One row of a Bishop-Gromov volume comparison profile.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BishopGromovRow {
    pub r: f64,
    pub big_r: f64,
    /// `m(B_r) / m(B_R)`.
    pub ratio: f64,
    /// `(r / R)^N`.
    pub bound: f64,
    pub pass: bool,
}

/// Ball-mass ratios against the `(r/R)^N` comparison bound, for every ordered
/// pair `r <= R` of the supplied radii (consecutive pairs included; an equal
/// pair gives the trivial ratio 1). A row passes iff
/// `ratio >= bound * (1 - bg_tol)`.
pub fn bishop_gromov_profile(
    space: &MetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    n_dim: f64,
    bg_tol: f64,
) -> Result<Vec<BishopGromovRow>> {
    if n_dim < 1.0 {
        return Err(Error::DimensionTooSmall(n_dim));
    }
    if radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidSpace("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpace("radii must be increasing".into()));
    }
    let masses: Vec<f64> = radii.iter().map(|&r| space.ball_mass(x0, r)).collect();
    let mut rows = Vec::new();
    for a in 0..radii.len() {
        for b in (a + 1)..radii.len() {
            let (r, big_r) = (radii[a], radii[b]);
            let ratio = masses[a] / masses[b];
            let bound = (r / big_r).powf(n_dim);
            rows.push(BishopGromovRow {
                r,
                big_r,
                ratio,
                bound,
                pass: ratio >= bound * (1.0 - bg_tol),
            });
        }
    }
    Ok(rows)
}
