//! Built-in space generators.
//!
//! Every generator emits lattice points, evaluates the exact norm / product /
//! intrinsic distance between them, and then snaps each off-diagonal entry
//! *up* to the next multiple of a fixed binary quantum `q` (after adding a
//! margin covering the accumulated rounding of the distance evaluation).
//! Rounding up to a fixed grid is subadditive, so the snapped matrix
//! satisfies the triangle inequality exactly as stored, which is what the
//! validator demands. The perturbation is below 1e-11 for every generator in
//! this crate, far under all stated tolerances.

use super::MetricMeasureSpace;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Exponent of the norm used by [`GeneratorSpec::NormedPlane`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl Serialize for PNorm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PNorm::Finite(p) => s.serialize_f64(*p),
            PNorm::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) if p.is_infinite() && p > 0.0 => Ok(PNorm::Infinity),
            Raw::Num(p) => Ok(PNorm::Finite(p)),
            Raw::Text(t) if t == "inf" || t == "infinity" => Ok(PNorm::Infinity),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid p value: {t}"))),
        }
    }
}

/// Descriptor of a built-in space. Serializes as `{"type": ..., ...}` and can
/// stand in for the distance matrix inside a space file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Axis-aligned lattice in `R^dim` with Euclidean distance.
    EuclideanGrid { dims: Vec<usize>, h: f64 },
    /// Square `[0, side]^2` lattice under the l^p norm.
    NormedPlane { p: PNorm, side: f64, h: f64 },
    /// Lattice on a right cylinder surface with the intrinsic distance.
    Cylinder { radius: f64, length: f64, h: f64 },
    /// Cartesian product of a base space and an interval, with the
    /// Pythagorean product distance.
    Product {
        base: Box<GeneratorSpec>,
        interval: [f64; 2],
        h: f64,
    },
    /// Metric cone of total unrolled angle `angle` (radians, in `(0, 2*pi]`)
    /// and the intrinsic (unrolling) distance.
    Cone { angle: f64, radius: f64, h: f64 },
}

/// Materializes a generator descriptor into a valid space.
pub fn generate_space(spec: &GeneratorSpec) -> Result<MetricMeasureSpace> {
    match spec {
        GeneratorSpec::EuclideanGrid { dims, h } => euclidean_grid(dims, *h),
        GeneratorSpec::NormedPlane { p, side, h } => normed_plane(*p, *side, *h),
        GeneratorSpec::Cylinder { radius, length, h } => cylinder(*radius, *length, *h),
        GeneratorSpec::Product { base, interval, h } => {
            let base_space = generate_space(base)?;
            product(&base_space, interval[0], interval[1], *h)
        }
        GeneratorSpec::Cone { angle, radius, h } => cone(*angle, *radius, *h),
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidGenerator(format!("spacing must be positive, got {h}")));
    }
    Ok(())
}

/// Snaps every off-diagonal entry up to the next multiple of a binary
/// quantum. See the module docs for why this makes the matrix exactly
/// metric.
pub(crate) fn snap_up_to_metric(dist: &mut [f64], n: usize) {
    let d_max = dist.iter().cloned().fold(0.0, f64::max);
    let margin = 64.0 * f64::EPSILON * (1.0 + d_max);
    let mut q = 2.0f64.powi(-40);
    while q < 2.0 * margin {
        q *= 2.0;
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                dist[i * n + j] = 0.0;
            } else {
                let v = dist[i * n + j];
                dist[i * n + j] = ((v + margin) / q).ceil() * q;
            }
        }
    }
}

fn build(
    label: String,
    points: Vec<Vec<f64>>,
    weight: Vec<f64>,
    h: f64,
    dist_fn: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<MetricMeasureSpace> {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist_fn(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    snap_up_to_metric(&mut dist, n);
    // the snapped matrix is exactly metric by construction (ceiling to a
    // fixed quantum is subadditive), so the cubic validation pass is skipped
    // here; the generator test suite validates every descriptor explicitly
    MetricMeasureSpace::from_parts(label, dist, weight, Some(points), Some(h))
}

fn lattice_coords(dims: &[usize], h: f64) -> Result<Vec<Vec<f64>>> {
    if dims.is_empty() {
        return Err(Error::InvalidGenerator("empty dimension list".into()));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidGenerator("every axis needs at least 2 points".into()));
    }
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for &extent in dims {
        let mut next = Vec::with_capacity(points.len() * extent);
        for p in &points {
            for k in 0..extent {
                let mut q = p.clone();
                q.push(k as f64 * h);
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points)
}

fn euclidean_grid(dims: &[usize], h: f64) -> Result<MetricMeasureSpace> {
    check_spacing(h)?;
    let points = lattice_coords(dims, h)?;
    let dim = dims.len();
    let cell = h.powi(dim as i32);
    let weight = vec![cell; points.len()];
    let label = format!(
        "euclidean_grid({}, h={h})",
        dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    );
    build(label, points, weight, h, |a, b| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    })
}

fn normed_plane(p: PNorm, side: f64, h: f64) -> Result<MetricMeasureSpace> {
    check_spacing(h)?;
    if !(side > 0.0) {
        return Err(Error::InvalidGenerator(format!("side must be positive, got {side}")));
    }
    if let PNorm::Finite(q) = p {
        if !(q >= 1.0) {
            return Err(Error::InvalidGenerator(format!("p must be >= 1, got {q}")));
        }
    }
    let per_axis = (side / h).round() as usize + 1;
    if per_axis < 2 {
        return Err(Error::InvalidGenerator("side shorter than one lattice step".into()));
    }
    let points = lattice_coords(&[per_axis, per_axis], h)?;
    let weight = vec![h * h; points.len()];
    let label = match p {
        PNorm::Finite(q) => format!("normed_plane(p={q}, side={side}, h={h})"),
        PNorm::Infinity => format!("normed_plane(p=inf, side={side}, h={h})"),
    };
    build(label, points, weight, h, move |a, b| {
        let dx = (a[0] - b[0]).abs();
        let dy = (a[1] - b[1]).abs();
        match p {
            PNorm::Infinity => dx.max(dy),
            PNorm::Finite(1.0) => dx + dy,
            PNorm::Finite(2.0) => dx.hypot(dy),
            PNorm::Finite(q) => (dx.powf(q) + dy.powf(q)).powf(1.0 / q),
        }
    })
}

fn cylinder(radius: f64, length: f64, h: f64) -> Result<MetricMeasureSpace> {
    check_spacing(h)?;
    if !(radius > 0.0) || !(length > 0.0) {
        return Err(Error::InvalidGenerator("cylinder needs positive radius and length".into()));
    }
    let n_ang = ((2.0 * PI * radius / h).round() as usize).max(3);
    let n_ax = (length / h).round() as usize + 1;
    if n_ax < 2 {
        return Err(Error::InvalidGenerator("cylinder shorter than one lattice step".into()));
    }
    // coordinates: (theta, z); embedding for plots appended as (x, y, z)
    let mut points = Vec::with_capacity(n_ang * n_ax);
    for a in 0..n_ang {
        let theta = 2.0 * PI * a as f64 / n_ang as f64;
        for k in 0..n_ax {
            points.push(vec![theta, k as f64 * h]);
        }
    }
    let weight = vec![h * h; points.len()];
    let label = format!("cylinder(r={radius}, L={length}, h={h})");
    build(label, points, weight, h, move |a, b| {
        let mut dth = (a[0] - b[0]).abs();
        if dth > PI {
            dth = 2.0 * PI - dth;
        }
        (radius * dth).hypot(a[1] - b[1])
    })
}

fn product(base: &MetricMeasureSpace, lo: f64, hi: f64, h: f64) -> Result<MetricMeasureSpace> {
    check_spacing(h)?;
    if !(hi > lo) {
        return Err(Error::InvalidGenerator(format!("empty interval [{lo}, {hi}]")));
    }
    let levels = ((hi - lo) / h).round() as usize + 1;
    if levels < 2 {
        return Err(Error::InvalidGenerator("interval shorter than one lattice step".into()));
    }
    let nb = base.n();
    let n = nb * levels;
    // index = base_index * levels + level; coordinates = base coords ++ [s]
    let mut points = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for ib in 0..nb {
        for k in 0..levels {
            let s = lo + k as f64 * h;
            let mut c = base
                .points()
                .map(|p| p[ib].clone())
                .unwrap_or_else(|| vec![ib as f64]);
            c.push(s);
            points.push(c);
            weight.push(base.weight(ib) * h);
        }
    }
    let mut dist = vec![0.0; n * n];
    for ib in 0..nb {
        for jb in 0..nb {
            let db = base.d(ib, jb);
            for ki in 0..levels {
                for kj in 0..levels {
                    let ds = (ki as f64 - kj as f64) * h;
                    dist[(ib * levels + ki) * n + jb * levels + kj] = db.hypot(ds);
                }
            }
        }
    }
    snap_up_to_metric(&mut dist, n);
    let label = format!("product({}, [{lo}, {hi}], h={h})", base.label());
    MetricMeasureSpace::from_parts(label, dist, weight, Some(points), Some(h))
}

fn cone(angle: f64, radius: f64, h: f64) -> Result<MetricMeasureSpace> {
    check_spacing(h)?;
    if !(angle > 0.0 && angle <= 2.0 * PI) {
        return Err(Error::InvalidGenerator(format!(
            "cone angle must lie in (0, 2*pi], got {angle}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidGenerator("cone needs a positive radius".into()));
    }
    let n_r = (radius / h).round() as usize;
    if n_r < 2 {
        return Err(Error::InvalidGenerator("cone shorter than two lattice rings".into()));
    }
    let n_ang = ((angle * radius / h).round() as usize).max(3);
    // coordinates: (r, theta) with theta in [0, angle); apex first, then the
    // theta = 0 ray ring by ring so a ray is easy to pick out
    let mut points = vec![vec![0.0, 0.0]];
    for a in 0..n_ang {
        let theta = angle * a as f64 / n_ang as f64;
        for k in 1..=n_r {
            points.push(vec![k as f64 * h, theta]);
        }
    }
    let weight = vec![h * h; points.len()];
    let label = format!("cone(angle={angle}, R={radius}, h={h})");
    build(label, points, weight, h, move |a, b| {
        let (r1, t1) = (a[0], a[1]);
        let (r2, t2) = (b[0], b[1]);
        let mut dth = (t1 - t2).abs();
        if dth > angle - dth {
            dth = angle - dth;
        }
        if dth >= PI {
            r1 + r2
        } else {
            (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * dth.cos()).max(0.0).sqrt()
        }
    })
}
