//! Heat flow of the graph Dirichlet form.
//!
//! The generator is `Delta = masses / weight`, self-adjoint in the
//! m-weighted inner product. Spaces up to 2000 points use a cached
//! symmetric eigendecomposition of `W^(1/2) Delta W^(-1/2)`, so semigroup
//! identities hold to fp accuracy; larger spaces fall back to implicit
//! midpoint (Crank-Nicolson) stepping with conjugate-gradient solves.

use super::{NeighborGraph, ScalarField};
use crate::error::{Error, Result};
use crate::transport::ProbMeasure;
use crate::space::MetricMeasureSpace;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub(crate) const SPECTRAL_LIMIT: usize = 2000;

pub(crate) struct Spectral {
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    sqrt_w: Vec<f64>,
    inv_sqrt_w: Vec<f64>,
}

fn spectral(graph: &NeighborGraph) -> Arc<Spectral> {
    graph
        .spectral
        .get_or_init(|| {
            let n = graph.n();
            let w = graph.weights();
            let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let inv_sqrt_w: Vec<f64> = sqrt_w.iter().map(|v| 1.0 / v).collect();
            let mut s = DMatrix::<f64>::zeros(n, n);
            for e in graph.edges() {
                let off = e.conductance * inv_sqrt_w[e.a] * inv_sqrt_w[e.b];
                s[(e.a, e.b)] += off;
                s[(e.b, e.a)] += off;
                s[(e.a, e.a)] -= e.conductance / w[e.a];
                s[(e.b, e.b)] -= e.conductance / w[e.b];
            }
            let eig = s.symmetric_eigen();
            Arc::new(Spectral {
                eigvecs: eig.eigenvectors,
                eigvals: eig.eigenvalues,
                sqrt_w,
                inv_sqrt_w,
            })
        })
        .clone()
}

fn spectral_apply(sp: &Spectral, values: &[f64], t: f64) -> Vec<f64> {
    let n = values.len();
    let v = DVector::from_iterator(n, values.iter().enumerate().map(|(i, x)| x * sp.sqrt_w[i]));
    let mut coeffs = sp.eigvecs.transpose() * v;
    for k in 0..n {
        coeffs[k] *= (t * sp.eigvals[k]).exp();
    }
    let out = &sp.eigvecs * coeffs;
    (0..n).map(|i| out[i] * sp.inv_sqrt_w[i]).collect()
}

/// Applies `Delta` to a vector.
fn apply_delta(graph: &NeighborGraph, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for e in graph.edges() {
        let du = e.conductance * (u[e.b] - u[e.a]);
        out[e.a] += du;
        out[e.b] -= du;
    }
    for (x, v) in out.iter_mut().enumerate() {
        *v /= graph.weights()[x];
    }
}

/// CG solve of `(I - a Delta) x = rhs` in the m-weighted inner product.
fn solve_implicit(graph: &NeighborGraph, a: f64, rhs: &[f64]) -> Vec<f64> {
    let n = graph.n();
    let w = graph.weights();
    let dot = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).zip(w).map(|((a, b), w)| a * b * w).sum()
    };
    let apply = |x: &[f64], out: &mut Vec<f64>| {
        apply_delta(graph, x, out);
        for i in 0..n {
            out[i] = x[i] - a * out[i];
        }
    };
    let mut x = rhs.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let tol = 1e-26 * dot(rhs, rhs).max(1e-300);
    for _ in 0..(4 * n) {
        if rr <= tol {
            break;
        }
        apply(&p, &mut ax);
        let alpha = rr / dot(&p, &ax);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

fn implicit_midpoint(graph: &NeighborGraph, values: &[f64], t: f64) -> Vec<f64> {
    // Gershgorin bound of the generator's spectral radius
    let mut cond_sum = vec![0.0; graph.n()];
    for e in graph.edges() {
        cond_sum[e.a] += e.conductance;
        cond_sum[e.b] += e.conductance;
    }
    let lambda_max = cond_sum
        .iter()
        .zip(graph.weights())
        .map(|(c, w)| 2.0 * c / w)
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let steps = (4.0 * t * lambda_max).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut u = values.to_vec();
    let mut tmp = vec![0.0; u.len()];
    for _ in 0..steps {
        apply_delta(graph, &u, &mut tmp);
        let rhs: Vec<f64> = u.iter().zip(&tmp).map(|(v, d)| v + 0.5 * dt * d).collect();
        u = solve_implicit(graph, 0.5 * dt, &rhs);
    }
    u
}

/// The heat semigroup `h_t f = exp(t Delta) f`.
pub fn heat_flow(graph: &NeighborGraph, f: &ScalarField, t: f64) -> Result<ScalarField> {
    graph.check_field(f)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let values = if graph.n() <= SPECTRAL_LIMIT {
        spectral_apply(&spectral(graph), &f.values, t)
    } else {
        implicit_midpoint(graph, &f.values, t)
    };
    ScalarField::new_raw(f.space_uid, values)
}

/// Least-squares fit of `-log rho` against `d^2(x, .) / t`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GaussianDiagnostic {
    /// Fitted decay slope; positive means super-linear decay in `d^2`.
    pub slope: f64,
    /// Reference decay constant of the continuum kernel bound, `1/5`.
    pub reference: f64,
    /// Points with `rho > 1e-8` entering the fit.
    pub points_used: usize,
}

/// Heat kernel row at `x`: the density of `h_t` started from the unit mass
/// at `x`, returned as a probability measure together with the Gaussian
/// decay diagnostic.
pub fn heat_kernel(
    space: &MetricMeasureSpace,
    graph: &NeighborGraph,
    x: usize,
    t: f64,
) -> Result<(ProbMeasure, GaussianDiagnostic)> {
    graph.check_space(space)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if x >= graph.n() {
        return Err(Error::ShapeMismatch(format!("kernel center {x} out of range")));
    }
    // rho_t[x] = exp(t Delta) applied to the density of delta_x
    let mut init = vec![0.0; graph.n()];
    init[x] = 1.0 / graph.weights()[x];
    let field = heat_flow(graph, &ScalarField::new(space, init)?, t)?;
    // clamp fp-noise negatives; anything materially negative is an error
    let mut density = field.values;
    for v in &mut density {
        if *v < 0.0 {
            if *v < -1e-10 {
                return Err(Error::InvalidMeasure(format!("kernel entry {v} < 0")));
            }
            *v = 0.0;
        }
    }
    let measure = ProbMeasure::from_masses(
        space,
        &density
            .iter()
            .zip(graph.weights())
            .map(|(d, w)| d * w)
            .collect::<Vec<_>>(),
    )?;

    // least squares of -log(rho) against d^2/t over the resolvable support
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for y in 0..graph.n() {
        let rho = measure.density()[y];
        if rho > 1e-8 && t > 0.0 {
            let d = space.d(x, y);
            xs.push(d * d / t);
            ys.push(-rho.ln());
        }
    }
    let slope = if xs.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let var: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        if var > 0.0 {
            cov / var
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((
        measure,
        GaussianDiagnostic { slope, reference: 0.2, points_used: xs.len() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{dirichlet_energy, NeighborGraph, ScalarField};
    use crate::space::{generate_space, GeneratorSpec};

    fn setup(n: usize, h: f64) -> (crate::space::MetricMeasureSpace, NeighborGraph) {
        let space = generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![n, n], h }).unwrap();
        let graph = NeighborGraph::lattice_axis(&space).unwrap();
        (space, graph)
    }

    #[test]
    fn constants_are_fixed_points() {
        let (space, graph) = setup(6, 0.25);
        let c = ScalarField::from_fn(&space, |_| 2.5).unwrap();
        let out = heat_flow(&graph, &c, 0.7).unwrap();
        for v in &out.values {
            assert!((v - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn t_zero_is_identity_exactly() {
        let (space, graph) = setup(5, 0.25);
        let f = ScalarField::from_fn(&space, |i| (i as f64).sin()).unwrap();
        let out = heat_flow(&graph, &f, 0.0).unwrap();
        assert_eq!(out.values, f.values);
    }

    #[test]
    fn mass_is_conserved_and_energy_decreases() {
        let (space, graph) = setup(9, 0.2);
        let f = ScalarField::from_fn(&space, |i| if i == 40 { 5.0 } else { 0.0 }).unwrap();
        let m0: f64 = f.values.iter().zip(graph.weights()).map(|(v, w)| v * w).sum();
        let out = heat_flow(&graph, &f, 0.05).unwrap();
        let m1: f64 = out.values.iter().zip(graph.weights()).map(|(v, w)| v * w).sum();
        assert!((m0 - m1).abs() < 1e-9, "mass drift {}", m0 - m1);
        let e0 = dirichlet_energy(&graph, &f, &f).unwrap();
        let e1 = dirichlet_energy(&graph, &out, &out).unwrap();
        assert!(e1 <= e0 + 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let (space, graph) = setup(7, 0.25);
        let f = ScalarField::from_fn(&space, |i| ((i * 7 % 11) as f64) / 11.0).unwrap();
        let one = heat_flow(&graph, &heat_flow(&graph, &f, 0.02).unwrap(), 0.03).unwrap();
        let two = heat_flow(&graph, &f, 0.05).unwrap();
        for (a, b) in one.values.iter().zip(&two.values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_row_is_probability_with_positive_decay() {
        let (space, graph) = setup(11, 0.1);
        let center = (space.n() - 1) / 2;
        let (rho, diag) = heat_kernel(&space, &graph, center, 0.05).unwrap();
        let total: f64 = rho
            .density()
            .iter()
            .zip(graph.weights())
            .map(|(d, w)| d * w)
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(rho.density().iter().all(|&d| d >= 0.0));
        assert!(diag.slope > 0.0, "slope {}", diag.slope);
        assert_eq!(diag.reference, 0.2);
    }

    #[test]
    fn negative_time_rejected() {
        let (space, graph) = setup(3, 1.0);
        let f = ScalarField::from_fn(&space, |_| 0.0).unwrap();
        assert!(heat_flow(&graph, &f, -0.1).is_err());
    }

    #[test]
    fn implicit_midpoint_agrees_with_spectral() {
        let (space, graph) = setup(6, 0.25);
        let f = ScalarField::from_fn(&space, |i| ((i % 5) as f64) - 2.0).unwrap();
        let exact = heat_flow(&graph, &f, 0.04).unwrap();
        let stepped = ScalarField::new_raw(
            exact.space_uid,
            super::implicit_midpoint(&graph, &f.values, 0.04),
        )
        .unwrap();
        for (a, b) in exact.values.iter().zip(&stepped.values) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        drop(space);
    }
}
