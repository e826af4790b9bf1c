//! Calculus rules of the gradient pairing, the Laplacian, and the heat flow,
//! exercised in the regimes where the discrete objects can satisfy them.

mod support;

use mms_core::calculus::{
    bakry_emery_check, carre_du_champ, dirichlet_energy, heat_flow, laplacian_measure,
    slope_field, NeighborGraph, ScalarField, SlopeMode,
};
use mms_core::space::{generate_space, GeneratorSpec, MetricMeasureSpace};
use mms_core::splitting::{busemann_field, BusemannOptions, LineSpec};
use mms_core::transport::{w2_solve, ProbMeasure};

fn grid(nx: usize, ny: usize, h: f64) -> MetricMeasureSpace {
    generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![nx, ny], h }).unwrap()
}

/// Fields whose slope argmax stays on one stencil direction share the
/// quadratic regime of the pairing; the calculus identities are exact there.
/// Strict monotonicity keeps the argmax away from switching points.
fn aligned_probe(space: &MetricMeasureSpace, freq: f64, gain: f64) -> ScalarField {
    ScalarField::from_fn(space, |i| {
        let x = space.coord(i, 0).unwrap();
        gain * (x + 0.3 * (freq * x).sin())
    })
    .unwrap()
}

#[test]
fn pairing_is_bilinear_in_the_quadratic_regime() {
    let space = grid(9, 9, 0.25);
    let graph = NeighborGraph::lattice_eight(&space).unwrap();
    let f1 = aligned_probe(&space, 0.7, 1.0);
    let f2 = aligned_probe(&space, 1.3, 0.5);
    let g = aligned_probe(&space, 0.9, 2.0);
    let (alpha, beta) = (1.7, -0.6);
    let combo = ScalarField::from_fn(&space, |i| {
        alpha * f1.values[i] + beta * f2.values[i]
    })
    .unwrap();
    let eps = [1e-4];
    let lhs = carre_du_champ(&graph, &combo, &g, &eps).unwrap().field;
    let a = carre_du_champ(&graph, &f1, &g, &eps).unwrap().field;
    let b = carre_du_champ(&graph, &f2, &g, &eps).unwrap().field;
    for x in 0..space.n() {
        let want = alpha * a.values[x] + beta * b.values[x];
        assert!(
            (lhs.values[x] - want).abs() <= 1e-8,
            "bilinearity at {x}: {} vs {want}",
            lhs.values[x]
        );
    }
}

#[test]
fn pairing_is_symmetric_in_the_quadratic_regime() {
    let space = grid(9, 9, 0.25);
    let graph = NeighborGraph::lattice_eight(&space).unwrap();
    let f = aligned_probe(&space, 0.8, 1.0);
    let g = aligned_probe(&space, 1.1, 0.7);
    let eps = [1e-4];
    let fg = carre_du_champ(&graph, &f, &g, &eps).unwrap().field;
    let gf = carre_du_champ(&graph, &g, &f, &eps).unwrap().field;
    for x in 0..space.n() {
        assert!(
            (fg.values[x] - gf.values[x]).abs() <= 1e-8,
            "symmetry at {x}: {} vs {}",
            fg.values[x],
            gf.values[x]
        );
    }
}

#[test]
fn chain_and_leibniz_rules_within_lattice_order() {
    let h = 0.1;
    let space = grid(21, 21, h);
    let graph = NeighborGraph::lattice_eight(&space).unwrap();
    let f = aligned_probe(&space, 0.6, 1.0);
    let g = aligned_probe(&space, 0.45, 1.0);
    let eps = [1e-5];
    // chain rule: <grad phi(f), grad g> = phi'(f) <grad f, grad g>
    let composed = ScalarField::from_fn(&space, |i| (0.5 * f.values[i]).tanh()).unwrap();
    let lhs = carre_du_champ(&graph, &composed, &g, &eps).unwrap().field;
    let base = carre_du_champ(&graph, &f, &g, &eps).unwrap().field;
    for x in 0..space.n() {
        if !graph.is_interior(x) {
            continue;
        }
        let fprime = 0.5 / (0.5 * f.values[x]).cosh().powi(2);
        let want = fprime * base.values[x];
        assert!(
            (lhs.values[x] - want).abs() <= 10.0 * h,
            "chain rule at {x}: {} vs {want}",
            lhs.values[x]
        );
    }
    // leibniz: <grad (f1 f2), grad g> = f1 <grad f2, grad g> + f2 <grad f1, grad g>
    let f2 = aligned_probe(&space, 0.35, 0.8);
    let prod = ScalarField::from_fn(&space, |i| f.values[i] * f2.values[i]).unwrap();
    let lhs = carre_du_champ(&graph, &prod, &g, &eps).unwrap().field;
    let a = carre_du_champ(&graph, &f, &g, &eps).unwrap().field;
    let b = carre_du_champ(&graph, &f2, &g, &eps).unwrap().field;
    for x in 0..space.n() {
        if !graph.is_interior(x) {
            continue;
        }
        let want = f.values[x] * b.values[x] + f2.values[x] * a.values[x];
        assert!(
            (lhs.values[x] - want).abs() <= 10.0 * h,
            "leibniz at {x}: {} vs {want}",
            lhs.values[x]
        );
    }
}

#[test]
fn laplacian_chain_rule_surrogate() {
    // Lap(phi o g) = phi'(g) Lap g + phi''(g) |grad g|^2 m, within O(h) per
    // unit mass on interior points
    let h = 0.05;
    let space = grid(25, 25, h);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    let g = ScalarField::from_fn(&space, |i| {
        let x = space.coord(i, 0).unwrap();
        0.8 * (1.3 * x).sin()
    })
    .unwrap();
    let composed = ScalarField::from_fn(&space, |i| g.values[i] * g.values[i] * 0.5).unwrap();
    let lap_g = laplacian_measure(&graph, &g).unwrap();
    let lap_c = laplacian_measure(&graph, &composed).unwrap();
    let slope = slope_field(&graph, &g, SlopeMode::Lip).unwrap();
    for x in 0..space.n() {
        if !graph.is_interior(x) {
            continue;
        }
        // phi(z) = z^2/2: phi' = g, phi'' = 1
        let want = g.values[x] * lap_g.masses[x]
            + slope.values[x] * slope.values[x] * space.weight(x);
        let got = lap_c.masses[x];
        assert!(
            (got - want).abs() <= 10.0 * h * space.weight(x),
            "at {x}: {got} vs {want}"
        );
    }
}

#[test]
fn heat_semigroup_property_tight() {
    let space = grid(13, 13, 0.1);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    let mut rng = support::rng(97);
    let f = ScalarField::new(&space, support::smooth_field(&space, &mut rng, 1.0)).unwrap();
    let a = heat_flow(&graph, &heat_flow(&graph, &f, 0.015).unwrap(), 0.035).unwrap();
    let b = heat_flow(&graph, &f, 0.05).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-8);
    }
}

#[test]
fn euler_commutation_on_product_grids() {
    // h_t(<grad b, grad f>) = <grad b, grad h_t f> within O(h) for probes
    // supported away from the boundary
    let h = 0.1;
    let spec = GeneratorSpec::Product {
        base: Box::new(GeneratorSpec::EuclideanGrid { dims: vec![9], h }),
        interval: [-2.0, 2.0],
        h,
    };
    let space = generate_space(&spec).unwrap();
    let levels = 41;
    let indices: Vec<usize> = (0..levels).collect();
    let times: Vec<f64> = (0..levels).map(|k| -2.0 + h * k as f64).collect();
    let line = LineSpec::new(&space, indices, times, 1e-9).unwrap();
    let b = busemann_field(&space, &line, &BusemannOptions::default()).unwrap().b();
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    // bump supported well inside
    let f = ScalarField::from_fn(&space, |i| {
        let x = space.coord(i, 0).unwrap() - 0.4;
        let s = space.coord(i, 1).unwrap();
        (-(x * x + s * s) * 4.0).exp()
    })
    .unwrap();
    let t = 0.02;
    let eps = [1e-5];
    let pairing = carre_du_champ(&graph, &b, &f, &eps).unwrap().field;
    let lhs = heat_flow(&graph, &pairing, t).unwrap();
    let flowed = heat_flow(&graph, &f, t).unwrap();
    let rhs = carre_du_champ(&graph, &b, &flowed, &eps).unwrap().field;
    let mut worst = 0.0f64;
    for x in 0..space.n() {
        if graph.is_interior(x) {
            worst = worst.max((lhs.values[x] - rhs.values[x]).abs());
        }
    }
    assert!(worst <= 10.0 * h, "commutation defect {worst}");
}

#[test]
fn laplacian_comparison_on_transport_potentials() {
    // a scaled Kantorovich potential t*phi satisfies Lap(t phi) <= N m + O(h)
    let h = 0.1;
    let space = grid(15, 15, h);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    let mu = ProbMeasure::uniform_on(&space, &(0..30).collect::<Vec<_>>()).unwrap();
    let nu = ProbMeasure::uniform_on(&space, &(195..225).collect::<Vec<_>>()).unwrap();
    let sol = w2_solve(&space, &mu, &nu).unwrap();
    let n_dim = 2.0;
    for &t in &[0.25, 0.5, 1.0] {
        let phi_t = ScalarField::new(
            &space,
            sol.potential.phi.iter().map(|v| t * v).collect(),
        )
        .unwrap();
        let lap = laplacian_measure(&graph, &phi_t).unwrap();
        for x in 0..space.n() {
            if !graph.is_interior(x) {
                continue;
            }
            let excess = lap.masses[x] / space.weight(x) - n_dim;
            assert!(excess <= 10.0 * h, "t = {t}, x = {x}: excess {excess}");
        }
    }
}

#[test]
fn bakry_emery_flat_grid_and_cone_report() {
    let h = 0.1;
    let space = grid(21, 21, h);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    // constant fields are contraction fixed points
    let constant = ScalarField::from_fn(&space, |_| 1.5).unwrap();
    let zero_rows = bakry_emery_check(&graph, &constant, &[0.02]).unwrap();
    assert!(zero_rows[0].max_violation.abs() < 1e-12);
    let f = ScalarField::coordinate(&space, 0).unwrap();
    let slope = slope_field(&graph, &f, SlopeMode::Lip).unwrap();
    let be_tol = 5.0 * h * (1.0 + slope.values.iter().cloned().fold(0.0, f64::max));
    let rows = bakry_emery_check(&graph, &f, &[0.01, 0.05]).unwrap();
    for row in &rows {
        assert!(row.max_violation <= be_tol, "t = {}: {}", row.t, row.max_violation);
    }
    // diagnostic run on a cone: report only, no pass asserted
    let cone =
        generate_space(&GeneratorSpec::Cone { angle: 4.5, radius: 1.5, h: 0.25 }).unwrap();
    let cg = NeighborGraph::radius(&cone, 0.26).unwrap();
    let mut rng = support::rng(5);
    let probe = ScalarField::new(
        &cone,
        (0..cone.n()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect(),
    )
    .unwrap();
    let rows = bakry_emery_check(&cg, &probe, &[0.02]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].max_violation.is_finite());
}

#[test]
fn energy_decay_along_heat_flow() {
    let space = grid(11, 11, 0.1);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    let mut rng = support::rng(13);
    let f = ScalarField::new(&space, support::smooth_field(&space, &mut rng, 2.0)).unwrap();
    let mut prev = dirichlet_energy(&graph, &f, &f).unwrap();
    for &t in &[0.01, 0.05, 0.2, 1.0] {
        let u = heat_flow(&graph, &f, t).unwrap();
        let e = dirichlet_energy(&graph, &u, &u).unwrap();
        assert!(e <= prev + 1e-12, "energy rose at t = {t}");
        prev = e;
    }
}
