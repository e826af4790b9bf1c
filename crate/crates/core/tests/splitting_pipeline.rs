//! End-to-end splitting pipeline on a product grid and the Finsler negative
//! control.

mod support;

use mms_core::calculus::{slope_field, NeighborGraph, ScalarField, SlopeMode};
use mms_core::curvature::{cd_convexity_check, CdOptions};
use mms_core::space::{generate_space, GeneratorSpec, MetricMeasureSpace, PNorm};
use mms_core::splitting::{
    busemann_field, flow_diagnostics, gradient_flow_map, pythagoras_check, quotient_split,
    BusemannOptions, LineSpec, QuotientOptions,
};
use mms_core::transport::ProbMeasure;
use mms_core::Verdict;

fn product_setup(base_pts: usize, half_span: f64, h: f64) -> (MetricMeasureSpace, LineSpec) {
    let spec = GeneratorSpec::Product {
        base: Box::new(GeneratorSpec::EuclideanGrid { dims: vec![base_pts], h }),
        interval: [-half_span, half_span],
        h,
    };
    let space = generate_space(&spec).unwrap();
    let levels = (2.0 * half_span / h).round() as usize + 1;
    let indices: Vec<usize> = (0..levels).collect();
    let times: Vec<f64> = (0..levels).map(|k| -half_span + h * k as f64).collect();
    let line = LineSpec::new(&space, indices, times, 1e-9).unwrap();
    (space, line)
}

#[test]
fn product_pipeline_splits() {
    let h = 0.125;
    let (space, line) = product_setup(5, 2.5, h);
    let bf = busemann_field(&space, &line, &BusemannOptions::default()).unwrap();
    assert_eq!(bf.harmonicity_verdict(), Verdict::Pass);
    assert!(bf.max_abs_gap() <= 1e-9);

    let b = bf.b();
    let graph = NeighborGraph::lattice_axis(&space).unwrap();

    // the limit field has unit slope and vanishing Laplacian density inside
    let slope_b = slope_field(&graph, &b, SlopeMode::Lip).unwrap();
    let lap_b = mms_core::calculus::laplacian_measure(&graph, &b).unwrap();
    for x in 0..space.n() {
        if graph.is_interior(x) {
            assert!((slope_b.values[x] - 1.0).abs() <= 1e-9, "slope at {x}");
            assert!(
                lap_b.masses[x].abs() / space.weight(x) <= 10.0 * h,
                "harmonic defect at {x}"
            );
        }
    }

    let flow = gradient_flow_map(&space, &b, 2.0 * h, Some(&line), None).unwrap();
    let mut rng = support::rng(3);
    let probes = vec![
        ScalarField::new(&space, support::smooth_field(&space, &mut rng, 1.0)).unwrap(),
        ScalarField::from_fn(&space, |i| space.coord(i, 0).unwrap()).unwrap(),
    ];
    let diag =
        flow_diagnostics(&space, &b, &flow, Some(&line), &[h, 2.0 * h], Some(&graph), &probes)
            .unwrap();
    assert!(diag.max_slack <= 1e-9, "slack {}", diag.max_slack);
    assert!(diag.max_dist_dev <= 1e-8);
    assert!(diag.max_b_dev <= 1e-8);
    assert!(diag.group_defect <= 1e-9);
    assert!(diag.pushforward_defect <= 1e-9);
    // duality direction: pushforward and energy preservation passing forces
    // the isometry defect to pass as well
    let energy_ok = diag.energy_defects.iter().all(|d| *d <= 10.0 * h);
    assert!(energy_ok, "energy defects {:?}", diag.energy_defects);
    assert!(
        diag.isometry_defect <= 10.0 * h,
        "duality direction violated: isometry {} with mass/energy clean",
        diag.isometry_defect
    );

    let t_grid: Vec<f64> = (-10..=10).map(|k| k as f64 * h).collect();
    let q = quotient_split(&space, &bf, &t_grid, &line, &QuotientOptions::default()).unwrap();
    assert_eq!(q.n_reps(), 5);
    assert!(q.as_space().validate().is_empty());
    assert!(q.product_measure_defect <= 1e-9);
    assert!(q.flagged_fraction <= 0.2);

    // sample interior pairs
    let t_idx: Vec<usize> = (0..q.t_grid.len())
        .filter(|&ti| q.t_grid[ti].abs() <= 1.25)
        .collect();
    let mut pairs = Vec::new();
    for (a, &ta) in t_idx.iter().enumerate() {
        for &tb in t_idx.iter().skip(a) {
            for ra in 0..q.n_reps() {
                for rb in 0..q.n_reps() {
                    pairs.push(((ra, ta), (rb, tb)));
                }
            }
        }
    }
    let rep = pythagoras_check(&space, &q, &pairs).unwrap();
    assert!(rep.max_rel_defect <= 0.05, "pythagoras {}", rep.max_rel_defect);
    assert!(rep.bilip_ok);
    assert!(rep.embed_max_dev <= 10.0 * h);
    assert_eq!(rep.skipped, 0);

    // quotient curvature at one dimension less
    let qs = q.as_space();
    let mu0 = ProbMeasure::uniform_on(qs, &[0, 1]).unwrap();
    let mu1 = ProbMeasure::uniform_on(qs, &[3, 4]).unwrap();
    let report = cd_convexity_check(
        qs,
        &mu0,
        &mu1,
        1.0,
        &[0.0, 0.5, 1.0],
        2,
        &CdOptions::default(),
    )
    .unwrap();
    assert!(report.all_passed(), "quotient convexity defects {:?}", report.defects);
}

#[test]
fn product_gradient_decomposition_for_separable_probes() {
    // slope^2(g(x') + k(t)) = slope^2(g) + slope^2(k) within O(h) on the
    // reconstructed product, for separable probes on the axis stencil
    let h = 0.1;
    let (space, _line) = product_setup(9, 1.0, h);
    let graph = NeighborGraph::lattice_axis(&space).unwrap();
    let f = ScalarField::from_fn(&space, |i| {
        let xp = space.coord(i, 0).unwrap();
        let t = space.coord(i, 1).unwrap();
        (1.3 * xp).sin() + 0.7 * (0.9 * t).cos()
    })
    .unwrap();
    let g_only = ScalarField::from_fn(&space, |i| (1.3 * space.coord(i, 0).unwrap()).sin()).unwrap();
    let k_only = ScalarField::from_fn(&space, |i| 0.7 * (0.9 * space.coord(i, 1).unwrap()).cos()).unwrap();
    let sf = slope_field(&graph, &f, SlopeMode::Lip).unwrap();
    let sg = slope_field(&graph, &g_only, SlopeMode::Lip).unwrap();
    let sk = slope_field(&graph, &k_only, SlopeMode::Lip).unwrap();
    for x in 0..space.n() {
        if !graph.is_interior(x) {
            continue;
        }
        let lhs = sf.values[x] * sf.values[x];
        let rhs = sg.values[x] * sg.values[x] + sk.values[x] * sk.values[x];
        assert!((lhs - rhs).abs() <= 10.0 * h, "at {x}: {lhs} vs {rhs}");
    }
}

#[test]
fn linf_negative_control_shows_pythagoras_defect_within_bilip() {
    let h = 0.25;
    let side = 4.0;
    let space =
        generate_space(&GeneratorSpec::NormedPlane { p: PNorm::Infinity, side, h }).unwrap();
    let ny = 17;
    let mid = ny / 2;
    let indices: Vec<usize> = (0..ny).map(|ix| ix * ny + mid).collect();
    let times: Vec<f64> = (0..ny).map(|ix| h * ix as f64 - side / 2.0).collect();
    let line = LineSpec::new(&space, indices, times, 1e-9).unwrap();
    let bf = busemann_field(&space, &line, &BusemannOptions::default()).unwrap();
    // the collar gap vanishes: the line itself splits topologically
    assert_ne!(bf.harmonicity_verdict(), Verdict::Fail);

    // half the square (the corner regions) cannot see the line within the
    // truncated span and fails to project; the negative control documents
    // this by raising the flagged-fraction cap rather than hiding it
    let t_grid: Vec<f64> = (-2..=2).map(|k| k as f64 * h).collect();
    let options = QuotientOptions { max_flagged_fraction: 0.6, ..Default::default() };
    let q = quotient_split(&space, &bf, &t_grid, &line, &options).unwrap();
    assert!(q.as_space().validate().is_empty());
    assert!(q.flagged_fraction > 0.2, "expected heavy truncation flagging");

    // interior sample pairs with modest |t|
    let t_idx: Vec<usize> = (0..q.t_grid.len()).collect();
    let mut pairs = Vec::new();
    for &ta in &t_idx {
        for &tb in &t_idx {
            for ra in (0..q.n_reps()).step_by(2) {
                for rb in (0..q.n_reps()).step_by(2) {
                    pairs.push(((ra, ta), (rb, tb)));
                }
            }
        }
    }
    let rep = pythagoras_check(&space, &q, &pairs).unwrap();
    assert!(
        rep.max_rel_defect >= 0.2,
        "expected a Finsler defect, got {}",
        rep.max_rel_defect
    );
    assert!(rep.bilip_ok, "bilip must hold, worst {}", rep.bilip_worst_ratio);
    // quotient recovers the transverse coordinate distance exactly
    assert!(rep.embed_max_dev <= 1e-8, "embed {}", rep.embed_max_dev);
}
