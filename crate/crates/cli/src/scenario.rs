//! Task runners. Each produces a [`Report`]; no report file is written when
//! input validation fails.

use crate::inputs::{self, LoadedSpace};
use crate::report::{Check, Report};
use crate::tolerances::Tolerances;
use mms_core::calculus::{
    bakry_emery_check, carre_du_champ, heat_flow, heat_kernel, laplacian_comparison,
    laplacian_measure, slope_field, NeighborGraph, ScalarField, SlopeMode,
};
use mms_core::curvature::{cd_convexity_check, CdOptions};
use mms_core::formats;
use mms_core::space::MetricMeasureSpace;
use mms_core::splitting::{
    busemann_field, flow_diagnostics, gradient_flow_map, pythagoras_check, quotient_split,
    BusemannField, BusemannOptions, QuotientOptions, QuotientSpace,
};
use mms_core::transport::{w2_solve, ProbMeasure};
use mms_core::Verdict;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub struct Context<'a> {
    pub loaded: &'a LoadedSpace,
    pub tol: &'a Tolerances,
    pub out: &'a Path,
    pub seed: u64,
    pub dimension: f64,
    pub t_grid: Option<Vec<f64>>,
    pub mu: Option<String>,
    pub nu: Option<String>,
    pub line: Option<String>,
}

impl Context<'_> {
    fn space(&self) -> &MetricMeasureSpace {
        &self.loaded.space
    }

    fn resolution(&self) -> Result<f64, String> {
        self.space()
            .resolution()
            .ok_or_else(|| "this task needs a lattice space (generator-backed)".to_string())
    }
}

pub fn run_validate(ctx: &Context) -> Result<Report, String> {
    let mut report = Report::new("validate", ctx.space().label(), ctx.seed);
    let validation = ctx.space().validate();
    report.push(Check::gate(
        "metric and weight invariants",
        "space.invariants",
        validation.violations.len() as f64,
        0.0,
    ));
    report.value("violations", validation.violations.len() as f64);
    if !validation.is_empty() {
        let text = serde_json::to_string_pretty(&validation).map_err(|e| e.to_string())?;
        std::fs::create_dir_all(ctx.out).map_err(|e| e.to_string())?;
        std::fs::write(ctx.out.join("violations.json"), text).map_err(|e| e.to_string())?;
        report.artifacts.push("violations.json".into());
    }
    Ok(report)
}

pub fn run_w2(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let mu_arg = ctx.mu.as_deref().ok_or("w2 needs --mu")?;
    let nu_arg = ctx.nu.as_deref().ok_or("w2 needs --nu")?;
    let mu = inputs::load_measure(space, mu_arg)?;
    let nu = inputs::load_measure(space, nu_arg)?;

    let mut report = Report::new("w2", space.label(), ctx.seed);
    let sol = w2_solve(space, &mu, &nu).map_err(|e| e.to_string())?;
    report.value("w2", sol.value);
    report.value("cost", sol.plan.cost);

    let dual: f64 = (0..space.n())
        .map(|i| {
            sol.potential.phi[i] * mu.mass(space, i) + sol.potential.phic[i] * nu.mass(space, i)
        })
        .sum();
    report.push(Check::gate(
        "strong duality gap",
        "transport.duality-gap",
        (dual - sol.plan.cost / 2.0).abs(),
        ctx.tol.get("transport.duality_gap"),
    ));
    report.push(Check::gate(
        "marginal conservation",
        "transport.marginals",
        sol.plan.marginal_defect(space),
        ctx.tol.get("transport.marginal"),
    ));
    let support_slack = sol
        .plan
        .support()
        .iter()
        .filter(|(_, _, m)| *m > 1e-12)
        .map(|&(i, j, _)| sol.potential.slack(space, i, j).abs())
        .fold(0.0, f64::max);
    report.push(Check::gate(
        "complementary slackness on the support",
        "transport.support-slack",
        support_slack,
        ctx.tol.get("transport.support_slack"),
    ));
    report.push(Check::with_verdict(
        "optimal plan uniqueness",
        "transport.plan-uniqueness",
        if sol.degenerate { 1.0 } else { 0.0 },
        0.0,
        if sol.degenerate { Verdict::Inconclusive } else { Verdict::Pass },
    ));

    std::fs::create_dir_all(ctx.out).map_err(|e| e.to_string())?;
    formats::write_coupling_csv(&sol.plan, &ctx.out.join("coupling.csv"))
        .map_err(|e| e.to_string())?;
    report.artifacts.push("coupling.csv".into());
    Ok(report)
}

pub fn run_cd(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let mu_arg = ctx.mu.as_deref().ok_or("cd needs --mu")?;
    let nu_arg = ctx.nu.as_deref().ok_or("cd needs --nu")?;
    let mu = inputs::load_measure(space, mu_arg)?;
    let nu = inputs::load_measure(space, nu_arg)?;
    let t_grid = ctx
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let steps = 4.max(t_grid.len() - 1);

    let tol_entry = ctx.tol.get("entropy.defect_abs");
    let options = CdOptions {
        cd_tol: if tol_entry.is_nan() { None } else { Some(tol_entry) },
        n_prime: None,
    };
    let cd = cd_convexity_check(space, &mu, &nu, ctx.dimension, &t_grid, steps, &options)
        .map_err(|e| e.to_string())?;

    let mut report = Report::new("cd", space.label(), ctx.seed);
    for (k, &np) in cd.n_values.iter().enumerate() {
        report.push(Check::with_verdict(
            &format!("entropy convexity at parameter {np}"),
            "entropy.convexity",
            cd.defects[k],
            cd.cd_tol,
            cd.verdicts[k],
        ));
    }
    report.value("cd_tol", cd.cd_tol);
    report.value("flagged_pairs", cd.flagged_pairs as f64);
    report.value("degenerate_plan", if cd.degenerate_plan { 1.0 } else { 0.0 });

    std::fs::create_dir_all(ctx.out).map_err(|e| e.to_string())?;
    let full = serde_json::to_string_pretty(&cd).map_err(|e| e.to_string())?;
    std::fs::write(ctx.out.join("entropy_report.json"), full).map_err(|e| e.to_string())?;
    report.artifacts.push("entropy_report.json".into());
    let mut rows = Vec::new();
    for (s, &t) in cd.t_grid.iter().enumerate() {
        let mut row = vec![t];
        for k in 0..cd.n_values.len() {
            row.push(cd.values[k][s]);
        }
        rows.push(row);
    }
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(cd.n_values.iter().map(|np| format!("entropy_{np}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    formats::write_csv(&ctx.out.join("entropy_curve.csv"), &header_refs, &rows)
        .map_err(|e| e.to_string())?;
    report.artifacts.push("entropy_curve.csv".into());
    Ok(report)
}

pub fn run_hilbert(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let graph = NeighborGraph::lattice_eight(space).map_err(|e| e.to_string())?;
    let x = ScalarField::coordinate(space, 0).map_err(|e| e.to_string())?;
    let y = ScalarField::coordinate(space, 1).map_err(|e| e.to_string())?;
    let cc = carre_du_champ(&graph, &x, &y, &[1e-2, 1e-3, 1e-4]).map_err(|e| e.to_string())?;

    let mut report = Report::new("hilbert", space.label(), ctx.seed);
    report.push(Check::gate(
        "parallelogram defect of the squared-slope energy",
        "hilbert.parallelogram",
        cc.hilbert_defect,
        ctx.tol.get("hilbert.defect"),
    ));
    report.value("hilbert_defect", cc.hilbert_defect);
    report.value("pairing_max_abs", cc.field.max_abs());
    Ok(report)
}

pub fn run_laplace(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let h = ctx.resolution()?;
    let graph = NeighborGraph::lattice_axis(space).map_err(|e| e.to_string())?;
    // default center: the point minimizing the max distance
    let center = (0..space.n())
        .min_by(|&a, &b| {
            let ea = (0..space.n()).map(|i| space.d(a, i)).fold(0.0, f64::max);
            let eb = (0..space.n()).map(|i| space.d(b, i)).fold(0.0, f64::max);
            ea.partial_cmp(&eb).unwrap()
        })
        .unwrap();
    let r_min = ctx.tol.get("laplace.annulus_min_cells") * h;
    let r_max = ctx.tol.get("laplace.annulus_max");
    let cmp = laplacian_comparison(space, &graph, center, ctx.dimension, r_min, r_max)
        .map_err(|e| e.to_string())?;

    let mut report = Report::new("laplace", space.label(), ctx.seed);
    report.push(Check::gate(
        "distance laplacian against the dimension bound",
        "laplacian.distance-comparison",
        cmp.max_relative_excess,
        ctx.tol.get("laplace.relative_excess"),
    ));
    if space.points().is_some() {
        let linear = ScalarField::from_fn(space, |i| {
            1.3 * space.coord(i, 0).unwrap_or(0.0) - 0.7 * space.coord(i, 1).unwrap_or(0.0)
        })
        .map_err(|e| e.to_string())?;
        let lap = laplacian_measure(&graph, &linear).map_err(|e| e.to_string())?;
        let worst = (0..space.n())
            .filter(|&i| graph.is_interior(i))
            .map(|i| lap.masses[i].abs())
            .fold(0.0, f64::max);
        report.push(Check::gate(
            "linear fields have zero interior laplacian",
            "laplacian.linear-kernel",
            worst,
            ctx.tol.get("laplace.linear_interior"),
        ));
    }
    report.value("annulus_points", cmp.rows.len() as f64);
    Ok(report)
}

pub fn run_heat(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let graph = NeighborGraph::lattice_axis(space).map_err(|e| e.to_string())?;
    let t_grid = ctx.t_grid.clone().unwrap_or_else(|| vec![0.01, 0.05]);
    let probe = inputs::seeded_probe(space, ctx.seed, 1.0)
        .ok_or("heat task needs coordinate data for its probe field")?;

    let mut report = Report::new("heat", space.label(), ctx.seed);
    let mass =
        |u: &ScalarField| -> f64 { u.values.iter().zip(graph.weights()).map(|(v, w)| v * w).sum() };
    let m0 = mass(&probe);
    let mut worst_mass = 0.0f64;
    for &t in &t_grid {
        let flowed = heat_flow(&graph, &probe, t).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((mass(&flowed) - m0).abs());
    }
    report.push(Check::gate(
        "mass conservation",
        "heat.mass-conservation",
        worst_mass,
        ctx.tol.get("heat.mass"),
    ));

    let t = t_grid.iter().cloned().fold(0.0, f64::max).max(0.02);
    let half = heat_flow(&graph, &probe, t / 2.0).map_err(|e| e.to_string())?;
    let two_step = heat_flow(&graph, &half, t / 2.0).map_err(|e| e.to_string())?;
    let direct = heat_flow(&graph, &probe, t).map_err(|e| e.to_string())?;
    let semigroup = two_step
        .values
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report.push(Check::gate(
        "semigroup composition",
        "heat.semigroup",
        semigroup,
        ctx.tol.get("heat.semigroup"),
    ));

    let center = (space.n() - 1) / 2;
    let (rho, diag) = heat_kernel(space, &graph, center, t).map_err(|e| e.to_string())?;
    let kernel_mass: f64 = rho
        .density()
        .iter()
        .zip(graph.weights())
        .map(|(d, w)| d * w)
        .sum();
    report.push(Check::gate(
        "kernel row is a probability measure",
        "heat.kernel-mass",
        (kernel_mass - 1.0).abs(),
        ctx.tol.get("heat.kernel_mass"),
    ));
    report.push(Check::with_verdict(
        "kernel decay slope is positive",
        "heat.kernel-decay",
        diag.slope,
        diag.reference,
        if diag.slope > 0.0 { Verdict::Pass } else { Verdict::Fail },
    ));
    report.value("kernel_decay_slope", diag.slope);
    report.value("kernel_decay_reference", diag.reference);

    std::fs::create_dir_all(ctx.out).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = (0..space.n())
        .map(|i| vec![i as f64, space.d(center, i), rho.density()[i]])
        .collect();
    formats::write_csv(&ctx.out.join("kernel_row.csv"), &["id", "dist", "density"], &rows)
        .map_err(|e| e.to_string())?;
    report.artifacts.push("kernel_row.csv".into());
    Ok(report)
}

pub fn run_be(ctx: &Context) -> Result<Report, String> {
    let space = ctx.space();
    let h = ctx.resolution()?;
    let graph = NeighborGraph::lattice_axis(space).map_err(|e| e.to_string())?;
    let t_grid = ctx.t_grid.clone().unwrap_or_else(|| vec![0.01, 0.05]);
    let probe = ScalarField::coordinate(space, 0).map_err(|e| e.to_string())?;
    let max_slope = slope_field(&graph, &probe, SlopeMode::Lip)
        .map_err(|e| e.to_string())?
        .values
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let be_tol = ctx.tol.get("be.tol_cells") * h * (1.0 + max_slope);
    let rows = bakry_emery_check(&graph, &probe, &t_grid).map_err(|e| e.to_string())?;

    let mut report = Report::new("be", space.label(), ctx.seed);
    for row in &rows {
        report.push(Check::gate(
            &format!("gradient contraction at t = {}", row.t),
            "contraction.gradient-flow",
            row.max_violation,
            be_tol,
        ));
    }
    report.value("be_tol", be_tol);
    Ok(report)
}

struct SplitOutcome {
    report: Report,
    quotient: Option<QuotientSpace>,
    field: BusemannField,
}

fn run_split_stages(ctx: &Context, task: &str) -> Result<SplitOutcome, String> {
    let space = ctx.space();
    let h = ctx.resolution()?;
    let lattice = ctx.tol.get("split.lattice_factor") * h;
    let line = inputs::resolve_line(ctx.loaded, ctx.line.as_deref(), ctx.tol.get("line.tol"))?;
    let mut report = Report::new(task, space.label(), ctx.seed);

    // stage: limit field
    let bf = busemann_field(space, &line, &BusemannOptions::default())
        .map_err(|e| e.to_string())?;
    report.push(Check::with_verdict(
        "field gap vanishes near the line",
        "field.collar-gap",
        bf.collar_gap,
        ctx.tol.get("split.gap"),
        bf.harmonicity_verdict(),
    ));
    report.value("max_abs_gap", bf.max_abs_gap());
    report.value("transverse_diameter", bf.transverse_diameter);
    report.value("low_confidence", if bf.low_confidence { 1.0 } else { 0.0 });

    // harmonic defect of the field through the quadratic form
    let graph = NeighborGraph::lattice_axis(space).map_err(|e| e.to_string())?;
    let b = bf.b();
    let lap = laplacian_measure(&graph, &b).map_err(|e| e.to_string())?;
    let harmonic_defect = (0..space.n())
        .filter(|&i| graph.is_interior(i))
        .map(|i| lap.masses[i].abs() / space.weight(i))
        .fold(0.0, f64::max);
    report.push(Check::gate(
        "field is harmonic on the interior",
        "field.harmonic-interior",
        harmonic_defect,
        lattice,
    ));

    if bf.harmonicity_verdict() == Verdict::Fail {
        report.value("pipeline_stopped_at", 1.0);
        return Ok(SplitOutcome { report, quotient: None, field: bf });
    }

    // stage: flow diagnostics at small lattice times
    let flow = gradient_flow_map(space, &b, 2.0 * h, Some(&line), None)
        .map_err(|e| e.to_string())?;
    let mut probes = vec![];
    if let Some(p) = inputs::seeded_probe(space, ctx.seed ^ 0x5eed, 1.0) {
        probes.push(p);
    }
    let diag = flow_diagnostics(space, &b, &flow, Some(&line), &[h], Some(&graph), &probes)
        .map_err(|e| e.to_string())?;
    report.push(Check::gate(
        "flow slack on unflagged points",
        "flow.slack",
        diag.max_slack,
        ctx.tol.get("split.slack"),
    ));
    report.push(Check::gate("flow group law", "flow.group-law", diag.group_defect, lattice));
    report.push(Check::gate(
        "flow pushforward of the weights",
        "flow.pushforward",
        diag.pushforward_defect,
        lattice,
    ));
    for (k, e) in diag.energy_defects.iter().enumerate() {
        report.push(Check::gate(
            &format!("flow energy preservation (probe {k})"),
            "flow.energy",
            *e,
            lattice,
        ));
    }
    report.push(Check::gate(
        "flow isometry on unflagged pairs",
        "flow.isometry",
        diag.isometry_defect,
        lattice,
    ));
    report.push(Check::gate(
        "flagged fraction under the cap",
        "flow.flagged-cap",
        diag.flagged_fraction,
        ctx.tol.get("split.max_flagged"),
    ));

    // stage: quotient
    let span = line.span_length();
    let t_max = (span / 2.0 / h).floor() as i64;
    let t_grid: Vec<f64> = ctx
        .t_grid
        .clone()
        .unwrap_or_else(|| (-t_max..=t_max).map(|k| k as f64 * h).collect());
    let q_options = QuotientOptions {
        flow_tol: None,
        max_flagged_fraction: ctx.tol.get("split.max_flagged"),
    };
    let q = quotient_split(space, &bf, &t_grid, &line, &q_options).map_err(|e| e.to_string())?;
    report.push(Check::gate(
        "quotient distance is a valid metric",
        "quotient.metric",
        q.as_space().validate().violations.len() as f64,
        0.0,
    ));
    report.push(Check::gate(
        "slab measure factorizes",
        "quotient.product-measure",
        q.product_measure_defect,
        lattice,
    ));
    report.push(Check::gate(
        "section identity within one cell",
        "quotient.section-identity",
        q.smap_tmap_defect,
        1.0,
    ));
    report.value("reps", q.n_reps() as f64);
    report.value("quotient_flagged_fraction", q.flagged_fraction);

    // stage: product identity on seeded interior samples
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let interior_t: Vec<usize> = (0..q.t_grid.len())
        .filter(|&ti| q.t_grid[ti].abs() <= span / 4.0)
        .collect();
    let samples = ctx.tol.get("split.samples") as usize;
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let ra = rng.random_range(0..q.n_reps());
        let rb = rng.random_range(0..q.n_reps());
        let ta = interior_t[rng.random_range(0..interior_t.len())];
        let tb = interior_t[rng.random_range(0..interior_t.len())];
        pairs.push(((ra, ta), (rb, tb)));
    }
    let pyth = pythagoras_check(space, &q, &pairs).map_err(|e| e.to_string())?;
    report.push(Check::gate(
        "product distance identity",
        "splitting.product-identity",
        pyth.max_rel_defect,
        ctx.tol.get("split.pythagoras_rel"),
    ));
    report.push(Check::with_verdict(
        "bilipschitz envelope",
        "splitting.bilipschitz-envelope",
        pyth.bilip_worst_ratio,
        2f64.sqrt(),
        if pyth.bilip_ok { Verdict::Pass } else { Verdict::Fail },
    ));
    report.value("pythagoras_mean_defect", pyth.mean_rel_defect);
    report.value("embedding_max_dev", pyth.embed_max_dev);
    report.value("pythagoras_skipped", pyth.skipped as f64);

    std::fs::create_dir_all(ctx.out).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = pyth
        .rows
        .iter()
        .map(|r| vec![r.ambient_sq, r.product_sq])
        .collect();
    formats::write_csv(
        &ctx.out.join("pythagoras_scatter.csv"),
        &["ambient_sq", "product_sq"],
        &rows,
    )
    .map_err(|e| e.to_string())?;
    report.artifacts.push("pythagoras_scatter.csv".into());
    formats::write_space(q.as_space(), &ctx.out.join("quotient_space.json"))
        .map_err(|e| e.to_string())?;
    report.artifacts.push("quotient_space.json".into());

    Ok(SplitOutcome { report, quotient: Some(q), field: bf })
}

pub fn run_split(ctx: &Context) -> Result<Report, String> {
    Ok(run_split_stages(ctx, "split")?.report)
}

pub fn run_full_pipeline(ctx: &Context) -> Result<Report, String> {
    let outcome = run_split_stages(ctx, "full-pipeline")?;
    let mut report = outcome.report;
    let Some(q) = outcome.quotient else {
        return Ok(report);
    };
    let _ = outcome.field;

    // final stage: curvature of the quotient one dimension down
    let qs = q.as_space();
    let n_next = (ctx.dimension - 1.0).max(1.0);
    let r = q.n_reps();
    if r >= 2 {
        let third = (r / 3).max(1);
        let mu = ProbMeasure::uniform_on(qs, &(0..third).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        let nu = ProbMeasure::uniform_on(qs, &((r - third)..r).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        let cd = cd_convexity_check(
            qs,
            &mu,
            &nu,
            n_next,
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            4,
            &CdOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        for (k, &np) in cd.n_values.iter().enumerate() {
            report.push(Check::with_verdict(
                &format!("quotient entropy convexity at parameter {np}"),
                "quotient.convexity",
                cd.defects[k],
                cd.cd_tol,
                cd.verdicts[k],
            ));
        }
    } else {
        // a single-point quotient is the degenerate branch: nothing to test
        report.value("quotient_is_point", 1.0);
    }
    Ok(report)
}
