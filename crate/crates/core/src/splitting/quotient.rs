//! The quotient construction and the product-structure verification.

use super::busemann::BusemannField;
use super::flow::FlowStepper;
use super::LineSpec;
use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;
use crate::Verdict;

/// The quotient space of the flow orbits, together with the projection and
/// section tables.
#[derive(Debug)]
pub struct QuotientSpace {
    /// The quotient as a full metric measure space (distance `d'`, weights
    /// `m'`), directly usable by every other module.
    space: MetricMeasureSpace,
    /// Ambient ids of the slab representatives `{ |b| <= h/2 }`.
    pub reps: Vec<usize>,
    /// Per ambient point: quotient id, or `None` when the projecting flow
    /// was flagged unreachable.
    pub proj: Vec<Option<usize>>,
    /// Per ambient point: `(proj, b)`, the section map `S`.
    pub smap: Vec<(Option<usize>, f64)>,
    /// Flow times the section table `T` was built over.
    pub t_grid: Vec<f64>,
    /// `tmap[rep][k]` is the ambient id of `T(rep, t_grid[k])`, when the
    /// flow reaches it.
    pub tmap: Vec<Vec<Option<usize>>>,
    /// Max relative deviation of the slab-cell masses from `m' *` cell
    /// length.
    pub product_measure_defect: f64,
    /// Max defect of `smap(tmap(.))` from the identity, in lattice cells.
    pub smap_tmap_defect: f64,
    /// Fraction of ambient points whose projection was flagged.
    pub flagged_fraction: f64,
}

impl QuotientSpace {
    pub fn as_space(&self) -> &MetricMeasureSpace {
        &self.space
    }

    pub fn iota(&self, rep: usize) -> usize {
        self.reps[rep]
    }

    pub fn n_reps(&self) -> usize {
        self.reps.len()
    }
}

/// Options for [`quotient_split`].
#[derive(Clone, Debug)]
pub struct QuotientOptions {
    pub flow_tol: Option<f64>,
    /// Fail the construction when more than this fraction of points is
    /// flagged unreachable.
    pub max_flagged_fraction: f64,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        Self { flow_tol: None, max_flagged_fraction: 0.2 }
    }
}

/// Builds the quotient space of a Busemann field whose harmonicity verdict
/// did not fail.
///
/// Representatives are the slab `{ |b| <= h/2 }`; each point projects by
/// flowing down its own level (`t = b(x)` rounded to the lattice);
/// `d'(x', y') = min over the time grid of d(F_t(iota(x')), iota(y'))`;
/// `m'(x') = sum of weights over { proj = x', 0 <= b < 1 }`.
pub fn quotient_split(
    space: &MetricMeasureSpace,
    bfield: &BusemannField,
    t_grid: &[f64],
    line: &LineSpec,
    options: &QuotientOptions,
) -> Result<QuotientSpace> {
    if bfield.harmonicity_verdict() == Verdict::Fail {
        return Err(Error::HarmonicityFailed);
    }
    let h = space
        .resolution()
        .ok_or_else(|| Error::ShapeMismatch("quotient needs a lattice resolution".into()))?;
    let n = space.n();
    let b = bfield.b();

    // the slab { |b| <= h/2 }, taken as the zero lattice level so that a
    // representative is a fixed point of its own projection (off-level
    // values inside the slab can only come from bent truncation regions)
    let reps: Vec<usize> = (0..n)
        .filter(|&x| (b.values[x] / h).round() == 0.0 && b.values[x].abs() <= h / 2.0)
        .collect();
    if reps.is_empty() {
        return Err(Error::EmptySlab { half_width: h / 2.0 });
    }
    let mut rep_of = vec![None; n];
    for (rid, &x) in reps.iter().enumerate() {
        rep_of[x] = Some(rid);
    }

    let flow_tol = options.flow_tol.unwrap_or((h * h / 8.0).max(1e-9));
    let stepper = FlowStepper::new(space, &b, h, flow_tol, Some(line))?;

    // projection: flow each point down its own level (t = b(x), which
    // decreases b to zero; negative levels flow in the minus direction).
    // The orbit is walked freely: off-fiber drift still reaches *an* orbit
    // representative, which is what the measure decomposition needs.
    let mut proj: Vec<Option<usize>> = vec![None; n];
    let mut flagged = 0usize;
    for x in 0..n {
        let k = (b.values[x] / h).round();
        let dest = stepper.walk(x, k.abs() as usize, k >= 0.0, None);
        proj[x] = dest.and_then(|y| rep_of[y]);
        if proj[x].is_none() {
            flagged += 1;
        }
    }
    let flagged_fraction = flagged as f64 / n as f64;
    if flagged_fraction > options.max_flagged_fraction {
        return Err(Error::InvalidSpace(format!(
            "{:.1}% of points failed to project; the field does not translate this lattice",
            100.0 * flagged_fraction
        )));
    }

    // the time grid must contain zero so d' is bounded by the slab distance
    let mut t_grid: Vec<f64> = t_grid.to_vec();
    if !t_grid.iter().any(|&t| t == 0.0) {
        t_grid.push(0.0);
    }
    t_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // section table: T(x', t) = F_{-t}(iota(x')). These orbits must stay on
    // their fiber (the section feeds the isometry verification), so drifting
    // steps cut them off.
    let r = reps.len();
    let max_drift = Some(h / 2.0);
    let mut tmap: Vec<Vec<Option<usize>>> = vec![vec![None; t_grid.len()]; r];
    for rid in 0..r {
        for (ti, &t) in t_grid.iter().enumerate() {
            let k = (t / h).round();
            if (t - k * h).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::OffLatticeFlowTime { t, step: h });
            }
            // F_{-t}: flowing by -t raises b to t
            tmap[rid][ti] = stepper.walk(reps[rid], k.abs() as usize, k < 0.0, max_drift);
        }
    }

    // quotient distance: inf over flow times of the orbit distance
    let mut dprime = vec![0.0; r * r];
    for a in 0..r {
        for bq in 0..r {
            if a == bq {
                continue;
            }
            let mut best = f64::INFINITY;
            for ti in 0..t_grid.len() {
                if let Some(y) = tmap[a][ti] {
                    best = best.min(space.d(y, reps[bq]));
                }
            }
            dprime[a * r + bq] = best;
        }
    }
    // symmetrize (the time grids of the two orbits may truncate differently)
    for a in 0..r {
        for bq in (a + 1)..r {
            let v = dprime[a * r + bq].min(dprime[bq * r + a]);
            dprime[a * r + bq] = v;
            dprime[bq * r + a] = v;
        }
    }
    crate::space::quantize_metric(&mut dprime, r);

    // quotient measure: the unit slab band above the zero level, decided on
    // rounded lattice levels so fp dust cannot move a whole level in or out
    let in_unit_band = |bv: f64| -> bool {
        let level = (bv / h).round();
        level >= 0.0 && level * h < 1.0 - 1e-9
    };
    let mut mprime = vec![0.0; r];
    for x in 0..n {
        if let Some(rid) = proj[x] {
            if in_unit_band(b.values[x]) {
                mprime[rid] += space.weight(x);
            }
        }
    }
    if mprime.iter().any(|&m| m <= 0.0) {
        return Err(Error::EmptySlab { half_width: h / 2.0 });
    }

    // product-measure defect over lattice cells [kh, (k+1)h) fully covered
    // by projected points
    let mut product_measure_defect = 0.0f64;
    {
        use std::collections::{BTreeMap, BTreeSet};
        let mut cells: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        let mut polluted: BTreeSet<i64> = BTreeSet::new();
        for x in 0..n {
            let k = (b.values[x] / h).round() as i64;
            match proj[x] {
                Some(rid) => *cells.entry((rid, k)).or_insert(0.0) += space.weight(x),
                // an unprojected point leaves a hole somewhere at this
                // level; skip the whole level rather than misattribute it
                None => {
                    polluted.insert(k);
                }
            }
        }
        for ((rid, k), mass) in &cells {
            if polluted.contains(k) {
                continue;
            }
            let expect = mprime[*rid] * h;
            product_measure_defect =
                product_measure_defect.max((mass - expect).abs() / expect);
        }
    }

    // smap o tmap identity defect, in cells
    let smap: Vec<(Option<usize>, f64)> = (0..n).map(|x| (proj[x], b.values[x])).collect();
    let mut smap_tmap_defect = 0.0f64;
    for rid in 0..r {
        for (ti, &t) in t_grid.iter().enumerate() {
            if let Some(y) = tmap[rid][ti] {
                if let Some(rid_back) = smap[y].0 {
                    let dq = dprime[rid_back * r + rid];
                    let db = (smap[y].1 - t).abs();
                    smap_tmap_defect = smap_tmap_defect.max(dq.max(db) / h);
                }
            }
        }
    }

    let label = format!("{}/quotient", space.label());
    let q_space = MetricMeasureSpace::new(label, dprime, mprime, None, space.resolution())?;

    Ok(QuotientSpace {
        space: q_space,
        reps,
        proj,
        smap,
        t_grid,
        tmap,
        product_measure_defect,
        smap_tmap_defect,
        flagged_fraction,
    })
}

/// One sampled pair of the product-distance verification.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PythagorasRow {
    pub rep_a: usize,
    pub t_a: f64,
    pub rep_b: usize,
    pub t_b: f64,
    /// `d(T(a, t_a), T(b, t_b))^2`.
    pub ambient_sq: f64,
    /// `d'(a, b)^2 + (t_a - t_b)^2`.
    pub product_sq: f64,
    /// `|ambient_sq - product_sq| / max(ambient_sq, h^2)`.
    pub rel_defect: f64,
}

/// Report of [`pythagoras_check`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct PythagorasReport {
    pub rows: Vec<PythagorasRow>,
    pub max_rel_defect: f64,
    pub mean_rel_defect: f64,
    /// Whether `1/sqrt(2) <= d(T,T)/sqrt(d'^2 + dt^2) <= sqrt(2)` held on
    /// every sampled pair.
    pub bilip_ok: bool,
    /// Worst bilipschitz ratio deviation from `[1/sqrt2, sqrt2]`.
    pub bilip_worst_ratio: f64,
    /// `max |d'(a,b) - d(iota(a), iota(b))|`.
    pub embed_max_dev: f64,
    /// Pairs skipped because a section point was unreachable.
    pub skipped: usize,
}

/// Verifies the product-distance identity
/// `d(T(a,t), T(b,s))^2 = d'(a,b)^2 + |t-s|^2` on the sampled pairs, the
/// unconditional bilipschitz envelope, and the isometric-embedding defect of
/// the slab section.
pub fn pythagoras_check(
    space: &MetricMeasureSpace,
    quotient: &QuotientSpace,
    pairs: &[((usize, usize), (usize, usize))],
) -> Result<PythagorasReport> {
    let h = space.resolution().unwrap_or(1e-3);
    let r = quotient.n_reps();
    let q = quotient.as_space();
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let mut bilip_ok = true;
    let mut bilip_worst: f64 = 1.0;
    for &((ra, ta_i), (rb, tb_i)) in pairs {
        if ra >= r || rb >= r || ta_i >= quotient.t_grid.len() || tb_i >= quotient.t_grid.len() {
            return Err(Error::ShapeMismatch("sample pair out of range".into()));
        }
        let (ya, yb) = match (quotient.tmap[ra][ta_i], quotient.tmap[rb][tb_i]) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                skipped += 1;
                continue;
            }
        };
        let t_a = quotient.t_grid[ta_i];
        let t_b = quotient.t_grid[tb_i];
        let amb = space.d(ya, yb);
        let dq = q.d(ra, rb);
        let prod_sq = dq * dq + (t_a - t_b) * (t_a - t_b);
        let rel = (amb * amb - prod_sq).abs() / (amb * amb).max(h * h);
        if prod_sq > 0.0 {
            let ratio = amb / prod_sq.sqrt();
            let lo = 1.0 / 2f64.sqrt() - 1e-9;
            let hi = 2f64.sqrt() + 1e-9;
            if ratio < lo || ratio > hi {
                bilip_ok = false;
            }
            bilip_worst = bilip_worst.max(ratio.max(1.0 / ratio.max(1e-300)));
        }
        rows.push(PythagorasRow {
            rep_a: ra,
            t_a,
            rep_b: rb,
            t_b,
            ambient_sq: amb * amb,
            product_sq: prod_sq,
            rel_defect: rel,
        });
    }

    let mut embed_max_dev = 0.0f64;
    for a in 0..r {
        for b in (a + 1)..r {
            let dev = (q.d(a, b) - space.d(quotient.iota(a), quotient.iota(b))).abs();
            embed_max_dev = embed_max_dev.max(dev);
        }
    }

    let max_rel_defect = rows.iter().map(|r| r.rel_defect).fold(0.0, f64::max);
    let mean_rel_defect = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.rel_defect).sum::<f64>() / rows.len() as f64
    };
    Ok(PythagorasReport {
        rows,
        max_rel_defect,
        mean_rel_defect,
        bilip_ok,
        bilip_worst_ratio: bilip_worst,
        embed_max_dev,
        skipped,
    })
}
