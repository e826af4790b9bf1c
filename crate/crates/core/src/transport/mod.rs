//! Exact discrete quadratic optimal transport: the W2 distance, optimal
//! couplings, Kantorovich potentials and their c-transform algebra, and
//! displacement interpolation along discrete geodesics.

mod simplex;

pub use simplex::{solve_transport, TransportSolution};

use crate::error::{Error, Result};
use crate::space::{discrete_geodesic, MetricMeasureSpace};

/// Tolerance for the probability-mass invariant of [`ProbMeasure`].
pub const MASS_TOL: f64 = 1e-12;

/// A probability measure recorded as a density with respect to the point
/// weights: the mass at `i` is `density[i] * weight[i]`.
#[derive(Clone, Debug)]
pub struct ProbMeasure {
    space_uid: u64,
    density: Vec<f64>,
}

impl ProbMeasure {
    /// Validates nonnegativity and unit total mass (within `1e-12`).
    pub fn from_density(space: &MetricMeasureSpace, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.n() {
            return Err(Error::ShapeMismatch(format!(
                "density has {} entries for {} points",
                density.len(),
                space.n()
            )));
        }
        if density.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidMeasure("negative or non-finite density".into()));
        }
        let total: f64 = density.iter().zip(space.weights()).map(|(d, w)| d * w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} != 1")));
        }
        Ok(Self { space_uid: space.uid(), density })
    }

    /// Builds the measure from point masses, normalizing to total mass one.
    pub fn from_masses(space: &MetricMeasureSpace, masses: &[f64]) -> Result<Self> {
        if masses.len() != space.n() {
            return Err(Error::ShapeMismatch("mass vector length".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        let density: Vec<f64> = masses
            .iter()
            .zip(space.weights())
            .map(|(m, w)| (m / total) / w)
            .collect();
        Self::from_density(space, density)
    }

    /// The Dirac measure at `i`.
    pub fn dirac(space: &MetricMeasureSpace, i: usize) -> Result<Self> {
        let mut masses = vec![0.0; space.n()];
        masses[i] = 1.0;
        Self::from_masses(space, &masses)
    }

    /// Uniform measure (density constant) on the whole space.
    pub fn uniform(space: &MetricMeasureSpace) -> Result<Self> {
        Self::uniform_on(space, &(0..space.n()).collect::<Vec<_>>())
    }

    /// Uniform measure on the given support.
    pub fn uniform_on(space: &MetricMeasureSpace, support: &[usize]) -> Result<Self> {
        let mut masses = vec![0.0; space.n()];
        for &i in support {
            masses[i] = space.weight(i);
        }
        Self::from_masses(space, &masses)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self, space: &MetricMeasureSpace, i: usize) -> f64 {
        self.density[i] * space.weight(i)
    }

    /// Indices with strictly positive density.
    pub fn support(&self) -> Vec<usize> {
        (0..self.density.len()).filter(|&i| self.density[i] > 0.0).collect()
    }

    pub fn space_uid(&self) -> u64 {
        self.space_uid
    }

    pub(crate) fn check_space(&self, space: &MetricMeasureSpace) -> Result<()> {
        space.check_uid(self.space_uid, "measure")
    }
}

/// A coupling between two probability measures: a nonnegative joint-mass
/// matrix whose row and column sums reproduce the marginal masses.
#[derive(Clone, Debug)]
pub struct Coupling {
    space_uid: u64,
    n: usize,
    matrix: Vec<f64>,
    /// `sum pi_xy d(x, y)^2`.
    pub cost: f64,
    pub marginals: (ProbMeasure, ProbMeasure),
}

impl Coupling {
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Support entries `(i, j, mass)` with positive mass.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let m = self.matrix[i * self.n + j];
                if m > 0.0 {
                    out.push((i, j, m));
                }
            }
        }
        out
    }

    /// Largest deviation of the row/column sums from the marginal masses.
    pub fn marginal_defect(&self, space: &MetricMeasureSpace) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.matrix[i * n + j]).sum();
            worst = worst.max((row - self.marginals.0.mass(space, i)).abs());
            let col: f64 = (0..n).map(|j| self.matrix[j * n + i]).sum();
            worst = worst.max((col - self.marginals.1.mass(space, i)).abs());
        }
        worst
    }

    pub(crate) fn check_space(&self, space: &MetricMeasureSpace) -> Result<()> {
        space.check_uid(self.space_uid, "coupling")
    }
}

/// A Kantorovich potential pair for the cost `d^2 / 2`.
#[derive(Clone, Debug)]
pub struct Potential {
    space_uid: u64,
    pub phi: Vec<f64>,
    /// The c-transform of `phi`, recomputed exactly over the whole space.
    pub phic: Vec<f64>,
    /// Whether `phi^cc = phi` held entrywise within `1e-9` at construction.
    pub c_concave: bool,
}

impl Potential {
    /// `d^2(x, y) / 2 - phi(x) - phi^c(y)`, nonnegative up to fp noise.
    pub fn slack(&self, space: &MetricMeasureSpace, x: usize, y: usize) -> f64 {
        0.5 * space.d(x, y) * space.d(x, y) - self.phi[x] - self.phic[y]
    }

    pub fn space_uid(&self) -> u64 {
        self.space_uid
    }

    /// Full slack matrix, row-major.
    pub fn slack_matrix(&self, space: &MetricMeasureSpace) -> Vec<f64> {
        let n = space.n();
        let mut out = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                out[x * n + y] = self.slack(space, x, y);
            }
        }
        out
    }

}

/// Result of [`w2_solve`].
#[derive(Clone, Debug)]
pub struct W2Solution {
    /// The quadratic Wasserstein distance, `sqrt(cost)`.
    pub value: f64,
    pub plan: Coupling,
    pub potential: Potential,
    /// A second optimal vertex exists within `1e-9` of the optimum.
    pub degenerate: bool,
}

/// Exact quadratic optimal transport between two measures on one space.
///
/// The plan minimizes `sum pi_xy d(x,y)^2` over all couplings (vertex method,
/// no entropic smoothing). The potential satisfies complementary slackness on
/// the support and strong duality
/// `sum phi dmu + sum phi^c dnu = cost / 2` to fp accuracy; `phi` is gauged
/// so that `min phi = 0`.
pub fn w2_solve(
    space: &MetricMeasureSpace,
    mu: &ProbMeasure,
    nu: &ProbMeasure,
) -> Result<W2Solution> {
    mu.check_space(space)?;
    nu.check_space(space)?;
    let n = space.n();

    let supp_mu = mu.support();
    let supp_nu = nu.support();
    let supply: Vec<f64> = supp_mu.iter().map(|&i| mu.mass(space, i)).collect();
    let demand: Vec<f64> = supp_nu.iter().map(|&j| nu.mass(space, j)).collect();
    let mut cost = vec![0.0; supp_mu.len() * supp_nu.len()];
    for (a, &i) in supp_mu.iter().enumerate() {
        for (b, &j) in supp_nu.iter().enumerate() {
            let d = space.d(i, j);
            cost[a * supp_nu.len() + b] = d * d;
        }
    }

    let sol = solve_transport(&cost, &supply, &demand, 1e-9);

    let mut matrix = vec![0.0; n * n];
    for &(a, b, f) in &sol.flows {
        matrix[supp_mu[a] * n + supp_nu[b]] = f;
    }
    let plan = Coupling {
        space_uid: space.uid(),
        n,
        matrix,
        cost: sol.objective,
        marginals: (mu.clone(), nu.clone()),
    };

    // potentials for cost d^2/2: halve the duals, extend to the whole space
    // through the support of nu, then gauge min phi = 0
    let psi: Vec<f64> = sol.duals_v.iter().map(|v| v / 2.0).collect();
    let mut phi = vec![0.0; n];
    for x in 0..n {
        let mut best = f64::INFINITY;
        for (b, &j) in supp_nu.iter().enumerate() {
            let d = space.d(x, j);
            best = best.min(0.5 * d * d - psi[b]);
        }
        phi[x] = best;
    }
    let gauge = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in &mut phi {
        *v -= gauge;
    }
    let phic = c_transform(space, &phi)?;
    let phicc = c_transform(space, &phic)?;
    let c_concave = phi
        .iter()
        .zip(&phicc)
        .all(|(a, b)| (a - b).abs() <= 1e-9);

    Ok(W2Solution {
        value: sol.objective.max(0.0).sqrt(),
        plan,
        potential: Potential { space_uid: space.uid(), phi, phic, c_concave },
        degenerate: sol.degenerate,
    })
}

/// The c-transform `phi^c(y) = min_x d^2(x, y) / 2 - phi(x)`, evaluated
/// exactly as a pointwise minimum over the finite space.
pub fn c_transform(space: &MetricMeasureSpace, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != space.n() {
        return Err(Error::ShapeMismatch("potential length".into()));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMeasure("potential must be finite".into()));
    }
    let n = space.n();
    let mut out = vec![0.0; n];
    crate::par::for_chunks(&mut out, 64, |start, chunk| {
        for (off, slot) in chunk.iter_mut().enumerate() {
            let y = start + off;
            let mut best = f64::INFINITY;
            for x in 0..n {
                let d = space.d(x, y);
                let v = 0.5 * d * d - phi[x];
                if v < best {
                    best = v;
                }
            }
            *slot = best;
        }
    });
    Ok(out)
}

/// Outcome of [`c_concavity_check`].
#[derive(Clone, Debug)]
pub struct CConcavityReport {
    pub is_c_concave: bool,
    /// `max_i |phi^cc(i) - phi(i)|`.
    pub max_deviation: f64,
    /// Pairs `(x, y)` whose slack `d^2/2 - phi(x) - phi^c(y)` is `<= tol`.
    pub superdifferential: Vec<(usize, usize)>,
}

/// Tests `phi^cc = phi` within `tol` and returns the near-zero-slack pair
/// set of the potential pair `(phi, phi^c)`.
pub fn c_concavity_check(
    space: &MetricMeasureSpace,
    phi: &[f64],
    tol: f64,
) -> Result<CConcavityReport> {
    let phic = c_transform(space, phi)?;
    let phicc = c_transform(space, &phic)?;
    let max_deviation = phi
        .iter()
        .zip(&phicc)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let n = space.n();
    let mut superdifferential = Vec::new();
    for x in 0..n {
        for y in 0..n {
            let d = space.d(x, y);
            if 0.5 * d * d - phi[x] - phic[y] <= tol {
                superdifferential.push((x, y));
            }
        }
    }
    Ok(CConcavityReport { is_c_concave: max_deviation <= tol, max_deviation, superdifferential })
}

/// Displacement interpolation result with geodesic-quality metadata.
#[derive(Clone, Debug)]
pub struct Interpolated {
    pub measure: ProbMeasure,
    /// Number of coupled pairs routed along an over-tolerance geodesic.
    pub flagged_pairs: usize,
}

/// Pushes every coupled pair of the plan along its discrete geodesic to
/// parameter `t` and accumulates the transported mass. At `t = 0` and
/// `t = 1` the marginals are returned exactly.
pub fn displacement_interpolation(
    space: &MetricMeasureSpace,
    plan: &Coupling,
    t: f64,
    steps: usize,
) -> Result<Interpolated> {
    plan.check_space(space)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidMeasure(format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(Interpolated { measure: plan.marginals.0.clone(), flagged_pairs: 0 });
    }
    if t == 1.0 {
        return Ok(Interpolated { measure: plan.marginals.1.clone(), flagged_pairs: 0 });
    }
    let mut masses = vec![0.0; space.n()];
    let mut flagged = 0usize;
    for (i, j, m) in plan.support() {
        let geo = discrete_geodesic(space, i, j, steps, None)?;
        if geo.over_tolerance {
            flagged += 1;
        }
        masses[geo.at(t)] += m;
    }
    Ok(Interpolated {
        measure: ProbMeasure::from_masses(space, &masses)?,
        flagged_pairs: flagged,
    })
}
