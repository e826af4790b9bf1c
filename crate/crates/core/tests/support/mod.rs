//! Shared test oracles, independent of the library's solver paths.
#![allow(dead_code)]

use mms_core::space::MetricMeasureSpace;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random planar point-cloud space with random positive weights.
pub fn random_space(rng: &mut ChaCha8Rng, n: usize) -> MetricMeasureSpace {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let dx: f64 = points[i][0] - points[j][0];
            let dy: f64 = points[i][1] - points[j][1];
            dist[i * n + j] = (dx * dx + dy * dy).sqrt();
        }
    }
    let weight: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    MetricMeasureSpace::from_parts("random", dist, weight, Some(points), None).unwrap()
}

/// Random rational masses: `n` nonnegative integers summing to `q`, at least
/// `min_support` of them positive, scaled by `1/q`.
pub fn random_rational_masses(
    rng: &mut ChaCha8Rng,
    n: usize,
    q: usize,
    min_support: usize,
) -> Vec<f64> {
    loop {
        let mut counts = vec![0usize; n];
        for _ in 0..q {
            counts[rng.random_range(0..n)] += 1;
        }
        if counts.iter().filter(|&&c| c > 0).count() >= min_support {
            return counts.iter().map(|&c| c as f64 / q as f64).collect();
        }
    }
}

/// Exact assignment oracle (shortest augmenting paths with potentials):
/// minimal total cost of a perfect matching in the `n x n` cost matrix.
///
/// A transportation problem whose marginals are multiples of `1/q` has an
/// optimal vertex with entries that are multiples of `1/q`, so expanding the
/// mass into `q` unit atoms and solving the assignment problem reproduces
/// the transport optimum exactly.
pub fn hungarian(cost: &[f64], n: usize) -> f64 {
    // classic 1-based formulation with a virtual column 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + (j - 1)]).sum()
}

/// Transport oracle via atom expansion and the assignment oracle. Marginal
/// masses must be multiples of `1/q`.
pub fn transport_oracle_assignment(
    space: &MetricMeasureSpace,
    mu_masses: &[f64],
    nu_masses: &[f64],
    q: usize,
) -> f64 {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, &m) in mu_masses.iter().enumerate() {
        let k = (m * q as f64).round() as usize;
        left.extend(std::iter::repeat_n(i, k));
    }
    for (j, &m) in nu_masses.iter().enumerate() {
        let k = (m * q as f64).round() as usize;
        right.extend(std::iter::repeat_n(j, k));
    }
    assert_eq!(left.len(), right.len(), "marginals must balance at 1/q");
    let na = left.len();
    let mut cost = vec![0.0; na * na];
    for (a, &i) in left.iter().enumerate() {
        for (b, &j) in right.iter().enumerate() {
            let d = space.d(i, j);
            cost[a * na + b] = d * d;
        }
    }
    hungarian(&cost, na) / q as f64
}

/// Brute-force transport oracle by enumerating extreme couplings: all
/// spanning trees of the bipartite support graph, flows recovered by leaf
/// elimination. Exponential; use only for tiny supports (<= 4 x 4).
pub fn transport_oracle_vertices(
    space: &MetricMeasureSpace,
    mu_masses: &[f64],
    nu_masses: &[f64],
) -> f64 {
    let rows: Vec<usize> = (0..mu_masses.len()).filter(|&i| mu_masses[i] > 0.0).collect();
    let cols: Vec<usize> = (0..nu_masses.len()).filter(|&j| nu_masses[j] > 0.0).collect();
    let r = rows.len();
    let c = cols.len();
    assert!(r <= 4 && c <= 4, "vertex enumeration oracle is for tiny supports");
    let cells: Vec<(usize, usize)> =
        (0..r).flat_map(|a| (0..c).map(move |b| (a, b))).collect();
    let need = r + c - 1;
    let mut best = f64::INFINITY;

    // iterate over all cell subsets of size r + c - 1
    let m = cells.len();
    let mut idx: Vec<usize> = (0..need).collect();
    loop {
        // evaluate this candidate basis
        if let Some(cost) = vertex_cost(space, &rows, &cols, mu_masses, nu_masses, &idx, &cells) {
            best = best.min(cost);
        }
        // next combination
        let mut k = need;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] != k + m - need {
                break;
            }
        }
        idx[k] += 1;
        for t in (k + 1)..need {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn vertex_cost(
    space: &MetricMeasureSpace,
    rows: &[usize],
    cols: &[usize],
    mu_masses: &[f64],
    nu_masses: &[f64],
    chosen: &[usize],
    cells: &[(usize, usize)],
) -> Option<f64> {
    let r = rows.len();
    let c = cols.len();
    let n = r + c;
    let mut deg = vec![0usize; n];
    #[allow(clippy::type_complexity)]
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (other node, edge id)
    for (eid, &ci) in chosen.iter().enumerate() {
        let (a, b) = cells[ci];
        adj[a].push((r + b, eid));
        adj[r + b].push((a, eid));
        deg[a] += 1;
        deg[r + b] += 1;
    }
    // a spanning tree of the bipartite graph on r + c nodes
    if chosen.len() != n - 1 {
        return None;
    }
    // connectivity check
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for &(y, _) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    if count != n {
        return None;
    }
    // peel leaves, solving for flows
    let mut balance: Vec<f64> = rows
        .iter()
        .map(|&i| mu_masses[i])
        .chain(cols.iter().map(|&j| -nu_masses[j]))
        .collect();
    let mut flows = vec![0.0f64; chosen.len()];
    let mut removed_edge = vec![false; chosen.len()];
    let mut queue: Vec<usize> = (0..n).filter(|&x| deg[x] == 1).collect();
    let mut removed_node = vec![false; n];
    while let Some(x) = queue.pop() {
        if removed_node[x] || deg[x] == 0 {
            continue;
        }
        let Some(&(other, eid)) = adj[x].iter().find(|&&(_, e)| !removed_edge[e]) else {
            continue;
        };
        removed_node[x] = true;
        removed_edge[eid] = true;
        // flow from source side to sink side equals the residual balance
        let f = if x < r { balance[x] } else { -balance[x] };
        flows[eid] = f;
        balance[other] += balance[x];
        balance[x] = 0.0;
        deg[x] -= 1;
        deg[other] -= 1;
        if deg[other] == 1 {
            queue.push(other);
        }
    }
    let mut cost = 0.0;
    for (eid, &ci) in chosen.iter().enumerate() {
        if flows[eid] < -1e-12 {
            return None; // infeasible vertex
        }
        let (a, b) = cells[ci];
        let d = space.d(rows[a], cols[b]);
        cost += flows[eid].max(0.0) * d * d;
    }
    Some(cost)
}

/// A smooth deterministic field built from a few low-frequency harmonics of
/// the coordinates.
pub fn smooth_field(
    space: &MetricMeasureSpace,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> Vec<f64> {
    let coeffs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.3..1.2),
                rng.random_range(0.3..1.2),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    (0..space.n())
        .map(|i| {
            let x = space.coord(i, 0).unwrap_or(0.0);
            let y = space.coord(i, 1).unwrap_or(0.0);
            amplitude
                * coeffs
                    .iter()
                    .map(|(a, kx, ky, ph)| a * (kx * x + ky * y + ph).sin())
                    .sum::<f64>()
        })
        .collect()
}
