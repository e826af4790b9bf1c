//! Neighbor graphs carrying the quadratic Dirichlet form.

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;
use std::sync::{Arc, OnceLock};

/// How the adjacency was constructed.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphRule {
    /// All pairs with `d(x, y) <= r`.
    Radius(f64),
    /// Symmetrized k-nearest neighbors.
    KNearest(usize),
}

/// An undirected edge with its ambient length and Dirichlet conductance.
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub conductance: f64,
}

/// Discrete carrier for the Sobolev surrogate: a connected neighbor graph
/// with per-edge conductances calibrated so the quadratic form
/// `E(f) = 1/2 sum_edges c (f(b) - f(a))^2` matches `1/2 int |grad f|^2 dm`
/// on smooth fields over lattice spaces.
///
/// The base conductance is `(w_a + w_b) / (2 d^2)`, which reproduces the
/// standard `h^(dim-2)` stencil weight on uniform lattices of any dimension.
/// When a radius rule captures the diagonal neighbors of a 2d lattice, axis
/// edges are scaled by `2/3` and diagonal edges by `1/3`, recovering the
/// isotropic nine-point form.
pub struct NeighborGraph {
    space_uid: u64,
    n: usize,
    rule: GraphRule,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: Vec<Edge>,
    weights: Vec<f64>,
    max_degree: usize,
    degrees: Vec<usize>,
    pub(crate) spectral: OnceLock<Arc<super::heat::Spectral>>,
}

impl NeighborGraph {
    /// Radius-rule graph. On a lattice space, `r = 1.01 h` yields the axis
    /// stencil and `r = 1.5 h` the eight-neighbor stencil.
    pub fn radius(space: &MetricMeasureSpace, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::ShapeMismatch(format!("radius must be positive, got {r}")));
        }
        let n = space.n();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = space.d(i, j);
                if d <= r && d > 0.0 {
                    pairs.push((i, j, d));
                }
            }
        }
        Self::assemble(space, GraphRule::Radius(r), pairs)
    }

    /// Axis-neighbor lattice graph (radius just above the lattice step).
    pub fn lattice_axis(space: &MetricMeasureSpace) -> Result<Self> {
        let h = space
            .resolution()
            .ok_or_else(|| Error::ShapeMismatch("space has no lattice resolution".into()))?;
        Self::radius(space, 1.01 * h)
    }

    /// Eight-neighbor lattice graph (axis plus diagonal edges).
    pub fn lattice_eight(space: &MetricMeasureSpace) -> Result<Self> {
        let h = space
            .resolution()
            .ok_or_else(|| Error::ShapeMismatch("space has no lattice resolution".into()))?;
        Self::radius(space, 1.5 * h)
    }

    /// Symmetrized k-nearest-neighbor graph.
    pub fn k_nearest(space: &MetricMeasureSpace, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ShapeMismatch("k must be positive".into()));
        }
        let n = space.n();
        let mut set = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                space
                    .d(i, a)
                    .partial_cmp(&space.d(i, b))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for &j in order.iter().take(k) {
                set.insert((i.min(j), i.max(j)));
            }
        }
        let pairs = set
            .into_iter()
            .map(|(i, j)| (i, j, space.d(i, j)))
            .collect();
        Self::assemble(space, GraphRule::KNearest(k), pairs)
    }

    fn assemble(
        space: &MetricMeasureSpace,
        rule: GraphRule,
        pairs: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let n = space.n();
        let h = space.resolution();
        // classify lattice edges to apply the isotropic stencil factors
        let diag_len = h.map(|h| 2f64.sqrt() * h);
        let has_diagonals = match diag_len {
            Some(dl) => pairs.iter().any(|&(_, _, d)| (d - dl).abs() < 1e-6 * dl),
            None => false,
        };
        let mut edges = Vec::with_capacity(pairs.len());
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, d) in pairs {
            let base = (space.weight(i) + space.weight(j)) / (2.0 * d * d);
            let factor = if has_diagonals {
                let dl = diag_len.unwrap();
                if (d - dl).abs() < 1e-6 * dl {
                    1.0 / 3.0
                } else {
                    2.0 / 3.0
                }
            } else {
                1.0
            };
            edges.push(Edge { a: i, b: j, length: d, conductance: base * factor });
            adjacency[i].push((j, d));
            adjacency[j].push((i, d));
        }

        // connectivity
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        if count != n {
            let components = 1 + seen.iter().filter(|s| !**s).count().min(1);
            return Err(Error::DisconnectedGraph { components });
        }

        let degrees: Vec<usize> = adjacency.iter().map(|a| a.len()).collect();
        let max_degree = degrees.iter().cloned().max().unwrap_or(0);
        Ok(Self {
            space_uid: space.uid(),
            n,
            rule,
            adjacency,
            edges,
            weights: space.weights().to_vec(),
            max_degree,
            degrees,
            spectral: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> &GraphRule {
        &self.rule
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Points with a full stencil; lattice boundary rows are excluded.
    pub fn is_interior(&self, i: usize) -> bool {
        self.degrees[i] == self.max_degree
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.is_interior(i)).collect()
    }

    pub(crate) fn check_space(&self, space: &MetricMeasureSpace) -> Result<()> {
        space.check_uid(self.space_uid, "graph")
    }

    pub(crate) fn check_field(&self, field: &super::ScalarField) -> Result<()> {
        if field.space_uid != self.space_uid {
            return Err(Error::MismatchedSpaces {
                left: format!("graph on space #{}", self.space_uid),
                right: format!("field on space #{}", field.space_uid),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for NeighborGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeighborGraph")
            .field("n", &self.n)
            .field("rule", &self.rule)
            .field("edges", &self.edges.len())
            .field("max_degree", &self.max_degree)
            .finish()
    }
}
