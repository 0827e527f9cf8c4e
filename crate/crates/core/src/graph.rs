//! Undirected communication graphs and their Laplacian spectra.
//!
//! Nodes are numbered `0..n`. Grid nodes are numbered row-major, so node
//! `(r, c)` of a `side x side` grid is `r * side + c`.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};

/// Resampling budget for random geometric graphs that come out disconnected.
pub const RGG_MAX_ATTEMPTS: usize = 1000;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 100_000;

/// A simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Each edge is stored once with
    /// `u < v`; self loops and duplicate edges are rejected.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidSize(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidSize(format!("self loop at node {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSize(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in &normalized {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges: normalized,
            neighbors,
        })
    }

    /// A graph with one node and no edges.
    pub fn single() -> Self {
        Self {
            node_count: 1,
            edges: Vec::new(),
            neighbors: vec![Vec::new()],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` pairs with `u < v`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `v` (excluding `v` itself).
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &w in &self.neighbors[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Laplacian `M = D - A` as a dense matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut m = DMatrix::zeros(n, n);
        for (v, list) in self.neighbors.iter().enumerate() {
            m[(v, v)] = list.len() as f64;
            for &u in list {
                m[(v, u)] = -1.0;
            }
        }
        m
    }

    /// Dense symmetric eigendecomposition of the Laplacian.
    pub fn spectral_summary(&self) -> Result<SpectralSummary> {
        let eigen = SymmetricEigen::try_new(self.laplacian(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(
            Error::Numerical {
                what: "laplacian eigendecomposition",
                iterations: EIGEN_MAX_ITER,
            },
        )?;
        let mut eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let algebraic_connectivity = if eigenvalues.len() >= 2 {
            eigenvalues[eigenvalues.len() - 2]
        } else {
            0.0
        };
        Ok(SpectralSummary {
            laplacian_eigenvalues: eigenvalues,
            algebraic_connectivity,
            d_max: self.max_degree(),
            d_min: self.min_degree(),
        })
    }

    /// Hop distances between every pair of nodes, by BFS from every node.
    pub fn shortest_path_distances(&self) -> Result<Vec<Vec<usize>>> {
        (0..self.node_count)
            .map(|s| {
                self.bfs(s)
                    .into_iter()
                    .enumerate()
                    .map(|(t, d)| d.ok_or(Error::Unreachable { from: s, to: t }))
                    .collect()
            })
            .collect()
    }

    /// Reads the edge-list text format: a `nodes N` header followed by one
    /// `u v` pair per line. Blank lines and lines starting with `#` are skipped.
    pub fn read_edge_list(reader: impl BufRead) -> Result<Self> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("{s:?}: {e}"),
                })
            };
            match (node_count, fields.as_slice()) {
                (None, ["nodes", n]) => node_count = Some(parse(n)?),
                (None, _) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "expected header `nodes N`".into(),
                    })
                }
                (Some(_), [u, v]) => edges.push((parse(u)?, parse(v)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected `u v`, found {trimmed:?}"),
                    })
                }
            }
        }
        let n = node_count.ok_or(Error::Parse {
            line: 0,
            message: "missing `nodes N` header".into(),
        })?;
        Self::new(n, edges)
    }

    pub fn write_edge_list(&self, mut writer: impl Write) -> std::io::Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.node_count);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        writer.write_all(out.as_bytes())
    }
}

/// Laplacian spectrum summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// Eigenvalues of the Laplacian in nonincreasing order.
    pub laplacian_eigenvalues: Vec<f64>,
    /// Second smallest Laplacian eigenvalue.
    pub algebraic_connectivity: f64,
    pub d_max: usize,
    pub d_min: usize,
}

impl SpectralSummary {
    pub fn largest(&self) -> f64 {
        self.laplacian_eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.laplacian_eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Complete graph on `n >= 2` nodes.
pub fn make_complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "complete graph needs n >= 2, got {n}"
        )));
    }
    Graph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

/// `side x side` grid without wraparound.
pub fn make_grid(side: usize) -> Result<Graph> {
    if side < 2 {
        return Err(Error::InvalidSize(format!(
            "grid needs side >= 2, got {side}"
        )));
    }
    let id = |r: usize, c: usize| r * side + c;
    let mut edges = Vec::with_capacity(2 * side * (side - 1));
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < side {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(side * side, edges)
}

/// Random geometric graph: `n` uniform points in the unit square, an edge
/// between every pair at Euclidean distance `<= radius`. Placements are
/// redrawn until the graph is connected, up to [`RGG_MAX_ATTEMPTS`].
pub fn make_rgg<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "random geometric graph needs n >= 2, got {n}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidSize(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let r2 = radius * radius;
    for _ in 0..RGG_MAX_ATTEMPTS {
        let points: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let dx = points[u].0 - points[v].0;
                let dy = points[u].1 - points[v].1;
                if dx * dx + dy * dy <= r2 {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailed {
        attempts: RGG_MAX_ATTEMPTS,
        reason: format!("no connected placement for n={n}, radius={radius}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> Graph {
        Graph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn complete_edge_counts() {
        assert_eq!(make_complete(3).unwrap().edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(make_complete(2).unwrap().edge_count(), 1);
        assert_eq!(make_complete(36).unwrap().edge_count(), 36 * 35 / 2);
        assert!(matches!(make_complete(1), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn grid_structure() {
        let g = make_grid(2).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (4, 4));
        let g = make_grid(6).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (36, 2 * 6 * 5));
        let g = make_grid(3).unwrap();
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(4), 4);
        assert_eq!(g.degree(1), 3);
        assert!(make_grid(1).is_err());
    }

    #[test]
    fn rejects_non_simple_graphs() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(0, []).is_err());
    }

    #[test]
    fn rgg_radius_covers_unit_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let g = make_rgg(2, 2f64.sqrt(), &mut rng).unwrap();
            assert_eq!(g.edges(), &[(0, 1)]);
        }
    }

    #[test]
    fn rgg_deterministic_under_seed() {
        let a = make_rgg(10, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = make_rgg(10, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
    }

    #[test]
    fn rgg_denser_with_larger_radius() {
        let mut sparse = 0;
        let mut dense = 0;
        for seed in 0..20 {
            sparse += make_rgg(36, 0.3, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
                .edge_count();
            dense += make_rgg(36, 0.9, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
                .edge_count();
        }
        assert!(dense > sparse, "dense {dense} <= sparse {sparse}");
    }

    #[test]
    fn rgg_reports_failure() {
        let err = make_rgg(50, 0.01, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::GenerationFailed {
                attempts: RGG_MAX_ATTEMPTS,
                ..
            }
        ));
        assert!(make_rgg(5, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn laplacian_small_cases() {
        let l = path(2).laplacian();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = make_complete(3).unwrap().laplacian();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
        let l = make_grid(2).unwrap().laplacian();
        assert_eq!(l.diagonal().as_slice(), &[2.0; 4]);
    }

    #[test]
    fn spectra_small_cases() {
        let s = path(2).spectral_summary().unwrap();
        assert!((s.laplacian_eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(s.smallest().abs() < 1e-12);
        assert!((s.algebraic_connectivity - 2.0).abs() < 1e-12);

        let s = make_complete(3).unwrap().spectral_summary().unwrap();
        assert!((s.laplacian_eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((s.laplacian_eigenvalues[1] - 3.0).abs() < 1e-12);
        assert!((s.algebraic_connectivity - 3.0).abs() < 1e-12);
        assert_eq!((s.d_max, s.d_min), (2, 2));
    }

    #[test]
    fn distances_small_cases() {
        let d = make_complete(3).unwrap().shortest_path_distances().unwrap();
        assert_eq!(d, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        assert_eq!(path(3).shortest_path_distances().unwrap()[0][2], 2);
        assert_eq!(
            make_grid(3).unwrap().shortest_path_distances().unwrap()[0][8],
            4
        );
        let disconnected = Graph::new(3, [(0, 1)]).unwrap();
        assert!(matches!(
            disconnected.shortest_path_distances(),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = make_grid(3).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert!(buf.starts_with(b"nodes 9\n"));
        assert_eq!(Graph::read_edge_list(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        let err = Graph::read_edge_list("nodes 3\n0 1\n1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(Graph::read_edge_list("0 1\n".as_bytes()).is_err());
    }
}
