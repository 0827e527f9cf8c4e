//! Doubly stochastic gossip matrices and their mixing rate.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Tolerance for row/column sums and symmetry checks.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Tolerance for spectral quantities.
pub const SPECTRAL_TOL: f64 = 1e-8;
/// Above this size the mixing rate is found by power iteration instead of a
/// dense decomposition.
pub const DENSE_SPECTRAL_LIMIT: usize = 500;

const POWER_MAX_ITER: usize = 500_000;

/// A doubly stochastic matrix `W` stored sparsely by row and by column.
#[derive(Debug, Clone)]
pub struct GossipMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    symmetric: bool,
    sigma2: f64,
}

impl GossipMatrix {
    /// `W = I - (D - A) / (2 (1 + d_max))`.
    pub fn max_degree(g: &Graph) -> Result<Self> {
        let n = g.node_count();
        let scale = 1.0 / (2.0 * (1.0 + g.max_degree() as f64));
        let rows = (0..n)
            .map(|u| {
                let mut row: Vec<(usize, f64)> =
                    g.neighbors(u).iter().map(|&v| (v, scale)).collect();
                // 1 - d_u * scale, written so the row sums to exactly 1 when
                // the off-diagonal terms are added back
                let off: f64 = row.iter().map(|e| e.1).sum();
                row.push((u, 1.0 - off));
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        Self::from_rows(n, rows)
    }

    /// The identity, which never mixes. Used for the no-communication baseline.
    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|u| vec![(u, 1.0)]).collect();
        Self {
            n,
            cols: rows.clone(),
            rows,
            symmetric: true,
            sigma2: if n > 1 { 1.0 } else { 0.0 },
        }
    }

    /// Wraps a user-supplied dense matrix after checking it against the
    /// constraints imposed by `g`.
    pub fn from_dense(w: &DMatrix<f64>, g: &Graph) -> Result<Self> {
        let report = validate_gossip(w, g)?;
        if !report.is_valid() {
            return Err(Error::InvalidGossip(report.to_string()));
        }
        let n = w.nrows();
        let rows = (0..n)
            .map(|u| {
                (0..n)
                    .filter(|&v| w[(u, v)] != 0.0)
                    .map(|v| (v, w[(u, v)]))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows)
    }

    fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut cols = vec![Vec::new(); n];
        for (u, row) in rows.iter().enumerate() {
            for &(v, w) in row {
                cols[v].push((u, w));
            }
        }
        let symmetric = rows.iter().zip(&cols).all(|(r, c)| {
            r.len() == c.len()
                && r.iter()
                    .zip(c)
                    .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= STRUCTURAL_TOL)
        });
        let mut m = Self {
            n,
            rows,
            cols,
            symmetric,
            sigma2: 0.0,
        };
        m.sigma2 = m.compute_sigma2()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Row `u` as `(v, W[u][v])` pairs, nonzero entries only.
    pub fn row(&self, u: usize) -> &[(usize, f64)] {
        &self.rows[u]
    }

    /// Column `v` as `(u, W[u][v])` pairs: the weights agent `v` applies to
    /// the values it receives.
    pub fn incoming(&self, v: usize) -> &[(usize, f64)] {
        &self.cols[v]
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.rows[u].iter().find(|e| e.0 == v).map_or(0.0, |e| e.1)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (u, row) in self.rows.iter().enumerate() {
            for &(v, w) in row {
                m[(u, v)] = w;
            }
        }
        m
    }

    /// Second largest singular value of `W`, cached at construction.
    pub fn second_singular_value(&self) -> f64 {
        self.sigma2
    }

    /// Whether repeated gossip converges to the network average.
    pub fn is_mixing(&self) -> bool {
        self.sigma2 < 1.0 - STRUCTURAL_TOL
    }

    /// Spectral norm of `W - (1/N) 1 1^T`.
    pub fn deviation_from_uniform(&self) -> Result<f64> {
        if self.n > DENSE_SPECTRAL_LIMIT {
            return self.power_deviation();
        }
        let svd = self.centered_dense().svd(false, false);
        Ok(svd.singular_values.max())
    }

    /// `y = W^T x`, the gossip step applied to one scalar per agent.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(u, w)| w * x[u]).sum())
            .collect()
    }

    pub fn validate(&self, g: &Graph) -> Result<ValidationReport> {
        validate_gossip(&self.to_dense(), g)
    }

    fn centered_dense(&self) -> DMatrix<f64> {
        let mut b = self.to_dense();
        b.add_scalar_mut(-1.0 / self.n as f64);
        b
    }

    fn compute_sigma2(&self) -> Result<f64> {
        if self.n == 1 {
            return Ok(0.0);
        }
        if self.n > DENSE_SPECTRAL_LIMIT {
            return self.power_deviation();
        }
        let b = self.centered_dense();
        if self.symmetric {
            let eig = SymmetricEigen::try_new(b, 1e-15, 100_000).ok_or(Error::Numerical {
                what: "gossip eigendecomposition",
                iterations: 100_000,
            })?;
            Ok(eig.eigenvalues.amax())
        } else {
            Ok(b.svd(false, false).singular_values.max())
        }
    }

    /// Largest singular value of `W - J/N` by power iteration on its Gram
    /// operator, using the sparse storage.
    fn power_deviation(&self) -> Result<f64> {
        let n = self.n;
        let mean_free = |x: &mut [f64]| {
            let m = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|e| *e -= m);
        };
        // deterministic start vector with no component along 1
        let mut x: Vec<f64> = (0..n)
            .map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5)
            .collect();
        mean_free(&mut x);
        let mut norm = x.iter().map(|e| e * e).sum::<f64>().sqrt();
        x.iter_mut().for_each(|e| *e /= norm);
        let mut estimate = 0.0;
        for iter in 0..POWER_MAX_ITER {
            // (W - J/N) x = W x - mean(x) 1, and x stays mean-free
            let mut y = self.mul_rows(&x);
            mean_free(&mut y);
            let mut z = self.apply(&y);
            mean_free(&mut z);
            norm = z.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            let next = norm.sqrt();
            x = z.into_iter().map(|e| e / norm).collect();
            if iter > 10 && (next - estimate).abs() <= 1e-15 * next.max(1.0) {
                return Ok(next);
            }
            estimate = next;
        }
        Err(Error::Numerical {
            what: "gossip power iteration",
            iterations: POWER_MAX_ITER,
        })
    }

    fn mul_rows(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(v, w)| w * x[v]).sum())
            .collect()
    }

    /// Reads `N` lines of `N` whitespace separated reals and validates them
    /// against `g`.
    pub fn read_dense(reader: impl BufRead, g: &Graph) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>().map_err(|e| Error::Parse {
                        line: idx as u64 + 1,
                        message: format!("{s:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Shape {
                expected: format!("{n} columns"),
                found: format!("{} columns", bad.len()),
            });
        }
        let w = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_dense(&w, g)
    }

    pub fn write_dense(&self, mut writer: impl Write) -> std::io::Result<()> {
        let dense = self.to_dense();
        let mut out = String::new();
        for u in 0..self.n {
            let line: Vec<String> = (0..self.n)
                .map(|v| format!("{:.17e}", dense[(u, v)]))
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        writer.write_all(out.as_bytes())
    }
}

/// One failed gossip constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { row: usize, deviation: f64 },
    ColumnSum { column: usize, deviation: f64 },
    Negative { u: usize, v: usize, value: f64 },
    Sparsity { u: usize, v: usize, value: f64 },
}

impl Violation {
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::RowSum { deviation, .. } | Violation::ColumnSum { deviation, .. } => {
                deviation.abs()
            }
            Violation::Negative { value, .. } | Violation::Sparsity { value, .. } => value.abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub max_abs_violation: f64,
    /// Largest `|sum - 1|` over all rows and columns, violating or not.
    pub max_sum_deviation: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} violation(s), max |violation| = {:e}",
            self.violations.len(),
            self.max_abs_violation
        )?;
        if let Some(first) = self.violations.first() {
            write!(f, ", first: {first:?}")?;
        }
        Ok(())
    }
}

/// Checks double stochasticity, nonnegativity and graph sparsity of `w`.
pub fn validate_gossip(w: &DMatrix<f64>, g: &Graph) -> Result<ValidationReport> {
    let n = g.node_count();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Shape {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    let mut report = ValidationReport::default();
    for u in 0..n {
        let dev = w.row(u).sum() - 1.0;
        report.max_sum_deviation = report.max_sum_deviation.max(dev.abs());
        if dev.abs() > STRUCTURAL_TOL {
            report.violations.push(Violation::RowSum {
                row: u,
                deviation: dev,
            });
        }
    }
    for v in 0..n {
        let dev = w.column(v).sum() - 1.0;
        report.max_sum_deviation = report.max_sum_deviation.max(dev.abs());
        if dev.abs() > STRUCTURAL_TOL {
            report.violations.push(Violation::ColumnSum {
                column: v,
                deviation: dev,
            });
        }
    }
    for u in 0..n {
        for v in 0..n {
            let value = w[(u, v)];
            if value < 0.0 {
                report.violations.push(Violation::Negative { u, v, value });
            } else if u != v && value != 0.0 && !g.has_edge(u, v) {
                report.violations.push(Violation::Sparsity { u, v, value });
            }
        }
    }
    report.max_abs_violation = report
        .violations
        .iter()
        .map(Violation::magnitude)
        .fold(0.0, f64::max);
    Ok(report)
}

/// `W^k x` for a vector of per-agent scalars.
pub fn mix(w: &GossipMatrix, x: &[f64], steps: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..steps {
        v = w.apply(&v);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_complete, make_grid};

    fn single_edge() -> Graph {
        Graph::new(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn max_degree_on_triangle() {
        let w = GossipMatrix::max_degree(&make_complete(3).unwrap()).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let expected = if u == v { 2.0 / 3.0 } else { 1.0 / 6.0 };
                assert!((w.get(u, v) - expected).abs() < 1e-15);
            }
        }
        assert!((w.second_singular_value() - 0.5).abs() < 1e-12);
        assert!((w.deviation_from_uniform().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_degree_on_single_edge() {
        let w = GossipMatrix::max_degree(&single_edge()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        assert_eq!(w.to_dense(), expected);
        assert!((w.second_singular_value() - 0.5).abs() < 1e-12);
        assert!((w.deviation_from_uniform().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_is_not_mixing() {
        let w = GossipMatrix::identity(4);
        assert_eq!(w.second_singular_value(), 1.0);
        assert!(!w.is_mixing());
        assert_eq!(GossipMatrix::identity(1).second_singular_value(), 0.0);
    }

    #[test]
    fn uniform_matrix_has_zero_deviation() {
        let g = make_complete(5).unwrap();
        let w = GossipMatrix::from_dense(&DMatrix::from_element(5, 5, 0.2), &g).unwrap();
        assert!(w.deviation_from_uniform().unwrap() < 1e-12);
        assert!(w.second_singular_value() < 1e-12);
    }

    #[test]
    fn validation_flags_sparsity() {
        let g = Graph::new(3, [(1, 2)]).unwrap();
        let w = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0]);
        let report = validate_gossip(&w, &g).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Sparsity { u: 0, v: 1, .. })));
        assert!(GossipMatrix::from_dense(&w, &g).is_err());
    }

    #[test]
    fn validation_reports_row_scaling() {
        let g = make_complete(3).unwrap();
        let mut w = GossipMatrix::max_degree(&g).unwrap().to_dense();
        assert!(validate_gossip(&w, &g).unwrap().is_valid());
        w.row_mut(1).scale_mut(1.01);
        let report = validate_gossip(&w, &g).unwrap();
        let row_dev = report
            .violations
            .iter()
            .find_map(|v| match v {
                Violation::RowSum { row: 1, deviation } => Some(*deviation),
                _ => None,
            })
            .expect("row violation");
        assert!((row_dev - 0.01).abs() < 1e-12);
        assert!((report.max_abs_violation - 0.01).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_wrong_shape() {
        let g = make_complete(3).unwrap();
        assert!(matches!(
            validate_gossip(&DMatrix::identity(2, 2), &g),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn dense_text_round_trip() {
        let g = make_grid(3).unwrap();
        let w = GossipMatrix::max_degree(&g).unwrap();
        let mut buf = Vec::new();
        w.write_dense(&mut buf).unwrap();
        let back = GossipMatrix::read_dense(buf.as_slice(), &g).unwrap();
        assert_eq!(back.to_dense(), w.to_dense());
        assert!(GossipMatrix::read_dense("1 0\n0\n".as_bytes(), &single_edge()).is_err());
    }

    #[test]
    fn power_iteration_matches_dense_route() {
        let g = make_grid(8).unwrap();
        let w = GossipMatrix::max_degree(&g).unwrap();
        let power = w.power_deviation().unwrap();
        assert!(
            (power - w.second_singular_value()).abs() < SPECTRAL_TOL,
            "{power}"
        );
    }
}
