//! Pearson correlation network of a return matrix: correlations `R`,
//! weights `|R|`, metric distances `sqrt(2(1 - R))` and the dominant
//! eigenvalue of `R`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::currency::CurrencyCode;
use crate::error::{Error, Result};
use crate::returns::ReturnMatrix;

/// Correlations this far beyond ±1 are treated as rounding and clamped.
pub const CORRELATION_SLACK: f64 = 1e-9;
pub const POWER_ITERATION_CAP: usize = 10_000;
pub const POWER_ITERATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationNetwork {
    base: CurrencyCode,
    nodes: Vec<CurrencyCode>,
    correlation: DMatrix<f64>,
    weights: DMatrix<f64>,
    distances: DMatrix<f64>,
}

/// `R = (1/T) M M^T` for a row-normalized return matrix.
pub fn correlation_matrix(m: &ReturnMatrix) -> Result<CorrelationNetwork> {
    let n = m.n();
    if n < 2 {
        return Err(Error::size(format!("correlation network needs N >= 2, got {n}")));
    }
    let t = m.t() as f64;
    let rows = m.rows();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            r[(i, j)] = dot / t;
            r[(j, i)] = dot / t;
        }
    }
    CorrelationNetwork::from_correlations(m.base(), m.price_currencies().to_vec(), r)
}

/// Metric distance `sqrt(2(1 - r))`.
pub fn distance(r: f64) -> Result<f64> {
    if !r.is_finite() || r.abs() > 1.0 + CORRELATION_SLACK {
        return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
    }
    Ok((2.0 * (1.0 - r.clamp(-1.0, 1.0))).sqrt())
}

/// Inverse of [`distance`] on `[0, 2]`.
pub fn correlation_from_distance(d: f64) -> f64 {
    1.0 - d * d / 2.0
}

impl CorrelationNetwork {
    /// Builds the network from a correlation matrix. The matrix must be
    /// square, symmetric, with unit diagonal and entries in `[-1, 1]`.
    pub fn from_correlations(
        base: CurrencyCode,
        nodes: Vec<CurrencyCode>,
        correlation: DMatrix<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        if correlation.nrows() != n || correlation.ncols() != n {
            return Err(Error::validation(format!(
                "{n} nodes but a {}x{} matrix",
                correlation.nrows(),
                correlation.ncols()
            )));
        }
        let mut sorted = nodes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::validation("duplicate node codes"));
        }
        if nodes.contains(&base) {
            return Err(Error::validation(format!("base {base} cannot be a node")));
        }
        let mut distances = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            if (correlation[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::validation(format!(
                    "diagonal entry for {} is {}",
                    nodes[i],
                    correlation[(i, i)]
                )));
            }
            for j in 0..n {
                let r = correlation[(i, j)];
                if (r - correlation[(j, i)]).abs() > 1e-12 {
                    return Err(Error::validation("correlation matrix is not symmetric"));
                }
                if i != j {
                    distances[(i, j)] = distance(r)?;
                }
            }
        }
        let weights = correlation.map(|r| r.abs().min(1.0));
        Ok(CorrelationNetwork {
            base,
            nodes,
            correlation,
            weights,
            distances,
        })
    }

    pub fn base(&self) -> CurrencyCode {
        self.base
    }

    pub fn nodes(&self) -> &[CurrencyCode] {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, code: CurrencyCode) -> Result<usize> {
        self.nodes
            .iter()
            .position(|c| *c == code)
            .ok_or(Error::NotFound(code))
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    /// Relabels nodes so that new node `k` is old node `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<CorrelationNetwork> {
        let n = self.n();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::validation("order is not a permutation of the nodes"));
        }
        let nodes = order.iter().map(|&k| self.nodes[k]).collect();
        let r = DMatrix::from_fn(n, n, |i, j| self.correlation[(order[i], order[j])]);
        CorrelationNetwork::from_correlations(self.base, nodes, r)
    }

    /// Dominant eigenvalue of `R` by power iteration.
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        dominant_eigenvalue(&self.correlation, POWER_ITERATION_CAP, POWER_ITERATION_TOL)
    }

    /// Full spectrum of `R`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.correlation.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Power iteration for the eigenvalue of largest magnitude of a symmetric
/// matrix. Stops when the Rayleigh quotient changes by less than `tol`
/// relative to its value.
pub fn dominant_eigenvalue(matrix: &DMatrix<f64>, max_iter: usize, tol: f64) -> Result<f64> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::size("eigenvalue needs a non-empty square matrix"));
    }
    // Irregular start vector: never orthogonal to a structured eigenvector
    // such as (1, -1, 0, ...) or the all-ones vector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract());
    v /= v.norm();
    let mut lambda = f64::NAN;
    for _ in 0..max_iter {
        let w = matrix * &v;
        let rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::Numeric("power iteration diverged".into()));
        }
        if (rayleigh - lambda).abs() <= tol * rayleigh.abs() {
            return Ok(rayleigh);
        }
        lambda = rayleigh;
        v = w / norm;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {max_iter} iterations"
    )))
}
