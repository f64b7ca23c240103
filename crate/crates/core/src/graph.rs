//! Graph Laplacians over the rows or columns of a group matrix.
//!
//! Two constructions are provided: the classical thresholded Gaussian kernel
//! ([`kernel_adjacency`] + [`laplacian_from_weights`]) and a learned
//! Laplacian ([`learn_laplacian`]) that minimizes
//!
//! ```text
//! α·smoothness(X, L) + β·‖L‖_F²
//! s.t. L symmetric, L_ij ≤ 0 (i ≠ j), L·1 = 0, tr(L) = N
//! ```
//!
//! A valid Laplacian is determined by its off-diagonal edge weights
//! `w_ij = −L_ij ≥ 0`, and the trace constraint becomes `Σ_{i<j} w_ij = N/2`.
//! The feasible set is therefore a scaled simplex over the edges, which we
//! project onto exactly; the learner is projected gradient descent on that
//! simplex with the exact Lipschitz step `1/(4βN)`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::linalg::sym_eig;
use crate::Matrix;

/// Which side of a group matrix the graph lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    /// Nodes are rows (patches); smoothness is `tr(XᵀLX)`.
    Row,
    /// Nodes are columns (pixel positions); smoothness is `tr(XLXᵀ)`.
    Column,
}

impl GraphMode {
    pub fn node_count(self, x: &Matrix) -> usize {
        match self {
            GraphMode::Row => x.nrows(),
            GraphMode::Column => x.ncols(),
        }
    }
}

/// Symmetric graph Laplacian `L = Δ − W`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    matrix: Matrix,
}

impl GraphLaplacian {
    /// Wraps a matrix without checking Laplacian invariants (see [`Self::validate`]).
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Laplacian must be square, got {:?}",
                matrix.dim()
            )));
        }
        Ok(Self { matrix })
    }

    /// Complete graph with uniform weights `1/(N−1)`, so that `tr(L) = N`.
    pub fn uniform(n: usize) -> Self {
        let w = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| if i == j { w * (n - 1) as f64 } else { -w });
        Self { matrix }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Edge weight `w_ij = −L_ij`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        -self.matrix[[i, j]]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().sum()
    }

    /// Checks symmetry, non-positive off-diagonals, zero row sums and PSD,
    /// plus `tr(L) = N` when `require_unit_trace` is set.
    pub fn validate(&self, require_unit_trace: bool) -> Result<()> {
        let n = self.size();
        let bad = |msg: String| Err(Error::InvalidWeights(msg));
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[[i, j]];
                if !v.is_finite() {
                    return Err(Error::NonFinite("Laplacian"));
                }
                if v != self.matrix[[j, i]] {
                    return bad(format!("asymmetric at ({i}, {j})"));
                }
                if i != j && v > 1e-9 {
                    return bad(format!("positive off-diagonal {v:e} at ({i}, {j})"));
                }
            }
            let rs: f64 = self.matrix.row(i).sum();
            if rs.abs() > 1e-9 * n as f64 {
                return bad(format!("row {i} sums to {rs:e}"));
            }
        }
        if require_unit_trace && (self.trace() - n as f64).abs() > 1e-6 {
            return bad(format!("trace {} differs from {n}", self.trace()));
        }
        let lmin = self.min_eigenvalue()?;
        if lmin < -1e-8 {
            return Err(Error::NotPsd(lmin));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.size() == 0 {
            return Ok(0.0);
        }
        Ok(sym_eig(&self.matrix)?.lambda[0])
    }

    /// Comma-separated rows, full precision (round-trips exactly).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.matrix.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Serialization(format!("bad Laplacian CSV: {e}")))?;
            rows.push(row);
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Serialization("Laplacian CSV is not square".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_matrix(Array2::from_shape_vec((n, n), flat).expect("square"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Grayscale magnitude map: `|L_ij|` normalized by the largest magnitude,
    /// drawn so that larger magnitudes are darker. Each entry becomes a
    /// `scale`×`scale` block.
    pub fn magnitude_image(&self, scale: usize) -> Image {
        let n = self.size();
        let scale = scale.max(1);
        let max = self.matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let side = n * scale;
        Image::from_fn(side, side, |r, c| {
            let v = self.matrix[[r / scale, c / scale]].abs();
            if max > 0.0 {
                255.0 * (1.0 - v / max)
            } else {
                255.0
            }
        })
        .expect("non-empty Laplacian")
    }
}

/// Parameters of the Laplacian learning problem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GraphLearnConfig {
    /// Weight of the smoothness term.
    pub alpha: f64,
    /// Weight of the Frobenius regularizer.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once `‖L_{t+1} − L_t‖_F` falls below this.
    pub tol: f64,
}

impl Default for GraphLearnConfig {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            beta: 0.8,
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

impl GraphLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "graph learning needs alpha > 0 and beta > 0, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Output of [`learn_laplacian`].
#[derive(Debug, Clone)]
pub struct LearnedLaplacian {
    pub laplacian: GraphLaplacian,
    pub objective: f64,
    pub iterations: usize,
    /// `false` when `max_iters` was hit; the laplacian is still feasible.
    pub converged: bool,
    /// Objective after each iteration, starting with the initial value.
    pub history: Vec<f64>,
}

/// Thresholded Gaussian kernel weights between node vectors.
pub fn kernel_adjacency(vectors: &[Vec<f64>], sigma: f64, epsilon: f64) -> Result<Matrix> {
    if !(sigma > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel needs sigma > 0 and epsilon ≥ 0, got {sigma} and {epsilon}"
        )));
    }
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        if let Some(v) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(Error::DimensionMismatch(format!(
                "node vectors of length {} and {}",
                first.len(),
                v.len()
            )));
        }
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d <= epsilon {
                let v = (-d / (sigma * sigma)).exp();
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    Ok(w)
}

/// `L = Δ − W` with `Δ_ii = Σ_j W_ij`.
pub fn laplacian_from_weights(w: &Matrix) -> Result<GraphLaplacian> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::InvalidWeights(format!("non-square {:?}", w.dim())));
    }
    for i in 0..n {
        if w[[i, i]] != 0.0 {
            return Err(Error::InvalidWeights(format!("non-zero diagonal at {i}")));
        }
        for j in 0..n {
            let v = w[[i, j]];
            if !v.is_finite() {
                return Err(Error::NonFinite("weight matrix"));
            }
            if v < 0.0 {
                return Err(Error::InvalidWeights(format!("negative weight at ({i}, {j})")));
            }
            if v != w[[j, i]] {
                return Err(Error::InvalidWeights(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = -w.clone();
    for i in 0..n {
        l[[i, i]] = w.row(i).sum();
    }
    Ok(GraphLaplacian { matrix: l })
}

/// Node vectors of `x` for the given mode (rows or columns).
pub fn node_vectors(x: &Matrix, mode: GraphMode) -> Vec<Vec<f64>> {
    match mode {
        GraphMode::Row => x.rows().into_iter().map(|r| r.to_vec()).collect(),
        GraphMode::Column => x.columns().into_iter().map(|c| c.to_vec()).collect(),
    }
}

/// Classical kernel Laplacian over the rows or columns of `x`.
pub fn kernel_laplacian(x: &Matrix, mode: GraphMode, sigma: f64, epsilon: f64) -> Result<GraphLaplacian> {
    laplacian_from_weights(&kernel_adjacency(&node_vectors(x, mode), sigma, epsilon)?)
}

fn check_mode_shape(x: &Matrix, l: &GraphLaplacian, mode: GraphMode) -> Result<()> {
    let need = mode.node_count(x);
    if l.size() != need {
        return Err(Error::DimensionMismatch(format!(
            "{mode:?} Laplacian of size {} for a {:?} matrix",
            l.size(),
            x.dim()
        )));
    }
    Ok(())
}

/// `tr(XᵀLX)` in row mode, `tr(XLXᵀ)` in column mode.
pub fn smoothness(x: &Matrix, l: &GraphLaplacian, mode: GraphMode) -> Result<f64> {
    check_mode_shape(x, l, mode)?;
    let gram = match mode {
        GraphMode::Row => x.dot(&x.t()),
        GraphMode::Column => x.t().dot(x),
    };
    Ok((&gram * l.matrix()).sum())
}

/// Squared distances between node vectors, indexed by edge `(i < j)` in
/// row-major upper-triangular order.
fn edge_distances(x: &Matrix, mode: GraphMode) -> Vec<f64> {
    let nodes = node_vectors(x, mode);
    let n = nodes.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(
                nodes[i]
                    .iter()
                    .zip(&nodes[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
            );
        }
    }
    d
}

struct EdgeProblem {
    n: usize,
    edges: Vec<(usize, usize)>,
    dist: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl EdgeProblem {
    fn degrees(&self, w: &[f64]) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for (&(i, j), &we) in self.edges.iter().zip(w) {
            deg[i] += we;
            deg[j] += we;
        }
        deg
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let deg = self.degrees(w);
        let smooth: f64 = w.iter().zip(&self.dist).map(|(a, b)| a * b).sum();
        let frob = deg.iter().map(|d| d * d).sum::<f64>() + 2.0 * w.iter().map(|v| v * v).sum::<f64>();
        self.alpha * smooth + self.beta * frob
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        let deg = self.degrees(w);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            out[e] = self.alpha * self.dist[e] + self.beta * (2.0 * (deg[i] + deg[j]) + 4.0 * w[e]);
        }
    }

    /// `‖L(a) − L(b)‖_F`.
    fn laplacian_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let deg = self.degrees(&diff);
        (deg.iter().map(|d| d * d).sum::<f64>() + 2.0 * diff.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn to_laplacian(&self, w: &[f64]) -> GraphLaplacian {
        let mut l = Array2::zeros((self.n, self.n));
        for (&(i, j), &we) in self.edges.iter().zip(w) {
            l[[i, j]] = -we;
            l[[j, i]] = -we;
        }
        // diagonal from the same edge order so rows sum to zero up to rounding
        let deg = self.degrees(w);
        for i in 0..self.n {
            l[[i, i]] = deg[i];
        }
        GraphLaplacian { matrix: l }
    }
}

/// Euclidean projection onto `{w ≥ 0, Σw = total}`.
pub(crate) fn project_simplex(v: &mut [f64], total: f64) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - total) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let mut support = v.iter().enumerate().filter(|(_, x)| **x > 0.0);
    if let (Some((i, _)), None) = (support.next(), support.next()) {
        v[i] = total;
    }
}

/// Learns a valid Laplacian over the rows or columns of `x`.
pub fn learn_laplacian(x: &Matrix, mode: GraphMode, cfg: &GraphLearnConfig) -> Result<LearnedLaplacian> {
    cfg.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("graph learning data"));
    }
    let n = mode.node_count(x);
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "graph learning needs at least 2 nodes, got {n}"
        )));
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let problem = EdgeProblem {
        n,
        dist: edge_distances(x, mode),
        edges,
        alpha: cfg.alpha,
        beta: cfg.beta,
    };
    let total = n as f64 / 2.0;
    let ne = problem.edges.len();

    let mut w = vec![total / ne as f64; ne];
    let mut f = problem.objective(&w);
    let mut history = vec![f];
    let mut step = 1.0 / (4.0 * cfg.beta * n as f64);
    let mut grad = vec![0.0; ne];
    let mut trial = vec![0.0; ne];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        problem.gradient(&w, &mut grad);
        let mut accepted = false;
        for _ in 0..60 {
            for e in 0..ne {
                trial[e] = w[e] - step * grad[e];
            }
            project_simplex(&mut trial, total);
            let ft = problem.objective(&trial);
            if ft <= f {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at working precision
            converged = true;
            break;
        }
        let change = problem.laplacian_distance(&trial, &w);
        std::mem::swap(&mut w, &mut trial);
        f = problem.objective(&w);
        history.push(f);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(LearnedLaplacian {
        laplacian: problem.to_laplacian(&w),
        objective: f,
        iterations,
        converged,
        history,
    })
}

/// `α·smoothness(X, L) + β·‖L‖_F²`.
pub fn learning_objective(x: &Matrix, l: &GraphLaplacian, mode: GraphMode, cfg: &GraphLearnConfig) -> Result<f64> {
    let frob: f64 = l.matrix().iter().map(|v| v * v).sum();
    Ok(cfg.alpha * smoothness(x, l, mode)? + cfg.beta * frob)
}
