//! ADMM solver for one group:
//!
//! ```text
//! min_X  θn·‖X‖*  +  ½‖X − T‖²  +  θr·tr(XᵀLr X)  +  θc·tr(X Lc Xᵀ)
//! ```
//!
//! split as `X = Z` with the nuclear norm on `X` and everything else on `Z`.
//! In scaled form the iteration is
//!
//! ```text
//! X ← U·Γ(Σ)·Vᵀ                     where Z − Y = U·Σ·Vᵀ, λ = θn/p
//! Z ← solve 2θr·Lr·Z + 2θc·Z·Lc + (1+p)·Z = T + p(X + Y)
//! Y ← Y + X − Z
//! ```
//!
//! The Z-update is a Sylvester equation. Both Laplacians are fixed for the
//! whole solve, so they are diagonalized once and every Z-update becomes an
//! element-wise division in the joint eigenbasis.

use ndarray::{Array1, Array2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{smoothness, GraphLaplacian, GraphMode};
use crate::linalg::{frobenius, svd, sym_eig};
use crate::Matrix;

/// Smallest eigenvalue tolerated before a Laplacian is rejected as non-PSD.
const PSD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmConfig {
    /// Nuclear-norm weight.
    pub theta_n: f64,
    /// Row-graph weight.
    pub theta_r: f64,
    /// Column-graph weight.
    pub theta_c: f64,
    /// Augmented Lagrangian penalty.
    pub p: f64,
    /// Threshold exponent in (0, 1]; 1 is soft thresholding.
    pub v: f64,
    pub max_inner: usize,
    /// Primal tolerance on the RMS of `X − Z`.
    pub eps_pri: f64,
    /// Dual tolerance on the RMS of `p·(Z_{k+1} − Z_k)`.
    pub eps_dual: f64,
}

impl AdmmConfig {
    /// The given regularization weights with the default solver settings.
    pub fn with_weights(theta_n: f64, theta_r: f64, theta_c: f64) -> Self {
        Self {
            theta_n,
            theta_r,
            theta_c,
            p: 0.015,
            v: 0.1,
            max_inner: 100,
            eps_pri: 0.03,
            eps_dual: 0.015,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.theta_n / self.p
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_n >= 0.0
            && self.p > 0.0
            && self.theta_r >= 0.0
            && self.theta_c >= 0.0
            && self.v > 0.0
            && self.v <= 1.0
            && self.eps_pri >= 0.0
            && self.eps_dual >= 0.0
            && self.max_inner >= 1;
        if ok && [self.theta_n, self.theta_r, self.theta_c, self.p].iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid ADMM settings {self:?}")))
        }
    }
}

/// Iterates and residuals of one group solve.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: Matrix,
    pub z: Matrix,
    pub y: Matrix,
    pub iter: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub converged: bool,
    /// Filled only by [`solve_group_traced`].
    pub trace: Vec<TraceRow>,
}

/// One line of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub objective: f64,
}

/// `max(0, |x| − λ·|x|^(v−1))·sign(x)`, with `Γ(0) = 0`.
#[inline]
pub fn fast_threshold(x: f64, lambda: f64, v: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let a = x.abs();
    let shrink = if v == 1.0 { lambda } else { lambda * a.powf(v - 1.0) };
    (a - shrink).max(0.0).copysign(x)
}

/// Nuclear-norm proximal step on `Z − Y` with the generalized threshold.
pub fn x_step(z: &Matrix, y: &Matrix, cfg: &AdmmConfig) -> Result<Matrix> {
    if z.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!("Z {:?} vs Y {:?}", z.dim(), y.dim())));
    }
    let target = z - y;
    let lambda = cfg.lambda();
    if lambda == 0.0 {
        return Ok(target);
    }
    let dec = svd(&target)?;
    let shrunk: Vec<f64> = dec.s.iter().map(|&s| fast_threshold(s, lambda, cfg.v)).collect();
    if shrunk.iter().all(|&s| s == 0.0) {
        return Ok(Array2::zeros(target.dim()));
    }
    Ok(dec.reconstruct_with(&shrunk))
}

/// Reusable solver for `2θr·Lr·Z + 2θc·Z·Lc + (1+p)·Z = R`.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    theta_r: f64,
    theta_c: f64,
    p: f64,
    lr: Matrix,
    lc: Matrix,
    /// `None` when both graph weights vanish and the system is diagonal.
    basis: Option<(Matrix, Matrix, Matrix)>,
}

impl SylvesterSolver {
    pub fn new(lr: &GraphLaplacian, lc: &GraphLaplacian, cfg: &AdmmConfig) -> Result<Self> {
        let basis = if cfg.theta_r == 0.0 && cfg.theta_c == 0.0 {
            None
        } else {
            let er = sym_eig(lr.matrix())?;
            let ec = sym_eig(lc.matrix())?;
            for lmin in [er.lambda[0], ec.lambda[0]] {
                if lmin < -PSD_TOLERANCE {
                    return Err(Error::NotPsd(lmin));
                }
            }
            let denom = Array2::from_shape_fn((er.lambda.len(), ec.lambda.len()), |(i, j)| {
                2.0 * cfg.theta_r * er.lambda[i] + 2.0 * cfg.theta_c * ec.lambda[j] + 1.0 + cfg.p
            });
            Some((er.q, ec.q, denom))
        };
        Ok(Self {
            theta_r: cfg.theta_r,
            theta_c: cfg.theta_c,
            p: cfg.p,
            lr: lr.matrix().clone(),
            lc: lc.matrix().clone(),
            basis,
        })
    }

    /// The left-hand operator applied to `z`.
    pub fn apply(&self, z: &Matrix) -> Matrix {
        let mut out = z * (1.0 + self.p);
        if self.theta_r != 0.0 {
            out.scaled_add(2.0 * self.theta_r, &self.lr.dot(z));
        }
        if self.theta_c != 0.0 {
            out.scaled_add(2.0 * self.theta_c, &z.dot(&self.lc));
        }
        out
    }

    pub fn solve(&self, rhs: &Matrix) -> Matrix {
        match &self.basis {
            None => rhs / (1.0 + self.p),
            Some((qr, qc, denom)) => {
                let mut b = qr.t().dot(rhs).dot(qc);
                Zip::from(&mut b).and(denom).for_each(|x, &d| *x /= d);
                qr.dot(&b).dot(&qc.t())
            }
        }
    }

    fn check_shape(&self, m: &Matrix) -> Result<()> {
        if m.dim() != (self.lr.nrows(), self.lc.nrows()) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} vs Laplacians {}x{} / {}x{}",
                m.dim(),
                self.lr.nrows(),
                self.lr.nrows(),
                self.lc.nrows(),
                self.lc.nrows()
            )));
        }
        Ok(())
    }

    /// Z-update. Solved as `Z = T + D` with `D` from the residual equation, so
    /// that `Z` equals `T` exactly whenever `T` already satisfies the system.
    pub fn z_update(&self, t: &Matrix, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        self.check_shape(t)?;
        if x.dim() != t.dim() || y.dim() != t.dim() {
            return Err(Error::DimensionMismatch("X, Y and T must share a shape".into()));
        }
        // T + p(X+Y) − A(T), grouped so it is exactly zero when X = T, Y = 0
        let mut rhs = (&(x + y) - t) * self.p;
        if self.theta_r != 0.0 {
            rhs.scaled_add(-2.0 * self.theta_r, &self.lr.dot(t));
        }
        if self.theta_c != 0.0 {
            rhs.scaled_add(-2.0 * self.theta_c, &t.dot(&self.lc));
        }
        let mut z = self.solve(&rhs);
        z += t;
        Ok(z)
    }
}

/// Single Z-step; builds a fresh [`SylvesterSolver`].
pub fn z_step(
    t: &Matrix,
    x: &Matrix,
    y: &Matrix,
    lr: &GraphLaplacian,
    lc: &GraphLaplacian,
    cfg: &AdmmConfig,
) -> Result<Matrix> {
    SylvesterSolver::new(lr, lc, cfg)?.z_update(t, x, y)
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.sum())
}

/// Group objective at `x`.
pub fn objective(
    x: &Matrix,
    t: &Matrix,
    lr: &GraphLaplacian,
    lc: &GraphLaplacian,
    cfg: &AdmmConfig,
) -> Result<f64> {
    let fidelity = 0.5 * (x - t).iter().map(|v| v * v).sum::<f64>();
    let mut total = fidelity;
    if cfg.theta_n != 0.0 {
        total += cfg.theta_n * nuclear_norm(x)?;
    }
    if cfg.theta_r != 0.0 {
        total += cfg.theta_r * smoothness(x, lr, GraphMode::Row)?;
    }
    if cfg.theta_c != 0.0 {
        total += cfg.theta_c * smoothness(x, lc, GraphMode::Column)?;
    }
    Ok(total)
}

/// Runs ADMM from `X = Z = T`, `Y = 0`; returns the final `Z`.
pub fn solve_group(
    t: &Matrix,
    lr: &GraphLaplacian,
    lc: &GraphLaplacian,
    cfg: &AdmmConfig,
) -> Result<(Matrix, AdmmState)> {
    run(t, lr, lc, cfg, false)
}

/// Like [`solve_group`] but records residuals and objective per iteration.
pub fn solve_group_traced(
    t: &Matrix,
    lr: &GraphLaplacian,
    lc: &GraphLaplacian,
    cfg: &AdmmConfig,
) -> Result<(Matrix, AdmmState)> {
    run(t, lr, lc, cfg, true)
}

fn run(
    t: &Matrix,
    lr: &GraphLaplacian,
    lc: &GraphLaplacian,
    cfg: &AdmmConfig,
    traced: bool,
) -> Result<(Matrix, AdmmState)> {
    cfg.validate()?;
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("group matrix"));
    }
    let solver = SylvesterSolver::new(lr, lc, cfg)?;
    solver.check_shape(t)?;
    let scale = ((t.nrows() * t.ncols()) as f64).sqrt();

    let mut state = AdmmState {
        x: t.clone(),
        z: t.clone(),
        y: Array2::zeros(t.dim()),
        iter: 0,
        r_norm: 0.0,
        s_norm: 0.0,
        converged: false,
        trace: Vec::new(),
    };
    while state.iter < cfg.max_inner {
        state.iter += 1;
        state.x = x_step(&state.z, &state.y, cfg)?;
        let z_next = solver.z_update(t, &state.x, &state.y)?;
        let r = &state.x - &z_next;
        state.y += &r;
        state.r_norm = frobenius(&r) / scale;
        state.s_norm = cfg.p * frobenius(&(&z_next - &state.z)) / scale;
        state.z = z_next;
        if traced {
            state.trace.push(TraceRow {
                iteration: state.iter,
                r_norm: state.r_norm,
                s_norm: state.s_norm,
                objective: objective(&state.z, t, lr, lc, cfg)?,
            });
        }
        if state.r_norm <= cfg.eps_pri && state.s_norm <= cfg.eps_dual {
            state.converged = true;
            break;
        }
    }
    Ok((state.z.clone(), state))
}

/// Singular-value soft thresholding, the `v = 1` special case, computed
/// directly from a decomposition. Useful as a reference.
pub fn singular_value_soft_threshold(m: &Matrix, lambda: f64) -> Result<Matrix> {
    let dec = svd(m)?;
    let s: Vec<f64> = dec.s.iter().map(|&s| (s - lambda).max(0.0)).collect();
    Ok(dec.reconstruct_with(&s))
}

#[doc(hidden)]
pub fn singular_values(m: &Matrix) -> Result<Array1<f64>> {
    Ok(svd(m)?.s)
}
