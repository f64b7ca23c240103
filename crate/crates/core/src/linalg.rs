//! Jacobi-based SVD and symmetric eigendecomposition for small dense matrices.
//!
//! The solver only ever sees groups of at most a few dozen rows and columns,
//! so the quadratic-per-sweep cost of Jacobi methods is negligible and their
//! accuracy (orthogonality to working precision) is what matters.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::Matrix;

const MAX_SWEEPS: usize = 100;

/// Full singular value decomposition `A = U·diag(S)·Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// m×m orthogonal.
    pub u: Matrix,
    /// min(m, n) values, non-increasing, non-negative.
    pub s: Array1<f64>,
    /// n×n orthogonal.
    pub v: Matrix,
}

impl SvdResult {
    /// `U·diag(s)·Vᵀ` using the leading min(m, n) singular triplets.
    pub fn reconstruct_with(&self, s: &[f64]) -> Matrix {
        let k = s.len();
        let mut us = self.u.slice(ndarray::s![.., ..k]).to_owned();
        for (j, &sv) in s.iter().enumerate() {
            us.column_mut(j).mapv_inplace(|x| x * sv);
        }
        us.dot(&self.v.slice(ndarray::s![.., ..k]).t())
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(self.s.as_slice().expect("contiguous"))
    }
}

/// Symmetric eigendecomposition `A = Q·diag(λ)·Qᵀ`, λ non-decreasing.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub q: Matrix,
    pub lambda: Array1<f64>,
}

fn check_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    check_finite(a, "svd input")?;
    let (m, n) = a.dim();
    let transposed = m < n;
    // work on a tall matrix W (p×q, p ≥ q), stored column by column
    let w_mat = if transposed { a.t().to_owned() } else { a.clone() };
    let (p, q) = w_mat.dim();
    let mut cols: Vec<Vec<f64>> = (0..q).map(|j| w_mat.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * p as f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for k in 0..p {
                        a += ci[k] * ci[k];
                        b += cj[k] * cj[k];
                        g += ci[k] * cj[k];
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut vcols, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let smax = order.first().map_or(0.0, |o| o.0);
    let zero_cut = smax * 1e-13;

    let mut s = Array1::zeros(q);
    let mut u_basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut v_thin = Array2::zeros((q, q));
    let mut pending = Vec::new();
    for (rank, &(sigma, j)) in order.iter().enumerate() {
        v_thin.column_mut(rank).assign(&Array1::from(vcols[j].clone()));
        if sigma > zero_cut && sigma > 0.0 {
            s[rank] = sigma;
            u_basis.push(cols[j].iter().map(|x| x / sigma).collect());
        } else {
            pending.push(rank);
        }
    }
    // fill U columns belonging to zero singular values, then the p−q extra ones
    let mut u = Array2::zeros((p, p));
    let mut filled = vec![false; p];
    let mut next = 0;
    for rank in 0..q {
        if !pending.contains(&rank) {
            u.column_mut(rank).assign(&Array1::from(u_basis[next].clone()));
            filled[rank] = true;
            next += 1;
        }
    }
    complete_basis(&mut u, &mut filled);

    let (u, v) = if transposed { (v_thin, u) } else { (u, v_thin) };
    Ok(SvdResult { u, s, v })
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for k in 0..ci.len() {
        let x = ci[k];
        let y = cj[k];
        ci[k] = c * x - s * y;
        cj[k] = s * x + c * y;
    }
}

/// Fills unfilled columns of `u` with an orthonormal completion
/// (Gram–Schmidt over the standard basis, orthogonalized twice).
fn complete_basis(u: &mut Matrix, filled: &mut [bool]) {
    let p = u.nrows();
    let mut candidate = 0;
    for col in 0..p {
        if filled[col] {
            continue;
        }
        while candidate < p {
            let mut v = Array1::<f64>::zeros(p);
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for other in 0..p {
                    if filled[other] {
                        let uc = u.column(other);
                        let d = uc.dot(&v);
                        v.scaled_add(-d, &uc);
                    }
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                u.column_mut(col).assign(&(v / norm));
                filled[col] = true;
                break;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &Matrix) -> Result<EigResult> {
    check_finite(a, "sym_eig input")?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "sym_eig needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let norm = frobenius(a);
    let asym = frobenius(&(a - &a.t()));
    if asym > 1e-9 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (‖A−Aᵀ‖ = {asym:e})"
        )));
    }
    let mut m = (a + &a.t()) * 0.5;
    let mut q = Array2::<f64>::eye(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm || off == 0.0 {
            break;
        }
        for pi in 0..n {
            for qi in (pi + 1)..n {
                let apq = m[[pi, qi]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[pi, pi]];
                let aqq = m[[qi, qi]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, pi]];
                    let mkq = m[[k, qi]];
                    m[[k, pi]] = c * mkp - s * mkq;
                    m[[k, qi]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[pi, k]];
                    let mqk = m[[qi, k]];
                    m[[pi, k]] = c * mpk - s * mqk;
                    m[[qi, k]] = s * mpk + c * mqk;
                }
                m[[pi, qi]] = 0.0;
                m[[qi, pi]] = 0.0;
                for k in 0..n {
                    let qkp = q[[k, pi]];
                    let qkq = q[[k, qi]];
                    q[[k, pi]] = c * qkp - s * qkq;
                    q[[k, qi]] = s * qkp + c * qkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]).then(i.cmp(&j)));
    let lambda = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let q = q.select(Axis(1), &order);
    Ok(EigResult { q, lambda })
}
