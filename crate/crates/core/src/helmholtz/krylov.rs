//! ILU(0)-preconditioned BiCGSTAB for the complex Helmholtz system.

use super::sparse::{norm2, SparseMatrix};
use crate::error::{Error, Result};
use crate::grid::C64;

/// Incomplete LU factorization with the sparsity pattern of the matrix.
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let (row_ptr, col_idx, values) = a.parts();
        let (row_ptr, col_idx, mut values) = (row_ptr.to_vec(), col_idx.to_vec(), values.to_vec());
        let n = a.dim();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Singular(format!("row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let row = row_ptr[i]..row_ptr[i + 1];
            for k in row.clone() {
                pos[col_idx[k]] = k;
            }
            for k in row.clone() {
                let c = col_idx[k];
                if c >= i {
                    break;
                }
                let pivot = values[diag[c]];
                if pivot.norm() == 0.0 {
                    return Err(Error::Singular(format!("zero pivot at row {c}")));
                }
                let factor = values[k] / pivot;
                values[k] = factor;
                for kk in diag[c] + 1..row_ptr[c + 1] {
                    let p = pos[col_idx[kk]];
                    if p != usize::MAX {
                        let upper = values[kk];
                        values[p] -= factor * upper;
                    }
                }
            }
            for k in row {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self {
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// Solves `L U x = b` in place.
    pub fn apply(&self, x: &mut [C64]) {
        let n = x.len();
        for i in 0..n {
            let mut acc = x[i];
            for k in self.row_ptr[i]..self.diag[i] {
                acc -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                acc -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = acc / self.values[self.diag[i]];
        }
    }
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Right-preconditioned BiCGSTAB. Returns the solution, relative residual and iteration count.
pub fn bicgstab(
    a: &SparseMatrix,
    precond: &Ilu0,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, f64, usize)> {
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) =
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut p_hat = vec![zero; n];
    let mut s_hat = vec![zero; n];
    let mut t = vec![zero; n];
    let mut res = 1.0;
    for it in 1..=max_iter {
        let rho_new = dotc(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        p_hat.copy_from_slice(&p);
        precond.apply(&mut p_hat);
        a.matvec(&p_hat, &mut v);
        alpha = rho_new / dotc(&r_hat, &v);
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * p_hat[i];
        }
        res = norm2(&r) / nb;
        if res <= tol {
            return Ok((x, res, it));
        }
        s_hat.copy_from_slice(&r);
        precond.apply(&mut s_hat);
        a.matvec(&s_hat, &mut t);
        let tt = dotc(&t, &t);
        omega = if tt.norm() == 0.0 {
            zero
        } else {
            dotc(&t, &r) / tt
        };
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        res = norm2(&r) / nb;
        if res <= tol {
            return Ok((x, res, it));
        }
        if omega.norm() == 0.0 {
            break;
        }
        rho = rho_new;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}
