//! Small dense complex linear algebra for per-node systems (d ≤ 4).

use crate::grid::C64;

/// LU factorization with partial pivoting of an `n × n` row-major matrix, in place.
/// Returns the row permutation and the permutation sign, or `None` for an exactly singular matrix.
fn lu_in_place(a: &mut [C64], n: usize) -> Option<(Vec<usize>, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
            .unwrap();
        if a[pivot * n + col].norm() == 0.0 {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            perm.swap(pivot, col);
            sign = -sign;
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            a[r * n + col] = f;
            for c in col + 1..n {
                let v = a[col * n + c];
                a[r * n + c] -= f * v;
            }
        }
    }
    Some((perm, sign))
}

fn lu_solve(lu: &[C64], n: usize, perm: &[usize], b: &[C64]) -> Vec<C64> {
    let mut x: Vec<C64> = perm.iter().map(|&p| b[p]).collect();
    for r in 0..n {
        for c in 0..r {
            let v = x[c];
            x[r] -= lu[r * n + c] * v;
        }
    }
    for r in (0..n).rev() {
        for c in r + 1..n {
            let v = x[c];
            x[r] -= lu[r * n + c] * v;
        }
        x[r] /= lu[r * n + r];
    }
    x
}

/// Determinant of a row-major `n × n` matrix.
pub fn determinant(a: &[C64], n: usize) -> C64 {
    let mut m = a.to_vec();
    match lu_in_place(&mut m, n) {
        None => C64::new(0.0, 0.0),
        Some((_, sign)) => (0..n).fold(C64::new(sign, 0.0), |acc, i| acc * m[i * n + i]),
    }
}

/// Solves `A x = b` and returns `x` with the 1-norm condition number of `A`.
/// Singular matrices give `None`.
pub fn solve_with_condition(a: &[C64], n: usize, b: &[C64]) -> Option<(Vec<C64>, f64)> {
    let mut m = a.to_vec();
    let (perm, _) = lu_in_place(&mut m, n)?;
    let x = lu_solve(&m, n, &perm, b);
    let norm1 = |mat: &dyn Fn(usize, usize) -> C64| {
        (0..n)
            .map(|c| (0..n).map(|r| mat(r, c).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    for c in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[c] = C64::new(1.0, 0.0);
        let col = lu_solve(&m, n, &perm, &e);
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    let cond = norm1(&|r, c| a[r * n + c]) * norm1(&|r, c| inv[r * n + c]);
    if !cond.is_finite() {
        return None;
    }
    Some((x, cond))
}
