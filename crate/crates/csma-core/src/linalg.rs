//! Minimal dense linear-system solver (partial pivoting), shared by the
//! Newton step and the exact chain solve. Instances stay in the low
//! thousands of unknowns.

use crate::error::{Error, Result};

/// Solve `a x = b` in place, returning `x`. `a` is consumed.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::Solver("non-square system".into()));
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-14 {
            return Err(Error::Solver(format!("singular matrix at column {col}")));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col];
        for row in (col + 1)..n {
            let f = a[row][col] / pivot;
            if f != 0.0 {
                for j in col..n {
                    let v = a[col][j];
                    a[row][j] -= f * v;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut v = b[row];
        for j in (row + 1)..n {
            v -= a[row][j] * x[j];
        }
        x[row] = v / a[row][row];
    }
    Ok(x)
}
