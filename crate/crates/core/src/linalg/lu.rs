use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Solve `A X = B` by LU factorization with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.ensure_square("solve lhs")?;
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::Dimension(format!(
            "rhs has {} rows, system has {n}",
            b.rows()
        )));
    }
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.norm_max();

    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|r| (r, lu[(r, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= f64::EPSILON * scale * n as f64 || pivot_abs == 0.0 {
            return Err(Error::Numerical(format!("singular matrix at column {k}")));
        }
        if pivot_row != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
            for c in 0..m {
                let tmp = x[(k, c)];
                x[(k, c)] = x[(pivot_row, c)];
                x[(pivot_row, c)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / pivot;
            if factor == ZERO {
                continue;
            }
            lu[(r, k)] = factor;
            for c in (k + 1)..n {
                let u = lu[(k, c)];
                lu[(r, c)] -= factor * u;
            }
            for c in 0..m {
                let u = x[(k, c)];
                x[(r, c)] -= factor * u;
            }
        }
    }

    for c in 0..m {
        for r in (0..n).rev() {
            let mut acc: C64 = x[(r, c)];
            for k in (r + 1)..n {
                acc -= lu[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / lu[(r, r)];
        }
    }
    Ok(x)
}
