//! Eigensolvers.
//!
//! `eig_full` handles general complex matrices: Householder reduction to
//! upper Hessenberg form, implicitly shifted single-shift QR to complex Schur
//! form, then eigenvectors by back substitution on the triangular factor.
//! `eigh` is a cyclic Jacobi solver for Hermitian matrices.

use super::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_DIM: usize = 512;

/// Eigenpairs of a general complex matrix. Column `k` of `vectors` belongs
/// to `values[k]` and has unit 2-norm.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows()).map(|r| self.vectors[(r, k)]).collect()
    }
}

/// Eigenpairs of a Hermitian matrix, values ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

pub fn eig_full(a: &ComplexMatrix) -> Result<Eigen> {
    a.ensure_square("eig_full input")?;
    let n = a.rows();
    if n > MAX_DIM {
        return Err(Error::Dimension(format!(
            "eig_full supports dimension <= {MAX_DIM}, got {n}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numerical("non-finite entries in eig_full input".into()));
    }
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut h = a.clone();
    let mut z = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut z);
    schur_qr(&mut h, &mut z)?;
    let values: Vec<C64> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = triangular_eigenvectors(&h, &z);
    Ok(Eigen { values, vectors })
}

fn hessenberg(h: &mut ComplexMatrix, z: &mut ComplexMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha_norm: f64 = ((k + 1)..n).map(|r| h[(r, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        // v = x + phase*|x| e1, reflector P = I - 2 v v^H / (v^H v)
        let mut v: Vec<C64> = ((k + 1)..n).map(|r| h[(r, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;

        // H <- P H
        for c in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(i, vi)| vi.conj() * h[(k + 1 + i, c)])
                .sum();
            let f = dot * tau;
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, c)] -= vi * f;
            }
        }
        // H <- H P, Z <- Z P
        for m in [&mut *h, &mut *z] {
            for r in 0..n {
                let dot: C64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, vi)| m[(r, k + 1 + i)] * vi)
                    .sum();
                let f = dot * tau;
                for (i, vi) in v.iter().enumerate() {
                    m[(r, k + 1 + i)] -= f * vi.conj();
                }
            }
        }
        for r in (k + 2)..n {
            h[(r, k)] = ZERO;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let ax = x.norm();
    let norm = ax.hypot(y.norm());
    (ax / norm, (x / ax) * y.conj() / norm)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn schur_qr(h: &mut ComplexMatrix, z: &mut ComplexMatrix) -> Result<()> {
    let n = h.rows();
    let eps = f64::EPSILON;
    let norm = h.norm_frobenius().max(f64::MIN_POSITIVE);
    let max_iter = 60 * n.max(10);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;

    while hi > 0 {
        // find the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if diag == 0.0 {
                diag = norm;
            }
            if sub <= eps * diag {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }

        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(Error::Numerical(format!(
                "QR iteration did not converge after {total} sweeps (active block {lo}..={hi})"
            )));
        }

        let mu = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let first_col = if k > lo { k - 1 } else { k };
            for col in first_col..n {
                let (a, b) = (h[(k, col)], h[(k + 1, col)]);
                h[(k, col)] = a * c + s * b;
                h[(k + 1, col)] = -s.conj() * a + b * c;
            }
            let last_row = (k + 2).min(hi);
            for row in 0..=last_row {
                let (a, b) = (h[(row, k)], h[(row, k + 1)]);
                h[(row, k)] = a * c + b * s.conj();
                h[(row, k + 1)] = -a * s + b * c;
            }
            for row in 0..n {
                let (a, b) = (z[(row, k)], z[(row, k + 1)]);
                z[(row, k)] = a * c + b * s.conj();
                z[(row, k + 1)] = -a * s + b * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    Ok(())
}

fn triangular_eigenvectors(t: &ComplexMatrix, z: &ComplexMatrix) -> ComplexMatrix {
    let n = t.rows();
    let small = (f64::EPSILON * t.norm_frobenius()).max(f64::MIN_POSITIVE);
    let mut out = ComplexMatrix::zeros(n, n);
    let mut x = vec![ZERO; n];
    for k in 0..n {
        let lambda = t[(k, k)];
        x.iter_mut().for_each(|v| *v = ZERO);
        x[k] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * x[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            x[i] = -acc / denom;
            // keep the partial solution bounded
            let big = x[i..=k].iter().map(|v| v.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for v in &mut x[i..=k] {
                    *v /= big;
                }
            }
        }
        let mut col: Vec<C64> = (0..n)
            .map(|r| (0..=k).map(|j| z[(r, j)] * x[j]).sum())
            .collect();
        let norm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
        for r in 0..n {
            out[(r, k)] = col[r];
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix; only the upper triangle is
/// trusted to be consistent, so callers should pass a Hermitized input.
pub fn eigh(a: &ComplexMatrix) -> Result<HermitianEigen> {
    a.ensure_square("eigh input")?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.norm_frobenius().max(f64::MIN_POSITIVE);

    let off = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += m[(p, q)].norm_sqr();
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > 1e-15 * scale {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::Numerical("Jacobi sweeps did not converge".into()));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let (app, aqq) = (m[(p, p)].re, m[(q, q)].re);
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ph_conj = phase.conj();
                // columns: A <- A J, J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = akp * c - akq * s * ph_conj;
                    m[(k, q)] = akp * s + akq * c * ph_conj;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * s * ph_conj;
                    v[(k, q)] = vkp * s + vkq * c * ph_conj;
                }
                // rows: A <- J^H A
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = apk * c - aqk * s * phase;
                    m[(q, k)] = apk * s + aqk * c * phase;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}
