//! Dense complex linear algebra on small square matrices.
//!
//! Everything in this crate lives in Hilbert spaces of dimension at most 16,
//! so superoperators are at most 256 x 256 and are stored dense. Density
//! matrices are vectorized by column stacking: `vec(rho)[i + j*d] = rho[(i, j)]`,
//! which gives
//! `vec(A rho B) = (B^T kron A) vec(rho)`.

mod eig;
mod expm;
mod lu;

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eig::{eig_full, eigh, Eigen, HermitianEigen};
pub use expm::expm;
pub use lu::solve;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        let v: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// `|a><b|`
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj())
    }

    pub fn projector(psi: &[C64]) -> Self {
        Self::outer(psi, psi)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn ensure_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what} must be square, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `A B - B A`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// `(A + A^dagger)/2`
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        Self::from_fn(self.rows, self.cols, |r, c| 0.5 * (self[(r, c)] + adj[(r, c)]))
    }

    /// Max-norm distance to the adjoint.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Panics on inner-dimension mismatch; use [`ComplexMatrix::matmul`] for a checked product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch in mul");
        self.mul_unchecked(rhs)
    }
}

/// Kronecker product of two square matrices.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.ensure_square("kron lhs")?;
    b.ensure_square("kron rhs")?;
    let (n, m) = (a.rows, b.rows);
    let mut out = ComplexMatrix::zeros(n * m, n * m);
    for ar in 0..n {
        for ac in 0..n {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..m {
                for bc in 0..m {
                    out[(ar * m + br, ac * m + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &ComplexMatrix) -> Vec<C64> {
    let mut v = Vec::with_capacity(rho.rows * rho.cols);
    for c in 0..rho.cols {
        for r in 0..rho.rows {
            v.push(rho[(r, c)]);
        }
    }
    v
}

/// Inverse of [`vectorize`] for a `dim x dim` matrix.
pub fn unvectorize(v: &[C64], dim: usize) -> Result<ComplexMatrix> {
    if v.len() != dim * dim {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be reshaped to {dim}x{dim}",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(dim, dim, |r, c| v[r + c * dim]))
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = vec_norm(v);
    v.iter().map(|z| z / n).collect()
}

/// Standard basis vector `|index>` in dimension `dim`.
pub fn basis(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}

/// Ordered tensor-factor dimensions; the first factor varies slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    factor_dims: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::Dimension(format!(
                "invalid factor dimensions {factor_dims:?}"
            )));
        }
        Ok(Self { factor_dims })
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    /// Embed an operator acting on factor `which` into the full space.
    pub fn embed(&self, op: &ComplexMatrix, which: usize) -> Result<ComplexMatrix> {
        if which >= self.factor_dims.len() || op.rows() != self.factor_dims[which] {
            return Err(Error::Dimension(format!(
                "operator of size {} does not fit factor {which} of {:?}",
                op.rows(),
                self.factor_dims
            )));
        }
        let mut out = ComplexMatrix::identity(1);
        for (k, &d) in self.factor_dims.iter().enumerate() {
            let factor = if k == which {
                op.clone()
            } else {
                ComplexMatrix::identity(d)
            };
            out = kron(&out, &factor)?;
        }
        Ok(out)
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factor_dims.len()];
        for k in (0..self.factor_dims.len()).rev() {
            out[k] = index % self.factor_dims[k];
            index /= self.factor_dims[k];
        }
        out
    }
}

/// Reduced density matrix over the factors listed in `keep`.
///
/// `keep` may be given in any order; the result is ordered like the layout.
pub fn partial_trace(rho: &ComplexMatrix, layout: &SpaceLayout, keep: &[usize]) -> Result<ComplexMatrix> {
    rho.ensure_square("partial_trace input")?;
    if rho.rows() != layout.total_dim() {
        return Err(Error::Dimension(format!(
            "matrix of size {} does not match layout {:?}",
            rho.rows(),
            layout.factor_dims()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= layout.num_factors()) {
        return Err(Error::Dimension(format!(
            "keep set {keep:?} out of range for {} factors",
            layout.num_factors()
        )));
    }
    let kept_dims: Vec<usize> = kept.iter().map(|&k| layout.factor_dims()[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let reduced_index = |digits: &[usize]| {
        kept.iter()
            .zip(&kept_dims)
            .fold(0, |acc, (&k, &d)| acc * d + digits[k])
    };
    let traced_match = |a: &[usize], b: &[usize]| {
        (0..a.len()).all(|k| kept.binary_search(&k).is_ok() || a[k] == b[k])
    };

    let n = rho.rows();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| layout.digits(i)).collect();
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for r in 0..n {
        for c in 0..n {
            if traced_match(&digits[r], &digits[c]) {
                out[(reduced_index(&digits[r]), reduced_index(&digits[c]))] += rho[(r, c)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)).unwrap();
        assert_eq!(k, ComplexMatrix::identity(6));
    }

    #[test]
    fn kron_diagonal_case() {
        let k = kron(&ComplexMatrix::real_diag(&[1.0, 2.0]), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(k, ComplexMatrix::real_diag(&[1.0, 1.0, 2.0, 2.0]));
    }

    #[test]
    fn kron_sigma_x_flips_both_qubits() {
        let xx = kron(&sigma_x(), &sigma_x()).unwrap();
        let out = xx.matvec(&basis(4, 0)).unwrap();
        assert_eq!(out, basis(4, 3));
    }

    #[test]
    fn kron_rejects_non_square() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(kron(&a, &ComplexMatrix::identity(2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn vectorize_identity_column_stacking() {
        let v = vectorize(&ComplexMatrix::identity(2));
        assert_eq!(v, vec![ONE, ZERO, ZERO, ONE]);
    }

    #[test]
    fn vectorize_is_column_major() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let v: Vec<f64> = vectorize(&m).iter().map(|z| z.re).collect();
        assert_eq!(v, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn unvectorize_rejects_bad_length() {
        assert!(matches!(unvectorize(&[ONE; 5], 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn vec_sandwich_identity() {
        let a = random_matrix(3, 1);
        let b = random_matrix(3, 2);
        let rho = random_matrix(3, 3);
        let lhs = vectorize(&(&(&a * &rho) * &b));
        let sup = kron(&b.transpose(), &a).unwrap();
        let rhs = sup.matvec(&vectorize(&rho)).unwrap();
        let err = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn partial_trace_of_product_state() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let rho_a = ComplexMatrix::real_diag(&[0.25, 0.75]);
        let rho_b = ComplexMatrix::real_diag(&[0.5, 0.3, 0.2]);
        let rho = kron(&rho_a, &rho_b).unwrap();
        let a = partial_trace(&rho, &layout, &[0]).unwrap();
        let b = partial_trace(&rho, &layout, &[1]).unwrap();
        assert!((&a - &rho_a).norm_max() < 1e-15);
        assert!((&b - &rho_b).norm_max() < 1e-15);
    }

    #[test]
    fn partial_trace_keeps_middle_factor() {
        let layout = SpaceLayout::new(vec![2, 3, 2]).unwrap();
        let a = ComplexMatrix::real_diag(&[0.5, 0.5]);
        let b = ComplexMatrix::projector(&normalized(&[ONE, I, ONE]));
        let c = ComplexMatrix::real_diag(&[0.1, 0.9]);
        let rho = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let reduced = partial_trace(&rho, &layout, &[1]).unwrap();
        assert!((&reduced - &b).norm_max() < 1e-15);
        let ac = partial_trace(&rho, &layout, &[2, 0]).unwrap();
        assert!((&ac - &kron(&a, &c).unwrap()).norm_max() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_inconsistent_layout() {
        let layout = SpaceLayout::new(vec![2, 2]).unwrap();
        let rho = ComplexMatrix::identity(6);
        assert!(matches!(partial_trace(&rho, &layout, &[0]), Err(Error::Dimension(_))));
        let rho = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace(&rho, &layout, &[2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn embed_places_operator_on_factor() {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let x = layout.embed(&sigma_x(), 0).unwrap();
        let expected = kron(&sigma_x(), &ComplexMatrix::identity(3)).unwrap();
        assert_eq!(x, expected);
        assert!(layout.embed(&sigma_x(), 1).is_err());
    }
}
