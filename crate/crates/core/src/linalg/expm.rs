//! Matrix exponential by scaling and squaring with Pade approximants
//! (Higham 2005 degree selection).

use super::{solve, ComplexMatrix, C64};
use crate::error::{Error, Result};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each degree meets unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

// Beyond this the squaring phase cannot stay finite in f64 for any
// non-nilpotent input we build.
const MAX_SQUARINGS: i32 = 1000;

/// `exp(s * a)`.
pub fn expm(a: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    a.ensure_square("expm input")?;
    if !s.is_finite() {
        return Err(Error::Numerical(format!("non-finite scale factor {s}")));
    }
    let n = a.rows();
    let x = a.scale_real(s);
    if !x.is_finite() {
        return Err(Error::Numerical("non-finite entries in expm argument".into()));
    }
    let norm = x.norm_one();
    if norm == 0.0 {
        return Ok(ComplexMatrix::identity(n));
    }

    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(&x, coeffs);
        }
    }

    let squarings = ((norm / THETA13).log2().ceil() as i32).max(0);
    if squarings > MAX_SQUARINGS {
        return Err(Error::Numerical(format!(
            "expm scaling needs {squarings} squarings (norm {norm:.3e})"
        )));
    }
    let scaled = x.scale_real(2f64.powi(-squarings));
    let mut result = pade13(&scaled)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if !result.is_finite() {
        return Err(Error::Numerical("overflow while squaring in expm".into()));
    }
    Ok(result)
}

fn add_scaled_identity(m: &mut ComplexMatrix, c: f64) {
    for i in 0..m.rows() {
        m[(i, i)] += C64::new(c, 0.0);
    }
}

fn combine(terms: &[(&ComplexMatrix, f64)], n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(n, n);
    for (m, c) in terms {
        out += &m.scale_real(*c);
    }
    out
}

fn finish(u: ComplexMatrix, v: ComplexMatrix) -> Result<ComplexMatrix> {
    // r = (V - U)^{-1} (V + U)
    let p = &v + &u;
    let q = &v - &u;
    solve(&q, &p)
}

fn pade_low(x: &ComplexMatrix, b: &[f64]) -> Result<ComplexMatrix> {
    let n = x.rows();
    let x2 = x * x;
    let mut powers = vec![ComplexMatrix::identity(n), x2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap() * &x2;
        powers.push(next);
    }
    let mut u_inner = ComplexMatrix::zeros(n, n);
    let mut v = ComplexMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        u_inner += &p.scale_real(b[2 * k + 1]);
        v += &p.scale_real(b[2 * k]);
    }
    let u = x * &u_inner;
    finish(u, v)
}

fn pade13(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = x.rows();
    let b = &PADE13;
    let x2 = x * x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;

    let mut u_tail = combine(&[(&x6, b[13]), (&x4, b[11]), (&x2, b[9])], n);
    u_tail = &x6 * &u_tail;
    let mut u_inner = combine(&[(&x6, b[7]), (&x4, b[5]), (&x2, b[3])], n);
    add_scaled_identity(&mut u_inner, b[1]);
    u_inner += &u_tail;
    let u = x * &u_inner;

    let mut v_tail = combine(&[(&x6, b[12]), (&x4, b[10]), (&x2, b[8])], n);
    v_tail = &x6 * &v_tail;
    let mut v = combine(&[(&x6, b[6]), (&x4, b[4]), (&x2, b[2])], n);
    add_scaled_identity(&mut v, b[0]);
    v += &v_tail;

    finish(u, v)
}
