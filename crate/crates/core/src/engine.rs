//! Lindblad master equation: Liouvillian assembly, time integration and
//! steady-state solve.
//!
//! Density matrices are vectorized by column stacking, so
//! `vec(A X B) = (B^T (x) A) vec(X)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    eig_full, eigh, expm, inner, kron, solve, unvectorize, vec_norm, vectorize, ComplexMatrix, C64, I, ONE,
    ZERO,
};

/// Compressed sparse row copy of a superoperator, used for the RK4 hot loop.
#[derive(Debug, Clone)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..m.rows() {
            for (c, v) in m.row(r).iter().enumerate() {
                if *v != ZERO {
                    cols.push(c);
                    vals.push(*v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { row_ptr, cols, vals }
    }

    #[inline]
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = ZERO;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

/// Liouvillian superoperator acting on `vec(rho)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    dense: ComplexMatrix,
    csr: Csr,
    norm_one: f64,
}

impl Liouvillian {
    /// Wraps an arbitrary `d^2 x d^2` superoperator.
    pub fn from_superoperator(dense: ComplexMatrix) -> Result<Self> {
        dense.ensure_square("superoperator")?;
        let n = dense.rows();
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n {
            return Err(Error::Dimension(format!("superoperator size {n} is not a square")));
        }
        if !dense.is_finite() {
            return Err(Error::Numerical("non-finite Liouvillian entries".into()));
        }
        Ok(Self {
            dim,
            csr: Csr::from_dense(&dense),
            norm_one: dense.norm_one(),
            dense,
        })
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.dense
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm(&self) -> f64 {
        self.norm_one
    }

    pub fn nonzeros(&self) -> usize {
        self.csr.vals.len()
    }

    pub fn apply_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim * self.dim {
            return Err(Error::Dimension(format!(
                "vector of length {} for superoperator on d = {}",
                v.len(),
                self.dim
            )));
        }
        let mut out = vec![ZERO; v.len()];
        self.csr.apply(v, &mut out);
        Ok(out)
    }

    /// `L rho` as a matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_state(rho)?;
        unvectorize(&self.apply_vec(&vectorize(rho))?, self.dim)
    }

    /// `exp(L t)`.
    pub fn propagator(&self, t: f64) -> Result<ComplexMatrix> {
        expm(&self.dense, t)
    }

    /// `||L vec(rho)||_2`, the stationarity residual.
    pub fn residual(&self, rho: &ComplexMatrix) -> Result<f64> {
        self.check_state(rho)?;
        Ok(vec_norm(&self.apply_vec(&vectorize(rho))?))
    }

    fn check_state(&self, rho: &ComplexMatrix) -> Result<()> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "state is {}x{}, Liouvillian acts on d = {}",
                rho.rows(),
                rho.cols(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// `L = -i(I (x) H_eff - conj(H_eff) (x) I) + sum_k conj(C_k) (x) C_k`
/// with `H_eff = H - (i/2) sum_k C_k^dag C_k`.
pub fn build_liouvillian(h: &ComplexMatrix, collapse: &[ComplexMatrix]) -> Result<Liouvillian> {
    h.ensure_square("Hamiltonian")?;
    let d = h.rows();
    for (k, c) in collapse.iter().enumerate() {
        if c.rows() != d || c.cols() != d {
            return Err(Error::Dimension(format!(
                "collapse operator {k} is {}x{}, Hamiltonian is {d}x{d}",
                c.rows(),
                c.cols()
            )));
        }
    }
    if h.hermiticity_error() > 1e-10 * h.norm_max().max(1.0) {
        return Err(Error::Numerical(format!(
            "Hamiltonian is not Hermitian (error {:.3e})",
            h.hermiticity_error()
        )));
    }
    let mut heff = h.clone();
    for c in collapse {
        heff += &(&c.adjoint() * c).scale(C64::new(0.0, -0.5));
    }
    let id = ComplexMatrix::identity(d);
    let mut l = (&kron(&id, &heff)? - &kron(&heff.conj(), &id)?).scale(-I);
    for c in collapse {
        l += &kron(&c.conj(), c)?;
    }
    Liouvillian::from_superoperator(l)
}

/// `-i[H, rho] + sum_k (C rho C^dag - {C^dag C, rho}/2)` evaluated directly.
pub fn lindblad_rhs(h: &ComplexMatrix, collapse: &[ComplexMatrix], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = h.commutator(rho)?.scale(-I);
    for c in collapse {
        let cd = c.adjoint();
        let cdc = &cd * c;
        out += &(&(c * rho) * &cd);
        let anti = &(&cdc * rho) + &(rho * &cdc);
        out += &anti.scale_real(-0.5);
    }
    Ok(out)
}

/// `rho -> U rho U^dag` as a superoperator.
pub fn unitary_superoperator(u: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron(&u.conj(), u)
}

/// `<psi|rho|psi>`. Fails if the imaginary residue exceeds 1e-12, which
/// signals a non-Hermitian state.
pub fn fidelity(rho: &ComplexMatrix, psi: &[C64]) -> Result<f64> {
    let f = inner(psi, &rho.matvec(psi)?);
    if f.im.abs() > 1e-12 {
        return Err(Error::Numerical(format!("fidelity has imaginary part {:.3e}", f.im)));
    }
    Ok(f.re)
}

/// `Tr(rho^2)`.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    // Tr(rho^2) = sum_ij rho_ij rho_ji
    let d = rho.rows();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += rho[(i, j)] * rho[(j, i)];
        }
    }
    acc.re
}

/// Physicality diagnostics of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

pub fn physicality(rho: &ComplexMatrix) -> Result<Physicality> {
    let eig = eigh(&rho.hermitian_part())?;
    Ok(Physicality {
        trace_error: (rho.trace() - ONE).norm(),
        hermiticity_error: rho.hermiticity_error(),
        min_eigenvalue: eig.values.first().copied().unwrap_or(0.0),
    })
}

/// Haar-ish random density matrix from a Ginibre sample, `G G^dag / Tr`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr).hermitian_part()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    Propagator,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::Propagator => "propagator",
        })
    }
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "propagator" => Ok(Integrator::Propagator),
            other => Err(Error::config(format!("unknown integrator `{other}` (rk4|propagator)"))),
        }
    }
}

/// RK4 stability/accuracy bound on `dt * ||L||_1`.
pub const RK4_STEP_LIMIT: f64 = 0.1;

/// Largest RK4 step allowed for `l`.
pub fn max_rk4_step(l: &Liouvillian) -> f64 {
    if l.norm() == 0.0 {
        f64::INFINITY
    } else {
        RK4_STEP_LIMIT / l.norm()
    }
}

/// Checks `dt * ||L||_1 <= 0.1`.
pub fn check_rk4_step(l: &Liouvillian, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {dt}")));
    }
    if dt * l.norm() > RK4_STEP_LIMIT {
        return Err(Error::StepSize {
            dt,
            norm: l.norm(),
            suggested: max_rk4_step(l),
        });
    }
    Ok(())
}

/// Advances `vec(rho)` by one sample interval.
enum Stepper<'a> {
    Rk4 {
        l: &'a Liouvillian,
        dt: f64,
        steps: usize,
        k: [Vec<C64>; 4],
        tmp: Vec<C64>,
    },
    Propagator {
        p: ComplexMatrix,
        tmp: Vec<C64>,
    },
}

impl<'a> Stepper<'a> {
    fn new(l: &'a Liouvillian, sample_dt: f64, integrator: Integrator, dt: Option<f64>) -> Result<Self> {
        if !(sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(Error::config(format!("sample interval must be positive, got {sample_dt}")));
        }
        let n = l.dim() * l.dim();
        match integrator {
            Integrator::Rk4 => {
                let steps = match dt {
                    Some(dt) => {
                        check_rk4_step(l, dt)?;
                        (sample_dt / dt).ceil().max(1.0) as usize
                    }
                    None => (sample_dt * l.norm() / RK4_STEP_LIMIT).ceil().max(1.0) as usize,
                };
                Ok(Stepper::Rk4 {
                    l,
                    dt: sample_dt / steps as f64,
                    steps,
                    k: std::array::from_fn(|_| vec![ZERO; n]),
                    tmp: vec![ZERO; n],
                })
            }
            Integrator::Propagator => Ok(Stepper::Propagator {
                p: l.propagator(sample_dt)?,
                tmp: vec![ZERO; n],
            }),
        }
    }

    fn advance(&mut self, y: &mut [C64]) {
        match self {
            Stepper::Rk4 { l, dt, steps, k, tmp } => {
                let h = *dt;
                for _ in 0..*steps {
                    rk4_step(&l.csr, h, y, k, tmp);
                }
            }
            Stepper::Propagator { p, tmp } => {
                let n = p.rows();
                for (r, t) in tmp.iter_mut().enumerate() {
                    *t = p.row(r).iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                }
                y[..n].copy_from_slice(tmp);
            }
        }
    }
}

#[inline]
fn rk4_step(l: &Csr, h: f64, y: &mut [C64], k: &mut [Vec<C64>; 4], tmp: &mut [C64]) {
    let [k1, k2, k3, k4] = k;
    l.apply(y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + k1[i] * (0.5 * h);
    }
    l.apply(tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + k2[i] * (0.5 * h);
    }
    l.apply(tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + k3[i] * h;
    }
    l.apply(tmp, k4);
    let w = h / 6.0;
    for i in 0..y.len() {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
    }
}

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    /// `||L vec(rho)||` at each sample.
    pub residuals: Vec<f64>,
    /// First sample time whose residual fell below the tolerance, if any.
    pub converged_at: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &ComplexMatrix {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn fidelities(&self, psi: &[C64]) -> Result<Vec<f64>> {
        self.states.iter().map(|r| fidelity(r, psi)).collect()
    }
}

/// Integrates from `rho0` to `t_end`, sampling every `sample_dt`.
///
/// With `Integrator::Rk4` the inner step is `dt` if given (checked against
/// the stability bound) or the largest admissible step that divides
/// `sample_dt` evenly.
pub fn evolve(
    l: &Liouvillian,
    rho0: &ComplexMatrix,
    t_end: f64,
    sample_dt: f64,
    integrator: Integrator,
    dt: Option<f64>,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::config(format!("end time must be >= 0, got {t_end}")));
    }
    let samples = (t_end / sample_dt - 1e-9).ceil().max(0.0) as usize;
    run(l, rho0, sample_dt, integrator, dt, |_, k, _| k >= samples, None)
}

/// Integrates until `||L vec(rho)|| < tol`, then for another 20% of the
/// elapsed time. Fails if `max_time` is reached first.
pub fn evolve_until_converged(
    l: &Liouvillian,
    rho0: &ComplexMatrix,
    tol: f64,
    sample_dt: f64,
    max_time: f64,
    integrator: Integrator,
    dt: Option<f64>,
) -> Result<Trajectory> {
    let max_samples = (max_time / sample_dt).ceil() as usize;
    let mut stop_at: Option<usize> = None;
    let traj = run(
        l,
        rho0,
        sample_dt,
        integrator,
        dt,
        |res, k, _| {
            if stop_at.is_none() && res < tol {
                stop_at = Some(k + (k as f64 * 0.2).ceil() as usize);
            }
            stop_at.is_some_and(|s| k >= s) || k >= max_samples
        },
        Some(tol),
    )?;
    if traj.converged_at.is_none() {
        return Err(Error::Numerical(format!(
            "no convergence to ||L rho|| < {tol:e} within {max_time} us (last residual {:.3e})",
            traj.residuals.last().copied().unwrap_or(f64::NAN)
        )));
    }
    Ok(traj)
}

fn run(
    l: &Liouvillian,
    rho0: &ComplexMatrix,
    sample_dt: f64,
    integrator: Integrator,
    dt: Option<f64>,
    mut done: impl FnMut(f64, usize, f64) -> bool,
    tol: Option<f64>,
) -> Result<Trajectory> {
    l.check_state(rho0)?;
    let mut stepper = Stepper::new(l, sample_dt, integrator, dt)?;
    let mut y = vectorize(rho0);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        residuals: Vec::new(),
        converged_at: None,
    };
    let mut k = 0usize;
    loop {
        let t = k as f64 * sample_dt;
        let res = vec_norm(&l.apply_vec(&y)?);
        if !res.is_finite() {
            return Err(Error::Numerical(format!("state diverged at t = {t} us")));
        }
        if let (Some(tol), None) = (tol, traj.converged_at) {
            if res < tol {
                traj.converged_at = Some(t);
            }
        }
        traj.times.push(t);
        traj.states.push(unvectorize(&y, l.dim())?);
        traj.residuals.push(res);
        if done(res, k, t) {
            break;
        }
        stepper.advance(&mut y);
        k += 1;
    }
    Ok(traj)
}

/// Evidence about the stationary subspace of a Liouvillian.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateCertificate {
    /// Eigenvalues with `|lambda| < 1e-10 ||L||_1`.
    pub null_count: usize,
    /// Smallest `|Re lambda|` among the remaining eigenvalues.
    pub spectral_gap: f64,
    pub liouvillian_norm: f64,
    /// `||L vec(rho_ss)||` of the returned state.
    pub residual: f64,
    /// Negative eigenvalue weight removed from the solution.
    pub clipped_weight: f64,
}

/// Relative threshold for counting an eigenvalue as zero.
pub const NULL_TOLERANCE: f64 = 1e-10;

/// Unique steady state of `l` with its certificate.
///
/// Returns `Error::NonUniqueSteadyState` with a basis of the stationary
/// subspace when more than one eigenvalue is numerically zero.
pub fn steady_state(l: &Liouvillian) -> Result<(ComplexMatrix, SteadyStateCertificate)> {
    let d = l.dim();
    let eig = eig_full(l.matrix())?;
    let threshold = NULL_TOLERANCE * l.norm();
    let null: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k].norm() < threshold)
        .collect();
    let spectral_gap = eig
        .values
        .iter()
        .filter(|v| v.norm() >= threshold)
        .map(|v| v.re.abs())
        .fold(f64::INFINITY, f64::min);
    let mut cert = SteadyStateCertificate {
        null_count: null.len(),
        spectral_gap,
        liouvillian_norm: l.norm(),
        residual: f64::NAN,
        clipped_weight: 0.0,
    };
    if null.is_empty() {
        return Err(Error::Numerical("Liouvillian has no zero eigenvalue".into()));
    }
    if null.len() > 1 {
        let basis = null
            .iter()
            .map(|&k| unvectorize(&eig.vector(k), d))
            .collect::<Result<Vec<_>>>()?;
        return Err(Error::NonUniqueSteadyState { basis, certificate: cert });
    }

    // Replace the first equation by Tr(rho) = 1.
    let n = d * d;
    let mut a = l.matrix().clone();
    for c in 0..n {
        a[(0, c)] = if c % (d + 1) == 0 { ONE } else { ZERO };
    }
    let mut b = ComplexMatrix::zeros(n, 1);
    b[(0, 0)] = ONE;
    let x = solve(&a, &b)?;
    let rho = unvectorize(x.as_slice(), d)?.hermitian_part();

    let (rho, clipped) = clip_negative(&rho)?;
    if clipped > 1e-8 {
        return Err(Error::Numerical(format!(
            "steady state has negative eigenvalue weight {clipped:.3e}"
        )));
    }
    cert.clipped_weight = clipped;
    cert.residual = l.residual(&rho)?;
    Ok((rho, cert))
}

/// Removes eigenvalues below -1e-10 and renormalizes the trace.
fn clip_negative(rho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let eig = eigh(rho)?;
    let clipped: f64 = eig.values.iter().filter(|v| **v < -1e-10).map(|v| -v).sum();
    let out = if clipped > 0.0 {
        let d = rho.rows();
        let mut m = ComplexMatrix::zeros(d, d);
        for (k, &v) in eig.values.iter().enumerate() {
            if v < -1e-10 {
                continue;
            }
            let col: Vec<C64> = (0..d).map(|r| eig.vectors[(r, k)]).collect();
            m += &ComplexMatrix::projector(&col).scale_real(v);
        }
        m
    } else {
        rho.clone()
    };
    let tr = out.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Numerical(format!("steady state trace {tr}")));
    }
    Ok((out.scale_real(1.0 / tr), clipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_decay(gamma: f64) -> (ComplexMatrix, Vec<ComplexMatrix>) {
        let h = ComplexMatrix::zeros(2, 2);
        let mut c = ComplexMatrix::zeros(2, 2);
        c[(0, 1)] = C64::new(gamma.sqrt(), 0.0);
        (h, vec![c])
    }

    #[test]
    fn superoperator_matches_direct_form() {
        let h = random_matrix(5, 1).hermitian_part();
        let cs = vec![random_matrix(5, 2), random_matrix(5, 3).scale_real(0.3)];
        let l = build_liouvillian(&h, &cs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density_matrix(5, &mut rng);
        let via_l = l.apply(&rho).unwrap();
        let direct = lindblad_rhs(&h, &cs, &rho).unwrap();
        assert!((&via_l - &direct).norm_max() < 1e-12);
    }

    #[test]
    fn trace_row_vanishes() {
        // Tr(L rho) = 0 for all rho  <=>  vec(I)^dag L = 0
        let h = random_matrix(4, 7).hermitian_part();
        let cs = vec![random_matrix(4, 8)];
        let l = build_liouvillian(&h, &cs).unwrap();
        let m = l.matrix();
        for c in 0..16 {
            let s: C64 = (0..4).map(|i| m[(i * 5, c)]).sum();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_matches_exponential() {
        let gamma = 0.7;
        let (h, cs) = qubit_decay(gamma);
        let l = build_liouvillian(&h, &cs).unwrap();
        let rho0 = ComplexMatrix::real_diag(&[0.0, 1.0]);
        let fine = Some(0.01 / l.norm());
        for (integrator, dt) in [(Integrator::Rk4, fine), (Integrator::Propagator, None)] {
            let traj = evolve(&l, &rho0, 3.0, 0.5, integrator, dt).unwrap();
            assert_eq!(traj.times.len(), 7);
            for (t, rho) in traj.times.iter().zip(&traj.states) {
                assert!((rho[(1, 1)].re - (-gamma * t).exp()).abs() < 1e-8, "{integrator} t={t}");
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected_with_suggestion() {
        let (h, cs) = qubit_decay(10.0);
        let l = build_liouvillian(&h, &cs).unwrap();
        let rho0 = ComplexMatrix::real_diag(&[0.0, 1.0]);
        match evolve(&l, &rho0, 1.0, 0.1, Integrator::Rk4, Some(0.05)) {
            Err(Error::StepSize { suggested, norm, .. }) => {
                assert!((suggested * norm - 0.1).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn steady_state_of_decay_is_ground() {
        let (h, cs) = qubit_decay(1.0);
        let l = build_liouvillian(&h, &cs).unwrap();
        let (rho, cert) = steady_state(&l).unwrap();
        assert_eq!(cert.null_count, 1);
        assert!((cert.spectral_gap - 0.5).abs() < 1e-10);
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_dephasing_is_not_unique() {
        let mut z = ComplexMatrix::real_diag(&[1.0, -1.0]);
        z = z.scale_real(0.5);
        let l = build_liouvillian(&ComplexMatrix::zeros(2, 2), &[z]).unwrap();
        match steady_state(&l) {
            Err(Error::NonUniqueSteadyState { basis, certificate }) => {
                assert_eq!(certificate.null_count, 2);
                assert_eq!(basis.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn convergence_stops_after_padding() {
        let (h, cs) = qubit_decay(2.0);
        let l = build_liouvillian(&h, &cs).unwrap();
        let rho0 = ComplexMatrix::real_diag(&[0.0, 1.0]);
        let traj = evolve_until_converged(&l, &rho0, 1e-6, 0.1, 100.0, Integrator::Propagator, None).unwrap();
        let tc = traj.converged_at.unwrap();
        assert!(traj.final_time() >= 1.2 * tc - 1e-9);
        assert!(traj.final_time() <= 1.2 * tc + 0.2);
        let err = evolve_until_converged(&l, &rho0, 1e-6, 0.1, 1.0, Integrator::Propagator, None);
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn unitary_superoperator_conjugates() {
        let u = expm(&random_matrix(3, 9).hermitian_part().scale(-I), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(3, &mut rng);
        let s = unitary_superoperator(&u).unwrap();
        let got = unvectorize(&s.matvec(&vectorize(&rho)).unwrap(), 3).unwrap();
        let want = &(&u * &rho) * &u.adjoint();
        assert!((&got - &want).norm_max() < 1e-14);
    }

    #[test]
    fn random_density_matrices_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let rho = random_density_matrix(6, &mut rng);
            let p = physicality(&rho).unwrap();
            assert!(p.trace_error < 1e-14 && p.hermiticity_error == 0.0 && p.min_eigenvalue > -1e-14);
            assert!(purity(&rho) <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn fidelity_rejects_non_hermitian_input() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        let psi = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        assert!(fidelity(&m, &psi).is_err());
    }
}
