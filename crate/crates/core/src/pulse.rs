//! Stroboscopic pulsed protocol: optical pumping, fast electron rotations,
//! hyperfine free evolution and slow nuclear rotations under dynamical
//! decoupling.
//!
//! Each segment is compiled into a superoperator once, so a run costs one
//! dense matrix-vector product per cycle.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::{build_liouvillian, fidelity, purity, unitary_superoperator};
use crate::error::{Error, Result};
use crate::linalg::{basis, unvectorize, vectorize, ComplexMatrix, C64, I};
use crate::model::{
    self, build_operators, decay_ops, dephasing_op, hamiltonian_from_ops, Operators, SystemParams, Terms,
    Variant, TWO_PI,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Axis {
    X,
    #[default]
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(Error::config(format!("unknown rotation axis `{other}` (x|y)"))),
        }
    }
}

/// One control segment. Durations in microseconds, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSegment {
    /// Optical excitation and decay only.
    OpticalPump { duration: f64 },
    /// Instantaneous rotation on `{|0>_e, |D>_e}`; `duration` is wall-clock
    /// bookkeeping.
    ElectronRotation { angle: f64, axis: Axis, duration: f64 },
    /// Hyperfine coupling only, plus electron dephasing when enabled.
    FreeEvolution { duration: f64 },
    /// Instantaneous rotation on `{|0>_n, |D>_n}` by `angle - eps(dd_interval)`
    /// with the electron decoupled.
    NuclearRotation {
        angle: f64,
        axis: Axis,
        dd_interval: f64,
        duration: f64,
    },
    /// Decay and dephasing with all coherent terms off.
    Idle { duration: f64 },
}

impl PulseSegment {
    pub fn duration(&self) -> f64 {
        match *self {
            PulseSegment::OpticalPump { duration }
            | PulseSegment::ElectronRotation { duration, .. }
            | PulseSegment::FreeEvolution { duration }
            | PulseSegment::NuclearRotation { duration, .. }
            | PulseSegment::Idle { duration } => duration,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.duration();
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::config(format!("segment duration must be >= 0, got {d}")));
        }
        match *self {
            PulseSegment::ElectronRotation { angle, .. } if !angle.is_finite() => {
                Err(Error::config("rotation angle must be finite"))
            }
            PulseSegment::NuclearRotation { angle, dd_interval, .. } => {
                if !angle.is_finite() {
                    Err(Error::config("rotation angle must be finite"))
                } else if !(dd_interval.is_finite() && dd_interval >= 0.0) {
                    Err(Error::config(format!("DD interval must be >= 0, got {dd_interval}")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Electron dephasing treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Lindblad channel `sqrt(1/(2 T2*)) S_z`.
    #[default]
    Markovian,
    /// Static Gaussian detuning `delta S_z / 2`, `sigma = sqrt2 / T2*`,
    /// averaged over seeded realizations.
    QuasiStatic { realizations: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub cycles: usize,
    /// Match the electron rotation angle to the degraded nuclear angle.
    pub correction: bool,
    /// DD also removes dephasing during nuclear rotations.
    pub dd_filters_t2: bool,
    pub noise: NoiseModel,
}

pub const PUMP_DURATION: f64 = 0.1;
pub const ELECTRON_PULSE_DURATION: f64 = 0.01;
pub const NUCLEAR_PULSE_DURATION: f64 = 10.0;

impl PulseSequence {
    /// Pump, electron pi/2, nuclear pi/2 under DD with interval `tau`, then
    /// free evolution for `pi / (2 * 2 pi g)`.
    pub fn standard(p: &SystemParams, tau: f64, cycles: usize, correction: bool) -> Result<Self> {
        if !(p.g.is_finite() && p.g > 0.0) {
            return Err(Error::config("pulsed protocol needs g > 0 for the free-evolution time"));
        }
        let seq = Self {
            segments: vec![
                PulseSegment::OpticalPump { duration: PUMP_DURATION },
                PulseSegment::ElectronRotation {
                    angle: FRAC_PI_2,
                    axis: Axis::Y,
                    duration: ELECTRON_PULSE_DURATION,
                },
                PulseSegment::NuclearRotation {
                    angle: FRAC_PI_2,
                    axis: Axis::Y,
                    dd_interval: tau,
                    duration: NUCLEAR_PULSE_DURATION,
                },
                PulseSegment::FreeEvolution {
                    duration: free_evolution_time(p.g),
                },
            ],
            cycles,
            correction,
            dd_filters_t2: true,
            noise: NoiseModel::Markovian,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        for seg in &mut self.segments {
            match seg {
                PulseSegment::ElectronRotation { axis: a, .. } | PulseSegment::NuclearRotation { axis: a, .. } => {
                    *a = axis
                }
                _ => {}
            }
        }
        self
    }

    pub fn cycle_duration(&self) -> f64 {
        self.segments.iter().map(PulseSegment::duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for seg in &self.segments {
            seg.validate()?;
        }
        if self.correction {
            let nuclear = self
                .segments
                .iter()
                .filter(|s| matches!(s, PulseSegment::NuclearRotation { .. }))
                .count();
            if nuclear != 1 {
                return Err(Error::config(format!(
                    "correction needs exactly one nuclear rotation per cycle, found {nuclear}"
                )));
            }
        }
        if let NoiseModel::QuasiStatic { realizations: 0, .. } = self.noise {
            return Err(Error::config("quasi-static noise needs at least one realization"));
        }
        Ok(())
    }
}

/// `pi / (2 g~)` with `g~ = 2 pi g`.
pub fn free_evolution_time(g: f64) -> f64 {
    1.0 / (4.0 * g)
}

/// Nuclear Rabi amplitude (MHz) whose `{0_n, D_n}` pi/2 rotation takes
/// `duration` microseconds.
pub fn nuclear_rabi_for_duration(duration: f64) -> f64 {
    1.0 / (8.0 * std::f64::consts::SQRT_2 * duration)
}

/// Rotation-angle error left by dynamical decoupling with pulse interval
/// `tau` (us): `sin(g~^2 tau / sqrt(g~^2 + Omega_n~^2))`, `g` and `omega_n`
/// in MHz.
pub fn dd_error(g: f64, omega_n: f64, tau: f64) -> Result<f64> {
    if !(g >= 0.0 && omega_n >= 0.0 && g.is_finite() && omega_n.is_finite()) {
        return Err(Error::Domain(format!("g and omega_n must be finite and >= 0, got {g}, {omega_n}")));
    }
    if g == 0.0 && omega_n == 0.0 {
        return Err(Error::Domain("g and omega_n are both zero".into()));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
    }
    let gt = TWO_PI * g;
    let ot = TWO_PI * omega_n;
    Ok((gt * gt * tau / gt.hypot(ot)).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Party {
    Electron,
    Nucleus,
}

fn parse_label(label: &str) -> Result<(Party, Vec<C64>)> {
    let bad = || Error::config(format!("invalid level label `{label}`"));
    let (party, level) = label.split_once(':').ok_or_else(bad)?;
    match party {
        "e" => {
            let v = match level {
                "+1" => basis(model::ELECTRON_DIM, model::E_PLUS),
                "-1" => basis(model::ELECTRON_DIM, model::E_MINUS),
                "0" => basis(model::ELECTRON_DIM, model::E_ZERO),
                "A1" => basis(model::ELECTRON_DIM, model::E_A1),
                "D" => model::electron::dark(),
                "B" => model::electron::bright(),
                _ => return Err(bad()),
            };
            Ok((Party::Electron, v))
        }
        "n" => {
            let v = match level {
                "+1" => basis(3, model::N_PLUS),
                "-1" => basis(3, model::N_MINUS),
                "0" => model::nucleus::zero(),
                "D" => model::nucleus::dark(),
                "B" => model::nucleus::bright(),
                _ => return Err(bad()),
            };
            Ok((Party::Nucleus, v))
        }
        _ => Err(bad()),
    }
}

/// `exp(-i angle/2 sigma_axis)` on `span{|a>, |b>}`, identity elsewhere, on
/// the full single-nucleus space.
///
/// Labels are `e:+1 e:-1 e:0 e:A1 e:D e:B` for the electron and
/// `n:+1 n:-1 n:0 n:D n:B` for the spin-1 nucleus. Within the subspace
/// `sigma_x = |a><b| + |b><a|` and `sigma_y = -i|a><b| + i|b><a|`.
pub fn subspace_rotation(a: &str, b: &str, angle: f64, axis: Axis) -> Result<ComplexMatrix> {
    let (pa, va) = parse_label(a)?;
    let (pb, vb) = parse_label(b)?;
    if pa != pb {
        return Err(Error::config(format!("`{a}` and `{b}` belong to different spins")));
    }
    if crate::linalg::inner(&va, &vb).norm() > 1e-12 {
        return Err(Error::config(format!("`{a}` and `{b}` are not orthogonal levels")));
    }
    if !angle.is_finite() {
        return Err(Error::config("rotation angle must be finite"));
    }
    let local = two_level_rotation(&va, &vb, angle, axis);
    let layout = Variant::SingleNucleus.layout();
    let factor = match pa {
        Party::Electron => 0,
        Party::Nucleus => 1,
    };
    layout.embed(&local, factor)
}

fn two_level_rotation(a: &[C64], b: &[C64], angle: f64, axis: Axis) -> ComplexMatrix {
    let n = a.len();
    let proj = &ComplexMatrix::outer(a, a) + &ComplexMatrix::outer(b, b);
    let ab = ComplexMatrix::outer(a, b);
    let ba = ComplexMatrix::outer(b, a);
    let sigma = match axis {
        Axis::X => &ab + &ba,
        Axis::Y => &ab.scale(-I) + &ba.scale(I),
    };
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let mut u = &ComplexMatrix::identity(n) - &proj;
    u += &proj.scale_real(c);
    u += &sigma.scale(C64::new(0.0, -s));
    u
}

/// What the segment compiler needs beyond the segment itself.
#[derive(Debug, Clone, Copy)]
struct NoiseContext {
    dd_filters_t2: bool,
    /// Markovian dephasing channel active.
    markovian: bool,
    /// Quasi-static detuning in rad/us.
    detuning: f64,
}

struct Compiler<'a> {
    p: &'a SystemParams,
    ops: Operators,
    ctx: NoiseContext,
}

impl<'a> Compiler<'a> {
    fn new(p: &'a SystemParams, ctx: NoiseContext) -> Result<Self> {
        p.validate()?;
        if p.variant != Variant::SingleNucleus {
            return Err(Error::config("the pulsed protocol is defined for the single-nucleus variant"));
        }
        Ok(Self {
            p,
            ops: build_operators(p.variant),
            ctx,
        })
    }

    fn noise_generator(&self, h: &mut ComplexMatrix, cs: &mut Vec<ComplexMatrix>) {
        if self.ctx.markovian {
            if let Some(c) = dephasing_op(self.p, &self.ops) {
                cs.push(c);
            }
        }
        if self.ctx.detuning != 0.0 {
            *h += &self.ops.sz.scale_real(0.5 * self.ctx.detuning);
        }
    }

    fn lindblad_map(&self, h: &ComplexMatrix, cs: &[ComplexMatrix], t: f64) -> Result<ComplexMatrix> {
        if t == 0.0 {
            return Ok(ComplexMatrix::identity(h.rows() * h.rows()));
        }
        let l = build_liouvillian(h, cs)?;
        l.propagator(t)
    }

    fn nuclear_angle(&self, angle: f64, tau: f64) -> Result<f64> {
        Ok(angle - dd_error(self.p.g, self.p.omega_n, tau)?)
    }

    fn compile(&self, seg: &PulseSegment) -> Result<ComplexMatrix> {
        seg.validate()?;
        let d = self.ops.layout.total_dim();
        match *seg {
            PulseSegment::OpticalPump { duration } => {
                let h = hamiltonian_from_ops(self.p, &self.ops, Terms::OPTICAL_ONLY)?;
                self.lindblad_map(&h, &decay_ops(self.p, &self.ops), duration)
            }
            PulseSegment::ElectronRotation { angle, axis, .. } => {
                unitary_superoperator(&subspace_rotation("e:0", "e:D", angle, axis)?)
            }
            PulseSegment::FreeEvolution { duration } => {
                let mut h = hamiltonian_from_ops(self.p, &self.ops, Terms::HYPERFINE_ONLY)?;
                let mut cs = Vec::new();
                self.noise_generator(&mut h, &mut cs);
                self.lindblad_map(&h, &cs, duration)
            }
            PulseSegment::NuclearRotation {
                angle,
                axis,
                dd_interval,
                duration,
            } => {
                let actual = self.nuclear_angle(angle, dd_interval)?;
                let rot = unitary_superoperator(&subspace_rotation("n:0", "n:D", actual, axis)?)?;
                if self.ctx.dd_filters_t2 {
                    return Ok(rot);
                }
                let mut h = ComplexMatrix::zeros(d, d);
                let mut cs = Vec::new();
                self.noise_generator(&mut h, &mut cs);
                Ok(&self.lindblad_map(&h, &cs, duration)? * &rot)
            }
            PulseSegment::Idle { duration } => {
                let mut h = ComplexMatrix::zeros(d, d);
                let mut cs = decay_ops(self.p, &self.ops);
                self.noise_generator(&mut h, &mut cs);
                self.lindblad_map(&h, &cs, duration)
            }
        }
    }

    /// Superoperator of one full cycle, first segment applied first.
    fn cycle(&self, seq: &PulseSequence) -> Result<ComplexMatrix> {
        let segments = resolved_segments(seq, self.p)?;
        let n = self.ops.layout.total_dim().pow(2);
        let mut total = ComplexMatrix::identity(n);
        for seg in &segments {
            total = &self.compile(seg)? * &total;
        }
        Ok(total)
    }
}

/// Segments with the correction applied: every electron rotation takes the
/// degraded nuclear angle of the cycle.
fn resolved_segments(seq: &PulseSequence, p: &SystemParams) -> Result<Vec<PulseSegment>> {
    seq.validate()?;
    if !seq.correction {
        return Ok(seq.segments.clone());
    }
    let actual = seq
        .segments
        .iter()
        .find_map(|s| match *s {
            PulseSegment::NuclearRotation { angle, dd_interval, .. } => Some((angle, dd_interval)),
            _ => None,
        })
        .map(|(angle, tau)| dd_error(p.g, p.omega_n, tau).map(|e| angle - e))
        .transpose()?
        .ok_or_else(|| Error::config("correction needs a nuclear rotation"))?;
    Ok(seq
        .segments
        .iter()
        .map(|s| match *s {
            PulseSegment::ElectronRotation { axis, duration, .. } => PulseSegment::ElectronRotation {
                angle: actual,
                axis,
                duration,
            },
            other => other,
        })
        .collect())
}

/// Applies one segment with Markovian noise and DD filtering on.
pub fn apply_segment(rho: &ComplexMatrix, seg: &PulseSegment, p: &SystemParams) -> Result<ComplexMatrix> {
    let compiler = Compiler::new(
        p,
        NoiseContext {
            dd_filters_t2: true,
            markovian: true,
            detuning: 0.0,
        },
    )?;
    let d = compiler.ops.layout.total_dim();
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::Dimension(format!("state is {}x{}, model has d = {d}", rho.rows(), rho.cols())));
    }
    let s = compiler.compile(seg)?;
    unvectorize(&s.matvec(&vectorize(rho))?, d)
}

/// One sample per cycle; index 0 is the initial state.
#[derive(Debug, Clone)]
pub struct PulseTrajectory {
    pub cycles: Vec<usize>,
    /// Wall-clock time in microseconds.
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub purity: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
}

impl PulseTrajectory {
    pub fn max_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest fidelity reached within `wall_clock` microseconds.
    pub fn max_fidelity_within(&self, wall_clock: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.fidelity)
            .filter(|(t, _)| **t <= wall_clock)
            .map(|(_, f)| *f)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn iterate(cycle: &ComplexMatrix, rho0: &[C64], n: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho0.to_vec());
    for k in 0..n {
        let next = cycle.matvec(&out[k]).expect("cycle map matches state size");
        out.push(next);
    }
    out
}

/// Runs `seq.cycles` cycles from `rho0`.
pub fn run_sequence(rho0: &ComplexMatrix, seq: &PulseSequence, p: &SystemParams) -> Result<PulseTrajectory> {
    let d = p.dim();
    if rho0.rows() != d || rho0.cols() != d {
        return Err(Error::Dimension(format!("state is {}x{}, model has d = {d}", rho0.rows(), rho0.cols())));
    }
    seq.validate()?;
    let v0 = vectorize(rho0);
    let vecs = match (seq.noise, p.t2_star) {
        (NoiseModel::QuasiStatic { realizations, seed }, Some(t2)) => {
            let sigma = std::f64::consts::SQRT_2 / t2;
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let detunings: Vec<f64> = (0..realizations).map(|_| normal.sample(&mut rng)).collect();
            let runs = map_ordered(&detunings, |&delta| {
                let ctx = NoiseContext {
                    dd_filters_t2: seq.dd_filters_t2,
                    markovian: false,
                    detuning: delta,
                };
                let cycle = Compiler::new(p, ctx)?.cycle(seq)?;
                Ok(iterate(&cycle, &v0, seq.cycles))
            })?;
            average(runs)
        }
        _ => {
            let ctx = NoiseContext {
                dd_filters_t2: seq.dd_filters_t2,
                markovian: true,
                detuning: 0.0,
            };
            let cycle = Compiler::new(p, ctx)?.cycle(seq)?;
            iterate(&cycle, &v0, seq.cycles)
        }
    };
    let psi = model::target_states(p.variant).target;
    let period = seq.cycle_duration();
    let mut traj = PulseTrajectory {
        cycles: Vec::with_capacity(vecs.len()),
        times: Vec::with_capacity(vecs.len()),
        fidelity: Vec::with_capacity(vecs.len()),
        purity: Vec::with_capacity(vecs.len()),
        states: Vec::with_capacity(vecs.len()),
    };
    for (k, v) in vecs.iter().enumerate() {
        let rho = unvectorize(v, d)?;
        if !rho.is_finite() {
            return Err(Error::Numerical(format!("non-finite state after cycle {k}")));
        }
        traj.cycles.push(k);
        traj.times.push(k as f64 * period);
        traj.fidelity.push(fidelity(&rho, &psi)?);
        traj.purity.push(purity(&rho));
        traj.states.push(rho);
    }
    Ok(traj)
}

fn average(runs: Vec<Vec<Vec<C64>>>) -> Vec<Vec<C64>> {
    let m = runs.len() as f64;
    let mut iter = runs.into_iter();
    let mut acc = iter.next().expect("at least one realization");
    for run in iter {
        for (a, b) in acc.iter_mut().zip(run) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    for v in &mut acc {
        for x in v.iter_mut() {
            *x /= m;
        }
    }
    acc
}

#[cfg(feature = "parallel")]
pub(crate) fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_ordered<T, U>(items: &[T], f: impl Fn(&T) -> Result<U>) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}

/// Maximal cycle fidelity for each `T2*` (us).
pub fn t2star_sweep(p: &SystemParams, seq: &PulseSequence, t2_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let rho0 = model::fully_mixed_ground(p.variant);
    map_ordered(t2_values, |&t2| {
        let q = SystemParams {
            t2_star: Some(t2),
            ..p.clone()
        };
        q.validate()?;
        Ok((t2, run_sequence(&rho0, seq, &q)?.max_fidelity()))
    })
}

/// Electron-level populations `(+1, -1, 0, A1)` of a single-nucleus or
/// two-nuclei state.
pub fn electron_populations(rho: &ComplexMatrix) -> [f64; 4] {
    let nuclear = rho.rows() / model::ELECTRON_DIM;
    let mut out = [0.0; 4];
    for (e, o) in out.iter_mut().enumerate() {
        *o = (0..nuclear).map(|k| rho[(e * nuclear + k, e * nuclear + k)].re).sum();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::physicality;
    use crate::linalg::{kron, kron_vec};

    fn pulsed() -> SystemParams {
        SystemParams::pulsed()
    }

    #[test]
    fn dd_error_reference_values() {
        assert_eq!(dd_error(2.0, 1.0, 0.0).unwrap(), 0.0);
        // evaluated independently: sin((2 pi 2.5)^2 0.02 / hypot(2 pi 2.5, 2 pi 0.05))
        let e = dd_error(2.5, 0.05, 0.02).unwrap();
        assert!((e - 0.308957255043102).abs() < 1e-14, "{e}");
        let e = dd_error(2.0, nuclear_rabi_for_duration(10.0), 0.01).unwrap();
        assert!((e - 0.125332016074131).abs() < 1e-14, "{e}");
    }

    #[test]
    fn dd_error_domain() {
        assert!(matches!(dd_error(0.0, 0.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(dd_error(1.0, 0.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn dd_error_shrinks_with_strong_nuclear_drive() {
        let mut last = f64::INFINITY;
        for on in [1.0, 10.0, 100.0, 1000.0] {
            let e = dd_error(0.1, on, 0.01).unwrap();
            assert!(e < last);
            last = e;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn rotation_edge_cases() {
        let id = subspace_rotation("e:0", "e:D", 0.0, Axis::Y).unwrap();
        assert!((&id - &ComplexMatrix::identity(12)).norm_max() < 1e-15);

        let full = subspace_rotation("e:0", "e:D", 2.0 * std::f64::consts::PI, Axis::X).unwrap();
        let zero = kron_vec(&model::electron::zero(), &model::nucleus::zero());
        let out = full.matvec(&zero).unwrap();
        assert!(out.iter().zip(&zero).all(|(a, b)| (a + b).norm() < 1e-15));
        let bright = kron_vec(&model::electron::bright(), &model::nucleus::zero());
        let out = full.matvec(&bright).unwrap();
        assert!(out.iter().zip(&bright).all(|(a, b)| (a - b).norm() < 1e-15));

        let swap = subspace_rotation("e:0", "e:D", std::f64::consts::PI, Axis::X).unwrap();
        let out = swap.matvec(&zero).unwrap();
        let dark = kron_vec(&model::electron::dark(), &model::nucleus::zero());
        assert!(out.iter().zip(&dark).all(|(a, b)| (a - (-I) * b).norm() < 1e-15));
    }

    #[test]
    fn rotations_are_unitary_and_invert() {
        for (a, b) in [("e:0", "e:D"), ("n:0", "n:D"), ("e:+1", "e:A1"), ("n:B", "n:D")] {
            for axis in [Axis::X, Axis::Y] {
                let u = subspace_rotation(a, b, 1.234, axis).unwrap();
                let back = subspace_rotation(a, b, -1.234, axis).unwrap();
                let id = ComplexMatrix::identity(12);
                assert!((&(&u.adjoint() * &u) - &id).norm_max() < 1e-12);
                assert!((&(&back * &u) - &id).norm_max() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_labels_are_config_errors() {
        for (a, b) in [("e:0", "n:D"), ("e:0", "e:0"), ("e:+1", "e:D"), ("x:0", "e:D"), ("e:7", "e:0"), ("n:A1", "n:0")] {
            assert!(matches!(subspace_rotation(a, b, 1.0, Axis::Y), Err(Error::Config { .. })), "{a} {b}");
        }
    }

    #[test]
    fn pump_leaves_dark_population_alone() {
        let p = pulsed();
        let rho = ComplexMatrix::projector(&model::target_states(Variant::SingleNucleus).target);
        let out = apply_segment(&rho, &PulseSegment::OpticalPump { duration: 0.1 }, &p).unwrap();
        assert!((&out - &rho).norm_max() < 1e-12);
    }

    #[test]
    fn long_pump_drains_excited_level() {
        let p = pulsed();
        let b = ComplexMatrix::projector(&model::electron::bright());
        let rho = kron(&b, &ComplexMatrix::identity(3).scale_real(1.0 / 3.0)).unwrap();
        let out = apply_segment(&rho, &PulseSegment::OpticalPump { duration: 2.0 }, &p).unwrap();
        let pops = electron_populations(&out);
        assert!(pops[3] < 1e-6, "{pops:?}");
        assert!((out.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_nuclear_rotation_without_dd_error() {
        let p = pulsed();
        let seg = PulseSegment::NuclearRotation {
            angle: FRAC_PI_2,
            axis: Axis::Y,
            dd_interval: 0.0,
            duration: 10.0,
        };
        let rho = ComplexMatrix::projector(&kron_vec(&model::electron::zero(), &model::nucleus::zero()));
        let out = apply_segment(&rho, &seg, &p).unwrap();
        let u = subspace_rotation("n:0", "n:D", FRAC_PI_2, Axis::Y).unwrap();
        let want = &(&u * &rho) * &u.adjoint();
        assert!((&out - &want).norm_max() < 1e-15);
    }

    #[test]
    fn segments_are_cptp() {
        let p = SystemParams {
            t2_star: Some(5.0),
            ..pulsed()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = crate::engine::random_density_matrix(12, &mut rng);
        let segs = [
            PulseSegment::OpticalPump { duration: 0.1 },
            PulseSegment::ElectronRotation {
                angle: 0.7,
                axis: Axis::X,
                duration: 0.01,
            },
            PulseSegment::FreeEvolution { duration: 0.125 },
            PulseSegment::NuclearRotation {
                angle: FRAC_PI_2,
                axis: Axis::Y,
                dd_interval: 0.01,
                duration: 10.0,
            },
            PulseSegment::Idle { duration: 1.0 },
        ];
        for seg in &segs {
            let out = apply_segment(&rho, seg, &p).unwrap();
            let ph = physicality(&out).unwrap();
            assert!(ph.trace_error < 1e-8 && ph.min_eigenvalue > -1e-8, "{seg:?} {ph:?}");
        }
    }

    #[test]
    fn zero_cycles_keeps_initial_sample() {
        let p = pulsed();
        let seq = PulseSequence::standard(&p, 0.0, 0, false).unwrap();
        let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
        let traj = run_sequence(&rho0, &seq, &p).unwrap();
        assert_eq!(traj.cycles, vec![0]);
        assert!((traj.fidelity[0] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn listed_order_with_free_evolution_between_rotations_stalls_at_half() {
        let p = pulsed();
        let mut seq = PulseSequence::standard(&p, 0.0, 300, false).unwrap();
        seq.segments.swap(2, 3);
        let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
        let traj = run_sequence(&rho0, &seq, &p).unwrap();
        assert!((traj.fidelity.last().unwrap() - 0.5).abs() < 1e-3, "{}", traj.fidelity.last().unwrap());
        assert!(traj.max_fidelity() < 0.5 + 1e-3);
    }

    #[test]
    fn standard_cycle_converges_to_target() {
        let p = pulsed();
        let seq = PulseSequence::standard(&p, 0.0, 200, false).unwrap();
        let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
        let traj = run_sequence(&rho0, &seq, &p).unwrap();
        assert!(*traj.fidelity.last().unwrap() > 0.999);
        assert!((seq.cycle_duration() - 10.235).abs() < 1e-12);
    }

    #[test]
    fn correction_rewrites_electron_angle() {
        let p = pulsed();
        let seq = PulseSequence::standard(&p, 0.01, 1, true).unwrap();
        let segs = resolved_segments(&seq, &p).unwrap();
        let eps = dd_error(p.g, p.omega_n, 0.01).unwrap();
        match segs[1] {
            PulseSegment::ElectronRotation { angle, .. } => assert!((angle - (FRAC_PI_2 - eps)).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quasi_static_noise_is_seeded() {
        let p = SystemParams {
            t2_star: Some(10.0),
            ..pulsed()
        };
        let mut seq = PulseSequence::standard(&p, 0.0, 20, false).unwrap();
        seq.noise = NoiseModel::QuasiStatic { realizations: 8, seed: 3 };
        let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
        let a = run_sequence(&rho0, &seq, &p).unwrap();
        let b = run_sequence(&rho0, &seq, &p).unwrap();
        assert_eq!(a.fidelity, b.fidelity);
        seq.noise = NoiseModel::QuasiStatic { realizations: 8, seed: 4 };
        let c = run_sequence(&rho0, &seq, &p).unwrap();
        assert_ne!(a.fidelity, c.fidelity);
    }

    #[test]
    fn two_nuclei_variant_rejected() {
        let p = SystemParams {
            g: 2.0,
            ..SystemParams::two_nuclei()
        };
        let seq = PulseSequence::standard(&p, 0.0, 1, false).unwrap();
        let rho0 = model::fully_mixed_ground(Variant::TwoNuclei);
        assert!(matches!(run_sequence(&rho0, &seq, &p), Err(Error::Config { .. })));
    }
}
