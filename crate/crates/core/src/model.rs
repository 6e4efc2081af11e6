//! NV-center electron and nuclear spin model.
//!
//! Basis ordering (electron index varies slowest):
//!
//! * electron: `+1, -1, 0, A1` (the optically excited level is appended)
//! * spin-1 nitrogen nucleus: `+1, -1, 0`
//! * spin-1/2 nuclei: `0, 1`
//!
//! All user-facing frequencies and rates are in MHz; the builders convert to
//! angular units (`2*pi*f`, rad/us) so time is in microseconds.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{basis, kron_vec, normalized, ComplexMatrix, SpaceLayout, C64, I, ONE, ZERO};

pub const TWO_PI: f64 = 2.0 * PI;

pub const ELECTRON_DIM: usize = 4;
pub const E_PLUS: usize = 0;
pub const E_MINUS: usize = 1;
pub const E_ZERO: usize = 2;
pub const E_A1: usize = 3;

pub const N_PLUS: usize = 0;
pub const N_MINUS: usize = 1;
pub const N_ZERO: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Electron with the intrinsic spin-1 nitrogen nucleus (d = 12).
    SingleNucleus,
    /// Electron with two spin-1/2 nuclei (d = 16).
    TwoNuclei,
}

impl Variant {
    pub fn nucleus_count(self) -> usize {
        match self {
            Variant::SingleNucleus => 1,
            Variant::TwoNuclei => 2,
        }
    }

    pub fn nucleus_dim(self) -> usize {
        match self {
            Variant::SingleNucleus => 3,
            Variant::TwoNuclei => 2,
        }
    }

    pub fn layout(self) -> SpaceLayout {
        let mut dims = vec![ELECTRON_DIM];
        dims.extend(std::iter::repeat_n(self.nucleus_dim(), self.nucleus_count()));
        SpaceLayout::new(dims).expect("static layout")
    }

    pub fn dim(self) -> usize {
        self.layout().total_dim()
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::SingleNucleus => "single-nucleus-spin1",
            Variant::TwoNuclei => "two-nuclei-spin-half",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "single-nucleus-spin1" | "single" => Some(Variant::SingleNucleus),
            "two-nuclei-spin-half" | "two-nuclei" => Some(Variant::TwoNuclei),
            _ => None,
        }
    }

    /// Microwave drive phase that keeps the variant's target state dark.
    pub fn default_mw_phase(self) -> f64 {
        match self {
            Variant::SingleNucleus => 0.0,
            Variant::TwoNuclei => PI / 2.0,
        }
    }
}

/// Physical parameters. Frequencies in MHz, `t2_star` in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub omega_e: f64,
    pub omega_n: f64,
    pub g: f64,
    /// Signed optical couplings to `|A1>`; the default `E_+ = E, E_- = -E`
    /// leaves `(|+1> + |-1>)/sqrt2` dark.
    pub e_plus: f64,
    pub e_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_zero: f64,
    pub t2_star: Option<f64>,
    pub variant: Variant,
    /// Per-nucleus drive weights; empty means all ones.
    pub asymmetry: Vec<f64>,
    /// Also scale each nucleus's hyperfine coupling by its weight.
    pub asymmetric_hyperfine: bool,
    /// Electron drive is `omega_e (cos(phase) S_x + sin(phase) S_y)`.
    pub mw_phase: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::fig2()
    }
}

impl SystemParams {
    /// Continuous-drive parameter set: Omega_e = Omega_n = 1, g = 2.5,
    /// E = 10, gamma_pm = 30, gamma_0 = 40 (all MHz).
    pub fn fig2() -> Self {
        Self {
            omega_e: 1.0,
            omega_n: 1.0,
            g: 2.5,
            e_plus: 10.0,
            e_minus: -10.0,
            gamma_plus: 30.0,
            gamma_minus: 30.0,
            gamma_zero: 40.0,
            t2_star: None,
            variant: Variant::SingleNucleus,
            asymmetry: Vec::new(),
            asymmetric_hyperfine: false,
            mw_phase: 0.0,
        }
    }

    /// Pulsed-protocol parameter set: g = 2, E = 30 and the nuclear Rabi
    /// amplitude of a 10 us pi/2 pulse.
    pub fn pulsed() -> Self {
        let omega_n = crate::pulse::nuclear_rabi_for_duration(crate::pulse::NUCLEAR_PULSE_DURATION);
        Self {
            omega_e: omega_n,
            omega_n,
            g: 2.0,
            ..Self::fig2().with_optical(30.0)
        }
    }

    pub fn two_nuclei() -> Self {
        Self {
            variant: Variant::TwoNuclei,
            mw_phase: Variant::TwoNuclei.default_mw_phase(),
            ..Self::fig2()
        }
    }

    /// Sets `E_+ = e` and `E_- = -e`.
    pub fn with_optical(mut self, e: f64) -> Self {
        self.e_plus = e;
        self.e_minus = -e;
        self
    }

    /// Sets `Omega_e = Omega_n = omega`.
    pub fn with_drive(mut self, omega: f64) -> Self {
        self.omega_e = omega;
        self.omega_n = omega;
        self
    }

    pub fn dim(&self) -> usize {
        self.variant.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("omega_e", self.omega_e),
            ("omega_n", self.omega_n),
            ("g", self.g),
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
            ("gamma_zero", self.gamma_zero),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config {
                    line: None,
                    key: Some(name.into()),
                    message: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        for (name, v) in [("e_plus", self.e_plus), ("e_minus", self.e_minus), ("mw_phase", self.mw_phase)] {
            if !v.is_finite() {
                return Err(Error::Config {
                    line: None,
                    key: Some(name.into()),
                    message: format!("must be finite, got {v}"),
                });
            }
        }
        if let Some(t2) = self.t2_star {
            if !(t2.is_finite() && t2 > 0.0) {
                return Err(Error::Config {
                    line: None,
                    key: Some("t2_star".into()),
                    message: format!("must be > 0, got {t2}"),
                });
            }
        }
        drive_weights(self).map(|_| ())
    }
}

/// Unit-mean per-nucleus weights `(drive, hyperfine)` derived from
/// `p.asymmetry`.
///
/// The weights redistribute a fixed collective drive among the nuclei, so
/// the symmetric combination still sees `Omega_n` and the target state stays
/// dark while exchange symmetry is broken.
pub fn apply_asymmetry(p: &SystemParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let drive = drive_weights(p)?;
    let hyperfine = if p.asymmetric_hyperfine {
        drive.clone()
    } else {
        vec![1.0; drive.len()]
    };
    Ok((drive, hyperfine))
}

fn drive_weights(p: &SystemParams) -> Result<Vec<f64>> {
    let n = p.variant.nucleus_count();
    if p.asymmetry.is_empty() {
        return Ok(vec![1.0; n]);
    }
    if p.asymmetry.len() != n {
        return Err(Error::Config {
            line: None,
            key: Some("asymmetry".into()),
            message: format!("expected {n} factor(s) for {}, got {}", p.variant.name(), p.asymmetry.len()),
        });
    }
    if p.asymmetry.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::Config {
            line: None,
            key: Some("asymmetry".into()),
            message: "factors must be finite and >= 0".into(),
        });
    }
    let mean = p.asymmetry.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(Error::Config {
            line: None,
            key: Some("asymmetry".into()),
            message: "factors must not all be zero".into(),
        });
    }
    Ok(p.asymmetry.iter().map(|a| a / mean).collect())
}

fn cm(n: usize, entries: &[(usize, usize, C64)]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for &(r, c, z) in entries {
        m[(r, c)] += z;
    }
    m
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Spin operators on the bare electron factor.
pub mod electron {
    use super::*;

    /// `|0><+1| + |0><-1| + h.c.`
    pub fn sx() -> ComplexMatrix {
        cm(ELECTRON_DIM, &[
            (E_ZERO, E_PLUS, ONE),
            (E_ZERO, E_MINUS, ONE),
            (E_PLUS, E_ZERO, ONE),
            (E_MINUS, E_ZERO, ONE),
        ])
    }

    /// `-i|0><+1| - i|0><-1| + h.c.`, the quadrature partner of `sx`.
    pub fn sy() -> ComplexMatrix {
        cm(ELECTRON_DIM, &[
            (E_ZERO, E_PLUS, -I),
            (E_ZERO, E_MINUS, -I),
            (E_PLUS, E_ZERO, I),
            (E_MINUS, E_ZERO, I),
        ])
    }

    pub fn sz() -> ComplexMatrix {
        cm(ELECTRON_DIM, &[(E_PLUS, E_PLUS, ONE), (E_MINUS, E_MINUS, -ONE)])
    }

    /// `|k><A1|`
    pub fn lowering(k: usize) -> ComplexMatrix {
        cm(ELECTRON_DIM, &[(k, E_A1, ONE)])
    }

    pub fn dark() -> Vec<C64> {
        let mut v = vec![ZERO; ELECTRON_DIM];
        v[E_PLUS] = re(FRAC_1_SQRT_2);
        v[E_MINUS] = re(FRAC_1_SQRT_2);
        v
    }

    pub fn bright() -> Vec<C64> {
        let mut v = vec![ZERO; ELECTRON_DIM];
        v[E_PLUS] = re(FRAC_1_SQRT_2);
        v[E_MINUS] = re(-FRAC_1_SQRT_2);
        v
    }

    pub fn zero() -> Vec<C64> {
        basis(ELECTRON_DIM, E_ZERO)
    }
}

/// Operators on a single nuclear factor.
pub mod nucleus {
    use super::*;

    pub fn ix(variant: Variant) -> ComplexMatrix {
        match variant {
            Variant::SingleNucleus => cm(3, &[
                (N_ZERO, N_PLUS, ONE),
                (N_ZERO, N_MINUS, ONE),
                (N_PLUS, N_ZERO, ONE),
                (N_MINUS, N_ZERO, ONE),
            ]),
            // sigma_x / sqrt2: the collective |00>+|11> <-> |01>+|10>
            // coupling then matches the spin-1 |0> <-> |D> element.
            Variant::TwoNuclei => cm(2, &[(0, 1, re(FRAC_1_SQRT_2)), (1, 0, re(FRAC_1_SQRT_2))]),
        }
    }

    pub fn iz(variant: Variant) -> ComplexMatrix {
        match variant {
            Variant::SingleNucleus => cm(3, &[(N_PLUS, N_PLUS, ONE), (N_MINUS, N_MINUS, -ONE)]),
            Variant::TwoNuclei => cm(2, &[(1, 1, ONE), (0, 0, -ONE)]),
        }
    }

    /// Spin-1 `(|+1> + |-1>)/sqrt2`.
    pub fn dark() -> Vec<C64> {
        let mut v = vec![ZERO; 3];
        v[N_PLUS] = re(FRAC_1_SQRT_2);
        v[N_MINUS] = re(FRAC_1_SQRT_2);
        v
    }

    pub fn bright() -> Vec<C64> {
        let mut v = vec![ZERO; 3];
        v[N_PLUS] = re(FRAC_1_SQRT_2);
        v[N_MINUS] = re(-FRAC_1_SQRT_2);
        v
    }

    pub fn zero() -> Vec<C64> {
        basis(3, N_ZERO)
    }
}

/// Full-dimension operators for a variant.
#[derive(Debug, Clone)]
pub struct Operators {
    pub layout: SpaceLayout,
    pub sx: ComplexMatrix,
    pub sy: ComplexMatrix,
    pub sz: ComplexMatrix,
    pub ix: Vec<ComplexMatrix>,
    pub iz: Vec<ComplexMatrix>,
    /// `|+1><A1|`, `|-1><A1|`, `|0><A1|` embedded.
    pub lowering: [ComplexMatrix; 3],
    /// Projectors onto electron levels `+1, -1, 0, A1`.
    pub electron_projectors: [ComplexMatrix; 4],
}

pub fn build_operators(variant: Variant) -> Operators {
    let layout = variant.layout();
    let on_e = |op: &ComplexMatrix| layout.embed(op, 0).expect("electron factor");
    let nuclei = 1..=variant.nucleus_count();
    let ix = nuclei
        .clone()
        .map(|k| layout.embed(&nucleus::ix(variant), k).expect("nuclear factor"))
        .collect();
    let iz = nuclei
        .map(|k| layout.embed(&nucleus::iz(variant), k).expect("nuclear factor"))
        .collect();
    let proj = |k: usize| on_e(&ComplexMatrix::projector(&basis(ELECTRON_DIM, k)));
    Operators {
        sx: on_e(&electron::sx()),
        sy: on_e(&electron::sy()),
        sz: on_e(&electron::sz()),
        ix,
        iz,
        lowering: [
            on_e(&electron::lowering(E_PLUS)),
            on_e(&electron::lowering(E_MINUS)),
            on_e(&electron::lowering(E_ZERO)),
        ],
        electron_projectors: [proj(E_PLUS), proj(E_MINUS), proj(E_ZERO), proj(E_A1)],
        layout,
    }
}

/// Which Hamiltonian pieces to include; the pulsed protocol switches them
/// on and off segment by segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub drives: bool,
    pub hyperfine: bool,
    pub optical: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        drives: true,
        hyperfine: true,
        optical: true,
    };
    pub const OPTICAL_ONLY: Terms = Terms {
        drives: false,
        hyperfine: false,
        optical: true,
    };
    pub const HYPERFINE_ONLY: Terms = Terms {
        drives: false,
        hyperfine: true,
        optical: false,
    };
    pub const NONE: Terms = Terms {
        drives: false,
        hyperfine: false,
        optical: false,
    };
}

/// Hamiltonian in rad/us.
pub fn build_hamiltonian(p: &SystemParams) -> Result<ComplexMatrix> {
    build_hamiltonian_terms(p, Terms::ALL)
}

pub fn build_hamiltonian_terms(p: &SystemParams, terms: Terms) -> Result<ComplexMatrix> {
    p.validate()?;
    let ops = build_operators(p.variant);
    hamiltonian_from_ops(p, &ops, terms)
}

pub(crate) fn hamiltonian_from_ops(p: &SystemParams, ops: &Operators, terms: Terms) -> Result<ComplexMatrix> {
    let d = ops.layout.total_dim();
    let (drive_w, hf_w) = apply_asymmetry(p)?;
    let mut h = ComplexMatrix::zeros(d, d);
    if terms.drives {
        let (c, s) = (p.mw_phase.cos(), p.mw_phase.sin());
        h += &ops.sx.scale_real(TWO_PI * p.omega_e * c);
        if s != 0.0 {
            h += &ops.sy.scale_real(TWO_PI * p.omega_e * s);
        }
        for (ix, w) in ops.ix.iter().zip(&drive_w) {
            h += &ix.scale_real(TWO_PI * p.omega_n * w);
        }
    }
    if terms.hyperfine {
        for (iz, w) in ops.iz.iter().zip(&hf_w) {
            h += &(&ops.sz * iz).scale_real(TWO_PI * p.g * w);
        }
    }
    if terms.optical {
        let raise_plus = ops.lowering[0].scale_real(TWO_PI * p.e_plus);
        let raise_minus = ops.lowering[1].scale_real(TWO_PI * p.e_minus);
        let coupling = &raise_plus + &raise_minus;
        h += &coupling;
        h += &coupling.adjoint();
    }
    Ok(h)
}

/// Decay channels `sqrt(gamma_k) |k><A1|` for `k = +1, -1, 0` (rates in
/// 1/us), plus Markovian electron dephasing `sqrt(Gamma_phi/2) S_z` with
/// `Gamma_phi = 1/T2*` when `t2_star` is set.
pub fn build_collapse_ops(p: &SystemParams) -> Result<Vec<ComplexMatrix>> {
    p.validate()?;
    let ops = build_operators(p.variant);
    let mut out = decay_ops(p, &ops);
    if let Some(op) = dephasing_op(p, &ops) {
        out.push(op);
    }
    Ok(out)
}

pub(crate) fn decay_ops(p: &SystemParams, ops: &Operators) -> Vec<ComplexMatrix> {
    [p.gamma_plus, p.gamma_minus, p.gamma_zero]
        .iter()
        .zip(&ops.lowering)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, c)| c.scale_real((TWO_PI * g).sqrt()))
        .collect()
}

pub(crate) fn dephasing_op(p: &SystemParams, ops: &Operators) -> Option<ComplexMatrix> {
    p.t2_star.map(|t2| ops.sz.scale_real((0.5 / t2).sqrt()))
}

/// Target and reference states.
#[derive(Debug, Clone)]
pub struct TargetStates {
    /// The state the dissipation should prepare: the electron-nuclear singlet
    /// `(|D>|0> - |0>|D>)/sqrt2` for one spin-1 nucleus, or
    /// `[|D>(|10>+|01>) + i|0>(|11>+|00>)]/2` for two spin-1/2 nuclei.
    pub target: Vec<C64>,
    /// Two-nuclei only: `|0>_e (|10> - |01>)/sqrt2`.
    pub singlet_embedded: Option<Vec<C64>>,
    /// Two-nuclei only: nuclear singlet on the 4-dim nuclear space.
    pub nuclear_singlet: Option<Vec<C64>>,
    pub dark_e: Vec<C64>,
    pub bright_e: Vec<C64>,
    /// Spin-1 nucleus only.
    pub dark_n: Option<Vec<C64>>,
    pub bright_n: Option<Vec<C64>>,
}

pub fn target_states(variant: Variant) -> TargetStates {
    let dark_e = electron::dark();
    let bright_e = electron::bright();
    let zero_e = electron::zero();
    match variant {
        Variant::SingleNucleus => {
            let a = kron_vec(&dark_e, &nucleus::zero());
            let b = kron_vec(&zero_e, &nucleus::dark());
            let target = a.iter().zip(&b).map(|(x, y)| (x - y) * FRAC_1_SQRT_2).collect();
            TargetStates {
                target,
                singlet_embedded: None,
                nuclear_singlet: None,
                dark_e,
                bright_e,
                dark_n: Some(nucleus::dark()),
                bright_n: Some(nucleus::bright()),
            }
        }
        Variant::TwoNuclei => {
            let pair = |a: usize, b: usize| kron_vec(&basis(2, a), &basis(2, b));
            let add = |x: Vec<C64>, y: Vec<C64>, s: C64| -> Vec<C64> {
                x.iter().zip(&y).map(|(a, b)| a + s * b).collect()
            };
            let sym_flip = add(pair(1, 0), pair(0, 1), ONE);
            let sym_same = add(pair(1, 1), pair(0, 0), ONE);
            let target = normalized(&add(kron_vec(&dark_e, &sym_flip), kron_vec(&zero_e, &sym_same), I));
            let singlet = normalized(&add(pair(1, 0), pair(0, 1), -ONE));
            TargetStates {
                target,
                singlet_embedded: Some(kron_vec(&zero_e, &singlet)),
                nuclear_singlet: Some(singlet),
                dark_e,
                bright_e,
                dark_n: None,
                bright_n: None,
            }
        }
    }
}

/// Ground-manifold maximally mixed state: `rho_e (x) 1/d_n` with `rho_e`
/// uniform over `+1, -1, 0` and no `A1` population.
pub fn fully_mixed_ground(variant: Variant) -> ComplexMatrix {
    let layout = variant.layout();
    let d = layout.total_dim();
    let nuclear: usize = layout.factor_dims()[1..].iter().product();
    let weight = 1.0 / (3 * nuclear) as f64;
    ComplexMatrix::from_fn(d, d, |r, c| {
        if r == c && r / nuclear != E_A1 {
            re(weight)
        } else {
            ZERO
        }
    })
}

/// Population of the two-nucleus singlet after tracing out the electron.
pub fn singlet_population(rho: &ComplexMatrix) -> Result<f64> {
    let layout = Variant::TwoNuclei.layout();
    let nuclear = crate::linalg::partial_trace(rho, &layout, &[1, 2])?;
    let singlet = target_states(Variant::TwoNuclei)
        .nuclear_singlet
        .expect("two-nuclei target has a singlet");
    Ok(crate::linalg::inner(&singlet, &nuclear.matvec(&singlet)?).re)
}

/// Nuclear exchange operator for the two-nuclei variant.
pub fn nuclear_swap() -> ComplexMatrix {
    let mut swap = ComplexMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            swap[(b * 2 + a, a * 2 + b)] = ONE;
        }
    }
    crate::linalg::kron(&ComplexMatrix::identity(ELECTRON_DIM), &swap).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, vec_norm};

    fn apply(m: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
        m.matvec(v).unwrap()
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn electron_sx_on_dark_bright_zero() {
        let sx = electron::sx();
        let s2 = std::f64::consts::SQRT_2;
        let want_zero: Vec<C64> = electron::zero().iter().map(|z| z * s2).collect();
        let want_dark: Vec<C64> = electron::dark().iter().map(|z| z * s2).collect();
        assert!(dist(&apply(&sx, &electron::dark()), &want_zero) < 1e-15);
        assert!(dist(&apply(&sx, &electron::zero()), &want_dark) < 1e-15);
        assert!(vec_norm(&apply(&sx, &electron::bright())) < 1e-15);
    }

    #[test]
    fn hyperfine_annihilates_target() {
        let ops = build_operators(Variant::SingleNucleus);
        let psi = target_states(Variant::SingleNucleus).target;
        let szi = &ops.sz * &ops.iz[0];
        assert!(vec_norm(&apply(&szi, &psi)) < 1e-15);
    }

    #[test]
    fn spin_operators_are_hermitian() {
        for v in [Variant::SingleNucleus, Variant::TwoNuclei] {
            let ops = build_operators(v);
            for m in [&ops.sx, &ops.sy, &ops.sz].into_iter().chain(&ops.ix).chain(&ops.iz) {
                assert_eq!(m.hermiticity_error(), 0.0);
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_sized() {
        let h = build_hamiltonian(&SystemParams::fig2()).unwrap();
        assert_eq!(h.rows(), 12);
        assert!(h.hermiticity_error() < 1e-12);
        let h2 = build_hamiltonian(&SystemParams::two_nuclei()).unwrap();
        assert_eq!(h2.rows(), 16);
        assert!(h2.hermiticity_error() < 1e-12);
    }

    #[test]
    fn target_is_stationary_under_full_hamiltonian() {
        let h = build_hamiltonian(&SystemParams::fig2()).unwrap();
        let psi = target_states(Variant::SingleNucleus).target;
        assert!(vec_norm(&apply(&h, &psi)) < 1e-12);
    }

    #[test]
    fn optical_element_to_bright_state() {
        // <A1, 0_n| H |B_e, 0_n> = sqrt2 * 2 pi E
        let p = SystemParams::fig2();
        let h = build_hamiltonian(&p).unwrap();
        let a1 = kron_vec(&basis(4, E_A1), &nucleus::zero());
        let b = kron_vec(&electron::bright(), &nucleus::zero());
        let elem = inner(&a1, &apply(&h, &b));
        let want = std::f64::consts::SQRT_2 * TWO_PI * 10.0;
        assert!((elem - C64::new(want, 0.0)).norm() < 1e-12, "{elem}");
        let d = kron_vec(&electron::dark(), &nucleus::zero());
        assert!(inner(&a1, &apply(&h, &d)).norm() < 1e-12);
    }

    #[test]
    fn drive_mismatch_breaks_darkness_proportionally() {
        for (oe, on) in [(1.0, 1.5), (2.0, 0.5), (0.3, 0.0)] {
            let p = SystemParams { omega_e: oe, omega_n: on, ..SystemParams::fig2() };
            let h = build_hamiltonian(&p).unwrap();
            let psi = target_states(Variant::SingleNucleus).target;
            let norm = vec_norm(&apply(&h, &psi));
            let want = std::f64::consts::SQRT_2 * TWO_PI * (oe - on).abs();
            assert!((norm - want).abs() < 1e-12, "{norm} vs {want}");
        }
    }

    #[test]
    fn collapse_ops_sum_to_total_decay() {
        let p = SystemParams::fig2();
        let cs = build_collapse_ops(&p).unwrap();
        assert_eq!(cs.len(), 3);
        let mut sum = ComplexMatrix::zeros(12, 12);
        for c in &cs {
            sum += &(&c.adjoint() * c);
        }
        let ops = build_operators(Variant::SingleNucleus);
        let want = ops.electron_projectors[3].scale_real(TWO_PI * 100.0);
        assert!((&sum - &want).norm_max() < 1e-10);
        let psi = target_states(Variant::SingleNucleus).target;
        for c in &cs {
            assert_eq!(vec_norm(&apply(c, &psi)), 0.0);
        }
    }

    #[test]
    fn unequal_decay_rates_are_accepted() {
        let p = SystemParams { gamma_plus: 10.0, gamma_minus: 50.0, ..SystemParams::fig2() };
        let cs = build_collapse_ops(&p).unwrap();
        let rate = |c: &ComplexMatrix| (&c.adjoint() * c).trace().re;
        // each channel acts on 3 nuclear copies of |A1>
        assert!((rate(&cs[0]) - 3.0 * TWO_PI * 10.0).abs() < 1e-10);
        assert!((rate(&cs[1]) - 3.0 * TWO_PI * 50.0).abs() < 1e-10);
    }

    #[test]
    fn dephasing_channel_added_with_t2() {
        let p = SystemParams { t2_star: Some(10.0), ..SystemParams::fig2() };
        let cs = build_collapse_ops(&p).unwrap();
        assert_eq!(cs.len(), 4);
        let ops = build_operators(Variant::SingleNucleus);
        assert!((&cs[3] - &ops.sz.scale_real(0.05f64.sqrt())).norm_max() < 1e-15);
    }

    #[test]
    fn target_states_are_normalized() {
        for v in [Variant::SingleNucleus, Variant::TwoNuclei] {
            let t = target_states(v);
            assert!((vec_norm(&t.target) - 1.0).abs() < 1e-15);
            assert!(inner(&t.dark_e, &t.bright_e).norm() < 1e-16);
        }
        let t = target_states(Variant::SingleNucleus);
        let amps: Vec<f64> = t.target.iter().filter(|z| z.norm() > 0.0).map(|z| z.re).collect();
        assert_eq!(amps.len(), 4);
        assert!(amps.iter().all(|a| (a.abs() - 0.5).abs() < 1e-15));
        assert!(inner(t.dark_n.as_ref().unwrap(), t.bright_n.as_ref().unwrap()).norm() < 1e-16);
        // no A1 component
        assert!(t.target[9..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_nuclei_target_orthogonal_to_singlet() {
        let t = target_states(Variant::TwoNuclei);
        assert!(inner(&t.target, t.singlet_embedded.as_ref().unwrap()).norm() < 1e-16);
    }

    #[test]
    fn two_nuclei_target_is_dark_with_default_phase() {
        let p = SystemParams::two_nuclei();
        let h = build_hamiltonian(&p).unwrap();
        let psi = target_states(Variant::TwoNuclei).target;
        assert!(vec_norm(&apply(&h, &psi)) < 1e-12);
        // in-phase drives make the dark branch real, so the printed i breaks it
        let in_phase = SystemParams { mw_phase: 0.0, ..p };
        let h = build_hamiltonian(&in_phase).unwrap();
        assert!(vec_norm(&apply(&h, &psi)) > 1.0);
    }

    #[test]
    fn fully_mixed_ground_has_unit_trace() {
        for v in [Variant::SingleNucleus, Variant::TwoNuclei] {
            let rho = fully_mixed_ground(v);
            assert!((rho.trace().re - 1.0).abs() < 1e-15);
        }
        let rho = fully_mixed_ground(Variant::SingleNucleus);
        assert!((rho[(0, 0)].re - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(rho[(9, 9)], ZERO);
    }

    #[test]
    fn symmetric_factors_commute_with_swap() {
        let swap = nuclear_swap();
        let p = SystemParams { asymmetry: vec![1.0, 1.0], ..SystemParams::two_nuclei() };
        let h = build_hamiltonian(&p).unwrap();
        assert!(h.commutator(&swap).unwrap().norm_max() < 1e-12);
        let p = SystemParams { asymmetry: vec![1.0, 0.8], ..p };
        let h = build_hamiltonian(&p).unwrap();
        assert!(h.commutator(&swap).unwrap().norm_max() > 0.1);
    }

    #[test]
    fn asymmetry_weights_have_unit_mean() {
        let p = SystemParams { asymmetry: vec![1.0, 0.8], ..SystemParams::two_nuclei() };
        let (drive, hf) = apply_asymmetry(&p).unwrap();
        assert!((drive[0] - 1.0 / 0.9).abs() < 1e-15 && (drive[1] - 0.8 / 0.9).abs() < 1e-15);
        assert_eq!(hf, vec![1.0, 1.0]);
        // the target stays dark
        let h = build_hamiltonian(&p).unwrap();
        let psi = target_states(Variant::TwoNuclei).target;
        assert!(vec_norm(&apply(&h, &psi)) < 1e-12);
    }

    #[test]
    fn asymmetry_length_mismatch_is_config_error() {
        let p = SystemParams { asymmetry: vec![1.0, 0.8, 0.5], ..SystemParams::two_nuclei() };
        assert!(matches!(apply_asymmetry(&p), Err(Error::Config { .. })));
        let p = SystemParams { asymmetry: vec![1.0, 0.8], ..SystemParams::fig2() };
        assert!(matches!(build_hamiltonian(&p), Err(Error::Config { .. })));
    }

    #[test]
    fn negative_rate_rejected() {
        let p = SystemParams { gamma_plus: -1.0, ..SystemParams::fig2() };
        assert!(matches!(p.validate(), Err(Error::Config { .. })));
        let p = SystemParams { t2_star: Some(0.0), ..SystemParams::fig2() };
        assert!(p.validate().is_err());
    }
}
