//! Browser bindings for the demo page. Results come back as flat
//! `Float64Array`s.

use darksteady::engine::{build_liouvillian, evolve, fidelity, purity, steady_state, Integrator, Liouvillian};
use darksteady::model::{self, SystemParams, Variant};
use darksteady::pulse::{run_sequence, PulseSequence};
use darksteady::Error;
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn liouvillian(p: &SystemParams) -> Result<Liouvillian, Error> {
    build_liouvillian(&model::build_hamiltonian(p)?, &model::build_collapse_ops(p)?)
}

fn relax(e: f64, omega_e: f64, omega_n: f64, t_end: f64, samples: usize) -> Result<Vec<f64>, Error> {
    if samples == 0 || !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Domain("need t_end > 0 and at least one sample".into()));
    }
    let p = SystemParams {
        omega_e,
        omega_n,
        ..SystemParams::fig2().with_optical(e)
    };
    p.validate()?;
    let l = liouvillian(&p)?;
    let psi = model::target_states(Variant::SingleNucleus).target;
    let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
    let traj = evolve(&l, &rho0, t_end, t_end / samples as f64, Integrator::Propagator, None)?;
    let mut out = Vec::with_capacity(3 * traj.times.len());
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        out.extend([*t, fidelity(rho, &psi)?, purity(rho)]);
    }
    Ok(out)
}

/// Relaxation from the mixed ground manifold. Returns `(t, F, P)` triples.
#[wasm_bindgen]
pub fn relaxation(e: f64, omega_e: f64, omega_n: f64, t_end: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    relax(e, omega_e, omega_n, t_end, samples).map_err(js)
}

fn grid(e_values: &[f64], omega_values: &[f64]) -> Result<Vec<f64>, Error> {
    let psi = model::target_states(Variant::SingleNucleus).target;
    let mut out = Vec::with_capacity(e_values.len() * omega_values.len());
    for &e in e_values {
        for &w in omega_values {
            let p = SystemParams::fig2().with_optical(e).with_drive(w);
            p.validate()?;
            let f = match steady_state(&liouvillian(&p)?) {
                Ok((rho, _)) => fidelity(&rho, &psi)?,
                Err(Error::NonUniqueSteadyState { .. }) => f64::NAN,
                Err(err) => return Err(err),
            };
            out.push(f);
        }
    }
    Ok(out)
}

/// Steady-state fidelity for every `(e, omega)` pair, `e` slowest. NaN marks
/// a non-unique steady state.
#[wasm_bindgen]
pub fn steady_grid(e_values: &[f64], omega_values: &[f64]) -> Result<Vec<f64>, JsError> {
    grid(e_values, omega_values).map_err(js)
}

fn pulsed(tau: f64, cycles: usize, t2_star: f64) -> Result<Vec<f64>, Error> {
    let p = SystemParams {
        t2_star: (t2_star > 0.0).then_some(t2_star),
        ..SystemParams::pulsed()
    };
    p.validate()?;
    let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
    let mut out = Vec::with_capacity(3 * (cycles + 1));
    let runs = [(0.0, false), (tau, false), (tau, true)]
        .into_iter()
        .map(|(t, c)| run_sequence(&rho0, &PulseSequence::standard(&p, t, cycles, c)?, &p))
        .collect::<Result<Vec<_>, _>>()?;
    for k in 0..=cycles {
        out.extend(runs.iter().map(|r| r.fidelity[k]));
    }
    Ok(out)
}

/// Fidelity per cycle of the ideal sequence followed by the imperfect one
/// without and with angle correction, as one triple per cycle.
/// `t2_star <= 0` disables dephasing.
#[wasm_bindgen]
pub fn pulsed_fidelity(tau: f64, cycles: usize, t2_star: f64) -> Result<Vec<f64>, JsError> {
    pulsed(tau, cycles, t2_star).map_err(js)
}
