//! Experiment runners and their output files (`data.csv`, `summary.txt`,
//! `plot.gp`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Experiment, ExperimentConfig, InitialState, NoiseMode};
use crate::engine::{
    build_liouvillian, evolve, evolve_until_converged, fidelity, purity, steady_state, Liouvillian,
    SteadyStateCertificate, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, normalized, ComplexMatrix, C64};
use crate::model::{self, SystemParams, Variant};
use crate::pulse::{
    self, dd_error, map_ordered, t2star_sweep, NoiseModel, PulseSegment, PulseSequence, PulseTrajectory,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rendered outputs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub summary: String,
    pub plot: String,
}

/// Formats with 12 significant digits, `%.12g` style.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Default)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| format_number(*v)).collect());
    }

    fn push_cells(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

fn render_csv(cfg: &ExperimentConfig, table: &Table) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# # darksteady {VERSION} {} run", cfg.experiment);
    for note in CONVENTIONS {
        let _ = writeln!(out, "# # {note}");
    }
    for line in cfg.to_config_text().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

const CONVENTIONS: [&str; 4] = [
    "basis: electron (+1, -1, 0, A1) index slowest; spin-1 nucleus (+1, -1, 0); spin-1/2 (0, 1)",
    "units: frequencies in MHz (x 2 pi internally), time in us",
    "optical coupling: e_plus |+1><A1| + e_minus |-1><A1| + h.c.",
    "vectorization: column stacking",
];

struct Summary(String);

impl Summary {
    fn new(cfg: &ExperimentConfig) -> Self {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", cfg.experiment);
        let _ = writeln!(s, "version = {VERSION}");
        Summary(s)
    }

    fn num(&mut self, key: &str, v: f64) {
        let _ = writeln!(self.0, "{key} = {}", format_number(v));
    }

    fn text(&mut self, key: &str, v: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {v}");
    }

    fn certificate(&mut self, prefix: &str, c: &SteadyStateCertificate) {
        self.text(&format!("{prefix}null_count"), c.null_count);
        self.num(&format!("{prefix}spectral_gap"), c.spectral_gap);
        self.num(&format!("{prefix}liouvillian_norm"), c.liouvillian_norm);
        self.num(&format!("{prefix}residual"), c.residual);
        self.num(&format!("{prefix}clipped_weight"), c.clipped_weight);
    }
}

fn plot_script(title: &str, xlabel: &str, series: &[(usize, usize, &str)], logx: bool) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    if logx {
        s.push_str("set logscale x\n");
    }
    let parts: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(i, (x, y, style))| {
            let file = if i == 0 { "'data.csv'" } else { "''" };
            format!("{file} using {x}:{y} with {style}")
        })
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// Starting state for continuous runs.
pub fn initial_state(kind: InitialState, variant: Variant, seed: u64) -> ComplexMatrix {
    match kind {
        InitialState::Mixed => model::fully_mixed_ground(variant),
        InitialState::Ground => {
            let nuclear = match variant {
                Variant::SingleNucleus => model::nucleus::zero(),
                Variant::TwoNuclei => crate::linalg::basis(4, 0),
            };
            ComplexMatrix::projector(&kron_vec(&model::electron::zero(), &nuclear))
        }
        InitialState::RandomPure => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<C64> = (0..variant.dim())
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            ComplexMatrix::projector(&normalized(&v))
        }
    }
}

fn liouvillian(p: &SystemParams) -> Result<Liouvillian> {
    build_liouvillian(&model::build_hamiltonian(p)?, &model::build_collapse_ops(p)?)
}

const STATE_COLUMNS: [&str; 9] = [
    "time_us",
    "fidelity",
    "purity",
    "pop_plus",
    "pop_minus",
    "pop_zero",
    "pop_a1",
    "trace_deviation",
    "residual",
];

fn state_row(t: f64, rho: &ComplexMatrix, psi: &[C64], residual: f64) -> Result<Vec<f64>> {
    let pops = pulse::electron_populations(rho);
    Ok(vec![
        t,
        fidelity(rho, psi)?,
        purity(rho),
        pops[0],
        pops[1],
        pops[2],
        pops[3],
        rho.trace().re - 1.0,
        residual,
    ])
}

fn trajectory_table(traj: &Trajectory, psi: &[C64]) -> Result<Table> {
    let mut table = Table::new(&STATE_COLUMNS);
    for ((t, rho), r) in traj.times.iter().zip(&traj.states).zip(&traj.residuals) {
        table.push(&state_row(*t, rho, psi, *r)?);
    }
    Ok(table)
}

fn max_trace_deviation(traj: &Trajectory) -> f64 {
    traj.states.iter().map(|r| (r.trace().re - 1.0).abs()).fold(0.0, f64::max)
}

/// Runs an experiment without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Fig2 => run_fig2(cfg),
        Experiment::Evolve => run_evolve(cfg),
        Experiment::Steady => run_steady(cfg),
        Experiment::Fig2Inset => run_fig2_inset(cfg),
        Experiment::Sweep => run_sweep(cfg),
        Experiment::Fig3 => run_fig3(cfg),
        Experiment::T2Inset => run_t2_inset(cfg),
        Experiment::TwoNuclei => run_two_nuclei(cfg),
    }
}

fn run_fig2(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let l = liouvillian(p)?;
    let psi = model::target_states(p.variant).target;
    let rho0 = initial_state(cfg.initial, p.variant, cfg.seed);
    let traj = evolve_until_converged(&l, &rho0, cfg.tolerance, cfg.sample_dt, cfg.t_end, cfg.integrator, cfg.dt)?;
    let (rho_ss, cert) = steady_state(&l)?;
    let end = traj.last();

    let mut s = Summary::new(cfg);
    s.text("integrator", cfg.integrator);
    s.num("initial_fidelity", fidelity(&rho0, &psi)?);
    s.num("initial_purity", purity(&rho0));
    s.num("converged_at_us", traj.converged_at.unwrap_or(f64::NAN));
    s.num("final_time_us", traj.final_time());
    s.num("final_fidelity", fidelity(end, &psi)?);
    s.num("final_purity", purity(end));
    s.num("final_residual", *traj.residuals.last().expect("non-empty"));
    s.num("max_trace_deviation", max_trace_deviation(&traj));
    s.num("steady_fidelity", fidelity(&rho_ss, &psi)?);
    s.num("steady_purity", purity(&rho_ss));
    s.num("endpoint_vs_steady_max_diff", (end - &rho_ss).norm_max());
    s.certificate("steady_", &cert);

    Ok(RunOutput {
        csv: render_csv(cfg, &trajectory_table(&traj, &psi)?)?,
        summary: s.0,
        plot: plot_script(
            "fidelity and purity",
            "time (us)",
            &[(1, 2, "lines"), (1, 3, "lines dashtype 2")],
            false,
        ),
    })
}

fn run_evolve(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let l = liouvillian(p)?;
    let psi = model::target_states(p.variant).target;
    let rho0 = initial_state(cfg.initial, p.variant, cfg.seed);
    let traj = evolve(&l, &rho0, cfg.t_end, cfg.sample_dt, cfg.integrator, cfg.dt)?;
    let mut s = Summary::new(cfg);
    s.text("integrator", cfg.integrator);
    s.num("final_time_us", traj.final_time());
    s.num("final_fidelity", fidelity(traj.last(), &psi)?);
    s.num("final_purity", purity(traj.last()));
    s.num("final_residual", *traj.residuals.last().expect("non-empty"));
    s.num("max_trace_deviation", max_trace_deviation(&traj));
    Ok(RunOutput {
        csv: render_csv(cfg, &trajectory_table(&traj, &psi)?)?,
        summary: s.0,
        plot: plot_script(
            "fidelity and purity",
            "time (us)",
            &[(1, 2, "lines"), (1, 3, "lines dashtype 2")],
            false,
        ),
    })
}

fn run_steady(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let l = liouvillian(p)?;
    let psi = model::target_states(p.variant).target;
    let (rho, cert) = steady_state(&l)?;
    let pops = pulse::electron_populations(&rho);
    let mut table = Table::new(&[
        "fidelity",
        "purity",
        "spectral_gap",
        "null_count",
        "pop_plus",
        "pop_minus",
        "pop_zero",
        "pop_a1",
    ]);
    let f = fidelity(&rho, &psi)?;
    table.push(&[
        f,
        purity(&rho),
        cert.spectral_gap,
        cert.null_count as f64,
        pops[0],
        pops[1],
        pops[2],
        pops[3],
    ]);
    let mut s = Summary::new(cfg);
    s.num("steady_fidelity", f);
    s.num("steady_purity", purity(&rho));
    s.certificate("steady_", &cert);
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script("steady-state populations", "", &[(0, 5, "boxes")], false),
    })
}

/// Steady-state fidelity, purity and certificate; `None` when the
/// stationary state is not unique.
struct PointResult {
    coords: Vec<f64>,
    steady: Option<(f64, f64)>,
    cert: SteadyStateCertificate,
}

fn steady_point(coords: Vec<f64>, p: &SystemParams) -> Result<PointResult> {
    let l = liouvillian(p)?;
    let psi = model::target_states(p.variant).target;
    match steady_state(&l) {
        Ok((rho, cert)) => Ok(PointResult {
            coords,
            steady: Some((fidelity(&rho, &psi)?, purity(&rho))),
            cert,
        }),
        Err(Error::NonUniqueSteadyState { certificate, .. }) => Ok(PointResult {
            coords,
            steady: None,
            cert: certificate,
        }),
        Err(e) => Err(e),
    }
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let points = cfg.grid_points()?;
    let results = map_ordered(&points, |(coords, p)| steady_point(coords.clone(), p))?;
    let mut columns: Vec<&str> = cfg.grid.iter().map(|a| a.name.as_str()).collect();
    columns.extend(["fidelity", "purity", "spectral_gap", "null_count", "unique"]);
    let mut table = Table::new(&columns);
    let mut min_f = f64::INFINITY;
    let mut non_unique = 0usize;
    for r in &results {
        let mut cells: Vec<String> = r.coords.iter().map(|v| format_number(*v)).collect();
        match r.steady {
            Some((f, pur)) => {
                min_f = min_f.min(f);
                cells.push(format_number(f));
                cells.push(format_number(pur));
            }
            None => {
                non_unique += 1;
                cells.push(String::new());
                cells.push(String::new());
            }
        }
        cells.push(format_number(r.cert.spectral_gap));
        cells.push(r.cert.null_count.to_string());
        cells.push(r.steady.is_some().to_string());
        table.push_cells(cells);
    }
    let mut s = Summary::new(cfg);
    s.text("points", results.len());
    s.text("non_unique_points", non_unique);
    s.num("min_unique_fidelity", min_f);
    let n = cfg.grid.len();
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script("steady-state fidelity", &cfg.grid[n - 1].name, &[(n, n + 1, "points")], false),
    })
}

fn run_fig2_inset(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let points = cfg.grid_points()?;
    let runs = map_ordered(&points, |(coords, p)| {
        let l = liouvillian(p)?;
        let psi = model::target_states(p.variant).target;
        let rho0 = initial_state(cfg.initial, p.variant, cfg.seed);
        let traj =
            evolve_until_converged(&l, &rho0, cfg.tolerance, cfg.sample_dt, cfg.t_end, cfg.integrator, cfg.dt)?;
        let point = steady_point(coords.clone(), p)?;
        Ok((traj, psi, point))
    })?;
    let mut columns: Vec<&str> = cfg.grid.iter().map(|a| a.name.as_str()).collect();
    columns.extend(["time_us", "fidelity", "purity"]);
    let mut table = Table::new(&columns);
    let mut s = Summary::new(cfg);
    let mut min_f = f64::INFINITY;
    for (traj, psi, point) in &runs {
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let mut row = point.coords.clone();
            row.extend([*t, fidelity(rho, psi)?, purity(rho)]);
            table.push(&row);
        }
        let label: Vec<String> = cfg
            .grid
            .iter()
            .zip(&point.coords)
            .map(|(a, v)| format!("{}={}", a.name, format_number(*v)))
            .collect();
        let label = label.join(",");
        s.num(&format!("final_fidelity[{label}]"), fidelity(traj.last(), psi)?);
        s.num(&format!("final_purity[{label}]"), purity(traj.last()));
        if let Some((f, _)) = point.steady {
            min_f = min_f.min(f);
            s.num(&format!("steady_fidelity[{label}]"), f);
        } else {
            s.text(&format!("steady_fidelity[{label}]"), "non-unique");
        }
    }
    s.num("min_steady_fidelity", min_f);
    let n = cfg.grid.len();
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script("purity for several field strengths", "time (us)", &[(n + 1, n + 3, "points pt 7 ps 0.3")], false),
    })
}

/// Sequence built from the `[pulse]` settings.
pub fn pulse_sequence(cfg: &ExperimentConfig, tau: f64, correction: bool) -> Result<PulseSequence> {
    let q = &cfg.pulse;
    let mut seq = PulseSequence::standard(&cfg.params, tau, cfg.cycles, correction)?.with_axis(q.axis);
    for seg in &mut seq.segments {
        match seg {
            PulseSegment::OpticalPump { duration } => *duration = q.pump_duration,
            PulseSegment::ElectronRotation { duration, .. } => *duration = q.electron_duration,
            PulseSegment::NuclearRotation { duration, .. } => *duration = q.nuclear_duration,
            _ => {}
        }
    }
    seq.dd_filters_t2 = q.dd_filters_t2;
    seq.noise = match q.noise {
        NoiseMode::Markovian => NoiseModel::Markovian,
        NoiseMode::QuasiStatic => NoiseModel::QuasiStatic {
            realizations: q.realizations,
            seed: cfg.seed,
        },
    };
    seq.validate()?;
    Ok(seq)
}

fn first_cycle_reaching(traj: &PulseTrajectory, level: f64) -> Option<usize> {
    traj.fidelity.iter().position(|f| *f >= level)
}

fn run_fig3(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let rho0 = model::fully_mixed_ground(p.variant);
    let tau = cfg.pulse.tau;
    let seqs = [
        pulse_sequence(cfg, 0.0, false)?,
        pulse_sequence(cfg, tau, false)?,
        pulse_sequence(cfg, tau, true)?,
    ];
    let runs = map_ordered(&seqs, |seq| pulse::run_sequence(&rho0, seq, p))?;
    let mut table = Table::new(&[
        "cycle",
        "time_us",
        "fidelity_ideal",
        "fidelity_uncorrected",
        "fidelity_corrected",
        "purity_ideal",
        "purity_uncorrected",
        "purity_corrected",
    ]);
    let [ideal, uncorrected, corrected] = &runs[..] else {
        unreachable!("three runs")
    };
    for k in 0..ideal.cycles.len() {
        table.push(&[
            k as f64,
            ideal.times[k],
            ideal.fidelity[k],
            uncorrected.fidelity[k],
            corrected.fidelity[k],
            ideal.purity[k],
            uncorrected.purity[k],
            corrected.purity[k],
        ]);
    }
    let mut s = Summary::new(cfg);
    s.num("tau_us", tau);
    s.num("dd_error_rad", dd_error(p.g, p.omega_n, tau)?);
    s.num("cycle_duration_us", seqs[0].cycle_duration());
    for (name, run) in [("ideal", ideal), ("uncorrected", uncorrected), ("corrected", corrected)] {
        s.num(&format!("final_fidelity_{name}"), *run.fidelity.last().expect("non-empty"));
        s.num(&format!("max_fidelity_{name}"), run.max_fidelity());
    }
    s.text(
        "first_cycle_ideal_above_0.98",
        first_cycle_reaching(ideal, 0.98).map_or("none".to_string(), |c| c.to_string()),
    );
    let worst = corrected
        .fidelity
        .iter()
        .zip(&uncorrected.fidelity)
        .map(|(c, u)| c - u)
        .fold(f64::INFINITY, f64::min);
    s.num("min_corrected_minus_uncorrected", worst);
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script(
            "fidelity per optical cycle",
            "cycle N",
            &[(1, 3, "lines"), (1, 4, "lines"), (1, 5, "lines")],
            false,
        ),
    })
}

fn run_t2_inset(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = SystemParams {
        t2_star: None,
        ..cfg.params.clone()
    };
    let seq = pulse_sequence(cfg, cfg.pulse.tau, false)?;
    let table_rows = t2star_sweep(&p, &seq, &cfg.pulse.t2_values)?;
    let noiseless = pulse::run_sequence(&model::fully_mixed_ground(p.variant), &seq, &p)?;
    let mut table = Table::new(&["t2_star_us", "max_fidelity"]);
    for (t2, f) in &table_rows {
        table.push(&[*t2, *f]);
    }
    let mut sorted = table_rows.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 >= w[0].1);
    let mut s = Summary::new(cfg);
    s.num("noiseless_max_fidelity", noiseless.max_fidelity());
    s.text("monotone_in_t2", monotone);
    for (t2, f) in &table_rows {
        s.num(&format!("max_fidelity[t2_star={}]", format_number(*t2)), *f);
    }
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script("maximal fidelity vs T2*", "T2* (us)", &[(1, 2, "linespoints")], true),
    })
}

fn run_two_nuclei(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    if p.variant != Variant::TwoNuclei {
        return Err(Error::config("two-nuclei experiment needs variant = two-nuclei-spin-half"));
    }
    let l = liouvillian(p)?;
    let targets = model::target_states(p.variant);
    let psi = &targets.target;
    let rho0 = initial_state(cfg.initial, p.variant, cfg.seed);
    let traj = evolve(&l, &rho0, cfg.t_end, cfg.sample_dt, cfg.integrator, cfg.dt)?;
    let mut table = Table::new(&[
        "time_us",
        "fidelity",
        "singlet_population",
        "purity",
        "pop_plus",
        "pop_minus",
        "pop_zero",
        "pop_a1",
        "trace_deviation",
    ]);
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        let pops = pulse::electron_populations(rho);
        table.push(&[
            *t,
            fidelity(rho, psi)?,
            model::singlet_population(rho)?,
            purity(rho),
            pops[0],
            pops[1],
            pops[2],
            pops[3],
            rho.trace().re - 1.0,
        ]);
    }
    let end = traj.last();
    let mut s = Summary::new(cfg);
    s.text("integrator", cfg.integrator);
    s.num("final_time_us", traj.final_time());
    s.num("final_fidelity", fidelity(end, psi)?);
    s.num("final_singlet_population", model::singlet_population(end)?);
    s.num("final_purity", purity(end));
    s.num("max_trace_deviation", max_trace_deviation(&traj));
    let point = steady_point(Vec::new(), p)?;
    s.text("steady_unique", point.steady.is_some());
    if let Some((f, pur)) = point.steady {
        s.num("steady_fidelity", f);
        s.num("steady_purity", pur);
    }
    s.certificate("steady_", &point.cert);
    Ok(RunOutput {
        csv: render_csv(cfg, &table)?,
        summary: s.0,
        plot: plot_script(
            "target fidelity and singlet population",
            "time (us)",
            &[(1, 2, "lines"), (1, 3, "lines dashtype 2")],
            false,
        ),
    })
}

pub const DATA_FILE: &str = "data.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PLOT_FILE: &str = "plot.gp";

/// Writes the three output files; anything written is removed again if a
/// later write fails.
pub fn write_outputs(out_dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let files = [
        (DATA_FILE, &output.csv),
        (SUMMARY_FILE, &output.summary),
        (PLOT_FILE, &output.plot),
    ];
    for (name, body) in files {
        let path = out_dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(())
}

/// Runs `cfg` and writes its outputs under `out_dir`. On failure no output
/// files from this run are left behind.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let result = run_experiment(cfg).and_then(|out| write_outputs(out_dir, &out).map(|_| out));
    if result.is_err() {
        for name in [DATA_FILE, SUMMARY_FILE, PLOT_FILE] {
            let _ = fs::remove_file(out_dir.join(name));
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{config_from_header, parse_config};

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(format_number(123456.7890123456), "123456.789012");
        assert_eq!(format_number(-0.5), "-0.5");
        assert_eq!(format_number(9.9999999999999), "10");
        assert_eq!(format_number(1.5e15), "1.5e15");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn steady_run_writes_header_that_round_trips() {
        let cfg = parse_config("experiment = steady\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.csv.starts_with("# # darksteady"));
        assert_eq!(parse_config(&config_from_header(&out.csv)).unwrap(), cfg);
        let data: Vec<&str> = out.csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert!(data[0].starts_with("fidelity,purity"));
        assert!(out.summary.contains("steady_null_count = 1"));
    }

    #[test]
    fn sweep_flags_non_unique_points() {
        // omega = 0 leaves every ground level stationary
        let cfg = parse_config("experiment = sweep\n[grid]\nomega = 0, 1\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        let rows: Vec<&str> = out.csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].ends_with(",false"), "{}", rows[0]);
        assert!(rows[1].ends_with(",true"), "{}", rows[1]);
    }

    #[test]
    fn mismatched_drive_lowers_fidelity() {
        let cfg = parse_config("experiment = sweep\n[params]\nomega_n = 1\n[grid]\nomega_e = 1, 1.5\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        let rows: Vec<Vec<String>> = out
            .csv
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        let f: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        assert!(f[0] > 0.999 && f[1] < 0.99, "{f:?}");
    }

    #[test]
    fn failed_run_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config("experiment = steady\n").unwrap();
        cfg.params.omega_e = 0.0;
        cfg.params.omega_n = 0.0;
        let err = run_to_dir(&cfg, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(!dir.path().join(DATA_FILE).exists());
        assert!(!dir.path().join(SUMMARY_FILE).exists());
    }

    #[test]
    fn initial_states_are_normalized() {
        for v in [Variant::SingleNucleus, Variant::TwoNuclei] {
            for k in [InitialState::Mixed, InitialState::Ground, InitialState::RandomPure] {
                let rho = initial_state(k, v, 5);
                assert!((rho.trace().re - 1.0).abs() < 1e-14);
            }
        }
    }
}
