//! The subcommands. Each writes its data files into the output directory and
//! returns a JSON summary plus the outcome of its --check tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qline::circuit::{self, DerivedScales, ModeSet, Parity, Topology};
use qline::decomposition::{
    compress_series, discrete_series, matsubara_series, sample_continuum, CorrelationSeries, FitConfig,
};
use qline::heom::{
    build_hierarchy, collective_operators, evolve, single_qubit_hamiltonian, two_qubit_hamiltonian, Channel,
    HierarchyOptions, SystemModel,
};
use qline::linalg::{self, CMatrix};
use qline::nonmarkov::{blp_map, blp_measure, gkls_map, heom_map, BlpResult, DynamicalMap, SamplingConfig};
use qline::ode::IntegratorConfig;
use qline::reference::{
    exact_fock_oracle, extract_rabi_frequency, gkls_generator, gkls_secular, rabi_window, tcl2, tcl2_channels,
    BathInit, ContinuumModel, FockModelConfig, GklsOptions,
};
use qline::spectra::{
    bath_from_circuit, consistency_report, correlation_continuum, correlation_discrete, correlation_imag_exact,
    CorrelationMethod, DrudeLorentzBath,
};
use qline::trajectory::Trajectory;
use serde_json::{json, Value};

use crate::output::{flat_complex, fmt_or_nan, write_atomic, write_json};
use crate::scenario::{sectors, BlpEngine, Environment, Scenario, SeriesKind, SolverKind};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Regime,
    Modes,
    Bath,
    Fit,
    Simulate,
    Compare,
    Blp,
    BlpMap,
    Rabi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Regime => "regime",
            Command::Modes => "modes",
            Command::Bath => "bath",
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Blp => "blp",
            Command::BlpMap => "blp-map",
            Command::Rabi => "rabi",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Value,
    /// (description, passed)
    pub checks: Vec<(String, bool)>,
    /// one-line human summary for stdout
    pub message: String,
}

pub fn run(cmd: Command, s: &Scenario, ctx: &RunContext) -> Result<Outcome, CliError> {
    fs::create_dir_all(&ctx.out)?;
    match cmd {
        Command::Regime => cmd_regime(s, &ctx.out),
        Command::Modes => cmd_modes(s, &ctx.out),
        Command::Bath => cmd_bath(s, &ctx.out),
        Command::Fit => cmd_fit(s, &ctx.out),
        Command::Simulate => cmd_simulate(s, &ctx.out),
        Command::Compare => cmd_compare(s, &ctx.out),
        Command::Blp => cmd_blp(s, &ctx.out),
        Command::BlpMap => cmd_blp_map(s, &ctx.out),
        Command::Rabi => cmd_rabi(s, &ctx.out),
    }
}

/// Defaults in effect for a scenario, recorded in every metadata file.
pub fn effective_defaults(s: &Scenario) -> Value {
    json!({
        "regime_thresholds": s.thresholds(),
        "integrator": integrator(s),
        "hierarchy": hierarchy_options(s),
        "fit": fit_config(s),
        "fit_window_over_gamma": s.fit.window,
        "sampling": sampling(s),
        "gkls": gkls_options(s),
        "tcl2_matsubara": s.tcl2.matsubara,
        "fock": fock_config(s, 0.0),
        "time": { "t_end": s.time.t_end.unwrap_or(DEFAULT_T_END), "dt": s.time.dt.unwrap_or(DEFAULT_DT) },
    })
}

const DEFAULT_T_END: f64 = 100.0;
const DEFAULT_DT: f64 = 0.05;

fn integrator(s: &Scenario) -> IntegratorConfig {
    IntegratorConfig { rtol: s.heom.rtol, atol: s.heom.atol, ..Default::default() }
}

fn hierarchy_options(s: &Scenario) -> HierarchyOptions {
    HierarchyOptions { depth: s.heom.depth, terminator: s.heom.terminator, ..Default::default() }
}

fn fit_config(s: &Scenario) -> FitConfig {
    FitConfig { threshold: s.fit.threshold, restarts: s.fit.restarts, seed: s.seed(), ..Default::default() }
}

fn sampling(s: &Scenario) -> SamplingConfig {
    SamplingConfig { orthogonal_pure: s.blp.orthogonal_pure, pauli_delta: s.blp.pauli_delta, seed: s.seed() }
}

fn gkls_options(s: &Scenario) -> GklsOptions {
    GklsOptions { lamb_shift: s.gkls.lamb_shift, ..Default::default() }
}

fn fock_config(s: &Scenario, theta: f64) -> FockModelConfig {
    FockModelConfig {
        cutoffs: vec![s.fock.cutoff],
        excitation_cap: s.fock.excitation_cap,
        init: if theta > 0.0 { BathInit::Thermal { theta } } else { BathInit::Vacuum },
        dim_cap: s.fock.dim_cap,
        rotating_wave: s.fock.rotating_wave,
        ..Default::default()
    }
}

fn time_grid(s: &Scenario) -> (f64, f64) {
    (s.time.t_end.unwrap_or(DEFAULT_T_END), s.time.dt.unwrap_or(DEFAULT_DT))
}

fn system_hamiltonian(topology: Topology) -> CMatrix {
    match topology {
        Topology::TwoQubitSymmetric => two_qubit_hamiltonian(1.0),
        Topology::SingleQubitShorted => single_qubit_hamiltonian(1.0),
    }
}

fn continuum_model(topology: Topology, bath: DrudeLorentzBath) -> ContinuumModel {
    match topology {
        Topology::TwoQubitSymmetric => ContinuumModel::two_qubit(1.0, bath),
        Topology::SingleQubitShorted => ContinuumModel::single_qubit(1.0, bath),
    }
}

/// Exponential series of a continuum bath as configured for HEOM.
pub fn continuum_series(s: &Scenario, bath: &DrudeLorentzBath) -> Result<CorrelationSeries, CliError> {
    match s.heom.series {
        SeriesKind::Matsubara => Ok(matsubara_series(bath, s.heom.matsubara)?),
        SeriesKind::Compressed => {
            let samples = sample_continuum(bath, s.fit.window / bath.gamma)?;
            Ok(compress_series(&samples, s.heom.exponents, &fit_config(s))?)
        }
    }
}

fn parity_operator(p: Parity) -> CMatrix {
    let (lp, lm) = collective_operators();
    match p {
        Parity::Even => lp,
        Parity::Odd => lm,
        Parity::None => linalg::sigma_y(),
    }
}

/// HEOM system model for the scenario's environment.
pub fn heom_system(s: &Scenario, env: &Environment) -> Result<(SystemModel, Value), CliError> {
    let topology = s.topology();
    let h = system_hamiltonian(topology);
    match env {
        Environment::Continuum(bath) => {
            let series = continuum_series(s, bath)?;
            let info = json!({ "environment": "continuum", "bath": bath, "series": &series });
            let model = match topology {
                Topology::TwoQubitSymmetric => SystemModel::two_qubit(1.0, series.clone(), series)?,
                Topology::SingleQubitShorted => SystemModel::single_qubit(1.0, series)?,
            };
            Ok((model, info))
        }
        Environment::Discrete(modes) => {
            let theta = s.theta()?;
            let mut channels = Vec::new();
            let mut info = Vec::new();
            for (parity, sector) in sectors(modes) {
                let series = discrete_series(&sector, theta)?;
                info.push(json!({ "parity": parity, "modes": sector.modes(), "series": &series }));
                channels.push(Channel { operator: parity_operator(parity), series });
            }
            Ok((SystemModel::new(h, channels)?, json!({ "environment": "discrete", "sectors": info })))
        }
    }
}

fn require_continuum(env: &Environment, solver: &str) -> Result<DrudeLorentzBath, CliError> {
    match env {
        Environment::Continuum(b) => Ok(*b),
        Environment::Discrete(_) => Err(qline::Error::UnsupportedBath(format!(
            "{solver} needs a continuum Drude-Lorentz bath; use heom or fock for discrete modes"
        ))
        .into()),
    }
}

/// Run one solver on the scenario; returns the trajectory and a solver report.
pub fn run_solver(
    s: &Scenario,
    solver: SolverKind,
    env: &Environment,
    rho0: &CMatrix,
    t_end: f64,
    dt: f64,
) -> Result<(Trajectory, Value), CliError> {
    let topology = s.topology();
    match solver {
        SolverKind::Heom => {
            let (model, info) = heom_system(s, env)?;
            let h = build_hierarchy(&model, hierarchy_options(s))?;
            let (traj, report) = evolve(&h, rho0, t_end, dt, &integrator(s))?;
            Ok((traj, json!({ "solver": "heom", "model": info, "run": report })))
        }
        SolverKind::Gkls => {
            let bath = require_continuum(env, "gkls")?;
            let traj = gkls_secular(&continuum_model(topology, bath), &gkls_options(s), rho0, t_end, dt)?;
            Ok((traj, json!({ "solver": "gkls", "bath": bath, "options": gkls_options(s) })))
        }
        SolverKind::Tcl2 => {
            let bath = require_continuum(env, "tcl2")?;
            let model = continuum_model(topology, bath);
            let chans = tcl2_channels(&model, s.tcl2.matsubara)?;
            let traj = tcl2(&model.hamiltonian, &chans, rho0, t_end, dt, &integrator(s))?;
            Ok((traj, json!({ "solver": "tcl2", "bath": bath, "matsubara": s.tcl2.matsubara })))
        }
        SolverKind::Fock => {
            let modes = match env {
                Environment::Discrete(m) => m,
                Environment::Continuum(_) => {
                    return Err(qline::Error::UnsupportedBath(
                        "the Fock oracle needs discrete modes; give circuit parameters with environment = discrete"
                            .into(),
                    )
                    .into())
                }
            };
            let cfg = fock_config(s, s.theta()?);
            let (traj, report) = exact_fock_oracle(&system_hamiltonian(topology), &cfg, modes, rho0, t_end, dt)?;
            Ok((traj, json!({ "solver": "fock", "config": cfg, "report": report })))
        }
    }
}

fn final_checks(s: &Scenario, traj: &Trajectory, prefix: &str, checks: &mut Vec<(String, bool)>) -> Result<(), CliError> {
    checks.push((
        format!("{prefix}trace conserved to 1e-8 (max error {:.2e})", traj.diagnostics.max_trace_error),
        traj.diagnostics.max_trace_error <= 1e-8,
    ));
    for (obs, target) in &s.expect.final_values {
        let v = *traj.observable(obs)?.last().expect("non-empty trajectory");
        checks.push((format!("{prefix}final {obs} = {v:.6e} vs {target:?}"), target.accepts(v)));
    }
    Ok(())
}

fn cmd_regime(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let scales = s.require_scales()?;
    let (label, eta) = s.regime_label()?;
    let report = json!({
        "label": label,
        "omega_g_over_omega_tl": scales.omega_g / scales.omega_tl,
        "omega_q_over_omega_tl": 1.0 / scales.omega_tl,
        "margin": s.regime.margin,
        "comb_edge_slack": s.regime.comb_edge_slack,
        "eta": eta,
    });
    write_json(&out.join("regime.json"), &report)?;
    let mut checks = Vec::new();
    if let Some(expected) = s.expect.regime {
        checks.push((format!("regime {:?} (expected {expected:?})", label.kind), label.kind == expected));
    }
    Ok(Outcome {
        message: format!(
            "{:?}: omega_g/omega_TL = {:.4e}, omega_q/omega_TL = {:.4e}, margin {}",
            label.kind, label.omega_g_over_tl, label.omega_q_over_tl, label.margin
        ),
        summary: report,
        checks,
    })
}

fn cmd_modes(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let scales = s.require_scales()?;
    let (all, _) = s.mode_sets()?;
    let g2 = scales.g_factor * scales.g_factor;
    let approx = match s.topology() {
        Topology::SingleQubitShorted => Some(circuit::mode_set_single_qubit(&scales, s.modes.count, false)?),
        Topology::TwoQubitSymmetric => None,
    };
    let mut csv = String::from("n,omega_n_over_omega_g,g2_over_G2,parity,omega_n,g_n,u_n0");
    if approx.is_some() {
        csv.push_str(",omega_n_over_omega_g_approx,g2_over_G2_approx");
    }
    csv.push('\n');
    for (k, m) in all.modes().iter().enumerate() {
        let _ = write!(
            csv,
            "{},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e}",
            m.index,
            m.omega / scales.omega_g,
            (m.coupling / scales.omega_g).powi(2) / g2,
            m.parity.label(),
            m.omega,
            m.coupling,
            m.boundary_amplitude
        );
        if let Some(a) = &approx {
            let am = a.modes()[k];
            let _ = write!(csv, ",{:.12e},{:.12e}", am.omega / scales.omega_g, (am.coupling / scales.omega_g).powi(2) / g2);
        }
        csv.push('\n');
    }
    write_atomic(&out.join("modes.csv"), csv.as_bytes())?;
    let checks = vec![(
        "all couplings finite and positive".to_string(),
        all.modes().iter().all(|m| m.coupling.is_finite() && m.coupling > 0.0),
    )];
    Ok(Outcome {
        message: format!("{} modes written to modes.csv", all.len()),
        summary: json!({ "modes": all.len(), "scales": scales }),
        checks,
    })
}

fn cmd_bath(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let base = s.require_scales()?;
    let theta = s.theta()?;
    let topology = s.topology();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for &ratio in &s.bath_table.ratios {
        if !(ratio > 0.0) {
            return Err(CliError::Config("bath_table.ratios must be positive".into()));
        }
        let scales = DerivedScales::from_frequencies(1.0, ratio * base.omega_g, base.omega_g, base.g_factor)?;
        let bath = bath_from_circuit(&scales, topology, theta)?.bath;
        let modes = match topology {
            Topology::TwoQubitSymmetric => circuit::mode_set_two_qubit(&scales, s.bath_table.modes)?,
            Topology::SingleQubitShorted => circuit::mode_set_single_qubit(&scales, s.bath_table.modes, true)?,
        };
        let sector = match topology {
            Topology::TwoQubitSymmetric => Parity::Even,
            Topology::SingleQubitShorted => Parity::None,
        };
        let sec: ModeSet = if sector == Parity::None { modes.clone() } else { modes.sector(sector)? };
        let report = consistency_report(&modes, &bath, sector, scales.omega_tl)?;
        let revival = report.revival_time;
        let tau_max = (1.2 * revival).max(3.0 / bath.gamma);
        let n = s.bath_table.points.max(2);
        let mut taus: Vec<f64> = (0..n).map(|i| tau_max * i as f64 / (n - 1) as f64).collect();
        if revival <= tau_max {
            taus.push(revival);
            taus.sort_by(|a, b| a.total_cmp(b));
            taus.dedup();
        }
        let mut csv = String::from("tau,re_C,im_C,re_C_discrete,im_C_discrete,re_err,im_err,flag\n");
        let mut im_dev: f64 = 0.0;
        for &tau in &taus {
            let disc = correlation_discrete(&sec, theta, tau);
            let (cont, flag) = match correlation_continuum(&bath, tau, CorrelationMethod::MatsubaraClosedForm) {
                Ok(c) => (Some(c), if tau == revival { "revival" } else { "" }),
                Err(qline::Error::Divergence(_)) => (None, "divergent"),
                Err(e) => return Err(e.into()),
            };
            let im_c = cont.map(|c| c.im).unwrap_or_else(|| correlation_imag_exact(&bath, tau));
            im_dev = im_dev.max((im_c - correlation_imag_exact(&bath, tau)).abs());
            let _ = writeln!(
                csv,
                "{tau:.12e},{},{im_c:.12e},{:.12e},{:.12e},{},{:.12e},{flag}",
                fmt_or_nan(cont.map(|c| c.re)),
                disc.re,
                disc.im,
                fmt_or_nan(cont.map(|c| disc.re - c.re)),
                disc.im - im_c,
            );
        }
        write_atomic(&out.join(format!("bath_ratio_{ratio}.csv")), csv.as_bytes())?;
        let c0 = correlation_discrete(&sec, theta, 0.0);
        let revival_error = (correlation_discrete(&sec, theta, revival) - c0).norm() / c0.norm();
        checks.push((format!("ratio {ratio}: discrete revival at 2 pi / spacing (rel. error {revival_error:.1e})"), revival_error < 1e-9));
        checks.push((format!("ratio {ratio}: Im C = -lambda gamma exp(-gamma tau) (max dev {im_dev:.1e})"), im_dev < 1e-12));
        reports.push(json!({
            "omega_tl_over_omega_g": ratio,
            "bath": bath,
            "consistency": report,
            "revival_relative_error": revival_error,
        }));
    }
    let summary = json!({ "theta": theta, "ratios": reports });
    write_json(&out.join("bath.json"), &summary)?;
    Ok(Outcome { message: format!("{} correlation tables written", s.bath_table.ratios.len()), summary, checks })
}

fn cmd_fit(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let bath = s.continuum_bath()?;
    let samples = sample_continuum(&bath, s.fit.window / bath.gamma)?;
    let series = compress_series(&samples, s.heom.exponents, &fit_config(s))?;
    let mut csv = String::from("t,re_C,im_C,re_fit,im_fit\n");
    for (t, c) in &samples {
        let f = series.eval(*t);
        let _ = writeln!(csv, "{t:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", c.re, c.im, f.re, f.im);
    }
    write_atomic(&out.join("fit.csv"), csv.as_bytes())?;
    write_json(&out.join("fit.json"), &series)?;
    let residual = series.residual.unwrap_or(f64::NAN);
    Ok(Outcome {
        message: format!("K = {} fit, relative residual {residual:.3e}", series.len()),
        summary: json!({ "bath": bath, "series": series }),
        checks: vec![(format!("residual {residual:.2e} <= {:.1e}", s.fit.threshold), residual <= s.fit.threshold)],
    })
}

fn cmd_simulate(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let env = s.environment()?;
    let rho0 = s.initial_state()?;
    let (t_end, dt) = time_grid(s);
    let (traj, report) = run_solver(s, s.solver, &env, &rho0, t_end, dt)?;
    let obs = s.observables();
    let names: Vec<&str> = obs.iter().map(String::as_str).collect();
    write_atomic(&out.join("trajectory.csv"), traj.to_csv(&names, s.write_rho)?.as_bytes())?;
    let mut checks = Vec::new();
    final_checks(s, &traj, "", &mut checks)?;
    Ok(Outcome {
        message: format!("{} points written to trajectory.csv ({:?})", traj.len(), s.solver),
        summary: json!({ "report": report, "diagnostics": traj.diagnostics }),
        checks,
    })
}

fn cmd_compare(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let env = s.environment()?;
    let rho0 = s.initial_state()?;
    let (t_end, dt) = time_grid(s);
    let solvers = [SolverKind::Heom, SolverKind::Gkls, SolverKind::Tcl2];
    let mut trajs = Vec::new();
    let mut reports = Vec::new();
    for solver in solvers {
        let (traj, report) = run_solver(s, solver, &env, &rho0, t_end, dt)?;
        trajs.push(traj);
        reports.push(report);
    }
    if trajs.iter().any(|t| t.times != trajs[0].times) {
        return Err(qline::Error::MisalignedGrids.into());
    }
    let obs = s.observables();
    let columns: Vec<Vec<Vec<f64>>> = trajs
        .iter()
        .map(|t| obs.iter().map(|o| t.observable(o)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("t");
    for o in &obs {
        for t in &trajs {
            let _ = write!(csv, ",{}_{o}", t.solver);
        }
    }
    csv.push('\n');
    for (i, t) in trajs[0].times.iter().enumerate() {
        let _ = write!(csv, "{t:.10e}");
        for k in 0..obs.len() {
            for col in &columns {
                let _ = write!(csv, ",{:.12e}", col[k][i]);
            }
        }
        csv.push('\n');
    }
    write_atomic(&out.join("compare.csv"), csv.as_bytes())?;
    let mut checks = Vec::new();
    for t in &trajs {
        final_checks(s, t, &format!("{}: ", t.solver), &mut checks)?;
    }
    let mut pairwise = 0.0f64;
    for k in 0..obs.len() {
        let finals: Vec<f64> = columns.iter().map(|c| *c[k].last().expect("non-empty")).collect();
        for a in 0..finals.len() {
            for b in a + 1..finals.len() {
                pairwise = pairwise.max((finals[a] - finals[b]).abs());
            }
        }
    }
    if let Some(tol) = s.expect.pairwise_final {
        checks.push((format!("pairwise final-time difference {pairwise:.3e} <= {tol:.1e}"), pairwise <= tol));
    }
    Ok(Outcome {
        message: format!("HEOM/GKLS/TCL2 written to compare.csv; largest final-time difference {pairwise:.3e}"),
        summary: json!({ "reports": reports, "pairwise_final_difference": pairwise }),
        checks,
    })
}

fn dynamical_map(s: &Scenario, env: &Environment, t_end: f64, dt: f64) -> Result<DynamicalMap, CliError> {
    match s.blp.engine {
        BlpEngine::Heom => {
            let (model, _) = heom_system(s, env)?;
            let h = build_hierarchy(&model, hierarchy_options(s))?;
            Ok(heom_map(&h, t_end, dt, &integrator(s))?)
        }
        BlpEngine::Gkls => {
            let bath = require_continuum(env, "gkls")?;
            let gen = gkls_generator(&continuum_model(s.topology(), bath), &gkls_options(s))?;
            Ok(gkls_map(&gen, t_end, dt)?)
        }
    }
}

fn blp_json(r: &BlpResult) -> Value {
    json!({
        "value": r.value,
        "sample_count": r.sample_count,
        "seed": r.seed,
        "best_pair": {
            "kind": r.best_pair.kind,
            "rho1": flat_complex(&r.best_pair.rho1),
            "rho2": flat_complex(&r.best_pair.rho2),
        },
        "per_sample": r.per_sample,
    })
}

fn cmd_blp(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let env = s.environment()?;
    let (t_end, dt) = time_grid(s);
    let map = dynamical_map(s, &env, t_end, dt)?;
    let result = blp_measure(&map, &sampling(s))?;
    let report = blp_json(&result);
    write_json(&out.join("blp.json"), &report)?;
    let mut checks = Vec::new();
    if let Some(target) = s.expect.blp {
        checks.push((format!("N = {:.4e} vs {target:?}", result.value), target.accepts(result.value)));
    }
    Ok(Outcome {
        message: format!("N = {:.6e} over {} pairs", result.value, result.sample_count),
        summary: json!({ "value": result.value, "sample_count": result.sample_count }),
        checks,
    })
}

fn point_path(dir: &Path, row: usize, col: usize) -> PathBuf {
    dir.join(format!("r{row:03}_c{col:03}.json"))
}

fn cmd_blp_map(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let base = s.bath.ok_or_else(|| CliError::Config("blp-map needs a direct `bath` (its lambda is kept)".into()))?;
    let (gammas, thetas) = (&s.map.gammas, &s.map.thetas);
    if gammas.is_empty() || thetas.is_empty() {
        return Err(CliError::Config("map.gammas and map.thetas must be non-empty".into()));
    }
    let (t_end, dt) = time_grid(s);
    let points = out.join("points");
    fs::create_dir_all(&points)?;
    // resume from per-point files of an earlier run with the same lattice
    let mut done = Vec::new();
    for (r, &theta) in thetas.iter().enumerate() {
        for (c, &gamma) in gammas.iter().enumerate() {
            let Ok(text) = fs::read_to_string(point_path(&points, r, c)) else { continue };
            let Ok(v) = serde_json::from_str::<Value>(&text) else { continue };
            if v["gamma"].as_f64() == Some(gamma) && v["theta"].as_f64() == Some(theta) {
                if let Some(x) = v["value"].as_f64() {
                    done.push((r, c, x));
                }
            }
        }
    }
    let resumed = done.len();
    let with_locus = s.map.locus.unwrap_or(s.topology() == Topology::SingleQubitShorted);
    let point = |gamma: f64, theta: f64| -> qline::Result<f64> {
        let bath = DrudeLorentzBath::new(base.lambda, gamma, theta)?;
        let map = dynamical_map(s, &Environment::Continuum(bath), t_end, dt).map_err(|e| match e {
            CliError::Numerical { source, .. } => source,
            other => qline::Error::Domain(other.to_string()),
        })?;
        Ok(blp_measure(&map, &sampling(s))?.value)
    };
    let on_point = |r: usize, c: usize, res: &qline::Result<f64>| {
        let v = match res {
            Ok(x) => json!({ "gamma": gammas[c], "theta": thetas[r], "value": x }),
            Err(e) => json!({ "gamma": gammas[c], "theta": thetas[r], "error": e.to_string() }),
        };
        if let Err(e) = write_json(&point_path(&points, r, c), &v) {
            eprintln!("warning: could not checkpoint point ({r}, {c}): {e}");
        }
    };
    let map = blp_map(gammas, thetas, with_locus, &done, point, on_point);
    write_atomic(&out.join("blp_map.csv"), map.to_csv().as_bytes())?;
    write_json(&out.join("blp_map.json"), &map)?;
    let failed = map.failures.len();
    for (r, c, e) in &map.failures {
        eprintln!("warning: point gamma = {}, theta = {} failed: {e}", gammas[*c], thetas[*r]);
    }
    Ok(Outcome {
        message: format!(
            "{} x {} map written to blp_map.csv ({resumed} resumed, {failed} failed)",
            thetas.len(),
            gammas.len()
        ),
        summary: json!({ "resumed": resumed, "failures": map.failures }),
        checks: vec![(format!("{failed} failed map points"), failed == 0)],
    })
}

fn cmd_rabi(s: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    let modes = match s.environment()? {
        Environment::Discrete(m) => m,
        Environment::Continuum(_) => {
            return Err(CliError::Config("rabi needs discrete modes (circuit parameters, environment = discrete)".into()))
        }
    };
    if !matches!(s.solver, SolverKind::Heom | SolverKind::Fock) {
        return Err(CliError::Config("rabi runs with solver heom or fock".into()));
    }
    let two_qubit = s.topology() == Topology::TwoQubitSymmetric;
    let nearest = modes
        .modes()
        .iter()
        .min_by(|a, b| (a.omega - 1.0).abs().total_cmp(&(b.omega - 1.0).abs()))
        .copied()
        .expect("non-empty mode set");
    // the bright state couples with sqrt(2) g; one qubit oscillates in
    // population at twice its coupling
    let bare = if two_qubit { 2f64.sqrt() * nearest.coupling } else { 2.0 * nearest.coupling };
    let t_end = s.time.t_end.unwrap_or_else(|| rabi_window(nearest.coupling));
    let dt = s.time.dt.unwrap_or(t_end / s.rabi.samples.max(16) as f64);
    let rho0 = s.initial_state()?;
    let (traj, report) = run_solver(s, s.solver, &Environment::Discrete(modes), &rho0, t_end, dt)?;
    let observable = if s.rabi.observable.is_empty() {
        if two_qubit { "rho_10_10".to_string() } else { "rho_1_1".to_string() }
    } else {
        s.rabi.observable.clone()
    };
    let signal = traj.observable(&observable)?;
    let excursion = signal.iter().map(|p| (p - signal[0]).abs()).fold(0.0, f64::max);
    let obs_names = [observable.as_str()];
    write_atomic(&out.join("rabi_trajectory.csv"), traj.to_csv(&obs_names, false)?.as_bytes())?;
    let (estimate, note) = match extract_rabi_frequency(&traj, &observable, s.rabi.min_amplitude) {
        Ok(e) => (Some(e), None),
        Err(qline::Error::NoOscillation(msg)) => (None, Some(msg)),
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "observable": observable,
        "mode": nearest,
        "bare_omega": bare,
        "estimate": estimate,
        "no_oscillation": note,
        "max_excursion": excursion,
        "t_end": t_end,
        "dt": dt,
        "report": report,
    });
    write_json(&out.join("rabi.json"), &summary)?;
    let mut checks = Vec::new();
    if let Some(target) = s.expect.rabi_omega {
        let got = estimate.map(|e| e.omega).unwrap_or(f64::NAN);
        checks.push((format!("Omega_R = {got:.4e} vs {target:?}"), target.accepts(got)));
    }
    let message = match estimate {
        Some(e) => format!("Omega_R = {:.6e} (bare {bare:.6e}), max excursion {excursion:.3e}", e.omega),
        None => format!("no oscillation ({}); bare {bare:.6e}, max excursion {excursion:.3e}", note.unwrap_or_default()),
    };
    Ok(Outcome { message, summary, checks })
}
