//! Executes scenarios and renders their artifacts in memory; nothing touches
//! the filesystem until a run has completed.

use std::fmt::Write as _;

use fpsteer::control::{
    drift_growth_audit, drift_sup_norm, gradient_log_drift, steer, SteerOutcome,
};
use fpsteer::convergence::{self, min_order, self_convergence};
use fpsteer::diagnostics::fitted_decay;
use fpsteer::grid::{l2_distance, mass};
use fpsteer::particles::{consistency_error, histogram_counts, simulate};
use fpsteer::pde::{solve, DriftField, Trajectory};
use fpsteer::spectral::{reciprocal, spectral_gap, spectrum, stabilizer_gap};
use fpsteer::{Execution, Grid, GridFunction};
use serde::Serialize;

use crate::error::CliResult;
use crate::scenario::{DriftKind, Mode, Scenario};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Audit {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn at_most(name: &'static str, value: f64, threshold: f64) -> Audit {
    Audit {
        name,
        value,
        threshold,
        pass: value <= threshold,
    }
}

fn at_least(name: &'static str, value: f64, threshold: f64) -> Audit {
    Audit {
        name,
        value,
        threshold,
        pass: value >= threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteerMetrics {
    pub alpha: f64,
    pub epsilon: f64,
    pub m_stop: usize,
    pub schedule_end_error: f64,
    pub floor_activations: usize,
    pub interval_sup: Vec<f64>,
    pub envelope: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotMetrics {
    pub t: f64,
    pub l1_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub schema: u32,
    pub name: String,
    pub mode: Mode,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub terminal_l2_error: Option<f64>,
    pub relative_terminal_error: Option<f64>,
    pub drift_sup_norm: Option<f64>,
    pub min_density: Option<f64>,
    pub mass_drift: Option<f64>,
    pub fitted_rate: Option<f64>,
    /// Gap of `(a y)_xx` with `a = 1/f`.
    pub spectral_gap: f64,
    /// Gap of the generator `y_xx - ((f_x / f) y)_x`.
    pub stabilizer_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steer: Option<SteerMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_max_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<SnapshotMetrics>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Vec<convergence::ConvergenceRow>>,
    pub audits: Vec<Audit>,
    pub pass: bool,
}

/// Everything a run produces.
pub struct Outcome {
    pub metrics: Metrics,
    pub files: Vec<(&'static str, Vec<u8>)>,
    pub stdout: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.metrics.pass
    }
}

fn base_metrics(s: &Scenario, mode: Mode, f: &GridFunction) -> CliResult<Metrics> {
    Ok(Metrics {
        schema: SCHEMA,
        name: s.name.clone(),
        mode,
        n: s.n,
        horizon: s.horizon,
        dt: s.dt,
        terminal_l2_error: None,
        relative_terminal_error: None,
        drift_sup_norm: None,
        min_density: None,
        mass_drift: None,
        fitted_rate: None,
        spectral_gap: spectral_gap(&reciprocal(f)?)?,
        stabilizer_gap: stabilizer_gap(f)?,
        steer: None,
        replay_max_l2: None,
        particles: None,
        convergence: None,
        audits: Vec::new(),
        pass: false,
    })
}

fn mass_drift(traj: &Trajectory) -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for s in &traj.states {
        worst = worst.max((mass(s)? - 1.0).abs());
    }
    Ok(worst)
}

fn trajectory_metrics(
    m: &mut Metrics,
    s: &Scenario,
    traj: &Trajectory,
    y0: &GridFunction,
    f: &GridFunction,
) -> CliResult<()> {
    let terminal = l2_distance(traj.final_state(), f)?;
    let drift = mass_drift(traj)?;
    m.terminal_l2_error = Some(terminal);
    m.relative_terminal_error = Some(terminal / fpsteer::grid::norm(f, &fpsteer::NormKind::L2)?);
    m.drift_sup_norm = Some(drift_sup_norm(&traj.drift_log));
    m.min_density = Some(traj.min_density());
    m.mass_drift = Some(drift);
    m.audits
        .push(at_most("mass_conservation", drift, s.tolerances.mass));
    m.audits
        .push(at_least("nonnegativity", traj.min_density(), 0.0));
    if y0.min() > 0.0 {
        m.audits.push(Audit {
            name: "positivity",
            value: traj.min_density(),
            threshold: 0.0,
            pass: traj.min_density() > 0.0,
        });
    }
    Ok(())
}

fn trajectory_csv(s: &Scenario, traj: &Trajectory) -> Vec<u8> {
    let stride = s
        .trajectory_stride
        .unwrap_or_else(|| traj.states.len().div_ceil(100));
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, stride).expect("in-memory write");
    buf
}

fn drift_csv(drift: &DriftField) -> Vec<u8> {
    let mut buf = Vec::new();
    drift.write_csv(&mut buf).expect("in-memory write");
    buf
}

fn finish(
    mut metrics: Metrics,
    files: Vec<(&'static str, Vec<u8>)>,
    stdout: Vec<String>,
) -> Outcome {
    metrics.pass = metrics.audits.iter().all(|a| a.pass);
    Outcome {
        metrics,
        files,
        stdout,
    }
}

fn stabilize(s: &Scenario) -> CliResult<Outcome> {
    let grid = s.grid();
    let (y0, f) = (s.initial(grid)?, s.target(grid)?);
    let drift = DriftField::constant(gradient_log_drift(&f)?, 0.0, s.horizon)?;
    let traj = solve(&y0, &drift, s.horizon, s.dt, s.scheme)?;
    let mut m = base_metrics(s, Mode::Stabilize, &f)?;
    trajectory_metrics(&mut m, s, &traj, &y0, &f)?;
    // Rates are only meaningful while the error is well above round-off.
    if l2_distance(&y0, &f)? > 1e-8 {
        if let Ok(fit) = fitted_decay(&traj, &f, s.horizon / 6.0, 5.0 * s.horizon / 6.0) {
            let rate = -fit.slope;
            m.fitted_rate = Some(rate);
            let mismatch = (rate - m.stabilizer_gap).abs() / m.stabilizer_gap;
            m.audits
                .push(at_most("decay_rate", mismatch, s.tolerances.rate));
        }
    }
    let files = vec![
        ("trajectory.csv", trajectory_csv(s, &traj)),
        ("drift.csv", drift_csv(&drift)),
    ];
    Ok(finish(m, files, Vec::new()))
}

fn run_steer(s: &Scenario) -> CliResult<(SteerOutcome, GridFunction, GridFunction)> {
    let grid = s.grid();
    let (y0, f) = (s.initial(grid)?, s.target(grid)?);
    let out = steer(&y0, &f, s.horizon, &s.steer)?;
    Ok((out, y0, f))
}

fn steer_metrics(m: &mut Metrics, s: &Scenario, out: &SteerOutcome) {
    let r = &out.report;
    m.steer = Some(SteerMetrics {
        alpha: r.alpha,
        epsilon: r.schedule.epsilon,
        m_stop: r.stopped_at,
        schedule_end_error: *r.interval_errors.last().expect("at least phase 2"),
        floor_activations: r.floor_activations,
        interval_sup: r.interval_sup.clone(),
        envelope: r.envelope.clone(),
    });
    let growth = drift_growth_audit(&r.interval_sup, 5);
    m.audits.push(Audit {
        name: "drift_bounded",
        value: growth.growth_ratio,
        threshold: 1.0 + fpsteer::control::GROWTH_TOLERANCE,
        pass: growth.bounded,
    });
    m.audits.push(at_most(
        "floor_activations",
        r.floor_activations as f64,
        0.0,
    ));
    m.audits.push(at_most(
        "terminal_error",
        r.relative_terminal_error,
        s.tolerances.terminal,
    ));
}

fn steer_mode(s: &Scenario) -> CliResult<Outcome> {
    let (out, y0, f) = run_steer(s)?;
    let mut m = base_metrics(s, Mode::Steer, &f)?;
    trajectory_metrics(&mut m, s, &out.trajectory, &y0, &f)?;
    steer_metrics(&mut m, s, &out);
    let files = vec![
        ("trajectory.csv", trajectory_csv(s, &out.trajectory)),
        ("drift.csv", drift_csv(&out.drift)),
    ];
    Ok(finish(m, files, Vec::new()))
}

fn replay_mode(s: &Scenario) -> CliResult<Outcome> {
    let (out, y0, f) = run_steer(s)?;
    let replayed = solve(&y0, &out.drift, s.horizon, s.steer.dt, s.steer.scheme)?;
    let mut csv = String::from("t,l2_difference\n");
    let mut worst: f64 = 0.0;
    let mut unmatched = 0usize;
    for (t, y) in out.trajectory.times.iter().zip(&out.trajectory.states) {
        match replayed.state_at(*t) {
            Some(r) => {
                let d = l2_distance(r, y)?;
                worst = worst.max(d);
                writeln!(csv, "{t:.16e},{d:.16e}").expect("string write");
            }
            None => unmatched += 1,
        }
    }
    let mut m = base_metrics(s, Mode::Replay, &f)?;
    trajectory_metrics(&mut m, s, &replayed, &y0, &f)?;
    m.replay_max_l2 = Some(worst);
    m.audits
        .push(at_most("replay_difference", worst, s.tolerances.replay));
    m.audits
        .push(at_most("replay_unmatched_times", unmatched as f64, 0.0));
    let files = vec![
        ("trajectory.csv", trajectory_csv(s, &replayed)),
        ("drift.csv", drift_csv(&out.drift)),
        ("replay.csv", csv.into_bytes()),
    ];
    Ok(finish(m, files, Vec::new()))
}

fn spectrum_mode(s: &Scenario) -> CliResult<Outcome> {
    let grid = s.grid();
    let f = s.target(grid)?;
    let report = spectrum(&reciprocal(&f)?, s.spectrum_k)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, e) in report.eigenvalues.iter().enumerate() {
        writeln!(csv, "{i},{e:.16e}").expect("string write");
    }
    let mut m = base_metrics(s, Mode::Spectrum, &f)?;
    let principal = report.eigenvalues[0];
    m.audits.push(at_most(
        "principal_eigenvalue",
        principal.abs(),
        1e-8 * report.eigenvalues.last().map_or(1.0, |e| e.abs().max(1.0)),
    ));
    m.audits.push(Audit {
        name: "positive_gap",
        value: report.gap,
        threshold: 0.0,
        pass: report.gap > 0.0,
    });
    let stdout = vec![format!(
        "spectral gap {:.12e} (stabilized generator {:.12e})",
        m.spectral_gap, m.stabilizer_gap
    )];
    Ok(finish(m, vec![("spectrum.csv", csv.into_bytes())], stdout))
}

/// Drift held over `[0, end]`, split at every snapshot so the PDE lands on them.
fn split_drift(sample: GridFunction, end: f64, snapshots: &[f64]) -> CliResult<DriftField> {
    let mut breaks = vec![0.0];
    for &t in snapshots {
        if t > *breaks.last().expect("non-empty") && t < end {
            breaks.push(t);
        }
    }
    breaks.push(end);
    let samples = vec![sample; breaks.len() - 1];
    Ok(DriftField::new(breaks, samples)?)
}

fn particles_mode(s: &Scenario) -> CliResult<Outcome> {
    let grid = s.grid();
    let (y0, f) = (s.initial(grid)?, s.target(grid)?);
    let p = &s.particles;
    let end = *p.snapshots.last().expect("validated");
    let end = if end > 0.0 { end } else { s.horizon };
    let drift = split_drift(gradient_log_drift(&f)?, end, &p.snapshots)?;
    let reference = solve(&y0, &drift, end, s.dt, s.scheme)?;
    let ensembles = simulate(
        &y0,
        p.count,
        &drift,
        p.dt.unwrap_or(s.dt),
        &p.snapshots,
        p.seed,
        Execution::default(),
    )?;

    let bins_grid: Grid = fpsteer::uniform_grid(p.bins)?;
    let mut csv = String::from("t,x,count,density\n");
    let mut snapshots = Vec::new();
    let mut m = base_metrics(s, Mode::Particles, &f)?;
    for ens in &ensembles {
        let counts = histogram_counts(ens, p.bins)?;
        let scale = 1.0 / (ens.len() as f64 * bins_grid.h());
        for (i, c) in counts.iter().enumerate() {
            writeln!(
                csv,
                "{:.16e},{:.16e},{c},{:.16e}",
                ens.time,
                bins_grid.center(i),
                *c as f64 * scale
            )
            .expect("string write");
        }
        let pde = reference
            .state_at(ens.time)
            .expect("snapshots are breakpoints")
            .coarsen(p.bins)?;
        let l1 = consistency_error(ens, &pde)?;
        snapshots.push(SnapshotMetrics {
            t: ens.time,
            l1_error: l1,
        });
        m.audits
            .push(at_most("particle_l1", l1, s.tolerances.particle_l1));
    }
    m.particles = Some(snapshots);
    m.min_density = Some(reference.min_density());
    m.mass_drift = Some(mass_drift(&reference)?);
    Ok(finish(
        m,
        vec![("particles.csv", csv.into_bytes())],
        Vec::new(),
    ))
}

fn convergence_mode(s: &Scenario) -> CliResult<Outcome> {
    let (y0_spec, f_spec, kind, horizon) = (s.y0_spec, s.f_spec, s.convergence_drift, s.horizon);
    let setup = move |grid: Grid| -> fpsteer::Result<(GridFunction, DriftField)> {
        let y0 = fpsteer::grid::normalize(&fpsteer::grid::project(&y0_spec, grid))?;
        let sample = match kind {
            DriftKind::Zero => GridFunction::zero_edges(grid),
            DriftKind::Stabilizer => gradient_log_drift(&fpsteer::grid::normalize(
                &fpsteer::grid::project(&f_spec, grid),
            )?)?,
        };
        Ok((y0, DriftField::constant(sample, 0.0, horizon)?))
    };
    let rows = self_convergence(&s.levels, s.horizon, s.scheme, setup, Execution::default())?;
    let mut buf = Vec::new();
    convergence::write_csv(&rows, &mut buf).expect("in-memory write");
    let f = s.target(s.grid())?;
    let mut m = base_metrics(s, Mode::Convergence, &f)?;
    let finest = rows.last().map_or(f64::NAN, |r| r.l2_error);
    // Exact reproduction (differences at round-off) has no meaningful order.
    if finest > 1e-12 {
        m.audits.push(at_least(
            "convergence_order",
            min_order(&rows).unwrap_or(f64::NAN),
            s.tolerances.min_order,
        ));
    }
    m.convergence = Some(rows);
    Ok(finish(m, vec![("convergence.csv", buf)], Vec::new()))
}

pub fn execute(s: &Scenario, mode: Mode) -> CliResult<Outcome> {
    s.check_mode(mode)?;
    match mode {
        Mode::Stabilize => stabilize(s),
        Mode::Steer => steer_mode(s),
        Mode::Replay => replay_mode(s),
        Mode::Spectrum => spectrum_mode(s),
        Mode::Particles => particles_mode(s),
        Mode::Convergence => convergence_mode(s),
    }
}

/// Plain-text digest of the metrics.
pub fn summary(m: &Metrics) -> String {
    let mut out = String::new();
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
    writeln!(
        out,
        "scenario {} ({:?}), n = {}, T = {}, dt = {}",
        m.name, m.mode, m.n, m.horizon, m.dt
    )
    .unwrap();
    writeln!(out, "terminal L2 error      {}", opt(m.terminal_l2_error)).unwrap();
    writeln!(
        out,
        "relative terminal err  {}",
        opt(m.relative_terminal_error)
    )
    .unwrap();
    writeln!(out, "drift sup norm         {}", opt(m.drift_sup_norm)).unwrap();
    writeln!(out, "min density            {}", opt(m.min_density)).unwrap();
    writeln!(out, "mass drift             {}", opt(m.mass_drift)).unwrap();
    writeln!(out, "fitted decay rate      {}", opt(m.fitted_rate)).unwrap();
    writeln!(out, "spectral gap           {:.6e}", m.spectral_gap).unwrap();
    writeln!(out, "stabilizer gap         {:.6e}", m.stabilizer_gap).unwrap();
    if let Some(st) = &m.steer {
        writeln!(out, "alpha                  {:.6e}", st.alpha).unwrap();
        writeln!(
            out,
            "schedule end error     {:.6e} (m = {})",
            st.schedule_end_error, st.m_stop
        )
        .unwrap();
    }
    if let Some(d) = m.replay_max_l2 {
        writeln!(out, "replay max L2          {d:.6e}").unwrap();
    }
    for a in &m.audits {
        let tag = if a.pass { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{tag} {} = {:.6e} (threshold {:.6e})",
            a.name, a.value, a.threshold
        )
        .unwrap();
    }
    writeln!(
        out,
        "{}",
        if m.pass {
            "all audits passed"
        } else {
            "audit failure"
        }
    )
    .unwrap();
    out
}
