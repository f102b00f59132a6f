//! Drift synthesis: the static stabilizer `v = f_x / f` and the three-phase
//! finite-time steering controller.
//!
//! Steering on `[0, T]` with `0 < ε < T`:
//!
//! 1. `[0, ε/2]`: `v = 0`, so the density diffuses and becomes strictly positive;
//! 2. `(ε/2, ε]`: `v = f_x / f`, which smooths the state into the domain of the
//!    closed-loop operator;
//! 3. `(ε, T)`: the horizon is split at `a_m = ε + s Σ_{n≤m} 1/n²` with
//!    `s = 6 (T - ε) / π²`. On interval `m` the feedback
//!    `v = y_x / y - g_m (a y)_x / y` (with `a = 1/f`, `g_m = α m / s`) turns the
//!    dynamics into `y_t = g_m (a y)_xx`, which contracts `‖y - f‖` by
//!    `exp(-α λ / m)`. Since `Σ 1/m` diverges while `Σ 1/m²` converges, the state
//!    reaches `f` at `T`; `α ≥ 1/λ` keeps the drift bounded.
//!
//! Phase 3 is integrated in its closed-loop form; the drift is recorded at every
//! step so the run can be replayed through the general solver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, l2_distance, mass, norm, GridFunction, NormKind, Placement};
use crate::par::Execution;
use crate::pde::{self, DriftField, Scheme, Trajectory};
use crate::spectral::{assemble_weighted_operator, reciprocal, spectral_gap};

/// `e^{-γ}` for the Euler-Mascheroni constant `γ`.
pub const EXP_NEG_EULER_GAMMA: f64 = 0.561_459_483_566_885_2;

/// Edge values `(ln f_{i+1} - ln f_i) / h`; boundary edges are 0.
pub fn gradient_log_drift(f: &GridFunction) -> Result<GridFunction> {
    f.require(Placement::Cell)?;
    let fmin = f.min();
    if !(fmin > 0.0) {
        return Err(Error::NonPositiveWeight(fmin));
    }
    let grid = f.grid();
    let h = grid.h();
    let mut v = Vec::with_capacity(grid.n() + 1);
    v.push(0.0);
    v.extend(f.values().windows(2).map(|w| (w[1].ln() - w[0].ln()) / h));
    v.push(0.0);
    GridFunction::edges(grid, v)
}

/// Partition of the steering phase and the gain on each interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSchedule {
    pub epsilon: f64,
    pub horizon: f64,
    pub alpha: f64,
    /// `a_0 = ε, a_1, ..., a_{m_max}`.
    pub breakpoints: Vec<f64>,
    /// `gains[m - 1]` is active on `[a_{m-1}, a_m)`.
    pub gains: Vec<f64>,
}

impl ControlSchedule {
    pub fn m_max(&self) -> usize {
        self.gains.len()
    }

    /// `6 (T - ε) / π²`: maps the unit-sum partition `Σ 1/n² = π²/6` onto `(ε, T)`.
    pub fn time_scale(&self) -> f64 {
        time_scale(self.horizon, self.epsilon)
    }

    /// `[a_{m-1}, a_m)` for `m` in `1..=m_max`.
    pub fn interval(&self, m: usize) -> (f64, f64) {
        (self.breakpoints[m - 1], self.breakpoints[m])
    }

    pub fn gain(&self, m: usize) -> f64 {
        self.gains[m - 1]
    }
}

fn time_scale(horizon: f64, epsilon: f64) -> f64 {
    6.0 * (horizon - epsilon) / (PI * PI)
}

pub fn steering_schedule(
    horizon: f64,
    epsilon: f64,
    alpha: f64,
    m_max: usize,
) -> Result<ControlSchedule> {
    if !(epsilon > 0.0 && epsilon < horizon) {
        return Err(Error::Schedule(format!(
            "need 0 < epsilon < T, got epsilon = {epsilon}, T = {horizon}"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::Schedule(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if m_max < 1 {
        return Err(Error::Schedule("m_max must be at least 1".into()));
    }
    let scale = time_scale(horizon, epsilon);
    let mut breakpoints = Vec::with_capacity(m_max + 1);
    breakpoints.push(epsilon);
    let mut partial = 0.0;
    for m in 1..=m_max {
        partial += 1.0 / (m * m) as f64;
        breakpoints.push(epsilon + scale * partial);
    }
    let gains = (1..=m_max).map(|m| alpha * m as f64 / scale).collect();
    Ok(ControlSchedule {
        epsilon,
        horizon,
        alpha,
        breakpoints,
        gains,
    })
}

/// Logarithmic mean `(q - p) / (ln q - ln p)`; 0 unless both are positive.
fn log_mean(p: f64, q: f64) -> f64 {
    if !(p > 0.0 && q > 0.0) {
        return 0.0;
    }
    let r = q / p - 1.0;
    if r.abs() < 1e-4 {
        // series of r / ln(1 + r)
        p * (1.0 + r / 2.0 - r * r / 12.0 + r * r * r / 24.0)
    } else {
        (q - p) / (q.ln() - p.ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDrift {
    pub drift: GridFunction,
    /// Set when the division floor replaced the edge density somewhere.
    pub floor_active: bool,
}

/// Feedback `v = (y_x - gain (a y)_x) / ŷ` on interior edges, `a = 1/f`.
///
/// `ŷ` is the logarithmic mean of the two adjacent cells, floored at
/// `floor_delta`. With that mean `y_x / ŷ` is exactly the log-ratio of `y`, so at
/// `y = f` the feedback coincides with [`gradient_log_drift`].
pub fn feedback_drift(
    y: &GridFunction,
    f: &GridFunction,
    gain: f64,
    floor_delta: f64,
) -> Result<FeedbackDrift> {
    y.check_compatible(f)?;
    y.require(Placement::Cell)?;
    let a = reciprocal(f)?;
    let grid = y.grid();
    let n = grid.n();
    let h = grid.h();
    let (yv, av) = (y.values(), a.values());
    let mut v = vec![0.0; n + 1];
    let mut floor_active = false;
    for e in 1..n {
        let (y0, y1) = (yv[e - 1], yv[e]);
        let weighted_slope = (av[e] * y1 - av[e - 1] * y0) / h;
        let mean = log_mean(y0, y1);
        v[e] = if mean >= floor_delta {
            (y1.ln() - y0.ln()) / h - gain * weighted_slope / mean
        } else {
            floor_active = true;
            ((y1 - y0) / h - gain * weighted_slope) / floor_delta
        };
    }
    Ok(FeedbackDrift {
        drift: GridFunction::edges(grid, v)?,
        floor_active,
    })
}

/// Tunables of [`steer`]; these are the scenario-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteerConfig {
    /// End of the smoothing phases; `None` means `T / 10`.
    pub epsilon: Option<f64>,
    /// `α = alpha_safety / λ`. Values below 1 are accepted for falsification runs.
    pub alpha_safety: f64,
    pub m_max: usize,
    /// Stop the schedule early once `‖y - f‖₂` drops below this.
    pub tol_terminal: f64,
    pub floor_delta: f64,
    /// Scheme outside the accelerating phase, which always uses backward Euler.
    pub scheme: Scheme,
    pub dt: f64,
    /// Step inside the accelerating phase; `None` means `dt`.
    pub control_dt: Option<f64>,
}

impl Default for SteerConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            alpha_safety: 1.0,
            m_max: 40,
            tol_terminal: 0.0,
            floor_delta: 1e-8,
            scheme: Scheme::CrankNicolson,
            dt: 1e-3,
            control_dt: None,
        }
    }
}

/// Minimum number of time steps per schedule interval.
pub const MIN_STEPS_PER_INTERVAL: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerReport {
    pub gap: f64,
    pub alpha: f64,
    pub schedule: ControlSchedule,
    /// Last schedule interval actually run.
    pub stopped_at: usize,
    /// `‖y(a_m) - f‖₂` for `m = 0..=stopped_at`.
    pub interval_errors: Vec<f64>,
    /// `max |v|` over the steps of schedule interval `m` (index `m - 1`).
    pub interval_sup: Vec<f64>,
    /// `α m ‖(a y)_x(·, a_m)‖_{H1}` (index `m - 1`).
    pub envelope: Vec<f64>,
    pub terminal_error: f64,
    /// `‖y(T) - f‖₂ / ‖f‖₂`.
    pub relative_terminal_error: f64,
    pub floor_activations: usize,
    pub min_density: f64,
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerOutcome {
    pub drift: DriftField,
    pub trajectory: Trajectory,
    pub report: SteerReport,
}

fn check_density(y: &GridFunction, what: &str) -> Result<()> {
    y.require(Placement::Cell)?;
    let m = mass(y)?;
    if (m - 1.0).abs() > 1e-10 {
        return Err(Error::MassMismatch(m));
    }
    if y.min() < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{what} has negative values"
        )));
    }
    Ok(())
}

/// Steers `y0` onto `f` over `[0, horizon]`.
pub fn steer(
    y0: &GridFunction,
    f: &GridFunction,
    horizon: f64,
    cfg: &SteerConfig,
) -> Result<SteerOutcome> {
    y0.check_compatible(f)?;
    check_density(y0, "initial density")?;
    check_density(f, "target density")?;
    let control_dt = cfg.control_dt.unwrap_or(cfg.dt);
    if !(cfg.dt > 0.0) || !(control_dt > 0.0) {
        return Err(Error::InvalidTimeStep(cfg.dt.min(control_dt)));
    }
    if !(cfg.alpha_safety > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_safety must be positive, got {}",
            cfg.alpha_safety
        )));
    }
    let grid = f.grid();
    let a = reciprocal(f)?;
    let gap = spectral_gap(&a)?;
    let alpha = cfg.alpha_safety / gap;
    let epsilon = cfg.epsilon.unwrap_or(horizon / 10.0);
    let schedule = steering_schedule(horizon, epsilon, alpha, cfg.m_max)?;
    let (last0, last1) = schedule.interval(schedule.m_max());
    if (last1 - last0) / (MIN_STEPS_PER_INTERVAL as f64) < 1e-12 * horizon {
        return Err(Error::Schedule(format!(
            "interval {} of length {} cannot be resolved",
            schedule.m_max(),
            last1 - last0
        )));
    }

    let stabilizer = gradient_log_drift(f)?;
    let mut drift = DriftField::constant(GridFunction::zero_edges(grid), 0.0, epsilon / 2.0)?;
    drift.push(epsilon, stabilizer.clone())?;
    let mut traj = pde::solve(y0, &drift, epsilon, cfg.dt, cfg.scheme)?;

    let mut interval_errors = vec![l2_distance(traj.final_state(), f)?];
    let mut interval_sup = Vec::with_capacity(schedule.m_max());
    let mut envelope = Vec::with_capacity(schedule.m_max());
    let mut floor_activations = 0;
    let mut stopped_at = 0;
    let base = assemble_weighted_operator(&a, grid)?;
    let mut y = traj.final_state().clone();

    for m in 1..=schedule.m_max() {
        let (t0, t1) = schedule.interval(m);
        let gain = schedule.gain(m);
        let op = base.scaled(gain);
        let steps = (((t1 - t0) / control_dt).ceil() as usize).max(MIN_STEPS_PER_INTERVAL);
        let dt = (t1 - t0) / steps as f64;
        let mut sup = 0.0_f64;
        for j in 0..steps {
            let fb = feedback_drift(&y, f, gain, cfg.floor_delta)?;
            floor_activations += usize::from(fb.floor_active);
            sup = sup.max(norm(&fb.drift, &NormKind::Linf)?);
            let end = if j + 1 == steps {
                t1
            } else {
                t0 + (j + 1) as f64 * dt
            };
            drift.push(end, fb.drift)?;
            y = pde::step(&y, &op, end - traj.final_time(), Scheme::BackwardEuler)?;
            traj.times.push(end);
            traj.states.push(y.clone());
        }
        let ay = y.zip_map(&a, |y, a| y * a)?;
        envelope.push(alpha * m as f64 * norm(&derivative(&ay)?, &NormKind::H1)?);
        interval_sup.push(sup);
        interval_errors.push(l2_distance(&y, f)?);
        stopped_at = m;
        if interval_errors[m] < cfg.tol_terminal {
            break;
        }
    }

    // The schedule is truncated: hold the stabilizer for the remaining time.
    let held_from = traj.final_time();
    if horizon - held_from > 1e-12 * horizon {
        let tail = DriftField::constant(stabilizer.clone(), held_from, horizon)?;
        pde::integrate_into(&mut traj, &tail, horizon, cfg.dt, cfg.scheme, false)?;
        drift.push(horizon, stabilizer)?;
    }
    traj.drift_log = drift.clone();

    let terminal_error = l2_distance(traj.final_state(), f)?;
    let report = SteerReport {
        gap,
        alpha,
        stopped_at,
        interval_errors,
        interval_sup,
        envelope,
        terminal_error,
        relative_terminal_error: terminal_error / norm(f, &NormKind::L2)?,
        floor_activations,
        min_density: traj.min_density(),
        max_mass_drift: traj.max_mass_drift(),
        schedule,
    };
    Ok(SteerOutcome {
        drift,
        trajectory: traj,
        report,
    })
}

/// Runs independent steering configurations, in parallel when available.
pub fn steer_batch(
    y0: &GridFunction,
    f: &GridFunction,
    horizon: f64,
    configs: &[SteerConfig],
    exec: Execution,
) -> Vec<Result<SteerOutcome>> {
    exec.map_slice(configs, |cfg| steer(y0, f, horizon, cfg))
}

/// `max_k max_i |v_k(x_i)|` over all intervals.
pub fn drift_sup_norm(drift: &DriftField) -> f64 {
    drift.interval_sup_norms().into_iter().fold(0.0, f64::max)
}

/// Largest tail-to-head ratio tolerated before a sequence counts as growing.
pub const GROWTH_TOLERANCE: f64 = 0.25;

/// `max(second half) / max(first half)` of a sequence.
pub fn growth_ratio(values: &[f64]) -> f64 {
    let mid = values.len() / 2;
    if mid == 0 {
        return 1.0;
    }
    let head = values[..mid].iter().copied().fold(0.0, f64::max);
    let tail = values[mid..].iter().copied().fold(0.0, f64::max);
    tail / head
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftAudit {
    /// `max_m` of the per-interval sup norms.
    pub ceiling: f64,
    pub growth_ratio: f64,
    pub bounded: bool,
    /// First `m ≥ from` with `sup_m > sup_{m-1}`.
    pub first_increase: Option<usize>,
    pub non_increasing: bool,
}

/// Audits per-interval drift sup norms (`interval_sup[m - 1]` for interval `m`).
pub fn drift_growth_audit(interval_sup: &[f64], from: usize) -> DriftAudit {
    let ceiling = interval_sup.iter().copied().fold(0.0, f64::max);
    let ratio = growth_ratio(interval_sup);
    let first_increase =
        (from.max(2)..=interval_sup.len()).find(|&m| interval_sup[m - 1] > interval_sup[m - 2]);
    DriftAudit {
        ceiling,
        growth_ratio: ratio,
        bounded: ceiling.is_finite() && ratio <= 1.0 + GROWTH_TOLERANCE,
        first_increase,
        non_increasing: first_increase.is_none(),
    }
}

/// `m exp(-H_m)` with `H_m` the m-th harmonic number; tends to `e^{-γ}`.
pub fn harmonic_model(m: usize) -> f64 {
    let harmonic: f64 = (1..=m).map(|n| 1.0 / n as f64).sum();
    m as f64 * (-harmonic).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundAudit {
    /// Single constant bounding the envelope.
    pub bound: f64,
    pub growth_ratio: f64,
    pub bounded: bool,
    /// `m exp(-H_m)` at `m = m_max`.
    pub model_value: f64,
    pub model_relative_gap: f64,
    pub model_increasing: bool,
}

/// Checks that `α m ‖(a y)_x(a_m)‖_{H1}` stays under one constant and evaluates
/// the model sequence `m exp(-H_m)` that explains why.
pub fn euler_mascheroni_bound_audit(schedule: &ControlSchedule, envelope: &[f64]) -> BoundAudit {
    let bound = envelope.iter().copied().fold(0.0, f64::max);
    let ratio = growth_ratio(envelope);
    let m_max = schedule.m_max();
    let model: Vec<f64> = (1..=m_max).map(harmonic_model).collect();
    let model_value = *model.last().expect("m_max >= 1");
    BoundAudit {
        bound,
        growth_ratio: ratio,
        bounded: bound.is_finite() && ratio <= 1.0 + GROWTH_TOLERANCE,
        model_value,
        model_relative_gap: (model_value - EXP_NEG_EULER_GAMMA).abs() / EXP_NEG_EULER_GAMMA,
        model_increasing: model.windows(2).all(|w| w[1] > w[0]),
    }
}
