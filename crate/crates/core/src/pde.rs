//! Conservative finite-volume solver for `y_t = y_xx - (v y)_x` with zero-flux
//! boundaries.
//!
//! The edge flux `J = y_x - v y` uses Scharfetter-Gummel (exponential fitting)
//! weights,
//!
//! ```text
//! J_{i+1/2} = [B(v h) y_{i+1} - B(-v h) y_i] / h,     B(z) = z / (e^z - 1),
//! ```
//!
//! so the drift `v = (ln f_{i+1} - ln f_i) / h` makes the cell vector `f` an exact
//! discrete equilibrium. Boundary fluxes are identically zero, so every column of
//! the assembled operator sums to zero and mass is conserved by construction.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mass, Grid, GridFunction, NormKind, Placement};
pub use crate::linalg::TridiagonalOperator;

/// Bernoulli function `z / (e^z - 1)`, with its Taylor expansion near 0.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - 0.5 * z + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Flux-form operator of `y ↦ y_xx - (v y)_x` for an edge-placed drift.
pub fn assemble_fp_operator(v: &GridFunction, grid: Grid) -> Result<TridiagonalOperator> {
    v.require(Placement::Edge)?;
    if v.grid().n() != grid.n() {
        return Err(Error::GridMismatch(grid.n(), v.grid().n()));
    }
    let n = grid.n();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let mut op = TridiagonalOperator::zeros(n);
    // Interior edge e couples cells e-1 and e; boundary edges carry no flux.
    for e in 1..n {
        let z = v.values()[e] * h;
        let forward = bernoulli(z) * inv_h2;
        let backward = bernoulli(-z) * inv_h2;
        op.sup[e - 1] += forward;
        op.diag[e - 1] -= backward;
        op.diag[e] -= forward;
        op.sub[e] += backward;
    }
    Ok(op)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

impl Scheme {
    /// Implicitness `θ` of the one-step θ-method.
    pub fn theta(self) -> f64 {
        match self {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward_euler" | "be" => Ok(Scheme::BackwardEuler),
            "crank_nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            other => Err(Error::InvalidArgument(format!("unknown scheme `{other}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::BackwardEuler => "backward_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        })
    }
}

/// One θ-step: `(I - θ dt L) y' = (I + (1 - θ) dt L) y`.
///
/// `L` must have zero column sums. The step is solved for the increment,
/// `(I - θ dt L) (y' - y) = dt L y`, with `L y` in flux form, so the mass
/// round-off scales with the change rather than with `y`.
pub fn step(
    y: &GridFunction,
    op: &TridiagonalOperator,
    dt: f64,
    scheme: Scheme,
) -> Result<GridFunction> {
    y.require(Placement::Cell)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    if op.len() != y.len() {
        return Err(Error::GridMismatch(y.len(), op.len()));
    }
    let theta = scheme.theta();
    let rhs: Vec<f64> = op
        .apply_conservative(y.values())
        .into_iter()
        .map(|l| dt * l)
        .collect();
    let delta = op.shifted(1.0, -theta * dt).solve(&rhs)?;
    let next = y.values().iter().zip(delta).map(|(v, d)| v + d).collect();
    GridFunction::cells(y.grid(), next)
}

/// Piecewise-constant-in-time drift: `samples[k]` is active on
/// `[breakpoints[k], breakpoints[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    breakpoints: Vec<f64>,
    samples: Vec<GridFunction>,
}

impl DriftField {
    pub fn new(breakpoints: Vec<f64>, samples: Vec<GridFunction>) -> Result<Self> {
        if samples.is_empty() || breakpoints.len() != samples.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} breakpoints for {} samples",
                breakpoints.len(),
                samples.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "drift breakpoints must increase strictly".into(),
            ));
        }
        let grid = samples[0].grid();
        for s in &samples {
            s.require(Placement::Edge)?;
            if s.grid().n() != grid.n() {
                return Err(Error::GridMismatch(grid.n(), s.grid().n()));
            }
        }
        Ok(Self {
            breakpoints,
            samples,
        })
    }

    /// A single sample held over `[start, end]`.
    pub fn constant(sample: GridFunction, start: f64, end: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![sample])
    }

    /// Appends a sample active on `[self.end(), end)`.
    pub fn push(&mut self, end: f64, sample: GridFunction) -> Result<()> {
        sample.require(Placement::Edge)?;
        if !(end > self.end()) {
            return Err(Error::InvalidArgument(format!(
                "breakpoint {end} does not follow {}",
                self.end()
            )));
        }
        self.breakpoints.push(end);
        self.samples.push(sample);
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn samples(&self) -> &[GridFunction] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    pub fn grid(&self) -> Grid {
        self.samples[0].grid()
    }

    /// Index of the sample active at `t`; the final breakpoint belongs to the last
    /// interval.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + self.end().abs());
        if t < self.start() - tol || t > self.end() + tol {
            return None;
        }
        let k = self.breakpoints.partition_point(|&b| b <= t + tol);
        Some(k.saturating_sub(1).min(self.samples.len() - 1))
    }

    pub fn sample_at(&self, t: f64) -> Option<&GridFunction> {
        self.index_at(t).map(|k| &self.samples[k])
    }

    /// Per-interval `max |v|`.
    pub fn interval_sup_norms(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| crate::grid::norm(s, &NormKind::Linf).unwrap_or(f64::NAN))
            .collect()
    }

    /// CSV `t_start,t_end,x_edge,v`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_start,t_end,x_edge,v")?;
        for (k, s) in self.samples.iter().enumerate() {
            let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
            let grid = s.grid();
            for (i, v) in s.values().iter().enumerate() {
                writeln!(out, "{t0:.16e},{t1:.16e},{:.16e},{v:.16e}", grid.edge(i))?;
            }
        }
        Ok(())
    }
}

/// Time-stepped solution together with the drift that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    pub drift_log: DriftField,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("trajectory has an initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial time")
    }

    /// `max_k |mass(states[k]) - mass(states[0])|`.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = mass(&self.states[0]).unwrap_or(f64::NAN);
        self.states
            .iter()
            .map(|s| (mass(s).unwrap_or(f64::NAN) - m0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_density(&self) -> f64 {
        self.states
            .iter()
            .map(GridFunction::min)
            .fold(f64::INFINITY, f64::min)
    }

    /// State stored at time `t`, if any (exact up to round-off).
    pub fn state_at(&self, t: f64) -> Option<&GridFunction> {
        let tol = 1e-12 * (1.0 + t.abs());
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then(|| &self.states[k])
    }

    /// CSV `t,x,y`, row-major by time then cell; every `stride`-th state plus the
    /// final one.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> io::Result<()> {
        writeln!(out, "t,x,y")?;
        let stride = stride.max(1);
        let last = self.states.len() - 1;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            let grid = s.grid();
            for (i, y) in s.values().iter().enumerate() {
                writeln!(out, "{t:.16e},{:.16e},{y:.16e}", grid.center(i))?;
            }
        }
        Ok(())
    }
}

/// One step of a time plan: start time, step length, active drift sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PlannedStep {
    pub start: f64,
    pub dt: f64,
    pub sample: usize,
}

/// Steps of length at most `dt` from `start` to `end` that land exactly on every
/// drift breakpoint in between.
pub(crate) fn time_plan(
    drift: &DriftField,
    start: f64,
    end: f64,
    dt: f64,
) -> Result<Vec<PlannedStep>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let tol = 1e-12 * (1.0 + end.abs());
    let mut steps = Vec::new();
    let mut t = start;
    while t < end - tol {
        let sample = drift.index_at(t).ok_or(Error::DriftUndefined(t))?;
        let boundary = drift.breakpoints[sample + 1].min(end);
        let mut next = t + dt;
        // Snap onto the interval end instead of leaving a sliver.
        if next >= boundary - 1e-9 * dt {
            next = boundary;
        }
        steps.push(PlannedStep {
            start: t,
            dt: next - t,
            sample,
        });
        t = next;
    }
    Ok(steps)
}

/// Number of leading Crank-Nicolson steps replaced by two backward-Euler half
/// steps each, damping the stiff modes of nonsmooth initial data.
pub const RANNACHER_STEPS: usize = 2;

/// Integrates `y0` through `drift` over `[0, horizon]`.
pub fn solve(
    y0: &GridFunction,
    drift: &DriftField,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    y0.require(Placement::Cell)?;
    let m0 = mass(y0)?;
    if (m0 - 1.0).abs() > 1e-10 {
        return Err(Error::MassMismatch(m0));
    }
    let ymin = y0.min();
    if ymin < 0.0 {
        return Err(Error::NegativeDensity(ymin));
    }
    if drift.grid().n() != y0.grid().n() {
        return Err(Error::GridMismatch(y0.grid().n(), drift.grid().n()));
    }
    let tol = 1e-12 * (1.0 + horizon.abs());
    if drift.start().abs() > tol || (drift.end() - horizon).abs() > tol {
        return Err(Error::DriftCoverage {
            start: drift.start(),
            end: drift.end(),
            horizon,
        });
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.clone()],
        drift_log: drift.clone(),
    };
    integrate_into(&mut traj, drift, horizon, dt, scheme, true)?;
    Ok(traj)
}

/// Continues `traj` from its final time to `end` under `drift`.
pub(crate) fn integrate_into(
    traj: &mut Trajectory,
    drift: &DriftField,
    end: f64,
    dt: f64,
    scheme: Scheme,
    rannacher: bool,
) -> Result<()> {
    let grid = drift.grid();
    let plan = time_plan(drift, traj.final_time(), end, dt)?;
    let mut cached: Option<(usize, TridiagonalOperator)> = None;
    let mut y = traj.final_state().clone();
    for (k, s) in plan.iter().enumerate() {
        if cached.as_ref().map(|c| c.0) != Some(s.sample) {
            cached = Some((
                s.sample,
                assemble_fp_operator(&drift.samples[s.sample], grid)?,
            ));
        }
        let op = &cached.as_ref().expect("assembled").1;
        y = if rannacher && scheme == Scheme::CrankNicolson && k < RANNACHER_STEPS {
            let half = step(&y, op, 0.5 * s.dt, Scheme::BackwardEuler)?;
            step(&half, op, 0.5 * s.dt, Scheme::BackwardEuler)?
        } else {
            step(&y, op, s.dt, scheme)?
        };
        traj.times.push(s.start + s.dt);
        traj.states.push(y.clone());
    }
    Ok(())
}

/// Free-space heat-kernel lower bound on the Neumann heat solution at time `t`:
/// `min_x h Σ_z (4πt)^{-1/2} exp(-(x - z)² / 4t) y0(z)` over cell centers.
pub fn heat_kernel_floor(t: f64, y0: &GridFunction) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidTimeStep(t));
    }
    y0.require(Placement::Cell)?;
    let ymin = y0.min();
    if ymin < 0.0 {
        return Err(Error::NegativeDensity(ymin));
    }
    let grid = y0.grid();
    let h = grid.h();
    let norm = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
    let centers = grid.centers();
    Ok(centers
        .iter()
        .map(|&x| {
            h * norm
                * centers
                    .iter()
                    .zip(y0.values())
                    .map(|(&z, &y)| (-(x - z).powi(2) / (4.0 * t)).exp() * y)
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{normalize, project, uniform_grid};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn log_ratio(f: &GridFunction) -> GridFunction {
        let g = f.grid();
        let mut v = vec![0.0; g.n() + 1];
        for e in 1..g.n() {
            v[e] = (f.values()[e].ln() - f.values()[e - 1].ln()) / g.h();
        }
        GridFunction::edges(g, v).unwrap()
    }

    fn sine_target(n: usize) -> GridFunction {
        normalize(&project(
            &"sine:0.5:1".parse().unwrap(),
            uniform_grid(n).unwrap(),
        ))
        .unwrap()
    }

    #[test]
    fn bernoulli_branches_agree() {
        for z in [1e-5, -1e-5, 2e-5, -3e-5] {
            let exact = z / f64::exp_m1(z);
            assert_abs_diff_eq!(bernoulli(z), exact, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(bernoulli(0.0), 1.0);
        // B(-z) = B(z) + z
        for z in [0.3, 2.0, 15.0] {
            assert_abs_diff_eq!(bernoulli(-z), bernoulli(z) + z, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_drift_is_neumann_laplacian() {
        let g = uniform_grid(4).unwrap();
        let op = assemble_fp_operator(&GridFunction::zero_edges(g), g).unwrap();
        let h2 = g.h() * g.h();
        assert_abs_diff_eq!(op.diag[0] * h2, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(op.diag[3] * h2, -1.0, epsilon = 1e-14);
        for i in 1..3 {
            assert_abs_diff_eq!(op.sub[i] * h2, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(op.diag[i] * h2, -2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(op.sup[i] * h2, 1.0, epsilon = 1e-14);
        }
        assert_eq!(op.sub[0], 0.0);
        assert_eq!(op.sup[3], 0.0);
    }

    #[test]
    fn log_ratio_drift_makes_target_exact_equilibrium() {
        let f = sine_target(64);
        let op = assemble_fp_operator(&log_ratio(&f), f.grid()).unwrap();
        let lf = op.apply(f.values());
        let scale = op.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        for r in lf {
            assert!(r.abs() < 1e-12 * scale, "residual {r}");
        }
    }

    #[test]
    fn step_edge_cases() {
        let g = uniform_grid(10).unwrap();
        let y = normalize(&project(&"gaussian_bump:0.3:0.1".parse().unwrap(), g)).unwrap();
        let zero = TridiagonalOperator::zeros(10);
        for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            assert_eq!(step(&y, &zero, 0.1, scheme).unwrap(), y);
        }
        let one = GridFunction::constant(g, Placement::Cell, 1.0);
        let heat = assemble_fp_operator(&GridFunction::zero_edges(g), g).unwrap();
        let next = step(&one, &heat, 0.05, Scheme::CrankNicolson).unwrap();
        for v in next.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-13);
        }
        assert!(matches!(
            step(&one, &heat, 0.0, Scheme::BackwardEuler),
            Err(Error::InvalidTimeStep(_))
        ));

        let f = sine_target(50);
        let op = assemble_fp_operator(&log_ratio(&f), f.grid()).unwrap();
        let next = step(&f, &op, 0.01, Scheme::CrankNicolson).unwrap();
        for (a, b) in next.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_target_stays_put() {
        let f = sine_target(100);
        let drift = DriftField::constant(log_ratio(&f), 0.0, 1.0).unwrap();
        let traj = solve(&f, &drift, 1.0, 0.01, Scheme::CrankNicolson).unwrap();
        assert_eq!(traj.times.len(), 101);
        for s in &traj.states {
            assert!(crate::grid::l2_distance(s, &f).unwrap() < 1e-10);
        }
    }

    #[test]
    fn heat_equation_matches_eigen_expansion() {
        // Oracle: the discrete Neumann Laplacian has eigenvectors cos(mπ x_i) with
        // eigenvalues -(2/h²)(1 - cos(mπh)); expand y0 in that basis and propagate
        // each mode by the backward-Euler amplification factor.
        let n = 50;
        let g = uniform_grid(n).unwrap();
        let y0 = normalize(&project(&"step:0.2:1.8:0.5".parse().unwrap(), g)).unwrap();
        let (dt, horizon) = (0.01, 5.0);
        let drift = DriftField::constant(GridFunction::zero_edges(g), 0.0, horizon).unwrap();
        let traj = solve(&y0, &drift, horizon, dt, Scheme::BackwardEuler).unwrap();
        let steps = traj.times.len() - 1;
        let h = g.h();
        let mut oracle = vec![0.0; n];
        for m in 0..n {
            let mode: Vec<f64> = (0..n)
                .map(|i| (m as f64 * std::f64::consts::PI * g.center(i)).cos())
                .collect();
            let nrm: f64 = mode.iter().map(|c| c * c).sum();
            let coef: f64 = mode
                .iter()
                .zip(y0.values())
                .map(|(c, y)| c * y)
                .sum::<f64>()
                / nrm;
            let lam = -(2.0 / (h * h)) * (1.0 - (m as f64 * std::f64::consts::PI * h).cos());
            let amp = (1.0 / (1.0 - dt * lam)).powi(steps as i32);
            for i in 0..n {
                oracle[i] += coef * amp * mode[i];
            }
        }
        for (a, b) in traj.final_state().values().iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            assert_abs_diff_eq!(*a, 1.0, epsilon = 1e-6);
        }
        assert!(traj.max_mass_drift() <= 1e-12);
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let g = uniform_grid(20).unwrap();
        let one = GridFunction::constant(g, Placement::Cell, 1.0);
        let drift = DriftField::constant(GridFunction::zero_edges(g), 0.0, 1.0).unwrap();
        let neg = normalize(&GridFunction::from_fn(
            g,
            |x| if x < 0.1 { -0.1 } else { 1.0 },
        ))
        .unwrap();
        assert!(matches!(
            solve(&neg, &drift, 1.0, 0.1, Scheme::BackwardEuler),
            Err(Error::NegativeDensity(_))
        ));
        assert!(matches!(
            solve(&one.scale(2.0), &drift, 1.0, 0.1, Scheme::BackwardEuler),
            Err(Error::MassMismatch(_))
        ));
        assert!(matches!(
            solve(&one, &drift, 2.0, 0.1, Scheme::BackwardEuler),
            Err(Error::DriftCoverage { .. })
        ));
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        let g = uniform_grid(10).unwrap();
        let mut drift = DriftField::constant(GridFunction::zero_edges(g), 0.0, 0.13).unwrap();
        drift.push(0.5, GridFunction::zero_edges(g)).unwrap();
        let plan = time_plan(&drift, 0.0, 0.5, 0.1).unwrap();
        let ends: Vec<f64> = plan.iter().map(|s| s.start + s.dt).collect();
        assert!(ends.contains(&0.13));
        assert_eq!(*ends.last().unwrap(), 0.5);
        assert!(plan.iter().all(|s| s.dt <= 0.1 + 1e-15));
        assert_eq!(plan[1].sample, 0);
        assert_eq!(plan[2].sample, 1);
    }

    #[test]
    fn kernel_floor_values() {
        let g = uniform_grid(200).unwrap();
        let one = GridFunction::constant(g, Placement::Cell, 1.0);
        let floor = heat_kernel_floor(0.25, &one).unwrap();
        let worst = (std::f64::consts::PI).powf(-0.5) * (-1.0f64).exp();
        assert!(floor >= worst, "{floor} < {worst}");
        assert!(heat_kernel_floor(0.0, &one).is_err());
        // Past the diffusive scale the bound decays like t^{-1/2}.
        let a = heat_kernel_floor(2.0, &one).unwrap();
        let b = heat_kernel_floor(8.0, &one).unwrap();
        assert!(b < a);
    }

    #[test]
    fn kernel_floor_bounds_solution() {
        let n = 200;
        let g = uniform_grid(n).unwrap();
        let y0 = normalize(&project(&"step:0:2:0.5".parse().unwrap(), g)).unwrap();
        let drift = DriftField::constant(GridFunction::zero_edges(g), 0.0, 0.1).unwrap();
        let traj = solve(&y0, &drift, 0.1, 1e-3, Scheme::CrankNicolson).unwrap();
        let floor = heat_kernel_floor(0.1, &y0).unwrap();
        assert!(floor > 0.0);
        assert!(traj.final_state().min() >= floor);
    }

    proptest! {
        #[test]
        fn columns_sum_to_zero(v in prop::collection::vec(-50.0..50.0f64, 13)) {
            let g = uniform_grid(12).unwrap();
            let op = assemble_fp_operator(&GridFunction::edges(g, v).unwrap(), g).unwrap();
            let scale = op.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            for s in op.column_sums() {
                prop_assert!(s.abs() <= 1e-13 * scale);
            }
            let y: Vec<f64> = (0..12).map(|i| 1.0 + (i as f64).sin()).collect();
            for (a, b) in op.apply(&y).iter().zip(op.apply_conservative(&y)) {
                prop_assert!((a - b).abs() <= 1e-11 * scale);
            }
        }

        #[test]
        fn backward_euler_keeps_positivity(v in prop::collection::vec(-30.0..30.0f64, 21), dt in 1e-4..1.0f64) {
            let g = uniform_grid(20).unwrap();
            let op = assemble_fp_operator(&GridFunction::edges(g, v).unwrap(), g).unwrap();
            let y = normalize(&GridFunction::from_fn(g, |x| 0.1 + x * x)).unwrap();
            let next = step(&y, &op, dt, Scheme::BackwardEuler).unwrap();
            prop_assert!(next.min() > 0.0);
            prop_assert!((mass(&next).unwrap() - 1.0).abs() <= 1e-13);
        }
    }
}
