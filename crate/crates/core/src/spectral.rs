//! Spectra of the zero-flux operators that govern convergence to a target density.
//!
//! Two generators share the kernel `f`:
//!
//! * the closed-loop operator `A_a y = (a y)_xx` with `(a y)_x = 0` at both ends,
//!   `a = 1/f`, which drives the steering phase;
//! * the stabilizer operator `B_f y = y_xx - ((f_x/f) y)_x`, the Fokker-Planck
//!   generator under the drift `v = f_x/f`.
//!
//! Both discretizations are of the form `L = G diag(a)` with `G` symmetric, hence
//! self-adjoint in the inner product weighted by `a`. They are symmetrized by a
//! diagonal similarity and handed to the bisection eigensolver in [`crate::linalg`].
//! The two spectra differ in general; only the kernel is shared.

use crate::control::gradient_log_drift;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Placement};
use crate::linalg::TridiagonalOperator;
use crate::pde::assemble_fp_operator;

/// Discrete `y ↦ (a y)_xx` with zero boundary flux.
pub fn assemble_weighted_operator(a: &GridFunction, grid: Grid) -> Result<TridiagonalOperator> {
    a.require(Placement::Cell)?;
    if a.grid().n() != grid.n() {
        return Err(Error::GridMismatch(grid.n(), a.grid().n()));
    }
    let amin = a.min();
    if !(amin > 0.0) {
        return Err(Error::NonPositiveWeight(amin));
    }
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let av = a.values();
    let mut op = TridiagonalOperator::zeros(n);
    for e in 1..n {
        op.sup[e - 1] += av[e] * inv_h2;
        op.diag[e - 1] -= av[e - 1] * inv_h2;
        op.diag[e] -= av[e] * inv_h2;
        op.sub[e] += av[e - 1] * inv_h2;
    }
    Ok(op)
}

/// Discrete `B_f`: the Fokker-Planck operator under the log-ratio stabilizer drift.
pub fn assemble_stabilizer_operator(f: &GridFunction) -> Result<TridiagonalOperator> {
    assemble_fp_operator(&gradient_log_drift(f)?, f.grid())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Largest eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvector of the largest eigenvalue, positive with unit mass.
    pub principal_vector: GridFunction,
    /// `|second largest eigenvalue|`.
    pub gap: f64,
}

/// `k` largest eigenvalues of any symmetrizable zero-flux operator on `grid`.
pub fn operator_spectrum(op: &TridiagonalOperator, grid: Grid, k: usize) -> Result<SpectralReport> {
    let n = op.len();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {n} grid cells"
        )));
    }
    let (sym, scaling) = op.symmetrize()?;
    let top = sym.largest_eigenvalues(k.max(2))?;
    let gap = top[1].abs();
    if !(gap > 0.0) {
        return Err(Error::Eigen(format!(
            "degenerate principal eigenvalue ({gap})"
        )));
    }
    let s = sym.principal_eigenvector(top[0], top[0] - top[1])?;
    let mut y: Vec<f64> = s.iter().zip(&scaling).map(|(v, d)| v / d).collect();
    let m = grid.h() * y.iter().sum::<f64>();
    y.iter_mut().for_each(|v| *v /= m);
    Ok(SpectralReport {
        eigenvalues: top.into_iter().take(k).collect(),
        principal_vector: GridFunction::cells(grid, y)?,
        gap,
    })
}

/// Spectrum of the closed-loop operator `A_a`.
pub fn spectrum(a: &GridFunction, k: usize) -> Result<SpectralReport> {
    operator_spectrum(&assemble_weighted_operator(a, a.grid())?, a.grid(), k)
}

/// Spectrum of the stabilizer generator `B_f`.
pub fn stabilizer_spectrum(f: &GridFunction, k: usize) -> Result<SpectralReport> {
    operator_spectrum(&assemble_stabilizer_operator(f)?, f.grid(), k)
}

/// Gap of `A_a`; sizes the steering gain.
pub fn spectral_gap(a: &GridFunction) -> Result<f64> {
    spectrum(a, 2).map(|r| r.gap)
}

/// Gap of `B_f`; the exponential rate under the stabilizer drift.
pub fn stabilizer_gap(f: &GridFunction) -> Result<f64> {
    stabilizer_spectrum(f, 2).map(|r| r.gap)
}

/// Base gain `α = safety / gap`; `safety = 1` is the smallest gain that keeps the
/// steering drift bounded.
pub fn choose_alpha(gap: f64, safety: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap(gap));
    }
    if !(safety >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must be at least 1, got {safety}"
        )));
    }
    Ok(safety / gap)
}

/// `1/f`, the weight under which `A_{1/f}` and `B_f` are self-adjoint.
pub fn reciprocal(f: &GridFunction) -> Result<GridFunction> {
    let fmin = f.min();
    if !(fmin > 0.0) {
        return Err(Error::NonPositiveWeight(fmin));
    }
    Ok(f.map(|v| 1.0 / v))
}

/// Boundary fluxes at `x = 0` and `x = 1` of a cell vector, from second-order
/// one-sided stencils over the three outermost cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFluxes {
    /// `(a u)_x` with `a = 1/f`.
    pub weighted: [f64; 2],
    /// `u_x - (f_x / f) u`.
    pub drift: [f64; 2],
    /// Magnitudes of the stencil terms, for relative comparisons.
    pub weighted_scale: [f64; 2],
    pub drift_scale: [f64; 2],
}

struct OneSided {
    derivative: f64,
    derivative_scale: f64,
    value: f64,
    value_scale: f64,
}

fn one_sided(u: &[f64], h: f64, right: bool) -> OneSided {
    let n = u.len();
    let (u0, u1, u2, sign) = if right {
        (u[n - 1], u[n - 2], u[n - 3], -1.0)
    } else {
        (u[0], u[1], u[2], 1.0)
    };
    OneSided {
        derivative: sign * (-2.0 * u0 + 3.0 * u1 - u2) / h,
        derivative_scale: (2.0 * u0.abs() + 3.0 * u1.abs() + u2.abs()) / h,
        value: (15.0 * u0 - 10.0 * u1 + 3.0 * u2) / 8.0,
        value_scale: (15.0 * u0.abs() + 10.0 * u1.abs() + 3.0 * u2.abs()) / 8.0,
    }
}

pub fn boundary_fluxes(f: &GridFunction, u: &GridFunction) -> Result<BoundaryFluxes> {
    f.check_compatible(u)?;
    f.require(Placement::Cell)?;
    let a = reciprocal(f)?;
    let h = f.grid().h();
    let au: Vec<f64> = a
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, u)| a * u)
        .collect();
    let mut out = BoundaryFluxes {
        weighted: [0.0; 2],
        drift: [0.0; 2],
        weighted_scale: [0.0; 2],
        drift_scale: [0.0; 2],
    };
    for (side, right) in [false, true].into_iter().enumerate() {
        let w = one_sided(&au, h, right);
        let du = one_sided(u.values(), h, right);
        let df = one_sided(f.values(), h, right);
        let ratio = df.derivative / df.value;
        out.weighted[side] = w.derivative;
        out.weighted_scale[side] = w.derivative_scale;
        out.drift[side] = du.derivative - ratio * du.value;
        out.drift_scale[side] = du.derivative_scale + ratio.abs() * du.value_scale;
    }
    Ok(out)
}

const BC_TOLERANCE: f64 = 1e-10;

impl BoundaryFluxes {
    pub fn weighted_vanishes(&self) -> bool {
        (0..2).all(|s| self.weighted[s].abs() <= BC_TOLERANCE * self.weighted_scale[s])
    }

    pub fn drift_vanishes(&self) -> bool {
        (0..2).all(|s| self.drift[s].abs() <= BC_TOLERANCE * self.drift_scale[s])
    }
}

/// Checks on a fixed family of test vectors that the zero-flux condition of
/// `A_{1/f}`, `(u/f)_x = 0`, and that of `B_f`, `u_x - (f_x/f) u = 0`, accept and
/// reject the same vectors.
pub fn bc_domain_equivalence_check(f: &GridFunction) -> Result<bool> {
    f.require(Placement::Cell)?;
    let fmin = f.min();
    if !(fmin > 0.0) {
        return Err(Error::NonPositiveWeight(fmin));
    }
    let grid = f.grid();
    let n = grid.n();
    let mut tests = vec![f.clone(), f.scale(3.0)];
    tests.push(GridFunction::constant(grid, Placement::Cell, 1.0));
    if n >= 12 {
        // perturbation invisible to the boundary stencils
        tests.push(GridFunction::from_parts(
            grid,
            Placement::Cell,
            f.values()
                .iter()
                .enumerate()
                .map(|(i, v)| if (4..n - 4).contains(&i) { v * 1.3 } else { *v })
                .collect(),
        ));
    }
    let mut edge = f.values().to_vec();
    edge[0] *= 1.1;
    tests.push(GridFunction::from_parts(grid, Placement::Cell, edge));
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for _ in 0..4 {
        let values = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                0.5 + ((state >> 11) as f64) / ((1u64 << 53) as f64)
            })
            .collect();
        tests.push(GridFunction::from_parts(grid, Placement::Cell, values));
    }
    for u in &tests {
        let fl = boundary_fluxes(f, u)?;
        if fl.weighted_vanishes() != fl.drift_vanishes() {
            return Ok(false);
        }
    }
    Ok(true)
}
