//! Self-convergence studies: solve one scenario on a sequence of resolutions
//! and measure successive differences, restricted onto the coarser grid.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l2_distance, uniform_grid, Grid, GridFunction};
use crate::par::Execution;
use crate::pde::{solve, DriftField, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dt: f64,
    /// `‖y_k - R y_{k+1}‖₂` on level `k`'s grid.
    pub l2_error: f64,
    /// `ln(e_{k-1} / e_k) / ln(r)` with `r` the refinement factor.
    pub order_estimate: Option<f64>,
}

pub const MIN_LEVELS: usize = 3;

fn refinement(coarse: Level, fine: Level) -> f64 {
    (fine.n as f64 / coarse.n as f64).max(coarse.dt / fine.dt)
}

fn validate(levels: &[Level]) -> Result<()> {
    if levels.len() < MIN_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least {MIN_LEVELS} resolutions, got {}",
            levels.len()
        )));
    }
    for w in levels.windows(2) {
        let (c, f) = (w[0], w[1]);
        if f.n < c.n || f.n % c.n != 0 || !(f.dt <= c.dt && f.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "level (n = {}, dt = {}) does not refine (n = {}, dt = {})",
                f.n, f.dt, c.n, c.dt
            )));
        }
        if refinement(c, f) <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "levels (n = {}, dt = {}) repeat",
                f.n, f.dt
            )));
        }
    }
    Ok(())
}

/// Runs `setup(grid)` (initial density and drift over `[0, horizon]`) on every
/// level and compares consecutive solutions at `horizon`.
pub fn self_convergence<F>(
    levels: &[Level],
    horizon: f64,
    scheme: Scheme,
    setup: F,
    exec: Execution,
) -> Result<Vec<ConvergenceRow>>
where
    F: Fn(Grid) -> Result<(GridFunction, DriftField)> + Sync + Send,
{
    validate(levels)?;
    let finals = exec
        .map_slice(levels, |lv| {
            let (y0, drift) = setup(uniform_grid(lv.n)?)?;
            Ok(solve(&y0, &drift, horizon, lv.dt, scheme)?
                .final_state()
                .clone())
        })
        .into_iter()
        .collect::<Result<Vec<GridFunction>>>()?;

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len() - 1);
    for k in 0..levels.len() - 1 {
        let restricted = finals[k + 1].coarsen(levels[k].n)?;
        let err = l2_distance(&finals[k], &restricted)?;
        let order = rows
            .last()
            .map(|prev| (prev.l2_error / err).ln() / refinement(levels[k - 1], levels[k]).ln());
        rows.push(ConvergenceRow {
            n: levels[k].n,
            dt: levels[k].dt,
            l2_error: err,
            order_estimate: order,
        });
    }
    Ok(rows)
}

/// Smallest order estimate of a study.
pub fn min_order(rows: &[ConvergenceRow]) -> Option<f64> {
    rows.iter()
        .filter_map(|r| r.order_estimate)
        .reduce(f64::min)
}

/// CSV `n,dt,l2_error,order_estimate`; the first row has no estimate.
pub fn write_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "n,dt,l2_error,order_estimate")?;
    for r in rows {
        let order = r
            .order_estimate
            .map(|o| format!("{o:.6}"))
            .unwrap_or_default();
        writeln!(out, "{},{:.16e},{:.16e},{order}", r.n, r.dt, r.l2_error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{normalize, project, DensitySpec};

    fn heat(
        spec: DensitySpec,
        horizon: f64,
    ) -> impl Fn(Grid) -> Result<(GridFunction, DriftField)> + Sync + Send {
        move |g| {
            let y0 = normalize(&project(&spec, g))?;
            Ok((
                y0,
                DriftField::constant(GridFunction::zero_edges(g), 0.0, horizon)?,
            ))
        }
    }

    #[test]
    fn smooth_heat_is_second_order() {
        let levels: Vec<Level> = [50, 100, 200, 400]
            .iter()
            .map(|&n| Level {
                n,
                dt: 0.5 / n as f64,
            })
            .collect();
        let spec = "gaussian_bump:0.5:0.1".parse().unwrap();
        let rows = self_convergence(
            &levels,
            0.1,
            Scheme::CrankNicolson,
            heat(spec, 0.1),
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].order_estimate.is_none());
        let order = min_order(&rows).unwrap();
        assert!(order >= 1.9, "{rows:?}");
    }

    #[test]
    fn constant_data_is_reproduced_exactly() {
        let levels = [
            Level { n: 20, dt: 0.1 },
            Level { n: 40, dt: 0.05 },
            Level { n: 80, dt: 0.025 },
        ];
        let rows = self_convergence(
            &levels,
            1.0,
            Scheme::CrankNicolson,
            heat(DensitySpec::Uniform, 1.0),
            Execution::Sequential,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.l2_error < 1e-13), "{rows:?}");
    }

    #[test]
    fn rejects_bad_level_lists() {
        let two = [Level { n: 20, dt: 0.1 }, Level { n: 40, dt: 0.05 }];
        let setup = heat(DensitySpec::Uniform, 1.0);
        assert!(self_convergence(
            &two,
            1.0,
            Scheme::CrankNicolson,
            &setup,
            Execution::Sequential
        )
        .is_err());
        let odd = [
            Level { n: 20, dt: 0.1 },
            Level { n: 30, dt: 0.05 },
            Level { n: 60, dt: 0.025 },
        ];
        assert!(self_convergence(
            &odd,
            1.0,
            Scheme::CrankNicolson,
            &setup,
            Execution::Sequential
        )
        .is_err());
        let same = [
            Level { n: 20, dt: 0.1 },
            Level { n: 20, dt: 0.1 },
            Level { n: 40, dt: 0.05 },
        ];
        assert!(self_convergence(
            &same,
            1.0,
            Scheme::CrankNicolson,
            &setup,
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = [
            ConvergenceRow {
                n: 50,
                dt: 0.01,
                l2_error: 1e-3,
                order_estimate: None,
            },
            ConvergenceRow {
                n: 100,
                dt: 0.005,
                l2_error: 2.5e-4,
                order_estimate: Some(2.0),
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,dt,l2_error,order_estimate");
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with(",2.000000"));
    }
}
