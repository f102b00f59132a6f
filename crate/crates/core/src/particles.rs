//! Reflected-diffusion agents `dZ = v(Z, t) dt + √2 dW` on `[0, 1]`.
//!
//! The noise amplitude `√2` makes the density of `Z` solve `y_t = y_xx - (v y)_x`,
//! i.e. the Fokker-Planck equation handled by [`crate::pde`]. Each Euler-Maruyama
//! increment is therefore `v dt + √(2 dt) ξ` with `ξ ~ N(0, 1)`.
//!
//! Particle `i` draws from its own ChaCha stream `(seed, i)`, so ensembles are
//! identical whatever the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{l1_distance, uniform_grid, Grid, GridFunction, Placement};
use crate::par::Execution;
use crate::pde::{time_plan, DriftField, PlannedStep};

/// Folds `z` into `[0, 1]` through the 2-periodic even extension.
pub fn reflect(z: f64) -> f64 {
    let r = z.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time: f64,
    pub seed: u64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Inverse of the piecewise-linear CDF of a cell density.
fn inverse_cdf(cumulative: &[f64], y0: &GridFunction, u: f64) -> f64 {
    let grid = y0.grid();
    let h = grid.h();
    // cumulative[i] = mass of cells 0..i
    let target = u * cumulative[grid.n()];
    let mut i = cumulative[1..]
        .partition_point(|&c| c < target)
        .min(grid.n() - 1);
    while y0.values()[i] == 0.0 && i + 1 < grid.n() && cumulative[i + 1] <= target {
        i += 1;
    }
    let density = y0.values()[i];
    let x = if density > 0.0 {
        grid.edge(i) + (target - cumulative[i]) / density
    } else {
        grid.center(i)
    };
    x.clamp(grid.edge(i), grid.edge(i) + h)
}

/// Linear interpolation of edge values at `x`.
fn interpolate_edges(values: &[f64], grid: Grid, x: f64) -> f64 {
    let s = x / grid.h();
    let e = (s.floor() as usize).min(grid.n() - 1);
    let w = s - e as f64;
    (1.0 - w) * values[e] + w * values[e + 1]
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Step plan split into segments ending at each snapshot time.
fn snapshot_plan(
    drift: &DriftField,
    dt: f64,
    snapshots: &[f64],
) -> Result<(Vec<PlannedStep>, Vec<usize>)> {
    let mut steps = Vec::new();
    let mut ends = Vec::with_capacity(snapshots.len());
    let mut t = drift.start();
    for &s in snapshots {
        if drift.index_at(s).is_none() {
            return Err(Error::DriftUndefined(s));
        }
        if s < t {
            return Err(Error::InvalidArgument(format!(
                "snapshot times must be sorted, {s} follows {t}"
            )));
        }
        steps.extend(time_plan(drift, t, s, dt)?);
        ends.push(steps.len());
        t = s;
    }
    Ok((steps, ends))
}

/// Simulates `count` agents started from `y0` under `drift`, returning one
/// ensemble per snapshot time. Time starts at `drift.start()`.
pub fn simulate(
    y0: &GridFunction,
    count: usize,
    drift: &DriftField,
    dt: f64,
    snapshots: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<Vec<ParticleEnsemble>> {
    y0.require(Placement::Cell)?;
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    if y0.min() < 0.0 {
        return Err(Error::NegativeDensity(y0.min()));
    }
    let (plan, ends) = snapshot_plan(drift, dt, snapshots)?;
    let grid = y0.grid();
    let mut cumulative = Vec::with_capacity(grid.n() + 1);
    cumulative.push(0.0);
    for &v in y0.values() {
        cumulative.push(cumulative.last().copied().unwrap_or(0.0) + v * grid.h());
    }
    if !(cumulative[grid.n()] > 0.0) {
        return Err(Error::NonPositiveMass(cumulative[grid.n()]));
    }
    let drift_grid = drift.grid();
    let samples = drift.samples();

    let paths: Vec<Vec<f64>> = exec.map_range(count, |i| {
        let mut rng = particle_rng(seed, i);
        let mut z = inverse_cdf(&cumulative, y0, rng.random::<f64>());
        let mut out = Vec::with_capacity(ends.len());
        let mut k = 0;
        for &end in &ends {
            while k < end {
                let s = &plan[k];
                let v = interpolate_edges(samples[s.sample].values(), drift_grid, z);
                let xi: f64 = rng.sample(StandardNormal);
                z = reflect(z + v * s.dt + (2.0 * s.dt).sqrt() * xi);
                k += 1;
            }
            out.push(z);
        }
        out
    });

    Ok(snapshots
        .iter()
        .enumerate()
        .map(|(j, &t)| ParticleEnsemble {
            positions: paths.iter().map(|p| p[j]).collect(),
            time: t,
            seed,
        })
        .collect())
}

/// Particle counts per cell of a uniform grid with `bins` cells.
pub fn histogram_counts(ensemble: &ParticleEnsemble, bins: usize) -> Result<Vec<usize>> {
    let grid = uniform_grid(bins)?;
    let mut counts = vec![0; bins];
    for &z in &ensemble.positions {
        counts[grid.cell_of(z)] += 1;
    }
    Ok(counts)
}

/// Histogram density with unit mass.
pub fn empirical_density(ensemble: &ParticleEnsemble, bins: usize) -> Result<GridFunction> {
    let grid = uniform_grid(bins)?;
    let scale = 1.0 / (ensemble.len() as f64 * grid.h());
    let values = histogram_counts(ensemble, bins)?
        .into_iter()
        .map(|c| c as f64 * scale)
        .collect();
    GridFunction::cells(grid, values)
}

/// `h Σ |hist_i - y_i|` with the histogram taken on `y`'s grid.
pub fn consistency_error(ensemble: &ParticleEnsemble, y: &GridFunction) -> Result<f64> {
    y.require(Placement::Cell)?;
    l1_distance(&empirical_density(ensemble, y.grid().n())?, y)
}

/// Kolmogorov-Smirnov distance between the ensemble and a cell density.
pub fn ks_statistic(ensemble: &ParticleEnsemble, y: &GridFunction) -> Result<f64> {
    y.require(Placement::Cell)?;
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let mut sorted = ensemble.positions.clone();
    sorted.sort_by(f64::total_cmp);
    let total = y.values().iter().sum::<f64>() * y.grid().h();
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let c = y.cdf_at(z) / total;
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max))
}
