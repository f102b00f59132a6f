//! Uniform cell-centered discretization of `(0, 1)`.
//!
//! Densities live on cells (`n` values at `x_i = (i + 1/2) h`), fluxes and drifts on
//! edges (`n + 1` values at `x_{i+1/2} = i h`). Integrals use the midpoint rule on
//! cells and the trapezoid rule on edges.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

/// Builds the uniform grid with `n` cells on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Result<Grid> {
    if n < MIN_CELLS {
        return Err(Error::GridTooSmall(n));
    }
    Ok(Grid {
        n,
        h: 1.0 / n as f64,
    })
}

impl Grid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn edge(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.edge(i)).collect()
    }

    /// Index of the cell containing `x`; `x = 1` belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.n as f64).floor().max(0.0) as usize).min(self.n - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Cell,
    Edge,
}

impl Placement {
    fn name(self) -> &'static str {
        match self {
            Placement::Cell => "cell",
            Placement::Edge => "edge",
        }
    }

    fn len(self, grid: &Grid) -> usize {
        match self {
            Placement::Cell => grid.n,
            Placement::Edge => grid.n + 1,
        }
    }
}

/// Values attached to the cells or edges of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    placement: Placement,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, placement: Placement, values: Vec<f64>) -> Result<Self> {
        let expected = placement.len(&grid);
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{} function on {} cells needs {} values, got {}",
                placement.name(),
                grid.n,
                expected,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self {
            grid,
            placement,
            values,
        })
    }

    pub fn cells(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, Placement::Cell, values)
    }

    pub fn edges(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, Placement::Edge, values)
    }

    /// Samples `func` at the cell centers.
    pub fn from_fn(grid: Grid, func: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            placement: Placement::Cell,
            values: grid.centers().into_iter().map(func).collect(),
        }
    }

    /// Samples `func` at the edges.
    pub fn edges_from_fn(grid: Grid, func: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            placement: Placement::Edge,
            values: grid.edges().into_iter().map(func).collect(),
        }
    }

    pub fn constant(grid: Grid, placement: Placement, value: f64) -> Self {
        Self {
            grid,
            placement,
            values: vec![value; placement.len(&grid)],
        }
    }

    pub fn zero_edges(grid: Grid) -> Self {
        Self::constant(grid, Placement::Edge, 0.0)
    }

    /// Wraps values that are known to be finite and of the right length.
    pub(crate) fn from_parts(grid: Grid, placement: Placement, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), placement.len(&grid));
        Self {
            grid,
            placement,
            values,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, func: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.grid,
            self.placement,
            self.values.iter().map(|&v| func(v)).collect(),
        )
    }

    /// Pointwise combination of two functions with the same grid and placement.
    pub fn zip_map(&self, other: &Self, func: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self::from_parts(
            self.grid,
            self.placement,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| func(a, b))
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid.n != other.grid.n {
            return Err(Error::GridMismatch(self.grid.n, other.grid.n));
        }
        if self.placement != other.placement {
            return Err(Error::Placement {
                expected: self.placement.name(),
                found: other.placement.name(),
            });
        }
        Ok(())
    }

    pub(crate) fn require(&self, placement: Placement) -> Result<()> {
        if self.placement != placement {
            return Err(Error::Placement {
                expected: placement.name(),
                found: self.placement.name(),
            });
        }
        Ok(())
    }

    /// Quadrature weights: `h` per cell, trapezoid weights per edge.
    fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.grid.h;
        let last = self.values.len() - 1;
        let edge = self.placement == Placement::Edge;
        (0..self.values.len()).map(move |i| {
            if edge && (i == 0 || i == last) {
                0.5 * h
            } else {
                h
            }
        })
    }

    /// `∫ p q w dx` with the placement's quadrature; `weight` defaults to 1.
    pub fn inner(&self, other: &Self, weight: Option<&Self>) -> Result<f64> {
        self.check_compatible(other)?;
        if let Some(w) = weight {
            self.check_compatible(w)?;
        }
        Ok(self
            .weights()
            .enumerate()
            .map(|(i, q)| {
                let w = weight.map_or(1.0, |w| w.values[i]);
                q * self.values[i] * other.values[i] * w
            })
            .sum())
    }

    /// Averages blocks of cells onto a coarser grid with `bins` cells.
    pub fn coarsen(&self, bins: usize) -> Result<Self> {
        self.require(Placement::Cell)?;
        let n = self.grid.n;
        if bins == 0 || !n.is_multiple_of(bins) {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {n} cells onto {bins} bins"
            )));
        }
        let coarse = uniform_grid(bins)?;
        let ratio = n / bins;
        let values = self
            .values
            .chunks(ratio)
            .map(|c| c.iter().sum::<f64>() / ratio as f64)
            .collect();
        Ok(Self::from_parts(coarse, Placement::Cell, values))
    }

    /// Cumulative distribution of a cell density at `x`, linear within cells.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let h = self.grid.h;
        let x = x.clamp(0.0, 1.0);
        let cell = self.grid.cell_of(x);
        let below: f64 = self.values[..cell].iter().sum::<f64>() * h;
        below + self.values[cell] * (x - self.grid.edge(cell))
    }
}

/// Analytic presets used for initial and target densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySpec {
    Uniform,
    /// `1 + amplitude sin(2π k x)`
    Sine {
        amplitude: f64,
        k: f64,
    },
    /// `exp(-(x - mu)² / (2 sigma²))`
    GaussianBump {
        mu: f64,
        sigma: f64,
    },
    /// Sum of two equal-width Gaussian bumps.
    Bimodal {
        mu1: f64,
        mu2: f64,
        sigma: f64,
    },
    /// `lo` on `x < split`, `hi` on `x >= split`.
    Step {
        lo: f64,
        hi: f64,
        split: f64,
    },
}

impl DensitySpec {
    pub fn eval(&self, x: f64) -> f64 {
        let gauss = |mu: f64, sigma: f64| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp();
        match *self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::Sine { amplitude, k } => 1.0 + amplitude * (2.0 * PI * k * x).sin(),
            DensitySpec::GaussianBump { mu, sigma } => gauss(mu, sigma),
            DensitySpec::Bimodal { mu1, mu2, sigma } => gauss(mu1, sigma) + gauss(mu2, sigma),
            DensitySpec::Step { lo, hi, split } => {
                if x < split {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    /// True for presets whose projection is piecewise smooth but discontinuous.
    pub fn is_discontinuous(&self) -> bool {
        matches!(self, DensitySpec::Step { .. })
    }
}

fn parse_params(spec: &str, parts: &[&str], expected: usize) -> Result<Vec<f64>> {
    let err = |reason: String| Error::DensitySpec {
        spec: spec.to_string(),
        reason,
    };
    if parts.len() != expected {
        return Err(err(format!(
            "expected {expected} parameters, got {}",
            parts.len()
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{p}` is not a finite decimal")))
        })
        .collect()
}

impl FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let err = |reason: &str| Error::DensitySpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let spec = match name {
            "uniform" => {
                parse_params(s, &rest, 0)?;
                DensitySpec::Uniform
            }
            "sine" => {
                let p = parse_params(s, &rest, 2)?;
                if p[0].abs() > 1.0 {
                    return Err(err("amplitude must lie in [-1, 1]"));
                }
                DensitySpec::Sine {
                    amplitude: p[0],
                    k: p[1],
                }
            }
            "gaussian_bump" => {
                let p = parse_params(s, &rest, 2)?;
                if p[1] <= 0.0 {
                    return Err(err("sigma must be positive"));
                }
                DensitySpec::GaussianBump {
                    mu: p[0],
                    sigma: p[1],
                }
            }
            "bimodal" => {
                let p = parse_params(s, &rest, 3)?;
                if p[2] <= 0.0 {
                    return Err(err("sigma must be positive"));
                }
                DensitySpec::Bimodal {
                    mu1: p[0],
                    mu2: p[1],
                    sigma: p[2],
                }
            }
            "step" => {
                let p = parse_params(s, &rest, 3)?;
                if p[0] < 0.0 || p[1] < 0.0 {
                    return Err(err("step levels must be nonnegative"));
                }
                if !(0.0..=1.0).contains(&p[2]) {
                    return Err(err("split must lie in [0, 1]"));
                }
                DensitySpec::Step {
                    lo: p[0],
                    hi: p[1],
                    split: p[2],
                }
            }
            _ => return Err(err("unknown preset")),
        };
        Ok(spec)
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DensitySpec::Uniform => write!(f, "uniform"),
            DensitySpec::Sine { amplitude, k } => write!(f, "sine:{amplitude}:{k}"),
            DensitySpec::GaussianBump { mu, sigma } => write!(f, "gaussian_bump:{mu}:{sigma}"),
            DensitySpec::Bimodal { mu1, mu2, sigma } => write!(f, "bimodal:{mu1}:{mu2}:{sigma}"),
            DensitySpec::Step { lo, hi, split } => write!(f, "step:{lo}:{hi}:{split}"),
        }
    }
}

/// Samples a preset at the cell centers. The result is not normalized.
pub fn project(spec: &DensitySpec, grid: Grid) -> GridFunction {
    GridFunction::from_fn(grid, |x| spec.eval(x))
}

/// Midpoint-rule integral of a cell function.
pub fn mass(y: &GridFunction) -> Result<f64> {
    y.require(Placement::Cell)?;
    Ok(y.grid.h * y.values.iter().sum::<f64>())
}

pub fn normalize(y: &GridFunction) -> Result<GridFunction> {
    let m = mass(y)?;
    if !(m > 0.0) {
        return Err(Error::NonPositiveMass(m));
    }
    Ok(y.scale(1.0 / m))
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    L2,
    Linf,
    H1,
    H2,
    WeightedL2(GridFunction),
}

/// Edge-placed forward differences `(y_{i+1} - y_i) / h` with zero boundary edges.
pub fn derivative(y: &GridFunction) -> Result<GridFunction> {
    derivative_with_boundary(y, 0.0, 0.0)
}

/// As [`derivative`], with explicit values on the two boundary edges.
pub fn derivative_with_boundary(y: &GridFunction, left: f64, right: f64) -> Result<GridFunction> {
    y.require(Placement::Cell)?;
    let h = y.grid.h;
    let mut d = Vec::with_capacity(y.len() + 1);
    d.push(left);
    d.extend(y.values.windows(2).map(|w| (w[1] - w[0]) / h));
    d.push(right);
    GridFunction::edges(y.grid, d)
}

/// Cell-placed differences of an edge function, `(e_{i+1} - e_i) / h`.
pub fn edge_divergence(e: &GridFunction) -> Result<GridFunction> {
    e.require(Placement::Edge)?;
    let h = e.grid.h;
    Ok(GridFunction::from_parts(
        e.grid,
        Placement::Cell,
        e.values.windows(2).map(|w| (w[1] - w[0]) / h).collect(),
    ))
}

fn l2_squared(y: &GridFunction) -> f64 {
    y.weights()
        .zip(&y.values)
        .map(|(w, v)| w * v * v)
        .sum::<f64>()
}

pub fn norm(y: &GridFunction, kind: &NormKind) -> Result<f64> {
    let value = match kind {
        NormKind::L2 => l2_squared(y).sqrt(),
        NormKind::Linf => y.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        NormKind::H1 => {
            let d = match y.placement {
                Placement::Cell => derivative(y)?,
                Placement::Edge => edge_divergence(y)?,
            };
            (l2_squared(y) + l2_squared(&d)).sqrt()
        }
        NormKind::H2 => {
            y.require(Placement::Cell)?;
            let d = derivative(y)?;
            let dd = edge_divergence(&d)?;
            (l2_squared(y) + l2_squared(&d) + l2_squared(&dd)).sqrt()
        }
        NormKind::WeightedL2(weight) => {
            if weight.len() != y.len() {
                return Err(Error::GridMismatch(y.len(), weight.len()));
            }
            let wmin = weight.min();
            if !(wmin > 0.0) {
                return Err(Error::NonPositiveWeight(wmin));
            }
            y.inner(y, Some(weight))?.sqrt()
        }
    };
    Ok(value)
}

/// Shorthand for the L² norm of `p - q`.
pub fn l2_distance(p: &GridFunction, q: &GridFunction) -> Result<f64> {
    norm(&p.sub(q)?, &NormKind::L2)
}

/// `∫ |p - q| dx` for cell functions on the same grid.
pub fn l1_distance(p: &GridFunction, q: &GridFunction) -> Result<f64> {
    p.check_compatible(q)?;
    p.require(Placement::Cell)?;
    Ok(p.grid.h
        * p.values
            .iter()
            .zip(&q.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sine() -> DensitySpec {
        "sine:0.5:1".parse().unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = uniform_grid(4).unwrap();
        assert_eq!(g.edges(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = uniform_grid(10).unwrap();
        assert_abs_diff_eq!(g.center(0), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(g.center(9), 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(g.h() * g.n() as f64, 1.0, epsilon = 1e-15);
        assert_eq!(uniform_grid(3), Err(Error::GridTooSmall(3)));
    }

    #[test]
    fn presets_project_at_centers() {
        let g = uniform_grid(10).unwrap();
        assert!(project(&DensitySpec::Uniform, g)
            .values()
            .iter()
            .all(|&v| v == 1.0));

        assert_abs_diff_eq!(sine().eval(0.25), 1.5, epsilon = 1e-15);
        let bump: DensitySpec = "gaussian_bump:0.5:0.1".parse().unwrap();
        assert_abs_diff_eq!(bump.eval(0.5), 1.0, epsilon = 1e-15);

        let g = uniform_grid(20).unwrap();
        let y = project(&sine(), g);
        let i = g.cell_of(0.25);
        assert_abs_diff_eq!(y.values()[i], sine().eval(g.center(i)), epsilon = 1e-15);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "step:0.2:1.8:0.5".parse::<DensitySpec>().unwrap(),
            DensitySpec::Step {
                lo: 0.2,
                hi: 1.8,
                split: 0.5
            }
        );
        assert!("bimodal:0.25:0.75:0.1".parse::<DensitySpec>().is_ok());
        assert!("Uniform".parse::<DensitySpec>().is_err());
        assert!("sine:0.5".parse::<DensitySpec>().is_err());
        assert!("sine:a:1".parse::<DensitySpec>().is_err());
        assert!("triangle:1".parse::<DensitySpec>().is_err());
        let s = sine();
        assert_eq!(s.to_string().parse::<DensitySpec>().unwrap(), s);
    }

    #[test]
    fn mass_and_normalize() {
        let g = uniform_grid(8).unwrap();
        let one = GridFunction::constant(g, Placement::Cell, 1.0);
        let two = GridFunction::constant(g, Placement::Cell, 2.0);
        assert_abs_diff_eq!(mass(&one).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mass(&two).unwrap(), 2.0, epsilon = 1e-15);
        let n2 = normalize(&two).unwrap();
        assert!(n2.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(normalize(&one).unwrap(), one);
        let zero = GridFunction::constant(g, Placement::Cell, 0.0);
        assert!(matches!(normalize(&zero), Err(Error::NonPositiveMass(_))));

        // Midpoint rule integrates a full sine period exactly.
        let y = project(&sine(), uniform_grid(37).unwrap());
        assert_abs_diff_eq!(mass(&y).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn norms_of_constants() {
        let g = uniform_grid(16).unwrap();
        let one = GridFunction::constant(g, Placement::Cell, 1.0);
        assert_abs_diff_eq!(norm(&one, &NormKind::L2).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(norm(&one, &NormKind::H1).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(norm(&one, &NormKind::H2).unwrap(), 1.0, epsilon = 1e-14);
        let four = GridFunction::constant(g, Placement::Cell, 4.0);
        assert_abs_diff_eq!(
            norm(&one, &NormKind::WeightedL2(four)).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        let short = GridFunction::constant(uniform_grid(8).unwrap(), Placement::Cell, 1.0);
        assert!(norm(&one, &NormKind::WeightedL2(short)).is_err());
        let neg = GridFunction::constant(g, Placement::Cell, -1.0);
        assert!(norm(&one, &NormKind::WeightedL2(neg)).is_err());
    }

    #[test]
    fn derivative_cases() {
        let g = uniform_grid(12).unwrap();
        let c = GridFunction::constant(g, Placement::Cell, 3.0);
        let d = derivative(&c).unwrap();
        assert_eq!(d.len(), 13);
        assert!(d.values().iter().all(|&v| v == 0.0));

        let lin = GridFunction::from_fn(g, |x| 2.0 * x);
        let d = derivative(&lin).unwrap();
        for &v in &d.values()[1..12] {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }

        let g = uniform_grid(200).unwrap();
        let d = derivative(&project(&sine(), g)).unwrap();
        // Edge 100 sits at x = 0.5 where d/dx (1 + 0.5 sin 2πx) = π cos π.
        assert_abs_diff_eq!(d.values()[100], -PI, epsilon = 1e-3);
    }

    #[test]
    fn derivative_converges_second_order() {
        let errs: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| {
                let g = uniform_grid(n).unwrap();
                let d = derivative(&project(&sine(), g)).unwrap();
                (1..n)
                    .map(|i| {
                        let x = g.edge(i);
                        (d.values()[i] - PI * (2.0 * PI * x).cos()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "order {order}");
        }
    }

    #[test]
    fn coarsen_and_cdf() {
        let g = uniform_grid(8).unwrap();
        let y = GridFunction::cells(g, vec![1., 3., 1., 3., 0., 2., 0., 2.]).unwrap();
        let c = y.coarsen(4).unwrap();
        assert_eq!(c.values(), &[2.0, 2.0, 1.0, 1.0]);
        assert!(y.coarsen(3).is_err());
        let u = GridFunction::constant(g, Placement::Cell, 1.0);
        assert_abs_diff_eq!(u.cdf_at(0.3), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(u.cdf_at(1.0), 1.0, epsilon = 1e-15);
    }

    fn cell_fn(n: usize) -> impl Strategy<Value = GridFunction> {
        prop::collection::vec(-10.0..10.0f64, n)
            .prop_map(move |v| GridFunction::cells(uniform_grid(n).unwrap(), v).unwrap())
    }

    proptest! {
        #[test]
        fn mass_is_linear(p in cell_fn(9), q in cell_fn(9), a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let comb = p.zip_map(&q, |x, y| a * x + b * y).unwrap();
            let lhs = mass(&comb).unwrap();
            let rhs = a * mass(&p).unwrap() + b * mass(&q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn l2_is_a_norm(p in cell_fn(11), q in cell_fn(11), a in -5.0..5.0f64) {
            let sum = p.zip_map(&q, |x, y| x + y).unwrap();
            let np = norm(&p, &NormKind::L2).unwrap();
            let nq = norm(&q, &NormKind::L2).unwrap();
            prop_assert!(norm(&sum, &NormKind::L2).unwrap() <= np + nq + 1e-12);
            let scaled = norm(&p.scale(a), &NormKind::L2).unwrap();
            prop_assert!((scaled - a.abs() * np).abs() <= 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn unit_weight_matches_l2(p in cell_fn(7)) {
            let w = GridFunction::constant(p.grid(), Placement::Cell, 1.0);
            let a = norm(&p, &NormKind::L2).unwrap();
            let b = norm(&p, &NormKind::WeightedL2(w)).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a));
        }
    }
}
