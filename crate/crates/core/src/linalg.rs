//! Tridiagonal kernels: Thomas elimination, diagonal symmetrization, and a
//! Sturm-sequence bisection eigensolver for symmetric tridiagonal matrices.

use crate::error::{Error, Result};

/// Tridiagonal matrix acting on cell values.
///
/// Row `i` reads `sub[i] y[i-1] + diag[i] y[i] + sup[i] y[i+1]`; `sub[0]` and
/// `sup[n-1]` are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn zeros(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * y[i];
                if i > 0 {
                    acc += self.sub[i] * y[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * y[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `L y` written as a difference of interface fluxes
    /// `F_e = sup[e-1] y[e] - sub[e] y[e-1]`, which equals [`Self::apply`] when
    /// every column sums to zero. The sum of the result then telescopes, so the
    /// conserved total only sees round-off of the fluxes themselves.
    pub fn apply_conservative(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        let flux = |e: usize| {
            if e == 0 || e == n {
                0.0
            } else {
                self.sup[e - 1] * y[e] - self.sub[e] * y[e - 1]
            }
        };
        (0..n).map(|i| flux(i + 1) - flux(i)).collect()
    }

    /// Column sums; zero columns mean `sum(L y) = 0` for every `y`.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.sup[j - 1];
                }
                if j + 1 < n {
                    s += self.sub[j + 1];
                }
                s
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * factor).collect();
        Self {
            sub: s(&self.sub),
            diag: s(&self.diag),
            sup: s(&self.sup),
        }
    }

    /// `identity * I + factor * self`.
    pub fn shifted(&self, identity: f64, factor: f64) -> Self {
        let mut out = self.scaled(factor);
        out.diag.iter_mut().for_each(|d| *d += identity);
        out
    }

    /// Solves `self x = rhs` by Thomas elimination (no pivoting).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem(0));
        }
        c[0] = self.sup[0] / pivot;
        x[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem(i));
            }
            c[i] = if i + 1 < n { self.sup[i] / pivot } else { 0.0 };
            x[i] = (rhs[i] - self.sub[i] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Diagonal similarity `S = D L D^{-1}` that makes `L` symmetric.
    ///
    /// Needs `sup[i] * sub[i+1] > 0` for every coupling. Returns `S` and the diagonal
    /// of `D`, so that eigenvectors map back as `y = D^{-1} s`.
    pub fn symmetrize(&self) -> Result<(SymmetricTridiagonal, Vec<f64>)> {
        let n = self.len();
        let mut log_d = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n - 1 {
            let (up, down) = (self.sup[i], self.sub[i + 1]);
            if !(up * down > 0.0) {
                return Err(Error::Eigen(format!(
                    "coupling {i} has non-positive product {up} * {down}"
                )));
            }
            log_d[i + 1] = log_d[i] + 0.5 * (up.abs().ln() - down.abs().ln());
            off[i] = up.signum() * (up * down).sqrt();
        }
        let shift = log_d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d = log_d.iter().map(|l| (l - shift).exp()).collect();
        Ok((
            SymmetricTridiagonal {
                diag: self.diag.clone(),
                off,
            },
            d,
        ))
    }
}

/// Symmetric tridiagonal matrix: `diag` of length `n`, `off` of length `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymmetricTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn as_operator(&self) -> TridiagonalOperator {
        let n = self.len();
        let mut op = TridiagonalOperator::zeros(n);
        op.diag.clone_from(&self.diag);
        for i in 0..n - 1 {
            op.sup[i] = self.off[i];
            op.sub[i + 1] = self.off[i];
        }
        op
    }

    /// Gershgorin interval enclosing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` largest eigenvalues in descending order, by bisection.
    pub fn largest_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if k > n {
            return Err(Error::InvalidArgument(format!(
                "requested {k} eigenvalues of a {n}x{n} matrix"
            )));
        }
        let (glo, ghi) = self.gershgorin();
        let pad = f64::EPSILON * (glo.abs().max(ghi.abs()) + 1.0);
        (0..k)
            .map(|j| {
                // Ascending index of the j-th largest eigenvalue.
                let idx = n - 1 - j;
                let (mut lo, mut hi) = (glo - pad, ghi + pad);
                for _ in 0..256 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.count_below(mid) > idx {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let value = 0.5 * (lo + hi);
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::Eigen(format!("bisection diverged for index {idx}")))
                }
            })
            .collect()
    }

    /// Eigenvector of the largest eigenvalue `top`, normalized to unit 2-norm and
    /// positive sum.
    ///
    /// Runs inverse iteration on `(top + shift) I - S`, which is positive definite,
    /// so Thomas elimination is stable.
    pub fn principal_eigenvector(&self, top: f64, gap: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let shift = (1e-6 * gap.abs()).max(1e-12 * (1.0 + top.abs()));
        let system = self.as_operator().shifted(top + shift, -1.0);
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        for _ in 0..8 {
            let w = system.solve(&v)?;
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Eigen("inverse iteration collapsed".into()));
            }
            v = w.into_iter().map(|x| x / norm).collect();
        }
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_dominant(n: usize, seed: u64) -> TridiagonalOperator {
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut op = TridiagonalOperator::zeros(n);
        for i in 0..n {
            if i > 0 {
                op.sub[i] = next() - 0.5;
            }
            if i + 1 < n {
                op.sup[i] = next() - 0.5;
            }
            op.diag[i] = 2.0 + next();
        }
        op
    }

    #[test]
    fn thomas_matches_multiplication() {
        let op = random_dominant(17, 3);
        let x: Vec<f64> = (0..17).map(|i| (i as f64).sin()).collect();
        let b = op.apply(&x);
        let y = op.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let mut op = TridiagonalOperator::zeros(4);
        op.diag = vec![1.0, 0.0, 1.0, 1.0];
        assert_eq!(op.solve(&[1.0; 4]), Err(Error::SingularSystem(1)));
    }

    #[test]
    fn bisection_recovers_path_laplacian() {
        // Dirichlet path: eigenvalues 2 - 2 cos(kπ/(n+1)).
        let n = 30;
        let s = SymmetricTridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        };
        let got = s.largest_eigenvalues(n).unwrap();
        for (j, g) in got.iter().enumerate() {
            let k = (n - j) as f64;
            let want = 2.0 - 2.0 * (k * PI / (n as f64 + 1.0)).cos();
            assert_abs_diff_eq!(*g, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn principal_vector_of_neumann_laplacian_is_constant() {
        let n = 12;
        let mut diag = vec![-2.0; n];
        diag[0] = -1.0;
        diag[n - 1] = -1.0;
        let s = SymmetricTridiagonal {
            diag,
            off: vec![1.0; n - 1],
        };
        let ev = s.largest_eigenvalues(2).unwrap();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-13);
        let v = s.principal_eigenvector(ev[0], ev[0] - ev[1]).unwrap();
        for x in &v {
            assert_abs_diff_eq!(*x, 1.0 / (n as f64).sqrt(), epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn symmetrization_is_a_similarity(seed in 0u64..1000) {
            let mut op = random_dominant(9, seed);
            // force positive couplings
            for i in 0..8 {
                op.sup[i] = op.sup[i].abs() + 0.1;
                op.sub[i + 1] = op.sub[i + 1].abs() + 0.1;
            }
            let (s, d) = op.symmetrize().unwrap();
            let sop = s.as_operator();
            // S D y = D L y for any y
            let y: Vec<f64> = (0..9).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
            let ly = op.apply(&y);
            let dy: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a * b).collect();
            let sdy = sop.apply(&dy);
            for i in 0..9 {
                prop_assert!((sdy[i] - d[i] * ly[i]).abs() < 1e-10 * (1.0 + ly[i].abs()));
            }
        }
    }
}
