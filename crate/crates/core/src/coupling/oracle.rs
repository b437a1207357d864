//! Brute-force reference for `⟨u,v|Φ|j,k⟩`: a tensor-product trapezoid rule
//! applied directly to the two-dimensional position integral.
//!
//! This path shares nothing with the Fourier/Laguerre and hypergeometric
//! routes: wavefunctions come from raw Hermite polynomials with explicit
//! normalization, and the coupling is evaluated in position space. It is
//! meant for verification at modest levels (≲ 60), not for production use.

use std::f64::consts::PI;

use faer::Mat;

use super::{CouplingSpec, Geometry};

/// Tensor grid over `[−extent, extent]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub points: usize,
    pub extent: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            points: 400,
            extent: 10.0,
        }
    }
}

impl OracleGrid {
    fn abscissae(&self) -> (Vec<f64>, f64) {
        let h = 2.0 * self.extent / (self.points - 1) as f64;
        ((0..self.points).map(|i| -self.extent + i as f64 * h).collect(), h)
    }
}

/// `ψ_n(x)` from the physicists' Hermite polynomial and `1/√(2ⁿ n! √π)`.
fn wavefunction(n: usize, x: f64) -> f64 {
    let mut h_prev = 1.0;
    let mut h = 1.0;
    if n >= 1 {
        h = 2.0 * x;
    }
    for m in 1..n {
        let next = 2.0 * x * h - 2.0 * m as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    let log_norm = 0.5 * (n as f64 * 2f64.ln() + (1..=n).map(|i| (i as f64).ln()).sum::<f64>() + 0.5 * PI.ln());
    h * (-0.5 * x * x - log_norm).exp()
}

/// All elements with levels `≤ max_level`, indexed as
/// `table[(u·L + j)·L² + (v·L + k)]` with `L = max_level + 1`.
pub fn interaction_table_2d(max_level: usize, spec: &CouplingSpec, lambda: f64, grid: OracleGrid) -> Vec<f64> {
    let l = max_level + 1;
    let (xs, h) = grid.abscissae();
    let np = xs.len();
    // Products of oscillator-1 and oscillator-2 wavefunction pairs on the grid.
    let psi1: Vec<Vec<f64>> = (0..l)
        .map(|n| xs.iter().map(|&x| wavefunction(n, x)).collect())
        .collect();
    let psi2: Vec<Vec<f64>> = (0..l)
        .map(|n| {
            xs.iter()
                .map(|&x| wavefunction(n, x / lambda) / lambda.sqrt())
                .collect()
        })
        .collect();
    let f = Mat::<f64>::from_fn(l * l, np, |p, i| psi1[p / l][i] * psi1[p % l][i]);
    let g = Mat::<f64>::from_fn(l * l, np, |p, i| psi2[p / l][i] * psi2[p % l][i]);
    let s2 = spec.sigma * spec.sigma;
    let kernel = Mat::<f64>::from_fn(np, np, |a, b| {
        let (x1, x2) = (xs[a], xs[b]);
        let arg = match spec.geometry {
            Geometry::Parallel => (x1 - x2) * (x1 - x2),
            Geometry::Perpendicular => x1 * x1 + x2 * x2,
        };
        spec.phi0 * (-arg / (2.0 * s2)).exp() * h * h
    });
    let m = &f * &kernel * g.transpose();
    let mut table = vec![0.0; l * l * l * l];
    for u in 0..l {
        for j in 0..l {
            for v in 0..l {
                for k in 0..l {
                    table[(u * l + j) * l * l + v * l + k] = m[(u * l + j, v * l + k)];
                }
            }
        }
    }
    table
}

/// Looks up `⟨u,v|Φ|j,k⟩` in a table from [`interaction_table_2d`].
pub fn table_element(table: &[f64], max_level: usize, u: usize, v: usize, j: usize, k: usize) -> f64 {
    let l = max_level + 1;
    table[(u * l + j) * l * l + v * l + k]
}

/// Single element by the 2D oracle.
pub fn element_oracle_2d(
    u: usize,
    v: usize,
    j: usize,
    k: usize,
    spec: &CouplingSpec,
    lambda: f64,
    grid: OracleGrid,
) -> f64 {
    let (xs, h) = grid.abscissae();
    let w1: Vec<f64> = xs.iter().map(|&x| wavefunction(u, x) * wavefunction(j, x)).collect();
    let w2: Vec<f64> = xs
        .iter()
        .map(|&x| wavefunction(v, x / lambda) * wavefunction(k, x / lambda) / lambda)
        .collect();
    let s2 = spec.sigma * spec.sigma;
    let mut acc = 0.0;
    for (a, &x1) in xs.iter().enumerate() {
        if w1[a] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for (b, &x2) in xs.iter().enumerate() {
            let arg = match spec.geometry {
                Geometry::Parallel => (x1 - x2) * (x1 - x2),
                Geometry::Perpendicular => x1 * x1 + x2 * x2,
            };
            row += (-arg / (2.0 * s2)).exp() * w2[b];
        }
        acc += w1[a] * row;
    }
    spec.phi0 * acc * h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wavefunctions_match_closed_forms() {
        let g = PI.powf(-0.25);
        for x in [-1.5, 0.0, 0.4, 2.0] {
            assert_relative_eq!(wavefunction(0, x), g * (-x * x / 2.0).exp(), epsilon = 1e-15);
            assert_relative_eq!(
                wavefunction(1, x),
                g * 2f64.sqrt() * x * (-x * x / 2.0).exp(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn oracle_reproduces_canonical_values() {
        let par = CouplingSpec::new(Geometry::Parallel, -10.0, 0.5).unwrap();
        let perp = CouplingSpec::new(Geometry::Perpendicular, -10.0, 0.5).unwrap();
        let grid = OracleGrid::default();
        let v = element_oracle_2d(0, 0, 0, 0, &par, 1.0, grid);
        assert!((v + 2.0 * 5f64.sqrt()).abs() < 1e-8, "{v}");
        let v = element_oracle_2d(2, 0, 0, 0, &perp, 1.0, grid);
        assert!((v - 1.571_348_4).abs() < 1e-6, "{v}");
        let zero = CouplingSpec::new(Geometry::Parallel, 0.0, 0.5).unwrap();
        assert_eq!(element_oracle_2d(1, 1, 0, 0, &zero, 1.0, grid), 0.0);
    }

    #[test]
    fn table_agrees_with_single_elements() {
        let par = CouplingSpec::new(Geometry::Parallel, -10.0, 0.5).unwrap();
        let grid = OracleGrid {
            points: 200,
            extent: 9.0,
        };
        let t = interaction_table_2d(2, &par, 1.3, grid);
        for &(u, v, j, k) in &[(0, 0, 0, 0), (1, 1, 0, 0), (2, 0, 1, 1), (2, 2, 2, 2)] {
            let a = table_element(&t, 2, u, v, j, k);
            let b = element_oracle_2d(u, v, j, k, &par, 1.3, grid);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
