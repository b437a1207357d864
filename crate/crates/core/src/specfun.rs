//! Special functions behind the interaction kernels.
//!
//! Everything here works with normalized quantities (Hermite *functions*,
//! log-factorials) so that levels up to 100 stay finite in `f64`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use faer::{Mat, Side};

use crate::error::{EngineError, Result};

pub const LOG_FACTORIAL_MAX: usize = 200;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LOG_FACTORIAL_MAX + 1);
        t.push(0.0);
        for n in 1..=LOG_FACTORIAL_MAX {
            t.push(t[n - 1] + (n as f64).ln());
        }
        t
    })
}

/// `ln(n!)` for `n ≤ 200`.
pub fn log_factorial(n: usize) -> Result<f64> {
    log_factorial_table()
        .get(n)
        .copied()
        .ok_or_else(|| EngineError::Domain(format!("log_factorial({n}) exceeds table limit {LOG_FACTORIAL_MAX}")))
}

/// Normalized Hermite function `ψ_n(y) = H_n(y) e^{−y²/2} / √(2ⁿ n! √π)`.
pub fn hermite_function(n: usize, y: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * y * y).exp();
    for m in 1..=n {
        let mf = m as f64;
        let next = y * (2.0 / mf).sqrt() * cur - ((mf - 1.0) / mf).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ψ_0(y) … ψ_{n_max}(y)` from one pass of the recurrence.
pub fn hermite_functions(n_max: usize, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(PI.powf(-0.25) * (-0.5 * y * y).exp());
    if n_max >= 1 {
        out.push(2f64.sqrt() * y * out[0]);
    }
    for m in 2..=n_max {
        let mf = m as f64;
        let next = y * (2.0 / mf).sqrt() * out[m - 1] - ((mf - 1.0) / mf).sqrt() * out[m - 2];
        out.push(next);
    }
    out
}

/// Generalized Laguerre polynomial `L_m^a(x)` via the three-term recurrence in `m`.
///
/// `L_0^a = 1` for every `a`; higher degrees require `m + a ≥ 0`.
pub fn laguerre(m: usize, a: i64, x: f64) -> Result<f64> {
    if m > 0 && m as i64 + a < 0 {
        return Err(EngineError::Domain(format!(
            "laguerre degree {m} with order {a}: m + a must be non-negative"
        )));
    }
    Ok(*laguerre_sequence(m, a as f64, x).last().expect("non-empty"))
}

/// `L_0^a(x) … L_{m_max}^a(x)`.
pub(crate) fn laguerre_sequence(m_max: usize, a: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(1.0);
    if m_max >= 1 {
        out.push(1.0 + a - x);
    }
    for k in 1..m_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Terminating Gauss hypergeometric series `F(−u, −j; c; z)`.
///
/// The sum stops after `min(u, j) + 1` terms. A denominator `(c)_n` that
/// vanishes before termination is rejected.
pub fn hyp2f1_terminating(u: usize, j: usize, c: f64, z: f64) -> Result<f64> {
    let terms = u.min(j);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..terms {
        let nf = n as f64;
        let denom = (c + nf) * (nf + 1.0);
        if denom == 0.0 {
            return Err(EngineError::Domain(format!(
                "F(-{u},-{j};{c};z): lower parameter hits zero at term {n}"
            )));
        }
        term *= (nf - u as f64) * (nf - j as f64) * z / denom;
        sum += term;
    }
    Ok(sum)
}

/// Gauss–Hermite rule for the weight `e^{−y²}`.
///
/// `scaled_weights[i] = weights[i]·e^{y_i²}` is kept alongside the plain
/// weights; it stays O(1) at the outermost nodes where `weights` underflow
/// in relative precision, and lets callers integrate a full integrand
/// `f(y)` (Gaussian included) as `Σ scaled_weights[i]·f(y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly against `e^{−y²}`.
    pub fn exact_degree(&self) -> usize {
        2 * self.len() - 1
    }

    /// `∫ p(y) e^{−y²} dy ≈ Σ w_i p(y_i)`.
    pub fn integrate_weighted(&self, p: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * p(y)).sum()
    }

    /// `∫ f(y) dy ≈ Σ (w_i e^{y_i²}) f(y_i)`, exact when `f·e^{y²}` is a
    /// polynomial of degree at most `exact_degree()`.
    pub fn integrate_full(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Golub–Welsch construction: nodes are the eigenvalues of the Hermite
/// Jacobi matrix, polished by one Newton step on `ψ_n`. Weights use the
/// Christoffel sum `1/Σ_{k<n} ψ_k(y_i)²`, which keeps full relative
/// precision where the eigenvector components would not.
pub fn gauss_hermite_rule(n_nodes: usize) -> Result<QuadratureRule> {
    if n_nodes == 0 {
        return Err(EngineError::Domain("Gauss-Hermite rule needs at least one node".into()));
    }
    let jacobi = Mat::<f64>::from_fn(n_nodes, n_nodes, |r, c| {
        if r.abs_diff(c) == 1 {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes = jacobi
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| EngineError::Numeric(format!("Golub-Welsch eigensolve failed: {e:?}")))?;

    for y in nodes.iter_mut() {
        let psi = hermite_functions(n_nodes, *y);
        // d/dy ψ_n = √(2n) ψ_{n−1} − y ψ_n
        let deriv = (2.0 * n_nodes as f64).sqrt() * psi[n_nodes - 1] - *y * psi[n_nodes];
        if deriv != 0.0 {
            *y -= psi[n_nodes] / deriv;
        }
    }
    // Enforce exact mirror symmetry.
    for i in 0..n_nodes / 2 {
        let half = 0.5 * (nodes[n_nodes - 1 - i] - nodes[i]);
        nodes[i] = -half;
        nodes[n_nodes - 1 - i] = half;
    }
    if n_nodes % 2 == 1 {
        nodes[n_nodes / 2] = 0.0;
    }

    let scaled_weights: Vec<f64> = nodes
        .iter()
        .map(|&y| {
            let s: f64 = hermite_functions(n_nodes - 1, y).iter().map(|p| p * p).sum();
            1.0 / s
        })
        .collect();
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(&y, &w)| w * (-y * y).exp())
        .collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        scaled_weights,
    })
}
