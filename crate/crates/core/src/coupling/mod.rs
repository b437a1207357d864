//! Gaussian interaction matrix elements `⟨u,v|Φ|j,k⟩`.
//!
//! Two geometries are supported:
//!
//! * **parallel**: `Φ(x₁ − x₂) = Φ₀ e^{−(x₁−x₂)²/2σ²}`. The 2D integral is
//!   split through the Fourier transform of `Φ` into a single γ-integral over
//!   a product of two one-dimensional overlaps `Ξ(γl, u, j)`, each a Laguerre
//!   polynomial times a Gaussian. The remaining γ-integral is a Gaussian times
//!   a polynomial and is done exactly by Gauss–Hermite quadrature.
//! * **perpendicular**: `Φ(x₁² + x₂²) = Φ₀ e^{−(x₁²+x₂²)/2σ²}` factorizes into
//!   two overlaps `Σ(αl², u, j)` given by a terminating hypergeometric series.

pub mod cache;
pub mod oracle;

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ModeTruncation;
use crate::config::EngineConfig;
use crate::error::{EngineError, Result};
use crate::specfun::{
    gauss_hermite_rule, hermite_functions, hyp2f1_terminating, laguerre_sequence, log_factorial, QuadratureRule,
};

/// Orders above this use quadrature instead of the hypergeometric closed form.
pub const SIGMA_CLOSED_FORM_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Parallel,
    Perpendicular,
}

impl Geometry {
    pub fn as_str(&self) -> &'static str {
        match self {
            Geometry::Parallel => "parallel",
            Geometry::Perpendicular => "perpendicular",
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Geometry::Parallel => 0,
            Geometry::Perpendicular => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Geometry::Parallel),
            1 => Some(Geometry::Perpendicular),
            _ => None,
        }
    }

    /// Whether `⟨u,v|Φ|j,k⟩` is allowed by the parity selection rule.
    pub fn allows(&self, u: usize, v: usize, j: usize, k: usize) -> bool {
        match self {
            Geometry::Parallel => (u + j + v + k).is_multiple_of(2),
            Geometry::Perpendicular => (u + j).is_multiple_of(2) && (v + k).is_multiple_of(2),
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian coupling of amplitude `phi0` (ħΩ₁) and width `sigma` (l₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub geometry: Geometry,
    pub phi0: f64,
    pub sigma: f64,
}

impl CouplingSpec {
    pub fn new(geometry: Geometry, phi0: f64, sigma: f64) -> Result<Self> {
        let spec = Self { geometry, phi0, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(EngineError::config(
                "sigma",
                format!("must be finite and > 0 (got {})", self.sigma),
            ));
        }
        if !self.phi0.is_finite() {
            return Err(EngineError::config("phi0", "must be finite"));
        }
        Ok(())
    }
}

/// Fourier amplitude `Φ_γ = Φ₀σ e^{−γ²σ²/2}/√(2π)` of the parallel coupling.
pub fn phi_gamma_gaussian(gamma: f64, spec: &CouplingSpec) -> Result<f64> {
    if spec.geometry != Geometry::Parallel {
        return Err(EngineError::Usage(
            "Fourier amplitude is defined for the parallel geometry only".into(),
        ));
    }
    Ok(phi_gamma(gamma, spec.phi0, spec.sigma))
}

fn phi_gamma(gamma: f64, phi0: f64, sigma: f64) -> f64 {
    phi0 * sigma * (-0.5 * gamma * gamma * sigma * sigma).exp() / (2.0 * PI).sqrt()
}

/// Real factor of `Ξ`: `Ξ(g, u, j) = (−i)^{|u−j|} · xi_real(g, u, j)`.
///
/// Symmetric in `(u, j)`; the prefactor is built in log space.
fn xi_real(g: f64, u: usize, j: usize) -> f64 {
    let (hi, lo) = if u >= j { (u, j) } else { (j, u) };
    let n = hi - lo;
    let lag = *laguerre_sequence(lo, n as f64, 0.5 * g * g).last().expect("non-empty");
    xi_prefactor(g, hi, lo) * lag
}

fn xi_prefactor(g: f64, hi: usize, lo: usize) -> f64 {
    let n = hi - lo;
    if n > 0 && g == 0.0 {
        return 0.0;
    }
    let mut log_mag = -0.25 * g * g
        + 0.5 * (log_factorial(lo).expect("level within table") - log_factorial(hi).expect("level within table"));
    if n > 0 {
        log_mag += n as f64 * (g.abs() / SQRT_2).ln();
    }
    let sign = if g < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * log_mag.exp()
}

/// `(−i)^n`
fn minus_i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// One-dimensional Fourier overlap `Ξ(g, u, j) = ∫ ψ_u(y) ψ_j(y) e^{−igy} dy`
/// with `g = γl`.
pub fn xi(g: f64, u: usize, j: usize) -> Complex64 {
    minus_i_pow(u.abs_diff(j)) * xi_real(g, u, j)
}

/// All `xi_real(g, u, j)` for `u, j ≤ n_max`, row-major in `(u, j)`.
fn xi_real_table(g: f64, n_max: usize) -> Vec<f64> {
    let dim = n_max + 1;
    let mut table = vec![0.0; dim * dim];
    let x = 0.5 * g * g;
    for n in 0..=n_max {
        let lags = laguerre_sequence(n_max - n, n as f64, x);
        for (lo, lag) in lags.iter().enumerate() {
            let hi = lo + n;
            let v = xi_prefactor(g, hi, lo) * lag;
            table[hi * dim + lo] = v;
            table[lo * dim + hi] = v;
        }
    }
    table
}

fn sigma_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_rule(160).expect("positive node count"))
}

/// Gaussian overlap `Σ(αl², u, j) = ∫ ψ_u(y) ψ_j(y) e^{−αl² y²} dy`.
///
/// Zero when `u + j` is odd. Orders up to [`SIGMA_CLOSED_FORM_MAX`] use the
/// hypergeometric closed form; beyond that the alternating series loses
/// precision and exact Gauss–Hermite quadrature is used instead.
pub fn sigma_kernel(al2: f64, u: usize, j: usize) -> Result<f64> {
    if !(al2.is_finite() && al2 > 0.0) {
        return Err(EngineError::Domain(format!("sigma kernel needs al2 > 0 (got {al2})")));
    }
    if (u + j) % 2 == 1 {
        return Ok(0.0);
    }
    if u.max(j) <= SIGMA_CLOSED_FORM_MAX {
        sigma_closed_form(al2, u, j)
    } else {
        sigma_quadrature(al2, u, j)
    }
}

pub(crate) fn sigma_closed_form(al2: f64, u: usize, j: usize) -> Result<f64> {
    debug_assert!((u + j).is_multiple_of(2));
    let s = (u + j) / 2;
    let log_mag = log_factorial(u + j)?
        - log_factorial(s)?
        - 0.5 * (log_factorial(u)? + log_factorial(j)?)
        - 0.5 * (u + j + 1) as f64 * (1.0 + al2).ln()
        + s as f64 * (0.5 * al2).ln();
    let sign = if s.is_multiple_of(2) { 1.0 } else { -1.0 };
    let c = (1.0 - u as f64 - j as f64) / 2.0;
    let z = (1.0 + al2) / (2.0 * al2);
    let f = hyp2f1_terminating(u, j, c, z)?;
    Ok(sign * log_mag.exp() * f)
}

pub(crate) fn sigma_quadrature(al2: f64, u: usize, j: usize) -> Result<f64> {
    let rule = sigma_rule();
    if u + j > rule.exact_degree() {
        return Err(EngineError::Domain(format!(
            "sigma kernel order ({u},{j}) exceeds quadrature exactness"
        )));
    }
    // y = t/√(1+α): ∫ψ_uψ_j e^{−αy²} dy = (1/√(1+α)) Σ W_i F(t_i/√(1+α))
    let scale = (1.0 + al2).sqrt().recip();
    let hi = u.max(j);
    let v = rule.integrate_full(|t| {
        let y = t * scale;
        let psi = hermite_functions(hi, y);
        psi[u] * psi[j] * (-al2 * y * y).exp()
    });
    Ok(scale * v)
}

/// Width of the total Gaussian `e^{−cγ²}` in the γ integrand.
fn gamma_weight(sigma: f64, lambda: f64) -> f64 {
    0.5 * sigma * sigma + 0.25 + 0.25 * lambda * lambda
}

/// `(−i)^{n₁+n₂}` for even `n₁ + n₂`.
fn parity_sign(n: usize) -> f64 {
    if (n / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Parallel-geometry element `∫dγ Φ_γ Ξ(γ,u,j) Ξ(−γλ,v,k)`.
///
/// After factoring `e^{−cγ²}` the integrand is a polynomial of degree
/// `u + j + v + k`, so the rule needs at least `(u+j+v+k)/2 + 1` nodes.
pub fn element_parallel(
    u: usize,
    v: usize,
    j: usize,
    k: usize,
    spec: &CouplingSpec,
    lambda: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if spec.geometry != Geometry::Parallel {
        return Err(EngineError::Usage(
            "element_parallel called with perpendicular coupling".into(),
        ));
    }
    let degree = u + j + v + k;
    if rule.exact_degree() < degree {
        return Err(EngineError::config(
            "quadrature_nodes",
            format!("{} nodes cannot integrate degree {degree} exactly", rule.len()),
        ));
    }
    if !spec.geometry.allows(u, v, j, k) || spec.phi0 == 0.0 {
        return Ok(0.0);
    }
    let c = gamma_weight(spec.sigma, lambda);
    let scale = c.sqrt().recip();
    let sum: f64 = rule
        .nodes
        .iter()
        .zip(&rule.scaled_weights)
        .map(|(&y, &w)| {
            let gamma = y * scale;
            let a = w * scale * phi_gamma(gamma, spec.phi0, spec.sigma) * xi_real(gamma, u, j);
            a * xi_real(-gamma * lambda, v, k)
        })
        .sum();
    Ok(parity_sign(u.abs_diff(j) + v.abs_diff(k)) * sum)
}

/// Perpendicular-geometry element `Φ₀ Σ(1/2σ², u, j) Σ(λ²/2σ², v, k)`.
pub fn element_perpendicular(u: usize, v: usize, j: usize, k: usize, spec: &CouplingSpec, lambda: f64) -> Result<f64> {
    if spec.geometry != Geometry::Perpendicular {
        return Err(EngineError::Usage(
            "element_perpendicular called with parallel coupling".into(),
        ));
    }
    let s2 = spec.sigma * spec.sigma;
    Ok(spec.phi0 * sigma_kernel(0.5 / s2, u, j)? * sigma_kernel(0.5 * lambda * lambda / s2, v, k)?)
}

/// Dense `Φ` over the composite basis, rows `(u,v)` and columns `(j,k)`.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    values: Mat<f64>,
    pub spec: CouplingSpec,
    pub trunc: ModeTruncation,
    pub lambda: f64,
    pub omega: f64,
}

impl InteractionMatrix {
    pub(crate) fn from_parts(
        values: Mat<f64>,
        spec: CouplingSpec,
        trunc: ModeTruncation,
        lambda: f64,
        omega: f64,
    ) -> Self {
        debug_assert_eq!(values.nrows(), trunc.total_dim());
        Self {
            values,
            spec,
            trunc,
            lambda,
            omega,
        }
    }

    pub fn values(&self) -> faer::MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    /// `⟨u,v|Φ|j,k⟩`
    pub fn element(&self, u: usize, v: usize, j: usize, k: usize) -> f64 {
        let d = self.trunc.dim();
        self.values[(u * d + v, j * d + k)]
    }

    /// `⟨j,k|Φ|j,k⟩` in flat order.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.values[(i, i)]).collect()
    }

    pub fn diag_at(&self, j: usize, k: usize) -> f64 {
        self.element(j, k, j, k)
    }

    /// Whether this matrix was built for the given configuration's coupling.
    pub fn matches(&self, config: &EngineConfig) -> bool {
        self.trunc == config.truncation && self.spec == config.coupling && self.lambda == config.lambda
    }

    /// Leading block restricted to levels `≤ trunc.n_max()`.
    pub fn restricted(&self, trunc: ModeTruncation) -> Result<Self> {
        if trunc.n_max() > self.trunc.n_max() {
            return Err(EngineError::Usage("cannot restrict to a larger truncation".into()));
        }
        let (d_new, d_old) = (trunc.dim(), self.trunc.dim());
        let map = |f: usize| (f / d_new) * d_old + f % d_new;
        let values = Mat::from_fn(trunc.total_dim(), trunc.total_dim(), |r, c| {
            self.values[(map(r), map(c))]
        });
        Ok(Self::from_parts(values, self.spec, trunc, self.lambda, self.omega))
    }
}

/// Fills `Φ` for the configuration. Only the upper triangle is computed and
/// then mirrored, and parity-forbidden entries are written as exact zeros.
pub fn assemble_matrix(config: &EngineConfig) -> Result<InteractionMatrix> {
    config.validate()?;
    let trunc = config.truncation;
    let n = trunc.total_dim();
    let spec = config.coupling;
    let mut values = Mat::<f64>::zeros(n, n);
    if spec.phi0 != 0.0 {
        let rows: Vec<Vec<f64>> = match spec.geometry {
            Geometry::Parallel => {
                let rule = gauss_hermite_rule(config.quadrature_nodes())?;
                parallel_rows(&spec, config.lambda, trunc, &rule)?
            }
            Geometry::Perpendicular => perpendicular_rows(&spec, config.lambda, trunc)?,
        };
        for (a, row) in rows.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let b = a + off;
                values[(a, b)] = v;
                values[(b, a)] = v;
            }
        }
    }
    Ok(InteractionMatrix::from_parts(
        values,
        spec,
        trunc,
        config.lambda,
        config.omega,
    ))
}

/// Upper-triangle rows `a ↦ [Φ(a, a), Φ(a, a+1), …]` for the parallel case.
fn parallel_rows(
    spec: &CouplingSpec,
    lambda: f64,
    trunc: ModeTruncation,
    rule: &QuadratureRule,
) -> Result<Vec<Vec<f64>>> {
    let n_max = trunc.n_max();
    if rule.exact_degree() < 4 * n_max {
        return Err(EngineError::config(
            "quadrature_nodes",
            format!("{} nodes cannot integrate degree {} exactly", rule.len(), 4 * n_max),
        ));
    }
    let dim = trunc.dim();
    let pairs = dim * dim;
    let nodes = rule.len();
    let c = gamma_weight(spec.sigma, lambda);
    let scale = c.sqrt().recip();

    // osc1[(u,j)][i] carries the quadrature weight and Φ_γ; osc2[(v,k)][i] the bare overlap.
    let mut osc1 = vec![0.0; pairs * nodes];
    let mut osc2 = vec![0.0; pairs * nodes];
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = rule
        .nodes
        .par_iter()
        .zip(rule.scaled_weights.par_iter())
        .map(|(&y, &w)| {
            let gamma = y * scale;
            let weight = w * scale * phi_gamma(gamma, spec.phi0, spec.sigma);
            let mut t1 = xi_real_table(gamma, n_max);
            t1.iter_mut().for_each(|x| *x *= weight);
            (t1, xi_real_table(-gamma * lambda, n_max))
        })
        .collect();
    for (i, (t1, t2)) in per_node.iter().enumerate() {
        for p in 0..pairs {
            osc1[p * nodes + i] = t1[p];
            osc2[p * nodes + i] = t2[p];
        }
    }

    let rows = (0..trunc.total_dim())
        .into_par_iter()
        .map(|a| {
            let (u, v) = (a / dim, a % dim);
            (a..trunc.total_dim())
                .map(|b| {
                    let (j, k) = (b / dim, b % dim);
                    if !spec.geometry.allows(u, v, j, k) {
                        return 0.0;
                    }
                    let x1 = &osc1[(u * dim + j) * nodes..][..nodes];
                    let x2 = &osc2[(v * dim + k) * nodes..][..nodes];
                    let s: f64 = x1.iter().zip(x2).map(|(p, q)| p * q).sum();
                    parity_sign(u.abs_diff(j) + v.abs_diff(k)) * s
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

fn perpendicular_rows(spec: &CouplingSpec, lambda: f64, trunc: ModeTruncation) -> Result<Vec<Vec<f64>>> {
    let dim = trunc.dim();
    let s2 = spec.sigma * spec.sigma;
    let table = |al2: f64| -> Result<Vec<f64>> {
        let mut t = vec![0.0; dim * dim];
        for u in 0..dim {
            for j in u..dim {
                let v = sigma_kernel(al2, u, j)?;
                t[u * dim + j] = v;
                t[j * dim + u] = v;
            }
        }
        Ok(t)
    };
    let s1 = table(0.5 / s2)?;
    let s2t = table(0.5 * lambda * lambda / s2)?;
    let rows = (0..trunc.total_dim())
        .into_par_iter()
        .map(|a| {
            let (u, v) = (a / dim, a % dim);
            (a..trunc.total_dim())
                .map(|b| {
                    let (j, k) = (b / dim, b % dim);
                    if !spec.geometry.allows(u, v, j, k) {
                        return 0.0;
                    }
                    spec.phi0 * s1[u * dim + j] * s2t[v * dim + k]
                })
                .collect()
        })
        .collect();
    Ok(rows)
}
