//! Hamiltonian assembly, spectral decomposition, and unitary propagation.
//!
//! Time is measured in oscillator-1 periods, so `U(τ) = exp(−2πi H τ)`.
//! States are propagated exactly through the eigenbasis of `H`; the
//! repeated-step operator `U(δτ)` is kept for verification.

use std::f64::consts::PI;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{flat_index, free_energies, ModeTruncation};
use crate::config::EngineConfig;
use crate::coupling::InteractionMatrix;
use crate::error::{EngineError, Result};

/// Number of time samples propagated per batched matrix product.
const CHUNK: usize = 128;

pub const NORM_TOLERANCE: f64 = 1e-10;

/// Reduction of `n_max` used by the truncation-convergence diagnostic.
pub const CONVERGENCE_LEVEL_DROP: usize = 10;
pub const CONVERGENCE_WARN_THRESHOLD: f64 = 1e-4;

/// `H = diag(free energies) + Φ`.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    values: Mat<f64>,
    pub trunc: ModeTruncation,
    pub omega: f64,
}

impl HamiltonianMatrix {
    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

pub fn assemble_hamiltonian(config: &EngineConfig, phi: &InteractionMatrix) -> Result<HamiltonianMatrix> {
    if !phi.matches(config) {
        return Err(EngineError::Usage(format!(
            "interaction matrix ({} n_max={}) does not match the configuration ({} n_max={})",
            phi.spec.geometry,
            phi.trunc.n_max(),
            config.coupling.geometry,
            config.truncation.n_max()
        )));
    }
    let free = free_energies(config.truncation, config.omega);
    let mut values = phi.values().to_owned();
    for (i, e) in free.iter().enumerate() {
        values[(i, i)] += e;
    }
    Ok(HamiltonianMatrix {
        values,
        trunc: config.truncation,
        omega: config.omega,
    })
}

/// Eigenpairs of `H`, eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralHamiltonian {
    pub eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
    pub trunc: ModeTruncation,
}

impl SpectralHamiltonian {
    pub fn eigenvectors(&self) -> MatRef<'_, f64> {
        self.eigenvectors.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(E) Vᵀ`
    pub fn reconstruct(&self) -> Mat<f64> {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * self.eigenvalues[c]);
        &scaled * v.transpose()
    }

    /// `max |VᵀV − I|`
    pub fn orthonormality_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.transpose() * v;
        let mut worst: f64 = 0.0;
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g[(r, c)] - target).abs());
            }
        }
        worst
    }
}

fn frobenius(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            s += m[(r, c)] * m[(r, c)];
        }
    }
    s.sqrt()
}

pub fn spectral_decompose(h: &HamiltonianMatrix) -> Result<SpectralHamiltonian> {
    let n = h.dim();
    let values = h.values();
    let mut asymmetry: f64 = 0.0;
    let mut finite = true;
    for c in 0..n {
        for r in 0..=c {
            finite &= values[(r, c)].is_finite();
            asymmetry = asymmetry.max((values[(r, c)] - values[(c, r)]).abs());
        }
    }
    let report = || {
        format!(
            "dim={n}, ‖H‖_F={:.6e}, max asymmetry={asymmetry:.3e}, finite={finite}",
            frobenius(values)
        )
    };
    if !finite || asymmetry > 0.0 {
        return Err(EngineError::Numeric(format!(
            "Hamiltonian is not a finite symmetric matrix ({})",
            report()
        )));
    }
    let evd = values
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| EngineError::Numeric(format!("eigensolver failed: {e:?} ({})", report())))?;
    let eigenvalues: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    Ok(SpectralHamiltonian {
        eigenvalues,
        eigenvectors: evd.U().to_owned(),
        trunc: h.trunc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Fock,
    Eigen,
}

/// Complex amplitudes over the composite basis (or the eigenbasis of `H`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub basis: Basis,
}

impl StateVector {
    /// Checks unit norm within [`NORM_TOLERANCE`].
    pub fn new(amplitudes: Vec<Complex64>, basis: Basis) -> Result<Self> {
        let s = Self { amplitudes, basis };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EngineError::Numeric(format!("state norm {norm} differs from 1")));
        }
        Ok(s)
    }

    pub fn normalized(mut amplitudes: Vec<Complex64>, basis: Basis) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EngineError::Numeric(
                "cannot normalize a zero or non-finite state".into(),
            ));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes, basis })
    }

    /// Product Fock state `|j,k⟩`.
    pub fn fock(j: usize, k: usize, trunc: ModeTruncation) -> Result<Self> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); trunc.total_dim()];
        amplitudes[flat_index(j, k, trunc)?] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            basis: Basis::Fock,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn probability(&self, flat: usize) -> f64 {
        self.amplitudes[flat].norm_sqr()
    }
}

fn split(psi: &StateVector) -> (Mat<f64>, Mat<f64>) {
    let n = psi.len();
    (
        Mat::from_fn(n, 1, |r, _| psi.amplitudes[r].re),
        Mat::from_fn(n, 1, |r, _| psi.amplitudes[r].im),
    )
}

fn join(re: MatRef<'_, f64>, im: MatRef<'_, f64>, col: usize, basis: Basis) -> StateVector {
    StateVector {
        amplitudes: (0..re.nrows())
            .map(|r| Complex64::new(re[(r, col)], im[(r, col)]))
            .collect(),
        basis,
    }
}

/// Exact evolution of a fixed initial state: the eigenbasis coefficients
/// `c = Vᵀψ₀` are computed once and phased for each requested time.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    spectrum: &'a SpectralHamiltonian,
    coeffs: Vec<Complex64>,
    basis: Basis,
}

impl<'a> Propagator<'a> {
    pub fn new(spectrum: &'a SpectralHamiltonian, psi0: &StateVector) -> Result<Self> {
        if psi0.len() != spectrum.dim() {
            return Err(EngineError::Usage(format!(
                "state has {} amplitudes, Hamiltonian dimension is {}",
                psi0.len(),
                spectrum.dim()
            )));
        }
        let coeffs = match psi0.basis {
            Basis::Eigen => psi0.amplitudes.clone(),
            Basis::Fock => {
                let (re, im) = split(psi0);
                let v = spectrum.eigenvectors();
                let cr = v.transpose() * &re;
                let ci = v.transpose() * &im;
                (0..spectrum.dim())
                    .map(|n| Complex64::new(cr[(n, 0)], ci[(n, 0)]))
                    .collect()
            }
        };
        Ok(Self {
            spectrum,
            coeffs,
            basis: psi0.basis,
        })
    }

    fn phased(&self, n: usize, tau: f64) -> Complex64 {
        self.coeffs[n] * Complex64::from_polar(1.0, -2.0 * PI * self.spectrum.eigenvalues[n] * tau)
    }

    pub fn state_at(&self, tau: f64) -> StateVector {
        let mut out = None;
        self.for_each_chunk(&[tau], |_, re, im| out = Some(join(re, im, 0, self.basis)));
        out.expect("one chunk")
    }

    /// `⟨flat|ψ(τ)⟩` for every τ, in O(dim) per sample.
    pub fn amplitude_series(&self, flat: usize, taus: &[f64]) -> Vec<Complex64> {
        if self.basis == Basis::Eigen {
            return taus.iter().map(|&t| self.phased(flat, t)).collect();
        }
        let v = self.spectrum.eigenvectors();
        taus.iter()
            .map(|&t| (0..self.spectrum.dim()).map(|n| self.phased(n, t) * v[(flat, n)]).sum())
            .collect()
    }

    /// Calls `f(taus, Re ψ, Im ψ)` with one column per time, in batches.
    pub fn for_each_chunk(&self, taus: &[f64], mut f: impl FnMut(&[f64], MatRef<'_, f64>, MatRef<'_, f64>)) {
        let n = self.spectrum.dim();
        let v = self.spectrum.eigenvectors();
        for chunk in taus.chunks(CHUNK) {
            let cr = Mat::from_fn(n, chunk.len(), |r, c| self.phased(r, chunk[c]).re);
            let ci = Mat::from_fn(n, chunk.len(), |r, c| self.phased(r, chunk[c]).im);
            match self.basis {
                Basis::Eigen => f(chunk, cr.as_ref(), ci.as_ref()),
                Basis::Fock => {
                    let re = v * &cr;
                    let im = v * &ci;
                    f(chunk, re.as_ref(), im.as_ref());
                }
            }
        }
    }
}

/// `ψ(τ) = V e^{−2πiEτ} Vᵀ ψ₀`
pub fn propagate(spectrum: &SpectralHamiltonian, psi0: &StateVector, tau: f64) -> Result<StateVector> {
    Ok(Propagator::new(spectrum, psi0)?.state_at(tau))
}

/// Dense `U(δτ)` in the Fock basis, stored as real and imaginary parts.
#[derive(Debug, Clone)]
pub struct StepOperator {
    re: Mat<f64>,
    im: Mat<f64>,
    pub dtau: f64,
}

impl StepOperator {
    pub fn re(&self) -> MatRef<'_, f64> {
        self.re.as_ref()
    }

    pub fn im(&self) -> MatRef<'_, f64> {
        self.im.as_ref()
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let (pr, pi) = split(psi);
        let re = &self.re * &pr - &self.im * &pi;
        let im = &self.re * &pi + &self.im * &pr;
        join(re.as_ref(), im.as_ref(), 0, psi.basis)
    }

    /// Applies the operator `steps` times.
    pub fn evolve(&self, psi0: &StateVector, steps: usize) -> StateVector {
        (0..steps).fold(psi0.clone(), |psi, _| self.apply(&psi))
    }

    /// `max |U U† − I|`
    pub fn unitarity_error(&self) -> f64 {
        // U U† = (R + iI)(Rᵀ − iIᵀ) = (R Rᵀ + I Iᵀ) + i(I Rᵀ − R Iᵀ)
        let real = &self.re * self.re.transpose() + &self.im * self.im.transpose();
        let imag = &self.im * self.re.transpose() - &self.re * self.im.transpose();
        let mut worst: f64 = 0.0;
        for c in 0..real.ncols() {
            for r in 0..real.nrows() {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((real[(r, c)] - target).abs()).max(imag[(r, c)].abs());
            }
        }
        worst
    }
}

pub fn step_operator(spectrum: &SpectralHamiltonian, dtau: f64) -> Result<StepOperator> {
    if !(dtau.is_finite() && dtau > 0.0) {
        return Err(EngineError::Usage(format!("step dtau must be > 0 (got {dtau})")));
    }
    let v = spectrum.eigenvectors();
    let phase = |n: usize| -2.0 * PI * spectrum.eigenvalues[n] * dtau;
    let vc = Mat::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * phase(c).cos());
    let vs = Mat::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * phase(c).sin());
    Ok(StepOperator {
        re: &vc * v.transpose(),
        im: &vs * v.transpose(),
        dtau,
    })
}

/// Observables at one time sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub tau: f64,
    pub e_total: f64,
    pub e_free: f64,
    pub e_int: f64,
    /// Mean interaction energy after a projective measurement at `tau`.
    pub e_int_post: f64,
    pub e_total_post: f64,
    pub p00: f64,
    pub tracked_probs: Vec<f64>,
}

/// Energy ledger and occupations of `ψ(τ)` on the configured time grid.
pub fn energy_series(
    config: &EngineConfig,
    phi: &InteractionMatrix,
    spectrum: &SpectralHamiltonian,
    psi0: &StateVector,
    tracked: &[(usize, usize)],
) -> Result<Vec<EnergyRecord>> {
    energy_series_at(config, phi, spectrum, psi0, tracked, &config.time_grid())
}

pub fn energy_series_at(
    config: &EngineConfig,
    phi: &InteractionMatrix,
    spectrum: &SpectralHamiltonian,
    psi0: &StateVector,
    tracked: &[(usize, usize)],
    taus: &[f64],
) -> Result<Vec<EnergyRecord>> {
    if psi0.basis != Basis::Fock {
        return Err(EngineError::Usage(
            "energy_series expects a Fock-basis initial state".into(),
        ));
    }
    if !phi.matches(config) || spectrum.trunc != config.truncation {
        return Err(EngineError::Usage(
            "interaction matrix or spectrum does not match the configuration".into(),
        ));
    }
    let tracked_flat = tracked
        .iter()
        .map(|&(j, k)| flat_index(j, k, config.truncation))
        .collect::<Result<Vec<_>>>()?;
    let free = free_energies(config.truncation, config.omega);
    let phi_diag = phi.diagonal();
    let origin = flat_index(0, 0, config.truncation)?;
    let phi_mat = phi.values();

    let propagator = Propagator::new(spectrum, psi0)?;
    let mut records = Vec::with_capacity(taus.len());
    propagator.for_each_chunk(taus, |chunk, re, im| {
        let phi_re = phi_mat * re;
        let phi_im = phi_mat * im;
        for (c, &tau) in chunk.iter().enumerate() {
            let (mut e_int, mut e_free, mut e_int_post) = (0.0, 0.0, 0.0);
            for a in 0..re.nrows() {
                let (x, y) = (re[(a, c)], im[(a, c)]);
                let p = x * x + y * y;
                e_int += x * phi_re[(a, c)] + y * phi_im[(a, c)];
                e_free += p * free[a];
                e_int_post += p * phi_diag[a];
            }
            let prob = |a: usize| re[(a, c)].powi(2) + im[(a, c)].powi(2);
            records.push(EnergyRecord {
                tau,
                e_total: e_free + e_int,
                e_free,
                e_int,
                e_int_post,
                e_total_post: e_free + e_int_post,
                p00: prob(origin),
                tracked_probs: tracked_flat.iter().map(|&a| prob(a)).collect(),
            });
        }
    });
    Ok(records)
}

/// Grid sample with the lowest ground-state occupation.
pub fn argmin_p00(records: &[EnergyRecord]) -> Option<&EnergyRecord> {
    records.iter().min_by(|a, b| a.p00.total_cmp(&b.p00))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_max: usize,
    pub n_max_reduced: usize,
    pub max_delta_p00: f64,
    pub warn: bool,
}

/// Reruns `|0,0⟩` dynamics with `n_max − 10` and compares `p00(τ)`.
/// The reduced interaction matrix is the leading block of `phi`.
pub fn truncation_convergence(
    config: &EngineConfig,
    phi: &InteractionMatrix,
    spectrum: &SpectralHamiltonian,
    taus: &[f64],
) -> Result<ConvergenceReport> {
    let n_max = config.truncation.n_max();
    let reduced_n = n_max.saturating_sub(CONVERGENCE_LEVEL_DROP).max(1);
    let mut reduced_cfg = config.clone();
    reduced_cfg.truncation = ModeTruncation::new(reduced_n)?;
    let reduced_phi = phi.restricted(reduced_cfg.truncation)?;
    let reduced_spec = spectral_decompose(&assemble_hamiltonian(&reduced_cfg, &reduced_phi)?)?;

    let p00 = |spec: &SpectralHamiltonian, trunc: ModeTruncation| -> Result<Vec<f64>> {
        let psi0 = StateVector::fock(0, 0, trunc)?;
        Ok(Propagator::new(spec, &psi0)?
            .amplitude_series(0, taus)
            .iter()
            .map(|a| a.norm_sqr())
            .collect())
    };
    let full = p00(spectrum, config.truncation)?;
    let reduced = p00(&reduced_spec, reduced_cfg.truncation)?;
    let max_delta_p00 = full
        .iter()
        .zip(&reduced)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let warn = max_delta_p00 > CONVERGENCE_WARN_THRESHOLD;
    if warn {
        log::warn!(
            "truncation n_max={n_max} may be unconverged: max |Δp00| = {max_delta_p00:.3e} against n_max={reduced_n}"
        );
    }
    Ok(ConvergenceReport {
        n_max,
        n_max_reduced: reduced_n,
        max_delta_p00,
        warn,
    })
}
