//! Projective measurement in the product Fock basis and the engine cycle.
//!
//! One cycle: switch the coupling on at `|0,0⟩`, evolve to `tau_measure`,
//! measure both oscillators, switch the coupling off, extract the
//! excitation energy. Every cycle restarts from `|0,0⟩`, so cycles are
//! i.i.d. draws from the Born distribution at `tau_measure`.

use faer::Mat;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{free_energy, ModeTruncation};
use crate::config::EngineConfig;
use crate::coupling::InteractionMatrix;
use crate::dynamics::{propagate, Basis, SpectralHamiltonian, StateVector};
use crate::error::{EngineError, Result};
use crate::specfun::hermite_functions;

/// Born probabilities `P_jk = |Ψ_jk|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub probs: Vec<f64>,
    pub trunc: ModeTruncation,
}

impl OutcomeDistribution {
    pub fn prob(&self, j: usize, k: usize) -> f64 {
        self.probs[j * self.trunc.dim() + k]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// The `n` most likely outcomes, most likely first.
    pub fn top(&self, n: usize) -> Vec<((usize, usize), f64)> {
        let dim = self.trunc.dim();
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|a| ((a / dim, a % dim), self.probs[a]))
            .collect()
    }
}

fn truncation_of(len: usize) -> Result<ModeTruncation> {
    let dim = (len as f64).sqrt().round() as usize;
    if dim * dim != len || dim < 2 {
        return Err(EngineError::Usage(format!(
            "{len} amplitudes do not form a two-mode basis"
        )));
    }
    ModeTruncation::new(dim - 1)
}

pub fn outcome_distribution(psi: &StateVector) -> Result<OutcomeDistribution> {
    if psi.basis != Basis::Fock {
        return Err(EngineError::Usage(
            "outcome distribution needs a Fock-basis state".into(),
        ));
    }
    Ok(OutcomeDistribution {
        probs: psi.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        trunc: truncation_of(psi.len())?,
    })
}

/// Inverse-CDF sampler over the flattened distribution.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    index: WeightedIndex<f64>,
    dim: usize,
}

impl OutcomeSampler {
    pub fn new(dist: &OutcomeDistribution) -> Result<Self> {
        let index = WeightedIndex::new(&dist.probs)
            .map_err(|e| EngineError::Numeric(format!("degenerate outcome distribution: {e}")))?;
        Ok(Self {
            index,
            dim: dist.trunc.dim(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let a = self.index.sample(rng);
        (a / self.dim, a % self.dim)
    }
}

pub fn sample_outcome<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> Result<(usize, usize)> {
    Ok(OutcomeSampler::new(dist)?.sample(rng))
}

/// Independent stream for cycle `index`: ChaCha8 keyed by `seed`, with the
/// cycle index selecting the stream.
pub fn cycle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostMeasurement {
    pub e_int_post: f64,
    pub e_free_post: f64,
    pub e_total_post: f64,
}

/// Mean energies after a projective measurement drawn from `dist`.
pub fn post_measurement_energies(dist: &OutcomeDistribution, phi_diag: &[f64], omega: f64) -> Result<PostMeasurement> {
    if phi_diag.len() != dist.probs.len() {
        return Err(EngineError::Usage(format!(
            "diagonal has {} entries, distribution {}",
            phi_diag.len(),
            dist.probs.len()
        )));
    }
    let dim = dist.trunc.dim();
    let (mut e_int_post, mut e_free_post) = (0.0, 0.0);
    for (a, &p) in dist.probs.iter().enumerate() {
        e_int_post += p * phi_diag[a];
        e_free_post += p * free_energy(a / dim, a % dim, omega);
    }
    Ok(PostMeasurement {
        e_int_post,
        e_free_post,
        e_total_post: e_int_post + e_free_post,
    })
}

/// `ρ(x₁, x₂)` sampled on a tensor grid, row-major with `x₁` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.x2.len() + i2]
    }

    /// Trapezoid integral; assumes uniform axes.
    pub fn integral(&self) -> f64 {
        let w = |xs: &[f64], i: usize| {
            let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
            if i == 0 || i == xs.len() - 1 {
                0.5 * h
            } else {
                h
            }
        };
        let mut s = 0.0;
        for i1 in 0..self.x1.len() {
            for i2 in 0..self.x2.len() {
                s += w(&self.x1, i1) * w(&self.x2, i2) * self.at(i1, i2);
            }
        }
        s
    }
}

/// `ρ(x₁,x₂) = |Σ Ψ_jk ψ_j(x₁) ψ_k(x₂/λ)/√λ|²`.
pub fn realspace_density(psi: &StateVector, x1: &[f64], x2: &[f64], lambda: f64) -> Result<DensityGrid> {
    if psi.basis != Basis::Fock {
        return Err(EngineError::Usage("real-space density needs a Fock-basis state".into()));
    }
    let trunc = truncation_of(psi.len())?;
    let (n_max, dim) = (trunc.n_max(), trunc.dim());
    let rows1: Vec<Vec<f64>> = x1.iter().map(|&x| hermite_functions(n_max, x)).collect();
    let rows2: Vec<Vec<f64>> = x2.iter().map(|&x| hermite_functions(n_max, x / lambda)).collect();
    let basis1 = Mat::from_fn(x1.len(), dim, |a, j| rows1[a][j]);
    let basis2 = Mat::from_fn(x2.len(), dim, |b, k| rows2[b][k] / lambda.sqrt());
    let amp_re = Mat::from_fn(dim, dim, |j, k| psi.amplitudes[j * dim + k].re);
    let amp_im = Mat::from_fn(dim, dim, |j, k| psi.amplitudes[j * dim + k].im);
    let re = &basis1 * &amp_re * basis2.transpose();
    let im = &basis1 * &amp_im * basis2.transpose();
    let mut values = Vec::with_capacity(x1.len() * x2.len());
    for a in 0..x1.len() {
        for b in 0..x2.len() {
            values.push(re[(a, b)].powi(2) + im[(a, b)].powi(2));
        }
    }
    Ok(DensityGrid {
        x1: x1.to_vec(),
        x2: x2.to_vec(),
        values,
    })
}

/// `n` evenly spaced points over `[−extent, extent]`.
pub fn symmetric_axis(extent: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * extent / (n - 1) as f64;
    (0..n).map(|i| -extent + i as f64 * h).collect()
}

/// Energy bookkeeping of one engine cycle (units of ħΩ₁).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleLedger {
    pub cycle: u64,
    pub tau_measure: f64,
    pub outcome: (usize, usize),
    /// `⟨0,0|Φ|0,0⟩`, negative for attractive coupling.
    pub e_switch_on: f64,
    /// `|⟨j,k|Φ|j,k⟩|` at the measured state.
    pub e_decouple_cost: f64,
    /// `j + ωk`
    pub w_extract: f64,
    /// Post-measurement energy minus the conserved pre-measurement `⟨H⟩`.
    pub e_measure_input: f64,
    pub w_net: f64,
}

impl CycleLedger {
    pub fn excited(&self) -> bool {
        self.outcome != (0, 0)
    }
}

fn ledger_entry(
    cycle: u64,
    tau_measure: f64,
    (j, k): (usize, usize),
    phi: &InteractionMatrix,
    omega: f64,
    e_total_pre: f64,
) -> CycleLedger {
    let e_switch_on = phi.diag_at(0, 0);
    let phi_jk = phi.diag_at(j, k);
    let e_decouple_cost = phi_jk.abs();
    let w_extract = j as f64 + omega * k as f64;
    CycleLedger {
        cycle,
        tau_measure,
        outcome: (j, k),
        e_switch_on,
        e_decouple_cost,
        w_extract,
        e_measure_input: free_energy(j, k, omega) + phi_jk - e_total_pre,
        w_net: w_extract + e_switch_on.abs() - e_decouple_cost,
    }
}

/// State `U(τ)|0,0⟩` and its Born distribution.
pub fn measured_distribution(spectrum: &SpectralHamiltonian, tau: f64) -> Result<(StateVector, OutcomeDistribution)> {
    let psi = propagate(spectrum, &StateVector::fock(0, 0, spectrum.trunc)?, tau)?;
    let dist = outcome_distribution(&psi)?;
    Ok((psi, dist))
}

/// Runs `n_cycles` independent engine cycles. Cycle `i` draws from the
/// stream `cycle_rng(config.seed, i)`, so results do not depend on how the
/// cycles are scheduled.
pub fn run_cycles(
    config: &EngineConfig,
    phi: &InteractionMatrix,
    spectrum: &SpectralHamiltonian,
    tau_measure: f64,
    n_cycles: u64,
) -> Result<Vec<CycleLedger>> {
    if n_cycles < 1 {
        return Err(EngineError::Usage("n_cycles must be at least 1".into()));
    }
    config.grid_index(tau_measure)?;
    if !phi.matches(config) || spectrum.trunc != config.truncation {
        return Err(EngineError::Usage(
            "interaction matrix or spectrum does not match the configuration".into(),
        ));
    }
    let (_, dist) = measured_distribution(spectrum, tau_measure)?;
    let sampler = OutcomeSampler::new(&dist)?;
    let e_total_pre = free_energy(0, 0, config.omega) + phi.diag_at(0, 0);
    Ok((0..n_cycles)
        .into_par_iter()
        .map(|i| {
            let outcome = sampler.sample(&mut cycle_rng(config.seed, i));
            ledger_entry(i, tau_measure, outcome, phi, config.omega, e_total_pre)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    pub fn from_samples(xs: impl ExactSizeIterator<Item = f64> + Clone) -> Self {
        let n = xs.len() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        let var = if n > 1.0 {
            xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// `|mean − target| ≤ k·SE`; an exact match passes even when `SE = 0`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub j: usize,
    pub k: usize,
    pub count: u64,
    pub frequency: f64,
    pub probability: f64,
}

/// Batch statistics alongside the exact expectations they estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub n_cycles: u64,
    pub tau_measure: f64,
    pub p00: f64,
    pub excited_fraction: MeanEstimate,
    pub expected_excited_fraction: f64,
    pub w_extract: MeanEstimate,
    pub expected_w_extract: f64,
    pub e_decouple_cost: MeanEstimate,
    pub e_measure_input: MeanEstimate,
    pub w_net: MeanEstimate,
    pub histogram: Vec<HistogramEntry>,
}

pub fn summarize(ledgers: &[CycleLedger], dist: &OutcomeDistribution, omega: f64) -> Result<CycleSummary> {
    let first = ledgers
        .first()
        .ok_or_else(|| EngineError::Usage("cannot summarize an empty batch".into()))?;
    let dim = dist.trunc.dim();
    let mut counts = vec![0u64; dist.probs.len()];
    for l in ledgers {
        counts[l.outcome.0 * dim + l.outcome.1] += 1;
    }
    let n = ledgers.len() as f64;
    let mut histogram: Vec<HistogramEntry> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(a, &c)| HistogramEntry {
            j: a / dim,
            k: a % dim,
            count: c,
            frequency: c as f64 / n,
            probability: dist.probs[a],
        })
        .collect();
    histogram.sort_by(|a, b| b.count.cmp(&a.count).then((a.j, a.k).cmp(&(b.j, b.k))));

    let p00 = dist.prob(0, 0);
    let expected_w_extract: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(a, p)| p * ((a / dim) as f64 + omega * (a % dim) as f64))
        .sum();
    let est = |f: fn(&CycleLedger) -> f64| MeanEstimate::from_samples(ledgers.iter().map(f));
    Ok(CycleSummary {
        n_cycles: ledgers.len() as u64,
        tau_measure: first.tau_measure,
        p00,
        excited_fraction: est(|l| if l.excited() { 1.0 } else { 0.0 }),
        expected_excited_fraction: 1.0 - p00,
        w_extract: est(|l| l.w_extract),
        expected_w_extract,
        e_decouple_cost: est(|l| l.e_decouple_cost),
        e_measure_input: est(|l| l.e_measure_input),
        w_net: est(|l| l.w_net),
        histogram,
    })
}
