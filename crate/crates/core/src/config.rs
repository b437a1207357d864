//! Engine configuration and the flat JSON document it is read from.
//!
//! Units: energies in ħΩ₁, lengths in l₁, times in oscillator-1 periods.

use serde::{Deserialize, Serialize};

use crate::basis::{free_energy, ModeTruncation, DEFAULT_N_MAX};
use crate::coupling::{CouplingSpec, Geometry};
use crate::error::{EngineError, Result};

pub const DEFAULT_PHI0: f64 = -10.0;
pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_DTAU: f64 = 0.001;
pub const DEFAULT_TAU_END: f64 = 1.0;
pub const DEFAULT_N_CYCLES: u64 = 10_000;
pub const DEFAULT_DENSITY_EXTENT: f64 = 6.0;
pub const DEFAULT_DENSITY_POINTS: usize = 201;
/// States with free energy at or below this are tracked by default.
pub const DEFAULT_TRACKED_ENERGY: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub omega: f64,
    pub lambda: f64,
    pub truncation: ModeTruncation,
    pub coupling: CouplingSpec,
    pub dtau: f64,
    pub tau_end: f64,
    pub seed: u64,
}

impl EngineConfig {
    pub fn canonical(geometry: Geometry) -> Self {
        Self {
            omega: 1.0,
            lambda: 1.0,
            truncation: ModeTruncation::default(),
            coupling: CouplingSpec {
                geometry,
                phi0: DEFAULT_PHI0,
                sigma: DEFAULT_SIGMA,
            },
            dtau: DEFAULT_DTAU,
            tau_end: DEFAULT_TAU_END,
            seed: 0,
        }
    }

    pub fn canonical_parallel() -> Self {
        Self::canonical(Geometry::Parallel)
    }

    pub fn canonical_perpendicular() -> Self {
        Self::canonical(Geometry::Perpendicular)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        self.truncation = ModeTruncation::new(n_max)?;
        Ok(self)
    }

    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.coupling.phi0 = phi0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega", self.omega)?;
        positive("lambda", self.lambda)?;
        positive("dtau", self.dtau)?;
        self.coupling.validate()?;
        if !self.tau_end.is_finite() || self.tau_end < self.dtau {
            return Err(EngineError::config("tau_end", "must be finite and at least dtau"));
        }
        Ok(())
    }

    /// Gauss–Hermite node count for the γ integral, `2·n_max + 8`.
    pub fn quadrature_nodes(&self) -> usize {
        2 * self.truncation.n_max() + 8
    }

    pub fn n_steps(&self) -> usize {
        (self.tau_end / self.dtau).round() as usize
    }

    /// `{0, δτ, …, n_steps·δτ}`.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| i as f64 * self.dtau).collect()
    }

    /// Index of the grid point nearest `tau`, if `tau` lies on the grid.
    pub fn grid_index(&self, tau: f64) -> Result<usize> {
        let x = tau / self.dtau;
        let i = x.round();
        if !x.is_finite() || i < 0.0 || i as usize > self.n_steps() || (x - i).abs() > 1e-6 {
            return Err(EngineError::Usage(format!(
                "tau={tau} is not a point of the time grid (dtau={}, tau_end={})",
                self.dtau, self.tau_end
            )));
        }
        Ok(i as usize)
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::canonical_parallel()
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(EngineError::config(
            field,
            format!("must be finite and > 0 (got {value})"),
        ));
    }
    Ok(())
}

/// Observables and output products requested alongside the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationOptions {
    pub tracked: Vec<(usize, usize)>,
    pub snapshot_taus: Vec<f64>,
    pub density_extent: f64,
    pub density_points: usize,
    pub tau_measure: Option<f64>,
    pub n_cycles: u64,
    pub convergence_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub observe: ObservationOptions,
}

/// Flat configuration document; every key is optional and defaults to the
/// canonical parallel run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub geometry: Option<Geometry>,
    pub phi0: Option<f64>,
    pub sigma: Option<f64>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub n_max: Option<i64>,
    pub dtau: Option<f64>,
    pub tau_end: Option<f64>,
    pub seed: Option<u64>,
    pub tracked: Option<Vec<(usize, usize)>>,
    pub snapshot_taus: Option<Vec<f64>>,
    pub density_extent: Option<f64>,
    pub density_points: Option<usize>,
    pub tau_measure: Option<f64>,
    pub n_cycles: Option<u64>,
    pub convergence_check: Option<bool>,
}

/// Non-fatal findings produced while validating a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigWarning {
    RepulsiveCoupling,
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::RepulsiveCoupling => {
                write!(
                    f,
                    "phi0 > 0: repulsive coupling is simulated but does not fuel the engine"
                )
            }
        }
    }
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(|e| EngineError::Usage(format!("config document: {e}")))
    }

    /// Fills defaults and checks every constraint.
    pub fn validate(&self) -> Result<(RunConfig, Vec<ConfigWarning>)> {
        let mut warnings = Vec::new();
        let n_max = self.n_max.unwrap_or(DEFAULT_N_MAX as i64);
        if n_max < 1 {
            return Err(EngineError::config(
                "n_max",
                format!("must be at least 1 (got {n_max})"),
            ));
        }
        let geometry = self.geometry.unwrap_or(Geometry::Parallel);
        let engine = EngineConfig {
            omega: self.omega.unwrap_or(1.0),
            lambda: self.lambda.unwrap_or(1.0),
            truncation: ModeTruncation::new(n_max as usize)?,
            coupling: CouplingSpec {
                geometry,
                phi0: self.phi0.unwrap_or(DEFAULT_PHI0),
                sigma: self.sigma.unwrap_or(DEFAULT_SIGMA),
            },
            dtau: self.dtau.unwrap_or(DEFAULT_DTAU),
            tau_end: self.tau_end.unwrap_or(DEFAULT_TAU_END),
            seed: self.seed.unwrap_or(0),
        };
        engine.validate()?;
        if engine.coupling.phi0 > 0.0 {
            warnings.push(ConfigWarning::RepulsiveCoupling);
        }

        let n_max = engine.truncation.n_max();
        let tracked = match &self.tracked {
            Some(list) => {
                if let Some(&(j, k)) = list.iter().find(|&&(j, k)| j > n_max || k > n_max) {
                    return Err(EngineError::config(
                        "tracked",
                        format!("state ({j},{k}) lies outside the truncation n_max={n_max}"),
                    ));
                }
                list.clone()
            }
            None => default_tracked(&engine),
        };

        let snapshot_taus = match &self.snapshot_taus {
            Some(taus) => {
                for &t in taus {
                    if !(0.0..=engine.tau_end).contains(&t) {
                        return Err(EngineError::config(
                            "snapshot_taus",
                            format!("{t} lies outside [0, tau_end]"),
                        ));
                    }
                }
                taus.iter().map(|&t| snap_to_grid(&engine, t)).collect()
            }
            None => (0..4)
                .map(|i| snap_to_grid(&engine, engine.tau_end * i as f64 / 3.0))
                .collect(),
        };

        let density_extent = self.density_extent.unwrap_or(DEFAULT_DENSITY_EXTENT);
        positive("density_extent", density_extent)?;
        let density_points = self.density_points.unwrap_or(DEFAULT_DENSITY_POINTS);
        if density_points < 2 {
            return Err(EngineError::config("density_points", "must be at least 2"));
        }
        if let Some(t) = self.tau_measure {
            engine
                .grid_index(t)
                .map_err(|_| EngineError::config("tau_measure", format!("{t} is not on the time grid")))?;
        }
        let n_cycles = self.n_cycles.unwrap_or(DEFAULT_N_CYCLES);
        if n_cycles < 1 {
            return Err(EngineError::config("n_cycles", "must be at least 1"));
        }

        Ok((
            RunConfig {
                engine,
                observe: ObservationOptions {
                    tracked,
                    snapshot_taus,
                    density_extent,
                    density_points,
                    tau_measure: self.tau_measure,
                    n_cycles,
                    convergence_check: self.convergence_check.unwrap_or(false),
                },
            },
            warnings,
        ))
    }
}

fn snap_to_grid(engine: &EngineConfig, tau: f64) -> f64 {
    let i = (tau / engine.dtau).round().min(engine.n_steps() as f64);
    i * engine.dtau
}

/// All `|j,k⟩` with free energy at most [`DEFAULT_TRACKED_ENERGY`], ordered by energy.
pub fn default_tracked(engine: &EngineConfig) -> Vec<(usize, usize)> {
    let mut states: Vec<(usize, usize)> = engine
        .truncation
        .indices()
        .filter(|i| free_energy(i.j, i.k, engine.omega) <= DEFAULT_TRACKED_ENERGY + 1e-12)
        .map(|i| (i.j, i.k))
        .collect();
    states.sort_by(|a, b| {
        free_energy(a.0, a.1, engine.omega)
            .total_cmp(&free_energy(b.0, b.1, engine.omega))
            .then(a.cmp(b))
    });
    states
}
