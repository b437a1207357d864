//! Truncated two-mode Fock basis `|j,k⟩`.
//!
//! Composite states are flattened row-major: oscillator 1 (`j`) is the outer
//! index and oscillator 2 (`k`) the inner one, so `flat = j * dim + k`.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

pub const DEFAULT_N_MAX: usize = 50;

/// Highest retained level per oscillator. Both modes share the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ModeTruncation {
    n_max: usize,
}

impl ModeTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(EngineError::config("n_max", "must be at least 1"));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Per-mode dimension, `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the composite space, `dim²`.
    pub fn total_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn indices(&self) -> impl Iterator<Item = CompositeIndex> + '_ {
        let dim = self.dim();
        (0..self.total_dim()).map(move |flat| CompositeIndex {
            j: flat / dim,
            k: flat % dim,
            flat,
        })
    }
}

impl Default for ModeTruncation {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX }
    }
}

impl TryFrom<usize> for ModeTruncation {
    type Error = EngineError;

    fn try_from(n_max: usize) -> Result<Self> {
        Self::new(n_max)
    }
}

impl From<ModeTruncation> for usize {
    fn from(t: ModeTruncation) -> usize {
        t.n_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompositeIndex {
    pub j: usize,
    pub k: usize,
    pub flat: usize,
}

impl CompositeIndex {
    pub fn new(j: usize, k: usize, trunc: ModeTruncation) -> Result<Self> {
        Ok(Self {
            j,
            k,
            flat: flat_index(j, k, trunc)?,
        })
    }
}

pub fn flat_index(j: usize, k: usize, trunc: ModeTruncation) -> Result<usize> {
    let n_max = trunc.n_max();
    if j > n_max || k > n_max {
        return Err(EngineError::Index(format!(
            "level pair ({j},{k}) outside truncation n_max={n_max}"
        )));
    }
    Ok(j * trunc.dim() + k)
}

pub fn unflatten(flat: usize, trunc: ModeTruncation) -> Result<(usize, usize)> {
    if flat >= trunc.total_dim() {
        return Err(EngineError::Index(format!(
            "flat index {flat} outside composite dimension {}",
            trunc.total_dim()
        )));
    }
    Ok((flat / trunc.dim(), flat % trunc.dim()))
}

/// Uncoupled energy `(j + 1/2) + ω(k + 1/2)` in units of ħΩ₁.
pub fn free_energy(j: usize, k: usize, omega: f64) -> f64 {
    (j as f64 + 0.5) + omega * (k as f64 + 0.5)
}

/// Free energies of every composite state, in flat order.
pub fn free_energies(trunc: ModeTruncation, omega: f64) -> Vec<f64> {
    trunc.indices().map(|i| free_energy(i.j, i.k, omega)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t50() -> ModeTruncation {
        ModeTruncation::new(50).unwrap()
    }

    #[test]
    fn truncation_dimensions() {
        let t = ModeTruncation::default();
        assert_eq!(t.n_max(), 50);
        assert_eq!(t.dim(), 51);
        assert_eq!(t.total_dim(), 2601);
        assert!(ModeTruncation::new(0).is_err());
    }

    #[test]
    fn flat_index_examples() {
        assert_eq!(flat_index(0, 0, t50()).unwrap(), 0);
        assert_eq!(flat_index(1, 0, t50()).unwrap(), 51);
        assert_eq!(flat_index(0, 50, t50()).unwrap(), 50);
        assert!(matches!(flat_index(51, 0, t50()), Err(EngineError::Index(_))));
        assert!(flat_index(0, 51, t50()).is_err());
    }

    #[test]
    fn unflatten_examples() {
        assert_eq!(unflatten(0, t50()).unwrap(), (0, 0));
        assert_eq!(unflatten(52, t50()).unwrap(), (1, 1));
        assert_eq!(unflatten(2600, t50()).unwrap(), (50, 50));
        assert!(matches!(unflatten(2601, t50()), Err(EngineError::Index(_))));
    }

    #[test]
    fn flat_and_unflatten_are_inverse_exhaustively() {
        let t = t50();
        for j in 0..=50 {
            for k in 0..=50 {
                let f = flat_index(j, k, t).unwrap();
                assert_eq!(unflatten(f, t).unwrap(), (j, k));
            }
        }
        for f in 0..t.total_dim() {
            let (j, k) = unflatten(f, t).unwrap();
            assert_eq!(flat_index(j, k, t).unwrap(), f);
        }
        let via_iter: Vec<usize> = t.indices().map(|i| i.flat).collect();
        assert_eq!(via_iter, (0..t.total_dim()).collect::<Vec<_>>());
    }

    #[test]
    fn free_energy_examples() {
        assert_eq!(free_energy(0, 0, 1.0), 1.0);
        assert_eq!(free_energy(1, 1, 1.0), 3.0);
        assert_eq!(free_energy(2, 3, 0.5), 4.25);
    }

    #[test]
    fn truncation_serde_rejects_zero() {
        assert!(serde_json::from_str::<ModeTruncation>("0").is_err());
        let t: ModeTruncation = serde_json::from_str("7").unwrap();
        assert_eq!(t.n_max(), 7);
    }

    proptest! {
        #[test]
        fn free_energy_strictly_increasing(j in 0usize..100, k in 0usize..100, omega in 1e-3f64..10.0) {
            prop_assert!(free_energy(j + 1, k, omega) > free_energy(j, k, omega));
            prop_assert!(free_energy(j, k + 1, omega) > free_energy(j, k, omega));
        }
    }
}
