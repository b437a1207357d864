//! Matrix elements against the brute-force position-space oracle.

use osc_engine::basis::free_energy;
use osc_engine::config::EngineConfig;
use osc_engine::coupling::oracle::{element_oracle_2d, interaction_table_2d, table_element, OracleGrid};
use osc_engine::coupling::{assemble_matrix, CouplingSpec, Geometry};
use osc_engine::dynamics::assemble_hamiltonian;

const LEVEL: usize = 12;

fn max_oracle_gap(config: &EngineConfig) -> f64 {
    let phi = assemble_matrix(config).unwrap();
    let table = interaction_table_2d(LEVEL, &config.coupling, config.lambda, OracleGrid::default());
    let mut worst: f64 = 0.0;
    for u in 0..=LEVEL {
        for v in 0..=LEVEL {
            for j in 0..=LEVEL {
                for k in 0..=LEVEL {
                    let d = phi.element(u, v, j, k) - table_element(&table, LEVEL, u, v, j, k);
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    worst
}

#[test]
fn canonical_elements_match_oracle() {
    for geometry in [Geometry::Parallel, Geometry::Perpendicular] {
        let config = EngineConfig::canonical(geometry).with_n_max(LEVEL).unwrap();
        let gap = max_oracle_gap(&config);
        assert!(gap <= 1e-8, "{geometry}: {gap:e}");
    }
}

#[test]
fn off_canonical_elements_match_oracle() {
    for geometry in [Geometry::Parallel, Geometry::Perpendicular] {
        for (phi0, sigma, lambda) in [(-3.0, 0.8, 1.3), (7.5, 0.35, 0.8), (-1.0, 1.6, 1.0)] {
            let mut config = EngineConfig::canonical(geometry).with_n_max(LEVEL).unwrap();
            config.coupling = CouplingSpec::new(geometry, phi0, sigma).unwrap();
            config.lambda = lambda;
            let gap = max_oracle_gap(&config);
            assert!(
                gap <= 1e-8,
                "{geometry} phi0={phi0} sigma={sigma} lambda={lambda}: {gap:e}"
            );
        }
    }
}

#[test]
fn single_element_oracle_agrees_with_table() {
    let spec = CouplingSpec::new(Geometry::Parallel, -10.0, 0.5).unwrap();
    let table = interaction_table_2d(3, &spec, 1.0, OracleGrid::default());
    let direct = element_oracle_2d(1, 2, 3, 0, &spec, 1.0, OracleGrid::default());
    assert!((direct - table_element(&table, 3, 1, 2, 3, 0)).abs() < 1e-13);
}

#[test]
fn small_hamiltonians_match_hand_assembly() {
    for geometry in [Geometry::Parallel, Geometry::Perpendicular] {
        for n_max in [1, 2] {
            let config = EngineConfig::canonical(geometry).with_n_max(n_max).unwrap();
            let h = assemble_hamiltonian(&config, &assemble_matrix(&config).unwrap()).unwrap();
            let table = interaction_table_2d(n_max, &config.coupling, config.lambda, OracleGrid::default());
            for a in config.truncation.indices() {
                for b in config.truncation.indices() {
                    let mut expected = table_element(&table, n_max, a.j, a.k, b.j, b.k);
                    if a.flat == b.flat {
                        expected += free_energy(a.j, a.k, config.omega);
                    }
                    let got = h.get(a.flat, b.flat);
                    assert!((got - expected).abs() <= 1e-10, "{geometry} n_max={n_max} {a:?} {b:?}");
                }
            }
        }
    }
}
