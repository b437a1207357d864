//! CSV writers. Floats are written with 15 significant digits so that
//! identical runs produce byte-identical files.

use std::path::Path;

use anyhow::{Context, Result};
use osc_engine::dynamics::{EnergyRecord, StateVector};
use osc_engine::measurement::{CycleLedger, DensityGrid};

pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

pub fn energy_series(path: &Path, records: &[EnergyRecord], tracked: &[(usize, usize)]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<String> = ["tau", "e_total", "e_free", "e_int", "e_int_post", "e_total_post", "p00"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(tracked.iter().map(|(j, k)| format!("p_{j}_{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            num(r.tau),
            num(r.e_total),
            num(r.e_free),
            num(r.e_int),
            num(r.e_int_post),
            num(r.e_total_post),
            num(r.p00),
        ];
        row.extend(r.tracked_probs.iter().map(|&p| num(p)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Occupation matrix `|Ψ_jk|²`, one row per `j`.
pub fn fock_snapshot(path: &Path, psi: &StateVector, dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    for j in 0..dim {
        w.write_record((0..dim).map(|k| num(psi.probability(j * dim + k))))?;
    }
    w.flush()?;
    Ok(())
}

/// Density matrix, one row per `x₁` sample.
pub fn density(path: &Path, grid: &DensityGrid) -> Result<()> {
    let mut w = writer(path)?;
    for i1 in 0..grid.x1.len() {
        w.write_record((0..grid.x2.len()).map(|i2| num(grid.at(i1, i2))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn axis(path: &Path, name: &str, xs: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([name])?;
    for &x in xs {
        w.write_record([num(x)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn snapshot_index(path: &Path, taus: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["index", "tau"])?;
    for (i, &t) in taus.iter().enumerate() {
        w.write_record([i.to_string(), num(t)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cycles(path: &Path, ledgers: &[CycleLedger]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "cycle",
        "tau_measure",
        "j",
        "k",
        "e_switch_on",
        "e_decouple_cost",
        "w_extract",
        "e_measure_input",
        "w_net",
    ])?;
    for l in ledgers {
        w.write_record([
            l.cycle.to_string(),
            num(l.tau_measure),
            l.outcome.0.to_string(),
            l.outcome.1.to_string(),
            num(l.e_switch_on),
            num(l.e_decouple_cost),
            num(l.w_extract),
            num(l.e_measure_input),
            num(l.w_net),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(file, value).with_context(|| format!("writing {}", path.display()))
}
