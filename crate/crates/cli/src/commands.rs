use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use osc_engine::config::{ConfigDocument, RunConfig};
use osc_engine::coupling::cache::load_or_assemble;
use osc_engine::coupling::oracle::{interaction_table_2d, table_element, OracleGrid};
use osc_engine::coupling::InteractionMatrix;
use osc_engine::dynamics::{
    argmin_p00, assemble_hamiltonian, energy_series, spectral_decompose, truncation_convergence, Propagator,
    SpectralHamiltonian, StateVector,
};
use osc_engine::measurement::{
    measured_distribution, post_measurement_energies, realspace_density, run_cycles, summarize, symmetric_axis,
    CycleSummary, PostMeasurement,
};
use serde::Serialize;

use crate::manifest::{timed, CacheRecord, RunManifest};
use crate::{output, CycleArgs, ElementArgs, RunArgs};

pub const CACHE_ENV: &str = "OSC_ENGINE_CACHE_DIR";

/// Levels per axis shown in the Fock panels of the figures.
const FIGURE_FOCK_LEVELS: usize = 11;

fn cache_dir(no_cache: bool) -> Option<PathBuf> {
    if no_cache {
        return None;
    }
    Some(match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => std::env::temp_dir().join("osc-engine-cache"),
    })
}

fn load_config(args: &RunArgs, overrides: impl FnOnce(&mut ConfigDocument)) -> Result<(RunConfig, Vec<String>)> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut doc = ConfigDocument::from_json(&text)?;
    if let Some(seed) = args.seed {
        doc.seed = Some(seed);
    }
    overrides(&mut doc);
    let (run, warnings) = doc.validate()?;
    let warnings: Vec<String> = warnings.iter().map(|w| w.to_string()).collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((run, warnings))
}

struct Prepared {
    run: RunConfig,
    manifest: RunManifest,
    phi: InteractionMatrix,
    spectrum: SpectralHamiltonian,
}

fn prepare(command: &'static str, args: &RunArgs, overrides: impl FnOnce(&mut ConfigDocument)) -> Result<Prepared> {
    let (run, warnings) = load_config(args, overrides)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating output directory {}", args.out.display()))?;
    let dir = cache_dir(args.no_cache);
    let mut timings = Default::default();
    let (phi, status, key) = timed(&mut timings, "assemble", || {
        Ok(load_or_assemble(&run.engine, dir.as_deref())?)
    })?;
    log::info!("interaction matrix {key}: {status:?}");
    let spectrum = timed(&mut timings, "eigensolve", || {
        Ok(spectral_decompose(&assemble_hamiltonian(&run.engine, &phi)?)?)
    })?;
    let mut manifest = RunManifest::new(command, run.clone(), warnings, CacheRecord { key, status, dir });
    manifest.timings = timings;
    Ok(Prepared {
        run,
        manifest,
        phi,
        spectrum,
    })
}

#[derive(Serialize)]
struct SnapshotEntry {
    index: usize,
    tau: f64,
    fock: String,
    density: String,
}

/// Index of the files written for the figure renderer.
#[derive(Serialize)]
struct FigureBundle {
    geometry: String,
    n_max: usize,
    fock_levels: usize,
    energy_series: String,
    tracked: Vec<(usize, usize)>,
    density_x1: String,
    density_x2: String,
    snapshots: Vec<SnapshotEntry>,
}

pub fn simulate(args: &RunArgs, bundle: bool) -> Result<()> {
    let command = if bundle { "figure-data" } else { "simulate" };
    let Prepared {
        run,
        mut manifest,
        phi,
        spectrum,
    } = prepare(command, args, |_| {})?;
    let (engine, observe) = (&run.engine, &run.observe);
    let out = args.out.as_path();
    let psi0 = StateVector::fock(0, 0, engine.truncation)?;

    let records = timed(&mut manifest.timings, "series", || {
        let records = energy_series(engine, &phi, &spectrum, &psi0, &observe.tracked)?;
        output::energy_series(&out.join("energy_series.csv"), &records, &observe.tracked)?;
        Ok(records)
    })?;
    manifest.outputs.push("energy_series.csv".into());
    manifest.min_p00 = argmin_p00(&records).map(|r| r.p00);

    let axis = symmetric_axis(observe.density_extent, observe.density_points);
    let snapshots = timed(&mut manifest.timings, "snapshots", || {
        let propagator = Propagator::new(&spectrum, &psi0)?;
        output::axis(&out.join("density_x1.csv"), "x1", &axis)?;
        output::axis(&out.join("density_x2.csv"), "x2", &axis)?;
        output::snapshot_index(&out.join("snapshots.csv"), &observe.snapshot_taus)?;
        let mut entries = Vec::new();
        for (index, &tau) in observe.snapshot_taus.iter().enumerate() {
            let psi = propagator.state_at(tau);
            let fock = format!("fock_snapshot_{index}.csv");
            output::fock_snapshot(&out.join(&fock), &psi, engine.truncation.dim())?;
            let grid = realspace_density(&psi, &axis, &axis, engine.lambda)?;
            let density = format!("density_{index}.csv");
            output::density(&out.join(&density), &grid)?;
            entries.push(SnapshotEntry {
                index,
                tau,
                fock,
                density,
            });
        }
        Ok(entries)
    })?;
    manifest
        .outputs
        .extend(["density_x1.csv", "density_x2.csv", "snapshots.csv"].map(String::from));
    for s in &snapshots {
        manifest.outputs.push(s.fock.clone());
        manifest.outputs.push(s.density.clone());
    }

    if observe.convergence_check {
        let report = timed(&mut manifest.timings, "convergence", || {
            Ok(truncation_convergence(engine, &phi, &spectrum, &engine.time_grid())?)
        })?;
        manifest.convergence = Some(report);
    }

    if bundle {
        let b = FigureBundle {
            geometry: engine.coupling.geometry.to_string(),
            n_max: engine.truncation.n_max(),
            fock_levels: FIGURE_FOCK_LEVELS.min(engine.truncation.dim()),
            energy_series: "energy_series.csv".into(),
            tracked: observe.tracked.clone(),
            density_x1: "density_x1.csv".into(),
            density_x2: "density_x2.csv".into(),
            snapshots,
        };
        output::json(&out.join("bundle.json"), &b)?;
        manifest.outputs.push("bundle.json".into());
    }
    manifest.finish(out)
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    #[serde(flatten)]
    summary: &'a CycleSummary,
    expected_post_measurement: PostMeasurement,
}

pub fn cycles(args: &CycleArgs) -> Result<()> {
    let Prepared {
        run,
        mut manifest,
        phi,
        spectrum,
    } = prepare("cycles", &args.run, |doc| {
        if let Some(t) = args.tau_measure {
            doc.tau_measure = Some(t);
        }
        if let Some(n) = args.cycles {
            doc.n_cycles = Some(n);
        }
    })?;
    let engine = &run.engine;
    let out = args.run.out.as_path();

    let tau = match run.observe.tau_measure {
        Some(t) => t,
        None => timed(&mut manifest.timings, "tau_search", || {
            let psi0 = StateVector::fock(0, 0, engine.truncation)?;
            let grid = engine.time_grid();
            let p00: Vec<f64> = Propagator::new(&spectrum, &psi0)?
                .amplitude_series(0, &grid)
                .iter()
                .map(|a| a.norm_sqr())
                .collect();
            let best = (0..grid.len())
                .min_by(|&a, &b| p00[a].total_cmp(&p00[b]))
                .expect("non-empty grid");
            log::info!("tau_measure = {} (p00 = {:.6})", grid[best], p00[best]);
            Ok(grid[best])
        })?,
    };
    let (_, dist) = measured_distribution(&spectrum, tau)?;
    manifest.tau_measure = Some(tau);
    manifest.min_p00 = Some(dist.prob(0, 0));

    let ledgers = timed(&mut manifest.timings, "cycles", || {
        Ok(run_cycles(engine, &phi, &spectrum, tau, run.observe.n_cycles)?)
    })?;
    timed(&mut manifest.timings, "write", || {
        output::cycles(&out.join("cycles.csv"), &ledgers)?;
        let summary = summarize(&ledgers, &dist, engine.omega)?;
        let post = post_measurement_energies(&dist, &phi.diagonal(), engine.omega)?;
        output::json(
            &out.join("summary.json"),
            &SummaryDocument {
                summary: &summary,
                expected_post_measurement: post,
            },
        )
    })?;
    manifest
        .outputs
        .extend(["cycles.csv", "summary.json"].map(String::from));
    manifest.finish(out)
}

pub fn elements(args: &ElementArgs) -> Result<()> {
    let (run, warnings) = load_config(&args.run, |_| {})?;
    let engine = &run.engine;
    let max = args.max_level;
    if max > engine.truncation.n_max() {
        bail!("--max-level {max} exceeds n_max = {}", engine.truncation.n_max());
    }
    let out: &Path = &args.run.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let dir = cache_dir(args.run.no_cache);
    let mut timings = Default::default();
    let (phi, status, key) = timed(&mut timings, "assemble", || {
        Ok(load_or_assemble(engine, dir.as_deref())?)
    })?;
    timed(&mut timings, "oracle", || {
        let table = interaction_table_2d(max, &engine.coupling, engine.lambda, OracleGrid::default());
        let mut w = csv::Writer::from_path(out.join("elements.csv"))?;
        w.write_record(["u", "v", "j", "k", "value", "oracle_2d"])?;
        for u in 0..=max {
            for v in 0..=max {
                for j in 0..=max {
                    for k in 0..=max {
                        w.write_record([
                            u.to_string(),
                            v.to_string(),
                            j.to_string(),
                            k.to_string(),
                            output::num(phi.element(u, v, j, k)),
                            output::num(table_element(&table, max, u, v, j, k)),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let mut manifest = RunManifest::new("elements", run.clone(), warnings, CacheRecord { key, status, dir });
    manifest.timings = timings;
    manifest.outputs.push("elements.csv".into());
    manifest.finish(out)
}
