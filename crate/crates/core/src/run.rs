//! Drives a configured run and writes its outputs.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.toml            resolved configuration
//! diagnostics.csv          finite element scenarios
//! snapshots/step_NNNNNN.vtk
//! toy_<mode>_tau_<τ>.csv   toy model, one file per τ
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::diagnostics::{CsvWriter, DiagnosticsRow};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Simulation};
use crate::scenario::{Scenario, ScenarioKind};
use crate::toy1d::{self, ToyState, ToyTrajectory};
use crate::vtk;

#[derive(Clone, Debug)]
pub enum RunSummary {
    Mesh {
        steps: u64,
        first: DiagnosticsRow,
        last: DiagnosticsRow,
        snapshots: usize,
    },
    Toy(Vec<ToyTrajectory>),
}

pub fn simulation_for(cfg: &RunConfig, scenario: &Scenario) -> Result<Simulation> {
    let mut ic = IntegratorConfig::new(scenario.spec.dt, Some(scenario.spec.contact));
    ic.predictor = cfg.predictor;
    Simulation::new(
        scenario.model.clone(),
        scenario.grid()?,
        ic,
        scenario.initial_velocity.clone(),
        None,
    )
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes the manifest, then runs the configured scenario.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let out = &cfg.output_dir;
    create_dir(out)?;
    let manifest = out.join("manifest.toml");
    fs::write(&manifest, cfg.to_manifest()).map_err(|e| Error::io(&manifest, e))?;
    match cfg.scenario {
        ScenarioKind::Toy1d => run_toy(cfg, out),
        _ => run_mesh(cfg, out),
    }
}

fn run_mesh(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let scenario = cfg.build_scenario()?;
    let mut sim = simulation_for(cfg, &scenario)?;
    let snap_dir = out.join("snapshots");
    create_dir(&snap_dir)?;
    let csv_path = out.join("diagnostics.csv");
    let mut csv = CsvWriter::new(create_file(&csv_path)?).map_err(|e| Error::io(&csv_path, e))?;

    let steps = sim.steps_until(cfg.end_time);
    let mut first = None;
    let mut last = None;
    let mut snapshots = 0;
    let title = format!("{} {} {}", cfg.scenario.name(), cfg.mode, cfg.law);
    sim.run(cfg.end_time, 1, |sim| {
        let s = sim.state();
        let final_step = s.step == steps;
        if s.step % cfg.diagnostics_every == 0 || final_step {
            let row = DiagnosticsRow::capture(sim)?;
            csv.write_row(&row).map_err(|e| Error::io(&csv_path, e))?;
            first.get_or_insert(row);
            last = Some(row);
        }
        if s.step % cfg.snapshot_every == 0 || final_step {
            let path: PathBuf = snap_dir.join(format!("step_{:06}.vtk", s.step));
            vtk::write_snapshot(&path, &sim.model().mesh, &s.x, &s.v, &format!("{title} t={:e}", s.time))?;
            snapshots += 1;
        }
        Ok(())
    })?;
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(RunSummary::Mesh {
        steps,
        first: first.expect("initial state observed"),
        last: last.expect("final state observed"),
        snapshots,
    })
}

/// File name for one toy trajectory.
pub fn toy_file_name(tr: &ToyTrajectory) -> String {
    format!("toy_{}_tau_{}.csv", tr.mode, tr.tau)
}

fn run_toy(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let taus = cfg.taus.as_deref().unwrap_or(&toy1d::DEFAULT_TAUS);
    let mut trajectories = Vec::with_capacity(taus.len());
    for &tau in taus {
        let dt = cfg.dt.unwrap_or_else(|| toy1d::default_dt(tau));
        let tr = toy1d::integrate_toy(ToyState::approach(tau), cfg.mode, cfg.end_time, dt)?;
        let path = out.join(toy_file_name(&tr));
        tr.write_csv(create_file(&path)?).map_err(|e| Error::io(&path, e))?;
        trajectories.push(tr);
    }
    // every file is written before an instability is reported
    if let Some(bad) = trajectories.iter().find(|t| t.unstable) {
        bad.clone().check()?;
    }
    Ok(RunSummary::Toy(trajectories))
}
