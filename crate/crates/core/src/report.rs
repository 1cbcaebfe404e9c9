//! CSV artifacts and run manifests.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` and does not depend on locale.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::array::{self, join_indices};
use crate::bounds::{wwb_value, PosteriorRepr, TestPoint};
use crate::config::render_config;
use crate::controller::{H_RANGE, S_RANGE, WWB_GRID_POINTS};
use crate::error::Result;
use crate::sim::{self, ExperimentConfig, SweepRow, TrajectoryRecord};

/// What a CLI invocation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Bounds,
    Policies,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sweep => "sweep",
            Command::Bounds => "bounds",
            Command::Policies => "policies",
        }
    }

    pub fn artifact(self) -> &'static str {
        match self {
            Command::Run => "trajectory.csv",
            Command::Sweep => "mse_vs_snr.csv",
            Command::Bounds => "bound_surface.csv",
            Command::Policies => "selections.csv",
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("step,bound_kind,sel_tx,sel_rx,s_star,h_star,bound_value,post_mean,post_var,estimate,sq_err\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.policy,
            join_indices(r.selection.tx_idx()),
            join_indices(r.selection.rx_idx()),
            opt(r.test_point.map(|t| t.s)),
            opt(r.test_point.map(|t| t.h)),
            opt(r.bound_value),
            fmt_f64(r.post_mean),
            fmt_f64(r.post_var),
            fmt_f64(r.estimate),
            fmt_f64(r.sq_err),
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("snr_db,bound_kind,eval_step,n_traj,mse\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.snr_db),
            r.policy,
            r.eval_step,
            r.n_traj,
            fmt_f64(r.mse)
        );
    }
    out
}

pub fn selections_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("step,bound_kind,sel_tx,sel_rx\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.step,
            r.policy,
            join_indices(r.selection.tx_idx()),
            join_indices(r.selection.rx_idx())
        );
    }
    out
}

/// WWB over the 16×16 `(s, h)` grid of the controller, on the prior and
/// with the fixed uniform selection. Undefined points carry `None`.
pub fn bound_surface(cfg: &ExperimentConfig) -> Result<Vec<(TestPoint, Option<f64>)>> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let model = cfg.signal_model()?;
    let sel = sim::fixed_uniform_selection(cfg)?;
    let positions = array::effective_positions(&geom, &sel, cfg.mode)?;
    let prior = PosteriorRepr::prior();
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let n = WWB_GRID_POINTS;
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    };
    let mut out = Vec::with_capacity(WWB_GRID_POINTS * WWB_GRID_POINTS);
    for &s in &axis(S_RANGE) {
        for &h in &axis(H_RANGE) {
            let tp = TestPoint { s, h };
            out.push((tp, wwb_value(tp, &prior, &positions, &model, geom.wavelength()).ok()));
        }
    }
    Ok(out)
}

pub fn surface_csv(points: &[(TestPoint, Option<f64>)]) -> String {
    let mut out = String::from("s,h,value\n");
    for (tp, v) in points {
        let _ = writeln!(out, "{},{},{}", fmt_f64(tp.s), fmt_f64(tp.h), opt(*v));
    }
    out
}

/// Produce the CSV body of one subcommand.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    match cmd {
        Command::Run => {
            let traj = sim::run_closed_loop(cfg, cfg.policies[0], sim::trajectory_seed(cfg.seed, 0))?;
            Ok(trajectory_csv(&traj.records))
        }
        Command::Sweep => Ok(sweep_csv(&sim::snr_sweep(cfg)?)),
        Command::Bounds => Ok(surface_csv(&bound_surface(cfg)?)),
        Command::Policies => {
            let mut records = Vec::new();
            for &p in &cfg.policies {
                records.extend(sim::run_closed_loop(cfg, p, sim::trajectory_seed(cfg.seed, 0))?.records);
            }
            Ok(selections_csv(&records))
        }
    }
}

/// Provenance written next to the artifacts of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub seed: u64,
    pub version: String,
    pub duration_secs: f64,
    pub artifacts: Vec<PathBuf>,
    pub config: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command.as_str());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "duration_secs = {:.3}", self.duration_secs);
        for a in &self.artifacts {
            let _ = writeln!(out, "artifact = {}", a.display());
        }
        out.push_str("\n[config]\n");
        out.push_str(&self.config);
        out
    }
}

pub fn manifest_name(cmd: Command) -> String {
    format!("manifest_{}.txt", cmd.as_str())
}

/// Run `cmd`, write its CSV and manifest into `out_dir`, return the manifest.
pub fn run_to_dir(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let body = execute(cmd, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(cmd.artifact());
    std::fs::write(&csv, body)?;
    let manifest = RunManifest {
        command: cmd,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: start.elapsed().as_secs_f64(),
        artifacts: vec![csv],
        config: render_config(cfg),
    };
    std::fs::write(out_dir.join(manifest_name(cmd)), manifest.render())?;
    Ok(manifest)
}
