//! Closed-loop perception-action simulation: synthetic measurements,
//! policy selection per step, particle updates, baselines and Monte Carlo
//! MSE evaluation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand::seq::IndexedRandom;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::anneal::AnnealSchedule;
use crate::array::{self, ArrayGeometry, ArrayMode, ChannelSelection};
use crate::bounds::{PosteriorRepr, SignalModel, TestPoint};
use crate::controller::{self, BoundKind};
use crate::error::{Error, Result};
use crate::particle::{self, LikelihoodModel, Measurement, ParticleSet, PosteriorKind, ResampleMode};
use crate::rng::{derive_seed, substream, tag};

/// How a channel subset is chosen at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Bound(BoundKind),
    /// Sliding contiguous receiver window.
    Stair,
    /// Time-invariant selection with the best filled virtual array.
    FixedUniform,
    /// Uniform draw from the admissible selections.
    Random,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Bound(k) => k.as_str(),
            Policy::Stair => "stair",
            Policy::FixedUniform => "fixed_uniform",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stair" => Ok(Policy::Stair),
            "fixed_uniform" => Ok(Policy::FixedUniform),
            "random" => Ok(Policy::Random),
            _ => s.parse().map(Policy::Bound).map_err(|_| {
                Error::invalid(format!(
                    "unknown bound `{s}` (expected wwb, wwb_s05, bzb, ecrb, stair, fixed_uniform or random)"
                ))
            }),
        }
    }
}

/// Which measurements are re-drawn for each Monte Carlo realisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseMode {
    /// Only the step-k measurement, from the trajectory's step-(k-1) particles.
    Step,
    /// Steps 1..=k, replaying the trajectory's selections from the initial
    /// particles.
    Trajectory,
}

impl MseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MseMode::Step => "step",
            MseMode::Trajectory => "trajectory",
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_rx: usize,
    pub n_tx: usize,
    pub i_rx: usize,
    pub i_tx: usize,
    pub fix_first: bool,
    pub spacing_factor: f64,
    pub wavelength: f64,
    pub inter_pulse: f64,
    pub mode: ArrayMode,
    pub snapshots: usize,
    pub signal_value: f64,
    pub snr_db: f64,
    /// SNR points of a sweep.
    pub sweep_snr_db: Vec<f64>,
    pub f_d: f64,
    pub particles: usize,
    pub resample_mode: ResampleMode,
    /// `None` picks the default for the array mode.
    pub posterior_repr: Option<PosteriorKind>,
    pub grid_bins: usize,
    pub policies: Vec<Policy>,
    /// `None` uses 100 temperatures below 0 dB and 50 otherwise.
    pub sa_temps: Option<usize>,
    pub sa_moves: usize,
    pub steps: usize,
    pub theta_true: f64,
    pub n_real: usize,
    pub n_traj: usize,
    pub eval_step: usize,
    pub mse_mode: MseMode,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_rx: 8,
            n_tx: 4,
            i_rx: 4,
            i_tx: 2,
            fix_first: true,
            spacing_factor: 0.9,
            wavelength: 1.0,
            inter_pulse: 0.0,
            mode: ArrayMode::Mimo,
            snapshots: 2,
            signal_value: 1.0,
            snr_db: -5.0,
            sweep_snr_db: vec![-10.0, -5.0, 0.0, 5.0],
            f_d: 0.0,
            particles: 500,
            resample_mode: ResampleMode::Always,
            posterior_repr: None,
            grid_bins: 1024,
            policies: vec![Policy::Bound(BoundKind::Wwb)],
            sa_temps: None,
            sa_moves: 20,
            steps: 8,
            theta_true: 0.3,
            n_real: 300,
            n_traj: 20,
            eval_step: 8,
            mse_mode: MseMode::Step,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_rx", self.n_rx),
            ("n_tx", self.n_tx),
            ("i_rx", self.i_rx),
            ("i_tx", self.i_tx),
            ("snapshots", self.snapshots),
            ("particles", self.particles),
            ("grid_bins", self.grid_bins),
            ("sa_moves", self.sa_moves),
            ("steps", self.steps),
            ("n_real", self.n_real),
            ("n_traj", self.n_traj),
            ("eval_step", self.eval_step),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be >= 1")));
        }
        if self.sa_temps == Some(0) {
            return Err(Error::invalid("sa_temps must be >= 1"));
        }
        if self.i_rx > self.n_rx || self.i_tx > self.n_tx {
            return Err(Error::invalid("cannot select more elements than the array has"));
        }
        if self.eval_step > self.steps {
            return Err(Error::invalid(format!(
                "eval_step {} exceeds steps {}",
                self.eval_step, self.steps
            )));
        }
        if !(self.theta_true.abs() <= 1.0) {
            return Err(Error::invalid(format!("theta_true must lie in [-1, 1], got {}", self.theta_true)));
        }
        if !(self.wavelength > 0.0) || !(self.spacing_factor > 0.0) {
            return Err(Error::invalid("wavelength and spacing_factor must be > 0"));
        }
        if self.signal_value == 0.0 || !self.signal_value.is_finite() || !self.snr_db.is_finite() {
            return Err(Error::invalid("signal_value must be nonzero and snr_db finite"));
        }
        if self.sweep_snr_db.is_empty() || self.policies.is_empty() {
            return Err(Error::invalid("need at least one SNR and one bound"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        array::uniform_geometry(self.n_rx, self.n_tx, self.spacing_factor, self.wavelength, self.inter_pulse)
    }

    pub fn signal_model(&self) -> Result<SignalModel> {
        SignalModel::from_snr_db(self.snr_db, self.snapshots, Complex64::new(self.signal_value, 0.0), self.f_d)
    }

    /// Gaussian fit for MIMO, gridded density for SIMO unless set.
    pub fn posterior_kind(&self) -> PosteriorKind {
        self.posterior_repr.unwrap_or(match self.mode {
            ArrayMode::Mimo => PosteriorKind::Gauss,
            ArrayMode::Simo => PosteriorKind::Grid,
        })
    }

    pub fn anneal_temps(&self) -> usize {
        self.sa_temps
            .unwrap_or_else(|| AnnealSchedule::for_snr(self.snr_db, 0).n_temps)
    }

    pub fn with_snr(&self, snr_db: f64) -> Self {
        Self {
            snr_db,
            ..self.clone()
        }
    }

    /// Admissible selections. In SIMO mode only Tx 1 exists.
    pub fn candidates(&self) -> Result<Vec<ChannelSelection>> {
        match self.mode {
            ArrayMode::Mimo => controller::enumerate_selections(self.n_rx, self.n_tx, self.i_rx, self.i_tx, self.fix_first),
            ArrayMode::Simo => controller::enumerate_selections(self.n_rx, 1, self.i_rx, 1, self.fix_first),
        }
    }
}

/// One step of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub policy: Policy,
    pub selection: ChannelSelection,
    pub test_point: Option<TestPoint>,
    pub bound_value: Option<f64>,
    pub post_mean: f64,
    pub post_var: f64,
    pub estimate: f64,
    pub sq_err: f64,
}

/// Records of a run together with the particle state entering each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
    /// `priors[k - 1]` is the particle set before the step-k update.
    pub priors: Vec<ParticleSet>,
}

/// Seed of trajectory `index` under a master seed. It does not depend on
/// SNR or policy, so different policies see the same random numbers.
pub fn trajectory_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[tag::TRAJECTORY, index as u64])
}

/// `x_j = m(θ) s + n_j`, noise circular complex Gaussian with total variance
/// σ² per entry.
pub fn synthesize_measurement<R: Rng + ?Sized>(
    theta_true: f64,
    sel: &ChannelSelection,
    geom: &ArrayGeometry,
    model: &SignalModel,
    mode: ArrayMode,
    step_index: usize,
    rng: &mut R,
) -> Result<Measurement> {
    if !(theta_true.abs() <= 1.0) {
        return Err(Error::invalid(format!("theta_true must lie in [-1, 1], got {theta_true}")));
    }
    let lik = LikelihoodModel::new(geom, sel, model, mode)?;
    Ok(synthesize_with(&lik, theta_true, model, step_index, rng))
}

fn synthesize_with<R: Rng + ?Sized>(
    lik: &LikelihoodModel,
    theta_true: f64,
    model: &SignalModel,
    step_index: usize,
    rng: &mut R,
) -> Measurement {
    let scale = (model.noise_var() / 2.0).sqrt();
    let mean: Vec<Complex64> = lik.steering(theta_true).map(|a| a * model.signal_value()).collect();
    let snapshots = (0..model.snapshots())
        .map(|_| {
            mean.iter()
                .map(|&m| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    m + Complex64::new(re, im) * scale
                })
                .collect()
        })
        .collect();
    Measurement { snapshots, step_index }
}

/// Longest run of consecutive lattice points covered by `positions`, or 0
/// when some position repeats.
fn uniform_fill(positions: &[f64], step: f64) -> usize {
    let mut idx: Vec<i64> = positions.iter().map(|p| (p / step).round() as i64).collect();
    idx.sort_unstable();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return 0;
    }
    let (mut best, mut run) = (1, 1);
    for w in idx.windows(2) {
        run = if w[1] == w[0] + 1 { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

/// Duplicate-free selection with the longest contiguous virtual run on the
/// element lattice; ties go to the lexicographically smallest selection.
pub fn fixed_uniform_selection(cfg: &ExperimentConfig) -> Result<ChannelSelection> {
    let geom = cfg.geometry()?;
    let step = cfg.spacing_factor * cfg.wavelength / 2.0;
    let mut best: Option<(usize, ChannelSelection)> = None;
    for sel in cfg.candidates()? {
        let fill = uniform_fill(&array::effective_positions(&geom, &sel, cfg.mode)?, step);
        if best.as_ref().is_none_or(|(f, _)| fill > *f) {
            best = Some((fill, sel));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::NoPolicy)
}

/// Stair window for step `k` (1-based). With `fix_first`, Rx 1 stays on and
/// the remaining `i_rx - 1` receivers slide over `2..=n_rx`.
pub fn stair_selection(cfg: &ExperimentConfig, k: usize) -> Result<ChannelSelection> {
    if k == 0 {
        return Err(Error::invalid("steps are numbered from 1"));
    }
    let positions = cfg.n_rx - cfg.i_rx + 1;
    let offset = (k - 1) % positions;
    let rx: Vec<usize> = if cfg.fix_first {
        std::iter::once(1).chain((0..cfg.i_rx - 1).map(|i| offset + 2 + i)).collect()
    } else {
        (0..cfg.i_rx).map(|i| offset + 1 + i).collect()
    };
    let tx = match cfg.mode {
        ArrayMode::Mimo => (1..=cfg.i_tx).collect(),
        ArrayMode::Simo => vec![1],
    };
    ChannelSelection::new(tx, rx)
}

/// Selection of a baseline policy at step `k`.
pub fn baseline_policy<R: Rng + ?Sized>(
    policy: Policy,
    k: usize,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<ChannelSelection> {
    match policy {
        Policy::Stair => stair_selection(cfg, k),
        Policy::FixedUniform => fixed_uniform_selection(cfg),
        Policy::Random => cfg.candidates()?.choose(rng).cloned().ok_or(Error::NoPolicy),
        Policy::Bound(_) => Err(Error::invalid("bound policies are not baselines")),
    }
}

struct StepChoice {
    selection: ChannelSelection,
    test_point: Option<TestPoint>,
    bound_value: Option<f64>,
}

/// One closed loop of `cfg.steps` steps with the given policy.
pub fn run_closed_loop(cfg: &ExperimentConfig, policy: Policy, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let model = cfg.signal_model()?;
    let candidates = cfg.candidates()?;
    let fixed = match policy {
        Policy::FixedUniform => Some(fixed_uniform_selection(cfg)?),
        _ => None,
    };

    let mut ps = particle::init_uniform(cfg.particles, -1.0, 1.0, &mut substream(seed, &[tag::INIT]))?;
    let mut records = Vec::with_capacity(cfg.steps);
    let mut priors = Vec::with_capacity(cfg.steps);
    for k in 1..=cfg.steps {
        let post = if k == 1 {
            PosteriorRepr::prior()
        } else {
            particle::to_posterior_repr(&ps, cfg.posterior_kind(), cfg.grid_bins)?
        };
        let policy_seed = derive_seed(seed, &[tag::POLICY, k as u64]);
        let choice = match policy {
            Policy::Bound(kind) => {
                let sched = AnnealSchedule::new(cfg.anneal_temps(), cfg.sa_moves, policy_seed);
                let d = controller::select_policy(&candidates, &post, &geom, &model, kind, cfg.mode, &sched)?;
                StepChoice {
                    selection: d.selection,
                    test_point: d.test_point,
                    bound_value: Some(d.bound_value),
                }
            }
            Policy::FixedUniform => StepChoice {
                selection: fixed.clone().expect("precomputed"),
                test_point: None,
                bound_value: None,
            },
            _ => StepChoice {
                selection: baseline_policy(policy, k, cfg, &mut substream(policy_seed, &[]))?,
                test_point: None,
                bound_value: None,
            },
        };

        let lik = LikelihoodModel::new(&geom, &choice.selection, &model, cfg.mode)?;
        let meas = synthesize_with(&lik, cfg.theta_true, &model, k, &mut substream(seed, &[tag::NOISE, k as u64]));
        priors.push(ps.clone());
        let updated = particle::update_with(&ps, &meas, &lik)?;
        let (post_mean, post_var) = particle::moments(&updated);
        ps = particle::maybe_resample(updated, cfg.resample_mode, &mut substream(seed, &[tag::RESAMPLE, k as u64]));

        records.push(TrajectoryRecord {
            step: k,
            policy,
            selection: choice.selection,
            test_point: choice.test_point,
            bound_value: choice.bound_value,
            post_mean,
            post_var,
            estimate: post_mean,
            sq_err: (post_mean - cfg.theta_true).powi(2),
        });
    }
    Ok(Trajectory { seed, records, priors })
}

/// Monte Carlo MSE of the conditional-mean estimator at step `k` of a
/// trajectory, over `cfg.n_real` re-drawn measurements (see [`MseMode`]).
pub fn mse_at_step(traj: &Trajectory, k: usize, cfg: &ExperimentConfig) -> Result<f64> {
    if k == 0 || k > traj.records.len() {
        return Err(Error::invalid(format!(
            "step {k} outside trajectory of {} steps",
            traj.records.len()
        )));
    }
    let geom = cfg.geometry()?;
    let model = cfg.signal_model()?;
    let first = match cfg.mse_mode {
        MseMode::Step => k,
        MseMode::Trajectory => 1,
    };
    let liks: Vec<LikelihoodModel> = traj.records[first - 1..k]
        .iter()
        .map(|r| LikelihoodModel::new(&geom, &r.selection, &model, cfg.mode))
        .collect::<Result<_>>()?;
    let start = &traj.priors[first - 1];

    let errors: Vec<f64> = (0..cfg.n_real)
        .into_par_iter()
        .map(|r| {
            let stream = derive_seed(traj.seed, &[tag::MSE, k as u64, r as u64]);
            let mut noise = substream(stream, &[tag::NOISE]);
            let mut resample = substream(stream, &[tag::RESAMPLE]);
            let mut ps = start.clone();
            for (step, lik) in (first..=k).zip(&liks) {
                let meas = synthesize_with(lik, cfg.theta_true, &model, step, &mut noise);
                ps = particle::update_with(&ps, &meas, lik)?;
                if step < k {
                    ps = particle::maybe_resample(ps, cfg.resample_mode, &mut resample);
                }
            }
            let (mean, _) = particle::moments(&ps);
            Ok((mean - cfg.theta_true).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// One row of an SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub policy: Policy,
    pub eval_step: usize,
    pub n_traj: usize,
    pub mse: f64,
}

/// Mean step-`eval_step` MSE over `cfg.n_traj` trajectories for every SNR in
/// `cfg.sweep_snr_db` and every configured policy.
pub fn snr_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs: Vec<(f64, Policy, usize)> = cfg
        .sweep_snr_db
        .iter()
        .flat_map(|&snr| {
            cfg.policies
                .iter()
                .flat_map(move |&p| (0..cfg.n_traj).map(move |t| (snr, p, t)))
        })
        .collect();
    let mses: Vec<f64> = jobs
        .par_iter()
        .map(|&(snr, policy, t)| {
            let c = cfg.with_snr(snr);
            let traj = run_closed_loop(&c, policy, trajectory_seed(cfg.seed, t))?;
            mse_at_step(&traj, cfg.eval_step, &c)
        })
        .collect::<Result<_>>()?;
    Ok(jobs
        .chunks(cfg.n_traj)
        .zip(mses.chunks(cfg.n_traj))
        .map(|(j, m)| SweepRow {
            snr_db: j[0].0,
            policy: j[0].1,
            eval_step: cfg.eval_step,
            n_traj: cfg.n_traj,
            mse: m.iter().sum::<f64>() / m.len() as f64,
        })
        .collect())
}
