//! Global maximisation of a bound surface over a box of test-points.
//!
//! Objectives return `None` where the bound is undefined; such points count
//! as `-inf` and are never reported.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Geometric cooling schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub n_temps: usize,
    pub moves_per_temp: usize,
    pub t_initial: f64,
    pub t_final: f64,
    pub rng_seed: u64,
}

impl AnnealSchedule {
    pub fn new(n_temps: usize, moves_per_temp: usize, rng_seed: u64) -> Self {
        Self {
            n_temps,
            moves_per_temp,
            t_initial: 1.0,
            t_final: 1e-3,
            rng_seed,
        }
    }

    /// 100 temperatures below 0 dB, 50 otherwise.
    pub fn for_snr(snr_db: f64, rng_seed: u64) -> Self {
        Self::new(if snr_db < 0.0 { 100 } else { 50 }, 20, rng_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_temps == 0 || self.moves_per_temp == 0 {
            return Err(Error::invalid("annealing needs at least one temperature and one move"));
        }
        if !(self.t_final > 0.0 && self.t_final < self.t_initial) {
            return Err(Error::invalid("annealing needs 0 < t_final < t_initial"));
        }
        Ok(())
    }
}

/// Best point found and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub point: Vec<f64>,
    pub value: f64,
}

fn check_box(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::invalid("search box has no dimensions"));
    }
    if let Some((i, _)) = bounds.iter().enumerate().find(|(_, (lo, hi))| !(hi > lo)) {
        return Err(Error::invalid(format!("search box dimension {i} is degenerate")));
    }
    Ok(())
}

/// Project `x` onto `[lo, hi]`. Overshooting moves land exactly on the wall,
/// so maxima sitting on the boundary are reachable.
fn project(x: f64, lo: f64, hi: f64) -> f64 {
    x.clamp(lo, hi)
}

/// Simulated annealing maximiser.
///
/// Temperatures `T_i = t_initial·r^i`, `i = 1..=n_temps`, with
/// `r = (t_final/t_initial)^(1/n_temps)`. Each move is a Gaussian step of
/// scale `0.1·(hi - lo)` per dimension, projected onto the box, accepted
/// with probability `min(1, exp(Δ/T))`. The best visited point is returned.
pub fn anneal_max<F, R>(objective: F, bounds: &[(f64, f64)], sched: &AnnealSchedule, rng: &mut R) -> Result<Maximum>
where
    F: Fn(&[f64]) -> Option<f64>,
    R: Rng + ?Sized,
{
    check_box(bounds)?;
    sched.validate()?;
    let eval = |x: &[f64]| objective(x).filter(|v| !v.is_nan()).unwrap_or(f64::NEG_INFINITY);

    let mut current: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
    let mut current_val = eval(&current);
    let mut best = current.clone();
    let mut best_val = current_val;

    let ratio = (sched.t_final / sched.t_initial).powf(1.0 / sched.n_temps as f64);
    let mut temp = sched.t_initial;
    let mut proposal = vec![0.0; bounds.len()];
    for _ in 0..sched.n_temps {
        temp *= ratio;
        for _ in 0..sched.moves_per_temp {
            for ((p, &c), &(lo, hi)) in proposal.iter_mut().zip(&current).zip(bounds) {
                let step: f64 = rng.sample(StandardNormal);
                *p = project(c + 0.1 * (hi - lo) * step, lo, hi);
            }
            let val = eval(&proposal);
            let delta = val - current_val;
            // Always consume one uniform so the stream does not depend on outcomes.
            let u: f64 = rng.random();
            let accept = if val == f64::NEG_INFINITY {
                false
            } else {
                delta >= 0.0 || current_val == f64::NEG_INFINITY || u < (delta / temp).exp()
            };
            if accept {
                current.copy_from_slice(&proposal);
                current_val = val;
                if current_val > best_val {
                    best.copy_from_slice(&current);
                    best_val = current_val;
                }
            }
        }
    }

    if best_val == f64::NEG_INFINITY {
        return Err(Error::NoValidBound);
    }
    Ok(Maximum {
        point: best,
        value: best_val,
    })
}

/// Exhaustive search on a uniform grid that includes the box corners.
/// Ties keep the first point in row-major order.
pub fn grid_max<F>(objective: F, bounds: &[(f64, f64)], points_per_dim: usize) -> Result<Maximum>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    check_box(bounds)?;
    if points_per_dim < 2 {
        return Err(Error::invalid("grid search needs at least 2 points per dimension"));
    }
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            (0..points_per_dim)
                .map(|i| {
                    if i + 1 == points_per_dim {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (points_per_dim - 1) as f64
                    }
                })
                .collect()
        })
        .collect();

    let dims = bounds.len();
    let mut idx = vec![0usize; dims];
    let mut point = vec![0.0; dims];
    let mut best: Option<Maximum> = None;
    loop {
        for d in 0..dims {
            point[d] = axes[d][idx[d]];
        }
        if let Some(v) = objective(&point).filter(|v| !v.is_nan()) {
            if best.as_ref().is_none_or(|b| v > b.value) {
                best = Some(Maximum {
                    point: point.clone(),
                    value: v,
                });
            }
        }
        // odometer increment, last dimension fastest
        let mut d = dims;
        loop {
            if d == 0 {
                return best.ok_or(Error::NoValidBound);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < points_per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
}
