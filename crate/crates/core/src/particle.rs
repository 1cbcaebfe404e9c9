//! Sequential Bayesian belief over the electronic azimuth.
//!
//! Particles live on `[-1, 1]` and never move: the measurement update only
//! reweights them, and residual resampling redistributes copies. There is
//! no roughening step; concentration is handled downstream by the variance
//! floor of the Gaussian fit.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::array::{self, ArrayGeometry, ArrayMode, ChannelSelection};
use crate::bounds::{GridDensity, PosteriorRepr, SignalModel};
use crate::error::{Error, Result};

/// Variance floor applied when fitting a Gaussian to the particles.
pub const VAR_FLOOR: f64 = 1e-8;

/// Weighted particles over θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleSet {
    /// Weights are normalised; fails on length mismatch or zero mass.
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != weights.len() {
            return Err(Error::invalid("particle positions and weights must be nonempty and equal length"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("particle weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior { step: None });
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { positions, weights })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// J snapshot vectors over the active channels of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub snapshots: Vec<Vec<Complex64>>,
    pub step_index: usize,
}

/// When to resample after a measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Always,
    /// Only when the effective sample size drops below half the particles.
    Ess,
}

/// Which parametric or gridded density to hand to the bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorKind {
    Gauss,
    Grid,
}

impl PosteriorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PosteriorKind::Gauss => "gauss",
            PosteriorKind::Grid => "grid",
        }
    }
}

/// `P` particles i.i.d. uniform on `[lo, hi]` with equal weights.
pub fn init_uniform<R: Rng + ?Sized>(p: usize, lo: f64, hi: f64, rng: &mut R) -> Result<ParticleSet> {
    if p == 0 {
        return Err(Error::invalid("particle count must be >= 1"));
    }
    if !(hi > lo) {
        return Err(Error::invalid(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let positions = (0..p).map(|_| rng.random_range(lo..=hi)).collect();
    Ok(ParticleSet {
        positions,
        weights: vec![1.0 / p as f64; p],
    })
}

/// Likelihood of one selection, with the steering geometry precomputed.
///
/// Produces the same steering entries as [`array::steering_vector`] so the
/// filter and the measurement synthesis share one observation model.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    k0d: Vec<f64>,
    doppler_phase: Vec<f64>,
    signal: Complex64,
    noise_var: f64,
}

impl LikelihoodModel {
    pub fn new(geom: &ArrayGeometry, sel: &ChannelSelection, model: &SignalModel, mode: ArrayMode) -> Result<Self> {
        let k0 = geom.wavenumber();
        let positions = array::effective_positions(geom, sel, mode)?;
        let doppler_phase = match mode {
            ArrayMode::Simo => vec![0.0; positions.len()],
            ArrayMode::Mimo => array::tdm_phases(sel, geom.inter_pulse())
                .into_iter()
                .map(|g| g * model.f_d())
                .collect(),
        };
        Ok(Self {
            k0d: positions.iter().map(|d| k0 * d).collect(),
            doppler_phase,
            signal: model.signal_value(),
            noise_var: model.noise_var(),
        })
    }

    pub fn channels(&self) -> usize {
        self.k0d.len()
    }

    pub fn steering(&self, theta: f64) -> impl Iterator<Item = Complex64> + '_ {
        self.k0d
            .iter()
            .zip(&self.doppler_phase)
            .map(move |(&x, &g)| Complex64::cis(x * theta + g))
    }

    fn check(&self, meas: &Measurement) -> Result<()> {
        if let Some(bad) = meas.snapshots.iter().find(|x| x.len() != self.channels()) {
            return Err(Error::invalid(format!(
                "snapshot has {} entries, selection has {} channels",
                bad.len(),
                self.channels()
            )));
        }
        Ok(())
    }

    /// `-(1/σ²) Σ_j ||x_j - m(θ) s||²`, constants dropped.
    pub fn log_likelihood(&self, meas: &Measurement, theta: f64) -> Result<f64> {
        self.check(meas)?;
        Ok(self.log_likelihood_unchecked(meas, theta))
    }

    fn log_likelihood_unchecked(&self, meas: &Measurement, theta: f64) -> f64 {
        let m: Vec<Complex64> = self.steering(theta).map(|a| a * self.signal).collect();
        let resid: f64 = meas
            .snapshots
            .iter()
            .map(|x| x.iter().zip(&m).map(|(xi, mi)| (xi - mi).norm_sqr()).sum::<f64>())
            .sum();
        -resid / self.noise_var
    }
}

pub fn log_likelihood(
    meas: &Measurement,
    theta: f64,
    sel: &ChannelSelection,
    geom: &ArrayGeometry,
    model: &SignalModel,
    mode: ArrayMode,
) -> Result<f64> {
    LikelihoodModel::new(geom, sel, model, mode)?.log_likelihood(meas, theta)
}

/// Multiply weights by the likelihoods given in log form and renormalise
/// with a max-log shift.
pub fn reweight(ps: &ParticleSet, log_lik: &[f64]) -> Result<ParticleSet> {
    if log_lik.len() != ps.len() {
        return Err(Error::invalid("one log-likelihood per particle required"));
    }
    let logw: Vec<f64> = ps.weights.iter().zip(log_lik).map(|(w, l)| w.ln() + l).collect();
    let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::DegeneratePosterior { step: None });
    }
    let raw: Vec<f64> = logw.iter().map(|l| (l - shift).exp()).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePosterior { step: None });
    }
    Ok(ParticleSet {
        positions: ps.positions.clone(),
        weights: raw.into_iter().map(|w| w / total).collect(),
    })
}

/// Bayes update of the weights for one measurement; positions unchanged.
pub fn update(
    ps: &ParticleSet,
    meas: &Measurement,
    sel: &ChannelSelection,
    geom: &ArrayGeometry,
    model: &SignalModel,
    mode: ArrayMode,
) -> Result<ParticleSet> {
    let lik = LikelihoodModel::new(geom, sel, model, mode)?;
    update_with(ps, meas, &lik)
}

pub fn update_with(ps: &ParticleSet, meas: &Measurement, lik: &LikelihoodModel) -> Result<ParticleSet> {
    lik.check(meas)?;
    let ll: Vec<f64> = ps
        .positions
        .iter()
        .map(|&t| lik.log_likelihood_unchecked(meas, t))
        .collect();
    reweight(ps, &ll).map_err(|e| match e {
        Error::DegeneratePosterior { .. } => Error::DegeneratePosterior { step: Some(meas.step_index) },
        other => other,
    })
}

/// Copy counts of residual resampling: `floor(P·w)` deterministic copies
/// plus `R = P - Σ floor(P·w)` multinomial draws from the residual weights.
pub fn residual_counts<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let p = weights.len();
    let scaled: Vec<f64> = weights.iter().map(|w| p as f64 * w).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let remaining = p.saturating_sub(assigned);
    if remaining > 0 {
        let residual: Vec<f64> = scaled.iter().zip(&counts).map(|(x, &c)| (x - c as f64).max(0.0)).collect();
        match WeightedIndex::new(&residual) {
            Ok(dist) => {
                for _ in 0..remaining {
                    counts[dist.sample(rng)] += 1;
                }
            }
            // Residuals lost to rounding: fall back to the weights themselves.
            Err(_) => {
                let dist = WeightedIndex::new(weights).expect("normalised weights");
                for _ in 0..remaining {
                    counts[dist.sample(rng)] += 1;
                }
            }
        }
    }
    counts
}

/// Residual resampling; output weights are all `1/P`.
pub fn residual_resample<R: Rng + ?Sized>(ps: &ParticleSet, rng: &mut R) -> ParticleSet {
    let p = ps.len();
    let counts = residual_counts(&ps.weights, rng);
    let positions = ps
        .positions
        .iter()
        .zip(&counts)
        .flat_map(|(&x, &c)| std::iter::repeat_n(x, c))
        .collect();
    ParticleSet {
        positions,
        weights: vec![1.0 / p as f64; p],
    }
}

/// Resample according to `mode`; returns the input unchanged when the ESS
/// criterion does not trigger.
pub fn maybe_resample<R: Rng + ?Sized>(ps: ParticleSet, mode: ResampleMode, rng: &mut R) -> ParticleSet {
    match mode {
        ResampleMode::Always => residual_resample(&ps, rng),
        ResampleMode::Ess if ps.ess() < 0.5 * ps.len() as f64 => residual_resample(&ps, rng),
        ResampleMode::Ess => ps,
    }
}

/// Weighted mean and biased weighted variance.
pub fn moments(ps: &ParticleSet) -> (f64, f64) {
    let mean: f64 = ps.positions.iter().zip(&ps.weights).map(|(x, w)| w * x).sum();
    let var: f64 = ps
        .positions
        .iter()
        .zip(&ps.weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum();
    (mean, var.max(0.0))
}

/// Gaussian fit or kernel-smoothed histogram of the particles on `[-1, 1]`.
///
/// The histogram is smoothed with a sampled Gaussian kernel of Silverman
/// bandwidth `1.06·σ̂·P^(-1/5)`, normalised per output bin over the kernel
/// taps that fall inside the grid, so a flat histogram stays flat up to the
/// edges.
pub fn to_posterior_repr(ps: &ParticleSet, kind: PosteriorKind, bins: usize) -> Result<PosteriorRepr> {
    let (mean, var) = moments(ps);
    match kind {
        PosteriorKind::Gauss => Ok(PosteriorRepr::Gaussian {
            mean,
            var: var.max(VAR_FLOOR),
        }),
        PosteriorKind::Grid => {
            if bins < 2 {
                return Err(Error::invalid("grid posterior needs at least 2 bins"));
            }
            let (lo, hi) = (-1.0, 1.0);
            let width = (hi - lo) / bins as f64;
            let mut hist = vec![0.0; bins];
            for (&x, &w) in ps.positions.iter().zip(&ps.weights) {
                let b = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
                hist[b] += w;
            }
            let bandwidth = 1.06 * var.sqrt() * (ps.len() as f64).powf(-0.2);
            let smoothed = smooth(&hist, bandwidth / width);
            Ok(PosteriorRepr::Grid(GridDensity::from_weights(lo, hi, &smoothed)?))
        }
    }
}

fn smooth(hist: &[f64], sigma_bins: f64) -> Vec<f64> {
    let reach = (4.0 * sigma_bins).ceil() as usize;
    if reach == 0 {
        return hist.to_vec();
    }
    let kernel: Vec<f64> = (0..=reach)
        .map(|j| (-(j as f64).powi(2) / (2.0 * sigma_bins * sigma_bins)).exp())
        .collect();
    let n = hist.len() as isize;
    (0..n)
        .map(|b| {
            let (mut acc, mut norm) = (0.0, 0.0);
            let from = (b - reach as isize).max(0);
            let to = (b + reach as isize).min(n - 1);
            for k in from..=to {
                let kv = kernel[(b - k).unsigned_abs()];
                acc += kv * hist[k as usize];
                norm += kv;
            }
            acc / norm
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::uniform_geometry;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn set(positions: &[f64], weights: &[f64]) -> ParticleSet {
        ParticleSet::new(positions.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn init_examples() {
        let mut rng = substream(3, &[1]);
        let ps = init_uniform(500, -1.0, 1.0, &mut rng).unwrap();
        assert_eq!(ps.len(), 500);
        assert!(ps.weights().iter().all(|&w| w == 1.0 / 500.0));
        assert!(ps.positions().iter().all(|x| x.abs() <= 1.0));

        let one = init_uniform(1, -1.0, 1.0, &mut rng).unwrap();
        assert_eq!(one.weights(), &[1.0]);

        let a = init_uniform(50, -1.0, 1.0, &mut substream(9, &[2])).unwrap();
        let b = init_uniform(50, -1.0, 1.0, &mut substream(9, &[2])).unwrap();
        assert_eq!(a, b);

        assert!(init_uniform(0, -1.0, 1.0, &mut rng).is_err());
        assert!(init_uniform(5, 1.0, 1.0, &mut rng).is_err());
    }

    fn simo_setup() -> (ArrayGeometry, ChannelSelection, SignalModel) {
        let g = uniform_geometry(4, 1, 0.9, 1.0, 0.0).unwrap();
        let sel = ChannelSelection::simo(vec![1, 2, 4]).unwrap();
        let m = SignalModel::new(Complex64::new(1.0, 0.0), 2, 0.5, 0.0).unwrap();
        (g, sel, m)
    }

    #[test]
    fn log_likelihood_examples() {
        let (g, sel, m) = simo_setup();
        let theta = 0.3;
        let a = array::steering_vector(&g, &sel, theta, 0.0, ArrayMode::Simo).unwrap();
        let meas = Measurement {
            snapshots: vec![a.clone(), a],
            step_index: 1,
        };
        assert_eq!(log_likelihood(&meas, theta, &sel, &g, &m, ArrayMode::Simo).unwrap(), 0.0);
        assert!(log_likelihood(&meas, -0.2, &sel, &g, &m, ArrayMode::Simo).unwrap() < 0.0);

        let g1 = uniform_geometry(1, 1, 0.9, 1.0, 0.0).unwrap();
        let s1 = ChannelSelection::simo(vec![1]).unwrap();
        let m1 = SignalModel::new(Complex64::new(1.0, 0.0), 1, 1.0, 0.0).unwrap();
        let zero = Measurement {
            snapshots: vec![vec![Complex64::new(0.0, 0.0)]],
            step_index: 1,
        };
        assert_eq!(log_likelihood(&zero, 0.1, &s1, &g1, &m1, ArrayMode::Simo).unwrap(), -1.0);

        let short = Measurement {
            snapshots: vec![vec![Complex64::new(0.0, 0.0); 2]],
            step_index: 1,
        };
        assert!(matches!(
            log_likelihood(&short, 0.1, &sel, &g, &m, ArrayMode::Simo),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn likelihood_steering_matches_array_module() {
        let g = uniform_geometry(5, 3, 0.9, 1.0, 2e-4).unwrap();
        let sel = ChannelSelection::new(vec![1, 3], vec![1, 2, 5]).unwrap();
        let m = SignalModel::new(Complex64::new(0.6, 0.8), 2, 0.5, 150.0).unwrap();
        let lik = LikelihoodModel::new(&g, &sel, &m, ArrayMode::Mimo).unwrap();
        for theta in [-0.77, 0.0, 0.3, 0.99] {
            let a = array::steering_vector(&g, &sel, theta, 150.0, ArrayMode::Mimo).unwrap();
            let b: Vec<_> = lik.steering(theta).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn update_is_softmax_of_log_likelihoods() {
        let ps = set(&[-0.5, 0.5], &[0.5, 0.5]);
        let out = reweight(&ps, &[1.0, 0.0]).unwrap();
        let e = std::f64::consts::E;
        assert!((out.weights()[0] - e / (1.0 + e)).abs() < 1e-15);
        assert!((out.weights()[1] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert_eq!(out.positions(), ps.positions());
    }

    #[test]
    fn uninformative_measurement_keeps_weights() {
        let ps = set(&[-0.5, 0.1, 0.5], &[0.2, 0.3, 0.5]);
        let out = reweight(&ps, &[-7.0, -7.0, -7.0]).unwrap();
        for (a, b) in out.weights().iter().zip(ps.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_weights_is_degenerate() {
        let ps = set(&[-0.5, 0.5], &[0.5, 0.5]);
        let err = reweight(&ps, &[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap_err();
        assert!(matches!(err, Error::DegeneratePosterior { .. }));
    }

    #[test]
    fn residual_examples() {
        let mut rng = substream(1, &[]);
        assert_eq!(residual_counts(&[0.5, 0.25, 0.25, 0.0], &mut rng), vec![2, 1, 1, 0]);
        assert_eq!(residual_counts(&[0.25; 4], &mut rng), vec![1; 4]);
        let out = residual_resample(&set(&[0.1, 0.2, 0.3, 0.4], &[0.25; 4]), &mut rng);
        assert_eq!(out.positions(), &[0.1, 0.2, 0.3, 0.4]);

        for seed in 0..50 {
            let c = residual_counts(&[0.6, 0.4, 0.0, 0.0], &mut substream(seed, &[]));
            assert_eq!(c.iter().sum::<usize>(), 4);
            assert!(c[0] >= 2 && c[1] >= 1 && c[2] == 0 && c[3] == 0);
        }
    }

    #[test]
    fn ess_mode_skips_when_weights_even() {
        let ps = set(&[0.1, 0.2, 0.3, 0.4], &[0.3, 0.2, 0.25, 0.25]);
        let kept = maybe_resample(ps.clone(), ResampleMode::Ess, &mut substream(0, &[]));
        assert_eq!(kept, ps);
        let skewed = set(&[0.1, 0.2, 0.3, 0.4], &[0.97, 0.01, 0.01, 0.01]);
        let out = maybe_resample(skewed, ResampleMode::Ess, &mut substream(0, &[]));
        assert!(out.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn moments_examples() {
        assert_eq!(moments(&set(&[-1.0, 1.0], &[0.5, 0.5])), (0.0, 1.0));
        assert_eq!(moments(&set(&[0.3], &[1.0])), (0.3, 0.0));
    }

    #[test]
    fn gauss_fit_floors_variance() {
        let ps = set(&[0.0; 10], &[0.1; 10]);
        assert_eq!(
            to_posterior_repr(&ps, PosteriorKind::Gauss, 0).unwrap(),
            PosteriorRepr::Gaussian { mean: 0.0, var: 1e-8 }
        );
    }

    #[test]
    fn grid_of_uniform_particles_is_flat() {
        let mut rng = substream(17, &[]);
        let ps = init_uniform(100_000, -1.0, 1.0, &mut rng).unwrap();
        let PosteriorRepr::Grid(g) = to_posterior_repr(&ps, PosteriorKind::Grid, 1024).unwrap() else {
            panic!("expected grid");
        };
        let worst = g.density().iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05, "max deviation {worst}");
    }

    #[test]
    fn grid_requires_two_bins() {
        let ps = set(&[0.0], &[1.0]);
        assert!(to_posterior_repr(&ps, PosteriorKind::Grid, 1).is_err());
        assert!(to_posterior_repr(&ps, PosteriorKind::Grid, 2).is_ok());
    }

    fn arb_set() -> impl Strategy<Value = ParticleSet> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1.0f64..=1.0, n),
                proptest::collection::vec(0.0f64..1.0, n),
            )
                .prop_filter_map("positive mass", |(x, w)| ParticleSet::new(x, w).ok())
        })
    }

    proptest! {
        #[test]
        fn weights_stay_normalised(ps in arb_set(), seed in any::<u64>(), shift in -50.0f64..50.0) {
            let ll: Vec<f64> = ps.positions().iter().map(|x| -10.0 * (x - 0.3).powi(2)).collect();
            let out = reweight(&ps, &ll).unwrap();
            prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.weights().iter().all(|&w| w >= 0.0));

            let shifted: Vec<f64> = ll.iter().map(|l| l + shift).collect();
            let out2 = reweight(&ps, &shifted).unwrap();
            for (a, b) in out.weights().iter().zip(out2.weights()) {
                prop_assert!((a - b).abs() < 1e-12);
            }

            let mut rng = substream(seed, &[]);
            let r = residual_resample(&out, &mut rng);
            prop_assert_eq!(r.len(), ps.len());
            let p = ps.len() as f64;
            prop_assert!(r.weights().iter().all(|&w| w == 1.0 / p));
        }

        #[test]
        fn deterministic_counts_are_floors(ps in arb_set(), seed in any::<u64>()) {
            let counts = residual_counts(ps.weights(), &mut substream(seed, &[]));
            let p = ps.len() as f64;
            prop_assert_eq!(counts.iter().sum::<usize>(), ps.len());
            for (&c, &w) in counts.iter().zip(ps.weights()) {
                prop_assert!(c >= (p * w).floor() as usize);
                prop_assert!(c <= (p * w).floor() as usize + ps.len());
            }
        }

        #[test]
        fn moments_match_direct_sums(ps in arb_set()) {
            let (mean, var) = moments(&ps);
            let mut m = 0.0;
            for (x, w) in ps.positions().iter().zip(ps.weights()) { m += w * x; }
            let mut v = 0.0;
            for (x, w) in ps.positions().iter().zip(ps.weights()) { v += w * (x - m) * (x - m); }
            prop_assert!((mean - m).abs() < 1e-12);
            prop_assert!((var - v).abs() < 1e-12);
        }

        #[test]
        fn grid_always_normalised(ps in arb_set(), bins in 2usize..300) {
            let PosteriorRepr::Grid(g) = to_posterior_repr(&ps, PosteriorKind::Grid, bins).unwrap() else {
                unreachable!()
            };
            let mass: f64 = g.density().iter().zip(g.edges().windows(2)).map(|(p, w)| p * (w[1] - w[0])).sum();
            prop_assert!((mass - 1.0).abs() < 1e-9);
        }
    }
}
