//! Conditional Bayesian lower bounds on the DOA mean-square error.
//!
//! For the known-signal complex-Gaussian observation model the likelihood
//! factor of the moment generating function does not depend on θ, so
//!
//! ```text
//! η(α, β) = ξ(α, β) · ∫ p(θ+β)^α p(θ)^(1-α) dθ
//! ```
//!
//! with `ξ(α, β) = exp(α(α-1) · (s²/σ²) · Σ_i 2(1 - cos(k0 d_i β)))`.
//! Everything is evaluated in the log domain, since η over- and underflows
//! quickly for concentrated posteriors.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Denominators at or below this value mean the test-point is degenerate.
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// Grid bins with density at or below this value are outside the support.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Known-signal observation model of one measurement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    noise_var: f64,
    signal_energy: f64,
    snapshots: usize,
    signal_value: Complex64,
    f_d: f64,
}

impl SignalModel {
    /// `noise_var` is the total variance σ² of each complex noise entry.
    pub fn new(signal_value: Complex64, snapshots: usize, noise_var: f64, f_d: f64) -> Result<Self> {
        if snapshots == 0 {
            return Err(Error::invalid("snapshot count must be >= 1"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!("noise variance must be > 0, got {noise_var}")));
        }
        if signal_value.norm_sqr() == 0.0 {
            return Err(Error::invalid("signal value must be nonzero"));
        }
        Ok(Self {
            noise_var,
            signal_energy: snapshots as f64 * signal_value.norm_sqr(),
            snapshots,
            signal_value,
            f_d,
        })
    }

    /// Noise variance from a per-element, per-snapshot SNR `10·log10(|s|²/σ²)`.
    pub fn from_snr_db(snr_db: f64, snapshots: usize, signal_value: Complex64, f_d: f64) -> Result<Self> {
        let noise_var = signal_value.norm_sqr() * 10f64.powf(-snr_db / 10.0);
        Self::new(signal_value, snapshots, noise_var, f_d)
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// `s_k² = Σ_j |s_j|²` over the snapshots of one step.
    pub fn signal_energy(&self) -> f64 {
        self.signal_energy
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn signal_value(&self) -> Complex64 {
        self.signal_value
    }

    pub fn f_d(&self) -> f64 {
        self.f_d
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.signal_value, self.snapshots, noise_var, self.f_d)
    }
}

/// Free parameters `(s, h)` of the Weiss-Weinstein family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPoint {
    pub s: f64,
    pub h: f64,
}

/// Piecewise-constant density on contiguous bins.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    edges: Vec<f64>,
    density: Vec<f64>,
    centers: Vec<f64>,
}

impl GridDensity {
    /// Fails unless the edges increase, the density is nonnegative and it
    /// integrates to one within 1e-9.
    pub fn new(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if density.is_empty() || edges.len() != density.len() + 1 {
            return Err(Error::invalid("grid needs B >= 1 bins and B + 1 edges"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid edges must be strictly increasing"));
        }
        if density.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("grid density must be finite and nonnegative"));
        }
        let mass: f64 = density
            .iter()
            .zip(edges.windows(2))
            .map(|(p, w)| p * (w[1] - w[0]))
            .sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("grid density integrates to {mass}, expected 1")));
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { edges, density, centers })
    }

    /// Normalises `weights` over `bins` equal bins on `[lo, hi]`.
    pub fn from_weights(lo: f64, hi: f64, weights: &[f64]) -> Result<Self> {
        let bins = weights.len();
        if bins == 0 || !(hi > lo) {
            return Err(Error::invalid("grid needs bins >= 1 and lo < hi"));
        }
        let width = (hi - lo) / bins as f64;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("grid weights must have positive finite mass"));
        }
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let density = weights.iter().map(|w| w / (total * width)).collect();
        Self::new(edges, density)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Linear interpolation between bin centres, constant over the outer
    /// half-bins and zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = (self.edges[0], self.edges[self.edges.len() - 1]);
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let c = &self.centers;
        let last = c.len() - 1;
        if x <= c[0] {
            return self.density[0];
        }
        if x >= c[last] {
            return self.density[last];
        }
        // Bins may be uneven; locate the bracketing centres.
        let j = c.partition_point(|&ci| ci <= x).clamp(1, last);
        let t = (x - c[j - 1]) / (c[j] - c[j - 1]);
        self.density[j - 1] * (1.0 - t) + self.density[j] * t
    }

    fn ln_overlap(&self, alpha: f64, beta: f64) -> f64 {
        let mut acc = 0.0;
        for ((&p, &c), w) in self.density.iter().zip(&self.centers).zip(self.edges.windows(2)) {
            if p <= SUPPORT_EPS {
                continue;
            }
            let shifted = self.value_at(c + beta);
            if shifted <= 0.0 {
                continue;
            }
            acc += (alpha * shifted.ln() + (1.0 - alpha) * p.ln()).exp() * (w[1] - w[0]);
        }
        acc.ln()
    }
}

/// Belief over the electronic azimuth used when evaluating a bound.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorRepr {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, var: f64 },
    Grid(GridDensity),
}

impl PosteriorRepr {
    /// The uniform prior on `[-1, 1]`.
    pub fn prior() -> Self {
        PosteriorRepr::Uniform { lo: -1.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PosteriorRepr::Uniform { lo, hi } if !(hi > lo) => {
                Err(Error::invalid(format!("uniform posterior needs lo < hi, got [{lo}, {hi}]")))
            }
            PosteriorRepr::Gaussian { var, .. } if !(var > 0.0) => {
                Err(Error::invalid(format!("gaussian posterior needs var > 0, got {var}")))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            PosteriorRepr::Uniform { lo, hi } => 0.5 * (lo + hi),
            PosteriorRepr::Gaussian { mean, .. } => *mean,
            PosteriorRepr::Grid(g) => g
                .density
                .iter()
                .zip(&g.centers)
                .zip(g.edges.windows(2))
                .map(|((p, c), w)| p * c * (w[1] - w[0]))
                .sum(),
        }
    }

    /// `ln ∫ p(θ+β)^α p(θ)^(1-α) dθ` over the support of p.
    pub fn ln_overlap(&self, alpha: f64, beta: f64) -> Result<f64> {
        self.validate()?;
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            PosteriorRepr::Uniform { lo, hi } => {
                let len = hi - lo;
                let left = len - beta.abs();
                if left > 0.0 {
                    (left / len).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PosteriorRepr::Gaussian { var, .. } => alpha * (alpha - 1.0) * beta * beta / (2.0 * var),
            PosteriorRepr::Grid(g) => g.ln_overlap(alpha, beta),
        })
    }
}

/// Posterior overlap factor `∫ p(θ+β)^α p(θ)^(1-α) dθ`.
pub fn overlap_integral(post: &PosteriorRepr, alpha: f64, beta: f64) -> Result<f64> {
    post.ln_overlap(alpha, beta).map(f64::exp)
}

/// Half the ambiguity function, `Σ_i (1 - cos(k0 d_i β)) = Σ_i 2 sin²(k0 d_i β / 2)`.
fn half_ambiguity(k0d: &[f64], beta: f64) -> f64 {
    k0d.iter()
        .map(|&x| {
            let s = (0.5 * x * beta).sin();
            2.0 * s * s
        })
        .sum()
}

/// Anything that can supply `ln η(α, β)`.
pub trait EtaSource {
    fn ln_eta(&self, alpha: f64, beta: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> EtaSource for F {
    fn ln_eta(&self, alpha: f64, beta: f64) -> f64 {
        self(alpha, beta)
    }
}

/// Precomputed state for evaluating bounds of one candidate selection on
/// one posterior.
#[derive(Debug, Clone)]
pub struct BoundContext<'a> {
    k0d: Vec<f64>,
    snr_factor: f64,
    posterior: &'a PosteriorRepr,
}

impl<'a> BoundContext<'a> {
    pub fn new(
        effective_positions: &[f64],
        model: &SignalModel,
        wavelength: f64,
        posterior: &'a PosteriorRepr,
    ) -> Result<Self> {
        if effective_positions.is_empty() {
            return Err(Error::invalid("effective position list is empty"));
        }
        if !(wavelength > 0.0) {
            return Err(Error::invalid("wavelength must be > 0"));
        }
        posterior.validate()?;
        let k0 = 2.0 * std::f64::consts::PI / wavelength;
        Ok(Self {
            k0d: effective_positions.iter().map(|d| k0 * d).collect(),
            snr_factor: model.signal_energy() / model.noise_var(),
            posterior,
        })
    }

    pub fn ln_xi(&self, alpha: f64, beta: f64) -> f64 {
        alpha * (alpha - 1.0) * self.snr_factor * 2.0 * half_ambiguity(&self.k0d, beta)
    }

    /// Sum of squared `k0·d`, the aperture term of the Fisher information.
    pub fn aperture_metric(&self) -> f64 {
        self.k0d.iter().map(|x| x * x).sum()
    }
}

impl EtaSource for BoundContext<'_> {
    fn ln_eta(&self, alpha: f64, beta: f64) -> f64 {
        // validated in the constructor
        let overlap = self.posterior.ln_overlap(alpha, beta).unwrap_or(f64::NAN);
        self.ln_xi(alpha, beta) + overlap
    }
}

/// Likelihood factor ξ(α, β) of η; independent of θ and of the Doppler shift.
pub fn xi(effective_positions: &[f64], model: &SignalModel, alpha: f64, beta: f64, wavelength: f64) -> Result<f64> {
    let prior = PosteriorRepr::prior();
    let ctx = BoundContext::new(effective_positions, model, wavelength, &prior)?;
    Ok(ctx.ln_xi(alpha, beta).exp())
}

/// Conditional moment generating function `η = ξ · overlap`.
pub fn eta(
    post: &PosteriorRepr,
    effective_positions: &[f64],
    model: &SignalModel,
    alpha: f64,
    beta: f64,
    wavelength: f64,
) -> Result<f64> {
    let ctx = BoundContext::new(effective_positions, model, wavelength, post)?;
    Ok(ctx.ln_eta(alpha, beta).exp())
}

/// `WWB(s,h) = h² η(s,h)² / (η(2s,h) + η(2-2s,-h) - 2η(s,2h))` from log-η
/// values, with the denominator assembled relative to its largest term.
fn wwb_from_ln(h: f64, ln_s_h: f64, ln_2s_h: f64, ln_22s_mh: f64, ln_s_2h: f64) -> Result<f64> {
    let neg = LN_2 + ln_s_2h;
    let m = ln_2s_h.max(ln_22s_mh).max(neg);
    if !m.is_finite() {
        return Err(Error::NoValidBound);
    }
    let scaled = (ln_2s_h - m).exp() + (ln_22s_mh - m).exp() - (neg - m).exp();
    if !(scaled > 0.0) {
        return Err(Error::NoValidBound);
    }
    let ln_den = m + scaled.ln();
    if ln_den <= DENOMINATOR_EPS.ln() {
        return Err(Error::NoValidBound);
    }
    let ln_num = 2.0 * h.ln() + 2.0 * ln_s_h;
    if ln_num.is_nan() {
        return Err(Error::NoValidBound);
    }
    Ok((ln_num - ln_den).exp())
}

/// Weiss-Weinstein bound at `(s, h)` for any η supplier.
pub fn wwb_with(src: &impl EtaSource, s: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("test-point h must be > 0, got {h}")));
    }
    wwb_from_ln(
        h,
        src.ln_eta(s, h),
        src.ln_eta(2.0 * s, h),
        src.ln_eta(2.0 - 2.0 * s, -h),
        src.ln_eta(s, 2.0 * h),
    )
}

/// Bobrovsky-Zakaï bound `h² / (η(2,h) - 1)` for any η supplier.
pub fn bzb_with(src: &impl EtaSource, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("test-point h must be > 0, got {h}")));
    }
    let den = src.ln_eta(2.0, h).exp_m1();
    if !(den > DENOMINATOR_EPS) {
        return Err(Error::NoValidBound);
    }
    Ok(h * h / den)
}

/// WWB from four explicit η values: `η(s,h)`, `η(2s,h)`, `η(2-2s,-h)`, `η(s,2h)`.
pub fn wwb_from_eta(h: f64, eta_s_h: f64, eta_2s_h: f64, eta_22s_mh: f64, eta_s_2h: f64) -> Result<f64> {
    wwb_from_ln(h, eta_s_h.ln(), eta_2s_h.ln(), eta_22s_mh.ln(), eta_s_2h.ln())
}

/// BZB from an explicit `η(2,h)`.
pub fn bzb_from_eta(h: f64, eta_2_h: f64) -> Result<f64> {
    bzb_with(&|_: f64, _: f64| eta_2_h.ln(), h)
}

pub fn wwb_value(
    tp: TestPoint,
    post: &PosteriorRepr,
    effective_positions: &[f64],
    model: &SignalModel,
    wavelength: f64,
) -> Result<f64> {
    let ctx = BoundContext::new(effective_positions, model, wavelength, post)?;
    wwb_with(&ctx, tp.s, tp.h)
}

pub fn bzb_value(
    h: f64,
    post: &PosteriorRepr,
    effective_positions: &[f64],
    model: &SignalModel,
    wavelength: f64,
) -> Result<f64> {
    let ctx = BoundContext::new(effective_positions, model, wavelength, post)?;
    bzb_with(&ctx, h)
}

/// Expected Cramér-Rao bound `E[1/J(θ)]`.
///
/// For this model the Fisher information `J = (2 s²/σ²) k0² Σ d_i²` does
/// not depend on θ, so the posterior drops out.
pub fn ecrb_value(
    post: &PosteriorRepr,
    effective_positions: &[f64],
    model: &SignalModel,
    wavelength: f64,
) -> Result<f64> {
    let ctx = BoundContext::new(effective_positions, model, wavelength, post)?;
    ecrb_from_context(&ctx)
}

pub(crate) fn ecrb_from_context(ctx: &BoundContext<'_>) -> Result<f64> {
    let aperture = ctx.aperture_metric();
    if !(aperture > 0.0) {
        return Err(Error::NoValidBound);
    }
    Ok(1.0 / (2.0 * ctx.snr_factor * aperture))
}
