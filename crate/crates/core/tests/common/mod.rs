//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use adaptive_doa::array::{self, ArrayGeometry, ArrayMode, ChannelSelection};
use adaptive_doa::rng::SimRng;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 20)
}

/// Noise-free observation `s e^{i k0 d θ}` per channel.
fn mean_vector(k0d: &[f64], signal: f64, theta: f64) -> Vec<Complex64> {
    k0d.iter().map(|&x| Complex64::cis(x * theta) * signal).collect()
}

fn ln_cn(x: Complex64, mean: Complex64, var: f64) -> f64 {
    -(x - mean).norm_sqr() / var - (PI * var).ln()
}

fn cn_draw(rng: &mut SimRng, mean: Complex64, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    mean + Complex64::new(re, im) * s
}

/// Monte Carlo estimate of `E_{x|θ}[(p(x|θ+β) / p(x|θ))^α]` for a known
/// signal of constant value `signal` over `snapshots` snapshots.
///
/// Samples come from a circular Gaussian centred at the tilted mean
/// `α μ(θ+β) + (1-α) μ(θ)` with variance `1.5 σ²`, weighted by
/// `p1^α p0^(1-α) / q` with all densities normalised.
pub fn xi_monte_carlo(
    positions: &[f64],
    wavelength: f64,
    signal: f64,
    snapshots: usize,
    noise_var: f64,
    alpha: f64,
    beta: f64,
    theta: f64,
    samples: usize,
    rng: &mut SimRng,
) -> f64 {
    let k0d: Vec<f64> = positions.iter().map(|d| 2.0 * PI / wavelength * d).collect();
    let mu0 = mean_vector(&k0d, signal, theta);
    let mu1 = mean_vector(&k0d, signal, theta + beta);
    let tilted: Vec<Complex64> = mu0.iter().zip(&mu1).map(|(a, b)| b * alpha + a * (1.0 - alpha)).collect();
    let q_var = 1.5 * noise_var;
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut lw = 0.0;
        for _ in 0..snapshots {
            for ((m0, m1), mt) in mu0.iter().zip(&mu1).zip(&tilted) {
                let x = cn_draw(rng, *mt, q_var);
                lw += alpha * ln_cn(x, *m1, noise_var) + (1.0 - alpha) * ln_cn(x, *m0, noise_var) - ln_cn(x, *mt, q_var);
            }
        }
        acc += lw.exp();
    }
    acc / samples as f64
}

/// Fisher information in θ estimated by the empirical variance of a
/// central finite-difference score over `draws` noisy observations.
pub fn empirical_fisher(
    positions: &[f64],
    wavelength: f64,
    signal: f64,
    snapshots: usize,
    noise_var: f64,
    theta: f64,
    draws: usize,
    rng: &mut SimRng,
) -> f64 {
    let k0d: Vec<f64> = positions.iter().map(|d| 2.0 * PI / wavelength * d).collect();
    let mu = mean_vector(&k0d, signal, theta);
    let eps = 1e-6;
    let (mu_p, mu_m) = (mean_vector(&k0d, signal, theta + eps), mean_vector(&k0d, signal, theta - eps));
    let loglik = |xs: &[Vec<Complex64>], m: &[Complex64]| -> f64 {
        xs.iter()
            .map(|x| x.iter().zip(m).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / -noise_var
    };
    let mut scores = Vec::with_capacity(draws);
    for _ in 0..draws {
        let xs: Vec<Vec<Complex64>> = (0..snapshots)
            .map(|_| mu.iter().map(|&m| cn_draw(rng, m, noise_var)).collect())
            .collect();
        scores.push((loglik(&xs, &mu_p) - loglik(&xs, &mu_m)) / (2.0 * eps));
    }
    let mean = scores.iter().sum::<f64>() / draws as f64;
    scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64
}

/// Candidates maximising `Σ d²` over the effective positions, with a
/// relative tolerance for ties.
pub fn max_aperture(geom: &ArrayGeometry, cands: &[ChannelSelection], mode: ArrayMode) -> Vec<ChannelSelection> {
    let metric = |s: &ChannelSelection| -> f64 {
        array::effective_positions(geom, s, mode)
            .unwrap()
            .iter()
            .map(|d| d * d)
            .sum()
    };
    let best = cands.iter().map(metric).fold(f64::NEG_INFINITY, f64::max);
    cands
        .iter()
        .filter(|s| metric(s) >= best * (1.0 - 1e-12))
        .cloned()
        .collect()
}
