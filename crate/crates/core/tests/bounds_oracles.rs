mod common;

use adaptive_doa::bounds::{
    bzb_value, ecrb_value, eta, overlap_integral, wwb_value, xi, PosteriorRepr, SignalModel, TestPoint,
};
use adaptive_doa::rng::substream;
use common::{empirical_fisher, rel, simpson, xi_monte_carlo};
use num_complex::Complex64;

fn model(snr_db: f64, snapshots: usize) -> SignalModel {
    SignalModel::from_snr_db(snr_db, snapshots, Complex64::new(1.0, 0.0), 0.0).unwrap()
}

fn gauss_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -(x - mean).powi(2) / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

#[test]
fn xi_matches_likelihood_quotient_sampling() {
    let positions = [0.0, 0.45];
    let m = model(-5.0, 2);
    let mut rng = substream(17, &[]);
    for (alpha, beta, theta) in [(2.0, 0.5, 0.3), (0.5, 0.2, -0.4), (-1.0, 0.1, 0.0), (0.3, 0.8, 0.7)] {
        let want = xi(&positions, &m, alpha, beta, 1.0).unwrap();
        let got = xi_monte_carlo(&positions, 1.0, 1.0, 2, m.noise_var(), alpha, beta, theta, 200_000, &mut rng);
        assert!(rel(got, want) < 1e-2, "α={alpha} β={beta}: closed {want}, sampled {got}");
    }
}

#[test]
fn gaussian_overlap_matches_quadrature() {
    for (mean, var) in [(0.0, 0.05), (0.3, 1e-3), (-0.2, 0.4)] {
        let post = PosteriorRepr::Gaussian { mean, var };
        let sd = var.sqrt();
        for alpha in [0.5, 2.0, -1.0, 0.1] {
            for beta in [0.01, 0.1, 0.5] {
                let f = |t: f64| (alpha * gauss_ln_pdf(t + beta, mean, var) + (1.0 - alpha) * gauss_ln_pdf(t, mean, var)).exp();
                // split at the peak of the integrand so the quadrature sees it
                let peak = mean - alpha * beta;
                let tol = 1e-12 * f(peak) * sd;
                let want = simpson(&f, peak - 40.0 * sd, peak, tol) + simpson(&f, peak, peak + 40.0 * sd, tol);
                let got = overlap_integral(&post, alpha, beta).unwrap();
                assert!(rel(got, want) < 1e-6, "var={var} α={alpha} β={beta}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn uniform_overlap_matches_quadrature() {
    let post = PosteriorRepr::prior();
    for alpha in [0.5, 2.0] {
        for beta in [0.1, 0.7, 1.5] {
            let f = |t: f64| {
                let inside = |x: f64| -> f64 { if (-1.0..=1.0).contains(&x) { 0.5 } else { 0.0 } };
                let (a, b) = (inside(t + beta), inside(t));
                if a == 0.0 || b == 0.0 { 0.0 } else { a.powf(alpha) * b.powf(1.0 - alpha) }
            };
            let want = simpson(&f, -1.0, 1.0 - beta, 1e-11);
            let got = overlap_integral(&post, alpha, beta).unwrap();
            assert!(rel(got, want) < 1e-9, "α={alpha} β={beta}: {got} vs {want}");
        }
    }
}

#[test]
fn eta_is_one_without_shift() {
    let m = model(3.0, 2);
    let posts = [PosteriorRepr::prior(), PosteriorRepr::Gaussian { mean: 0.2, var: 0.01 }];
    for post in &posts {
        for alpha in [-0.5, 0.3, 1.0, 2.0] {
            let e = eta(post, &[0.0, 0.45, 1.35], &m, alpha, 0.0, 1.0).unwrap();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn wwb_near_one_tracks_bzb_for_gaussian() {
    let m = SignalModel::new(Complex64::new(1.0, 0.0), 2, 10.0, 0.0).unwrap();
    let post = PosteriorRepr::Gaussian { mean: 0.0, var: 1.0 / 3.0 };
    for h in [0.1, 0.5, 1.0] {
        let w = wwb_value(TestPoint { s: 0.999, h }, &post, &[0.0, 0.45], &m, 1.0).unwrap();
        let b = bzb_value(h, &post, &[0.0, 0.45], &m, 1.0).unwrap();
        assert!(rel(w, b) < 1e-2, "h={h}: {w} vs {b}");
    }
}

#[test]
fn ecrb_matches_empirical_fisher() {
    let m = SignalModel::new(Complex64::new(1.0, 0.0), 2, 1.0, 0.0).unwrap();
    let positions = [0.0, 0.45, 0.9];
    let bound = ecrb_value(&PosteriorRepr::prior(), &positions, &m, 1.0).unwrap();
    assert!(rel(bound, 6.254e-3) < 1e-3);
    let fisher = empirical_fisher(&positions, 1.0, 1.0, 2, 1.0, 0.3, 100_000, &mut substream(5, &[]));
    assert!(rel(1.0 / fisher, bound) < 5e-2, "{} vs {bound}", 1.0 / fisher);
}
