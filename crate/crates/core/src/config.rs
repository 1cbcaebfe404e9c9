//! Flat `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. `snr_db` and `bound` take
//! comma-separated lists; a single-run subcommand uses the first entry.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::array::ArrayMode;
use crate::error::{Error, Result};
use crate::particle::{PosteriorKind, ResampleMode};
use crate::sim::{ExperimentConfig, MseMode, Policy};

pub const KEYS: [&str; 27] = [
    "n_rx",
    "n_tx",
    "i_rx",
    "i_tx",
    "fix_first",
    "spacing_factor",
    "wavelength",
    "inter_pulse",
    "mode",
    "snapshots",
    "signal_value",
    "snr_db",
    "f_d",
    "particles",
    "resample_mode",
    "posterior_repr",
    "grid_bins",
    "bound",
    "sa_temps",
    "sa_moves",
    "steps",
    "theta_true",
    "n_real",
    "n_traj",
    "eval_step",
    "mse_mode",
    "seed",
];

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = v.split(',').map(|s| scalar(s.trim())).collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn set(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "n_rx" => cfg.n_rx = scalar(v)?,
        "n_tx" => cfg.n_tx = scalar(v)?,
        "i_rx" => cfg.i_rx = scalar(v)?,
        "i_tx" => cfg.i_tx = scalar(v)?,
        "fix_first" => cfg.fix_first = scalar(v)?,
        "spacing_factor" => cfg.spacing_factor = scalar(v)?,
        "wavelength" => cfg.wavelength = scalar(v)?,
        "inter_pulse" => cfg.inter_pulse = scalar(v)?,
        "mode" => {
            cfg.mode = match v {
                "simo" => ArrayMode::Simo,
                "mimo" => ArrayMode::Mimo,
                _ => return Err(format!("mode must be simo or mimo, got `{v}`")),
            }
        }
        "snapshots" => cfg.snapshots = scalar(v)?,
        "signal_value" => cfg.signal_value = scalar(v)?,
        "snr_db" => {
            cfg.sweep_snr_db = list(v)?;
            cfg.snr_db = cfg.sweep_snr_db[0];
        }
        "f_d" => cfg.f_d = scalar(v)?,
        "particles" => cfg.particles = scalar(v)?,
        "resample_mode" => {
            cfg.resample_mode = match v {
                "always" => ResampleMode::Always,
                "ess" => ResampleMode::Ess,
                _ => return Err(format!("resample_mode must be always or ess, got `{v}`")),
            }
        }
        "posterior_repr" => {
            cfg.posterior_repr = Some(match v {
                "gauss" => PosteriorKind::Gauss,
                "grid" => PosteriorKind::Grid,
                _ => return Err(format!("posterior_repr must be gauss or grid, got `{v}`")),
            })
        }
        "grid_bins" => cfg.grid_bins = scalar(v)?,
        "bound" => {
            cfg.policies = v
                .split(',')
                .map(|s| s.trim().parse::<Policy>().map_err(|e| e.to_string()))
                .collect::<std::result::Result<_, _>>()?
        }
        "sa_temps" => cfg.sa_temps = Some(scalar(v)?),
        "sa_moves" => cfg.sa_moves = scalar(v)?,
        "steps" => cfg.steps = scalar(v)?,
        "theta_true" => cfg.theta_true = scalar(v)?,
        "n_real" => cfg.n_real = scalar(v)?,
        "n_traj" => cfg.n_traj = scalar(v)?,
        "eval_step" => cfg.eval_step = scalar(v)?,
        "mse_mode" => {
            cfg.mse_mode = match v {
                "step" => MseMode::Step,
                "trajectory" => MseMode::Trajectory,
                _ => return Err(format!("mse_mode must be step or trajectory, got `{v}`")),
            }
        }
        "seed" => cfg.seed = scalar(v)?,
        _ => unreachable!("key checked against KEYS"),
    }
    Ok(())
}

/// Parse config text on top of the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        set(&mut cfg, key, value).map_err(|message| Error::ConfigParse {
            line: i + 1,
            message: format!("{key}: {message}"),
        })?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// The effective configuration in the same `key = value` syntax.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("n_rx", cfg.n_rx.to_string());
    put("n_tx", cfg.n_tx.to_string());
    put("i_rx", cfg.i_rx.to_string());
    put("i_tx", cfg.i_tx.to_string());
    put("fix_first", cfg.fix_first.to_string());
    put("spacing_factor", cfg.spacing_factor.to_string());
    put("wavelength", cfg.wavelength.to_string());
    put("inter_pulse", cfg.inter_pulse.to_string());
    put("mode", cfg.mode.as_str().to_string());
    put("snapshots", cfg.snapshots.to_string());
    put("signal_value", cfg.signal_value.to_string());
    put("snr_db", join(&cfg.sweep_snr_db));
    put("f_d", cfg.f_d.to_string());
    put("particles", cfg.particles.to_string());
    put(
        "resample_mode",
        match cfg.resample_mode {
            ResampleMode::Always => "always",
            ResampleMode::Ess => "ess",
        }
        .to_string(),
    );
    put("posterior_repr", cfg.posterior_kind().as_str().to_string());
    put("grid_bins", cfg.grid_bins.to_string());
    put("bound", join(&cfg.policies));
    put("sa_temps", cfg.anneal_temps().to_string());
    put("sa_moves", cfg.sa_moves.to_string());
    put("steps", cfg.steps.to_string());
    put("theta_true", cfg.theta_true.to_string());
    put("n_real", cfg.n_real.to_string());
    put("n_traj", cfg.n_traj.to_string());
    put("eval_step", cfg.eval_step.to_string());
    put("mse_mode", cfg.mse_mode.as_str().to_string());
    put("seed", cfg.seed.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::BoundKind;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.snapshots, 2);
        assert_eq!(cfg.particles, 500);
        assert_eq!(cfg.theta_true, 0.3);
        assert_eq!(cfg.spacing_factor, 0.9);
    }

    #[test]
    fn snr_sets_noise_variance() {
        let cfg = parse_config("snr_db = -5").unwrap();
        let var = cfg.signal_model().unwrap().noise_var();
        assert!((var - 10f64.powf(0.5)).abs() < 1e-12);
        assert!((var - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn bound_values() {
        for (text, kind) in [
            ("wwb", BoundKind::Wwb),
            ("bzb", BoundKind::Bzb),
            ("ecrb", BoundKind::Ecrb),
            ("wwb_s05", BoundKind::WwbS05),
        ] {
            let cfg = parse_config(&format!("bound = {text}")).unwrap();
            assert_eq!(cfg.policies, vec![Policy::Bound(kind)]);
        }
        assert!(matches!(parse_config("bound = foo"), Err(Error::ConfigParse { line: 1, .. })));
    }

    #[test]
    fn lists_comments_and_errors() {
        let cfg = parse_config("# sweep\n\nsnr_db = -10, -5, 0, 5  # four points\nbound = wwb, stair\n").unwrap();
        assert_eq!(cfg.sweep_snr_db, vec![-10.0, -5.0, 0.0, 5.0]);
        assert_eq!(cfg.snr_db, -10.0);
        assert_eq!(cfg.policies, vec![Policy::Bound(BoundKind::Wwb), Policy::Stair]);

        assert_eq!(parse_config("colour = red"), Err(Error::UnknownKey("colour".into())));
        assert!(matches!(parse_config("n_rx = 4\nparticles = many"), Err(Error::ConfigParse { line: 2, .. })));
        assert!(matches!(parse_config("\n\nn_rx"), Err(Error::ConfigParse { line: 3, .. })));
        assert!(parse_config("mode = mixed").is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = parse_config("mode = simo\nbound = bzb, random\nsnr_db = 3\nsa_temps = 7\nseed = 42").unwrap();
        let back = parse_config(&render_config(&cfg)).unwrap();
        assert_eq!(back.mode, cfg.mode);
        assert_eq!(back.policies, cfg.policies);
        assert_eq!(back.sweep_snr_db, cfg.sweep_snr_db);
        assert_eq!(back.sa_temps, cfg.sa_temps);
        assert_eq!(back.seed, 42);
        assert_eq!(back.posterior_kind(), PosteriorKind::Grid);
    }
}
