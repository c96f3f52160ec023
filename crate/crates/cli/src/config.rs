//! Scenario resolution: figure presets, flat `key=value` config files and
//! command-line overrides, applied in that order.

use std::fmt;
use std::path::Path;

use sphere_rendezvous::dynamics::{ControlMode, SigmaModel, TargetControl};
use sphere_rendezvous::sim::{scenarios, InitialData, ReferenceData, SimConfig};

/// A configuration problem: bad key, bad value, unreadable file. Reported
/// with its origin (file line or flag).
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError {
        message: message.into(),
    }
}

/// The scenario selected by `--figure`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    One,
    Three,
    FourB,
    Five,
    Seven,
    Eight,
    Nine,
}

impl Figure {
    pub fn parse(s: &str) -> Result<Figure, ConfigError> {
        match s {
            "1" => Ok(Figure::One),
            "3" => Ok(Figure::Three),
            "4b" | "4B" => Ok(Figure::FourB),
            "5" => Ok(Figure::Five),
            "7" => Ok(Figure::Seven),
            "8" => Ok(Figure::Eight),
            "9" => Ok(Figure::Nine),
            other => Err(err(format!(
                "unknown figure `{other}` (expected 1, 3, 4b, 5, 7, 8 or 9)"
            ))),
        }
    }

    pub fn is_flat(self) -> bool {
        matches!(self, Figure::Seven | Figure::Eight)
    }

    /// The sphere-model preset for this figure. Flat figures have none.
    pub fn sphere_config(self) -> Option<SimConfig> {
        match self {
            Figure::One => Some(scenarios::figure1()),
            // The gain sweep runs on the practical-rendezvous base.
            Figure::Three | Figure::FourB => Some(scenarios::figure3()),
            Figure::Five => Some(scenarios::figure5()),
            Figure::Nine => Some(scenarios::figure9()),
            Figure::Seven | Figure::Eight => None,
        }
    }
}

fn parse_bool(value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        other => Err(err(format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_f64(value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| err(format!("expected a number, got `{value}`")))
}

/// Applies one `key=value` assignment to a simulation configuration. Every
/// scalar field of the configuration is addressable.
pub fn apply_key(config: &mut SimConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "sigma" => {
            let v = parse_f64(value)?;
            if v < 0.0 {
                return Err(err("sigma must be nonnegative"));
            }
            config.params.sigma = SigmaModel::Constant(v);
        }
        "c_q" => config.params.c_q = parse_f64(value)?,
        "c_p" => config.params.c_p = parse_f64(value)?,
        "psi" => {
            let v = parse_f64(value)?;
            if v < 0.0 {
                return Err(err("psi must be nonnegative"));
            }
            config.params.psi = v;
        }
        "k0" => {
            let v = parse_f64(value)?;
            if v < 0.0 {
                return Err(err("k0 must be nonnegative"));
            }
            config.params.k0 = v;
        }
        "control_mode" => {
            config.params.control_mode = match value {
                "u1" | "U1" | "full_info" => ControlMode::FullInfo,
                "u2" | "U2" | "zero" => ControlMode::ZeroControl,
                other => return Err(err(format!("unknown control mode `{other}`"))),
            }
        }
        "a" | "target_amplitude" => config.control = TargetControl::circular(parse_f64(value)?),
        "dt" => {
            let v = parse_f64(value)?;
            if v <= 0.0 {
                return Err(err("dt must be positive"));
            }
            config.dt = v;
        }
        "t_end" => {
            let v = parse_f64(value)?;
            if v <= 0.0 {
                return Err(err("t_end must be positive"));
            }
            config.t_end = v;
        }
        "record_every" => {
            config.record_every =
                value
                    .parse::<usize>()
                    .ok()
                    .filter(|v| *v >= 1)
                    .ok_or_else(|| {
                        err(format!(
                            "record_every must be a positive integer, got `{value}`"
                        ))
                    })?;
        }
        "renormalize" => config.renormalize = parse_bool(value)?,
        "seed" => {
            config.seed = value
                .parse::<u64>()
                .map_err(|_| err(format!("seed must be a nonnegative integer, got `{value}`")))?;
        }
        "initial" => {
            config.initial = match value {
                "spread" => InitialData::Reference(ReferenceData::Spread),
                "near_target" => InitialData::Reference(ReferenceData::NearTarget),
                other => match other.strip_prefix("random:") {
                    Some(count) => InitialData::Random {
                        count: count.parse::<usize>().ok().filter(|c| *c >= 1).ok_or_else(
                            || err(format!("random initial data needs a positive count, got `{count}`")),
                        )?,
                    },
                    None => {
                        return Err(err(format!(
                            "unknown initial data `{other}` (expected spread, near_target or random:<N>)"
                        )))
                    }
                },
            };
        }
        other => return Err(err(format!("unknown configuration key `{other}`"))),
    }
    Ok(())
}

/// Parses a `key=value` file (`#` starts a comment) into a configuration,
/// reporting problems with their line numbers. A `figure=<id>` line replaces
/// the starting preset before the remaining keys apply.
pub fn apply_file(config: &mut SimConfig, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;

    // A figure selection inside the file resets the baseline first.
    let mut assignments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            err(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                idx + 1
            ))
        })?;
        assignments.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }

    for (line_no, key, value) in &assignments {
        if key == "figure" {
            let figure = Figure::parse(value)
                .map_err(|e| err(format!("{}:{line_no}: {e}", path.display())))?;
            *config = figure.sphere_config().ok_or_else(|| {
                err(format!(
                    "{}:{line_no}: figure {value} is a flat-space scenario; use --flat",
                    path.display()
                ))
            })?;
        }
    }
    for (line_no, key, value) in &assignments {
        if key == "figure" {
            continue;
        }
        apply_key(config, key, value)
            .map_err(|e| err(format!("{}:{line_no}: {e}", path.display())))?;
    }
    Ok(())
}

/// Parses one `--set key=value` argument.
pub fn split_assignment(arg: &str) -> Result<(&str, &str), ConfigError> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| err(format!("expected key=value, got `{arg}`")))
}

/// Parses the `--flocking psi=<x>` argument.
pub fn parse_flocking(arg: &str) -> Result<f64, ConfigError> {
    let (key, value) = split_assignment(arg)?;
    if key != "psi" {
        return Err(err(format!("--flocking takes psi=<x>, got `{arg}`")));
    }
    let v = parse_f64(value)?;
    if v < 0.0 {
        return Err(err("psi must be nonnegative"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sphere_rendezvous::dynamics::ModelParams;

    fn base() -> SimConfig {
        SimConfig::new(
            ModelParams::new(1.0, 5.0, 0.1, ControlMode::FullInfo),
            InitialData::Reference(ReferenceData::Spread),
        )
    }

    #[test]
    fn scalar_overrides() {
        let mut config = base();
        apply_key(&mut config, "c_p", "4").unwrap();
        apply_key(&mut config, "dt", "0.002").unwrap();
        apply_key(&mut config, "control_mode", "u2").unwrap();
        apply_key(&mut config, "initial", "random:9").unwrap();
        assert_eq!(config.params.c_p, 4.0);
        assert_eq!(config.dt, 0.002);
        assert_eq!(config.params.control_mode, ControlMode::ZeroControl);
        assert_eq!(config.initial, InitialData::Random { count: 9 });
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut config = base();
        assert!(apply_key(&mut config, "dt", "-1").is_err());
        assert!(apply_key(&mut config, "sigma", "nope").is_err());
        assert!(apply_key(&mut config, "unknown_key", "3").is_err());
        assert!(apply_key(&mut config, "initial", "random:0").is_err());
    }

    #[test]
    fn file_parsing_reports_line_numbers() {
        let dir = std::env::temp_dir().join("rendezvous-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "c_p = 4\nnot a line\n").unwrap();
        let e = apply_file(&mut base(), &path).unwrap_err();
        assert!(e.message.contains(":2:"), "{}", e.message);

        let good = dir.join("good.cfg");
        std::fs::write(
            &good,
            "# practical run\nfigure = 3\nc_p = 8 # stronger alignment\n",
        )
        .unwrap();
        let mut config = base();
        apply_file(&mut config, &good).unwrap();
        assert_eq!(config.params.c_p, 8.0);
        assert_eq!(config.params.control_mode, ControlMode::ZeroControl);
    }

    #[test]
    fn flocking_argument() {
        assert_eq!(parse_flocking("psi=1.5").unwrap(), 1.5);
        assert!(parse_flocking("phi=1").is_err());
        assert!(parse_flocking("psi=-2").is_err());
    }
}
