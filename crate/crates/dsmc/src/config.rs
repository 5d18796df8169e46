//! Experiment configuration files.
//!
//! Sectioned key-value text with units spelled out in the key names:
//!
//! ```text
//! [simulation]
//! sampling_time_ms = 10
//! horizon_s = 12
//! controller_order = 2
//! adaptation = on
//!
//! [trajectories]
//! omega_d_rad_s = const(90, 1) ramp(90, 105, 5) hold
//! ```
//!
//! Unknown sections and keys are errors. `#` starts a comment.

use crate::engine::{ChannelGains, EngineGains, EngineParams, EngineUncertainty};
use crate::profile::Profile;
use crate::sim::{ControllerOrder, InitialState, RateMode, SimConfig};

/// Configuration failure with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Output file names, relative to the run's output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub log_csv: String,
    pub metrics_txt: String,
    pub stability_txt: String,
    pub plot_dat: Option<String>,
    pub plot_script: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            log_csv: "log.csv".into(),
            metrics_txt: "metrics.txt".into(),
            stability_txt: "stability.txt".into(),
            plot_dat: None,
            plot_script: None,
        }
    }
}

/// A parsed and validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub output: OutputSpec,
    /// Non-fatal validation notes, e.g. the sampling-rate warning.
    pub warnings: Vec<String>,
}

/// Default gains for the shipped scenarios: betas satisfy the second-order
/// stability condition and the adaptation gains are sized to the engine's
/// drift magnitudes at the cold-start operating point.
pub fn default_gains() -> EngineGains {
    EngineGains {
        texh: ChannelGains {
            beta: 0.5,
            rho: 106000.0,
            alpha_hat_init: 1.0,
        },
        fuel: ChannelGains {
            beta: 0.5,
            rho: 1.1e-7,
            alpha_hat_init: 1.0,
        },
        speed: ChannelGains {
            beta: 0.5,
            rho: 4000.0,
            alpha_hat_init: 1.0,
        },
        air: ChannelGains {
            beta: 0.5,
            rho: 8.5e-8,
            alpha_hat_init: 1.0,
        },
    }
}

fn default_sim_config() -> SimConfig {
    SimConfig {
        t_step: 0.010,
        horizon: 12.0,
        order: ControllerOrder::Second,
        adaptation: true,
        uncertainty: EngineUncertainty::default(),
        params: EngineParams::default(),
        gains: default_gains(),
        texh_profile: Profile::parse("const(25, 1) ramp(25, 400, 10) hold").unwrap(),
        omega_profile: Profile::parse("const(90, 1) ramp(90, 105, 5) hold").unwrap(),
        afr_profile: Profile::constant(14.6),
        rate_mode: RateMode::SingleRate,
        initial: InitialState::Consistent { texh_offset: 0.0 },
        settling_exclusion: 0.0,
    }
}

#[derive(Default)]
struct ExplicitInit {
    t_exh: Option<f64>,
    mdot_f: Option<f64>,
    omega_e: Option<f64>,
    m_a: Option<f64>,
}

/// Parse one experiment config.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut sim = default_sim_config();
    let mut output = OutputSpec::default();
    let mut section: Option<String> = None;
    let mut rate_multirate = false;
    let mut substeps: u32 = 1;
    let mut initial_mode: Option<String> = None;
    let mut texh_offset = 0.0f64;
    let mut explicit = ExplicitInit::default();
    let mut texh_offset_set = false;
    let mut explicit_key_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line_no, "unterminated section header"))?
                .trim();
            match name {
                "simulation" | "uncertainty" | "gains" | "trajectories" | "initial" | "output" => {
                    section = Some(name.to_string());
                }
                other => return Err(ConfigError::at(line_no, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line_no, "expected key = value"))?;
        let key = key.trim();
        let value = value.trim();
        let section = section
            .as_deref()
            .ok_or_else(|| ConfigError::at(line_no, "key outside any [section]"))?;

        let num = |value: &str| -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .map_err(|_| ConfigError::at(line_no, format!("expected a number, got {value:?}")))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(ConfigError::at(line_no, "value must be finite"))
                    }
                })
        };
        let on_off = |value: &str| -> Result<bool, ConfigError> {
            match value {
                "on" | "true" => Ok(true),
                "off" | "false" => Ok(false),
                _ => Err(ConfigError::at(line_no, format!("expected on/off, got {value:?}"))),
            }
        };
        let profile = |value: &str| -> Result<Profile, ConfigError> {
            Profile::parse(value).map_err(|e| ConfigError::at(line_no, e.to_string()))
        };

        match (section, key) {
            ("simulation", "sampling_time_ms") => sim.t_step = num(value)? / 1000.0,
            ("simulation", "horizon_s") => sim.horizon = num(value)?,
            ("simulation", "controller_order") => {
                sim.order = match value {
                    "1" => ControllerOrder::First,
                    "2" => ControllerOrder::Second,
                    _ => return Err(ConfigError::at(line_no, "controller_order must be 1 or 2")),
                }
            }
            ("simulation", "adaptation") => sim.adaptation = on_off(value)?,
            ("simulation", "plant_rate_mode") => {
                rate_multirate = match value {
                    "single" => false,
                    "multirate" => true,
                    _ => {
                        return Err(ConfigError::at(
                            line_no,
                            "plant_rate_mode must be single or multirate",
                        ))
                    }
                }
            }
            ("simulation", "plant_substeps") => {
                substeps = value.parse::<u32>().map_err(|_| {
                    ConfigError::at(line_no, format!("expected a positive integer, got {value:?}"))
                })?;
                if substeps == 0 {
                    return Err(ConfigError::at(line_no, "plant_substeps must be >= 1"));
                }
            }
            ("simulation", "settling_exclusion_s") => sim.settling_exclusion = num(value)?,
            ("simulation", "eta_vol_clamp") => sim.params.eta_vol_clamp = on_off(value)?,
            ("uncertainty", "alpha_texh") => sim.uncertainty.alpha_texh = num(value)?,
            ("uncertainty", "alpha_mf") => sim.uncertainty.alpha_mf = num(value)?,
            ("uncertainty", "alpha_we") => sim.uncertainty.alpha_we = num(value)?,
            ("uncertainty", "alpha_ma") => sim.uncertainty.alpha_ma = num(value)?,
            ("gains", "beta_texh") => sim.gains.texh.beta = num(value)?,
            ("gains", "beta_mf") => sim.gains.fuel.beta = num(value)?,
            ("gains", "beta_we") => sim.gains.speed.beta = num(value)?,
            ("gains", "beta_ma") => sim.gains.air.beta = num(value)?,
            ("gains", "rho_texh") => sim.gains.texh.rho = num(value)?,
            ("gains", "rho_mf") => sim.gains.fuel.rho = num(value)?,
            ("gains", "rho_we") => sim.gains.speed.rho = num(value)?,
            ("gains", "rho_ma") => sim.gains.air.rho = num(value)?,
            ("gains", "alpha_hat_init_texh") => sim.gains.texh.alpha_hat_init = num(value)?,
            ("gains", "alpha_hat_init_mf") => sim.gains.fuel.alpha_hat_init = num(value)?,
            ("gains", "alpha_hat_init_we") => sim.gains.speed.alpha_hat_init = num(value)?,
            ("gains", "alpha_hat_init_ma") => sim.gains.air.alpha_hat_init = num(value)?,
            ("trajectories", "texh_d_c") => sim.texh_profile = profile(value)?,
            ("trajectories", "omega_d_rad_s") => sim.omega_profile = profile(value)?,
            ("trajectories", "afr_d") => sim.afr_profile = profile(value)?,
            ("initial", "mode") => initial_mode = Some(value.to_string()),
            ("initial", "texh_offset_c") => {
                texh_offset = num(value)?;
                texh_offset_set = true;
            }
            ("initial", "texh_c") => {
                explicit.t_exh = Some(num(value)?);
                explicit_key_lines.push(line_no);
            }
            ("initial", "mdot_f_kg_s") => {
                explicit.mdot_f = Some(num(value)?);
                explicit_key_lines.push(line_no);
            }
            ("initial", "omega_rad_s") => {
                explicit.omega_e = Some(num(value)?);
                explicit_key_lines.push(line_no);
            }
            ("initial", "m_a_kg") => {
                explicit.m_a = Some(num(value)?);
                explicit_key_lines.push(line_no);
            }
            ("output", "log_csv") => output.log_csv = value.to_string(),
            ("output", "metrics_txt") => output.metrics_txt = value.to_string(),
            ("output", "stability_txt") => output.stability_txt = value.to_string(),
            ("output", "plot_dat") => output.plot_dat = Some(value.to_string()),
            ("output", "plot_script") => output.plot_script = Some(value.to_string()),
            (section, key) => {
                return Err(ConfigError::at(
                    line_no,
                    format!("unknown key {key:?} in section [{section}]"),
                ))
            }
        }
    }

    sim.rate_mode = if rate_multirate {
        RateMode::Multirate { substeps }
    } else {
        RateMode::SingleRate
    };

    match initial_mode.as_deref().unwrap_or("consistent") {
        "consistent" => {
            if let Some(&line) = explicit_key_lines.first() {
                return Err(ConfigError::at(
                    line,
                    "explicit initial-state keys require mode = explicit",
                ));
            }
            sim.initial = InitialState::Consistent { texh_offset };
        }
        "explicit" => {
            if texh_offset_set {
                return Err(ConfigError::general(
                    "texh_offset_c requires mode = consistent",
                ));
            }
            let t_exh = explicit
                .t_exh
                .ok_or_else(|| ConfigError::general("explicit initial state needs texh_c"))?;
            let mdot_f = explicit
                .mdot_f
                .ok_or_else(|| ConfigError::general("explicit initial state needs mdot_f_kg_s"))?;
            let omega_e = explicit
                .omega_e
                .ok_or_else(|| ConfigError::general("explicit initial state needs omega_rad_s"))?;
            sim.initial = InitialState::Explicit {
                t_exh,
                mdot_f,
                omega_e,
                m_a: explicit.m_a,
            };
        }
        other => {
            return Err(ConfigError::general(format!(
                "initial mode must be consistent or explicit, got {other:?}"
            )))
        }
    }

    let warnings = validate(&sim)?;
    Ok(ExperimentConfig {
        sim,
        output,
        warnings,
    })
}

/// Structural validation; returns non-fatal warnings.
pub fn validate(sim: &SimConfig) -> Result<Vec<String>, ConfigError> {
    if sim.t_step <= 0.0 || sim.t_step.is_nan() {
        return Err(ConfigError::general("sampling_time_ms must be positive"));
    }
    if sim.horizon < 0.0 {
        return Err(ConfigError::general("horizon_s must be non-negative"));
    }
    if sim.horizon > 0.0 && sim.horizon < sim.t_step {
        return Err(ConfigError::general("horizon_s must be at least one sample"));
    }
    if sim.settling_exclusion < 0.0 {
        return Err(ConfigError::general("settling_exclusion_s must be non-negative"));
    }
    for (name, g) in [
        ("texh", &sim.gains.texh),
        ("mf", &sim.gains.fuel),
        ("we", &sim.gains.speed),
        ("ma", &sim.gains.air),
    ] {
        if !(0.0..1.0).contains(&g.beta) {
            return Err(ConfigError::general(format!(
                "beta_{name} = {} violates the (0,1) stability condition for the second-order law (beta = 0 selects the first-order law)",
                g.beta
            )));
        }
        if g.rho <= 0.0 || g.rho.is_nan() {
            return Err(ConfigError::general(format!("rho_{name} must be positive")));
        }
    }
    let mut warnings = Vec::new();
    let shortest = [
        sim.texh_profile.shortest_feature(),
        sim.omega_profile.shortest_feature(),
        sim.afr_profile.shortest_feature(),
    ]
    .into_iter()
    .flatten()
    .fold(f64::INFINITY, f64::min);
    if shortest.is_finite() && sim.t_step > 0.5 * shortest {
        warnings.push(format!(
            "sampling time {:.4} s exceeds half the shortest trajectory feature ({:.4} s); \
             the sampled profiles may alias",
            sim.t_step, shortest
        ));
    }
    Ok(warnings)
}

/// Convenience wrapper reading from a file path.
pub fn parse_config_file(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# exercise every section
[simulation]
sampling_time_ms = 40
horizon_s = 6
controller_order = 1
adaptation = off
plant_rate_mode = multirate
plant_substeps = 4
settling_exclusion_s = 0.5
eta_vol_clamp = on

[uncertainty]
alpha_texh = 1.25
alpha_mf = 0.75
alpha_we = 1.1
alpha_ma = 0.9

[gains]
beta_texh = 0.4
rho_we = 1200

[trajectories]
omega_d_rad_s = const(90, 2) hold
afr_d = const(14.6, 1) hold

[initial]
mode = explicit
texh_c = 25
mdot_f_kg_s = 0.0005
omega_rad_s = 90

[output]
log_csv = run.csv
plot_dat = run.dat
";

    #[test]
    fn parses_full_config() {
        let config = parse_config_str(FULL).unwrap();
        assert!((config.sim.t_step - 0.04).abs() < 1e-15);
        assert_eq!(config.sim.order, ControllerOrder::First);
        assert!(!config.sim.adaptation);
        assert_eq!(config.sim.rate_mode, RateMode::Multirate { substeps: 4 });
        assert!((config.sim.uncertainty.alpha_mf - 0.75).abs() < 1e-15);
        assert!((config.sim.gains.texh.beta - 0.4).abs() < 1e-15);
        assert!((config.sim.gains.speed.rho - 1200.0).abs() < 1e-15);
        assert!(config.sim.params.eta_vol_clamp);
        assert_eq!(config.output.log_csv, "run.csv");
        assert_eq!(config.output.plot_dat.as_deref(), Some("run.dat"));
        match config.sim.initial {
            InitialState::Explicit { m_a, .. } => assert!(m_a.is_none()),
            _ => panic!("expected explicit initial state"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let config = parse_config_str("").unwrap();
        assert!((config.sim.t_step - 0.01).abs() < 1e-15);
        assert_eq!(config.sim.order, ControllerOrder::Second);
        assert!(config.sim.adaptation);
        assert_eq!(config.sim.rate_mode, RateMode::SingleRate);
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        assert!(parse_config_str("[simulation]\nsampling = 10\n").is_err());
        assert!(parse_config_str("[warp]\nx = 1\n").is_err());
        assert!(parse_config_str("x = 1\n").is_err());
        assert!(parse_config_str("[gains]\nbeta_texh 0.4\n").is_err());
    }

    #[test]
    fn beta_outside_unit_interval_names_the_condition() {
        let err = parse_config_str("[gains]\nbeta_texh = 1.2\n").unwrap_err();
        assert!(err.message.contains("(0,1)"), "{}", err.message);
        assert!(parse_config_str("[gains]\nbeta_texh = 0\n").is_ok());
    }

    #[test]
    fn shannon_style_warning_on_coarse_sampling() {
        let config = parse_config_str(
            "[simulation]\nsampling_time_ms = 600\nhorizon_s = 12\n\
             [trajectories]\nomega_d_rad_s = const(90, 1) ramp(90, 105, 5) hold\n",
        )
        .unwrap();
        assert_eq!(config.warnings.len(), 1);
        assert!(config.warnings[0].contains("alias"));
    }

    #[test]
    fn explicit_keys_in_consistent_mode_are_rejected() {
        let err = parse_config_str("[initial]\ntexh_c = 25\n").unwrap_err();
        assert!(err.message.contains("mode = explicit"));
        let err = parse_config_str("[initial]\nmode = explicit\n").unwrap_err();
        assert!(err.message.contains("texh_c"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored()  {
        let config =
            parse_config_str("\n# top\n[simulation] # trailing\nhorizon_s = 3 # note\n\n").unwrap();
        assert!((config.sim.horizon - 3.0).abs() < 1e-15);
    }
}
