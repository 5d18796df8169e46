//! Deterministic fixed-step closed-loop simulation of the engine under
//! the cascaded adaptive DSMCs, with uncertainty injection, multirate
//! plant stepping and per-step logging.

use crate::engine::control::ControlError;
use crate::engine::plant::{self, EngineError};
use crate::engine::{
    DesiredTrajectories, EngineControllerBank, EngineGains, EngineParams, EngineState,
    EngineUncertainty,
};
use crate::profile::Profile;

/// Controller order for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerOrder {
    First,
    Second,
}

/// Plant stepping mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// Plant advances by the same Euler step the controller assumes.
    SingleRate,
    /// Plant advances in `substeps` Euler substeps per controller period
    /// with zero-order-held inputs.
    Multirate { substeps: u32 },
}

impl RateMode {
    pub fn substeps(&self) -> u32 {
        match self {
            RateMode::SingleRate => 1,
            RateMode::Multirate { substeps } => (*substeps).max(1),
        }
    }
}

/// Initial-state specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Derive a state that starts every channel on target: speed and
    /// exhaust temperature from their desired values (the latter plus an
    /// optional offset), manifold air mass from the speed controller's
    /// initial target and fuel flow from the desired air-fuel ratio.
    Consistent { texh_offset: f64 },
    /// Explicit numeric state; a missing air mass is derived from the
    /// desired air-fuel ratio at the initial fuel flow.
    Explicit {
        t_exh: f64,
        mdot_f: f64,
        omega_e: f64,
        m_a: Option<f64>,
    },
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Sampling time, seconds.
    pub t_step: f64,
    /// Run length, seconds.
    pub horizon: f64,
    pub order: ControllerOrder,
    pub adaptation: bool,
    pub uncertainty: EngineUncertainty,
    pub params: EngineParams,
    pub gains: EngineGains,
    pub texh_profile: Profile,
    pub omega_profile: Profile,
    pub afr_profile: Profile,
    pub rate_mode: RateMode,
    pub initial: InitialState,
    /// Leading window excluded from tracking-error means, seconds.
    pub settling_exclusion: f64,
}

/// One logged sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub texh: f64,
    pub texh_d: f64,
    pub mdot_f: f64,
    pub mdot_f_d: f64,
    pub omega_e: f64,
    pub omega_d: f64,
    pub m_a: f64,
    pub m_a_d: f64,
    pub afr: f64,
    pub afr_d: f64,
    pub s: [f64; 4],
    pub alpha_hat: [f64; 4],
    pub delta: f64,
    pub mdot_fc: f64,
    pub mdot_ai: f64,
    /// Nominal drift values per channel; logged in memory only, not part
    /// of the CSV schema.
    pub f_values: [f64; 4],
}

/// Immutable result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub t_step: f64,
    pub records: Vec<LogRecord>,
}

/// Errors from assembling or executing a run.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(String),
    /// A sliding variable exceeded the divergence guard, a state became
    /// non-finite or the plant hit a hard limit. Carries the step index.
    DivergedRun { step: usize, reason: String },
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            SimError::DivergedRun { step, reason } => {
                write!(f, "run diverged at step {step}: {reason}")
            }
        }
    }
}

impl std::error::Error for SimError {}

/// Divergence guard factor over each channel's reference magnitude.
const DIVERGENCE_FACTOR: f64 = 1e6;

fn engine_error_at(step: usize, err: EngineError) -> SimError {
    SimError::DivergedRun {
        step,
        reason: err.to_string(),
    }
}

fn control_error_at(step: usize, err: ControlError) -> SimError {
    SimError::DivergedRun {
        step,
        reason: err.to_string(),
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.t_step).round() as usize
    }

    /// Sampled desired trajectories with two steps of lookahead.
    pub fn trajectories(&self) -> DesiredTrajectories {
        let n = self.steps() + 3;
        DesiredTrajectories {
            t_exh_d: self.texh_profile.sample_series(self.t_step, n),
            omega_d: self.omega_profile.sample_series(self.t_step, n),
            afr_d: self.afr_profile.sample_series(self.t_step, n),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.t_step <= 0.0 || self.t_step.is_nan() {
            return Err(SimError::InvalidConfig("sampling time must be positive".into()));
        }
        if self.horizon < 0.0 {
            return Err(SimError::InvalidConfig("horizon must be non-negative".into()));
        }
        for (name, g) in [
            ("texh", &self.gains.texh),
            ("mf", &self.gains.fuel),
            ("we", &self.gains.speed),
            ("ma", &self.gains.air),
        ] {
            if !(0.0..1.0).contains(&g.beta) {
                return Err(SimError::InvalidConfig(format!(
                    "beta_{name} = {} violates the (0,1) stability condition (beta = 0 selects the first-order law)",
                    g.beta
                )));
            }
            if g.rho <= 0.0 || g.rho.is_nan() {
                return Err(SimError::InvalidConfig(format!(
                    "rho_{name} must be positive, got {}",
                    g.rho
                )));
            }
            if !g.alpha_hat_init.is_finite() {
                return Err(SimError::InvalidConfig(format!(
                    "alpha_hat_init_{name} must be finite"
                )));
            }
        }
        for a in self.uncertainty.as_array() {
            if !a.is_finite() {
                return Err(SimError::InvalidConfig("uncertainty terms must be finite".into()));
            }
        }
        Ok(())
    }

    fn initial_state(&self, bank: &EngineControllerBank) -> Result<EngineState, SimError> {
        let trajectories = self.trajectories();
        match self.initial {
            InitialState::Consistent { texh_offset } => {
                let omega_e = trajectories.omega_d[0];
                if omega_e <= 0.0 || omega_e.is_nan() {
                    return Err(SimError::InvalidConfig(
                        "desired speed profile must start positive".into(),
                    ));
                }
                let m_a = bank.initial_air_target(
                    omega_e,
                    trajectories.omega_d[0],
                    trajectories.omega_d[1],
                    &self.params,
                );
                if m_a <= 0.0 || m_a.is_nan() {
                    return Err(SimError::InvalidConfig(
                        "initial speed target implies a non-positive air mass".into(),
                    ));
                }
                let afr_d = trajectories.afr_d[0];
                if afr_d <= 0.0 || afr_d.is_nan() {
                    return Err(SimError::InvalidConfig(
                        "desired air-fuel ratio must start positive".into(),
                    ));
                }
                let mdot_f = plant::mdot_ao(m_a, omega_e, &self.params) / afr_d;
                EngineState::new(
                    trajectories.t_exh_d[0] + texh_offset,
                    mdot_f,
                    omega_e,
                    m_a,
                    &self.params,
                )
                .map_err(|e| SimError::InvalidConfig(e.to_string()))
            }
            InitialState::Explicit {
                t_exh,
                mdot_f,
                omega_e,
                m_a,
            } => {
                let m_a = match m_a {
                    Some(value) => value,
                    None => {
                        let afr_d = trajectories.afr_d[0];
                        let target = afr_d * mdot_f;
                        plant::m_a_for_air_flow(target, omega_e, &self.params).ok_or_else(|| {
                            SimError::InvalidConfig(
                                "no manifold air mass delivers the desired initial air-fuel ratio"
                                    .into(),
                            )
                        })?
                    }
                };
                EngineState::new(t_exh, mdot_f, omega_e, m_a, &self.params)
                    .map_err(|e| SimError::InvalidConfig(e.to_string()))
            }
        }
    }
}

/// Run one experiment. Identical configs produce identical logs.
pub fn run(config: &SimConfig) -> Result<TrajectoryLog, SimError> {
    config.validate()?;
    let trajectories = config.trajectories();
    let n = config.steps();
    debug_assert!(trajectories.covers(n));

    let mut bank = EngineControllerBank::new(
        &config.gains,
        config.t_step,
        config.order == ControllerOrder::First,
        config.adaptation,
    );
    let mut state = config.initial_state(&bank)?;
    let mut records = Vec::with_capacity(n + 1);
    let mut guards: Option<[f64; 4]> = None;

    for k in 0..=n {
        let step = bank
            .cascade_step(&state, &trajectories, k, &config.params)
            .map_err(|e| control_error_at(k, e))?;

        let guard = guards.get_or_insert_with(|| {
            let reference = [
                trajectories.t_exh_d[0].abs(),
                step.mdot_f_d.abs(),
                trajectories.omega_d[0].abs(),
                step.m_a_d.abs(),
            ];
            let mut limits = [0.0; 4];
            for i in 0..4 {
                limits[i] =
                    DIVERGENCE_FACTOR * step.s[i].abs().max(1e-3 * reference[i].max(1e-6));
            }
            limits
        });
        for (i, (s, limit)) in step.s.iter().zip(guard.iter()).enumerate() {
            if !s.is_finite() || s.abs() > *limit {
                return Err(SimError::DivergedRun {
                    step: k,
                    reason: format!(
                        "sliding variable s{} exceeded the divergence guard ({limit:e})",
                        i + 1
                    ),
                });
            }
        }

        records.push(LogRecord {
            time: k as f64 * config.t_step,
            texh: state.t_exh,
            texh_d: trajectories.t_exh_d[k],
            mdot_f: state.mdot_f,
            mdot_f_d: step.mdot_f_d,
            omega_e: state.omega_e,
            omega_d: trajectories.omega_d[k],
            m_a: state.m_a,
            m_a_d: step.m_a_d,
            afr: state.afr,
            afr_d: trajectories.afr_d[k],
            s: step.s,
            alpha_hat: step.alpha_hat,
            delta: step.inputs.delta_spark,
            mdot_fc: step.inputs.mdot_fc,
            mdot_ai: step.inputs.mdot_ai,
            f_values: step.f_values,
        });
        if k == n {
            break;
        }

        let substeps = config.rate_mode.substeps();
        let h = config.t_step / substeps as f64;
        for _ in 0..substeps {
            state = plant::step_engine(&state, &step.inputs, &config.uncertainty, &config.params, h)
                .map_err(|e| engine_error_at(k, e))?;
        }
    }

    Ok(TrajectoryLog {
        t_step: config.t_step,
        records,
    })
}

/// Sweep axis for repeated runs off a base configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Vary the sampling time, milliseconds.
    SamplingMs,
    /// Set all four uncertainty terms.
    Uncertainty,
    /// Set one channel's uncertainty term.
    UncertaintyChannel(crate::engine::EngineChannel),
    /// Set all four sliding gains.
    Beta,
    /// Scale all four adaptation gains.
    RhoScale,
}

/// Apply one sweep value to a copy of the base config.
pub fn apply_sweep_value(base: &SimConfig, axis: &SweepAxis, value: f64) -> SimConfig {
    let mut config = base.clone();
    match axis {
        SweepAxis::SamplingMs => config.t_step = value / 1000.0,
        SweepAxis::Uncertainty => {
            config.uncertainty = EngineUncertainty {
                alpha_texh: value,
                alpha_mf: value,
                alpha_we: value,
                alpha_ma: value,
            }
        }
        SweepAxis::UncertaintyChannel(ch) => match ch {
            crate::engine::EngineChannel::Texh => config.uncertainty.alpha_texh = value,
            crate::engine::EngineChannel::Fuel => config.uncertainty.alpha_mf = value,
            crate::engine::EngineChannel::Speed => config.uncertainty.alpha_we = value,
            crate::engine::EngineChannel::Air => config.uncertainty.alpha_ma = value,
        },
        SweepAxis::Beta => {
            config.gains.texh.beta = value;
            config.gains.fuel.beta = value;
            config.gains.speed.beta = value;
            config.gains.air.beta = value;
        }
        SweepAxis::RhoScale => {
            config.gains.texh.rho *= value;
            config.gains.fuel.rho *= value;
            config.gains.speed.rho *= value;
            config.gains.air.rho *= value;
        }
    }
    config
}

/// Run the base config once per value, in order. Each result carries the
/// value it was produced with; the first failing value aborts the sweep
/// and is named in the error.
pub fn sweep(
    base: &SimConfig,
    axis: &SweepAxis,
    values: &[f64],
) -> Result<Vec<(f64, TrajectoryLog)>, (f64, SimError)> {
    if values.is_empty() {
        return Err((
            f64::NAN,
            SimError::InvalidConfig("sweep needs at least one value".into()),
        ));
    }
    values
        .iter()
        .map(|&v| {
            run(&apply_sweep_value(base, axis, v))
                .map(|log| (v, log))
                .map_err(|e| (v, e))
        })
        .collect()
}
