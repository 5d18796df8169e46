//! Four cascaded SISO adaptive DSMCs for the engine: exhaust temperature,
//! fuel flow, engine speed (with the manifold air mass as a synthetic
//! input) and air mass flow.
//!
//! The speed controller's synthetic target and the fuel target derived
//! from the desired air-fuel ratio are needed one step ahead by the
//! control laws. Both are produced by evaluating the estimated plant
//! model one step forward and buffered, so each sliding variable is
//! measured against the target its own controller aimed for. With a
//! matched model every channel then satisfies `s(k+1) = -beta*s(k)`
//! exactly, for any initial condition.

use super::plant::{
    self, afi, mdot_ao, torque_loss, EngineInputs, EngineParams, EngineState,
};

/// Errors raised by the engine controllers.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    /// The exhaust channel's input gain vanished (AFI at its zero).
    ZeroInputGain,
    /// A desired air-fuel ratio at or below zero.
    InvalidDesiredAfr,
    /// An adaptation update produced a non-finite estimate.
    NonFiniteEstimate,
}

impl std::fmt::Display for ControlError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControlError::ZeroInputGain => write!(f, "input gain is zero (AFI singularity)"),
            ControlError::InvalidDesiredAfr => write!(f, "desired air-fuel ratio must be positive"),
            ControlError::NonFiniteEstimate => write!(f, "uncertainty estimate is not finite"),
        }
    }
}

impl std::error::Error for ControlError {}

/// Index of an engine control channel, in log column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChannel {
    Texh = 0,
    Fuel = 1,
    Speed = 2,
    Air = 3,
}

impl EngineChannel {
    pub const ALL: [EngineChannel; 4] = [
        EngineChannel::Texh,
        EngineChannel::Fuel,
        EngineChannel::Speed,
        EngineChannel::Air,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EngineChannel::Texh => "texh",
            EngineChannel::Fuel => "fuel",
            EngineChannel::Speed => "speed",
            EngineChannel::Air => "air",
        }
    }
}

/// Gains for one channel.
#[derive(Debug, Clone, Copy)]
pub struct ChannelGains {
    pub beta: f64,
    pub rho: f64,
    pub alpha_hat_init: f64,
}

/// Gains for the four channels.
#[derive(Debug, Clone, Copy)]
pub struct EngineGains {
    pub texh: ChannelGains,
    pub fuel: ChannelGains,
    pub speed: ChannelGains,
    pub air: ChannelGains,
}

impl EngineGains {
    pub fn channel(&self, ch: EngineChannel) -> &ChannelGains {
        match ch {
            EngineChannel::Texh => &self.texh,
            EngineChannel::Fuel => &self.fuel,
            EngineChannel::Speed => &self.speed,
            EngineChannel::Air => &self.air,
        }
    }
}

/// Desired trajectories sampled at the controller rate, with at least two
/// samples of lookahead past the run horizon.
#[derive(Debug, Clone)]
pub struct DesiredTrajectories {
    pub t_exh_d: Vec<f64>,
    pub omega_d: Vec<f64>,
    pub afr_d: Vec<f64>,
}

impl DesiredTrajectories {
    /// True when every sequence covers `horizon_steps + 2` lookahead.
    pub fn covers(&self, horizon_steps: usize) -> bool {
        let need = horizon_steps + 3;
        self.t_exh_d.len() >= need && self.omega_d.len() >= need && self.afr_d.len() >= need
    }
}

/// Mutable controller bank state advanced once per sample.
#[derive(Debug, Clone)]
pub struct EngineControllerBank {
    /// Effective sliding gains; all zero in first-order mode.
    pub beta: [f64; 4],
    /// Adaptation gains.
    pub rho: [f64; 4],
    /// Current uncertainty estimates.
    pub alpha_hat: [f64; 4],
    /// Sampling time, seconds.
    pub t_step: f64,
    /// When false the estimates stay at their initial values.
    pub adaptation_enabled: bool,
    /// Air mass target computed at the previous step for the current one.
    mad_buffer: Option<f64>,
    /// Fuel target computed at the previous step for the current one.
    mfd_buffer: Option<f64>,
}

/// Everything the logger wants from one cascade evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CascadeStep {
    pub inputs: EngineInputs,
    /// Sliding variables at this step.
    pub s: [f64; 4],
    /// Nominal drift values used by the adaptation laws.
    pub f_values: [f64; 4],
    /// Estimates used by this step's control laws.
    pub alpha_hat: [f64; 4],
    /// Fuel target this step, from the desired air-fuel ratio.
    pub mdot_f_d: f64,
    /// Air mass target this step, from the speed controller.
    pub m_a_d: f64,
}

/// Input-gain singularity guard for the exhaust temperature channel.
pub const AFI_SINGULARITY: f64 = 1e-9;

/// Desired fuel flow from the cylinder air flow and desired air-fuel
/// ratio.
pub fn desired_fuel(mdot_ao_now: f64, afr_d: f64) -> Result<f64, ControlError> {
    if afr_d <= 0.0 {
        return Err(ControlError::InvalidDesiredAfr);
    }
    Ok(mdot_ao_now / afr_d)
}

/// Exhaust temperature control law.
pub fn control_texh(
    alpha_hat: f64,
    beta: f64,
    state: &EngineState,
    t_exh_d_now: f64,
    t_exh_d_next: f64,
    t_step: f64,
) -> Result<f64, ControlError> {
    let afi_value = afi(state.afr);
    if afi_value.abs() < AFI_SINGULARITY {
        return Err(ControlError::ZeroInputGain);
    }
    let tau = 2.0 * std::f64::consts::PI / state.omega_e;
    let s1 = state.t_exh - t_exh_d_now;
    Ok((tau / (7.5 * afi_value * t_step))
        * (-alpha_hat * (t_step / tau) * (600.0 * afi_value - state.t_exh)
            - (beta + 1.0) * s1
            + t_exh_d_next
            - t_exh_d_now))
}

/// Exhaust temperature adaptation law.
pub fn adapt_texh(alpha_hat: f64, rho: f64, state: &EngineState, s1: f64, t_step: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI / state.omega_e;
    alpha_hat + t_step * s1 / (tau * rho) * (600.0 * afi(state.afr) - state.t_exh)
}

/// Fuel flow control law.
pub fn control_fuel(
    alpha_hat: f64,
    beta: f64,
    state: &EngineState,
    mdot_f_d_now: f64,
    mdot_f_d_next: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    let s2 = state.mdot_f - mdot_f_d_now;
    (params.tau_f / t_step)
        * (alpha_hat * (t_step / params.tau_f) * state.mdot_f - (beta + 1.0) * s2 + mdot_f_d_next
            - mdot_f_d_now)
}

/// Fuel flow adaptation law.
pub fn adapt_fuel(
    alpha_hat: f64,
    rho: f64,
    state: &EngineState,
    s2: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    alpha_hat - t_step * s2 / (params.tau_f * rho) * state.mdot_f
}

/// Speed control law producing the desired manifold air mass.
pub fn control_speed(
    alpha_hat: f64,
    beta: f64,
    omega_e: f64,
    omega_d_now: f64,
    omega_d_next: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    let s3 = omega_e - omega_d_now;
    (params.j_inertia / (30000.0 * t_step))
        * (alpha_hat * (t_step / params.j_inertia) * (100.0 + 0.4 * omega_e)
            - (beta + 1.0) * s3
            + omega_d_next
            - omega_d_now)
}

/// Speed adaptation law.
pub fn adapt_speed(
    alpha_hat: f64,
    rho: f64,
    omega_e: f64,
    s3: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    alpha_hat - t_step * s3 / (params.j_inertia * rho) * (0.4 * omega_e + 100.0)
}

/// Air mass flow control law.
pub fn control_air(
    alpha_hat: f64,
    beta: f64,
    state: &EngineState,
    m_a_d_now: f64,
    m_a_d_next: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    let s4 = state.m_a - m_a_d_now;
    let ao = mdot_ao(state.m_a, state.omega_e, params);
    (1.0 / t_step)
        * (alpha_hat * ao * t_step - (beta + 1.0) * s4 + m_a_d_next - m_a_d_now)
}

/// Air mass adaptation law.
pub fn adapt_air(
    alpha_hat: f64,
    rho: f64,
    state: &EngineState,
    s4: f64,
    params: &EngineParams,
    t_step: f64,
) -> f64 {
    alpha_hat - t_step * s4 / rho * mdot_ao(state.m_a, state.omega_e, params)
}

impl EngineControllerBank {
    /// Bank from per-channel gains. `first_order` forces every sliding
    /// gain to zero, selecting the deadbeat law on all channels.
    pub fn new(gains: &EngineGains, t_step: f64, first_order: bool, adaptation: bool) -> Self {
        let pick = |g: &ChannelGains| if first_order { 0.0 } else { g.beta };
        EngineControllerBank {
            beta: [
                pick(&gains.texh),
                pick(&gains.fuel),
                pick(&gains.speed),
                pick(&gains.air),
            ],
            rho: [gains.texh.rho, gains.fuel.rho, gains.speed.rho, gains.air.rho],
            alpha_hat: [
                gains.texh.alpha_hat_init,
                gains.fuel.alpha_hat_init,
                gains.speed.alpha_hat_init,
                gains.air.alpha_hat_init,
            ],
            t_step,
            adaptation_enabled: adaptation,
            mad_buffer: None,
            mfd_buffer: None,
        }
    }

    /// Air mass target the speed controller would issue at sample zero.
    /// Used to derive consistent initial conditions.
    pub fn initial_air_target(
        &self,
        omega_e: f64,
        omega_d_now: f64,
        omega_d_next: f64,
        params: &EngineParams,
    ) -> f64 {
        control_speed(
            self.alpha_hat[2],
            self.beta[2],
            omega_e,
            omega_d_now,
            omega_d_next,
            params,
            self.t_step,
        )
    }

    /// Evaluate all four controllers at step `k`, update the estimates
    /// from the step-`k` sliding variables and roll the target buffers.
    pub fn cascade_step(
        &mut self,
        state: &EngineState,
        trajectories: &DesiredTrajectories,
        k: usize,
        params: &EngineParams,
    ) -> Result<CascadeStep, ControlError> {
        let t = self.t_step;
        let t_exh_d = trajectories.t_exh_d[k];
        let t_exh_d_next = trajectories.t_exh_d[k + 1];
        let omega_d = trajectories.omega_d[k];
        let omega_d_next = trajectories.omega_d[k + 1];
        let omega_d_nn = trajectories.omega_d[k + 2];
        let afr_d_next = trajectories.afr_d[k + 1];

        let ao = mdot_ao(state.m_a, state.omega_e, params);

        // exhaust temperature channel
        let s1 = state.t_exh - t_exh_d;
        let f1 = plant::f_texh(state);
        let delta_spark = control_texh(self.alpha_hat[0], self.beta[0], state, t_exh_d, t_exh_d_next, t)?;

        // speed channel; its estimate updates first so the one-step-ahead
        // air target uses the freshest value
        let s3 = state.omega_e - omega_d;
        let f3 = plant::f_speed(state, params);
        let alpha_speed_next = if self.adaptation_enabled {
            let next = adapt_speed(self.alpha_hat[2], self.rho[2], state.omega_e, s3, params, t);
            if !next.is_finite() {
                return Err(ControlError::NonFiniteEstimate);
            }
            next
        } else {
            self.alpha_hat[2]
        };
        let m_a_d = match self.mad_buffer {
            Some(buffered) => buffered,
            None => self.initial_air_target(state.omega_e, omega_d, omega_d_next, params),
        };

        // one-step-ahead speed state under the estimated model, with the
        // actual manifold air mass as the synthetic input
        let omega_pred = state.omega_e + (t / params.j_inertia) * 30000.0 * state.m_a
            - alpha_speed_next * (t / params.j_inertia) * torque_loss(state.omega_e);
        let m_a_d_next = control_speed(
            alpha_speed_next,
            self.beta[2],
            omega_pred,
            omega_d_next,
            omega_d_nn,
            params,
            t,
        );

        // air mass channel
        let s4 = state.m_a - m_a_d;
        let f4 = plant::f_air(state, params);
        let mdot_ai = control_air(self.alpha_hat[3], self.beta[3], state, m_a_d, m_a_d_next, params, t);

        // fuel channel, tracking the desired air-fuel ratio through the
        // predicted cylinder air flow
        let m_a_pred = state.m_a + t * mdot_ai - self.alpha_hat[3] * t * ao;
        let ao_pred = mdot_ao(m_a_pred, omega_pred, params);
        let mdot_f_d = match self.mfd_buffer {
            Some(buffered) => buffered,
            None => desired_fuel(ao, trajectories.afr_d[k])?,
        };
        let mdot_f_d_next = desired_fuel(ao_pred, afr_d_next)?;
        let s2 = state.mdot_f - mdot_f_d;
        let f2 = plant::f_fuel(state, params);
        let mdot_fc = control_fuel(self.alpha_hat[1], self.beta[1], state, mdot_f_d, mdot_f_d_next, params, t);

        let used = self.alpha_hat;
        if self.adaptation_enabled {
            let texh_next = adapt_texh(self.alpha_hat[0], self.rho[0], state, s1, t);
            let fuel_next = adapt_fuel(self.alpha_hat[1], self.rho[1], state, s2, params, t);
            let air_next = adapt_air(self.alpha_hat[3], self.rho[3], state, s4, params, t);
            if !(texh_next.is_finite() && fuel_next.is_finite() && air_next.is_finite()) {
                return Err(ControlError::NonFiniteEstimate);
            }
            self.alpha_hat = [texh_next, fuel_next, alpha_speed_next, air_next];
        }
        self.mad_buffer = Some(m_a_d_next);
        self.mfd_buffer = Some(mdot_f_d_next);

        Ok(CascadeStep {
            inputs: EngineInputs {
                delta_spark,
                mdot_fc,
                mdot_ai,
            },
            s: [s1, s2, s3, s4],
            f_values: [f1, f2, f3, f4],
            alpha_hat: used,
            mdot_f_d,
            m_a_d,
        })
    }
}
