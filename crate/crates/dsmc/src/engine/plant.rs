//! Four-state mean-value spark-ignition engine model: exhaust gas
//! temperature, fuel flow into the cylinders, engine speed and intake
//! manifold air mass, with per-state multiplicative uncertainties.
//!
//! Each state advances as `x + T*alpha*f(x) + T*g(x)*u`, so the generic
//! sliding-mode laws apply channel by channel. The `f_*`/`g_*` accessors
//! below are the single source of the per-channel decompositions, shared
//! by the plant step and the controllers.

use std::f64::consts::PI;

/// Errors raised by the plant step.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    /// Engine speed is not positive; the exhaust time constant is singular.
    SingularTimeConstant,
    /// A step produced a non-finite state.
    NonFiniteState,
    /// A step drove the engine speed to zero or below.
    NonPositiveSpeed,
}

impl std::fmt::Display for EngineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineError::SingularTimeConstant => {
                write!(f, "engine speed must be positive (tau_e = 2*pi/omega_e)")
            }
            EngineError::NonFiniteState => write!(f, "engine state is not finite"),
            EngineError::NonPositiveSpeed => write!(f, "engine speed fell to zero or below"),
        }
    }
}

impl std::error::Error for EngineError {}

/// Engine model constants.
#[derive(Debug, Clone, Copy)]
pub struct EngineParams {
    /// Crankshaft inertia, m^2*kg.
    pub j_inertia: f64,
    /// Fuel evaporation time constant, seconds.
    pub tau_f: f64,
    /// Air flow coefficient in the cylinder air flow map.
    pub k1: f64,
    /// Clamp the volumetric efficiency polynomial to [0.05, 1.2] for
    /// exploratory runs outside the calibrated envelope.
    pub eta_vol_clamp: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            j_inertia: 0.1454,
            tau_f: 0.06,
            k1: 0.0254,
            eta_vol_clamp: false,
        }
    }
}

/// Per-state multiplicative uncertainties; 1.0 is the nominal model.
#[derive(Debug, Clone, Copy)]
pub struct EngineUncertainty {
    pub alpha_texh: f64,
    pub alpha_mf: f64,
    pub alpha_we: f64,
    pub alpha_ma: f64,
}

impl Default for EngineUncertainty {
    fn default() -> Self {
        EngineUncertainty {
            alpha_texh: 1.0,
            alpha_mf: 1.0,
            alpha_we: 1.0,
            alpha_ma: 1.0,
        }
    }
}

impl EngineUncertainty {
    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha_texh, self.alpha_mf, self.alpha_we, self.alpha_ma]
    }
}

/// Engine state at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineState {
    /// Exhaust gas temperature, degrees C.
    pub t_exh: f64,
    /// Fuel mass flow into the cylinders, kg/s.
    pub mdot_f: f64,
    /// Engine speed, rad/s, strictly positive.
    pub omega_e: f64,
    /// Intake manifold air mass, kg.
    pub m_a: f64,
    /// Air-fuel ratio, cylinder air flow over fuel flow.
    pub afr: f64,
}

impl EngineState {
    /// Build a state, recomputing the air-fuel ratio from the air flow map.
    pub fn new(
        t_exh: f64,
        mdot_f: f64,
        omega_e: f64,
        m_a: f64,
        params: &EngineParams,
    ) -> Result<Self, EngineError> {
        if omega_e <= 0.0 || omega_e.is_nan() {
            return Err(EngineError::SingularTimeConstant);
        }
        if !(t_exh.is_finite() && mdot_f.is_finite() && m_a.is_finite()) || m_a < 0.0 {
            return Err(EngineError::NonFiniteState);
        }
        let afr = mdot_ao(m_a, omega_e, params) / mdot_f;
        Ok(EngineState {
            t_exh,
            mdot_f,
            omega_e,
            m_a,
            afr,
        })
    }
}

/// Control and exogenous inputs for one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineInputs {
    /// Spark-influence control input to the exhaust temperature channel.
    pub delta_spark: f64,
    /// Commanded fuel flow, kg/s.
    pub mdot_fc: f64,
    /// Intake air inflow, kg/s.
    pub mdot_ai: f64,
}

/// Air-fuel influence factor, `cos(0.13*(AFR - 13.5))`.
pub fn afi(afr: f64) -> f64 {
    (0.13 * (afr - 13.5)).cos()
}

/// Exhaust gas time constant, `2*pi/omega_e`.
pub fn tau_e(omega_e: f64) -> Result<f64, EngineError> {
    if omega_e > 0.0 {
        Ok(2.0 * PI / omega_e)
    } else {
        Err(EngineError::SingularTimeConstant)
    }
}

/// Engine torque, `30000*m_a - 0.4*omega_e - 100`.
pub fn engine_torque(m_a: f64, omega_e: f64) -> f64 {
    30000.0 * m_a - 0.4 * omega_e - 100.0
}

/// Crankshaft torque losses, `0.4*omega_e + 100`.
pub fn torque_loss(omega_e: f64) -> f64 {
    0.4 * omega_e + 100.0
}

/// Volumetric efficiency polynomial in manifold air mass and engine speed.
pub fn eta_vol(m_a: f64, omega_e: f64, params: &EngineParams) -> f64 {
    let w = omega_e;
    let value = m_a * m_a * (-0.1636 * w * w - 7.093 * w - 1750.0)
        + m_a * (0.0029 * w * w - 0.4033 * w + 85.38)
        - (1.06e-5 * w * w - 0.0021 * w - 0.2719);
    if params.eta_vol_clamp {
        value.clamp(0.05, 1.2)
    } else {
        value
    }
}

/// Cylinder air flow, `k1*eta_vol*m_a*omega_e`.
pub fn mdot_ao(m_a: f64, omega_e: f64, params: &EngineParams) -> f64 {
    params.k1 * m_a * omega_e * eta_vol(m_a, omega_e, params)
}

/// Manifold air mass on the ascending branch of the air flow map that
/// delivers `target` kg/s at the given speed. Bisection over the branch
/// up to the map's maximum; used to derive initial conditions from a
/// desired air-fuel ratio.
pub fn m_a_for_air_flow(target: f64, omega_e: f64, params: &EngineParams) -> Option<f64> {
    if target <= 0.0 || omega_e <= 0.0 {
        return None;
    }
    // locate the ascending-branch peak by coarse scan
    let mut peak_m = 0.0;
    let mut peak_v = 0.0;
    for i in 1..=500 {
        let m = 0.05 * i as f64 / 500.0;
        let v = mdot_ao(m, omega_e, params);
        if v > peak_v {
            peak_v = v;
            peak_m = m;
        }
    }
    if target > peak_v {
        return None;
    }
    let (mut lo, mut hi) = (0.0, peak_m);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mdot_ao(mid, omega_e, params) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Nominal drift of the exhaust temperature channel,
/// `(600*AFI - T_exh)/tau_e`.
pub fn f_texh(state: &EngineState) -> f64 {
    (600.0 * afi(state.afr) - state.t_exh) * state.omega_e / (2.0 * PI)
}

/// Input gain of the exhaust temperature channel, `7.5*AFI/tau_e`.
pub fn g_texh(state: &EngineState) -> f64 {
    7.5 * afi(state.afr) * state.omega_e / (2.0 * PI)
}

/// Nominal drift of the fuel flow channel, `-mdot_f/tau_f`.
pub fn f_fuel(state: &EngineState, params: &EngineParams) -> f64 {
    -state.mdot_f / params.tau_f
}

/// Input gain of the fuel flow channel, `1/tau_f`.
pub fn g_fuel(params: &EngineParams) -> f64 {
    1.0 / params.tau_f
}

/// Nominal drift of the speed channel, `-T_loss/J`.
pub fn f_speed(state: &EngineState, params: &EngineParams) -> f64 {
    -torque_loss(state.omega_e) / params.j_inertia
}

/// Input gain of the speed channel with `m_a` as the synthetic input,
/// `30000/J`.
pub fn g_speed(params: &EngineParams) -> f64 {
    30000.0 / params.j_inertia
}

/// Nominal drift of the air mass channel, `-mdot_ao`.
pub fn f_air(state: &EngineState, params: &EngineParams) -> f64 {
    -mdot_ao(state.m_a, state.omega_e, params)
}

/// Input gain of the air mass channel.
pub fn g_air() -> f64 {
    1.0
}

/// Advance all four states one Euler step with the uncertainties applied
/// to the nominal drift terms. AFI is evaluated at the current air-fuel
/// ratio; the ratio itself is recomputed after the step.
pub fn step_engine(
    state: &EngineState,
    inputs: &EngineInputs,
    unc: &EngineUncertainty,
    params: &EngineParams,
    t_step: f64,
) -> Result<EngineState, EngineError> {
    if state.omega_e <= 0.0 || state.omega_e.is_nan() {
        return Err(EngineError::SingularTimeConstant);
    }
    let t_exh =
        state.t_exh + t_step * unc.alpha_texh * f_texh(state) + t_step * g_texh(state) * inputs.delta_spark;
    let mdot_f = state.mdot_f
        + t_step * unc.alpha_mf * f_fuel(state, params)
        + t_step * g_fuel(params) * inputs.mdot_fc;
    let omega_e = state.omega_e
        + t_step * unc.alpha_we * f_speed(state, params)
        + t_step * g_speed(params) * state.m_a;
    let m_a =
        state.m_a + t_step * unc.alpha_ma * f_air(state, params) + t_step * g_air() * inputs.mdot_ai;
    if !(t_exh.is_finite() && mdot_f.is_finite() && omega_e.is_finite() && m_a.is_finite()) {
        return Err(EngineError::NonFiniteState);
    }
    if omega_e <= 0.0 {
        return Err(EngineError::NonPositiveSpeed);
    }
    let afr = mdot_ao(m_a, omega_e, params) / mdot_f;
    Ok(EngineState {
        t_exh,
        mdot_f,
        omega_e,
        m_a,
        afr,
    })
}
