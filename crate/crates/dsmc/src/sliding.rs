//! Generic first/second-order adaptive discrete sliding mode control for a
//! single scalar affine channel.
//!
//! The plant is `x' = alpha*f(x) + g(x)*u` sampled with a forward-Euler step
//! of length `T`, where `alpha` is an unknown constant multiplying the
//! nominal drift. The controller drives the second-order sliding variable
//! `xi(k) = s(k+1) + beta*s(k)` to zero and estimates `alpha` online from
//! the sliding variable. `beta = 0` recovers the first-order (deadbeat)
//! law.

/// Errors raised by the scalar channel operations.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// The input gain `g(x)` evaluated to zero, the control is undefined.
    ZeroInputGain,
    /// A plant step produced a non-finite state.
    NonFiniteState,
    /// An adaptation update produced a non-finite estimate.
    NonFiniteEstimate,
}

impl std::fmt::Display for ChannelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelError::ZeroInputGain => write!(f, "input gain g(x) is zero"),
            ChannelError::NonFiniteState => write!(f, "plant state is not finite"),
            ChannelError::NonFiniteEstimate => write!(f, "uncertainty estimate is not finite"),
        }
    }
}

impl std::error::Error for ChannelError {}

/// One uncertain SISO channel: nominal drift `f`, input gain `g` and the
/// true multiplicative uncertainty acting on `f`.
pub struct ScalarAffinePlant<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    /// Nominal drift term, units of state per second.
    pub f: F,
    /// Input gain, must be non-zero along the trajectory.
    pub g: G,
    /// True multiplicative uncertainty on `f`; 1.0 is the nominal model.
    pub alpha_true: f64,
}

/// Per-channel controller state.
#[derive(Debug, Clone)]
pub struct DsmcChannel {
    /// Sliding gain, `0 <= beta < 1`; zero selects the first-order law.
    pub beta: f64,
    /// Adaptation gain, strictly positive.
    pub rho: f64,
    /// Current estimate of the multiplicative uncertainty.
    pub alpha_hat: f64,
    /// Sampling time in seconds.
    pub t_step: f64,
    /// When false, `update_adaptation` is a no-op.
    pub adaptation_enabled: bool,
}

impl DsmcChannel {
    /// Channel with nominal initial estimate (`alpha_hat = 1`).
    pub fn new(beta: f64, rho: f64, t_step: f64) -> Self {
        DsmcChannel {
            beta,
            rho,
            alpha_hat: 1.0,
            t_step,
            adaptation_enabled: true,
        }
    }
}

/// Record of one closed-loop step.
#[derive(Debug, Clone, Copy)]
pub struct ChannelStep {
    /// Sliding variable at the start of the step, `s(k) = x(k) - x_d(k)`.
    pub s: f64,
    /// Second-order sliding variable `xi(k) = s(k+1) + beta*s(k)`.
    pub xi: f64,
    /// Control input applied over the step.
    pub u: f64,
    /// Nominal drift evaluated at the measured state.
    pub f_value: f64,
    /// Estimate after this step's adaptation update.
    pub alpha_hat_after: f64,
}

/// Sliding variable: tracking error between measured and desired state.
pub fn sliding_variable(x: f64, x_d: f64) -> f64 {
    x - x_d
}

/// Second-order sliding variable `xi(k) = s(k+1) + beta*s(k)`.
pub fn xi_variable(s_next: f64, s: f64, beta: f64) -> f64 {
    s_next + beta * s
}

/// Forward-Euler plant step `x + T*alpha*f(x) + T*g(x)*u`.
pub fn euler_step<F, G>(
    plant: &ScalarAffinePlant<F, G>,
    x: f64,
    u: f64,
    t_step: f64,
) -> Result<f64, ChannelError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let g_value = (plant.g)(x);
    if g_value == 0.0 {
        return Err(ChannelError::ZeroInputGain);
    }
    let next = x + t_step * plant.alpha_true * (plant.f)(x) + t_step * g_value * u;
    if !next.is_finite() {
        return Err(ChannelError::NonFiniteState);
    }
    Ok(next)
}

/// Control input enforcing `s(k+1) = -beta*s(k)` under the estimated model:
/// `u = (1/(g*T)) * (-T*alpha_hat*f - x + x_d(k+1) - beta*s)`.
pub fn compute_control(
    channel: &DsmcChannel,
    x: f64,
    s: f64,
    x_d_next: f64,
    f_value: f64,
    g_value: f64,
) -> Result<f64, ChannelError> {
    if g_value == 0.0 {
        return Err(ChannelError::ZeroInputGain);
    }
    let t = channel.t_step;
    Ok((1.0 / (g_value * t)) * (-t * channel.alpha_hat * f_value - x + x_d_next - channel.beta * s))
}

/// Adaptation update `alpha_hat += s*T*f/rho`, the discrete integrator of
/// the estimation-error recursion. No-op when adaptation is disabled.
pub fn update_adaptation(
    channel: &mut DsmcChannel,
    s: f64,
    f_value: f64,
) -> Result<f64, ChannelError> {
    if channel.adaptation_enabled {
        let next = channel.alpha_hat + s * channel.t_step * f_value / channel.rho;
        if !next.is_finite() {
            return Err(ChannelError::NonFiniteEstimate);
        }
        channel.alpha_hat = next;
    }
    Ok(channel.alpha_hat)
}

/// One full closed-loop step: sense, control with the current estimate,
/// update the estimate from `s(k)`, then advance the plant.
pub fn channel_step<F, G>(
    plant: &ScalarAffinePlant<F, G>,
    channel: &mut DsmcChannel,
    x: f64,
    x_d: f64,
    x_d_next: f64,
) -> Result<(f64, f64, ChannelStep), ChannelError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let s = sliding_variable(x, x_d);
    let f_value = (plant.f)(x);
    let g_value = (plant.g)(x);
    let u = compute_control(channel, x, s, x_d_next, f_value, g_value)?;
    let alpha_hat_after = update_adaptation(channel, s, f_value)?;
    let x_next = euler_step(plant, x, u, channel.t_step)?;
    let step = ChannelStep {
        s,
        xi: xi_variable(sliding_variable(x_next, x_d_next), s, channel.beta),
        u,
        f_value,
        alpha_hat_after,
    };
    Ok((u, x_next, step))
}
