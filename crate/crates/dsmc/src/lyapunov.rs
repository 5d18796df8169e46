//! Numerical verification of the stability machinery: Lyapunov candidate
//! values, the closed-form difference function, sliding-gain certification
//! and trajectory-level stability reports.

/// Errors from trajectory analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// Fewer than three records; the Lyapunov difference needs two-step
    /// lookahead.
    LogTooShort,
}

impl std::fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnalysisError::LogTooShort => write!(f, "log needs at least 3 records"),
        }
    }
}

impl std::error::Error for AnalysisError {}

/// Per-channel slice of a trajectory log, the input to stability analysis.
#[derive(Debug, Clone)]
pub struct ChannelTrace {
    /// Sliding variable per step.
    pub s: Vec<f64>,
    /// Uncertainty estimate per step.
    pub alpha_hat: Vec<f64>,
    /// True multiplicative uncertainty of the run.
    pub alpha_true: f64,
    /// Sliding gain used by the controller.
    pub beta: f64,
    /// Adaptation gain used by the controller.
    pub rho: f64,
}

/// Stability analysis result for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Whether the sliding gain satisfies the strict stability condition.
    pub beta_certified: bool,
    /// Empirical Lyapunov difference `V(k+1) - V(k)`; length is the log
    /// length minus two.
    pub delta_v_series: Vec<f64>,
    /// Largest empirical difference at or after the transient index.
    pub max_delta_v_after_transient: Option<f64>,
    /// First step where `|alpha_true - alpha_hat|` stays below 5% of
    /// `|alpha_true|` for 50 consecutive steps.
    pub adaptation_convergence_step: Option<usize>,
    /// Estimation error at the last record.
    pub final_alpha_tilde: f64,
}

/// Lyapunov candidate
/// `V = (s_next^2 + beta*s^2)/2 + rho*(atilde_next^2 + beta*atilde^2)/2`.
pub fn lyapunov_value(
    s_next: f64,
    s: f64,
    atilde_next: f64,
    atilde: f64,
    beta: f64,
    rho: f64,
) -> f64 {
    0.5 * (s_next * s_next + beta * s * s)
        + 0.5 * rho * (atilde_next * atilde_next + beta * atilde * atilde)
}

/// Closed-form Lyapunov difference once the estimate has converged:
/// `-beta*(-beta^3 - beta^2 + beta + 1)*s^2/2`.
pub fn delta_v_closed_form(beta: f64, s: f64) -> f64 {
    -0.5 * beta * (-beta * beta * beta - beta * beta + beta + 1.0) * s * s
}

/// True iff `0 < beta < 1` strictly, the asymptotic-stability condition.
pub fn certify_beta(beta: f64) -> bool {
    beta > 0.0 && beta < 1.0
}

/// Number of consecutive in-band steps required to declare convergence.
pub const CONVERGENCE_PERSISTENCE: usize = 50;
/// Convergence band as a fraction of `|alpha_true|`.
pub const CONVERGENCE_FRACTION: f64 = 0.05;

/// First index where the estimation error stays inside the convergence
/// band for [`CONVERGENCE_PERSISTENCE`] steps.
pub fn adaptation_convergence_step(trace: &ChannelTrace) -> Option<usize> {
    let threshold = if trace.alpha_true != 0.0 {
        CONVERGENCE_FRACTION * trace.alpha_true.abs()
    } else {
        CONVERGENCE_FRACTION
    };
    let n = trace.alpha_hat.len();
    if n < CONVERGENCE_PERSISTENCE {
        return None;
    }
    let mut run = 0usize;
    for k in 0..n {
        if (trace.alpha_true - trace.alpha_hat[k]).abs() < threshold {
            run += 1;
            if run == CONVERGENCE_PERSISTENCE {
                return Some(k + 1 - CONVERGENCE_PERSISTENCE);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Empirical per-step Lyapunov differences computed from the logged
/// sliding variable and estimate sequences.
pub fn empirical_delta_v(trace: &ChannelTrace) -> Result<Vec<f64>, AnalysisError> {
    let n = trace.s.len();
    if n < 3 || trace.alpha_hat.len() != n {
        return Err(AnalysisError::LogTooShort);
    }
    let atilde: Vec<f64> = trace.alpha_hat.iter().map(|a| trace.alpha_true - a).collect();
    let v: Vec<f64> = (0..n - 1)
        .map(|k| {
            lyapunov_value(
                trace.s[k + 1],
                trace.s[k],
                atilde[k + 1],
                atilde[k],
                trace.beta,
                trace.rho,
            )
        })
        .collect();
    Ok((0..v.len() - 1).map(|k| v[k + 1] - v[k]).collect())
}

/// Full stability report for one channel trace. When `transient_steps` is
/// `None` the transient is taken to end at the adaptation convergence step
/// (or at zero if the estimate never leaves the convergence band).
pub fn analyze_trajectory(
    trace: &ChannelTrace,
    transient_steps: Option<usize>,
) -> Result<StabilityReport, AnalysisError> {
    let delta_v_series = empirical_delta_v(trace)?;
    let convergence = adaptation_convergence_step(trace);
    let transient = transient_steps.or(convergence).unwrap_or(0);
    let max_delta_v_after_transient = delta_v_series
        .iter()
        .skip(transient)
        .cloned()
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |m| m.max(x))));
    Ok(StabilityReport {
        beta_certified: certify_beta(trace.beta),
        final_alpha_tilde: trace.alpha_true - trace.alpha_hat.last().unwrap(),
        delta_v_series,
        max_delta_v_after_transient,
        adaptation_convergence_step: convergence,
    })
}
