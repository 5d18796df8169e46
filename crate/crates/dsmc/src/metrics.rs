//! Tracking-error metrics over trajectory logs and run-to-run
//! improvement comparisons.

use crate::sim::TrajectoryLog;

/// Tracked outputs reported in the comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackedChannel {
    /// Air-fuel ratio, dimensionless.
    Afr,
    /// Exhaust gas temperature, degrees C.
    TexhC,
    /// Engine speed, RPM.
    SpeedRpm,
}

impl TrackedChannel {
    pub const ALL: [TrackedChannel; 3] =
        [TrackedChannel::Afr, TrackedChannel::TexhC, TrackedChannel::SpeedRpm];

    pub fn label(&self) -> &'static str {
        match self {
            TrackedChannel::Afr => "AFR [-]",
            TrackedChannel::TexhC => "Texh [C]",
            TrackedChannel::SpeedRpm => "N [RPM]",
        }
    }
}

const RAD_S_TO_RPM: f64 = 60.0 / (2.0 * std::f64::consts::PI);

/// Errors from metric computation.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// No records remain after the settling exclusion.
    EmptyLog,
    /// A baseline mean error of zero makes the improvement undefined.
    ZeroBaseline(TrackedChannel),
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricsError::EmptyLog => write!(f, "log has no records in the metric window"),
            MetricsError::ZeroBaseline(ch) => {
                write!(f, "baseline mean error for {} is zero", ch.label())
            }
        }
    }
}

impl std::error::Error for MetricsError {}

/// Mean absolute tracking error for one channel, skipping records inside
/// the settling-exclusion window.
pub fn mean_tracking_error(
    log: &TrajectoryLog,
    channel: TrackedChannel,
    exclusion_s: f64,
) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in &log.records {
        if r.time < exclusion_s {
            continue;
        }
        sum += match channel {
            TrackedChannel::Afr => (r.afr - r.afr_d).abs(),
            TrackedChannel::TexhC => (r.texh - r.texh_d).abs(),
            TrackedChannel::SpeedRpm => ((r.omega_e - r.omega_d) * RAD_S_TO_RPM).abs(),
        };
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::EmptyLog);
    }
    Ok(sum / count as f64)
}

/// Mean tracking errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub afr: f64,
    pub texh_c: f64,
    pub speed_rpm: f64,
}

impl MetricsReport {
    pub fn from_log(log: &TrajectoryLog, exclusion_s: f64) -> Result<Self, MetricsError> {
        Ok(MetricsReport {
            afr: mean_tracking_error(log, TrackedChannel::Afr, exclusion_s)?,
            texh_c: mean_tracking_error(log, TrackedChannel::TexhC, exclusion_s)?,
            speed_rpm: mean_tracking_error(log, TrackedChannel::SpeedRpm, exclusion_s)?,
        })
    }

    pub fn channel(&self, ch: TrackedChannel) -> f64 {
        match ch {
            TrackedChannel::Afr => self.afr,
            TrackedChannel::TexhC => self.texh_c,
            TrackedChannel::SpeedRpm => self.speed_rpm,
        }
    }
}

/// Per-channel improvement of run `b` over baseline run `a`, in percent;
/// positive means `b` tracks better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementReport {
    pub baseline: MetricsReport,
    pub candidate: MetricsReport,
    pub improvement_pct: [f64; 3],
}

/// Compare two runs channel by channel: `100*(e_a - e_b)/e_a`.
pub fn compare(a: &MetricsReport, b: &MetricsReport) -> Result<ImprovementReport, MetricsError> {
    let mut improvement_pct = [0.0; 3];
    for (i, ch) in TrackedChannel::ALL.iter().enumerate() {
        let base = a.channel(*ch);
        if base == 0.0 {
            return Err(MetricsError::ZeroBaseline(*ch));
        }
        improvement_pct[i] = 100.0 * (base - b.channel(*ch)) / base;
    }
    Ok(ImprovementReport {
        baseline: *a,
        candidate: *b,
        improvement_pct,
    })
}
