//! Piecewise desired-trajectory profiles.
//!
//! A profile is a whitespace-separated list of segments played back to
//! back, holding the last value forever afterwards:
//!
//! ```text
//! const(90, 1)  ramp(90, 105, 5)  hold
//! ```
//!
//! Segments: `const(value, duration_s)`, `ramp(from, to, duration_s)`,
//! `smoothstep(from, to, duration_s)` and a final optional `hold`.

/// One profile segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Const { value: f64, duration: f64 },
    Ramp { from: f64, to: f64, duration: f64 },
    Smoothstep { from: f64, to: f64, duration: f64 },
}

impl Segment {
    fn duration(&self) -> f64 {
        match self {
            Segment::Const { duration, .. }
            | Segment::Ramp { duration, .. }
            | Segment::Smoothstep { duration, .. } => *duration,
        }
    }

    fn value_at(&self, t: f64) -> f64 {
        match self {
            Segment::Const { value, .. } => *value,
            Segment::Ramp { from, to, duration } => from + (to - from) * (t / duration),
            Segment::Smoothstep { from, to, duration } => {
                let x = (t / duration).clamp(0.0, 1.0);
                from + (to - from) * x * x * (3.0 - 2.0 * x)
            }
        }
    }

    fn end_value(&self) -> f64 {
        match self {
            Segment::Const { value, .. } => *value,
            Segment::Ramp { to, .. } | Segment::Smoothstep { to, .. } => *to,
        }
    }
}

/// A sampled desired-value profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    segments: Vec<Segment>,
}

/// Parse failure with a human-readable reason.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileParseError(pub String);

impl std::fmt::Display for ProfileParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid profile: {}", self.0)
    }
}

impl std::error::Error for ProfileParseError {}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile {
            segments: vec![Segment::Const {
                value,
                duration: f64::INFINITY,
            }],
        }
    }

    /// Parse a profile expression.
    pub fn parse(text: &str) -> Result<Self, ProfileParseError> {
        let mut segments = Vec::new();
        let mut rest = text.trim();
        if rest.is_empty() {
            return Err(ProfileParseError("empty profile".into()));
        }
        while !rest.is_empty() {
            if let Some(tail) = rest.strip_prefix("hold") {
                let tail = tail.trim_start();
                if !tail.is_empty() {
                    return Err(ProfileParseError("hold must be the last segment".into()));
                }
                if segments.is_empty() {
                    return Err(ProfileParseError("hold needs a preceding segment".into()));
                }
                rest = tail;
                continue;
            }
            let open = rest
                .find('(')
                .ok_or_else(|| ProfileParseError(format!("expected segment, found {rest:?}")))?;
            let name = rest[..open].trim();
            let close = rest[open..]
                .find(')')
                .map(|i| open + i)
                .ok_or_else(|| ProfileParseError(format!("unclosed parenthesis in {rest:?}")))?;
            let args: Vec<f64> = rest[open + 1..close]
                .split(',')
                .map(|a| {
                    let a = a.trim();
                    a.parse::<f64>()
                        .map_err(|_| ProfileParseError(format!("bad number {a:?}")))
                })
                .collect::<Result<_, _>>()?;
            let finite = |v: f64, what: &str| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ProfileParseError(format!("{what} must be finite")))
                }
            };
            let duration = |v: f64| {
                if v.is_finite() && v > 0.0 {
                    Ok(v)
                } else {
                    Err(ProfileParseError("duration must be positive".into()))
                }
            };
            let segment = match (name, args.len()) {
                ("const", 2) => Segment::Const {
                    value: finite(args[0], "value")?,
                    duration: duration(args[1])?,
                },
                ("ramp", 3) => Segment::Ramp {
                    from: finite(args[0], "from")?,
                    to: finite(args[1], "to")?,
                    duration: duration(args[2])?,
                },
                ("smoothstep", 3) => Segment::Smoothstep {
                    from: finite(args[0], "from")?,
                    to: finite(args[1], "to")?,
                    duration: duration(args[2])?,
                },
                _ => {
                    return Err(ProfileParseError(format!(
                        "unknown segment {name:?} with {} arguments",
                        args.len()
                    )))
                }
            };
            segments.push(segment);
            rest = rest[close + 1..].trim_start();
        }
        Ok(Profile { segments })
    }

    /// Value at time `t` seconds; the last segment's end value holds
    /// beyond the profile.
    pub fn sample(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for segment in &self.segments {
            let d = segment.duration();
            if t < start + d {
                return segment.value_at(t - start);
            }
            start += d;
        }
        self.segments.last().unwrap().end_value()
    }

    /// `n` samples at spacing `t_step`, starting at zero.
    pub fn sample_series(&self, t_step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.sample(k as f64 * t_step)).collect()
    }

    /// Shortest finite segment duration, for sampling-rate validation.
    pub fn shortest_feature(&self) -> Option<f64> {
        self.segments
            .iter()
            .map(|s| s.duration())
            .filter(|d| d.is_finite())
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.min(d))))
    }
}
