//! Trajectory log CSV serialization.
//!
//! Fixed 22-column schema, one row per sample. Numbers are written with
//! Rust's shortest round-trip float formatting: plain decimal notation,
//! `.` separator, locale independent, and exact on re-read so metrics
//! recomputed from a file match the in-memory run bit for bit.

use crate::sim::{LogRecord, TrajectoryLog};

/// The pinned header row.
pub const CSV_HEADER: &str = "time,texh,texh_d,mdot_f,mdot_f_d,omega_e,omega_d,m_a,m_a_d,afr,afr_d,s1,s2,s3,s4,alpha_hat_texh,alpha_hat_mf,alpha_hat_we,alpha_hat_ma,delta,mdot_fc,mdot_ai";

const COLUMNS: usize = 22;

/// CSV read failures.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvError {
    /// Header row missing or different from the schema.
    SchemaMismatch(String),
    /// A data row with the wrong column count or an unparsable number.
    BadRow { line: usize, reason: String },
    /// No data rows.
    Empty,
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvError::SchemaMismatch(found) => {
                write!(f, "header does not match the log schema (found {found:?})")
            }
            CsvError::BadRow { line, reason } => write!(f, "line {line}: {reason}"),
            CsvError::Empty => write!(f, "log file has no data rows"),
        }
    }
}

impl std::error::Error for CsvError {}

fn push_row(out: &mut String, r: &LogRecord) {
    use std::fmt::Write;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.time,
        r.texh,
        r.texh_d,
        r.mdot_f,
        r.mdot_f_d,
        r.omega_e,
        r.omega_d,
        r.m_a,
        r.m_a_d,
        r.afr,
        r.afr_d,
        r.s[0],
        r.s[1],
        r.s[2],
        r.s[3],
        r.alpha_hat[0],
        r.alpha_hat[1],
        r.alpha_hat[2],
        r.alpha_hat[3],
        r.delta,
        r.mdot_fc,
        r.mdot_ai
    );
}

/// Serialize a log to CSV text.
pub fn write_csv(log: &TrajectoryLog) -> String {
    let mut out = String::with_capacity(64 * (log.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &log.records {
        push_row(&mut out, r);
    }
    out
}

/// Parse CSV text produced by [`write_csv`]. The sampling time is
/// recovered from the first two rows (zero when only one row exists).
pub fn read_csv(text: &str) -> Result<TrajectoryLog, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim_end() != CSV_HEADER {
        return Err(CsvError::SchemaMismatch(header.chars().take(80).collect()));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = [0.0f64; COLUMNS];
        let mut count = 0;
        for field in line.split(',') {
            if count == COLUMNS {
                return Err(CsvError::BadRow {
                    line: line_no,
                    reason: "too many columns".into(),
                });
            }
            values[count] = field.trim().parse::<f64>().map_err(|_| CsvError::BadRow {
                line: line_no,
                reason: format!("bad number {field:?}"),
            })?;
            count += 1;
        }
        if count != COLUMNS {
            return Err(CsvError::BadRow {
                line: line_no,
                reason: format!("expected {COLUMNS} columns, found {count}"),
            });
        }
        records.push(LogRecord {
            time: values[0],
            texh: values[1],
            texh_d: values[2],
            mdot_f: values[3],
            mdot_f_d: values[4],
            omega_e: values[5],
            omega_d: values[6],
            m_a: values[7],
            m_a_d: values[8],
            afr: values[9],
            afr_d: values[10],
            s: [values[11], values[12], values[13], values[14]],
            alpha_hat: [values[15], values[16], values[17], values[18]],
            delta: values[19],
            mdot_fc: values[20],
            mdot_ai: values[21],
            f_values: [0.0; 4],
        });
    }
    if records.is_empty() {
        return Err(CsvError::Empty);
    }
    let t_step = if records.len() > 1 {
        records[1].time - records[0].time
    } else {
        0.0
    };
    Ok(TrajectoryLog { t_step, records })
}
