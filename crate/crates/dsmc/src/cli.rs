//! Command-line front end: run, sweep, compare, table1 and validate.
//!
//! Exit codes: 0 success, 1 usage/configuration/IO error, 2 numerical
//! divergence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config_file, ExperimentConfig, OutputSpec};
use crate::csvlog;
use crate::engine::EngineChannel;
use crate::lyapunov::{analyze_trajectory, ChannelTrace, StabilityReport};
use crate::metrics::{compare, MetricsReport, TrackedChannel};
use crate::sim::{self, ControllerOrder, RateMode, SimConfig, SimError, TrajectoryLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

/// Discrete sliding mode control experiments on a spark-ignition engine
/// model.
#[derive(Parser)]
#[command(name = "dsmc", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOverrides {
    /// Experiment configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for logs and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the controller order.
    #[arg(long, value_parser = ["1", "2"])]
    order: Option<String>,
    /// Override the sampling time in milliseconds.
    #[arg(long)]
    sampling_ms: Option<f64>,
    /// Disable the adaptation law.
    #[arg(long)]
    no_adaptation: bool,
    /// Deterministic mode; accepted for forward compatibility, runs are
    /// always seedless.
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its log, metrics and stability report.
    Run(RunOverrides),
    /// Run the base experiment once per value along one axis.
    Sweep {
        #[command(flatten)]
        base: RunOverrides,
        /// Sweep axis: sampling-ms, uncertainty, uncertainty-texh,
        /// uncertainty-fuel, uncertainty-speed, uncertainty-air, beta or
        /// rho-scale.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Compare two log files channel by channel.
    Compare {
        log_a: PathBuf,
        log_b: PathBuf,
        /// Leading window excluded from the means, seconds.
        #[arg(long, default_value_t = 0.0)]
        exclusion_s: f64,
    },
    /// Run the first/second order sampling-time grid and print the
    /// comparison table.
    Table1(RunOverrides),
    /// Parse and validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, String> {
    match path {
        Some(path) => parse_config_file(path).map_err(|e| e.to_string()),
        None => crate::config::parse_config_str("").map_err(|e| e.to_string()),
    }
}

fn apply_overrides(config: &mut ExperimentConfig, overrides: &RunOverrides) {
    if let Some(order) = overrides.order.as_deref() {
        config.sim.order = if order == "1" {
            ControllerOrder::First
        } else {
            ControllerOrder::Second
        };
    }
    if let Some(ms) = overrides.sampling_ms {
        config.sim.t_step = ms / 1000.0;
    }
    if overrides.no_adaptation {
        config.sim.adaptation = false;
    }
}

fn exit_code_for(err: &SimError) -> i32 {
    match err {
        SimError::InvalidConfig(_) => EXIT_CONFIG,
        SimError::DivergedRun { .. } => EXIT_DIVERGED,
    }
}

/// Per-channel stability analysis of an engine run.
pub fn engine_stability_reports(
    log: &TrajectoryLog,
    sim: &SimConfig,
) -> Vec<(EngineChannel, StabilityReport)> {
    let alpha_true = sim.uncertainty.as_array();
    EngineChannel::ALL
        .iter()
        .filter_map(|&ch| {
            let i = ch as usize;
            let gains = sim.gains.channel(ch);
            let beta = match sim.order {
                ControllerOrder::First => 0.0,
                ControllerOrder::Second => gains.beta,
            };
            let trace = ChannelTrace {
                s: log.records.iter().map(|r| r.s[i]).collect(),
                alpha_hat: log.records.iter().map(|r| r.alpha_hat[i]).collect(),
                alpha_true: alpha_true[i],
                beta,
                rho: gains.rho,
            };
            analyze_trajectory(&trace, None).ok().map(|rep| (ch, rep))
        })
        .collect()
}

fn metrics_text(report: &MetricsReport, exclusion_s: f64) -> String {
    let mut out = String::new();
    out.push_str("mean absolute tracking errors\n");
    out.push_str(&format!("settling exclusion: {exclusion_s} s\n"));
    for ch in TrackedChannel::ALL {
        out.push_str(&format!("{:10} {}\n", ch.label(), report.channel(ch)));
    }
    out
}

fn stability_text(reports: &[(EngineChannel, StabilityReport)], t_step: f64) -> String {
    let mut out = String::new();
    out.push_str("per-channel stability report\n");
    for (ch, rep) in reports {
        out.push_str(&format!(
            "[{}] beta_certified={} max_delta_v_after_transient={} convergence_step={} \
             convergence_time_s={} final_alpha_tilde={}\n",
            ch.name(),
            rep.beta_certified,
            rep.max_delta_v_after_transient
                .map_or("n/a".to_string(), |v| format!("{v:e}")),
            rep.adaptation_convergence_step
                .map_or("none".to_string(), |k| k.to_string()),
            rep.adaptation_convergence_step
                .map_or("none".to_string(), |k| format!("{}", k as f64 * t_step)),
            rep.final_alpha_tilde,
        ));
    }
    out
}

fn plot_dat_text(log: &TrajectoryLog) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    out.push_str("# time texh texh_d omega_rpm omega_d_rpm afr afr_d delta mdot_fc mdot_ai\n");
    let to_rpm = 60.0 / (2.0 * std::f64::consts::PI);
    for r in &log.records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            r.time,
            r.texh,
            r.texh_d,
            r.omega_e * to_rpm,
            r.omega_d * to_rpm,
            r.afr,
            r.afr_d,
            r.delta,
            r.mdot_fc,
            r.mdot_ai
        );
    }
    out
}

fn plot_script_text(dat_name: &str) -> String {
    format!(
        "set terminal pngcairo size 900,900\n\
         set output 'tracking.png'\n\
         set multiplot layout 3,1\n\
         set xlabel 'time [s]'\n\
         set ylabel 'Texh [C]'\n\
         plot '{dat_name}' using 1:2 with lines title 'Texh', '' using 1:3 with lines title 'desired'\n\
         set ylabel 'N [RPM]'\n\
         plot '{dat_name}' using 1:4 with lines title 'N', '' using 1:5 with lines title 'desired'\n\
         set ylabel 'AFR [-]'\n\
         plot '{dat_name}' using 1:6 with lines title 'AFR', '' using 1:7 with lines title 'desired'\n\
         unset multiplot\n"
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_run_outputs(
    out_dir: &Path,
    output: &OutputSpec,
    log: &TrajectoryLog,
    sim: &SimConfig,
) -> Result<MetricsReport, String> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let metrics = MetricsReport::from_log(log, sim.settling_exclusion).map_err(|e| e.to_string())?;
    write_file(out_dir, &output.log_csv, &csvlog::write_csv(log))?;
    write_file(out_dir, &output.metrics_txt, &metrics_text(&metrics, sim.settling_exclusion))?;
    let reports = engine_stability_reports(log, sim);
    write_file(out_dir, &output.stability_txt, &stability_text(&reports, log.t_step))?;
    if let Some(dat) = &output.plot_dat {
        write_file(out_dir, dat, &plot_dat_text(log))?;
        if let Some(script) = &output.plot_script {
            write_file(out_dir, script, &plot_script_text(dat))?;
        }
    }
    Ok(metrics)
}

fn cmd_run(overrides: &RunOverrides) -> i32 {
    let mut config = match load_config(overrides.config.as_deref()) {
        Ok(config) => config,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut config, overrides);
    for warning in &config.warnings {
        eprintln!("warning: {warning}");
    }
    let log = match sim::run(&config.sim) {
        Ok(log) => log,
        Err(err) => {
            eprintln!("error: {err}");
            return exit_code_for(&err);
        }
    };
    match write_run_outputs(&overrides.out, &config.output, &log, &config.sim) {
        Ok(metrics) => {
            println!(
                "run complete: {} samples at T = {} s",
                log.records.len(),
                log.t_step
            );
            print!("{}", metrics_text(&metrics, config.sim.settling_exclusion));
            EXIT_OK
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn parse_axis(axis: &str) -> Result<sim::SweepAxis, String> {
    Ok(match axis {
        "sampling-ms" | "sampling_time" => sim::SweepAxis::SamplingMs,
        "uncertainty" => sim::SweepAxis::Uncertainty,
        "uncertainty-texh" => sim::SweepAxis::UncertaintyChannel(EngineChannel::Texh),
        "uncertainty-fuel" => sim::SweepAxis::UncertaintyChannel(EngineChannel::Fuel),
        "uncertainty-speed" => sim::SweepAxis::UncertaintyChannel(EngineChannel::Speed),
        "uncertainty-air" => sim::SweepAxis::UncertaintyChannel(EngineChannel::Air),
        "beta" | "gain" => sim::SweepAxis::Beta,
        "rho-scale" => sim::SweepAxis::RhoScale,
        other => return Err(format!("unknown sweep axis {other:?}")),
    })
}

fn cmd_sweep(base: &RunOverrides, axis: &str, values: &[f64]) -> i32 {
    let mut config = match load_config(base.config.as_deref()) {
        Ok(config) => config,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut config, base);
    let axis = match parse_axis(axis) {
        Ok(axis) => axis,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let results = match sim::sweep(&config.sim, &axis, values) {
        Ok(results) => results,
        Err((value, err)) => {
            eprintln!("error: sweep value {value}: {err}");
            return exit_code_for(&err);
        }
    };
    println!("{:>12}  {:>14}  {:>14}  {:>14}", "value", "AFR [-]", "Texh [C]", "N [RPM]");
    for (value, log) in &results {
        match MetricsReport::from_log(log, config.sim.settling_exclusion) {
            Ok(m) => println!(
                "{:>12}  {:>14.6e}  {:>14.6e}  {:>14.6e}",
                value, m.afr, m.texh_c, m.speed_rpm
            ),
            Err(e) => {
                eprintln!("error: sweep value {value}: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    if let Err(msg) = std::fs::create_dir_all(&base.out)
        .map_err(|e| format!("cannot create {}: {e}", base.out.display()))
        .and_then(|_| {
            for (idx, (_, log)) in results.iter().enumerate() {
                write_file(&base.out, &format!("sweep_{idx:02}.csv"), &csvlog::write_csv(log))?;
            }
            Ok(())
        })
    {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    EXIT_OK
}

fn cmd_compare(log_a: &Path, log_b: &Path, exclusion_s: f64) -> i32 {
    let read = |path: &Path| -> Result<TrajectoryLog, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        csvlog::read_csv(&text).map_err(|e| format!("{}: {e}", path.display()))
    };
    let (a, b) = match (read(log_a), read(log_b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(msg), _) | (_, Err(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let metrics = |log: &TrajectoryLog| MetricsReport::from_log(log, exclusion_s);
    let report = match (metrics(&a), metrics(&b)) {
        (Ok(ma), Ok(mb)) => match compare(&ma, &mb) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    println!("{:>10}  {:>14}  {:>14}  {:>12}", "channel", "mean err A", "mean err B", "improvement");
    for (i, ch) in TrackedChannel::ALL.iter().enumerate() {
        println!(
            "{:>10}  {:>14.6e}  {:>14.6e}  {:>11.1}%",
            ch.label(),
            report.baseline.channel(*ch),
            report.candidate.channel(*ch),
            report.improvement_pct[i]
        );
    }
    EXIT_OK
}

/// Grid cell descriptors for the sampling-time comparison table.
const TABLE1_RATES_MS: [f64; 2] = [10.0, 40.0];

/// One comparison-grid cell: (controller order, sampling time in ms) and
/// the run's mean tracking errors.
pub type Table1Cell = ((ControllerOrder, f64), MetricsReport);

/// Run the 2x2 grid {first, second} x {10 ms, 40 ms} on identical
/// trajectories and return the per-cell metrics. In multirate mode the
/// plant substep duration is held constant across the two rates so both
/// columns integrate the plant with the same fidelity.
pub fn table1_grid(base: &SimConfig) -> Result<Vec<Table1Cell>, (String, SimError)> {
    let base_substep_s = base.t_step / base.rate_mode.substeps() as f64;
    let mut cells = Vec::new();
    for order in [ControllerOrder::First, ControllerOrder::Second] {
        for rate_ms in TABLE1_RATES_MS {
            let mut config = base.clone();
            config.order = order;
            config.t_step = rate_ms / 1000.0;
            if let RateMode::Multirate { .. } = base.rate_mode {
                let substeps = (config.t_step / base_substep_s).round().max(1.0) as u32;
                config.rate_mode = RateMode::Multirate { substeps };
            }
            let label = format!(
                "order {} at {} ms",
                if order == ControllerOrder::First { 1 } else { 2 },
                rate_ms
            );
            let log = sim::run(&config).map_err(|e| (label.clone(), e))?;
            let metrics = MetricsReport::from_log(&log, config.settling_exclusion)
                .map_err(|e| (label, SimError::InvalidConfig(e.to_string())))?;
            cells.push(((order, rate_ms), metrics));
        }
    }
    Ok(cells)
}

/// Render the grid in the layout of the reference table: channels as
/// rows, first/second order columns per sampling time with improvement
/// percentages under the second-order columns.
pub fn table1_text(cells: &[Table1Cell]) -> String {
    let find = |order: ControllerOrder, rate: f64| {
        cells
            .iter()
            .find(|((o, r), _)| *o == order && *r == rate)
            .map(|(_, m)| m)
            .expect("grid cell")
    };
    let mut out = String::new();
    out.push_str("mean tracking errors, first vs second order DSMC\n");
    out.push_str(&format!(
        "{:>10} | {:>12} {:>12} {:>8} | {:>12} {:>12} {:>8}\n",
        "", "1st (10ms)", "2nd (10ms)", "impr", "1st (40ms)", "2nd (40ms)", "impr"
    ));
    for ch in TrackedChannel::ALL {
        let f10 = find(ControllerOrder::First, 10.0).channel(ch);
        let s10 = find(ControllerOrder::Second, 10.0).channel(ch);
        let f40 = find(ControllerOrder::First, 40.0).channel(ch);
        let s40 = find(ControllerOrder::Second, 40.0).channel(ch);
        let impr = |a: f64, b: f64| {
            if a != 0.0 {
                format!("{:+.1}%", -100.0 * (a - b) / a)
            } else {
                "n/a".to_string()
            }
        };
        out.push_str(&format!(
            "{:>10} | {:>12.5e} {:>12.5e} {:>8} | {:>12.5e} {:>12.5e} {:>8}\n",
            ch.label(),
            f10,
            s10,
            impr(f10, s10),
            f40,
            s40,
            impr(f40, s40)
        ));
    }
    out
}

fn cmd_table1(overrides: &RunOverrides) -> i32 {
    let mut config = match load_config(overrides.config.as_deref()) {
        Ok(config) => config,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut config, overrides);
    let cells = match table1_grid(&config.sim) {
        Ok(cells) => cells,
        Err((label, err)) => {
            eprintln!("error: {label}: {err}");
            return exit_code_for(&err);
        }
    };
    let text = table1_text(&cells);
    print!("{text}");
    if let Err(msg) = std::fs::create_dir_all(&overrides.out)
        .map_err(|e| format!("cannot create {}: {e}", overrides.out.display()))
        .and_then(|_| write_file(&overrides.out, "table1.txt", &text))
    {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    EXIT_OK
}

fn cmd_validate(path: &Path) -> i32 {
    match parse_config_file(path) {
        Ok(config) => {
            for warning in &config.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "valid: T = {} s, horizon = {} s, order = {:?}, adaptation = {}, {} steps",
                config.sim.t_step,
                config.sim.horizon,
                config.sim.order,
                config.sim.adaptation,
                config.sim.steps()
            );
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_CONFIG
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Run(overrides) => cmd_run(overrides),
        Command::Sweep { base, axis, values } => cmd_sweep(base, axis, values),
        Command::Compare {
            log_a,
            log_b,
            exclusion_s,
        } => cmd_compare(log_a, log_b, *exclusion_s),
        Command::Table1(overrides) => cmd_table1(overrides),
        Command::Validate { config } => cmd_validate(config),
    }
}
