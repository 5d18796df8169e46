//! Cross-module invariants: plant-model fidelity against an independent
//! transcription, equivalence of the specialized engine laws with the
//! generic channel laws, closed-loop sliding identities and Lyapunov
//! bookkeeping reconstructed from run logs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dsmc::config::default_gains;
use dsmc::engine::control::{
    adapt_air, adapt_fuel, adapt_speed, adapt_texh, control_air, control_fuel, control_speed,
    control_texh,
};
use dsmc::engine::plant::{
    self, afi, eta_vol, mdot_ao, step_engine, EngineInputs, EngineParams, EngineState,
    EngineUncertainty,
};
use dsmc::engine::EngineChannel;
use dsmc::lyapunov::{analyze_trajectory, delta_v_closed_form, ChannelTrace};
use dsmc::profile::Profile;
use dsmc::sim::{self, ControllerOrder, InitialState, RateMode, SimConfig};
use dsmc::sliding::{compute_control, update_adaptation, DsmcChannel};

const PARAMS: EngineParams = EngineParams {
    j_inertia: 0.1454,
    tau_f: 0.06,
    k1: 0.0254,
    eta_vol_clamp: false,
};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-30)
}

/// Literal transcription of the four discretized difference equations,
/// kept independent of the library's decomposition-based step.
fn transcription_step(
    state: &EngineState,
    inputs: &EngineInputs,
    t: f64,
) -> (f64, f64, f64, f64) {
    let tau_e = 2.0 * std::f64::consts::PI / state.omega_e;
    let afi_value = (0.13 * (state.afr - 13.5)).cos();
    let t_exh = (1.0 - t / tau_e) * state.t_exh
        + (t / tau_e) * (7.5 * inputs.delta_spark + 600.0) * afi_value;
    let mdot_f = state.mdot_f + (t / 0.06) * (inputs.mdot_fc - state.mdot_f);
    let torque = 30000.0 * state.m_a - (0.4 * state.omega_e + 100.0);
    let omega_e = state.omega_e + (t / 0.1454) * torque;
    let w = state.omega_e;
    let eta = state.m_a * state.m_a * (-0.1636 * w * w - 7.093 * w - 1750.0)
        + state.m_a * (0.0029 * w * w - 0.4033 * w + 85.38)
        - (1.06e-5 * w * w - 0.0021 * w - 0.2719);
    let mdot_ao = 0.0254 * state.m_a * w * eta;
    let m_a = state.m_a + t * (inputs.mdot_ai - mdot_ao);
    (t_exh, mdot_f, omega_e, m_a)
}

fn random_state(rng: &mut impl Rng) -> EngineState {
    EngineState::new(
        rng.gen_range(10.0..500.0),
        rng.gen_range(1e-4..3e-3),
        rng.gen_range(50.0..300.0),
        rng.gen_range(1e-3..1.2e-2),
        &PARAMS,
    )
    .unwrap()
}

fn random_inputs(rng: &mut impl Rng) -> EngineInputs {
    EngineInputs {
        delta_spark: rng.gen_range(-80.0..80.0),
        mdot_fc: rng.gen_range(0.0..3e-3),
        mdot_ai: rng.gen_range(-0.05..0.05),
    }
}

#[test]
fn nominal_step_matches_transcription_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let nominal = EngineUncertainty::default();
    for _ in 0..1000 {
        let state = random_state(&mut rng);
        let inputs = random_inputs(&mut rng);
        let t = rng.gen_range(0.001..0.05);
        let next = step_engine(&state, &inputs, &nominal, &PARAMS, t).unwrap();
        let (t_exh, mdot_f, omega_e, m_a) = transcription_step(&state, &inputs, t);
        assert!(rel_close(next.t_exh, t_exh, 1e-12));
        assert!(rel_close(next.mdot_f, mdot_f, 1e-12));
        assert!(rel_close(next.omega_e, omega_e, 1e-12));
        assert!(rel_close(next.m_a, m_a, 1e-12));
    }
}

#[test]
fn step_decomposes_into_channel_f_and_g() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let state = random_state(&mut rng);
        let inputs = random_inputs(&mut rng);
        let unc = EngineUncertainty {
            alpha_texh: rng.gen_range(0.5..1.5),
            alpha_mf: rng.gen_range(0.5..1.5),
            alpha_we: rng.gen_range(0.5..1.5),
            alpha_ma: rng.gen_range(0.5..1.5),
        };
        let t = rng.gen_range(0.001..0.05);
        let next = match step_engine(&state, &inputs, &unc, &PARAMS, t) {
            Ok(next) => next,
            Err(_) => continue, // speed can hit zero for extreme draws
        };
        let expect = [
            state.t_exh
                + t * unc.alpha_texh * plant::f_texh(&state)
                + t * plant::g_texh(&state) * inputs.delta_spark,
            state.mdot_f
                + t * unc.alpha_mf * plant::f_fuel(&state, &PARAMS)
                + t * plant::g_fuel(&PARAMS) * inputs.mdot_fc,
            state.omega_e
                + t * unc.alpha_we * plant::f_speed(&state, &PARAMS)
                + t * plant::g_speed(&PARAMS) * state.m_a,
            state.m_a
                + t * unc.alpha_ma * plant::f_air(&state, &PARAMS)
                + t * plant::g_air() * inputs.mdot_ai,
        ];
        let got = [next.t_exh, next.mdot_f, next.omega_e, next.m_a];
        for i in 0..4 {
            assert!(rel_close(got[i], expect[i], 1e-12), "channel {i}");
        }
    }
}

#[test]
fn specialized_laws_equal_generic_channel_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let state = random_state(&mut rng);
        let t = rng.gen_range(0.005..0.04);
        let beta = rng.gen_range(0.0..0.95);
        let rho = rng.gen_range(0.1..100.0);
        let alpha_hat = rng.gen_range(0.5..1.5);
        let channel = DsmcChannel {
            beta,
            rho,
            alpha_hat,
            t_step: t,
            adaptation_enabled: true,
        };

        // exhaust temperature
        let (d_now, d_next) = (rng.gen_range(0.0..450.0), rng.gen_range(0.0..450.0));
        let s1 = state.t_exh - d_now;
        let specialized = control_texh(alpha_hat, beta, &state, d_now, d_next, t).unwrap();
        let generic = compute_control(
            &channel,
            state.t_exh,
            s1,
            d_next,
            plant::f_texh(&state),
            plant::g_texh(&state),
        )
        .unwrap();
        assert!(rel_close(specialized, generic, 1e-12));
        let mut adapted = channel.clone();
        update_adaptation(&mut adapted, s1, plant::f_texh(&state)).unwrap();
        assert!(rel_close(adapt_texh(alpha_hat, rho, &state, s1, t), adapted.alpha_hat, 1e-13));

        // fuel flow
        let (f_now, f_next) = (rng.gen_range(1e-4..2e-3), rng.gen_range(1e-4..2e-3));
        let s2 = state.mdot_f - f_now;
        let specialized = control_fuel(alpha_hat, beta, &state, f_now, f_next, &PARAMS, t);
        let generic = compute_control(
            &channel,
            state.mdot_f,
            s2,
            f_next,
            plant::f_fuel(&state, &PARAMS),
            plant::g_fuel(&PARAMS),
        )
        .unwrap();
        assert!(rel_close(specialized, generic, 1e-12));
        let mut adapted = channel.clone();
        update_adaptation(&mut adapted, s2, plant::f_fuel(&state, &PARAMS)).unwrap();
        assert!(rel_close(
            adapt_fuel(alpha_hat, rho, &state, s2, &PARAMS, t),
            adapted.alpha_hat,
            1e-13
        ));

        // engine speed with the air mass as synthetic input
        let (w_now, w_next) = (rng.gen_range(60.0..200.0), rng.gen_range(60.0..200.0));
        let s3 = state.omega_e - w_now;
        let specialized =
            control_speed(alpha_hat, beta, state.omega_e, w_now, w_next, &PARAMS, t);
        let generic = compute_control(
            &channel,
            state.omega_e,
            s3,
            w_next,
            plant::f_speed(&state, &PARAMS),
            plant::g_speed(&PARAMS),
        )
        .unwrap();
        assert!(rel_close(specialized, generic, 1e-12));
        let mut adapted = channel.clone();
        update_adaptation(&mut adapted, s3, plant::f_speed(&state, &PARAMS)).unwrap();
        assert!(rel_close(
            adapt_speed(alpha_hat, rho, state.omega_e, s3, &PARAMS, t),
            adapted.alpha_hat,
            1e-13
        ));

        // intake air mass
        let (a_now, a_next) = (rng.gen_range(1e-3..1.2e-2), rng.gen_range(1e-3..1.2e-2));
        let s4 = state.m_a - a_now;
        let specialized = control_air(alpha_hat, beta, &state, a_now, a_next, &PARAMS, t);
        let generic = compute_control(
            &channel,
            state.m_a,
            s4,
            a_next,
            plant::f_air(&state, &PARAMS),
            plant::g_air(),
        )
        .unwrap();
        assert!(rel_close(specialized, generic, 1e-12));
        let mut adapted = channel.clone();
        update_adaptation(&mut adapted, s4, plant::f_air(&state, &PARAMS)).unwrap();
        assert!(rel_close(
            adapt_air(alpha_hat, rho, &state, s4, &PARAMS, t),
            adapted.alpha_hat,
            1e-13
        ));
    }
}

fn engine_config() -> SimConfig {
    SimConfig {
        t_step: 0.01,
        horizon: 6.0,
        order: ControllerOrder::Second,
        adaptation: false,
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

#[test]
fn matched_engine_channels_decay_geometrically() {
    // exhaust temperature: offset decays with its own beta, no leakage
    // into the other channels
    let mut config = engine_config();
    config.initial = InitialState::Consistent { texh_offset: -5.0 };
    let log = sim::run(&config).unwrap();
    let beta = config.gains.texh.beta;
    for k in 0..60 {
        let expect = -5.0 * (-beta).powi(k as i32);
        let got = log.records[k].s[0];
        assert!(
            (got - expect).abs() <= 1e-9 * 5.0,
            "k={k}: {got} vs {expect}"
        );
        for i in 1..4 {
            assert!(log.records[k].s[i].abs() < 1e-9, "channel {i} leaked");
        }
    }

    // manifold air mass: explicit offset decays with the air channel's
    // beta; the speed channel sees the physical coupling but stays small
    let mut config = engine_config();
    let m_a_consistent = 0.004533333333333334;
    config.initial = InitialState::Explicit {
        t_exh: 25.0,
        mdot_f: 4.4556112223199273e-4,
        omega_e: 90.0,
        m_a: Some(m_a_consistent + 2e-4),
    };
    let log = sim::run(&config).unwrap();
    let beta = config.gains.air.beta;
    let s40 = log.records[0].s[3];
    assert!((s40 - 2e-4).abs() < 1e-5);
    for k in 0..30 {
        let expect = s40 * (-beta).powi(k as i32);
        let got = log.records[k].s[3];
        assert!(
            (got - expect).abs() <= 1e-6 * s40.abs(),
            "k={k}: {got} vs {expect}"
        );
    }
}

#[test]
fn sliding_identity_reconstructed_from_logs() {
    // xi(k) = s(k+1) + beta*s(k) = T * f(k) * alpha_tilde(k), checked per
    // channel with that channel's uncertainty active alone
    for (channel, unc) in [
        (
            EngineChannel::Texh,
            EngineUncertainty {
                alpha_texh: 1.25,
                ..Default::default()
            },
        ),
        (
            EngineChannel::Fuel,
            EngineUncertainty {
                alpha_mf: 1.25,
                ..Default::default()
            },
        ),
        (
            EngineChannel::Air,
            EngineUncertainty {
                alpha_ma: 1.25,
                ..Default::default()
            },
        ),
    ] {
        let mut config = engine_config();
        config.adaptation = true;
        config.uncertainty = unc;
        config.horizon = 2.0;
        let log = sim::run(&config).unwrap();
        let i = channel as usize;
        let alpha_true = unc.as_array()[i];
        let beta = config.gains.channel(channel).beta;
        let mut checked = 0;
        for k in 0..log.records.len() - 1 {
            let r = &log.records[k];
            let xi = log.records[k + 1].s[i] + beta * r.s[i];
            let expect = config.t_step * r.f_values[i] * (alpha_true - r.alpha_hat[i]);
            if expect.abs() > 1e-12 {
                assert!(
                    rel_close(xi, expect, 1e-9),
                    "{}: k={k} xi={xi} expect={expect}",
                    channel.name()
                );
                checked += 1;
            }
        }
        assert!(checked > 10, "{}: identity never exercised", channel.name());
    }
}

#[test]
fn fuel_and_speed_offsets_decay_geometrically() {
    // fuel: start off the AFR-derived target with everything else on target
    let mut config = engine_config();
    config.omega_profile = Profile::constant(90.0);
    config.texh_profile = Profile::constant(25.0);
    let m_a_consistent = 0.004533333333333334;
    let mdot_f_consistent = 4.4556112223199273e-4;
    config.initial = InitialState::Explicit {
        t_exh: 25.0,
        mdot_f: mdot_f_consistent + 5e-5,
        omega_e: 90.0,
        m_a: Some(m_a_consistent),
    };
    let log = sim::run(&config).unwrap();
    let beta = config.gains.fuel.beta;
    let s20 = log.records[0].s[1];
    assert!((s20 - 5e-5).abs() < 1e-12);
    for k in 0..25 {
        let expect = s20 * (-beta).powi(k as i32);
        assert!(
            (log.records[k].s[1] - expect).abs() <= 1e-6 * s20.abs(),
            "k={k}"
        );
    }

    // speed: start above the setpoint with the air mass on the target the
    // speed controller issues at that state
    let mut config = engine_config();
    config.omega_profile = Profile::constant(90.0);
    config.texh_profile = Profile::constant(25.0);
    let omega0 = 91.0;
    let gains = config.gains.speed;
    let m_a0 = (PARAMS.j_inertia / (30000.0 * config.t_step))
        * (gains.alpha_hat_init * (config.t_step / PARAMS.j_inertia)
            * (100.0 + 0.4 * omega0)
            - (gains.beta + 1.0) * (omega0 - 90.0));
    config.initial = InitialState::Explicit {
        t_exh: 25.0,
        mdot_f: mdot_f_consistent,
        omega_e: omega0,
        m_a: Some(m_a0),
    };
    let log = sim::run(&config).unwrap();
    let beta = config.gains.speed.beta;
    for k in 0..25 {
        let expect = 1.0 * (-beta).powi(k as i32);
        assert!(
            (log.records[k].s[2] - expect).abs() <= 1e-6,
            "k={k}: {} vs {expect}",
            log.records[k].s[2]
        );
    }
}

#[test]
fn uncertainty_sweep_separates_convergence_steps() {
    let mut base = engine_config();
    base.adaptation = true;
    base.omega_profile = Profile::constant(90.0);
    base.texh_profile = Profile::constant(25.0);
    base.horizon = 4.0;
    let results = sim::sweep(
        &base,
        &sim::SweepAxis::UncertaintyChannel(EngineChannel::Texh),
        &[1.0, 1.25],
    )
    .unwrap();
    let step_of = |log: &sim::TrajectoryLog, alpha_true: f64| {
        let trace = ChannelTrace {
            s: log.records.iter().map(|r| r.s[0]).collect(),
            alpha_hat: log.records.iter().map(|r| r.alpha_hat[0]).collect(),
            alpha_true,
            beta: base.gains.texh.beta,
            rho: base.gains.texh.rho,
        };
        dsmc::lyapunov::adaptation_convergence_step(&trace)
    };
    // nominal model: the estimate is in band from the first sample
    assert_eq!(step_of(&results[0].1, 1.0), Some(0));
    // 25% error: convergence takes a finite number of steps
    let step = step_of(&results[1].1, 1.25).expect("no convergence");
    assert!(step > 0, "converged instantly despite model error");
}

#[test]
fn single_element_sweep_equals_plain_run() {
    let base = engine_config();
    let swept = sim::sweep(&base, &sim::SweepAxis::SamplingMs, &[10.0]).unwrap();
    let direct = sim::run(&base).unwrap();
    assert_eq!(swept[0].1, direct);
}

#[test]
fn adaptation_updates_integrate_exactly() {
    // summing the per-step increments reconstructs the logged estimate
    let mut config = engine_config();
    config.adaptation = true;
    config.uncertainty.alpha_texh = 1.25;
    config.horizon = 3.0;
    let log = sim::run(&config).unwrap();
    let rho = config.gains.texh.rho;
    let mut acc = log.records[0].alpha_hat[0];
    for k in 1..log.records.len() {
        let prev = &log.records[k - 1];
        acc += prev.s[0] * config.t_step * prev.f_values[0] / rho;
        let logged = log.records[k].alpha_hat[0];
        assert!(
            (acc - logged).abs() <= 1e-12 * logged.abs().max(1.0),
            "k={k}"
        );
    }
    let drift: f64 = acc - log.records[0].alpha_hat[0];
    let total = log.records.last().unwrap().alpha_hat[0] - log.records[0].alpha_hat[0];
    assert!(rel_close(drift, total, 1e-12));
}

#[test]
fn afr_stays_consistent_with_air_flow_along_runs() {
    let mut config = engine_config();
    config.adaptation = true;
    config.uncertainty = EngineUncertainty {
        alpha_texh: 1.2,
        alpha_mf: 0.8,
        alpha_we: 1.1,
        alpha_ma: 0.9,
    };
    let log = sim::run(&config).unwrap();
    for r in &log.records {
        if r.mdot_f > 1e-9 {
            let ao = mdot_ao(r.m_a, r.omega_e, &PARAMS);
            assert!(rel_close(r.afr * r.mdot_f, ao, 1e-12), "t = {}", r.time);
        }
    }
}

#[test]
fn matched_log_analysis_matches_closed_form() {
    let mut config = engine_config();
    config.initial = InitialState::Consistent { texh_offset: -5.0 };
    config.horizon = 4.0;
    let log = sim::run(&config).unwrap();
    let beta = config.gains.texh.beta;
    let trace = ChannelTrace {
        s: log.records.iter().map(|r| r.s[0]).collect(),
        alpha_hat: log.records.iter().map(|r| r.alpha_hat[0]).collect(),
        alpha_true: 1.0,
        beta,
        rho: config.gains.texh.rho,
    };
    let report = analyze_trajectory(&trace, Some(0)).unwrap();
    assert_eq!(report.delta_v_series.len(), log.records.len() - 2);
    for (k, dv) in report.delta_v_series.iter().enumerate() {
        assert!(*dv <= 1e-9, "dV({k}) = {dv}");
        let cf = delta_v_closed_form(beta, trace.s[k]);
        if cf.abs() > 1e-12 {
            assert!(rel_close(*dv, cf, 1e-6), "k={k}: {dv} vs {cf}");
        }
    }
}

#[test]
fn eta_vol_is_finite_over_the_exploration_envelope() {
    for i in 0..=60 {
        for j in 0..=60 {
            let m_a = 0.05 * i as f64 / 60.0;
            let w = 50.0 + 550.0 * j as f64 / 60.0;
            assert!(eta_vol(m_a, w, &PARAMS).is_finite());
            assert!(afi(10.0 + 0.2 * j as f64).is_finite());
        }
    }
}
