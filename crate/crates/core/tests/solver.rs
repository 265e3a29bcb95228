use std::collections::BTreeMap;

use neuroage_core::analysis::{measure, MeasureOptions};
use neuroage_core::{
    build_ah, dc_operating_point, kcl_residual, parse_netlist, transient, transient_from,
    transient_observed, AhParams, CircuitState, Companion, Control, InitialState, Integrator,
    SolverError, StepView, TransientConfig,
};

fn nodes(pairs: &[(&str, f64)]) -> InitialState {
    InitialState::Nodes(
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
    )
}

fn last(wf: &neuroage_core::Waveform, node: &str) -> f64 {
    *wf.voltage(node).unwrap().last().unwrap()
}

#[test]
fn ohms_law_fixture() {
    let n = parse_netlist("I1 0 a 1m\nR1 a 0 2k\n").unwrap();
    let s = dc_operating_point(&n).unwrap();
    // gmin = 1e-12 S sits in parallel with R
    let expected = 1e-3 / (1.0 / 2e3 + TransientConfig::default().gmin);
    assert!((s.voltage(&n, "a").unwrap() - expected).abs() < 1e-12);
    assert!((s.voltage(&n, "a").unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn ah_rest_state() {
    let n = build_ah(&AhParams {
        i_inj: 0.0,
        ..Default::default()
    })
    .unwrap();
    let s = dc_operating_point(&n).unwrap();
    let mem = s.voltage(&n, "mem").unwrap();
    let spk = s.voltage(&n, "spk").unwrap();
    // inverter 1 trips near v_dd / 2 with the 2:1 PMOS sizing
    assert!(mem < 0.3, "mem = {mem}");
    assert!(spk < 0.05, "spk = {spk}");
    assert!(s.voltage(&n, "inv1").unwrap() > 1.0);
}

#[test]
fn dead_network() {
    let n = parse_netlist("V1 a 0 0\nR1 a b 1k\nC1 b 0 1p\nI1 0 b 0\n").unwrap();
    let s = dc_operating_point(&n).unwrap();
    for v in &s.voltages {
        assert!(v.abs() <= TransientConfig::default().v_abstol);
    }
}

#[test]
fn capacitor_ramp_both_integrators() {
    let n = parse_netlist("I1 0 a 1u\nC1 a 0 1p\n").unwrap();
    for integrator in [Integrator::BackwardEuler, Integrator::Trapezoidal] {
        let cfg = TransientConfig {
            t_stop: 1e-6,
            dt: 1e-9,
            integrator,
            ..Default::default()
        };
        let (wf, _) = transient_from(&n, &cfg, &nodes(&[("a", 0.0)])).unwrap();
        assert!((wf.time.last().unwrap() - 1e-6).abs() < 1e-15);
        let v = last(&wf, "a");
        assert!((v - 1.0).abs() < 1e-3, "{integrator:?}: {v}");
    }
}

#[test]
fn rc_discharge_trapezoidal() {
    let n = parse_netlist("R1 a 0 1meg\nC1 a 0 1p\n").unwrap();
    let tau = 1e-6;
    let cfg = TransientConfig {
        t_stop: tau,
        dt: tau / 1000.0,
        integrator: Integrator::Trapezoidal,
        ..Default::default()
    };
    let (wf, _) = transient_from(&n, &cfg, &nodes(&[("a", 1.0)])).unwrap();
    let v = last(&wf, "a");
    // exp(-1) from an independent evaluation
    let exact = 0.36787944117144233;
    assert!((v / exact - 1.0).abs() < 1e-3, "{v}");
}

#[test]
fn rc_discharge_backward_euler_converges() {
    let n = parse_netlist("R1 a 0 1meg\nC1 a 0 1p\n").unwrap();
    let err = |dt: f64| {
        let cfg = TransientConfig {
            t_stop: 1e-6,
            dt,
            ..Default::default()
        };
        let (wf, _) = transient_from(&n, &cfg, &nodes(&[("a", 1.0)])).unwrap();
        (last(&wf, "a") - (-1f64).exp()).abs()
    };
    let (e1, e2) = (err(1e-8), err(5e-9));
    // first order: halving dt halves the error
    assert!((e1 / e2 - 2.0).abs() < 0.1, "{e1} {e2}");
}

#[test]
fn charge_sharing_conserves_charge() {
    let n = parse_netlist("C1 a 0 1n\nC2 b 0 2n\nR1 a b 1k\n").unwrap();
    for integrator in [Integrator::BackwardEuler, Integrator::Trapezoidal] {
        let cfg = TransientConfig {
            t_stop: 1e-3,
            dt: 1e-9,
            integrator,
            ..Default::default()
        };
        let mut q = (0.0, 0.0);
        let mut steps = 0u64;
        let mut obs = |s: &StepView<'_>| {
            let (a, b) = (s.state.voltages[1], s.state.voltages[2]);
            let charge = 1e-9 * a + 2e-9 * b;
            if s.index == 0 {
                q.0 = charge;
            }
            q.1 = charge;
            steps = s.index;
            Control::Continue
        };
        transient_observed(&n, &cfg, &nodes(&[("a", 1.0), ("b", 0.0)]), &mut obs).unwrap();
        assert_eq!(steps, 1_000_000);
        let drift = (q.1 / q.0 - 1.0).abs();
        assert!(drift < 1e-4, "{integrator:?}: drift {drift}");
    }
}

#[test]
fn step_budget_error() {
    let n = parse_netlist("R1 a 0 1k\nC1 a 0 1p\n").unwrap();
    let cfg = TransientConfig {
        t_stop: 1.0,
        dt: 1e-9,
        step_budget: 1000,
        ..Default::default()
    };
    assert!(matches!(
        transient(&n, &cfg),
        Err(SolverError::StepBudget { budget: 1000, .. })
    ));
}

fn ah_run(dt: f64) -> f64 {
    let n = build_ah(&AhParams::default()).unwrap();
    let cfg = TransientConfig {
        dt,
        ..Default::default()
    };
    let opts = MeasureOptions {
        target_spikes: 20,
        ..Default::default()
    };
    measure(&n, &cfg, &opts, None).unwrap().frequency.f_spk
}

#[test]
fn halving_dt_moves_frequency_little() {
    let (a, b) = (ah_run(1e-9), ah_run(0.5e-9));
    assert!((a / b - 1.0).abs() < 5e-3, "{a} {b}");
}

#[test]
fn transient_is_deterministic() {
    let n = build_ah(&AhParams::default()).unwrap();
    let cfg = TransientConfig {
        t_stop: 60e-6,
        ..Default::default()
    };
    let a = transient_from(&n, &cfg, &InitialState::Quiescent).unwrap();
    let b = transient_from(&n, &cfg, &InitialState::Quiescent).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ah_waveform_shape() {
    let n = build_ah(&AhParams::default()).unwrap();
    let cfg = TransientConfig {
        t_stop: 200e-6,
        ..Default::default()
    };
    let (wf, _) = transient_from(&n, &cfg, &InitialState::Quiescent).unwrap();
    let spk = wf.voltage("spk").unwrap();
    let mem = wf.voltage("mem").unwrap();
    let v_dd = 1.1;
    // rising crossings of v_dd / 2
    let onsets: Vec<usize> = (1..spk.len())
        .filter(|&i| spk[i - 1] < 0.5 * v_dd && spk[i] >= 0.5 * v_dd)
        .collect();
    assert!(onsets.len() >= 4, "{} spikes", onsets.len());
    assert!(spk.iter().cloned().fold(0.0, f64::max) > 0.95 * v_dd);
    assert!(spk.iter().cloned().fold(v_dd, f64::min) < 0.05 * v_dd);
    let kick = 20e-12 / 120e-12 * v_dd;
    for &i in &onsets {
        // mem rises through the kick within a few steps of the onset
        let before = mem[i.saturating_sub(20)];
        let peak = mem[i..(i + 20).min(mem.len())].iter().cloned().fold(0.0, f64::max);
        assert!(peak - before > 0.5 * kick, "kick {}", peak - before);
    }
    // periodic: inter-onset intervals agree after the first
    let isi: Vec<usize> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
    for w in isi.windows(2) {
        assert!((w[0] as f64 - w[1] as f64).abs() <= 2.0, "{isi:?}");
    }
}

#[test]
fn kcl_at_converged_steps() {
    let n = build_ah(&AhParams::default()).unwrap();
    let cfg = TransientConfig {
        t_stop: 30e-6,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut sample: Option<(CircuitState, Companion)> = None;
    let mut obs = |s: &StepView<'_>| {
        if let Some(c) = s.companion {
            let r = kcl_residual(&n, s.state, Some(c), cfg.gmin);
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
            if s.index == 5000 {
                sample = Some((s.state.clone(), c.clone()));
            }
        }
        Control::Continue
    };
    transient_observed(&n, &cfg, &InitialState::Quiescent, &mut obs).unwrap();
    assert!(worst < 1e-9, "worst residual {worst}");

    let (state, comp) = sample.unwrap();
    let base: f64 = kcl_residual(&n, &state, Some(&comp), cfg.gmin)
        .iter()
        .map(|v| v.abs())
        .sum();
    let mem = n.node_id("mem").unwrap();
    let mut bumped = state.clone();
    bumped.voltages[mem.0] += 0.01;
    let after: f64 = kcl_residual(&n, &bumped, Some(&comp), cfg.gmin)
        .iter()
        .map(|v| v.abs())
        .sum();
    assert!(after > base, "{after} <= {base}");
}

#[test]
fn dead_network_zero_residual() {
    let n = parse_netlist("V1 a 0 0\nR1 a b 1k\nC1 b 0 1p\nI1 0 b 0\n").unwrap();
    let state = CircuitState {
        voltages: vec![0.0; n.node_count()],
        branch_currents: vec![0.0],
    };
    assert!(kcl_residual(&n, &state, None, 1e-12).iter().all(|&r| r == 0.0));
}
