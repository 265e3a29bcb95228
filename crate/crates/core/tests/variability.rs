use neuroage_core::analysis::{measure, MeasureOptions};
use neuroage_core::variability::{
    normal_quantile, quantile_correlation, read_mc_runs_csv, read_mc_summary_csv,
    read_probit_csv, write_mc_runs_csv, write_mc_summary_csv, write_probit_csv, McSummary,
    RunStatus,
};
use neuroage_core::{
    build_ah, parse_netlist, probit_series, run_monte_carlo, sample_vth_offsets, AhParams,
    CircuitSpec, McConfig, MismatchParams,
};
use proptest::prelude::*;

fn empirical_sd(a_vt: f64, w: f64, l: f64, draws: u64) -> f64 {
    let text = format!("V1 d 0 1\nM1 d d 0 NMOS W={w}u L={l}u\n");
    let n = parse_netlist(&text).unwrap();
    let p = MismatchParams { a_vt, seed: 7 };
    let x: Vec<f64> = (0..draws)
        .map(|run| sample_vth_offsets(&n, &p, run).get("M1").unwrap())
        .collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[test]
fn unit_area_sigma() {
    assert!((MismatchParams::default().sigma(1.0, 1.0) - 3.5e-3).abs() < 1e-15);
}

#[test]
fn minimum_device_sigma() {
    // 3.5 / sqrt(0.02025) mV, evaluated independently
    let s = MismatchParams::default().sigma(0.45, 0.045);
    assert!((s - 0.024595492912420726).abs() < 1e-15, "{s}");
}

#[test]
fn empirical_sigma_matches_pelgrom() {
    let sd = empirical_sd(3.5, 0.45, 0.045, 100_000);
    let target = 0.024595492912420726;
    assert!((sd / target - 1.0).abs() < 0.02, "{sd} vs {target}");
}

#[test]
fn sigma_scales_with_a_vt() {
    let a = empirical_sd(3.5, 1.0, 1.0, 100_000);
    let b = empirical_sd(7.0, 1.0, 1.0, 100_000);
    // identical streams, so the ratio is exact up to rounding
    assert!((b / a - 2.0).abs() < 0.02, "{}", b / a);
}

#[test]
fn offsets_are_reproducible_in_isolation() {
    let n = build_ah(&AhParams::default()).unwrap();
    let p = MismatchParams::default();
    assert_eq!(sample_vth_offsets(&n, &p, 17), sample_vth_offsets(&n, &p, 17));
    assert_ne!(sample_vth_offsets(&n, &p, 17), sample_vth_offsets(&n, &p, 18));
    let other = MismatchParams { seed: 43, ..p };
    assert_ne!(sample_vth_offsets(&n, &p, 17), sample_vth_offsets(&n, &other, 17));
    // every MOSFET gets an offset, of both signs across runs
    let all: Vec<f64> = (0..50)
        .flat_map(|r| sample_vth_offsets(&n, &p, r).iter().map(|(_, v)| v).collect::<Vec<_>>())
        .collect();
    assert_eq!(all.len(), 50 * 5);
    assert!(all.iter().any(|&v| v > 0.0) && all.iter().any(|&v| v < 0.0));
}

#[test]
fn blom_two_point() {
    let s = probit_series(&[3.0, 1.0]).unwrap();
    assert_eq!((s[0].0, s[1].0), (1.0, 3.0));
    // inverse normal at 0.625 / 2.25, evaluated independently
    assert!((s[0].1 + 0.5894557978497785).abs() < 1e-9);
    assert!((s[1].1 - 0.5894557978497785).abs() < 1e-9);
}

#[test]
fn probit_needs_two_samples() {
    assert!(probit_series(&[1.0]).is_err());
    assert!(probit_series(&[1.0, f64::NAN]).is_err());
}

#[test]
fn inverse_normal_accuracy() {
    // reference quantiles from an independent implementation
    for (p, q) in [
        (1e-6, -4.753424308822899),
        (0.025, -1.9599639845400538),
        (0.5, 0.0),
        (0.9, 1.2815515655446008),
        (1.0 - 1e-6, 4.753424308822899),
    ] {
        let z = normal_quantile(p);
        let err = if q == 0.0 { z.abs() } else { (z / q - 1.0).abs() };
        assert!(err < 1e-7, "p = {p}: {z} vs {q}");
    }
}

#[test]
fn gaussian_self_consistency() {
    let n = 500;
    let samples: Vec<f64> = (1..=n)
        .map(|i| 10.0 + 2.0 * normal_quantile((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect();
    let s = probit_series(&samples).unwrap();
    assert!((quantile_correlation(&s) - 1.0).abs() < 1e-12);
}

fn quick_mc(a_vt: f64, n_runs: usize) -> (McConfig, MismatchParams) {
    let cfg = McConfig {
        n_runs,
        measure: MeasureOptions {
            target_spikes: 6,
            ..Default::default()
        },
        ..McConfig::new(CircuitSpec::Ah(AhParams {
            i_inj: 5e-6,
            ..Default::default()
        }))
    };
    (cfg, MismatchParams { a_vt, seed: 42 })
}

#[test]
fn vanishing_mismatch_collapses_distribution() {
    let (cfg, p) = quick_mc(1e-6, 4);
    let r = run_monte_carlo(&cfg, &p).unwrap();
    let nominal = measure(&cfg.circuit.build().unwrap(), &cfg.transient, &cfg.measure, None)
        .unwrap()
        .frequency
        .f_spk;
    assert_eq!(r.count(RunStatus::Ok), 4);
    // Nanovolt offsets still move Newton and step-splitting decisions, so
    // the floor is solver noise rather than exact zero.
    assert!(r.cv < 1e-4, "cv {}", r.cv);
    assert!((r.mean / nominal - 1.0).abs() < 1e-4);
}

#[test]
fn pool_size_does_not_matter() {
    let (cfg, p) = quick_mc(3.5, 6);
    let on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_monte_carlo(&cfg, &p).unwrap())
    };
    let (a, b) = (on(1), on(3));
    assert_eq!(a, b);
    let accounted = [RunStatus::Ok, RunStatus::NoSpike, RunStatus::SolverFail]
        .iter()
        .map(|&s| a.count(s))
        .sum::<usize>();
    assert_eq!(accounted, 6);
    assert!(a.runs.iter().enumerate().all(|(i, r)| r.index == i));
    assert!(a.probit.windows(2).all(|w| w[0].0 <= w[1].0));
}

#[test]
fn mc_rejects_single_run() {
    let (cfg, p) = quick_mc(3.5, 1);
    assert!(run_monte_carlo(&cfg, &p).is_err());
}

#[test]
fn csv_round_trips() {
    let (cfg, p) = quick_mc(3.5, 3);
    let r = run_monte_carlo(&cfg, &p).unwrap();

    let mut buf = Vec::new();
    write_mc_runs_csv(&mut buf, &r.runs).unwrap();
    assert!(buf.starts_with(b"run,fspk_hz,status\n"));
    assert_eq!(read_mc_runs_csv(&buf[..]).unwrap(), r.runs);

    let mut buf = Vec::new();
    write_probit_csv(&mut buf, &r.probit).unwrap();
    assert!(buf.starts_with(b"value_hz,normal_quantile\n"));
    assert_eq!(read_probit_csv(&buf[..]).unwrap(), r.probit);

    let s = McSummary::from(&r);
    let mut buf = Vec::new();
    write_mc_summary_csv(&mut buf, &s).unwrap();
    assert_eq!(read_mc_summary_csv(&buf[..]).unwrap(), s);
}

proptest! {
    #[test]
    fn probit_symmetric_samples_antisymmetric(half in prop::collection::vec(0.001f64..100.0, 1..40)) {
        let mut x: Vec<f64> = half.iter().map(|v| 50.0 + v).collect();
        x.extend(half.iter().map(|v| 50.0 - v));
        let s = probit_series(&x).unwrap();
        let n = s.len();
        for i in 0..n {
            prop_assert!((s[i].1 + s[n - 1 - i].1).abs() < 1e-12);
            prop_assert!(((s[i].0 - 50.0) + (s[n - 1 - i].0 - 50.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn quantiles_increase(p in 1e-6f64..0.5, d in 1e-6f64..0.4) {
        prop_assert!(normal_quantile(p) < normal_quantile(p + d));
        prop_assert!((normal_quantile(p) + normal_quantile(1.0 - p)).abs() < 1e-8 * normal_quantile(p).abs().max(1.0));
    }
}
