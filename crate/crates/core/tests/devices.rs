use neuroage_core::devices::{mosfet_conductance_check, mosfet_eval};
use neuroage_core::{MosfetParams, Polarity};
use proptest::prelude::*;

fn nmos() -> MosfetParams {
    MosfetParams::nmos()
}

#[test]
fn zero_bias_zero_current() {
    for p in [MosfetParams::nmos(), MosfetParams::pmos()] {
        for v in [0.0, 0.3, 1.1] {
            assert_eq!(mosfet_eval(&p, 0.7, v, v).i_d, 0.0);
            assert_eq!(mosfet_eval(&p, v, v, v).i_d, 0.0);
        }
    }
}

#[test]
fn symmetric_point_conductance_finite() {
    let e = mosfet_eval(&nmos(), 0.8, 0.2, 0.2);
    assert!(e.g_ds.is_finite() && e.g_ds >= 0.0);
}

#[test]
fn subthreshold_slope() {
    // Independent evaluation of the closed form gives 27.5394 /V against
    // the ideal 1/(n u_t) = 27.6319 /V.
    let p = nmos();
    let vg = p.vth0 - 10.0 * p.n_slope * p.u_t;
    let h = 1e-4;
    let slope = ((mosfet_eval(&p, vg + h, 1.0, 0.0).i_d).ln()
        - (mosfet_eval(&p, vg - h, 1.0, 0.0).i_d).ln())
        / (2.0 * h);
    let ideal = 1.0 / (p.n_slope * p.u_t);
    assert!((slope / ideal - 1.0).abs() < 0.01, "{slope} vs {ideal}");
    assert!((slope - 27.539370767897253).abs() < 1e-3);
}

#[test]
fn strong_inversion_square_law() {
    let p = MosfetParams {
        lambda: 0.0,
        ..nmos()
    };
    let vov: f64 = 0.4;
    let i = mosfet_eval(&p, p.vth0 + vov, 1.0, 0.0).i_d;
    let sq = p.kp / 2.0 * (p.w / p.l) * vov.powi(2) / p.n_slope;
    assert!((i / sq - 1.0).abs() < 0.05, "{i} vs {sq}");
    // closed form evaluated independently: 2.2890014670610083e-4 A
    assert!((i / 2.2890014670610083e-4 - 1.0).abs() < 1e-9);
}

#[test]
fn pmos_mirrors_nmos() {
    let n = nmos();
    let p = MosfetParams {
        polarity: Polarity::Pmos,
        vth0: -n.vth0,
        ..n
    };
    for (vg, vd, vs) in [(0.8, 0.5, 0.0), (0.3, 1.0, 0.1), (1.1, 0.0, 0.4)] {
        let a = mosfet_eval(&n, vg, vd, vs).i_d;
        let b = mosfet_eval(&p, -vg, -vd, -vs).i_d;
        assert!((a + b).abs() <= 1e-15 * a.abs().max(1e-30), "{a} {b}");
    }
}

/// Analytic conductances against central differences on a 100 x 100 grid
/// of (v_gs, v_ds), both polarities, forward and reverse.
#[test]
fn conductance_grid() {
    let mut worst: f64 = 0.0;
    for p in [MosfetParams::nmos(), MosfetParams::pmos()] {
        let s = p.polarity.sign();
        for i in 0..100 {
            for j in 0..100 {
                let vgs = -0.2 + 1.4 * i as f64 / 99.0;
                let vds = -1.1 + 2.2 * j as f64 / 99.0;
                let vs = 0.1;
                let err = mosfet_conductance_check(&p, s * (vs + vgs), s * (vs + vds), s * vs, 1e-6);
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

proptest! {
    #[test]
    fn aging_weakens(vgs in 0.0f64..1.1, vds in 0.05f64..1.1, dv in 0.001f64..0.2, pmos: bool) {
        let base = if pmos { MosfetParams::pmos() } else { MosfetParams::nmos() };
        let s = base.polarity.sign();
        let aged = MosfetParams { delta_vth: dv, ..base };
        let i0 = mosfet_eval(&base, s * vgs, s * vds, 0.0).i_d.abs();
        let i1 = mosfet_eval(&aged, s * vgs, s * vds, 0.0).i_d.abs();
        prop_assert!(i1 < i0, "{} !< {}", i1, i0);
    }

    #[test]
    fn current_follows_vds_sign(vg in -0.2f64..1.3, vd in -0.2f64..1.3, vs in -0.2f64..1.3) {
        let i = mosfet_eval(&nmos(), vg, vd, vs).i_d;
        prop_assert!(i.is_finite());
        if vd > vs {
            prop_assert!(i >= 0.0);
        } else if vd < vs {
            prop_assert!(i <= 0.0);
        }
    }

    #[test]
    fn drain_source_swap_antisymmetric(vg in 0.0f64..1.2, vd in 0.0f64..1.2, vs in 0.0f64..1.2) {
        let p = nmos();
        let a = mosfet_eval(&p, vg, vd, vs).i_d;
        let b = mosfet_eval(&p, vg, vs, vd).i_d;
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1e-18));
    }
}
