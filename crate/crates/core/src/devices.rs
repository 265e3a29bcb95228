//! All-region MOSFET compact model.
//!
//! The drain current is a single EKV-style expression that is smooth from
//! weak to strong inversion, so the Newton solver always sees continuous
//! first derivatives:
//!
//! ```text
//! i_d = i_spec * (F(v_p - v_s') - F(v_p - v_d')) * (1 + lambda * |v_ds|)
//! F(x) = ln(1 + exp(x / (2 u_t)))^2
//! v_p  = (v_g' - vth_eff) / n
//! i_spec = 2 n kp (w / l) u_t^2
//! ```
//!
//! Primed voltages are referenced to the conducting source, which is the
//! lower of the two channel terminals for NMOS. PMOS devices are evaluated
//! by mirroring every terminal voltage and negating the resulting current.

use std::fmt;
use std::str::FromStr;

/// Thermal voltage at 300 K.
pub const DEFAULT_UT: f64 = 0.02585;

/// Channel type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Nmos,
    Pmos,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Nmos => 1.0,
            Polarity::Pmos => -1.0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Nmos => "NMOS",
            Polarity::Pmos => "PMOS",
        })
    }
}

impl FromStr for Polarity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("nmos") {
            Ok(Polarity::Nmos)
        } else if s.eq_ignore_ascii_case("pmos") {
            Ok(Polarity::Pmos)
        } else {
            Err(())
        }
    }
}

/// Parameters of a single transistor instance.
///
/// `vth0` carries its sign (positive for NMOS, negative for PMOS).
/// `delta_vth` is a magnitude shift: positive values always weaken the
/// device, whatever its polarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetParams {
    pub polarity: Polarity,
    /// Threshold voltage, volts.
    pub vth0: f64,
    /// Transconductance factor, A/V².
    pub kp: f64,
    /// Gate width, micrometers.
    pub w: f64,
    /// Gate length, micrometers.
    pub l: f64,
    /// Channel-length modulation, 1/V.
    pub lambda: f64,
    /// Subthreshold slope factor.
    pub n_slope: f64,
    /// Thermal voltage, volts.
    pub u_t: f64,
    /// Aging or mismatch threshold shift, volts.
    pub delta_vth: f64,
}

impl MosfetParams {
    /// 45 nm-class NMOS defaults.
    pub fn nmos() -> Self {
        MosfetParams {
            polarity: Polarity::Nmos,
            vth0: 0.45,
            kp: 400e-6,
            w: 0.45,
            l: 0.045,
            lambda: 0.2,
            n_slope: 1.4,
            u_t: DEFAULT_UT,
            delta_vth: 0.0,
        }
    }

    /// 45 nm-class PMOS defaults.
    pub fn pmos() -> Self {
        MosfetParams {
            polarity: Polarity::Pmos,
            vth0: -0.45,
            kp: 200e-6,
            ..Self::nmos()
        }
    }

    pub fn default_for(polarity: Polarity) -> Self {
        match polarity {
            Polarity::Nmos => Self::nmos(),
            Polarity::Pmos => Self::pmos(),
        }
    }

    pub fn with_size(mut self, w: f64, l: f64) -> Self {
        self.w = w;
        self.l = l;
        self
    }

    /// Effective threshold including `delta_vth`, with the polarity sign.
    pub fn vth_eff(&self) -> f64 {
        match self.polarity {
            Polarity::Nmos => self.vth0 + self.delta_vth,
            Polarity::Pmos => self.vth0 - self.delta_vth,
        }
    }

    /// Specific current `2 n kp (w/l) u_t^2`.
    pub fn i_spec(&self) -> f64 {
        2.0 * self.n_slope * self.kp * (self.w / self.l) * self.u_t * self.u_t
    }

    /// Checks the physical parameter constraints.
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.vth0,
            self.kp,
            self.w,
            self.l,
            self.lambda,
            self.n_slope,
            self.u_t,
            self.delta_vth,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite MOSFET parameter".into());
        }
        if self.w <= 0.0 || self.l <= 0.0 {
            return Err(format!("W and L must be positive (W={}, L={})", self.w, self.l));
        }
        if self.kp <= 0.0 {
            return Err(format!("kp must be positive, got {}", self.kp));
        }
        if self.n_slope < 1.0 {
            return Err(format!("slope factor must be >= 1, got {}", self.n_slope));
        }
        if self.u_t <= 0.0 {
            return Err(format!("thermal voltage must be positive, got {}", self.u_t));
        }
        if self.lambda < 0.0 {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

/// Drain current and its partial derivatives at one operating point.
///
/// `i_d` flows into the drain terminal. The derivatives satisfy
/// `d i_d = g_m dv_g + g_ds dv_d - g_ms dv_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetEval {
    pub i_d: f64,
    pub g_m: f64,
    pub g_ds: f64,
    pub g_ms: f64,
}

/// `ln(1 + e^u)` and the logistic function, both overflow-safe.
#[inline]
fn softplus_and_logistic(u: f64) -> (f64, f64) {
    if u > 0.0 {
        let e = (-u).exp();
        (u + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = u.exp();
        (e.ln_1p(), e / (1.0 + e))
    }
}

/// Interpolation function `F(x)` and its derivative `dF/dx`.
#[inline]
fn interp(x: f64, u_t: f64) -> (f64, f64) {
    let (sp, sig) = softplus_and_logistic(x / (2.0 * u_t));
    (sp * sp, sp * sig / u_t)
}

/// Evaluates the drain current and conductances of an n-channel-equivalent
/// device, with `vth` the (positive-sense) effective threshold.
fn eval_n(p: &MosfetParams, vth: f64, vg: f64, vd: f64, vs: f64) -> MosfetEval {
    let ispec = p.i_spec();
    let n = p.n_slope;
    // Reference at the lower channel terminal so that drain and source are
    // interchangeable.
    let forward = vd >= vs;
    let vref = if forward { vs } else { vd };
    let vp = (vg - vref - vth) / n;
    let (ff, dff) = interp(vp - (vs - vref), p.u_t);
    let (fr, dfr) = interp(vp - (vd - vref), p.u_t);
    let vds = vd - vs;
    let clm = 1.0 + p.lambda * vds.abs();
    let core = ff - fr;
    let i_d = ispec * core * clm;

    // Partials of `core` with respect to (vg, vd, vs).
    let (dc_dg, dc_dd, dc_ds) = if forward {
        // vref = vs: core = F(vp) - F(vp - vds), vp = (vg - vs - vth)/n
        let dvp = 1.0 / n;
        (
            (dff - dfr) * dvp,
            dfr,
            dff * (-dvp) - dfr * (1.0 - dvp),
        )
    } else {
        // vref = vd: core = F(vp - (vs - vd)) - F(vp), vp = (vg - vd - vth)/n
        let dvp = 1.0 / n;
        (
            (dff - dfr) * dvp,
            dff * (-dvp + 1.0) - dfr * (-dvp),
            -dff,
        )
    };
    let dclm_dd = if vds == 0.0 { 0.0 } else { p.lambda * vds.signum() };

    MosfetEval {
        i_d,
        g_m: ispec * dc_dg * clm,
        g_ds: ispec * (dc_dd * clm + core * dclm_dd),
        g_ms: -ispec * (dc_ds * clm - core * dclm_dd),
    }
}

/// Evaluates the compact model at terminal voltages `(v_g, v_d, v_s)`.
pub fn mosfet_eval(p: &MosfetParams, v_g: f64, v_d: f64, v_s: f64) -> MosfetEval {
    let s = p.polarity.sign();
    let vth = s * p.vth_eff();
    let e = eval_n(p, vth, s * v_g, s * v_d, s * v_s);
    // Mirroring all voltages negates the current; the conductances keep
    // their sign because both numerator and denominator flip.
    MosfetEval {
        i_d: s * e.i_d,
        ..e
    }
}

/// Compares the analytic `g_m` and `g_ds` against central finite
/// differences of [`mosfet_eval`] with step `h`. Returns the worst relative
/// error, normalized by the largest conductance at the point so that
/// vanishing derivatives do not blow up the ratio.
pub fn mosfet_conductance_check(p: &MosfetParams, v_g: f64, v_d: f64, v_s: f64, h: f64) -> f64 {
    let e = mosfet_eval(p, v_g, v_d, v_s);
    let fd_g = (mosfet_eval(p, v_g + h, v_d, v_s).i_d - mosfet_eval(p, v_g - h, v_d, v_s).i_d)
        / (2.0 * h);
    let fd_d = (mosfet_eval(p, v_g, v_d + h, v_s).i_d - mosfet_eval(p, v_g, v_d - h, v_s).i_d)
        / (2.0 * h);
    let fd_s = -(mosfet_eval(p, v_g, v_d, v_s + h).i_d - mosfet_eval(p, v_g, v_d, v_s - h).i_d)
        / (2.0 * h);
    let scale = e
        .g_m
        .abs()
        .max(e.g_ds.abs())
        .max(e.g_ms.abs())
        .max(f64::MIN_POSITIVE);
    [
        (e.g_m - fd_g).abs(),
        (e.g_ds - fd_d).abs(),
        (e.g_ms - fd_s).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nmos() -> MosfetParams {
        MosfetParams::nmos().with_size(4.5, 0.45)
    }

    #[test]
    fn zero_bias_gives_zero_current() {
        let p = nmos();
        for v in [0.0, 0.3, 1.1] {
            assert_eq!(mosfet_eval(&p, v, v, v).i_d, 0.0);
        }
    }

    #[test]
    fn subthreshold_slope() {
        // Expected values frozen from a finite-difference evaluation of
        // ln(i_d) against the closed form, done outside this crate.
        let p = MosfetParams {
            lambda: 0.0,
            ..nmos()
        };
        let vgs0 = p.vth_eff() - 10.0 * p.n_slope * p.u_t;
        let h = 1e-4;
        let lo = mosfet_eval(&p, vgs0 - h, 1.0, 0.0).i_d.ln();
        let hi = mosfet_eval(&p, vgs0 + h, 1.0, 0.0).i_d.ln();
        let slope = (hi - lo) / (2.0 * h);
        let ideal = 1.0 / (p.n_slope * p.u_t);
        assert!((slope / ideal - 1.0).abs() < 0.01, "{slope} vs {ideal}");
    }

    #[test]
    fn strong_inversion_matches_square_law() {
        let p = MosfetParams {
            lambda: 0.0,
            ..nmos()
        };
        let vov = 0.4;
        let i = mosfet_eval(&p, p.vth_eff() + vov, 1.0, 0.0).i_d;
        let square = 0.5 * p.kp * (p.w / p.l) * vov * vov / p.n_slope;
        assert!((i / square - 1.0).abs() < 0.05, "{i} vs {square}");
    }

    #[test]
    fn pmos_mirrors_nmos() {
        let n = nmos();
        let p = MosfetParams {
            polarity: Polarity::Pmos,
            vth0: -n.vth0,
            ..n
        };
        for &(vg, vd, vs) in &[(0.8, 1.0, 0.0), (0.3, 0.2, 0.0), (1.1, 0.0, 0.5)] {
            let a = mosfet_eval(&n, vg, vd, vs);
            let b = mosfet_eval(&p, -vg, -vd, -vs);
            assert!((a.i_d + b.i_d).abs() <= 1e-15 * a.i_d.abs().max(1e-30));
            assert!((a.g_m - b.g_m).abs() <= 1e-12 * a.g_m.abs().max(1e-30));
        }
    }

    #[test]
    fn drain_source_swap_is_antisymmetric() {
        let p = MosfetParams {
            lambda: 0.0,
            ..nmos()
        };
        let a = mosfet_eval(&p, 0.9, 0.7, 0.1).i_d;
        let b = mosfet_eval(&p, 0.9, 0.1, 0.7).i_d;
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn conductances_at_symmetric_point() {
        let p = nmos();
        let e = mosfet_eval(&p, 0.8, 0.2, 0.2);
        assert!(e.g_ds.is_finite() && e.g_ds >= 0.0);
        assert!(mosfet_conductance_check(&p, 0.8, 0.2, 0.2, 1e-6) < 1e-4);
    }

    #[test]
    fn aging_weakens_both_polarities() {
        for base in [nmos(), MosfetParams::pmos().with_size(4.5, 0.45)] {
            let s = base.polarity.sign();
            let fresh = mosfet_eval(&base, s * 0.7, s * 0.9, 0.0).i_d.abs();
            let aged = MosfetParams {
                delta_vth: 0.03,
                ..base
            };
            let aged = mosfet_eval(&aged, s * 0.7, s * 0.9, 0.0).i_d.abs();
            assert!(aged < fresh);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MosfetParams { w: 0.0, ..nmos() }.validate().is_err());
        assert!(MosfetParams { n_slope: 0.9, ..nmos() }.validate().is_err());
        assert!(nmos().validate().is_ok());
    }
}
