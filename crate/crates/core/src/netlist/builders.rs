//! Parametric builders for the two neuron circuits.

use crate::devices::MosfetParams;
use crate::error::NetlistError;

use super::{Netlist, NetlistBuilder};

/// Base transistor parameters for each polarity. Instance sizes come from
/// the builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Technology {
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
}

impl Default for Technology {
    fn default() -> Self {
        Technology {
            nmos: MosfetParams::nmos(),
            pmos: MosfetParams::pmos(),
        }
    }
}

impl Technology {
    fn n(&self, w: f64, l: f64) -> MosfetParams {
        self.nmos.with_size(w, l)
    }

    fn p(&self, w: f64, l: f64) -> MosfetParams {
        self.pmos.with_size(w, l)
    }
}

pub const DEFAULT_VDD: f64 = 1.1;

/// Axon-Hillock neuron parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhParams {
    /// Membrane capacitance, farads.
    pub c_m: f64,
    /// Positive-feedback capacitance, farads.
    pub c_f: f64,
    /// Injected synaptic current, amperes.
    pub i_inj: f64,
    /// Reset source bias, volts. Zero gives the full reset current.
    pub v_ck: f64,
    pub v_dd: f64,
    pub tech: Technology,
}

impl Default for AhParams {
    fn default() -> Self {
        AhParams {
            c_m: 100e-12,
            c_f: 20e-12,
            i_inj: 1e-6,
            v_ck: 0.0,
            v_dd: DEFAULT_VDD,
            tech: Technology::default(),
        }
    }
}

impl AhParams {
    pub fn validate(&self) -> Result<(), NetlistError> {
        let bad = |m: String| NetlistError::InvalidParameter {
            device: "AH".into(),
            message: m,
        };
        if !(self.c_m > 0.0 && self.c_f > 0.0) {
            return Err(bad("capacitances must be positive".into()));
        }
        if self.c_f >= self.c_m {
            return Err(bad(format!("c_f ({}) must be below c_m ({})", self.c_f, self.c_m)));
        }
        if !(self.i_inj >= 0.0) {
            return Err(bad(format!("i_inj must be non-negative, got {}", self.i_inj)));
        }
        if !(self.v_dd > 0.0) {
            return Err(bad("v_dd must be positive".into()));
        }
        Ok(())
    }
}

/// Voltage-amplifier integrate-and-fire neuron parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VifParams {
    /// Membrane capacitance, farads.
    pub c_m: f64,
    /// Pulse-width capacitance on the reset node, farads.
    pub c_k: f64,
    pub i_inj: f64,
    /// Firing threshold, volts.
    pub v_thr: f64,
    /// Pulse-width bias on PM3's gate, volts.
    pub v_pw: f64,
    /// Refractory bias on NM5's gate, volts.
    pub v_rfr: f64,
    /// Leak bias on NM3's gate, volts.
    pub v_lk: f64,
    /// Comparator tail bias, volts.
    pub v_bias: f64,
    pub v_dd: f64,
    pub tech: Technology,
}

impl Default for VifParams {
    fn default() -> Self {
        VifParams {
            c_m: 20e-12,
            c_k: 0.5e-12,
            i_inj: 1e-6,
            v_thr: 0.55,
            v_pw: 0.8,
            v_rfr: 0.35,
            v_lk: 0.30,
            v_bias: 0.6,
            v_dd: DEFAULT_VDD,
            tech: Technology::default(),
        }
    }
}

impl VifParams {
    pub fn validate(&self) -> Result<(), NetlistError> {
        let bad = |m: String| NetlistError::InvalidParameter {
            device: "VIF".into(),
            message: m,
        };
        if !(self.c_m > 0.0 && self.c_k > 0.0) {
            return Err(bad("capacitances must be positive".into()));
        }
        if !(self.i_inj >= 0.0) {
            return Err(bad(format!("i_inj must be non-negative, got {}", self.i_inj)));
        }
        if !(self.v_thr > 0.0 && self.v_thr <= self.v_dd) {
            return Err(bad(format!("v_thr must lie in (0, v_dd], got {}", self.v_thr)));
        }
        let limit = self.tech.nmos.vth0 + 0.1;
        if self.v_rfr >= limit || self.v_lk >= limit {
            return Err(bad(format!(
                "v_rfr ({}) and v_lk ({}) must stay below {limit} V",
                self.v_rfr, self.v_lk
            )));
        }
        Ok(())
    }
}

/// Either neuron circuit with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircuitSpec {
    Ah(AhParams),
    Vif(VifParams),
}

impl CircuitSpec {
    pub fn build(&self) -> Result<Netlist, NetlistError> {
        match self {
            CircuitSpec::Ah(p) => build_ah(p),
            CircuitSpec::Vif(p) => build_vif(p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CircuitSpec::Ah(_) => "ah",
            CircuitSpec::Vif(_) => "vif",
        }
    }

    pub fn i_inj(&self) -> f64 {
        match self {
            CircuitSpec::Ah(p) => p.i_inj,
            CircuitSpec::Vif(p) => p.i_inj,
        }
    }

    pub fn v_dd(&self) -> f64 {
        match self {
            CircuitSpec::Ah(p) => p.v_dd,
            CircuitSpec::Vif(p) => p.v_dd,
        }
    }

    pub fn with_i_inj(mut self, i: f64) -> Self {
        match &mut self {
            CircuitSpec::Ah(p) => p.i_inj = i,
            CircuitSpec::Vif(p) => p.i_inj = i,
        }
        self
    }
}

/// Builds the Axon-Hillock neuron.
///
/// Nodes: `vdd`, `mem`, `inv1`, `spk`, `ck`. The injected current charges
/// `mem`; two inverters (PM0/NM0, PM1/NM1) drive `spk`, which kicks `mem`
/// through C_F and gates the reset transistor NM2 (drain `mem`, source at
/// the V_CK-driven node `ck`).
pub fn build_ah(p: &AhParams) -> Result<Netlist, NetlistError> {
    p.validate()?;
    let t = &p.tech;
    let mut b = NetlistBuilder::new();
    b.voltage_source("VDD", "vdd", "gnd", p.v_dd)
        .voltage_source("VCK", "ck", "gnd", p.v_ck)
        .current_source("IINJ", "vdd", "mem", p.i_inj)
        .capacitor("CM", "mem", "gnd", p.c_m)
        .capacitor("CF", "spk", "mem", p.c_f)
        .mosfet("PM0", "inv1", "mem", "vdd", t.p(0.9, 0.045))
        .mosfet("NM0", "inv1", "mem", "gnd", t.n(0.45, 0.045))
        .mosfet("PM1", "spk", "inv1", "vdd", t.p(4.5, 0.045))
        .mosfet("NM1", "spk", "inv1", "gnd", t.n(2.25, 0.045))
        .mosfet("NM2", "mem", "spk", "ck", t.n(2.25, 0.045))
        .probe("mem", "mem")
        .probe("spk", "spk");
    b.build()
}

/// Builds the voltage-amplifier integrate-and-fire neuron.
///
/// * comparator: NMOS pair NC1 (`mem`) / NC2 (`thr`), PMOS mirror PC1/PC2,
///   tail NCT biased by `v_bias`; output `cmp` is high when mem > thr
/// * inverters PM1/NM1 (`cmp` -> `nspk`) and PM4/NM4I (`nspk` -> `spk`)
/// * sodium current PM2 from `vdd` into `mem`, gated by `nspk`
/// * pulse width: PM3 charges C_K on `rst` from `spk` at a rate set by
///   `v_pw`; `rst` drives the reset transistor NM2 (`mem` -> ground)
/// * refractory: between spikes `rst` discharges through NMRD (gated by
///   `nspk`) in series with the subthreshold NM5 (`v_rfr`)
/// * leak NM3 from `mem` to ground, gate at `v_lk`
pub fn build_vif(p: &VifParams) -> Result<Netlist, NetlistError> {
    p.validate()?;
    let t = &p.tech;
    let mut b = NetlistBuilder::new();
    b.voltage_source("VDD", "vdd", "gnd", p.v_dd)
        .voltage_source("VTHR", "thr", "gnd", p.v_thr)
        .voltage_source("VBIAS", "vb", "gnd", p.v_bias)
        .voltage_source("VPW", "pw", "gnd", p.v_pw)
        .voltage_source("VRFR", "rfr", "gnd", p.v_rfr)
        .voltage_source("VLK", "lk", "gnd", p.v_lk)
        .current_source("IINJ", "vdd", "mem", p.i_inj)
        .capacitor("CM", "mem", "gnd", p.c_m)
        .capacitor("CK", "rst", "gnd", p.c_k)
        // comparator
        .mosfet("NC1", "mir", "mem", "tail", t.n(0.9, 0.09))
        .mosfet("NC2", "cmp", "thr", "tail", t.n(0.9, 0.09))
        .mosfet("PC1", "mir", "mir", "vdd", t.p(0.9, 0.09))
        .mosfet("PC2", "cmp", "mir", "vdd", t.p(0.9, 0.09))
        .mosfet("NCT", "tail", "vb", "gnd", t.n(0.18, 0.09))
        // output inverters
        .mosfet("PM1", "nspk", "cmp", "vdd", t.p(0.9, 0.045))
        .mosfet("NM1", "nspk", "cmp", "gnd", t.n(0.45, 0.045))
        .mosfet("PM4", "spk", "nspk", "vdd", t.p(0.9, 0.045))
        .mosfet("NM4I", "spk", "nspk", "gnd", t.n(0.45, 0.045))
        // sodium, pulse width, reset, refractory, leak
        .mosfet("PM2", "mem", "nspk", "vdd", t.p(1.215, 0.045))
        .mosfet("PM3", "rst", "pw", "spk", t.p(4.3, 0.045))
        .mosfet("NM2", "mem", "rst", "gnd", t.n(0.65, 0.045))
        .mosfet("NMRD", "rst", "nspk", "rfx", t.n(0.45, 0.045))
        .mosfet("NM5", "rfx", "rfr", "gnd", t.n(2.25, 0.045))
        .mosfet("NM3", "mem", "lk", "gnd", t.n(0.45, 4.5))
        .probe("mem", "mem")
        .probe("spk", "spk")
        .probe("rst", "rst");
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Element;

    fn count(n: &Netlist) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for d in n.devices() {
            match d.element {
                Element::Mosfet { .. } => c.0 += 1,
                Element::Capacitor { .. } => c.1 += 1,
                Element::CurrentSource { .. } => c.2 += 1,
                Element::VoltageSource { .. } => c.3 += 1,
                Element::Resistor { .. } => {}
            }
        }
        c
    }

    #[test]
    fn ah_inventory() {
        let n = build_ah(&AhParams::default()).unwrap();
        assert_eq!(count(&n), (5, 2, 1, 2));
        let mut names: Vec<_> = n.mosfets().map(|(name, _)| name).collect();
        names.sort_unstable();
        assert_eq!(names, ["NM0", "NM1", "NM2", "PM0", "PM1"]);
        let zero = build_ah(&AhParams {
            i_inj: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(count(&zero), (5, 2, 1, 2));
    }

    #[test]
    fn ah_reset_connections() {
        let n = build_ah(&AhParams::default()).unwrap();
        match n.device("NM2").unwrap().element {
            Element::Mosfet {
                drain,
                gate,
                source,
                ..
            } => {
                assert_eq!(n.node_name(drain), "mem");
                assert_eq!(n.node_name(gate), "spk");
                assert_eq!(n.node_name(source), "ck");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn vif_named_devices() {
        let n = build_vif(&VifParams::default()).unwrap();
        for name in ["NM2", "NM3", "NM5", "PM2", "PM3"] {
            assert!(n.device(name).is_some(), "{name}");
        }
        for probe in ["mem", "spk", "rst"] {
            assert!(n.probe_node(probe).is_some());
        }
    }

    #[test]
    fn invalid_params() {
        let bad = AhParams {
            c_f: 200e-12,
            ..Default::default()
        };
        assert!(build_ah(&bad).is_err());
        let bad = VifParams {
            v_rfr: 0.6,
            ..Default::default()
        };
        assert!(build_vif(&bad).is_err());
    }
}
