//! Circuit representation, text netlists, neuron builders and aged-netlist
//! derivation.

mod builders;
mod parse;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::devices::MosfetParams;
use crate::error::NetlistError;

pub use builders::{build_ah, build_vif, AhParams, CircuitSpec, Technology, VifParams};
pub use parse::parse_netlist;

/// Index of a circuit node. Index 0 is always ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

/// Value of an independent voltage source.
#[derive(Debug, Clone, PartialEq)]
pub enum VoltageValue {
    Dc(f64),
    /// Piecewise-linear `(time, volts)` breakpoints, held constant outside
    /// the listed range.
    Pwl(Vec<(f64, f64)>),
}

impl VoltageValue {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            VoltageValue::Dc(v) => *v,
            VoltageValue::Pwl(points) => {
                let first = points[0];
                if t <= first.0 {
                    return first.1;
                }
                for pair in points.windows(2) {
                    let (t0, v0) = pair[0];
                    let (t1, v1) = pair[1];
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }
}

/// A circuit element with its terminal connections.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Mosfet {
        drain: NodeId,
        gate: NodeId,
        source: NodeId,
        params: MosfetParams,
    },
    Capacitor {
        a: NodeId,
        b: NodeId,
        farads: f64,
    },
    /// Test-fixture resistor.
    Resistor {
        a: NodeId,
        b: NodeId,
        ohms: f64,
    },
    /// Current flows from `pos` through the source into `neg`.
    CurrentSource {
        pos: NodeId,
        neg: NodeId,
        amps: f64,
    },
    VoltageSource {
        pos: NodeId,
        neg: NodeId,
        value: VoltageValue,
    },
}

impl Element {
    pub fn terminals(&self) -> Vec<NodeId> {
        match *self {
            Element::Mosfet {
                drain,
                gate,
                source,
                ..
            } => vec![drain, gate, source],
            Element::Capacitor { a, b, .. } | Element::Resistor { a, b, .. } => vec![a, b],
            Element::CurrentSource { pos, neg, .. } | Element::VoltageSource { pos, neg, .. } => {
                vec![pos, neg]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub name: String,
    pub element: Element,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub node: NodeId,
    pub alias: String,
}

/// Validated, immutable circuit.
///
/// Node indices follow first appearance in the device list, so two
/// netlists describing the same circuit in the same device order compare
/// equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    nodes: Vec<String>,
    devices: Vec<Device>,
    probes: Vec<Probe>,
}

impl Netlist {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        if is_ground_name(name) {
            return Some(NodeId::GROUND);
        }
        self.nodes.iter().position(|n| n == name).map(NodeId)
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    /// Node behind a probe alias (or a plain node name).
    pub fn probe_node(&self, alias: &str) -> Option<NodeId> {
        self.probes
            .iter()
            .find(|p| p.alias == alias)
            .map(|p| p.node)
            .or_else(|| self.node_id(alias))
    }

    pub fn mosfets(&self) -> impl Iterator<Item = (&str, &MosfetParams)> {
        self.devices.iter().filter_map(|d| match &d.element {
            Element::Mosfet { params, .. } => Some((d.name.as_str(), params)),
            _ => None,
        })
    }

    /// Supply voltage: the largest DC voltage source value in the circuit.
    pub fn supply_voltage(&self) -> Option<f64> {
        self.devices
            .iter()
            .filter_map(|d| match &d.element {
                Element::VoltageSource {
                    value: VoltageValue::Dc(v),
                    ..
                } => Some(*v),
                _ => None,
            })
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    /// Copy with every DC current source scaled by `factor`.
    pub fn with_current_sources_scaled(&self, factor: f64) -> Netlist {
        let mut out = self.clone();
        for d in &mut out.devices {
            if let Element::CurrentSource { amps, .. } = &mut d.element {
                *amps *= factor;
            }
        }
        out
    }

    /// Copy with `f` applied to the parameters of the named MOSFET.
    pub fn map_mosfet(
        &self,
        name: &str,
        f: impl FnOnce(&mut MosfetParams),
    ) -> Result<Netlist, NetlistError> {
        let mut out = self.clone();
        match out.devices.iter_mut().find(|d| d.name == name) {
            Some(Device {
                element: Element::Mosfet { params, .. },
                ..
            }) => {
                f(params);
                Ok(out)
            }
            _ => Err(NetlistError::UnknownDevice(name.to_string())),
        }
    }

    /// Serializes back into the text grammar accepted by [`parse_netlist`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// Threshold shifts keyed by MOSFET name, in volts.
///
/// Aging maps hold non-negative magnitudes; mismatch samples are signed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeltaVthMap(pub BTreeMap<String, f64>);

impl DeltaVthMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, device: impl Into<String>, shift: f64) {
        self.0.insert(device.into(), shift);
    }

    pub fn get(&self, device: &str) -> Option<f64> {
        self.0.get(device).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, f64)> for DeltaVthMap {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        DeltaVthMap(iter.into_iter().collect())
    }
}

/// Returns a copy of `n` with each mapped device's `delta_vth` increased by
/// the mapped shift. The input is left untouched.
pub fn apply_delta_vth(n: &Netlist, d: &DeltaVthMap) -> Result<Netlist, NetlistError> {
    let mut out = n.clone();
    for (name, shift) in d.iter() {
        match out.devices.iter_mut().find(|dev| dev.name == name) {
            Some(Device {
                element: Element::Mosfet { params, .. },
                ..
            }) => params.delta_vth += shift,
            _ => return Err(NetlistError::UnknownDevice(name.to_string())),
        }
    }
    Ok(out)
}

pub(crate) fn is_ground_name(name: &str) -> bool {
    name == "0" || name.eq_ignore_ascii_case("gnd")
}

/// Incremental netlist construction; [`NetlistBuilder::build`] validates.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    nodes: Vec<String>,
    index: HashMap<String, NodeId>,
    devices: Vec<Device>,
    probes: Vec<Probe>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        NetlistBuilder {
            nodes: vec!["0".to_string()],
            ..Default::default()
        }
    }

    pub fn node(&mut self, name: &str) -> NodeId {
        if is_ground_name(name) {
            return NodeId::GROUND;
        }
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn has_device(&self, name: &str) -> bool {
        self.devices.iter().any(|d| d.name == name)
    }

    pub fn add(&mut self, name: &str, element: Element) -> &mut Self {
        self.devices.push(Device {
            name: name.to_string(),
            element,
        });
        self
    }

    pub fn mosfet(
        &mut self,
        name: &str,
        drain: &str,
        gate: &str,
        source: &str,
        params: MosfetParams,
    ) -> &mut Self {
        let (drain, gate, source) = (self.node(drain), self.node(gate), self.node(source));
        self.add(
            name,
            Element::Mosfet {
                drain,
                gate,
                source,
                params,
            },
        )
    }

    pub fn capacitor(&mut self, name: &str, a: &str, b: &str, farads: f64) -> &mut Self {
        let (a, b) = (self.node(a), self.node(b));
        self.add(name, Element::Capacitor { a, b, farads })
    }

    pub fn resistor(&mut self, name: &str, a: &str, b: &str, ohms: f64) -> &mut Self {
        let (a, b) = (self.node(a), self.node(b));
        self.add(name, Element::Resistor { a, b, ohms })
    }

    pub fn current_source(&mut self, name: &str, pos: &str, neg: &str, amps: f64) -> &mut Self {
        let (pos, neg) = (self.node(pos), self.node(neg));
        self.add(name, Element::CurrentSource { pos, neg, amps })
    }

    pub fn voltage_source(&mut self, name: &str, pos: &str, neg: &str, volts: f64) -> &mut Self {
        self.voltage_source_value(name, pos, neg, VoltageValue::Dc(volts))
    }

    pub fn voltage_source_value(
        &mut self,
        name: &str,
        pos: &str,
        neg: &str,
        value: VoltageValue,
    ) -> &mut Self {
        let (pos, neg) = (self.node(pos), self.node(neg));
        self.add(name, Element::VoltageSource { pos, neg, value })
    }

    pub fn probe(&mut self, node: &str, alias: &str) -> &mut Self {
        let node = self.node(node);
        self.probes.push(Probe {
            node,
            alias: alias.to_string(),
        });
        self
    }

    /// Validates and renumbers nodes by first appearance.
    pub fn build(self) -> Result<Netlist, NetlistError> {
        let raw = Netlist {
            nodes: self.nodes,
            devices: self.devices,
            probes: self.probes,
        };
        let netlist = canonicalize(raw);
        validate(&netlist)?;
        Ok(netlist)
    }
}

fn canonicalize(n: Netlist) -> Netlist {
    let mut remap: Vec<Option<NodeId>> = vec![None; n.nodes.len()];
    remap[0] = Some(NodeId::GROUND);
    let mut nodes = vec!["0".to_string()];
    let mut visit = |id: NodeId, nodes: &mut Vec<String>| -> NodeId {
        *remap[id.0].get_or_insert_with(|| {
            nodes.push(n.nodes[id.0].clone());
            NodeId(nodes.len() - 1)
        })
    };
    let mut devices = n.devices.clone();
    for d in &mut devices {
        match &mut d.element {
            Element::Mosfet {
                drain,
                gate,
                source,
                ..
            } => {
                *drain = visit(*drain, &mut nodes);
                *gate = visit(*gate, &mut nodes);
                *source = visit(*source, &mut nodes);
            }
            Element::Capacitor { a, b, .. } | Element::Resistor { a, b, .. } => {
                *a = visit(*a, &mut nodes);
                *b = visit(*b, &mut nodes);
            }
            Element::CurrentSource { pos, neg, .. } | Element::VoltageSource { pos, neg, .. } => {
                *pos = visit(*pos, &mut nodes);
                *neg = visit(*neg, &mut nodes);
            }
        }
    }
    let probes = n
        .probes
        .iter()
        .map(|p| Probe {
            node: visit(p.node, &mut nodes),
            alias: p.alias.clone(),
        })
        .collect();
    Netlist {
        nodes,
        devices,
        probes,
    }
}

fn validate(n: &Netlist) -> Result<(), NetlistError> {
    let mut seen = HashMap::new();
    for d in &n.devices {
        if seen.insert(d.name.to_ascii_lowercase(), ()).is_some() {
            return Err(NetlistError::DuplicateName {
                name: d.name.clone(),
                line: None,
            });
        }
        let bad = |msg: String| NetlistError::InvalidParameter {
            device: d.name.clone(),
            message: msg,
        };
        match &d.element {
            Element::Mosfet { params, .. } => params.validate().map_err(bad)?,
            Element::Capacitor { farads, .. } => {
                if !(*farads > 0.0 && farads.is_finite()) {
                    return Err(bad(format!("capacitance must be positive, got {farads}")));
                }
            }
            Element::Resistor { ohms, .. } => {
                if !(*ohms > 0.0 && ohms.is_finite()) {
                    return Err(bad(format!("resistance must be positive, got {ohms}")));
                }
            }
            Element::CurrentSource { amps, .. } => {
                if !amps.is_finite() {
                    return Err(bad("non-finite current".into()));
                }
            }
            Element::VoltageSource { value, .. } => match value {
                VoltageValue::Dc(v) if !v.is_finite() => {
                    return Err(bad("non-finite voltage".into()))
                }
                VoltageValue::Pwl(points) => {
                    if points.is_empty() {
                        return Err(bad("PWL needs at least one breakpoint".into()));
                    }
                    if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                        return Err(bad("non-finite PWL breakpoint".into()));
                    }
                    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                        return Err(bad("PWL times must be strictly increasing".into()));
                    }
                }
                VoltageValue::Dc(_) => {}
            },
        }
    }
    let mut degree = vec![0usize; n.nodes.len()];
    for d in &n.devices {
        for t in d.element.terminals() {
            degree[t.0] += 1;
        }
    }
    if let Some(i) = (1..n.nodes.len()).find(|&i| degree[i] < 2) {
        return Err(NetlistError::DanglingNode(n.nodes[i].clone()));
    }
    Ok(())
}

fn fmt_mosfet_params(f: &mut fmt::Formatter<'_>, p: &MosfetParams) -> fmt::Result {
    let base = MosfetParams::default_for(p.polarity);
    write!(f, " {} W={}u L={}u", p.polarity, p.w, p.l)?;
    if p.vth0 != base.vth0 {
        write!(f, " VTH={}", p.vth0)?;
    }
    if p.delta_vth != 0.0 {
        write!(f, " DVTH={}", p.delta_vth)?;
    }
    if p.kp != base.kp {
        write!(f, " KP={}", p.kp)?;
    }
    if p.lambda != base.lambda {
        write!(f, " LAMBDA={}", p.lambda)?;
    }
    if p.n_slope != base.n_slope {
        write!(f, " NSLOPE={}", p.n_slope)?;
    }
    if p.u_t != base.u_t {
        write!(f, " UT={}", p.u_t)?;
    }
    Ok(())
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = |id: NodeId| self.node_name(id);
        for d in &self.devices {
            f.write_str(&d.name)?;
            match &d.element {
                Element::Mosfet {
                    drain,
                    gate,
                    source,
                    params,
                } => {
                    write!(f, " {} {} {}", node(*drain), node(*gate), node(*source))?;
                    fmt_mosfet_params(f, params)?;
                }
                Element::Capacitor { a, b, farads } => {
                    write!(f, " {} {} {:e}", node(*a), node(*b), farads)?
                }
                Element::Resistor { a, b, ohms } => {
                    write!(f, " {} {} {:e}", node(*a), node(*b), ohms)?
                }
                Element::CurrentSource { pos, neg, amps } => {
                    write!(f, " {} {} {:e}", node(*pos), node(*neg), amps)?
                }
                Element::VoltageSource { pos, neg, value } => {
                    write!(f, " {} {}", node(*pos), node(*neg))?;
                    match value {
                        VoltageValue::Dc(v) => write!(f, " {v:e}")?,
                        VoltageValue::Pwl(points) => {
                            f.write_str(" PWL(")?;
                            for (i, (t, v)) in points.iter().enumerate() {
                                if i > 0 {
                                    f.write_str(" ")?;
                                }
                                write!(f, "{t:e} {v:e}")?;
                            }
                            f.write_str(")")?;
                        }
                    }
                }
            }
            writeln!(f)?;
        }
        for p in &self.probes {
            writeln!(f, ".probe {} {}", node(p.node), p.alias)?;
        }
        Ok(())
    }
}
