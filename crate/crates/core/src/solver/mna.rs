//! Modified nodal analysis assembly.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per voltage source. Equations are written as a residual `f(x)`: for node
//! rows the sum of currents leaving the node, for source rows the voltage
//! constraint error. Newton solves `J dx = -f`.

use crate::devices::{mosfet_eval, MosfetParams};
use crate::netlist::{Element, Netlist, NodeId, VoltageValue};

use super::linalg::DenseMatrix;
use super::Integrator;

#[inline]
fn idx(n: NodeId) -> Option<usize> {
    (!n.is_ground()).then(|| n.0 - 1)
}

#[derive(Debug, Clone)]
pub(crate) struct CMosfet {
    pub d: Option<usize>,
    pub g: Option<usize>,
    pub s: Option<usize>,
    pub params: MosfetParams,
}

#[derive(Debug, Clone)]
pub(crate) struct CCap {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub c: f64,
}

#[derive(Debug, Clone)]
struct CVsrc {
    pos: Option<usize>,
    neg: Option<usize>,
    row: usize,
    value: VoltageValue,
}

/// How capacitors enter the system.
#[derive(Debug, Clone)]
pub(crate) enum Mode<'a> {
    /// Capacitors open; independent sources scaled by the factor.
    Dc { source_scale: f64 },
    /// Companion models; the conductances live in the linear matrix, the
    /// history currents are given per capacitor.
    Transient { time: f64, ihist: &'a [f64] },
}

/// Netlist flattened into index form for fast repeated loading.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub n_nodes: usize,
    pub dim: usize,
    pub mosfets: Vec<CMosfet>,
    pub caps: Vec<CCap>,
    resistors: Vec<(Option<usize>, Option<usize>, f64)>,
    isrcs: Vec<(Option<usize>, Option<usize>, f64)>,
    vsrcs: Vec<CVsrc>,
    gmin: f64,
}

impl Compiled {
    pub fn new(n: &Netlist, gmin: f64) -> Self {
        let n_nodes = n.node_count() - 1;
        let mut c = Compiled {
            n_nodes,
            dim: n_nodes,
            mosfets: Vec::new(),
            caps: Vec::new(),
            resistors: Vec::new(),
            isrcs: Vec::new(),
            vsrcs: Vec::new(),
            gmin,
        };
        for d in n.devices() {
            match &d.element {
                Element::Mosfet {
                    drain,
                    gate,
                    source,
                    params,
                } => c.mosfets.push(CMosfet {
                    d: idx(*drain),
                    g: idx(*gate),
                    s: idx(*source),
                    params: *params,
                }),
                Element::Capacitor { a, b, farads } => c.caps.push(CCap {
                    a: idx(*a),
                    b: idx(*b),
                    c: *farads,
                }),
                Element::Resistor { a, b, ohms } => c.resistors.push((idx(*a), idx(*b), *ohms)),
                Element::CurrentSource { pos, neg, amps } => {
                    c.isrcs.push((idx(*pos), idx(*neg), *amps))
                }
                Element::VoltageSource { pos, neg, value } => {
                    let row = c.dim;
                    c.dim += 1;
                    c.vsrcs.push(CVsrc {
                        pos: idx(*pos),
                        neg: idx(*neg),
                        row,
                        value: value.clone(),
                    });
                }
            }
        }
        c
    }

    fn stamp_conductance(m: &mut DenseMatrix, a: Option<usize>, b: Option<usize>, g: f64) {
        if let Some(a) = a {
            m.add(a, a, g);
        }
        if let Some(b) = b {
            m.add(b, b, g);
        }
        if let (Some(a), Some(b)) = (a, b) {
            m.add(a, b, -g);
            m.add(b, a, -g);
        }
    }

    /// Jacobian of all linear elements. With `geq`, capacitors contribute
    /// their companion conductances.
    pub fn linear_matrix(&self, geq: Option<&[f64]>) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim);
        for i in 0..self.n_nodes {
            m.add(i, i, self.gmin);
        }
        for &(a, b, r) in &self.resistors {
            Self::stamp_conductance(&mut m, a, b, 1.0 / r);
        }
        if let Some(geq) = geq {
            for (cap, &g) in self.caps.iter().zip(geq) {
                Self::stamp_conductance(&mut m, cap.a, cap.b, g);
            }
        }
        for v in &self.vsrcs {
            if let Some(p) = v.pos {
                m.add(p, v.row, 1.0);
                m.add(v.row, p, 1.0);
            }
            if let Some(n) = v.neg {
                m.add(n, v.row, -1.0);
                m.add(v.row, n, -1.0);
            }
        }
        m
    }

    /// Constant (state-independent) part of the residual.
    fn constant_terms(&self, mode: &Mode<'_>, k: &mut [f64]) {
        k.fill(0.0);
        let (time, scale) = match mode {
            Mode::Dc { source_scale } => (0.0, *source_scale),
            Mode::Transient { time, .. } => (*time, 1.0),
        };
        for &(p, n, amps) in &self.isrcs {
            let i = amps * scale;
            if let Some(p) = p {
                k[p] += i;
            }
            if let Some(n) = n {
                k[n] -= i;
            }
        }
        for v in &self.vsrcs {
            k[v.row] -= v.value.at(time) * scale;
        }
        if let Mode::Transient { ihist, .. } = mode {
            for (cap, &ih) in self.caps.iter().zip(ihist.iter()) {
                if let Some(a) = cap.a {
                    k[a] -= ih;
                }
                if let Some(b) = cap.b {
                    k[b] += ih;
                }
            }
        }
    }

    /// Loads the Jacobian and residual at `x`. `lin` must come from
    /// [`Compiled::linear_matrix`] for the same mode. MOSFET drain currents
    /// are written to `id`.
    pub fn load(
        &self,
        x: &[f64],
        mode: &Mode<'_>,
        lin: &DenseMatrix,
        jac: &mut DenseMatrix,
        f: &mut [f64],
        id: &mut [f64],
    ) {
        jac.copy_from(lin);
        self.constant_terms(mode, f);
        // f += lin * x
        let dim = self.dim;
        for (r, fr) in f.iter_mut().enumerate() {
            let row = &lin.data[r * dim..(r + 1) * dim];
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            *fr += s;
        }
        let v = |i: Option<usize>| i.map_or(0.0, |i| x[i]);
        for (m, out) in self.mosfets.iter().zip(id.iter_mut()) {
            let e = mosfet_eval(&m.params, v(m.g), v(m.d), v(m.s));
            *out = e.i_d;
            if let Some(d) = m.d {
                f[d] += e.i_d;
                if let Some(g) = m.g {
                    jac.add(d, g, e.g_m);
                }
                jac.add(d, d, e.g_ds);
                if let Some(s) = m.s {
                    jac.add(d, s, -e.g_ms);
                }
            }
            if let Some(s) = m.s {
                f[s] -= e.i_d;
                if let Some(g) = m.g {
                    jac.add(s, g, -e.g_m);
                }
                if let Some(d) = m.d {
                    jac.add(s, d, -e.g_ds);
                }
                jac.add(s, s, e.g_ms);
            }
        }
    }

    /// Capacitor voltage `v_a - v_b` for the state `x`.
    pub fn cap_voltage(&self, cap: &CCap, x: &[f64]) -> f64 {
        cap.a.map_or(0.0, |i| x[i]) - cap.b.map_or(0.0, |i| x[i])
    }

    /// Companion conductances for step `dt`.
    pub fn companion_geq(&self, dt: f64, integrator: Integrator) -> Vec<f64> {
        let k = match integrator {
            Integrator::BackwardEuler => 1.0,
            Integrator::Trapezoidal => 2.0,
        };
        self.caps.iter().map(|c| k * c.c / dt).collect()
    }

    pub fn is_voltage_row(&self, row: usize) -> bool {
        row >= self.n_nodes
    }
}
