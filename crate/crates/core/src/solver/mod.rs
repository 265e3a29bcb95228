//! DC operating point and fixed-step transient analysis.

mod linalg;
pub(crate) mod mna;
mod waveform;

use std::collections::BTreeMap;

use crate::error::SolverError;
use crate::netlist::Netlist;

use linalg::{lu_solve_in_place, DenseMatrix};
use mna::{Compiled, Mode};

pub(crate) use waveform::node_trace;
pub use waveform::{Waveform, WaveformRecorder};

/// Per-iteration clamp on node-voltage updates, volts.
const NEWTON_STEP_LIMIT: f64 = 0.3;
const DC_MAX_ITERS: usize = 200;
const SOURCE_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    BackwardEuler,
    Trapezoidal,
}

impl std::str::FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "backward_euler" | "be" => Ok(Integrator::BackwardEuler),
            "trapezoidal" | "trap" => Ok(Integrator::Trapezoidal),
            other => Err(format!("unknown integrator '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientConfig {
    pub t_stop: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub v_abstol: f64,
    pub v_reltol: f64,
    /// KCL residual bound for an accepted Newton iterate, amperes.
    pub i_abstol: f64,
    pub max_newton_iters: usize,
    pub gmin: f64,
    pub step_budget: u64,
}

impl Default for TransientConfig {
    fn default() -> Self {
        TransientConfig {
            t_stop: 1e-3,
            dt: 1e-9,
            integrator: Integrator::BackwardEuler,
            v_abstol: 1e-6,
            v_reltol: 1e-6,
            i_abstol: 1e-9,
            max_newton_iters: 50,
            gmin: 1e-12,
            step_budget: 100_000_000,
        }
    }
}

impl TransientConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt < self.t_stop) {
            return bad("need 0 < dt < t_stop");
        }
        if !(self.v_abstol > 0.0 && self.v_reltol > 0.0 && self.i_abstol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if !(self.gmin >= 0.0) {
            return bad("gmin must be non-negative");
        }
        Ok(())
    }

    fn step_count(&self) -> Result<u64, SolverError> {
        let steps = (self.t_stop / self.dt - 1e-9).ceil();
        if steps > self.step_budget as f64 {
            return Err(SolverError::StepBudget {
                needed: steps as u64,
                budget: self.step_budget,
            });
        }
        Ok(steps.max(1.0) as u64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub total_newton_iters: u64,
    pub steps_taken: u64,
    /// Largest node KCL residual seen at an accepted iterate, amperes.
    pub max_kcl_residual: f64,
}

/// Node voltages (indexed by [`crate::netlist::NodeId`], ground included)
/// and voltage-source branch currents in netlist order.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitState {
    pub voltages: Vec<f64>,
    pub branch_currents: Vec<f64>,
}

impl CircuitState {
    fn from_unknowns(comp: &Compiled, x: &[f64]) -> Self {
        let mut voltages = Vec::with_capacity(comp.n_nodes + 1);
        voltages.push(0.0);
        voltages.extend_from_slice(&x[..comp.n_nodes]);
        CircuitState {
            voltages,
            branch_currents: x[comp.n_nodes..].to_vec(),
        }
    }

    fn to_unknowns(&self) -> Vec<f64> {
        let mut x = self.voltages[1..].to_vec();
        x.extend_from_slice(&self.branch_currents);
        x
    }

    pub fn voltage(&self, n: &Netlist, node: &str) -> Option<f64> {
        n.node_id(node).map(|id| self.voltages[id.0])
    }

    /// Node name to voltage, ground excluded.
    pub fn to_map(&self, n: &Netlist) -> BTreeMap<String, f64> {
        n.nodes()
            .iter()
            .zip(&self.voltages)
            .skip(1)
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }
}

/// Capacitor companion models in force for one transient step: each
/// capacitor behaves as conductance `geq` in parallel with a history
/// current source `ihist` (capacitor order follows the netlist).
#[derive(Debug, Clone, PartialEq)]
pub struct Companion {
    pub time: f64,
    pub geq: Vec<f64>,
    pub ihist: Vec<f64>,
}

/// How the transient obtains its state at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    /// DC operating point of the circuit itself.
    #[default]
    OperatingPoint,
    /// DC operating point with every current source switched off.
    Quiescent,
    /// Explicit node voltages; unlisted nodes start at 0 V.
    Nodes(BTreeMap<String, f64>),
}

/// Data handed to a [`StepObserver`] after each accepted step.
#[derive(Debug)]
pub struct StepView<'a> {
    pub index: u64,
    pub time: f64,
    pub state: &'a CircuitState,
    /// Drain current of each MOSFET, netlist order.
    pub mosfet_currents: &'a [f64],
    /// Companion models used to compute this step (`None` at `t = 0`).
    pub companion: Option<&'a Companion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub trait StepObserver {
    fn observe(&mut self, step: &StepView<'_>) -> Control;
}

impl<F: FnMut(&StepView<'_>) -> Control> StepObserver for F {
    fn observe(&mut self, step: &StepView<'_>) -> Control {
        self(step)
    }
}

struct Tolerances {
    v_abstol: f64,
    v_reltol: f64,
    i_abstol: f64,
}

struct Workspace {
    lin: DenseMatrix,
    jac: DenseMatrix,
    f: Vec<f64>,
    dx: Vec<f64>,
    perm: Vec<usize>,
    id: Vec<f64>,
}

impl Workspace {
    fn new(comp: &Compiled, lin: DenseMatrix) -> Self {
        Workspace {
            jac: DenseMatrix::zeros(comp.dim),
            lin,
            f: vec![0.0; comp.dim],
            dx: vec![0.0; comp.dim],
            perm: vec![0; comp.dim],
            id: vec![0.0; comp.mosfets.len()],
        }
    }
}

enum NewtonResult {
    Converged { iters: usize, residual: f64 },
    Failed { iters: usize, row: usize, residual: f64 },
    Singular,
}

fn newton(
    comp: &Compiled,
    mode: &Mode<'_>,
    ws: &mut Workspace,
    x: &mut [f64],
    tol: &Tolerances,
    max_iters: usize,
) -> NewtonResult {
    let mut worst = (0usize, f64::INFINITY);
    for iter in 1..=max_iters {
        comp.load(x, mode, &ws.lin, &mut ws.jac, &mut ws.f, &mut ws.id);
        let mut kcl = 0.0f64;
        let mut kcl_row = 0;
        let mut vsrc_ok = true;
        for (r, &fr) in ws.f.iter().enumerate() {
            if comp.is_voltage_row(r) {
                vsrc_ok &= fr.abs() <= tol.v_abstol;
            } else if fr.abs() > kcl || !fr.is_finite() {
                kcl = fr.abs();
                kcl_row = r;
            }
        }
        if !kcl.is_finite() {
            return NewtonResult::Failed {
                iters: iter,
                row: kcl_row,
                residual: kcl,
            };
        }
        worst = (kcl_row, kcl);
        for (d, f) in ws.dx.iter_mut().zip(&ws.f) {
            *d = -f;
        }
        if !lu_solve_in_place(&mut ws.jac, &mut ws.dx, &mut ws.perm) {
            return NewtonResult::Singular;
        }
        let mut small = true;
        let mut clamped = false;
        for (i, (xi, d)) in x.iter_mut().zip(ws.dx.iter()).enumerate() {
            let mut d = *d;
            if i < comp.n_nodes {
                if d.abs() > NEWTON_STEP_LIMIT {
                    d = NEWTON_STEP_LIMIT.copysign(d);
                    clamped = true;
                }
                small &= d.abs() <= tol.v_abstol + tol.v_reltol * xi.abs();
            }
            *xi += d;
        }
        if small && !clamped && vsrc_ok && kcl <= tol.i_abstol {
            return NewtonResult::Converged {
                iters: iter,
                residual: kcl,
            };
        }
    }
    NewtonResult::Failed {
        iters: max_iters,
        row: worst.0,
        residual: worst.1,
    }
}

fn row_name(n: &Netlist, comp: &Compiled, row: usize) -> String {
    if row < comp.n_nodes {
        n.nodes()[row + 1].clone()
    } else {
        format!("branch#{}", row - comp.n_nodes)
    }
}

fn dc_solve(n: &Netlist, gmin: f64) -> Result<(CircuitState, f64), SolverError> {
    let tol = Tolerances {
        v_abstol: 1e-9,
        v_reltol: 1e-9,
        i_abstol: 1e-9,
    };
    let attempt = |gmin: f64, scales: &[f64], x: &mut Vec<f64>| -> Result<f64, (usize, f64)> {
        let comp = Compiled::new(n, gmin);
        let mut ws = Workspace::new(&comp, comp.linear_matrix(None));
        let mut residual = 0.0;
        for &s in scales {
            match newton(
                &comp,
                &Mode::Dc { source_scale: s },
                &mut ws,
                x,
                &tol,
                DC_MAX_ITERS,
            ) {
                NewtonResult::Converged { residual: r, .. } => residual = r,
                NewtonResult::Failed { row, residual, .. } => return Err((row, residual)),
                NewtonResult::Singular => return Err((0, f64::INFINITY)),
            }
        }
        Ok(residual)
    };
    let comp = Compiled::new(n, gmin);
    let zero = vec![0.0; comp.dim];

    let mut x = zero.clone();
    if let Ok(r) = attempt(gmin, &[1.0], &mut x) {
        return Ok((CircuitState::from_unknowns(&comp, &x), r));
    }
    // Source stepping.
    let ramp: Vec<f64> = (1..=SOURCE_STEPS)
        .map(|k| k as f64 / SOURCE_STEPS as f64)
        .collect();
    let mut x = zero.clone();
    let failure = match attempt(gmin, &ramp, &mut x) {
        Ok(r) => return Ok((CircuitState::from_unknowns(&comp, &x), r)),
        Err(e) => e,
    };
    // Gmin stepping as a last resort: solve with a large shunt and walk it
    // back down to the configured value.
    let mut x = zero;
    let mut g = 1e-3;
    let mut ok = true;
    while g > gmin {
        if attempt(g, &[1.0], &mut x).is_err() {
            ok = false;
            break;
        }
        g /= 10.0;
    }
    if ok {
        if let Ok(r) = attempt(gmin, &[1.0], &mut x) {
            return Ok((CircuitState::from_unknowns(&comp, &x), r));
        }
    }
    Err(SolverError::DcNonConvergence {
        node: row_name(n, &comp, failure.0),
        residual: failure.1,
    })
}

/// Static operating point with capacitors open. Falls back to source
/// stepping (sources ramped 0 to 100 % in ten steps) when plain Newton
/// fails.
pub fn dc_operating_point(n: &Netlist) -> Result<CircuitState, SolverError> {
    dc_solve(n, TransientConfig::default().gmin).map(|(s, _)| s)
}

/// Per-node KCL residual (amperes, indexed by node id; ground reads 0) of
/// `state`. With `companion`, capacitors enter through their companion
/// models; without it they are open (DC).
pub fn kcl_residual(
    n: &Netlist,
    state: &CircuitState,
    companion: Option<&Companion>,
    gmin: f64,
) -> Vec<f64> {
    let comp = Compiled::new(n, gmin);
    let x = state.to_unknowns();
    let mode = match companion {
        Some(c) => Mode::Transient {
            time: c.time,
            ihist: &c.ihist,
        },
        None => Mode::Dc { source_scale: 1.0 },
    };
    let lin = comp.linear_matrix(companion.map(|c| c.geq.as_slice()));
    let mut jac = DenseMatrix::zeros(comp.dim);
    let mut f = vec![0.0; comp.dim];
    let mut id = vec![0.0; comp.mosfets.len()];
    comp.load(&x, &mode, &lin, &mut jac, &mut f, &mut id);
    let mut out = vec![0.0; comp.n_nodes + 1];
    out[1..].copy_from_slice(&f[..comp.n_nodes]);
    out
}

fn initial_state(
    n: &Netlist,
    cfg: &TransientConfig,
    init: &InitialState,
) -> Result<CircuitState, SolverError> {
    match init {
        InitialState::OperatingPoint => dc_solve(n, cfg.gmin).map(|(s, _)| s),
        InitialState::Quiescent => {
            dc_solve(&n.with_current_sources_scaled(0.0), cfg.gmin).map(|(s, _)| s)
        }
        InitialState::Nodes(map) => {
            let mut voltages = vec![0.0; n.node_count()];
            for (name, v) in map {
                let id = n
                    .node_id(name)
                    .ok_or_else(|| SolverError::UnknownNode(name.clone()))?;
                if !id.is_ground() {
                    voltages[id.0] = *v;
                }
            }
            let n_vsrc = Compiled::new(n, cfg.gmin).dim - (n.node_count() - 1);
            Ok(CircuitState {
                voltages,
                branch_currents: vec![0.0; n_vsrc],
            })
        }
    }
}

/// Deepest interval halving tried for a step whose Newton iteration fails
/// at the nominal size.
const MAX_BISECTIONS: u32 = 24;

/// Largest node voltage change accepted in a single step above the deepest
/// bisection level. Positive feedback through a capacitor gives the
/// implicit step equations a second, already-switched solution well before
/// the real switching point; bounding the per-step change keeps Newton on
/// the branch continuous with the previous state.
const MAX_STEP_DV: f64 = 0.01;

/// Capacitor integration state carried between steps.
#[derive(Clone)]
struct CapState {
    v: Vec<f64>,
    i: Vec<f64>,
}

/// Step size and integration rule with their prebuilt linear matrix.
struct StepKind {
    trap: bool,
    geq: Vec<f64>,
    ws: Workspace,
}

impl StepKind {
    fn new(comp: &Compiled, h: f64, integrator: Integrator) -> Self {
        let geq = comp.companion_geq(h, integrator);
        let ws = Workspace::new(comp, comp.linear_matrix(Some(&geq)));
        StepKind {
            trap: integrator == Integrator::Trapezoidal,
            geq,
            ws,
        }
    }
}

struct Stepper<'a> {
    comp: &'a Compiled,
    tol: Tolerances,
    max_iters: usize,
    integrator: Integrator,
    dt: f64,
    /// Step kinds by bisection depth and backward-Euler flag.
    kinds: Vec<(u32, bool, StepKind)>,
    companion: Companion,
    stats: SolverStats,
}

impl<'a> Stepper<'a> {
    fn kind(&mut self, depth: u32, be: bool) -> usize {
        if let Some(k) = self.kinds.iter().position(|(kd, kb, _)| *kd == depth && *kb == be) {
            return k;
        }
        let integ = if be {
            Integrator::BackwardEuler
        } else {
            self.integrator
        };
        self.kinds
            .push((depth, be, StepKind::new(self.comp, self.dt / f64::powi(2.0, depth as i32), integ)));
        self.kinds.len() - 1
    }

    /// One implicit step of kind `k` from state `from` to `time`, with `x`
    /// as the Newton guess. Updates `caps` and leaves the solution in `x`.
    /// With `limit`, a solution moving any node by more than
    /// [`MAX_STEP_DV`] is rejected.
    fn solve(
        &mut self,
        k: usize,
        time: f64,
        from: &[f64],
        limit: bool,
        x: &mut [f64],
        caps: &mut CapState,
    ) -> Result<(), (usize, f64)> {
        let kind = &mut self.kinds[k].2;
        for (c, ih) in self.companion.ihist.iter_mut().enumerate() {
            *ih = kind.geq[c] * caps.v[c] + if kind.trap { caps.i[c] } else { 0.0 };
        }
        self.companion.geq.copy_from_slice(&kind.geq);
        self.companion.time = time;
        let mode = Mode::Transient {
            time,
            ihist: &self.companion.ihist,
        };
        match newton(self.comp, &mode, &mut kind.ws, x, &self.tol, self.max_iters) {
            NewtonResult::Converged { iters, residual } => {
                self.stats.total_newton_iters += iters as u64;
                if limit {
                    let n = self.comp.n_nodes;
                    if let Some(i) = (0..n).find(|&i| (x[i] - from[i]).abs() > MAX_STEP_DV) {
                        return Err((i, x[i] - from[i]));
                    }
                }
                self.stats.max_kcl_residual = self.stats.max_kcl_residual.max(residual);
                for (c, cap) in self.comp.caps.iter().enumerate() {
                    let v = self.comp.cap_voltage(cap, x);
                    caps.i[c] = kind.geq[c] * v - self.companion.ihist[c];
                    caps.v[c] = v;
                }
                Ok(())
            }
            NewtonResult::Failed {
                iters,
                row,
                residual,
            } => {
                self.stats.total_newton_iters += iters as u64;
                Err((row, residual))
            }
            NewtonResult::Singular => Err((0, f64::INFINITY)),
        }
    }

    /// Advances one nominal step from `(x, caps)` at `time - dt` to `time`.
    /// Tries the predicted guess, then the previous point, then bisects the
    /// interval recursively. Returns the index of the step kind whose
    /// workspace holds the final MOSFET currents.
    fn advance(
        &mut self,
        time: f64,
        be: bool,
        guess: &[f64],
        x: &mut [f64],
        caps: &mut CapState,
    ) -> Result<usize, (usize, f64)> {
        let k = self.kind(0, be);
        let mut trial = guess.to_vec();
        let mut trial_caps = caps.clone();
        if self.solve(k, time, x, true, &mut trial, &mut trial_caps).is_ok() {
            x.copy_from_slice(&trial);
            *caps = trial_caps;
            return Ok(k);
        }
        if guess == x {
            self.bisect(time - self.dt, time, 1, be, x, caps)
        } else {
            self.interval(time - self.dt, time, 0, be, x, caps)
        }
    }

    /// Integrates `[t0, t1]` (of length `dt / 2^depth`) starting from `x`.
    fn interval(
        &mut self,
        t0: f64,
        t1: f64,
        depth: u32,
        be: bool,
        x: &mut [f64],
        caps: &mut CapState,
    ) -> Result<usize, (usize, f64)> {
        let k = self.kind(depth, be);
        let mut trial = x.to_vec();
        let mut trial_caps = caps.clone();
        match self.solve(k, t1, x, depth < MAX_BISECTIONS, &mut trial, &mut trial_caps) {
            Ok(()) => {
                x.copy_from_slice(&trial);
                *caps = trial_caps;
                Ok(k)
            }
            Err(e) if depth >= MAX_BISECTIONS => Err(e),
            Err(_) => self.bisect(t0, t1, depth + 1, be, x, caps),
        }
    }

    fn bisect(
        &mut self,
        t0: f64,
        t1: f64,
        depth: u32,
        be: bool,
        x: &mut [f64],
        caps: &mut CapState,
    ) -> Result<usize, (usize, f64)> {
        let mid = t0 + 0.5 * (t1 - t0);
        self.interval(t0, mid, depth, be, x, caps)?;
        // Only the first substep of a trapezoidal start uses backward Euler.
        self.interval(mid, t1, depth, false, x, caps)
    }
}

/// Runs a fixed-step transient, handing every accepted step (and the
/// initial state at `t = 0`) to `observer`. The run ends at `t_stop` or
/// when the observer returns [`Control::Stop`].
///
/// A step whose Newton iteration fails is retried from the previous point
/// and then by recursive halving (down to `dt / 2^24`) of the failing
/// part; only the state at the nominal time point is reported.
pub fn transient_observed(
    n: &Netlist,
    cfg: &TransientConfig,
    init: &InitialState,
    observer: &mut dyn StepObserver,
) -> Result<SolverStats, SolverError> {
    cfg.validate()?;
    let n_steps = cfg.step_count()?;
    let comp = Compiled::new(n, cfg.gmin);

    let start = initial_state(n, cfg, init)?;
    let mut x = start.to_unknowns();
    let mut x_prev = x.clone();
    let mut guess = x.clone();

    // Trapezoidal needs the capacitor currents at the start; they vanish
    // only at a true operating point, so other starts take one
    // backward-Euler step first.
    let be_first = cfg.integrator == Integrator::Trapezoidal
        && !matches!(init, InitialState::OperatingPoint);
    let mut caps = CapState {
        v: comp.caps.iter().map(|c| comp.cap_voltage(c, &x)).collect(),
        i: vec![0.0; comp.caps.len()],
    };
    let mut stepper = Stepper {
        comp: &comp,
        tol: Tolerances {
            v_abstol: cfg.v_abstol,
            v_reltol: cfg.v_reltol,
            i_abstol: cfg.i_abstol,
        },
        max_iters: cfg.max_newton_iters,
        integrator: cfg.integrator,
        dt: cfg.dt,
        kinds: Vec::new(),
        companion: Companion {
            time: 0.0,
            geq: vec![0.0; comp.caps.len()],
            ihist: vec![0.0; comp.caps.len()],
        },
        stats: SolverStats::default(),
    };

    let mut state = start;
    // MOSFET currents at the initial state.
    let mut id0 = vec![0.0; comp.mosfets.len()];
    {
        let mut jac = DenseMatrix::zeros(comp.dim);
        let mut f = vec![0.0; comp.dim];
        let lin = comp.linear_matrix(None);
        comp.load(&x, &Mode::Dc { source_scale: 1.0 }, &lin, &mut jac, &mut f, &mut id0);
    }
    let first = StepView {
        index: 0,
        time: 0.0,
        state: &state,
        mosfet_currents: &id0,
        companion: None,
    };
    if observer.observe(&first) == Control::Stop {
        return Ok(stepper.stats);
    }

    for step in 1..=n_steps {
        let time = step as f64 * cfg.dt;
        // Linear predictor from the two previous accepted points.
        for ((g, &a), &b) in guess.iter_mut().zip(&x).zip(&x_prev) {
            *g = if step > 1 { 2.0 * a - b } else { a };
        }
        x_prev.copy_from_slice(&x);
        let be = be_first && step == 1;
        let k = stepper
            .advance(time, be, &guess, &mut x, &mut caps)
            .map_err(|(row, residual)| {
                if residual.is_infinite() && row == 0 {
                    SolverError::Singular
                } else {
                    SolverError::TransientNonConvergence {
                        time,
                        node: row_name(n, &comp, row),
                        residual,
                    }
                }
            })?;
        stepper.stats.steps_taken += 1;

        state.voltages[1..].copy_from_slice(&x[..comp.n_nodes]);
        state.branch_currents.copy_from_slice(&x[comp.n_nodes..]);
        let view = StepView {
            index: step,
            time,
            state: &state,
            mosfet_currents: &stepper.kinds[k].2.ws.id,
            companion: Some(&stepper.companion),
        };
        if observer.observe(&view) == Control::Stop {
            break;
        }
    }
    Ok(stepper.stats)
}

/// Runs a transient from the DC operating point and records every step.
pub fn transient(n: &Netlist, cfg: &TransientConfig) -> Result<(Waveform, SolverStats), SolverError> {
    transient_from(n, cfg, &InitialState::OperatingPoint)
}

/// [`transient`] with an explicit choice of initial state.
pub fn transient_from(
    n: &Netlist,
    cfg: &TransientConfig,
    init: &InitialState,
) -> Result<(Waveform, SolverStats), SolverError> {
    let mut rec = WaveformRecorder::new(n, 1);
    let stats = transient_observed(n, cfg, init, &mut rec)?;
    Ok((rec.finish(), stats))
}
