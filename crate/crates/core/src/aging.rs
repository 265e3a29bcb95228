//! Stress extraction and power-law BTI/HCI threshold shifts.

use std::io::{self, BufRead, Write};

use crate::devices::Polarity;
use crate::error::AnalysisError;
use crate::netlist::{apply_delta_vth, DeltaVthMap, Element, Netlist, NodeId};
use crate::solver::{
    transient_observed, Control, InitialState, StepObserver, StepView, TransientConfig, Waveform,
};

/// Seconds in ten Julian-ish years, the default lifetime.
pub const TEN_YEARS: f64 = 3.156e8;
pub const SECONDS_PER_YEAR: f64 = TEN_YEARS / 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AgingParams {
    pub t_life: f64,
    /// BTI prefactor, volts per second^n_bti.
    pub phi_bti: f64,
    pub n_bti: f64,
    /// HCI prefactor, volts per toggle^m_hci.
    pub phi_hci: f64,
    pub m_hci: f64,
    pub bti_stress_fraction: f64,
    pub hci_vds_fraction: f64,
    /// Per-polarity replacements for `phi_bti`.
    pub phi_bti_nmos: Option<f64>,
    pub phi_bti_pmos: Option<f64>,
}

impl Default for AgingParams {
    fn default() -> Self {
        AgingParams {
            t_life: TEN_YEARS,
            phi_bti: 2.0e-3,
            n_bti: 1.0 / 6.0,
            phi_hci: 5.0e-9,
            m_hci: 0.5,
            bti_stress_fraction: 0.5,
            hci_vds_fraction: 0.5,
            phi_bti_nmos: None,
            phi_bti_pmos: None,
        }
    }
}

impl AgingParams {
    pub fn with_years(mut self, years: f64) -> Self {
        self.t_life = years * SECONDS_PER_YEAR;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.t_life >= 0.0 && self.t_life.is_finite()) {
            return Err("t_life must be a non-negative number of seconds".into());
        }
        if !in_unit(self.n_bti) || !in_unit(self.m_hci) {
            return Err("aging exponents must lie in (0, 1)".into());
        }
        if !in_unit(self.bti_stress_fraction) || !in_unit(self.hci_vds_fraction) {
            return Err("stress fractions must lie in (0, 1)".into());
        }
        let prefactors = [Some(self.phi_bti), Some(self.phi_hci), self.phi_bti_nmos, self.phi_bti_pmos];
        if prefactors.iter().flatten().any(|p| !(*p >= 0.0)) {
            return Err("aging prefactors must be non-negative".into());
        }
        Ok(())
    }

    fn phi_bti_for(&self, polarity: Polarity) -> f64 {
        match polarity {
            Polarity::Nmos => self.phi_bti_nmos,
            Polarity::Pmos => self.phi_bti_pmos,
        }
        .unwrap_or(self.phi_bti)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStress {
    pub device: String,
    pub polarity: Polarity,
    pub duty_bti: f64,
    pub toggle_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StressProfile {
    pub devices: Vec<DeviceStress>,
}

impl StressProfile {
    pub fn get(&self, device: &str) -> Option<&DeviceStress> {
        self.devices.iter().find(|d| d.device == device)
    }
}

struct Tracked {
    name: String,
    polarity: Polarity,
    d: NodeId,
    g: NodeId,
    s: NodeId,
    stressed: u64,
    above: Option<bool>,
    crossings: u64,
}

/// Streaming stress counter; usable as a solver observer or fed from a
/// stored waveform.
pub struct StressAccumulator {
    devices: Vec<Tracked>,
    bti_threshold: f64,
    hci_threshold: f64,
    samples: u64,
    t_first: Option<f64>,
    t_last: f64,
}

impl StressAccumulator {
    pub fn new(n: &Netlist, v_dd: f64, p: &AgingParams) -> Self {
        let devices = n
            .devices()
            .iter()
            .filter_map(|dev| match &dev.element {
                Element::Mosfet {
                    drain,
                    gate,
                    source,
                    params,
                } => Some(Tracked {
                    name: dev.name.clone(),
                    polarity: params.polarity,
                    d: *drain,
                    g: *gate,
                    s: *source,
                    stressed: 0,
                    above: None,
                    crossings: 0,
                }),
                _ => None,
            })
            .collect();
        StressAccumulator {
            devices,
            bti_threshold: p.bti_stress_fraction * v_dd,
            hci_threshold: p.hci_vds_fraction * v_dd,
            samples: 0,
            t_first: None,
            t_last: 0.0,
        }
    }

    fn push(&mut self, time: f64, v: impl Fn(NodeId) -> f64) {
        self.t_first.get_or_insert(time);
        self.t_last = time;
        self.samples += 1;
        for dev in &mut self.devices {
            let vgs = v(dev.g) - v(dev.s);
            let stress = match dev.polarity {
                Polarity::Nmos => vgs,
                Polarity::Pmos => -vgs,
            };
            if stress > self.bti_threshold {
                dev.stressed += 1;
            }
            let above = (v(dev.d) - v(dev.s)).abs() > self.hci_threshold;
            if let Some(prev) = dev.above {
                if prev != above {
                    dev.crossings += 1;
                }
            }
            dev.above = Some(above);
        }
    }

    pub fn finish(&self) -> StressProfile {
        let span = self.t_first.map_or(0.0, |t0| self.t_last - t0);
        StressProfile {
            devices: self
                .devices
                .iter()
                .map(|d| DeviceStress {
                    device: d.name.clone(),
                    polarity: d.polarity,
                    duty_bti: if self.samples == 0 {
                        0.0
                    } else {
                        d.stressed as f64 / self.samples as f64
                    },
                    toggle_rate: if span > 0.0 {
                        d.crossings as f64 / span
                    } else {
                        0.0
                    },
                })
                .collect(),
        }
    }
}

impl StepObserver for StressAccumulator {
    fn observe(&mut self, step: &StepView<'_>) -> Control {
        let volts = &step.state.voltages;
        self.push(step.time, |id| volts[id.0]);
        Control::Continue
    }
}

/// Per-device stress statistics from a stored waveform of `n`.
pub fn extract_stress(
    w: &Waveform,
    n: &Netlist,
    p: &AgingParams,
) -> Result<StressProfile, AnalysisError> {
    let v_dd = n
        .supply_voltage()
        .ok_or_else(|| AnalysisError::WaveformMismatch("netlist has no supply source".into()))?;
    let mut acc = StressAccumulator::new(n, v_dd, p);
    let mut traces: Vec<Option<&[f64]>> = vec![None; n.node_count()];
    for dev in &acc.devices {
        for id in [dev.d, dev.g, dev.s] {
            if id.is_ground() || traces[id.0].is_some() {
                continue;
            }
            let tr = crate::solver::node_trace(w, n, id).ok_or_else(|| {
                AnalysisError::WaveformMismatch(format!(
                    "waveform has no trace for node '{}' of device {}",
                    n.node_name(id),
                    dev.name
                ))
            })?;
            if tr.len() != w.time.len() {
                return Err(AnalysisError::WaveformMismatch(format!(
                    "trace '{}' length differs from time axis",
                    n.node_name(id)
                )));
            }
            traces[id.0] = Some(tr);
        }
    }
    for (i, &t) in w.time.iter().enumerate() {
        acc.push(t, |id| traces[id.0].map_or(0.0, |tr| tr[i]));
    }
    Ok(acc.finish())
}

/// Split of one device's threshold shift into its two mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub struct AgingRow {
    pub device: String,
    pub duty_bti: f64,
    pub toggle_rate_hz: f64,
    pub dvth_bti: f64,
    pub dvth_hci: f64,
}

impl AgingRow {
    pub fn total(&self) -> f64 {
        self.dvth_bti + self.dvth_hci
    }
}

pub fn aging_rows(s: &StressProfile, p: &AgingParams) -> Vec<AgingRow> {
    s.devices
        .iter()
        .map(|d| {
            let bti_time = d.duty_bti * p.t_life;
            let toggles = d.toggle_rate * p.t_life;
            AgingRow {
                device: d.device.clone(),
                duty_bti: d.duty_bti,
                toggle_rate_hz: d.toggle_rate,
                dvth_bti: if bti_time > 0.0 {
                    p.phi_bti_for(d.polarity) * bti_time.powf(p.n_bti)
                } else {
                    0.0
                },
                dvth_hci: if toggles > 0.0 {
                    p.phi_hci * toggles.powf(p.m_hci)
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// `ΔVth = phi_bti (duty t_life)^n_bti + phi_hci (rate t_life)^m_hci` per
/// device.
pub fn compute_delta_vth(s: &StressProfile, p: &AgingParams) -> DeltaVthMap {
    aging_rows(s, p)
        .into_iter()
        .map(|r| {
            let total = r.total();
            (r.device, total)
        })
        .collect()
}

pub fn write_aging_csv<W: Write>(mut w: W, rows: &[AgingRow]) -> io::Result<()> {
    writeln!(w, "device,duty_bti,toggle_rate_hz,dvth_bti_v,dvth_hci_v,dvth_total_v")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.device,
            r.duty_bti,
            r.toggle_rate_hz,
            r.dvth_bti,
            r.dvth_hci,
            r.total()
        )?;
    }
    Ok(())
}

pub fn read_aging_csv<R: BufRead>(r: R) -> io::Result<Vec<AgingRow>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("line {}: expected 6 fields", i + 1)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number '{s}'", i + 1)));
        out.push(AgingRow {
            device: f[0].to_string(),
            duty_bti: num(f[1])?,
            toggle_rate_hz: num(f[2])?,
            dvth_bti: num(f[3])?,
            dvth_hci: num(f[4])?,
        });
    }
    Ok(out)
}

/// Fresh transient from rest (current sources off at `t = 0`), stress
/// extraction, threshold shifts, aged netlist.
pub fn age_circuit(
    n: &Netlist,
    cfg: &TransientConfig,
    p: &AgingParams,
) -> Result<(Netlist, StressProfile, DeltaVthMap), AnalysisError> {
    p.validate().map_err(AnalysisError::InvalidParameter)?;
    let v_dd = n
        .supply_voltage()
        .ok_or_else(|| AnalysisError::InvalidParameter("netlist has no supply source".into()))?;
    let mut acc = StressAccumulator::new(n, v_dd, p);
    transient_observed(n, cfg, &InitialState::Quiescent, &mut acc)?;
    let stress = acc.finish();
    let dvth = compute_delta_vth(&stress, p);
    let aged = apply_delta_vth(n, &dvth)?;
    Ok((aged, stress, dvth))
}
