use std::io::{self, BufRead, Write};

use crate::netlist::{Netlist, NodeId};

use super::{Control, StepObserver, StepView};

/// Sampled transient output: node voltages, probe aliases into them, and
/// MOSFET drain currents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    pub time: Vec<f64>,
    pub nodes: Vec<String>,
    pub voltages: Vec<Vec<f64>>,
    /// `(alias, index into nodes)`
    pub probes: Vec<(String, usize)>,
    pub devices: Vec<String>,
    pub currents: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Voltage trace by probe alias, falling back to node name.
    pub fn voltage(&self, name: &str) -> Option<&[f64]> {
        let idx = self
            .probes
            .iter()
            .find(|(a, _)| a == name)
            .map(|&(_, i)| i)
            .or_else(|| self.nodes.iter().position(|n| n == name))?;
        Some(&self.voltages[idx])
    }

    pub fn current(&self, device: &str) -> Option<&[f64]> {
        self.devices
            .iter()
            .position(|d| d == device)
            .map(|i| self.currents[i].as_slice())
    }

    fn exported(&self) -> Vec<(&str, &[f64])> {
        if self.probes.is_empty() {
            self.nodes
                .iter()
                .zip(&self.voltages)
                .map(|(n, v)| (n.as_str(), v.as_slice()))
                .collect()
        } else {
            self.probes
                .iter()
                .map(|(a, i)| (a.as_str(), self.voltages[*i].as_slice()))
                .collect()
        }
    }

    /// Writes `time,<probe>...` CSV (every node when there are no probes).
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_columns(w, &self.time, &self.exported())
    }

    /// Writes `time,<device>...` CSV of MOSFET drain currents.
    pub fn write_currents_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let cols: Vec<(&str, &[f64])> = self
            .devices
            .iter()
            .zip(&self.currents)
            .map(|(d, c)| (d.as_str(), c.as_slice()))
            .collect();
        write_columns(w, &self.time, &cols)
    }

    /// Reads a voltage CSV written by [`Waveform::write_csv`]; every column
    /// becomes a node with an identically named probe.
    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Waveform> {
        let (time, names, cols) = read_columns(r)?;
        Ok(Waveform {
            time,
            probes: names.iter().cloned().zip(0..).collect(),
            nodes: names,
            voltages: cols,
            devices: Vec::new(),
            currents: Vec::new(),
        })
    }
}

fn write_columns<W: Write>(mut w: W, time: &[f64], cols: &[(&str, &[f64])]) -> io::Result<()> {
    write!(w, "time")?;
    for (n, _) in cols {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for (i, t) in time.iter().enumerate() {
        write!(w, "{t:e}")?;
        for (_, c) in cols {
            write!(w, ",{:e}", c[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

type Columns = (Vec<f64>, Vec<String>, Vec<Vec<f64>>);

fn read_columns<R: BufRead>(r: R) -> io::Result<Columns> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty CSV".into()))??;
    let mut head = header.split(',');
    if head.next().map(str::trim) != Some("time") {
        return Err(bad("first column must be 'time'".into()));
    }
    let names: Vec<String> = head.map(|c| c.trim().to_string()).collect();
    let mut time = Vec::new();
    let mut cols = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(format!("bad number on data row {}", i + 1)))?;
        if vals.len() != names.len() + 1 {
            return Err(bad(format!("wrong column count on data row {}", i + 1)));
        }
        time.push(vals[0]);
        for (c, v) in cols.iter_mut().zip(&vals[1..]) {
            c.push(*v);
        }
    }
    Ok((time, names, cols))
}

/// Observer that stores every `decimation`-th step into a [`Waveform`].
#[derive(Debug)]
pub struct WaveformRecorder {
    decimation: u64,
    wf: Waveform,
}

impl WaveformRecorder {
    pub fn new(n: &Netlist, decimation: u64) -> Self {
        let nodes: Vec<String> = n.nodes()[1..].to_vec();
        let probes = n
            .probes()
            .iter()
            .map(|p| (p.alias.clone(), p.node.0 - 1))
            .collect();
        let devices: Vec<String> = n.mosfets().map(|(name, _)| name.to_string()).collect();
        WaveformRecorder {
            wf: Waveform {
                time: Vec::new(),
                voltages: vec![Vec::new(); nodes.len()],
                nodes,
                probes,
                currents: vec![Vec::new(); devices.len()],
                devices,
            },
            decimation: decimation.max(1),
        }
    }

    pub fn finish(self) -> Waveform {
        self.wf
    }
}

impl StepObserver for WaveformRecorder {
    fn observe(&mut self, step: &StepView<'_>) -> Control {
        if step.index % self.decimation == 0 {
            self.wf.time.push(step.time);
            for (tr, v) in self.wf.voltages.iter_mut().zip(&step.state.voltages[1..]) {
                tr.push(*v);
            }
            for (tr, i) in self.wf.currents.iter_mut().zip(step.mosfet_currents) {
                tr.push(*i);
            }
        }
        Control::Continue
    }
}

/// Ground-aware lookup used by consumers that index nodes by id.
pub(crate) fn node_trace<'a>(wf: &'a Waveform, n: &Netlist, id: NodeId) -> Option<&'a [f64]> {
    if id.is_ground() {
        None
    } else {
        wf.nodes
            .iter()
            .position(|x| x == n.node_name(id))
            .map(|i| wf.voltages[i].as_slice())
    }
}
