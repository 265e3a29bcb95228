//! Spike detection, frequency extraction, fresh-vs-aged deviation and the
//! injection-current sweep.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;

use crate::aging::{compute_delta_vth, AgingParams, StressAccumulator, StressProfile};
use crate::error::AnalysisError;
use crate::netlist::{apply_delta_vth, CircuitSpec, DeltaVthMap, Netlist, NodeId};
use crate::solver::{
    transient_observed, Control, InitialState, SolverStats, StepObserver, StepView,
    TransientConfig, Waveform,
};

/// Output probe the detector reads.
pub const SPIKE_PROBE: &str = "spk";
/// Spikes dropped from the start of a train before measuring frequency.
pub const STARTUP_SPIKES: usize = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    pub spike_times: Vec<f64>,
}

/// Rising-edge detector at `v_dd / 2` that rearms only once the signal has
/// dropped below `0.3 v_dd`.
#[derive(Debug, Clone)]
pub struct SpikeDetector {
    high: f64,
    low: f64,
    armed: bool,
    prev: Option<(f64, f64)>,
}

impl SpikeDetector {
    pub fn new(v_dd: f64) -> Self {
        SpikeDetector {
            high: 0.5 * v_dd,
            low: 0.3 * v_dd,
            armed: true,
            prev: None,
        }
    }

    /// Feeds one sample; returns the interpolated crossing time when a
    /// spike registers.
    pub fn push(&mut self, t: f64, v: f64) -> Option<f64> {
        let mut hit = None;
        if let Some((t0, v0)) = self.prev {
            if self.armed && v0 < self.high && v >= self.high {
                let frac = (self.high - v0) / (v - v0);
                hit = Some(t0 + frac * (t - t0));
                self.armed = false;
            }
        } else if v >= self.high {
            // Starting above threshold is not an edge.
            self.armed = false;
        }
        if !self.armed && v < self.low {
            self.armed = true;
        }
        self.prev = Some((t, v));
        hit
    }
}

pub fn detect_spikes(w: &Waveform, v_dd: f64) -> Result<SpikeTrain, AnalysisError> {
    let trace = w
        .voltage(SPIKE_PROBE)
        .ok_or_else(|| AnalysisError::MissingProbe(SPIKE_PROBE.into()))?;
    let mut det = SpikeDetector::new(v_dd);
    let spike_times = w
        .time
        .iter()
        .zip(trace)
        .filter_map(|(&t, &v)| det.push(t, v))
        .collect();
    Ok(SpikeTrain { spike_times })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrequencyResult {
    pub f_spk: f64,
    pub n_spikes: usize,
    pub no_spike: bool,
    /// Mean inter-spike interval after the startup discard, seconds.
    pub mean_isi: f64,
    /// Coefficient of variation of those intervals.
    pub isi_cv: f64,
}

pub fn spike_frequency(t: &SpikeTrain) -> FrequencyResult {
    let n_spikes = t.spike_times.len();
    if n_spikes < STARTUP_SPIKES + 1 {
        return FrequencyResult {
            n_spikes,
            no_spike: true,
            ..Default::default()
        };
    }
    let kept = &t.spike_times[STARTUP_SPIKES..];
    let span = kept[kept.len() - 1] - kept[0];
    let intervals = kept.len() - 1;
    if intervals == 0 || span <= 0.0 {
        // One steady-state spike: counted, but no period to measure.
        return FrequencyResult {
            n_spikes,
            ..Default::default()
        };
    }
    let mean_isi = span / intervals as f64;
    let var = kept
        .windows(2)
        .map(|w| (w[1] - w[0] - mean_isi).powi(2))
        .sum::<f64>()
        / intervals as f64;
    FrequencyResult {
        f_spk: intervals as f64 / span,
        n_spikes,
        no_spike: false,
        mean_isi,
        isi_cv: var.sqrt() / mean_isi,
    }
}

/// Percentage change from fresh to aged frequency for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub percent: Option<f64>,
    pub aged_no_spike: bool,
}

pub fn percent_deviation(
    fresh: &FrequencyResult,
    aged: &FrequencyResult,
) -> Result<Deviation, AnalysisError> {
    if fresh.no_spike || fresh.f_spk <= 0.0 {
        return Err(AnalysisError::FreshNotSpiking);
    }
    if aged.no_spike || aged.f_spk <= 0.0 {
        return Ok(Deviation {
            percent: None,
            aged_no_spike: true,
        });
    }
    Ok(Deviation {
        percent: Some((aged.f_spk - fresh.f_spk) / fresh.f_spk * 100.0),
        aged_no_spike: false,
    })
}

/// Stopping rule for frequency measurements on a neuron circuit started
/// from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureOptions {
    /// Stop once this many spikes have been seen.
    pub target_spikes: usize,
    /// Never simulate less than this, seconds.
    pub t_min: f64,
    /// Hard cap, seconds.
    pub t_max: f64,
    /// Stop early when no spike arrives for this long, seconds.
    pub idle_timeout: Option<f64>,
    /// Stop early when the spike output stays high this long, seconds; a
    /// neuron whose reset cannot win is latched and will not fire again.
    pub latch_timeout: Option<f64>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            target_spikes: 50,
            t_min: 0.0,
            t_max: 20e-3,
            idle_timeout: None,
            latch_timeout: Some(0.5e-3),
        }
    }
}

impl MeasureOptions {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.target_spikes < STARTUP_SPIKES + 2 {
            return Err(AnalysisError::InvalidParameter(format!(
                "target_spikes must be at least {}",
                STARTUP_SPIKES + 2
            )));
        }
        if !(self.t_max > 0.0 && self.t_min >= 0.0 && self.t_min <= self.t_max) {
            return Err(AnalysisError::InvalidParameter(
                "need 0 <= t_min <= t_max and t_max > 0".into(),
            ));
        }
        if [self.idle_timeout, self.latch_timeout]
            .iter()
            .any(|t| matches!(t, Some(t) if !(*t > 0.0)))
        {
            return Err(AnalysisError::InvalidParameter(
                "timeouts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub train: SpikeTrain,
    pub frequency: FrequencyResult,
    pub stress: Option<StressProfile>,
    pub stats: SolverStats,
    /// Simulated time actually covered, seconds.
    pub t_end: f64,
}

struct MeasureObserver<'a> {
    spk: NodeId,
    det: SpikeDetector,
    train: Vec<f64>,
    opts: &'a MeasureOptions,
    stress: Option<StressAccumulator>,
    t_end: f64,
    high: f64,
    high_since: Option<f64>,
}

impl StepObserver for MeasureObserver<'_> {
    fn observe(&mut self, step: &StepView<'_>) -> Control {
        self.t_end = step.time;
        if let Some(acc) = &mut self.stress {
            acc.observe(step);
        }
        let v = step.state.voltages[self.spk.0];
        if let Some(t) = self.det.push(step.time, v) {
            self.train.push(t);
        }
        if v >= self.high {
            self.high_since.get_or_insert(step.time);
        } else {
            self.high_since = None;
        }
        if step.time < self.opts.t_min {
            return Control::Continue;
        }
        if self.train.len() >= self.opts.target_spikes {
            return Control::Stop;
        }
        if let (Some(limit), Some(since)) = (self.opts.latch_timeout, self.high_since) {
            if step.time - since > limit {
                return Control::Stop;
            }
        }
        if let Some(idle) = self.opts.idle_timeout {
            let since = self.train.last().copied().unwrap_or(0.0);
            if step.time - since > idle {
                return Control::Stop;
            }
        }
        Control::Continue
    }
}

/// Simulates `n` from rest with its current sources switched on at
/// `t = 0`, counting spikes on the `spk` probe until `opts` says stop.
/// With `aging`, device stress is accumulated over the same run.
pub fn measure(
    n: &Netlist,
    cfg: &TransientConfig,
    opts: &MeasureOptions,
    aging: Option<&AgingParams>,
) -> Result<Measurement, AnalysisError> {
    opts.validate()?;
    let v_dd = n
        .supply_voltage()
        .ok_or_else(|| AnalysisError::InvalidParameter("netlist has no supply source".into()))?;
    let spk = n
        .probe_node(SPIKE_PROBE)
        .ok_or_else(|| AnalysisError::MissingProbe(SPIKE_PROBE.into()))?;
    let mut obs = MeasureObserver {
        spk,
        det: SpikeDetector::new(v_dd),
        train: Vec::new(),
        opts,
        stress: aging.map(|p| StressAccumulator::new(n, v_dd, p)),
        t_end: 0.0,
        high: 0.5 * v_dd,
        high_since: None,
    };
    let run_cfg = TransientConfig {
        t_stop: opts.t_max,
        ..cfg.clone()
    };
    let stats = transient_observed(n, &run_cfg, &InitialState::Quiescent, &mut obs)?;
    let train = SpikeTrain {
        spike_times: obs.train,
    };
    Ok(Measurement {
        frequency: spike_frequency(&train),
        train,
        stress: obs.stress.map(|a| a.finish()),
        stats,
        t_end: obs.t_end,
    })
}

/// Fresh and aged measurements of one circuit instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AgingComparison {
    pub fresh: Measurement,
    pub aged: Measurement,
    pub stress: StressProfile,
    pub delta_vth: DeltaVthMap,
    pub aged_netlist: Netlist,
}

impl AgingComparison {
    pub fn deviation(&self) -> Result<Deviation, AnalysisError> {
        percent_deviation(&self.fresh.frequency, &self.aged.frequency)
    }
}

/// Idle timeout for the aged run, derived from the fresh one: generous
/// enough for a slowed-down neuron, short enough that a stuck one is
/// abandoned quickly.
fn aged_idle_timeout(fresh: &Measurement, opts: &MeasureOptions) -> Option<f64> {
    let first = *fresh.train.spike_times.first()?;
    let period = if fresh.frequency.f_spk > 0.0 {
        1.0 / fresh.frequency.f_spk
    } else {
        first
    };
    let idle = 5.0 * first + 20.0 * period;
    Some(opts.idle_timeout.map_or(idle, |t| t.min(idle)))
}

/// Fresh run with stress extraction, aging, aged run.
pub fn compare_aging(
    n: &Netlist,
    cfg: &TransientConfig,
    opts: &MeasureOptions,
    aging: &AgingParams,
) -> Result<AgingComparison, AnalysisError> {
    aging.validate().map_err(AnalysisError::InvalidParameter)?;
    let fresh = measure(n, cfg, opts, Some(aging))?;
    let stress = fresh.stress.clone().unwrap_or_default();
    let delta_vth = compute_delta_vth(&stress, aging);
    let aged_netlist = apply_delta_vth(n, &delta_vth)?;
    let aged_opts = MeasureOptions {
        idle_timeout: aged_idle_timeout(&fresh, opts),
        ..opts.clone()
    };
    let aged = if aged_netlist == *n {
        fresh.clone()
    } else {
        measure(&aged_netlist, cfg, &aged_opts, None)?
    };
    Ok(AgingComparison {
        fresh,
        aged,
        stress,
        delta_vth,
        aged_netlist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

impl std::str::FromStr for Spacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(Spacing::Log),
            "linear" | "lin" => Ok(Spacing::Linear),
            other => Err(format!("unknown spacing '{other}' (log|linear)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub i_min: f64,
    pub i_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            i_min: 0.2e-6,
            i_max: 60e-6,
            n_points: 20,
            spacing: Spacing::Log,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.i_min > 0.0 && self.i_min < self.i_max && self.i_max.is_finite()) {
            return Err(AnalysisError::InvalidParameter(
                "sweep needs 0 < i_min < i_max".into(),
            ));
        }
        if self.n_points < 2 {
            return Err(AnalysisError::InvalidParameter(
                "sweep needs at least 2 points".into(),
            ));
        }
        Ok(())
    }

    /// Sweep currents, endpoints included exactly.
    pub fn currents(&self) -> Vec<f64> {
        let last = self.n_points - 1;
        (0..self.n_points)
            .map(|k| {
                if k == 0 {
                    return self.i_min;
                }
                if k == last {
                    return self.i_max;
                }
                let f = k as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.i_min + f * (self.i_max - self.i_min),
                    Spacing::Log => self.i_min * (self.i_max / self.i_min).powf(f),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub i_inj: f64,
    pub fresh_f_spk: f64,
    pub aged_f_spk: f64,
    pub percent_deviation: Option<f64>,
    pub fresh_no_spike: bool,
    pub aged_no_spike: bool,
    /// Set when the point could not be evaluated.
    pub error: Option<String>,
}

fn sweep_point(
    circuit: &CircuitSpec,
    i_inj: f64,
    aging: &AgingParams,
    cfg: &TransientConfig,
    opts: &MeasureOptions,
) -> DeviationReport {
    let mut report = DeviationReport {
        i_inj,
        fresh_f_spk: 0.0,
        aged_f_spk: 0.0,
        percent_deviation: None,
        fresh_no_spike: true,
        aged_no_spike: false,
        error: None,
    };
    let result = circuit
        .with_i_inj(i_inj)
        .build()
        .map_err(AnalysisError::from)
        .and_then(|n| compare_aging(&n, cfg, opts, aging));
    match result {
        Ok(cmp) => {
            report.fresh_f_spk = cmp.fresh.frequency.f_spk;
            report.aged_f_spk = cmp.aged.frequency.f_spk;
            report.fresh_no_spike = cmp.fresh.frequency.no_spike;
            match cmp.deviation() {
                Ok(d) => {
                    report.percent_deviation = d.percent;
                    report.aged_no_spike = d.aged_no_spike;
                }
                Err(_) => report.aged_no_spike = cmp.aged.frequency.no_spike,
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Fresh/aged comparison at every sweep current. Points run in parallel on
/// the current rayon pool; the output is ordered by current.
pub fn run_sweep(
    circuit: &CircuitSpec,
    s: &SweepSpec,
    aging: &AgingParams,
    cfg: &TransientConfig,
    opts: &MeasureOptions,
) -> Result<Vec<DeviationReport>, AnalysisError> {
    s.validate()?;
    opts.validate()?;
    aging.validate().map_err(AnalysisError::InvalidParameter)?;
    cfg.validate()?;
    Ok(s.currents()
        .into_par_iter()
        .map(|i| sweep_point(circuit, i, aging, cfg, opts))
        .collect())
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[DeviationReport]) -> io::Result<()> {
    writeln!(w, "i_inj_a,fresh_fspk_hz,aged_fspk_hz,percent_deviation,aged_no_spike")?;
    for r in rows {
        let ok = r.error.is_none();
        writeln!(
            w,
            "{:e},{},{},{},{}",
            r.i_inj,
            opt_num(ok.then_some(r.fresh_f_spk)),
            opt_num(ok.then_some(r.aged_f_spk)),
            opt_num(r.percent_deviation),
            r.aged_no_spike
        )?;
    }
    Ok(())
}

/// Reads a sweep CSV. Rows with empty frequency fields come back with
/// `error` set to `"unavailable"`.
pub fn read_sweep_csv<R: BufRead>(r: R) -> io::Result<Vec<DeviationReport>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("line {}: expected 5 fields", i + 1)));
        }
        let num = |s: &str| -> io::Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| bad(format!("line {}: bad number '{s}'", i + 1)))
            }
        };
        let fresh = num(f[1])?;
        let aged = num(f[2])?;
        out.push(DeviationReport {
            i_inj: num(f[0])?.ok_or_else(|| bad(format!("line {}: missing current", i + 1)))?,
            fresh_f_spk: fresh.unwrap_or(0.0),
            aged_f_spk: aged.unwrap_or(0.0),
            percent_deviation: num(f[3])?,
            fresh_no_spike: fresh.map_or(true, |f| f <= 0.0),
            aged_no_spike: f[4]
                .parse()
                .map_err(|_| bad(format!("line {}: bad flag '{}'", i + 1, f[4])))?,
            error: fresh.is_none().then(|| "unavailable".to_string()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train(times: &[f64]) -> SpikeTrain {
        SpikeTrain {
            spike_times: times.to_vec(),
        }
    }

    #[test]
    fn empty_train_is_no_spike() {
        let f = spike_frequency(&train(&[]));
        assert!(f.no_spike);
        assert_eq!(f.f_spk, 0.0);
    }

    #[test]
    fn regular_train_frequency() {
        let times: Vec<f64> = (1..=12).map(|k| k as f64 * 1e-6).collect();
        let f = spike_frequency(&train(&times));
        assert!((f.f_spk - 1e6).abs() < 1e-6);
        assert_eq!(f.n_spikes, 12);
        assert!(f.isi_cv < 1e-9);
    }

    #[test]
    fn three_spikes_is_spiking_but_unmeasured() {
        let f = spike_frequency(&train(&[1.0, 2.0, 3.0]));
        assert!(!f.no_spike);
        assert_eq!(f.f_spk, 0.0);
    }

    #[test]
    fn detector_needs_rearm() {
        let mut d = SpikeDetector::new(1.0);
        let samples = [0.0, 1.0, 0.45, 0.55, 0.45, 0.2, 0.6];
        let hits: Vec<f64> = samples
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| d.push(i as f64, v))
            .collect();
        assert_eq!(hits, vec![0.5, 5.0 + 0.3 / 0.4]);
    }

    #[test]
    fn deviation_algebra() {
        let f = |x: f64| FrequencyResult {
            f_spk: x,
            n_spikes: 10,
            ..Default::default()
        };
        assert_eq!(percent_deviation(&f(1e5), &f(1e5)).unwrap().percent, Some(0.0));
        assert_eq!(percent_deviation(&f(1e5), &f(2e5)).unwrap().percent, Some(100.0));
        let dead = FrequencyResult {
            no_spike: true,
            ..Default::default()
        };
        assert_eq!(
            percent_deviation(&f(5e4), &dead).unwrap(),
            Deviation {
                percent: None,
                aged_no_spike: true
            }
        );
        assert_eq!(
            percent_deviation(&dead, &f(1.0)),
            Err(AnalysisError::FreshNotSpiking)
        );
    }

    #[test]
    fn sweep_endpoints_exact() {
        let s = SweepSpec {
            n_points: 2,
            spacing: Spacing::Linear,
            ..Default::default()
        };
        assert_eq!(s.currents(), vec![0.2e-6, 60e-6]);
        let c = SweepSpec::default().currents();
        assert_eq!(c.len(), 20);
        assert_eq!(c[0], 0.2e-6);
        assert_eq!(c[19], 60e-6);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows = vec![
            DeviationReport {
                i_inj: 1e-6,
                fresh_f_spk: 4.5e4,
                aged_f_spk: 4.4e4,
                percent_deviation: Some(-100.0 / 45.0),
                fresh_no_spike: false,
                aged_no_spike: false,
                error: None,
            },
            DeviationReport {
                i_inj: 1e-5,
                fresh_f_spk: 4.5e5,
                aged_f_spk: 0.0,
                percent_deviation: None,
                fresh_no_spike: false,
                aged_no_spike: true,
                error: None,
            },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
    }
}
