//! Time-zero threshold mismatch and Monte Carlo over it.

use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{measure, MeasureOptions};
use crate::error::AnalysisError;
use crate::netlist::{apply_delta_vth, CircuitSpec, DeltaVthMap, Netlist};
use crate::solver::TransientConfig;

/// Pelgrom threshold mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchParams {
    /// mV·µm
    pub a_vt: f64,
    pub seed: u64,
}

impl Default for MismatchParams {
    fn default() -> Self {
        MismatchParams { a_vt: 3.5, seed: 42 }
    }
}

impl MismatchParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.a_vt > 0.0 && self.a_vt.is_finite()) {
            return Err(AnalysisError::InvalidParameter(format!(
                "a_vt must be positive, got {}",
                self.a_vt
            )));
        }
        Ok(())
    }

    /// Threshold sigma in volts for a `w` x `l` (µm) device.
    pub fn sigma(&self, w: f64, l: f64) -> f64 {
        self.a_vt / (w * l).sqrt() * 1e-3
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Stream key for one device in one run. Only depends on its inputs, so
/// runs can be generated in any order or in isolation.
fn stream_key(seed: u64, run: u64, device: &str) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ run) ^ fnv1a(device))
}

/// One standard-normal draw per MOSFET, scaled by its Pelgrom sigma.
pub fn sample_vth_offsets(n: &Netlist, p: &MismatchParams, run: u64) -> DeltaVthMap {
    n.mosfets()
        .map(|(name, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_key(p.seed, run, name));
            let z: f64 = StandardNormal.sample(&mut rng);
            (name.to_string(), z * p.sigma(m.w, m.l))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_runs: usize,
    pub circuit: CircuitSpec,
    pub transient: TransientConfig,
    pub measure: MeasureOptions,
}

impl McConfig {
    pub fn new(circuit: CircuitSpec) -> Self {
        McConfig {
            n_runs: 1000,
            circuit,
            transient: TransientConfig::default(),
            measure: MeasureOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_runs < 2 {
            return Err(AnalysisError::InvalidParameter(format!(
                "n_runs must be at least 2, got {}",
                self.n_runs
            )));
        }
        self.transient.validate()?;
        self.measure.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    NoSpike,
    SolverFail,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NoSpike => "no_spike",
            RunStatus::SolverFail => "solver_fail",
        }
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ok" => Ok(RunStatus::Ok),
            "no_spike" => Ok(RunStatus::NoSpike),
            "solver_fail" => Ok(RunStatus::SolverFail),
            _ => Err(format!("unknown run status '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub index: usize,
    /// Zero unless `status` is `Ok`.
    pub f_spk: f64,
    pub status: RunStatus,
}

/// Monte Carlo outcome. Moments, probit series and correlation use the
/// `Ok` runs only; with fewer than two of them the statistics are NaN and
/// the series is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub runs: Vec<McRun>,
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
    pub probit: Vec<(f64, f64)>,
    pub quantile_correlation: f64,
}

impl McResult {
    pub fn count(&self, s: RunStatus) -> usize {
        self.runs.iter().filter(|r| r.status == s).count()
    }

    pub fn spiking_samples(&self) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.status == RunStatus::Ok)
            .map(|r| r.f_spk)
            .collect()
    }

    /// Builds the statistics from per-run outcomes.
    pub fn from_runs(runs: Vec<McRun>) -> Self {
        let mut r = McResult {
            runs,
            mean: f64::NAN,
            sd: f64::NAN,
            cv: f64::NAN,
            probit: Vec::new(),
            quantile_correlation: f64::NAN,
        };
        let x = r.spiking_samples();
        if let Ok(p) = probit_series(&x) {
            let n = x.len() as f64;
            r.mean = x.iter().sum::<f64>() / n;
            r.sd = (x.iter().map(|v| (v - r.mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            r.cv = r.sd / r.mean;
            r.quantile_correlation = quantile_correlation(&p);
            r.probit = p;
        }
        r
    }
}

fn mc_run(cfg: &McConfig, base: &Netlist, p: &MismatchParams, index: usize) -> McRun {
    let offsets = sample_vth_offsets(base, p, index as u64);
    let result = apply_delta_vth(base, &offsets)
        .map_err(AnalysisError::from)
        .and_then(|n| measure(&n, &cfg.transient, &cfg.measure, None));
    let (f_spk, status) = match result {
        Ok(m) if m.frequency.no_spike => (0.0, RunStatus::NoSpike),
        Ok(m) => (m.frequency.f_spk, RunStatus::Ok),
        Err(_) => (0.0, RunStatus::SolverFail),
    };
    McRun {
        index,
        f_spk,
        status,
    }
}

/// Runs `cfg.n_runs` mismatch samples of the fresh circuit on the current
/// rayon pool. Solver failures are recorded per run.
pub fn run_monte_carlo(cfg: &McConfig, p: &MismatchParams) -> Result<McResult, AnalysisError> {
    cfg.validate()?;
    p.validate()?;
    let base = cfg.circuit.build()?;
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| mc_run(cfg, &base, p, i))
        .collect();
    Ok(McResult::from_runs(runs))
}

/// Sorted samples paired with standard-normal quantiles at Blom plotting
/// positions `(i - 0.375) / (n + 0.25)`.
pub fn probit_series(samples: &[f64]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if samples.len() < 2 || samples.iter().any(|x| !x.is_finite()) {
        return Err(AnalysisError::TooFewSamples {
            needed: 2,
            got: samples.iter().filter(|x| x.is_finite()).count(),
        });
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.into_iter()
        .enumerate()
        .map(|(i, v)| (v, normal_quantile((i as f64 + 1.0 - 0.375) / (n + 0.25))))
        .collect())
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Pearson correlation of a probit series; 1 for exactly Gaussian data.
pub fn quantile_correlation(series: &[(f64, f64)]) -> f64 {
    let n = series.len() as f64;
    let (mx, mq) = series
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, q)| (a + x / n, b + q / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, q) in series {
        let (dx, dq) = (x - mx, q - mq);
        sxy += dx * dq;
        sxx += dx * dx;
        syy += dq * dq;
    }
    sxy / (sxx * syy).sqrt()
}

fn bad(m: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, m)
}

fn data_rows<R: BufRead>(r: R, fields: usize) -> io::Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if f.len() != fields {
            return Err(bad(format!("line {}: expected {fields} fields", i + 1)));
        }
        out.push(f);
    }
    Ok(out)
}

fn num<T: FromStr>(s: &str) -> io::Result<T> {
    s.parse().map_err(|_| bad(format!("bad number '{s}'")))
}

pub fn write_mc_runs_csv<W: Write>(mut w: W, runs: &[McRun]) -> io::Result<()> {
    writeln!(w, "run,fspk_hz,status")?;
    for r in runs {
        writeln!(w, "{},{:e},{}", r.index, r.f_spk, r.status.as_str())?;
    }
    Ok(())
}

pub fn read_mc_runs_csv<R: BufRead>(r: R) -> io::Result<Vec<McRun>> {
    data_rows(r, 3)?
        .into_iter()
        .map(|f| {
            Ok(McRun {
                index: num(&f[0])?,
                f_spk: num(&f[1])?,
                status: f[2].parse().map_err(bad)?,
            })
        })
        .collect()
}

pub fn write_probit_csv<W: Write>(mut w: W, series: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "value_hz,normal_quantile")?;
    for (x, q) in series {
        writeln!(w, "{x:e},{q:e}")?;
    }
    Ok(())
}

pub fn read_probit_csv<R: BufRead>(r: R) -> io::Result<Vec<(f64, f64)>> {
    data_rows(r, 2)?
        .into_iter()
        .map(|f| Ok((num(&f[0])?, num(&f[1])?)))
        .collect()
}

/// Summary columns as written by [`write_mc_summary_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
    pub n_runs: usize,
    pub n_ok: usize,
    pub n_no_spike: usize,
    pub n_solver_fail: usize,
    pub quantile_correlation: f64,
}

impl From<&McResult> for McSummary {
    fn from(r: &McResult) -> Self {
        McSummary {
            mean: r.mean,
            sd: r.sd,
            cv: r.cv,
            n_runs: r.runs.len(),
            n_ok: r.count(RunStatus::Ok),
            n_no_spike: r.count(RunStatus::NoSpike),
            n_solver_fail: r.count(RunStatus::SolverFail),
            quantile_correlation: r.quantile_correlation,
        }
    }
}

pub fn write_mc_summary_csv<W: Write>(mut w: W, s: &McSummary) -> io::Result<()> {
    writeln!(
        w,
        "mean_hz,sd_hz,cv,n_runs,n_ok,n_no_spike,n_solver_fail,quantile_correlation"
    )?;
    writeln!(
        w,
        "{:e},{:e},{:e},{},{},{},{},{:e}",
        s.mean, s.sd, s.cv, s.n_runs, s.n_ok, s.n_no_spike, s.n_solver_fail, s.quantile_correlation
    )
}

pub fn read_mc_summary_csv<R: BufRead>(r: R) -> io::Result<McSummary> {
    let rows = data_rows(r, 8)?;
    let f = rows.first().ok_or_else(|| bad("missing summary row".into()))?;
    Ok(McSummary {
        mean: num(&f[0])?,
        sd: num(&f[1])?,
        cv: num(&f[2])?,
        n_runs: num(&f[3])?,
        n_ok: num(&f[4])?,
        n_no_spike: num(&f[5])?,
        n_solver_fail: num(&f[6])?,
        quantile_correlation: num(&f[7])?,
    })
}
