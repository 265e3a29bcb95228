use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use neuroage_core::aging::{aging_rows, write_aging_csv, StressProfile};
use neuroage_core::analysis::{
    compare_aging, run_sweep, spike_frequency, write_sweep_csv, DeviationReport, SpikeDetector,
    SpikeTrain, SPIKE_PROBE,
};
use neuroage_core::variability::{
    run_monte_carlo, write_mc_runs_csv, write_mc_summary_csv, write_probit_csv, McConfig,
    McResult, McSummary,
};
use neuroage_core::{
    transient_observed, AnalysisError, CircuitSpec, Control, InitialState, StepObserver,
    StepView, WaveformRecorder,
};

use crate::config::{CircuitSel, RunConfig};
use crate::svg::{Chart, Marker, COLORS};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Output directory for one circuit; `both` splits into subdirectories.
fn circuit_dir(cfg: &RunConfig, spec: &CircuitSpec) -> Result<PathBuf> {
    let dir = match cfg.circuit {
        CircuitSel::Both => cfg.out.join(spec.name()),
        _ => cfg.out.clone(),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    for spec in cfg.circuits() {
        let dir = circuit_dir(cfg, &spec)?;
        let n = spec.build().map_err(AnalysisError::from)?;
        let spk = n
            .probe_node(SPIKE_PROBE)
            .ok_or_else(|| AnalysisError::MissingProbe(SPIKE_PROBE.into()))?;
        let mut rec = WaveformRecorder::new(&n, cfg.decimation);
        let mut det = SpikeDetector::new(spec.v_dd());
        let mut spikes = Vec::new();
        let mut obs = |s: &StepView<'_>| {
            rec.observe(s);
            if let Some(t) = det.push(s.time, s.state.voltages[spk.0]) {
                spikes.push(t);
            }
            Control::Continue
        };
        transient_observed(&n, &cfg.transient, &InitialState::Quiescent, &mut obs)?;
        let wf = rec.finish();
        let f = spike_frequency(&SpikeTrain {
            spike_times: spikes,
        });

        let mut w = create(&dir.join("waveform.csv"))?;
        wf.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("currents.csv"))?;
        wf.write_currents_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("summary.csv"))?;
        writeln!(w, "circuit,i_inj_a,f_spk_hz,n_spikes,no_spike,mean_isi_s,isi_cv")?;
        writeln!(
            w,
            "{},{:e},{:e},{},{},{:e},{:e}",
            spec.name(),
            spec.i_inj(),
            f.f_spk,
            f.n_spikes,
            f.no_spike,
            f.mean_isi,
            f.isi_cv
        )?;
        w.flush()?;
        println!(
            "{}: i_inj={:e} A f_spk={:e} Hz n_spikes={} no_spike={}",
            spec.name(),
            spec.i_inj(),
            f.f_spk,
            f.n_spikes,
            f.no_spike
        );
    }
    Ok(())
}

fn write_stress_csv<W: Write>(mut w: W, s: &StressProfile) -> std::io::Result<()> {
    writeln!(w, "device,polarity,duty_bti,toggle_rate_hz")?;
    for d in &s.devices {
        writeln!(w, "{},{},{:e},{:e}", d.device, d.polarity, d.duty_bti, d.toggle_rate)?;
    }
    Ok(())
}

pub fn age(cfg: &RunConfig) -> Result<()> {
    for spec in cfg.circuits() {
        let dir = circuit_dir(cfg, &spec)?;
        let n = spec.build().map_err(AnalysisError::from)?;
        let cmp = compare_aging(&n, &cfg.transient, &cfg.measure, &cfg.aging)?;

        let mut w = create(&dir.join("stress.csv"))?;
        write_stress_csv(&mut w, &cmp.stress)?;
        w.flush()?;
        let mut w = create(&dir.join("aging.csv"))?;
        write_aging_csv(&mut w, &aging_rows(&cmp.stress, &cfg.aging))?;
        w.flush()?;

        let mut report = DeviationReport {
            i_inj: spec.i_inj(),
            fresh_f_spk: cmp.fresh.frequency.f_spk,
            aged_f_spk: cmp.aged.frequency.f_spk,
            percent_deviation: None,
            fresh_no_spike: cmp.fresh.frequency.no_spike,
            aged_no_spike: cmp.aged.frequency.no_spike,
            error: None,
        };
        let verdict = match cmp.deviation() {
            Ok(d) => {
                report.percent_deviation = d.percent;
                report.aged_no_spike = d.aged_no_spike;
                match d.percent {
                    Some(p) => format!("percent_deviation={p:e}"),
                    None => "aged_no_spike=true".to_string(),
                }
            }
            Err(e) => e.to_string(),
        };
        let mut w = create(&dir.join("deviation.csv"))?;
        write_sweep_csv(&mut w, std::slice::from_ref(&report))?;
        w.flush()?;
        println!(
            "{}: i_inj={:e} A fresh_f_spk={:e} Hz aged_f_spk={:e} Hz {verdict}",
            spec.name(),
            spec.i_inj(),
            report.fresh_f_spk,
            report.aged_f_spk
        );
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let mut chart = Chart::new(
        "Aged vs fresh spiking frequency",
        "injected current (A)",
        "deviation (%)",
    )
    .log_x();
    for (k, spec) in cfg.circuits().into_iter().enumerate() {
        let rows = run_sweep(&spec, &cfg.sweep, &cfg.aging, &cfg.transient, &cfg.measure)?;
        let mut w = create(&cfg.out.join(format!("sweep_{}.csv", spec.name())))?;
        write_sweep_csv(&mut w, &rows)?;
        w.flush()?;

        let color = COLORS[k % COLORS.len()];
        let line: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.percent_deviation.map(|p| (r.i_inj, p)))
            .collect();
        // Aged no-spike points sit at -100 %: the frequency is gone.
        let dead: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.aged_no_spike)
            .map(|r| (r.i_inj, -100.0))
            .collect();
        chart
            .line(line.clone(), color)
            .points(line, color, Marker::Dot)
            .legend(&spec.name().to_uppercase(), color);
        if !dead.is_empty() {
            chart
                .points(dead, color, Marker::Cross)
                .legend(&format!("{} aged no spike", spec.name().to_uppercase()), color);
        }
        for r in &rows {
            let status = match (&r.error, r.percent_deviation) {
                (Some(e), _) => format!("error: {e}"),
                (None, Some(p)) => format!("{p:+.3} %"),
                (None, None) if r.fresh_no_spike => "fresh no spike".into(),
                (None, None) => "aged no spike".into(),
            };
            println!("{} {:.4e} A  {status}", spec.name(), r.i_inj);
        }
    }
    write_text(&cfg.out.join("deviation.svg"), &chart.render())
}

fn gaussian_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn histogram_svg(name: &str, r: &McResult) -> String {
    let x = r.spiking_samples();
    let mut chart = Chart::new(
        &format!("{} spiking frequency under mismatch", name.to_uppercase()),
        "f_spk (Hz)",
        "runs",
    );
    if x.len() >= 2 && r.sd > 0.0 {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = ((x.len() as f64).sqrt().ceil() as usize).clamp(5, 40);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in &x {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        let bars = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c as f64))
            .collect();
        let scale = x.len() as f64 * width;
        let (a, b) = (lo.min(r.mean - 4.0 * r.sd), hi.max(r.mean + 4.0 * r.sd));
        let curve = (0..=200)
            .map(|i| {
                let t = a + (b - a) * i as f64 / 200.0;
                (t, scale * gaussian_pdf(t, r.mean, r.sd))
            })
            .collect();
        chart
            .bars(bars, COLORS[0])
            .line(curve, COLORS[1])
            .legend("runs", COLORS[0])
            .legend("fitted Gaussian", COLORS[1]);
    }
    chart.render()
}

fn probit_svg(name: &str, r: &McResult) -> String {
    let mut chart = Chart::new(
        &format!("{} probit plot", name.to_uppercase()),
        "f_spk (Hz)",
        "standard normal quantile",
    );
    if !r.probit.is_empty() {
        chart.points(r.probit.clone(), COLORS[0], Marker::Dot);
        if r.sd > 0.0 {
            let (q0, q1) = (r.probit[0].1, r.probit[r.probit.len() - 1].1);
            chart.line(
                vec![(r.mean + r.sd * q0, q0), (r.mean + r.sd * q1, q1)],
                COLORS[1],
            );
        }
    }
    chart.render()
}

pub fn mc(cfg: &RunConfig) -> Result<()> {
    for spec in cfg.circuits() {
        let mc = McConfig {
            n_runs: cfg.mc_runs,
            circuit: spec,
            transient: cfg.transient.clone(),
            measure: cfg.measure.clone(),
        };
        let r = run_monte_carlo(&mc, &cfg.mismatch)?;
        let name = spec.name();
        let path = |suffix: &str| cfg.out.join(format!("mc_{name}_{suffix}"));
        let mut w = create(&path("runs.csv"))?;
        write_mc_runs_csv(&mut w, &r.runs)?;
        w.flush()?;
        let mut w = create(&path("probit.csv"))?;
        write_probit_csv(&mut w, &r.probit)?;
        w.flush()?;
        let s = McSummary::from(&r);
        let mut w = create(&path("summary.csv"))?;
        write_mc_summary_csv(&mut w, &s)?;
        w.flush()?;
        write_text(&path("hist.svg"), &histogram_svg(name, &r))?;
        write_text(&path("probit.svg"), &probit_svg(name, &r))?;
        println!(
            "{name}: runs={} ok={} no_spike={} solver_fail={} mean={:e} Hz sd={:e} Hz cv={:e} quantile_correlation={:e}",
            s.n_runs, s.n_ok, s.n_no_spike, s.n_solver_fail, s.mean, s.sd, s.cv, s.quantile_correlation
        );
    }
    Ok(())
}
