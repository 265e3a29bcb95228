//! Flat `section.key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use neuroage_core::aging::{AgingParams, SECONDS_PER_YEAR};
use neuroage_core::analysis::{MeasureOptions, Spacing, SweepSpec};
use neuroage_core::units::parse_value;
use neuroage_core::variability::MismatchParams;
use neuroage_core::{AhParams, CircuitSpec, TransientConfig, VifParams};

/// Invalid configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CircuitSel {
    Ah,
    Vif,
    Both,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub circuit: CircuitSel,
    pub ah: AhParams,
    pub vif: VifParams,
    pub transient: TransientConfig,
    pub measure: MeasureOptions,
    pub aging: AgingParams,
    pub mismatch: MismatchParams,
    pub sweep: SweepSpec,
    pub mc_runs: usize,
    /// Waveform CSVs keep every n-th step.
    pub decimation: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            circuit: CircuitSel::Ah,
            ah: AhParams::default(),
            vif: VifParams::default(),
            transient: TransientConfig::default(),
            measure: MeasureOptions::default(),
            aging: AgingParams::default(),
            mismatch: MismatchParams::default(),
            sweep: SweepSpec::default(),
            mc_runs: 1000,
            decimation: 10,
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

fn num(key: &str, v: &str) -> Result<f64, ConfigError> {
    parse_value(v).ok_or_else(|| ConfigError(format!("{key}: bad number '{v}'")))
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError(format!("{key}: bad integer '{v}'")))
}

fn opt_num(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl RunConfig {
    pub fn circuits(&self) -> Vec<CircuitSpec> {
        match self.circuit {
            CircuitSel::Ah => vec![CircuitSpec::Ah(self.ah)],
            CircuitSel::Vif => vec![CircuitSpec::Vif(self.vif)],
            CircuitSel::Both => vec![CircuitSpec::Ah(self.ah), CircuitSpec::Vif(self.vif)],
        }
    }

    pub fn set_i_inj(&mut self, i: f64) {
        self.ah.i_inj = i;
        self.vif.i_inj = i;
    }

    pub fn set_years(&mut self, years: f64) {
        self.aging.t_life = years * SECONDS_PER_YEAR;
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let k = key;
        match key {
            "circuit" => {
                self.circuit = match v {
                    "ah" => CircuitSel::Ah,
                    "vif" => CircuitSel::Vif,
                    "both" => CircuitSel::Both,
                    _ => return Err(ConfigError(format!("circuit: unknown value '{v}'"))),
                }
            }
            "out" => self.out = PathBuf::from(v),
            "seed" | "mismatch.seed" => self.mismatch.seed = int(k, v)?,
            "jobs" => self.jobs = Some(int(k, v)?),
            "i_inj" => self.set_i_inj(num(k, v)?),

            "ah.c_m" => self.ah.c_m = num(k, v)?,
            "ah.c_f" => self.ah.c_f = num(k, v)?,
            "ah.i_inj" => self.ah.i_inj = num(k, v)?,
            "ah.v_ck" => self.ah.v_ck = num(k, v)?,
            "ah.v_dd" => self.ah.v_dd = num(k, v)?,

            "vif.c_m" => self.vif.c_m = num(k, v)?,
            "vif.c_k" => self.vif.c_k = num(k, v)?,
            "vif.i_inj" => self.vif.i_inj = num(k, v)?,
            "vif.v_thr" => self.vif.v_thr = num(k, v)?,
            "vif.v_pw" => self.vif.v_pw = num(k, v)?,
            "vif.v_rfr" => self.vif.v_rfr = num(k, v)?,
            "vif.v_lk" => self.vif.v_lk = num(k, v)?,
            "vif.v_bias" => self.vif.v_bias = num(k, v)?,
            "vif.v_dd" => self.vif.v_dd = num(k, v)?,

            "transient.t_stop" => self.transient.t_stop = num(k, v)?,
            "transient.dt" => self.transient.dt = num(k, v)?,
            "transient.integrator" => {
                self.transient.integrator = v.parse().map_err(|e| ConfigError(format!("{k}: {e}")))?
            }
            "transient.v_abstol" => self.transient.v_abstol = num(k, v)?,
            "transient.v_reltol" => self.transient.v_reltol = num(k, v)?,
            "transient.i_abstol" => self.transient.i_abstol = num(k, v)?,
            "transient.max_newton_iters" => self.transient.max_newton_iters = int(k, v)?,
            "transient.gmin" => self.transient.gmin = num(k, v)?,
            "transient.step_budget" => self.transient.step_budget = int(k, v)?,

            "measure.target_spikes" => self.measure.target_spikes = int(k, v)?,
            "measure.t_min" => self.measure.t_min = num(k, v)?,
            "measure.t_max" => self.measure.t_max = num(k, v)?,
            "measure.idle_timeout" => self.measure.idle_timeout = opt_num(k, v)?,
            "measure.latch_timeout" => self.measure.latch_timeout = opt_num(k, v)?,

            "aging.t_life_years" => self.set_years(num(k, v)?),
            "aging.phi_bti" => self.aging.phi_bti = num(k, v)?,
            "aging.n_bti" => self.aging.n_bti = num(k, v)?,
            "aging.phi_hci" => self.aging.phi_hci = num(k, v)?,
            "aging.m_hci" => self.aging.m_hci = num(k, v)?,
            "aging.bti_stress_fraction" => self.aging.bti_stress_fraction = num(k, v)?,
            "aging.hci_vds_fraction" => self.aging.hci_vds_fraction = num(k, v)?,
            "aging.phi_bti_nmos" => self.aging.phi_bti_nmos = opt_num(k, v)?,
            "aging.phi_bti_pmos" => self.aging.phi_bti_pmos = opt_num(k, v)?,

            "mismatch.a_vt" => self.mismatch.a_vt = num(k, v)?,

            "sweep.i_min" => self.sweep.i_min = num(k, v)?,
            "sweep.i_max" => self.sweep.i_max = num(k, v)?,
            "sweep.points" => self.sweep.n_points = int(k, v)?,
            "sweep.spacing" => {
                self.sweep.spacing = v.parse::<Spacing>().map_err(|e| ConfigError(format!("{k}: {e}")))?
            }

            "mc.runs" => self.mc_runs = int(k, v)?,
            "output.decimation" => self.decimation = int(k, v)?,

            _ => return Err(ConfigError(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses config text. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected 'key = value'", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: String| ConfigError(e);
        self.ah.validate().map_err(|e| wrap(e.to_string()))?;
        self.vif.validate().map_err(|e| wrap(e.to_string()))?;
        self.transient.validate().map_err(|e| wrap(e.to_string()))?;
        self.measure.validate().map_err(|e| wrap(e.to_string()))?;
        self.aging.validate().map_err(wrap)?;
        self.mismatch.validate().map_err(|e| wrap(e.to_string()))?;
        self.sweep.validate().map_err(|e| wrap(e.to_string()))?;
        if self.mc_runs < 2 {
            return Err(wrap(format!("mc.runs must be at least 2, got {}", self.mc_runs)));
        }
        if self.decimation == 0 {
            return Err(wrap("output.decimation must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(wrap("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_core() {
        let c = RunConfig::default();
        assert_eq!(c.transient, TransientConfig::default());
        assert_eq!(c.aging, AgingParams::default());
        assert_eq!(c.sweep, SweepSpec::default());
        assert_eq!(c.mc_runs, 1000);
        c.validate().unwrap();
    }

    #[test]
    fn sections_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# lifetime\naging.t_life_years = 5\n\ntransient.dt = 2n  # coarser\nvif.i_inj=3u\ncircuit = both\n",
        )
        .unwrap();
        assert_eq!(c.aging.t_life, 5.0 * SECONDS_PER_YEAR);
        assert_eq!(c.transient.dt, 2e-9);
        assert_eq!(c.vif.i_inj, 3e-6);
        assert_eq!(c.circuit, CircuitSel::Both);
    }

    #[test]
    fn unknown_key_named() {
        let mut c = RunConfig::default();
        let e = c.apply_text("aging.lifetime = 3\n").unwrap_err();
        assert!(e.0.contains("aging.lifetime"), "{e}");
        assert!(e.0.contains("line 1"), "{e}");
    }

    #[test]
    fn bad_values() {
        let mut c = RunConfig::default();
        assert!(c.set("transient.dt", "fast").is_err());
        assert!(c.set("circuit", "lif").is_err());
        assert!(c.apply_text("no equals sign").is_err());
        c.set("mc.runs", "1").unwrap();
        assert!(c.validate().is_err());
    }
}
