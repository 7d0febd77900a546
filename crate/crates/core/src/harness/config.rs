//! JSON experiment configuration.
//!
//! Powers are given in dBm and the reference path loss in dB, as in the usual
//! link-budget notation; they are converted to linear units once, here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao::{AoConfig, SchemeKind};
use crate::channel::{FadingParams, Geometry};
use crate::error::{Error, Result};
use crate::phase::MmConfig;
use crate::transceiver::BisectionConfig;

/// `10^((dBm - 30) / 10)` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    pub reference_loss_db: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub rician_factor: f64,
}

impl FadingSection {
    pub fn to_params(&self) -> FadingParams {
        FadingParams {
            reference_loss: db_to_linear(self.reference_loss_db),
            los_exponent: self.los_exponent,
            nlos_exponent: self.nlos_exponent,
            rician_factor: self.rician_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: f64,
    pub eps_mm: f64,
    pub max_outer_iters: usize,
    pub max_mm_iters: usize,
    pub power_tol: f64,
    pub max_bisection_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            eps_mm: 1e-8,
            max_outer_iters: 500,
            max_mm_iters: 1000,
            power_tol: 1e-10,
            max_bisection_iters: 200,
        }
    }
}

/// Transmit power sweep at a fixed element count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSweep {
    pub elements: usize,
    pub power_dbm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<SchemeKind>>,
}

/// Element-count sweep at a fixed transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSweep {
    pub power_dbm: f64,
    pub elements: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<SchemeKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub antennas: usize,
    pub geometry: Geometry,
    pub fading: FadingSection,
    pub noise_power_dbm: f64,
    #[serde(default)]
    pub solver: SolverSection,
    /// Default scheme list; a sweep section may override it.
    pub schemes: Vec<SchemeKind>,
    pub power_sweep: PowerSweep,
    pub element_sweep: ElementSweep,
    /// Relative CSI-error variances, applied to all three links.
    pub error_variances: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Re-run one equalizer/beamformer update after phase quantization.
    #[serde(default = "yes")]
    pub refresh_after_quantization: bool,
    /// Use the same initial phases for every scheme of a trial.
    #[serde(default)]
    pub shared_initial_phases: bool,
    /// Record wall time per record. Off by default so that output is byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn yes() -> bool {
    true
}

fn finite_all(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn power_schemes(&self) -> &[SchemeKind] {
        self.power_sweep.schemes.as_deref().unwrap_or(&self.schemes)
    }

    pub fn element_schemes(&self) -> &[SchemeKind] {
        self.element_sweep.schemes.as_deref().unwrap_or(&self.schemes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.antennas == 0 {
            return bad("antennas must be >= 1");
        }
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        self.geometry.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fading.to_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !self.noise_power_dbm.is_finite() {
            return bad("noise_power_dbm must be finite");
        }
        if self.error_variances.is_empty() {
            return bad("error_variances must not be empty");
        }
        if !self.error_variances.iter().all(|&s| s >= 0.0 && s.is_finite()) {
            return bad("error variances must be finite and >= 0");
        }
        if self.power_sweep.power_dbm.is_empty() || !finite_all(&self.power_sweep.power_dbm) {
            return bad("power_sweep.power_dbm must be a non-empty list of finite values");
        }
        if self.element_sweep.elements.is_empty() || !self.element_sweep.power_dbm.is_finite() {
            return bad("element_sweep needs a non-empty element list and a finite power");
        }
        for (name, schemes) in [("power_sweep", self.power_schemes()), ("element_sweep", self.element_schemes())] {
            if schemes.is_empty() {
                return Err(Error::Config(format!("{name}: scheme list must not be empty")));
            }
            let mut seen = schemes.to_vec();
            seen.sort();
            seen.dedup();
            if seen.len() != schemes.len() {
                return Err(Error::Config(format!("{name}: duplicate scheme")));
            }
        }
        if self.power_sweep.elements == 0 && self.power_schemes().iter().any(|s| s.uses_irs()) {
            return bad("power_sweep: IRS schemes need elements >= 1");
        }
        if self.element_sweep.elements.contains(&0) && self.element_schemes().iter().any(|s| s.uses_irs()) {
            return bad("element_sweep: N = 0 is only valid with the no-irs scheme");
        }
        let s = &self.solver;
        if !(s.eps > 0.0) || !(s.eps_mm >= 0.0) || !(s.power_tol > 0.0) {
            return bad("solver tolerances must be positive");
        }
        if s.max_outer_iters == 0 || s.max_mm_iters == 0 || s.max_bisection_iters == 0 {
            return bad("solver iteration caps must be >= 1");
        }
        Ok(())
    }

    /// Solver settings at a given transmit power.
    pub fn ao_config(&self, power_dbm: f64) -> AoConfig {
        let s = &self.solver;
        AoConfig {
            eps: s.eps,
            mm: MmConfig { eps: s.eps_mm, max_iters: s.max_mm_iters },
            max_outer_iters: s.max_outer_iters,
            bisection: BisectionConfig { power_tol: s.power_tol, max_iters: s.max_bisection_iters, ..Default::default() },
            power: dbm_to_watts(power_dbm),
            noise: dbm_to_watts(self.noise_power_dbm),
        }
    }
}
