//! Alternating optimization of equalizer, beamformer and IRS phases, and the
//! four comparison schemes built on it.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelEstimate, ErrorStats};
use crate::error::{Error, Result};
use crate::objective::{build_quadratic, direct_quadratic, evaluate_mse, Design, MseQuadratic, PhaseVector};
use crate::phase::{build_subproblem, mm_iterate, MmConfig};
use crate::transceiver::{update_beamformer, wiener_equalizer, BisectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    /// Outer stop: absolute MSE decrease below this.
    pub eps: f64,
    pub mm: MmConfig,
    pub max_outer_iters: usize,
    pub bisection: BisectionConfig,
    /// Transmit power budget in watts.
    pub power: f64,
    /// Receiver noise variance in watts.
    pub noise: f64,
}

impl AoConfig {
    pub fn new(power: f64, noise: f64) -> Self {
        Self {
            eps: 1e-4,
            mm: MmConfig::default(),
            max_outer_iters: 500,
            bisection: BisectionConfig::default(),
            power,
            noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidParameter("power budget must be positive".into()));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter("noise power must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("max_outer_iters must be >= 1".into()));
        }
        self.bisection.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Robust,
    NonRobust,
    /// Robust phases quantized to `bits` bits.
    DiscretePhase(u8),
    NoIrs,
}

impl SchemeKind {
    /// Stable numeric id used in seeding.
    pub fn code(&self) -> u64 {
        match self {
            SchemeKind::Robust => 1,
            SchemeKind::NonRobust => 2,
            SchemeKind::DiscretePhase(b) => 0x100 + u64::from(*b),
            SchemeKind::NoIrs => 3,
        }
    }

    pub fn uses_irs(&self) -> bool {
        !matches!(self, SchemeKind::NoIrs)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Robust => f.write_str("robust"),
            SchemeKind::NonRobust => f.write_str("non-robust"),
            SchemeKind::DiscretePhase(b) => write!(f, "discrete-{b}"),
            SchemeKind::NoIrs => f.write_str("no-irs"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(SchemeKind::Robust),
            "non-robust" => Ok(SchemeKind::NonRobust),
            "no-irs" => Ok(SchemeKind::NoIrs),
            _ => s
                .strip_prefix("discrete-")
                .and_then(|b| b.parse::<u8>().ok())
                .filter(|b| (1..=16).contains(b))
                .map(SchemeKind::DiscretePhase)
                .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

impl Serialize for SchemeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemeKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// MSE after each of the three updates of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoStep {
    pub after_equalizer: f64,
    pub after_beamformer: f64,
    pub after_phases: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    /// MSE with the Wiener equalizer at the start and after every outer iteration.
    pub mse: Vec<f64>,
    pub steps: Vec<AoStep>,
    pub design: Design,
    pub iterations: usize,
    pub converged: bool,
    /// Inner solver calls that stopped on their iteration cap.
    pub mm_capped: usize,
    pub bisection_capped: usize,
}

fn initial_beamformer(m: usize, power: f64) -> DVector<Complex64> {
    DVector::from_element(m, Complex64::from((power / m as f64).sqrt()))
}

/// Runs the alternating optimization from random initial phases drawn from `rng`.
pub fn run_ao<R: Rng + ?Sized>(
    est: &ChannelEstimate,
    errs: &ErrorStats,
    cfg: &AoConfig,
    rng: &mut R,
) -> Result<AoTrace> {
    let init = PhaseVector::random(est.h_r.len(), rng);
    run_ao_from(est, errs, cfg, init)
}

/// Alternating optimization from given initial phases; `errs` are absolute.
///
/// Each outer iteration updates `c` (Wiener), then `w` (KKT/bisection) with
/// the phases held, then the phases by MM with `(w, c)` held.
pub fn run_ao_from(
    est: &ChannelEstimate,
    errs: &ErrorStats,
    cfg: &AoConfig,
    init: PhaseVector,
) -> Result<AoTrace> {
    cfg.validate()?;
    if est.h_r.is_empty() {
        return Err(Error::Dimension("alternating optimization needs at least one IRS element".into()));
    }
    let mut phases = init;
    let mut w = initial_beamformer(est.h_d.len(), cfg.power);
    let mut q = build_quadratic(est, errs, &phases, cfg.noise)?;
    let mut c = wiener_equalizer(&q, &w);
    let mut mse = vec![evaluate_mse(&q, &w, c)];
    let mut steps = Vec::new();
    let mut converged = false;
    let mut mm_capped = 0;
    let mut bisection_capped = 0;

    while steps.len() < cfg.max_outer_iters {
        let after_equalizer = evaluate_mse(&q, &w, c);

        let bf = update_beamformer(&q, c, cfg.power, &cfg.bisection)?;
        bisection_capped += usize::from(!bf.converged);
        w = bf.w;
        let after_beamformer = evaluate_mse(&q, &w, c);

        let sub = build_subproblem(est, &w, c)?;
        let mm = mm_iterate(&sub, &phases, &cfg.mm)?;
        mm_capped += usize::from(!mm.converged);
        phases = mm.phases;
        q = build_quadratic(est, errs, &phases, cfg.noise)?;
        let after_phases = evaluate_mse(&q, &w, c);
        steps.push(AoStep { after_equalizer, after_beamformer, after_phases });

        c = wiener_equalizer(&q, &w);
        let e = evaluate_mse(&q, &w, c);
        let prev = *mse.last().unwrap();
        mse.push(e);
        if prev - e < cfg.eps {
            converged = true;
            break;
        }
    }
    let iterations = steps.len();
    let design = Design { mse: *mse.last().unwrap(), w, c, phases };
    Ok(AoTrace { mse, steps, design, iterations, converged, mm_capped, bisection_capped })
}

/// Scored design of one scheme, plus solver bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub design: Design,
    pub iterations: usize,
    pub converged: bool,
}

impl From<AoTrace> for SchemeOutcome {
    fn from(t: AoTrace) -> Self {
        let converged = t.converged && t.mm_capped == 0 && t.bisection_capped == 0;
        SchemeOutcome { design: t.design, iterations: t.iterations, converged }
    }
}

/// Alternates Wiener and beamformer updates on a fixed quadratic.
fn transceiver_only(q: &MseQuadratic, cfg: &AoConfig) -> Result<SchemeOutcome> {
    let mut w = initial_beamformer(q.dim(), cfg.power);
    let mut c = wiener_equalizer(q, &w);
    let mut prev = evaluate_mse(q, &w, c);
    let mut iterations = 0;
    let mut converged = false;
    let mut capped = false;
    while iterations < cfg.max_outer_iters {
        let bf = update_beamformer(q, c, cfg.power, &cfg.bisection)?;
        capped |= !bf.converged;
        w = bf.w;
        c = wiener_equalizer(q, &w);
        let e = evaluate_mse(q, &w, c);
        iterations += 1;
        if prev - e < cfg.eps {
            converged = true;
            prev = e;
            break;
        }
        prev = e;
    }
    Ok(SchemeOutcome {
        design: Design { w, c, phases: PhaseVector::zeros(0), mse: prev },
        iterations,
        converged: converged && !capped,
    })
}

/// Nearest point of the `bits`-bit grid `{2 pi k / 2^bits}`; ties go to the smaller angle.
pub fn quantize_phase(theta: f64, bits: u8) -> f64 {
    let levels = (1u64 << bits) as f64;
    let step = std::f64::consts::TAU / levels;
    let x = theta / step;
    let lower = x.floor();
    let k = if x - lower > 0.5 { lower + 1.0 } else { lower };
    let k = k.rem_euclid(levels);
    k * step
}

/// Quantizes the phases of a robust design to `bits` bits and, if `refresh`
/// is set, re-runs one equalizer/beamformer update on the quantized phases.
/// The final equalizer is always the Wiener one. A design whose phases are
/// already on the grid is returned unchanged.
pub fn discretize(
    robust: &Design,
    est: &ChannelEstimate,
    errs: &ErrorStats,
    cfg: &AoConfig,
    bits: u8,
    refresh: bool,
) -> Result<Design> {
    if bits == 0 {
        return Err(Error::InvalidParameter("need at least one quantization bit".into()));
    }
    let quantized = PhaseVector::new(robust.phases.theta().iter().map(|&t| quantize_phase(t, bits)))?;
    if quantized == robust.phases {
        return Ok(robust.clone());
    }
    let q = build_quadratic(est, errs, &quantized, cfg.noise)?;
    let mut w = robust.w.clone();
    let mut c = wiener_equalizer(&q, &w);
    if refresh {
        w = update_beamformer(&q, c, cfg.power, &cfg.bisection)?.w;
        c = wiener_equalizer(&q, &w);
    }
    let mse = evaluate_mse(&q, &w, c);
    Ok(Design { w, c, phases: quantized, mse })
}

/// Runs one comparison scheme. `errs` are the true absolute error variances;
/// every scheme is scored against them. `refresh` only affects
/// [`SchemeKind::DiscretePhase`].
pub fn run_scheme<R: Rng + ?Sized>(
    kind: SchemeKind,
    est: &ChannelEstimate,
    errs: &ErrorStats,
    cfg: &AoConfig,
    refresh: bool,
    rng: &mut R,
) -> Result<SchemeOutcome> {
    match kind {
        SchemeKind::Robust => Ok(run_ao(est, errs, cfg, rng)?.into()),
        SchemeKind::NonRobust => {
            let mut out: SchemeOutcome = run_ao(est, &ErrorStats::PERFECT, cfg, rng)?.into();
            out.design = rescore(&out.design, est, errs, cfg.noise)?;
            Ok(out)
        }
        SchemeKind::DiscretePhase(bits) => {
            let robust: SchemeOutcome = run_ao(est, errs, cfg, rng)?.into();
            let design = discretize(&robust.design, est, errs, cfg, bits, refresh)?;
            Ok(SchemeOutcome { design, ..robust })
        }
        SchemeKind::NoIrs => {
            cfg.validate()?;
            let q = direct_quadratic(est, errs, cfg.noise)?;
            transceiver_only(&q, cfg)
        }
    }
}

/// Re-evaluates a design's MSE under the given error statistics.
pub fn rescore(design: &Design, est: &ChannelEstimate, errs: &ErrorStats, noise: f64) -> Result<Design> {
    let q = build_quadratic(est, errs, &design.phases, noise)?;
    Ok(Design { mse: evaluate_mse(&q, &design.w, design.c), ..design.clone() })
}
