//! Monte Carlo sweeps over transmit power or IRS size.
//!
//! The unit of work is one (axis point, trial) pair: it draws the channel
//! once and runs every scheme at every error variance on it. Work items are
//! independent and seeded from their own keys, so results do not depend on
//! how they are scheduled. A trial sees the same channel at every axis point;
//! in the element sweep a smaller surface is the leading part of a larger one.

use std::time::Instant;

use crate::ao::{discretize, run_ao, run_scheme, AoConfig, SchemeKind, SchemeOutcome};
use crate::channel::{draw_channels, ChannelEstimate, ErrorStats, SystemDims};
use crate::error::Result;
use crate::rng::{substream, TAG_CHANNEL, TAG_PHASE_INIT};

use super::config::ExperimentConfig;
use super::results::{Axis, SweepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Power,
    Elements,
}

impl Experiment {
    pub fn axis(&self) -> Axis {
        match self {
            Experiment::Power => Axis::PowerDbm,
            Experiment::Elements => Axis::Elements,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon data parallelism; runs sequentially when built without the `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    axis_value: f64,
    elements: usize,
    power_dbm: f64,
}

fn points(cfg: &ExperimentConfig, experiment: Experiment) -> Vec<Point> {
    match experiment {
        Experiment::Power => cfg
            .power_sweep
            .power_dbm
            .iter()
            .map(|&p| Point { axis_value: p, elements: cfg.power_sweep.elements, power_dbm: p })
            .collect(),
        Experiment::Elements => cfg
            .element_sweep
            .elements
            .iter()
            .map(|&n| Point { axis_value: n as f64, elements: n, power_dbm: cfg.element_sweep.power_dbm })
            .collect(),
    }
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    ao: AoConfig,
    est: &'a ChannelEstimate,
    errs: ErrorStats,
    axis_value: f64,
    sigma2: f64,
    trial: u64,
}

impl Cell<'_> {
    fn phase_rng(&self, scheme: SchemeKind) -> rand_chacha::ChaCha8Rng {
        let code = if self.cfg.shared_initial_phases { 0 } else { scheme.code() };
        substream(
            self.cfg.seed,
            &[TAG_PHASE_INIT, code, self.axis_value.to_bits(), self.sigma2.to_bits(), self.trial],
        )
    }

    fn robust(&self) -> Result<SchemeOutcome> {
        Ok(run_ao(self.est, &self.errs, &self.ao, &mut self.phase_rng(SchemeKind::Robust))?.into())
    }

    fn run(&self, scheme: SchemeKind, robust: &mut Option<SchemeOutcome>) -> Result<SchemeOutcome> {
        match scheme {
            SchemeKind::Robust | SchemeKind::DiscretePhase(_) => {
                let base = match robust {
                    Some(r) => r.clone(),
                    None => {
                        let r = self.robust()?;
                        *robust = Some(r.clone());
                        r
                    }
                };
                if let SchemeKind::DiscretePhase(bits) = scheme {
                    let design = discretize(
                        &base.design,
                        self.est,
                        &self.errs,
                        &self.ao,
                        bits,
                        self.cfg.refresh_after_quantization,
                    )?;
                    Ok(SchemeOutcome { design, ..base })
                } else {
                    Ok(base)
                }
            }
            other => run_scheme(other, self.est, &self.errs, &self.ao, false, &mut self.phase_rng(other)),
        }
    }
}

fn failed(scheme: SchemeKind, axis: Axis, axis_value: f64, sigma2: f64, trial: u64) -> SweepRecord {
    SweepRecord { scheme, axis_name: axis, axis_value, sigma2, trial, mse: f64::NAN, iters: 0, converged: false, millis: 0.0 }
}

fn run_item(cfg: &ExperimentConfig, experiment: Experiment, schemes: &[SchemeKind], point: Point, trial: u64) -> Vec<SweepRecord> {
    let axis = experiment.axis();
    let geometry = cfg.geometry;
    let fading = cfg.fading.to_params();
    let drawn = SystemDims::new(cfg.antennas, point.elements).and_then(|dims| {
        let mut rng = substream(cfg.seed, &[TAG_CHANNEL, trial]);
        let est = draw_channels(dims, &geometry, &fading, &mut rng)?;
        Ok((est, geometry.link_gains(&fading)?))
    });
    let mut out = Vec::with_capacity(cfg.error_variances.len() * schemes.len());
    for &sigma2 in &cfg.error_variances {
        let (est, gains) = match &drawn {
            Ok(d) => d,
            Err(_) => {
                out.extend(schemes.iter().map(|&s| failed(s, axis, point.axis_value, sigma2, trial)));
                continue;
            }
        };
        let cell = Cell {
            cfg,
            ao: cfg.ao_config(point.power_dbm),
            est,
            errs: ErrorStats::uniform(sigma2).scaled(gains),
            axis_value: point.axis_value,
            sigma2,
            trial,
        };
        let mut robust = None;
        for &scheme in schemes {
            let start = Instant::now();
            let record = match cell.run(scheme, &mut robust) {
                Ok(o) => SweepRecord {
                    scheme,
                    axis_name: axis,
                    axis_value: point.axis_value,
                    sigma2,
                    trial,
                    mse: o.design.mse,
                    iters: o.iterations,
                    converged: o.converged,
                    millis: 0.0,
                },
                Err(_) => failed(scheme, axis, point.axis_value, sigma2, trial),
            };
            let millis = if cfg.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            out.push(SweepRecord { millis, ..record });
        }
    }
    out
}

/// Runs every (axis point, trial) item and returns the records sorted by
/// scheme, axis point, error variance and trial, in config order.
pub fn run_experiment(cfg: &ExperimentConfig, experiment: Experiment, execution: Execution) -> Vec<SweepRecord> {
    let schemes: Vec<SchemeKind> = match experiment {
        Experiment::Power => cfg.power_schemes().to_vec(),
        Experiment::Elements => cfg.element_schemes().to_vec(),
    };
    let pts = points(cfg, experiment);
    let items: Vec<(usize, u64)> = (0..pts.len()).flat_map(|p| (0..cfg.trials).map(move |t| (p, t))).collect();
    let work = |&(p, t): &(usize, u64)| run_item(cfg, experiment, &schemes, pts[p], t);

    let mut records: Vec<SweepRecord> = match execution {
        Execution::Sequential => items.iter().flat_map(work).collect(),
        Execution::Parallel => parallel_map(&items, work),
    };

    let scheme_rank = |s: SchemeKind| schemes.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let sigma_rank = |v: f64| cfg.error_variances.iter().position(|&x| x.to_bits() == v.to_bits()).unwrap_or(usize::MAX);
    let point_rank = |v: f64| pts.iter().position(|p| p.axis_value.to_bits() == v.to_bits()).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (scheme_rank(r.scheme), point_rank(r.axis_value), sigma_rank(r.sigma2), r.trial));
    records
}

#[cfg(feature = "parallel")]
fn parallel_map<F>(items: &[(usize, u64)], work: F) -> Vec<SweepRecord>
where
    F: Fn(&(usize, u64)) -> Vec<SweepRecord> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().flat_map_iter(&work).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<F>(items: &[(usize, u64)], work: F) -> Vec<SweepRecord>
where
    F: Fn(&(usize, u64)) -> Vec<SweepRecord>,
{
    items.iter().flat_map(work).collect()
}

pub fn run_power_sweep(cfg: &ExperimentConfig) -> Vec<SweepRecord> {
    run_experiment(cfg, Experiment::Power, Execution::default())
}

pub fn run_element_sweep(cfg: &ExperimentConfig) -> Vec<SweepRecord> {
    run_experiment(cfg, Experiment::Elements, Execution::default())
}

/// Runs on a dedicated pool of `threads` workers. Without the `parallel`
/// feature the thread count is ignored.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    experiment: Experiment,
    threads: Option<usize>,
) -> Vec<SweepRecord> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(|| run_experiment(cfg, experiment, Execution::Parallel));
        }
    }
    let _ = threads;
    run_experiment(cfg, experiment, Execution::Parallel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_json(include_str!("../../configs/paper-defaults.json")).unwrap();
        cfg.trials = 3;
        cfg.power_sweep.elements = 8;
        cfg.power_sweep.power_dbm = vec![0.0, 10.0];
        cfg.element_sweep.elements = vec![4, 8];
        cfg
    }

    #[test]
    fn single_cell_cardinality() {
        let mut cfg = small_config();
        cfg.trials = 1;
        cfg.power_sweep.power_dbm = vec![10.0];
        cfg.power_sweep.schemes = Some(vec![SchemeKind::Robust]);
        cfg.error_variances = vec![0.05];
        let r = run_power_sweep(&cfg);
        assert_eq!(r.len(), 1);
        assert!(r[0].mse > 0.0 && r[0].mse <= 1.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = small_config();
        let a = run_experiment(&cfg, Experiment::Elements, Execution::Sequential);
        let b = run_experiment(&cfg, Experiment::Elements, Execution::Parallel);
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.same_bits(y)));
    }

    #[test]
    fn no_irs_only_at_zero_elements() {
        let mut cfg = small_config();
        cfg.element_sweep.elements = vec![0];
        cfg.element_sweep.schemes = Some(vec![SchemeKind::NoIrs]);
        cfg.validate().unwrap();
        let r = run_element_sweep(&cfg);
        assert_eq!(r.len(), 3 * 2);
        assert!(r.iter().all(|x| x.converged && x.mse > 0.0 && x.mse <= 1.0));
    }

    #[test]
    fn records_are_unique_and_sorted() {
        let cfg = small_config();
        let r = run_power_sweep(&cfg);
        assert_eq!(r.len(), 2 * 2 * 2 * 3);
        let keys: Vec<_> = r.iter().map(|x| (x.scheme, x.axis_value.to_bits(), x.sigma2.to_bits(), x.trial)).collect();
        let mut dedup = keys.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), keys.len());
        assert_eq!(r[0].scheme, SchemeKind::Robust);
        assert_eq!(r.last().unwrap().scheme, SchemeKind::NonRobust);
    }
}
