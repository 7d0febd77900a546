use irs_robust::harness::{run_experiment, summarize, Execution, Experiment, ExperimentConfig};
use irs_robust::SchemeKind;

fn config(trials: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(include_str!("../configs/paper-defaults.json")).unwrap();
    cfg.trials = trials;
    cfg.power_sweep.elements = 12;
    cfg.power_sweep.power_dbm = vec![0.0, 15.0, 30.0];
    cfg.element_sweep.elements = vec![6, 12];
    cfg
}

#[test]
fn doubling_trials_keeps_existing_records() {
    for exp in [Experiment::Power, Experiment::Elements] {
        let short = run_experiment(&config(5), exp, Execution::Parallel);
        let long = run_experiment(&config(10), exp, Execution::Parallel);
        assert_eq!(long.len(), 2 * short.len());
        let head: Vec<_> = long.iter().filter(|r| r.trial < 5).collect();
        assert_eq!(head.len(), short.len());
        assert!(short.iter().zip(head).all(|(a, b)| a.same_bits(b)));
    }
}

#[test]
fn execution_mode_does_not_change_results() {
    let cfg = config(4);
    for exp in [Experiment::Power, Experiment::Elements] {
        let seq = run_experiment(&cfg, exp, Execution::Sequential);
        let par = run_experiment(&cfg, exp, Execution::Parallel);
        assert!(seq.iter().zip(&par).all(|(a, b)| a.same_bits(b)));
    }
}

#[test]
fn shared_initial_phases_align_robust_and_non_robust_at_zero_error() {
    let mut cfg = config(3);
    cfg.error_variances = vec![0.0];
    cfg.shared_initial_phases = true;
    let r = run_experiment(&cfg, Experiment::Power, Execution::Sequential);
    assert!(summarize(&r).iter().all(|s| s.failed == 0));
    let robust: Vec<_> = r.iter().filter(|x| x.scheme == SchemeKind::Robust).collect();
    let nominal: Vec<_> = r.iter().filter(|x| x.scheme == SchemeKind::NonRobust).collect();
    assert_eq!(robust.len(), nominal.len());
    for (a, b) in robust.iter().zip(&nominal) {
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
    }
}

#[test]
fn three_bit_quantization_stays_close_per_trial() {
    let cfg = config(6);
    let r = run_experiment(&cfg, Experiment::Elements, Execution::Parallel);
    for rec in r.iter().filter(|x| x.scheme == SchemeKind::DiscretePhase(3)) {
        let robust = r
            .iter()
            .find(|x| {
                x.scheme == SchemeKind::Robust && x.axis_value == rec.axis_value && x.sigma2 == rec.sigma2 && x.trial == rec.trial
            })
            .unwrap();
        assert!(rec.mse <= 1.0 && rec.mse > 0.0);
        assert!((rec.mse - robust.mse).abs() <= 0.25 * robust.mse);
    }
}
