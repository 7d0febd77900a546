//! Equalizer and power-constrained beamformer updates for fixed phases.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::MseQuadratic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    /// Relative tolerance on `|w|^2 - P0`.
    pub power_tol: f64,
    pub max_iters: usize,
    /// Factor applied to the upper bracket while it is still infeasible.
    pub bracket_growth: f64,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { power_tol: 1e-10, max_iters: 200, bracket_growth: 2.0 }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_tol > 0.0) || self.max_iters == 0 || !(self.bracket_growth > 1.0) {
            return Err(Error::InvalidParameter(
                "bisection needs power_tol > 0, max_iters >= 1 and bracket_growth > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Wiener equalizer `w^H alpha / (w^H A w + sigma_n^2)`.
pub fn wiener_equalizer(q: &MseQuadratic, w: &DVector<Complex64>) -> Complex64 {
    w.dotc(&q.alpha) / (q.signal_plus_error(w) + q.noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerUpdate {
    pub w: DVector<Complex64>,
    pub lambda: f64,
    pub iterations: usize,
    /// False when bisection hit `max_iters` before the KKT residual was met.
    /// `w` is still feasible in that case.
    pub converged: bool,
}

fn solve_shifted(scaled_a: &DMatrix<Complex64>, lambda: f64, rhs: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let mut m = scaled_a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    Cholesky::new(m).map(|ch| ch.solve(rhs))
}

fn kkt_ok(lambda: f64, power: f64, p0: f64, tol: f64) -> bool {
    power <= p0 * (1.0 + tol) && lambda * (power - p0).abs() <= tol * p0 * lambda.max(1.0)
}

/// Minimizes the MSE over `w` with `|w|^2 <= P0` for fixed `c`:
/// `w = (|c|^2 A + lambda I)^-1 alpha c*`, with `lambda` found by bisection
/// when the unconstrained solution is infeasible.
///
/// With `c = 0` the objective does not depend on `w`; the full-power matched
/// filter `sqrt(P0) alpha / |alpha|` is returned so that the next equalizer
/// update is not stuck at zero.
pub fn update_beamformer(
    q: &MseQuadratic,
    c: Complex64,
    p0: f64,
    cfg: &BisectionConfig,
) -> Result<BeamformerUpdate> {
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(Error::InvalidParameter(format!("power budget must be positive, got {p0}")));
    }
    cfg.validate()?;
    let m = q.dim();
    let alpha_norm = q.alpha.norm();
    if alpha_norm == 0.0 {
        return Ok(BeamformerUpdate { w: DVector::zeros(m), lambda: 0.0, iterations: 0, converged: true });
    }
    let c2 = c.norm_sqr();
    if c2 == 0.0 {
        let w = &q.alpha * Complex64::from(p0.sqrt() / alpha_norm);
        return Ok(BeamformerUpdate { w, lambda: 0.0, iterations: 0, converged: true });
    }

    let scaled_a = &q.a * Complex64::from(c2);
    let rhs = &q.alpha * c.conj();
    let tol = cfg.power_tol;

    if let Some(w) = solve_shifted(&scaled_a, 0.0, &rhs) {
        let ok = w.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if ok && w.norm_squared() <= p0 * (1.0 + tol) {
            return Ok(BeamformerUpdate { w, lambda: 0.0, iterations: 0, converged: true });
        }
    }

    // |w(lambda)| <= |c| |alpha| / lambda, so this bracket is feasible in exact arithmetic
    let mut hi = c2.sqrt() * alpha_norm / p0.sqrt();
    let mut w_hi = solve_shifted(&scaled_a, hi, &rhs)
        .ok_or_else(|| Error::InvalidParameter("beamformer system is not positive definite".into()))?;
    let mut iterations = 0;
    while w_hi.norm_squared() > p0 * (1.0 + tol) && iterations < cfg.max_iters {
        hi *= cfg.bracket_growth;
        w_hi = solve_shifted(&scaled_a, hi, &rhs)
            .ok_or_else(|| Error::InvalidParameter("beamformer system is not positive definite".into()))?;
        iterations += 1;
    }
    let mut lo = 0.0;
    while !kkt_ok(hi, w_hi.norm_squared(), p0, tol) && iterations < cfg.max_iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match solve_shifted(&scaled_a, mid, &rhs) {
            Some(w) if w.norm_squared() <= p0 => {
                hi = mid;
                w_hi = w;
            }
            _ => lo = mid,
        }
        iterations += 1;
    }
    let converged = kkt_ok(hi, w_hi.norm_squared(), p0, tol);
    Ok(BeamformerUpdate { w: w_hi, lambda: hi, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, ErrorStats};
    use crate::objective::{build_quadratic, evaluate_mse, PhaseVector};
    use crate::rng::substream;
    use crate::channel::ChannelEstimate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e1(m: usize, scale: f64) -> DVector<Complex64> {
        let mut v = DVector::zeros(m);
        v[0] = c(scale, 0.0);
        v
    }

    fn identity_quad(alpha: DVector<Complex64>, noise: f64) -> MseQuadratic {
        let m = alpha.len();
        MseQuadratic { a: DMatrix::identity(m, m), alpha, noise }
    }

    fn random_quad(seed: u64, m: usize, n: usize, sigma2: f64) -> MseQuadratic {
        let mut rng = substream(seed, &[42]);
        let est = ChannelEstimate::new(
            DMatrix::from_fn(n, m, |_, _| complex_gaussian(&mut rng, 1.0)),
            DVector::from_fn(n, |_, _| complex_gaussian(&mut rng, 1.0)),
            DVector::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0)),
        )
        .unwrap();
        let ph = PhaseVector::random(n, &mut rng);
        build_quadratic(&est, &ErrorStats::uniform(sigma2), &ph, 0.1).unwrap()
    }

    #[test]
    fn wiener_identity_instance() {
        let q = identity_quad(e1(2, 1.0), 1.0);
        assert!((wiener_equalizer(&q, &e1(2, 1.0)) - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn wiener_orthogonal_is_zero() {
        let q = identity_quad(e1(2, 1.0), 1.0);
        let mut w = DVector::zeros(2);
        w[1] = c(1.0, 0.0);
        assert_eq!(wiener_equalizer(&q, &w), c(0.0, 0.0));
    }

    #[test]
    fn wiener_beats_complex_grid() {
        let q = random_quad(3, 3, 4, 0.05);
        let w = DVector::from_fn(3, |i, _| c(0.2 * i as f64 + 0.1, 0.3));
        let cs = wiener_equalizer(&q, &w);
        let best = evaluate_mse(&q, &w, cs);
        let r = 2.0 * cs.norm();
        let step = 1e-3 * r.max(1e-3);
        let k = (r / step) as i64;
        // coarse outer grid, then the full-resolution step around the optimum
        let mut min_grid = f64::INFINITY;
        for i in -k..=k {
            let re = i as f64 * step;
            for j in (-k..=k).step_by(50) {
                let z = c(re, j as f64 * step);
                if z.norm() <= r {
                    min_grid = min_grid.min(evaluate_mse(&q, &w, z));
                }
            }
        }
        for i in -100..=100 {
            for j in -100..=100 {
                let z = cs + c(i as f64 * step, j as f64 * step);
                min_grid = min_grid.min(evaluate_mse(&q, &w, z));
            }
        }
        assert!(best <= min_grid + 1e-15, "wiener {best} grid {min_grid}");
    }

    #[test]
    fn interior_solution() {
        let q = identity_quad(e1(2, 0.5), 1.0);
        let u = update_beamformer(&q, c(1.0, 0.0), 1.0, &BisectionConfig::default()).unwrap();
        assert_eq!(u.lambda, 0.0);
        assert!((&u.w - e1(2, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn boundary_solution() {
        let q = identity_quad(e1(2, 2.0), 1.0);
        let u = update_beamformer(&q, c(1.0, 0.0), 1.0, &BisectionConfig::default()).unwrap();
        assert!(u.converged);
        assert!((u.lambda - 1.0).abs() < 1e-9, "lambda {}", u.lambda);
        assert!((&u.w - e1(2, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_target_gives_zero_beam() {
        let q = identity_quad(DVector::zeros(3), 1.0);
        let u = update_beamformer(&q, c(1.0, 0.0), 1.0, &BisectionConfig::default()).unwrap();
        assert_eq!(u.w, DVector::zeros(3));
        assert_eq!(u.lambda, 0.0);
    }

    #[test]
    fn zero_equalizer_returns_matched_filter() {
        let q = identity_quad(e1(2, 3.0), 1.0);
        let u = update_beamformer(&q, c(0.0, 0.0), 4.0, &BisectionConfig::default()).unwrap();
        assert!((&u.w - e1(2, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn rank_one_quadratic_is_handled() {
        // perfect-CSI quadratic alpha alpha^H is singular for M > 1
        let alpha = DVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.1, 0.9)]);
        let q = MseQuadratic { a: &alpha * alpha.adjoint(), alpha: alpha.clone(), noise: 0.01 };
        for (p0, cc) in [(1.0, c(0.7, -0.2)), (1e-4, c(2.0, 1.0)), (100.0, c(0.01, 0.0))] {
            let u = update_beamformer(&q, cc, p0, &BisectionConfig::default()).unwrap();
            let p = u.w.norm_squared();
            assert!(p <= p0 * (1.0 + 1e-10));
            assert!(u.lambda * (p - p0).abs() <= 1e-10 * p0 * u.lambda.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_budget() {
        let q = identity_quad(e1(2, 1.0), 1.0);
        assert!(update_beamformer(&q, c(1.0, 0.0), 0.0, &BisectionConfig::default()).is_err());
        let bad = BisectionConfig { max_iters: 0, ..Default::default() };
        assert!(update_beamformer(&q, c(1.0, 0.0), 1.0, &bad).is_err());
    }

    #[test]
    fn power_decreases_in_lambda() {
        for seed in 0..10 {
            let q = random_quad(seed, 4, 6, 0.05);
            let cc = c(0.3, 0.1);
            let sa = &q.a * Complex64::from(cc.norm_sqr());
            let rhs = &q.alpha * cc.conj();
            let mut prev = f64::INFINITY;
            for k in 0..200 {
                let lambda = 1e-3 * 1.1f64.powi(k);
                let p = solve_shifted(&sa, lambda, &rhs).unwrap().norm_squared();
                assert!(p < prev);
                prev = p;
            }
        }
    }

    #[test]
    fn no_feasible_perturbation_improves() {
        for seed in 0..10 {
            let q = random_quad(seed + 100, 4, 6, 0.05);
            let cc = c(0.5, -0.4);
            let p0 = 0.2;
            let u = update_beamformer(&q, cc, p0, &BisectionConfig::default()).unwrap();
            let base = evaluate_mse(&q, &u.w, cc);
            let mut rng = substream(seed, &[9]);
            let mut probes = 0;
            while probes < 100 {
                let d = DVector::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0));
                let d = &d * Complex64::from(1e-3 * u.w.norm() / d.norm());
                let cand = &u.w + d;
                if cand.norm_squared() > p0 {
                    continue;
                }
                probes += 1;
                assert!(evaluate_mse(&q, &cand, cc) >= base - 1e-12);
            }
        }
    }
}
