//! IRS phase update for a fixed transceiver.
//!
//! With `Phi = diag(h_r^H) G w c` and `d = h_d^H w c`, the phase-dependent
//! part of the MSE is the unit-modulus quadratic
//!
//! ```text
//! f(v) = v^H Q v - 2 Re(v^H q),   Q = Phi Phi^H,   q = Phi (1 - d*)
//! ```
//!
//! Majorization-minimization replaces `v^H Q v` by the tangent bound built
//! from `lambda_max(Q) I`, whose minimizer over the unit circle is
//! elementwise: `v_i = -exp(j arg u_i)` with `u = (Q - lambda_max I) v_k - q`.
//! `Q` has rank one, so it is never formed and `lambda_max(Q) = |Phi|^2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelEstimate;
use crate::error::{Error, Result};
use crate::objective::PhaseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSubproblem {
    pub phi: DVector<Complex64>,
    pub d: Complex64,
    pub q: DVector<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    /// Stop once the objective decreases by less than this.
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self { eps: 1e-8, max_iters: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmOutcome {
    pub phases: PhaseVector,
    /// Objective at the start and after every update.
    pub objective: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iters` was exhausted; the last iterate is still returned.
    pub converged: bool,
}

pub fn build_subproblem(
    est: &ChannelEstimate,
    w: &DVector<Complex64>,
    c: Complex64,
) -> Result<PhaseSubproblem> {
    if est.h_r.is_empty() {
        return Err(Error::Dimension("phase subproblem needs at least one IRS element".into()));
    }
    if w.len() != est.h_d.len() {
        return Err(Error::Dimension(format!(
            "beamformer has {} entries for {} antennas",
            w.len(),
            est.h_d.len()
        )));
    }
    let gwc = (&est.g * w) * c;
    let phi = est.h_r.conjugate().component_mul(&gwc);
    let d = est.h_d.dotc(w) * c;
    let q = &phi * (Complex64::new(1.0, 0.0) - d.conj());
    Ok(PhaseSubproblem { phi, d, q })
}

/// Largest eigenvalue of `Phi Phi^H`.
pub fn lambda_max_rank1(sub: &PhaseSubproblem) -> f64 {
    sub.phi.norm_squared()
}

impl PhaseSubproblem {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Dense `Q`, for checks only.
    pub fn q_matrix(&self) -> DMatrix<Complex64> {
        &self.phi * self.phi.adjoint()
    }

    /// `f(v) = |Phi^H v|^2 - 2 Re(v^H q)`.
    pub fn objective(&self, v: &DVector<Complex64>) -> f64 {
        self.phi.dotc(v).norm_sqr() - 2.0 * v.dotc(&self.q).re
    }

    /// Tangent majorizer of `f` at `vk`:
    /// `v^H H v + 2 Re(v^H (Q - H) vk) + vk^H (H - Q) vk - 2 Re(v^H q)` with `H = lambda_max I`.
    pub fn surrogate(&self, v: &DVector<Complex64>, vk: &DVector<Complex64>) -> f64 {
        let lmax = lambda_max_rank1(self);
        let qvk = &self.phi * self.phi.dotc(vk);
        let q_minus_h_vk = &qvk - vk * Complex64::from(lmax);
        lmax * v.norm_squared() + 2.0 * v.dotc(&q_minus_h_vk).re - vk.dotc(&q_minus_h_vk).re
            - 2.0 * v.dotc(&self.q).re
    }

    /// `u = (Q - lambda_max I) vk - q`.
    pub fn direction(&self, vk: &DVector<Complex64>) -> DVector<Complex64> {
        let lmax = lambda_max_rank1(self);
        &self.phi * self.phi.dotc(vk) - vk * Complex64::from(lmax) - &self.q
    }

    /// One MM step. Coordinates with `u_i = 0` keep their value.
    pub fn step(&self, vk: &DVector<Complex64>) -> DVector<Complex64> {
        let u = self.direction(vk);
        DVector::from_iterator(
            vk.len(),
            u.iter().zip(vk.iter()).map(|(ui, vi)| {
                let r = ui.norm();
                if r == 0.0 {
                    *vi
                } else {
                    -*ui / r
                }
            }),
        )
    }
}

/// Runs MM from `v0` until the decrease drops below `cfg.eps`.
pub fn mm_iterate(sub: &PhaseSubproblem, v0: &PhaseVector, cfg: &MmConfig) -> Result<MmOutcome> {
    if v0.len() != sub.len() {
        return Err(Error::Dimension(format!("{} phases for {} elements", v0.len(), sub.len())));
    }
    let mut v = v0.v();
    let mut f = sub.objective(&v);
    let mut objective = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = sub.step(&v);
        let f_next = sub.objective(&next);
        iterations += 1;
        // rounding can push f up by a few ulps at a fixed point; never accept that
        if f_next > f {
            converged = true;
            break;
        }
        let decrease = f - f_next;
        v = next;
        f = f_next;
        objective.push(f);
        if decrease < cfg.eps {
            converged = true;
            break;
        }
    }
    Ok(MmOutcome { phases: PhaseVector::from_v(&v), objective, iterations, converged })
}
