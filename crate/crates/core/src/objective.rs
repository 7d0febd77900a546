//! Average-MSE objective in quadratic form.
//!
//! For a fixed phase configuration the MSE averaged over data, noise and CSI
//! error is
//!
//! ```text
//! e(w, c) = |c|^2 (w^H A w + sigma_n^2) - 2 Re(c alpha^H w) + 1
//! ```
//!
//! with `alpha = G^H Theta^H h_r + h_d` and
//! `A = alpha alpha^H + sigma_g^2 |h_r|^2 I + sigma_r^2 G^H G + (N sigma_r^2 sigma_g^2 + sigma_d^2) I`,
//! all channels being estimates and all variances absolute.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, draw_errors, ChannelEstimate, ErrorStats, LinkGains};
use crate::error::{Error, Result};

/// IRS phases `theta_n` in `[0, 2pi)`.
///
/// The reflection coefficient of element n is `e^{j theta_n}`; the phase
/// solver works on `v_n = e^{-j theta_n}` so that `h_r^H Theta G w c = v^H Phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: Vec<f64>,
}

fn canonical_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl PhaseVector {
    pub fn new(theta: impl IntoIterator<Item = f64>) -> Result<Self> {
        let theta: Vec<f64> = theta.into_iter().collect();
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("phases must be finite".into()));
        }
        Ok(Self { theta: theta.into_iter().map(canonical_angle).collect() })
    }

    pub fn zeros(len: usize) -> Self {
        Self { theta: vec![0.0; len] }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self { theta: (0..len).map(|_| canonical_angle(rng.random::<f64>() * TAU)).collect() }
    }

    /// Phases from the solver variable `v` (`theta_n = -arg v_n`).
    pub fn from_v(v: &DVector<Complex64>) -> Self {
        Self { theta: v.iter().map(|z| canonical_angle(-z.arg())).collect() }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Diagonal of Theta.
    pub fn reflection(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)))
    }

    pub fn v(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.theta.iter().map(|&t| Complex64::from_polar(1.0, -t)))
    }
}

/// `(A, alpha, sigma_n^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseQuadratic {
    pub a: DMatrix<Complex64>,
    pub alpha: DVector<Complex64>,
    pub noise: f64,
}

/// A transceiver and phase configuration with its average MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub w: DVector<Complex64>,
    pub c: Complex64,
    pub phases: PhaseVector,
    pub mse: f64,
}

fn check_noise(noise: f64) -> Result<()> {
    if noise > 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise power must be positive, got {noise}")))
    }
}

/// Effective nominal channel `G^H Theta^H h_r + h_d`.
pub fn effective_channel(est: &ChannelEstimate, phases: &PhaseVector) -> Result<DVector<Complex64>> {
    if phases.len() != est.h_r.len() {
        return Err(Error::Dimension(format!(
            "{} phases for {} IRS elements",
            phases.len(),
            est.h_r.len()
        )));
    }
    // Theta^H h_r, elementwise
    let reflected = est.h_r.component_mul(&phases.v());
    Ok(est.g.ad_mul(&reflected) + &est.h_d)
}

/// Builds `(A, alpha)` for unit-modulus phases; `errs` are absolute variances.
pub fn build_quadratic(
    est: &ChannelEstimate,
    errs: &ErrorStats,
    phases: &PhaseVector,
    noise: f64,
) -> Result<MseQuadratic> {
    errs.validate()?;
    check_noise(noise)?;
    let alpha = effective_channel(est, phases)?;
    let m = est.h_d.len();
    let n = est.h_r.len() as f64;
    let diag = errs.sigma_g2 * est.h_r.norm_squared() + n * errs.sigma_r2 * errs.sigma_g2 + errs.sigma_d2;
    let mut a = &alpha * alpha.adjoint();
    if errs.sigma_r2 != 0.0 {
        a += est.g.ad_mul(&est.g) * Complex64::from(errs.sigma_r2);
    }
    for i in 0..m {
        a[(i, i)] += diag;
    }
    Ok(MseQuadratic { a, alpha, noise })
}

/// Quadratic for the direct link alone: `A = h_d h_d^H + sigma_d^2 I`, `alpha = h_d`.
pub fn direct_quadratic(est: &ChannelEstimate, errs: &ErrorStats, noise: f64) -> Result<MseQuadratic> {
    errs.validate()?;
    check_noise(noise)?;
    let alpha = est.h_d.clone();
    let mut a = &alpha * alpha.adjoint();
    for i in 0..alpha.len() {
        a[(i, i)] += errs.sigma_d2;
    }
    Ok(MseQuadratic { a, alpha, noise })
}

impl MseQuadratic {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `w^H A w`, real by construction.
    pub fn signal_plus_error(&self, w: &DVector<Complex64>) -> f64 {
        w.dotc(&(&self.a * w)).re
    }

    /// `alpha^H w`.
    pub fn gain(&self, w: &DVector<Complex64>) -> Complex64 {
        self.alpha.dotc(w)
    }
}

/// Average MSE of `(w, c)` under `q`.
pub fn evaluate_mse(q: &MseQuadratic, w: &DVector<Complex64>, c: Complex64) -> f64 {
    c.norm_sqr() * (q.signal_plus_error(w) + q.noise) - 2.0 * (c * q.gain(w)).re + 1.0
}

/// MSE with the Wiener equalizer substituted: `1 - |w^H alpha|^2 / (w^H A w + sigma_n^2)`.
pub fn wiener_mse(q: &MseQuadratic, w: &DVector<Complex64>) -> f64 {
    1.0 - q.gain(w).norm_sqr() / (q.signal_plus_error(w) + q.noise)
}

/// Sample mean of `|c y - s|^2` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of the average MSE, drawing symbol, noise and CSI
/// error and pushing them through the true received-signal model.
#[allow(clippy::too_many_arguments)]
pub fn mc_mse_oracle<R: Rng + ?Sized>(
    est: &ChannelEstimate,
    errs: &ErrorStats,
    phases: &PhaseVector,
    w: &DVector<Complex64>,
    c: Complex64,
    noise: f64,
    trials: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if phases.len() != est.h_r.len() || w.len() != est.h_d.len() {
        return Err(Error::Dimension("phases or beamformer do not match the channel".into()));
    }
    errs.validate()?;
    let dims = est.dims();
    let refl = phases.reflection();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let err = draw_errors(dims, errs, &LinkGains::UNIT, rng);
        let h = est.perturbed(&err);
        // (h_r^H Theta G + h_d^H) w
        let gw = &h.g * w;
        let cascaded: Complex64 = h.h_r.iter().zip(refl.iter()).zip(gw.iter()).map(|((r, t), x)| r.conj() * t * x).sum();
        let gain = cascaded + h.h_d.dotc(w);
        let s = complex_gaussian(rng, 1.0);
        let n0 = complex_gaussian(rng, noise);
        let e = (c * (gain * s + n0) - s).norm_sqr();
        sum += e;
        sum_sq += e * e;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), trials })
}
