//! Channel generation and CSI-error draws.
//!
//! The designer only ever sees a [`ChannelEstimate`]. The true channel is the
//! estimate plus an independent zero-mean circularly-symmetric complex
//! Gaussian error per entry, with variances given by [`ErrorStats`].
//!
//! Large-scale fading follows `L(d) = L0 * d^-alpha`. The AP-IRS and IRS-user
//! links are Rician, built from a line-of-sight component of two half-wavelength
//! uniform linear arrays: the AP array lies along the y axis and the IRS array
//! along the x axis. The AP-user link is Rayleigh.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Antenna count at the AP and element count at the IRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub antennas: usize,
    /// Zero means no IRS is deployed.
    pub elements: usize,
}

impl SystemDims {
    pub fn new(antennas: usize, elements: usize) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::InvalidParameter("antenna count must be at least 1".into()));
        }
        Ok(Self { antennas, elements })
    }
}

/// Node positions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap: [f64; 2],
    pub irs: [f64; 2],
    pub user: [f64; 2],
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let pts = [self.ap, self.irs, self.user];
        if pts.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("node coordinates must be finite".into()));
        }
        let [ai, iu, au] = self.distances();
        if ai <= 0.0 || iu <= 0.0 || au <= 0.0 {
            return Err(Error::InvalidParameter(
                "AP, IRS and user positions must be pairwise distinct".into(),
            ));
        }
        Ok(())
    }

    /// Distances AP-IRS, IRS-user, AP-user.
    pub fn distances(&self) -> [f64; 3] {
        [
            distance(self.ap, self.irs),
            distance(self.irs, self.user),
            distance(self.ap, self.user),
        ]
    }

    pub fn link_gains(&self, fading: &FadingParams) -> Result<LinkGains> {
        let [ai, iu, au] = self.distances();
        Ok(LinkGains {
            ap_irs: path_loss(ai, fading.los_exponent, fading.reference_loss)?,
            irs_user: path_loss(iu, fading.los_exponent, fading.reference_loss)?,
            ap_user: path_loss(au, fading.nlos_exponent, fading.reference_loss)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Path loss at 1 m, linear scale.
    pub reference_loss: f64,
    /// Exponent for the Rician (line-of-sight) links.
    pub los_exponent: f64,
    /// Exponent for the Rayleigh direct link.
    pub nlos_exponent: f64,
    /// Rician factor K, linear.
    pub rician_factor: f64,
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_loss > 0.0 && self.reference_loss.is_finite()) {
            return Err(Error::InvalidParameter("reference loss must be positive".into()));
        }
        if !(self.los_exponent >= 0.0 && self.nlos_exponent >= 0.0) {
            return Err(Error::InvalidParameter("path loss exponents must be >= 0".into()));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::InvalidParameter("Rician factor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Average power gain of each link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub ap_irs: f64,
    pub irs_user: f64,
    pub ap_user: f64,
}

impl LinkGains {
    pub const UNIT: LinkGains = LinkGains { ap_irs: 1.0, irs_user: 1.0, ap_user: 1.0 };
}

/// Estimated channels: `g` is AP to IRS (N x M), `h_r` is IRS to user (N),
/// `h_d` is AP to user (M).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub g: DMatrix<Complex64>,
    pub h_r: DVector<Complex64>,
    pub h_d: DVector<Complex64>,
}

impl ChannelEstimate {
    pub fn new(g: DMatrix<Complex64>, h_r: DVector<Complex64>, h_d: DVector<Complex64>) -> Result<Self> {
        if g.nrows() != h_r.len() || g.ncols() != h_d.len() {
            return Err(Error::Dimension(format!(
                "G is {}x{}, h_r has {} entries, h_d has {}",
                g.nrows(),
                g.ncols(),
                h_r.len(),
                h_d.len()
            )));
        }
        if h_d.is_empty() {
            return Err(Error::Dimension("need at least one AP antenna".into()));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !(g.iter().all(finite) && h_r.iter().all(finite) && h_d.iter().all(finite)) {
            return Err(Error::InvalidParameter("channel entries must be finite".into()));
        }
        Ok(Self { g, h_r, h_d })
    }

    pub fn dims(&self) -> SystemDims {
        SystemDims { antennas: self.h_d.len(), elements: self.h_r.len() }
    }

    /// The true channel `estimate + error`.
    pub fn perturbed(&self, err: &ChannelErrors) -> ChannelEstimate {
        ChannelEstimate {
            g: &self.g + &err.g,
            h_r: &self.h_r + &err.h_r,
            h_d: &self.h_d + &err.h_d,
        }
    }
}

/// Per-entry CSI-error variances for G, h_r and h_d.
///
/// Depending on context these are either relative to the link gain (config
/// and [`draw_errors`]) or absolute (everything in the MSE objective); use
/// [`ErrorStats::scaled`] to go from the former to the latter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub sigma_g2: f64,
    pub sigma_r2: f64,
    pub sigma_d2: f64,
}

impl ErrorStats {
    pub const PERFECT: ErrorStats = ErrorStats { sigma_g2: 0.0, sigma_r2: 0.0, sigma_d2: 0.0 };

    pub fn uniform(sigma2: f64) -> Self {
        Self { sigma_g2: sigma2, sigma_r2: sigma2, sigma_d2: sigma2 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.sigma_g2) && ok(self.sigma_r2) && ok(self.sigma_d2) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("error variances must be finite and >= 0".into()))
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.sigma_g2 == 0.0 && self.sigma_r2 == 0.0 && self.sigma_d2 == 0.0
    }

    /// Relative variances times the link gains.
    pub fn scaled(&self, gains: &LinkGains) -> ErrorStats {
        ErrorStats {
            sigma_g2: self.sigma_g2 * gains.ap_irs,
            sigma_r2: self.sigma_r2 * gains.irs_user,
            sigma_d2: self.sigma_d2 * gains.ap_user,
        }
    }
}

/// One realization of (dG, dh_r, dh_d).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelErrors {
    pub g: DMatrix<Complex64>,
    pub h_r: DVector<Complex64>,
    pub h_d: DVector<Complex64>,
}

/// `L0 * d^-alpha`.
pub fn path_loss(distance: f64, exponent: f64, reference_loss: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {distance}")));
    }
    Ok(reference_loss * distance.powf(-exponent))
}

/// Draws from CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| complex_gaussian(rng, variance))
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> DMatrix<Complex64> {
    // column-major fill order, fixed so draws are reproducible
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

const AP_AXIS: [f64; 2] = [0.0, 1.0];
const IRS_AXIS: [f64; 2] = [1.0, 0.0];

/// Half-wavelength ULA response toward direction `from -> to`.
fn steering(len: usize, axis: [f64; 2], from: [f64; 2], to: [f64; 2]) -> DVector<Complex64> {
    let d = distance(from, to);
    let proj = ((to[0] - from[0]) * axis[0] + (to[1] - from[1]) * axis[1]) / d;
    DVector::from_fn(len, |i, _| Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 * proj))
}

/// Unit-modulus line-of-sight components of G (N x M) and h_r (N).
pub fn los_components(dims: SystemDims, geometry: &Geometry) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let n = dims.elements;
    let m = dims.antennas;
    let irs_from_ap = steering(n, IRS_AXIS, geometry.irs, geometry.ap);
    let ap_to_irs = steering(m, AP_AXIS, geometry.ap, geometry.irs);
    let g = &irs_from_ap * ap_to_irs.adjoint();
    // h_r enters the signal as h_r^H, so the conjugate of the IRS response
    let h_r = steering(n, IRS_AXIS, geometry.irs, geometry.user).conjugate();
    (g, h_r)
}

/// Draws one estimated channel triple.
pub fn draw_channels<R: Rng + ?Sized>(
    dims: SystemDims,
    geometry: &Geometry,
    fading: &FadingParams,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    geometry.validate()?;
    fading.validate()?;
    let gains = geometry.link_gains(fading)?;
    let k = fading.rician_factor;
    let los_w = (k / (k + 1.0)).sqrt();
    let nlos_w = (1.0 / (k + 1.0)).sqrt();
    let (g_los, h_r_los) = los_components(dims, geometry);
    let (n, m) = (dims.elements, dims.antennas);

    // direct link first, then one (G row, h_r entry) per element, so the
    // first n elements of a draw do not depend on the total element count
    let h_d = gaussian_vector(rng, m, 1.0);
    let mut g_nlos = DMatrix::zeros(n, m);
    let mut h_r_nlos = DVector::zeros(n);
    for i in 0..n {
        for j in 0..m {
            g_nlos[(i, j)] = complex_gaussian(rng, 1.0);
        }
        h_r_nlos[i] = complex_gaussian(rng, 1.0);
    }

    let g = (g_los * Complex64::from(los_w) + g_nlos * Complex64::from(nlos_w)) * Complex64::from(gains.ap_irs.sqrt());
    let h_r = (h_r_los * Complex64::from(los_w) + h_r_nlos * Complex64::from(nlos_w))
        * Complex64::from(gains.irs_user.sqrt());
    let h_d = h_d * Complex64::from(gains.ap_user.sqrt());
    ChannelEstimate::new(g, h_r, h_d)
}

/// Draws CSI errors with per-entry variance `stats * gains` on each link.
pub fn draw_errors<R: Rng + ?Sized>(
    dims: SystemDims,
    stats: &ErrorStats,
    gains: &LinkGains,
    rng: &mut R,
) -> ChannelErrors {
    let abs = stats.scaled(gains);
    let (n, m) = (dims.elements, dims.antennas);
    ChannelErrors {
        g: gaussian_matrix(rng, n, m, abs.sigma_g2),
        h_r: gaussian_vector(rng, n, abs.sigma_r2),
        h_d: gaussian_vector(rng, m, abs.sigma_d2),
    }
}
