//! Robust joint transceiver and IRS phase design for an IRS-assisted MISO
//! downlink under Gaussian CSI error.
//!
//! The design minimizes the MSE averaged over data, noise and channel
//! estimation error by alternating a Wiener equalizer, a power-constrained
//! beamformer and a majorization-minimization phase update. The [`harness`]
//! module drives Monte Carlo sweeps comparing robust, non-robust,
//! discrete-phase and no-IRS schemes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod channel;
pub mod error;
pub mod harness;
pub mod objective;
pub mod phase;
pub mod rng;
pub mod transceiver;

pub use ao::{run_ao, run_ao_from, run_scheme, AoConfig, AoStep, AoTrace, SchemeKind, SchemeOutcome};
pub use channel::{draw_channels, draw_errors, path_loss, ChannelEstimate, ErrorStats, FadingParams, Geometry, LinkGains, SystemDims};
pub use error::{Error, Result};
pub use objective::{build_quadratic, evaluate_mse, mc_mse_oracle, Design, MseQuadratic, PhaseVector};
pub use phase::{build_subproblem, lambda_max_rank1, mm_iterate, MmConfig, PhaseSubproblem};
pub use transceiver::{update_beamformer, wiener_equalizer, BeamformerUpdate, BisectionConfig};
