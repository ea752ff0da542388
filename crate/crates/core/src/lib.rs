//! Channel estimation for IRS-assisted MIMO links via Tucker tensor models.
//!
//! The combined channel `R = H^T (Khatri-Rao) G` seen through an IRS has a
//! third-order Tucker structure. This crate synthesizes geometric channels,
//! simulates pilot training, and estimates `R` with plain least squares, a
//! per-column rank-one baseline (KRF), Tucker-ALS and truncated HOSVD.
//!
//! - [`tensor`]: order-3 tensors, unfoldings, n-mode/Kronecker/Khatri-Rao products, SVD.
//! - [`channel`]: steering vectors, Rician channel synthesis, combined channel.
//! - [`estimators`]: pilot design, received signal, the four estimators.
//! - [`sim`]: Monte-Carlo sweeps, NMSE aggregation, flop model, presets, CSV/JSON output.

pub mod channel;
pub mod error;
pub mod estimators;
pub mod sim;
pub mod tensor;

pub use channel::{synthesize_channels, ChannelRealization, SystemConfig};
pub use error::{Error, Result};
pub use estimators::{AlsOptions, EstimateResult, PilotDesign};
pub use sim::{Algorithm, ExperimentSpec, SweepValue, SweepVariable};
pub use tensor::{CMatrix, Tensor3, C64};
