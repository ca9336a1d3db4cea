//! Energy-efficient rate-splitting multiple access (RSMA) beamforming for a
//! multibeam GEO satellite with imperfect phase CSIT.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: configuration, unit conventions and seeding.
//! - [`geometry`]: beam layout and user drop (distances, off-axis angles).
//! - [`channel`]: rain fading, beam pattern, link budget and phase errors.
//! - [`csit`]: phase-error coherence matrix and effective channel matrices.
//! - [`rates`]: SINRs, ergodic and approximated rates, power model, EE.
//! - [`conic`]: solver-agnostic conic programs (LP/SOC/Hermitian PSD).
//! - [`optimizer`]: the SCA + SDP-relaxation + rank-one penalty iteration.
//! - [`harness`]: Monte-Carlo sweeps and CSV emission.

// Links the system OpenBLAS used by the conic backend.
extern crate openblas_src;

pub mod channel;
pub mod conic;
pub mod csit;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod rates;
pub mod scenario;

pub use channel::ChannelRealization;
pub use csit::CsitStatistics;
pub use geometry::{BeamLayout, UserDrop};
pub use harness::{Mode, SweepAxis, SweepPlan, SweepResult};
pub use linalg::{CMatrix, CVector, C64};
pub use optimizer::{ScaState, Solution};
pub use rates::{BeamformerSet, RateModel, RateReport};
pub use scenario::{ObjectiveMode, Scenario, SicMode};
