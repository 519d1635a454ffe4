//! Link-level simulation and optimization for RIS-assisted multiuser downlink
//! networks.
//!
//! The crate is organised around one snapshot of the network at a time:
//!
//! * [`scene`] describes the deployment, draws seeded channel realizations,
//!   builds the composite downlink channel and evolves it across snapshots.
//! * [`reflect`] holds reflection coefficients, their feasibility sets and
//!   element clustering for control signaling.
//! * [`precode`] evaluates SINR / weighted sum rate and solves the joint
//!   active/passive beamforming and symbol-level precoding problems.
//! * [`pilot`] assigns pilots to users under a max-min contamination ratio.
//! * [`relaysec`] covers hybrid active/passive relaying and secrecy-rate
//!   optimization against a multi-antenna eavesdropper.
//! * [`dist`] runs the per-RIS distributed symbol-level protocol.
//! * [`harness`] parses scenario files, runs Monte-Carlo campaigns and writes
//!   CSV reports.

pub mod dist;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod pilot;
pub mod precode;
pub mod reflect;
pub mod relaysec;
pub mod scene;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
