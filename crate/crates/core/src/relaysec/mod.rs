//! Hybrid passive/active relaying combined by MRC, and secrecy-rate
//! optimization against a multi-antenna eavesdropper.

mod hybrid;
mod secrecy;

pub use hybrid::{sinr_active, sinr_mrc, solve_hybrid, HybridRelayConfig};
pub use secrecy::{eve_capacity, secrecy_eval, solve_secrecy, SecrecyResult};
