//! Physics-informed neural network inversion for coupled thermo-hydro-mechanical
//! poromechanics.

pub mod autodiff;
mod error;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod physics;
pub mod train;

pub use error::Error;

/// Formats a float with 17 significant digits, the precision used in every
/// emitted file.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
