//! Conditional inference on the Signal-to-Noise Ratio of the asset with the
//! largest sample Sharpe ratio, the competing multiple-testing procedures,
//! and a seeded Monte Carlo laboratory for calibration and power studies.

pub mod classical;
pub mod cli;
pub mod dist;
pub mod error;
pub mod io;
pub mod moments;
pub mod outcome;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use moments::{estimate_moments, MomentEstimates, ReturnsPanel, SharpeCovariance};
pub use outcome::{Method, TestOutcome};
pub use selection::{SelectionEvent, TruncationInterval};
