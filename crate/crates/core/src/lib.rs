//! Finite-volume simulation of a degenerate chemotaxis-consumption system
//!
//! ```text
//! u_t = Δ(u gamma(v)),   v_t = Δv - uv   in Ω,   no-flux boundary,
//! ```
//!
//! on intervals and rectangles, together with the checks that turn the
//! system's conservation laws, a-priori bounds and large-time limit into
//! numerical tests.
//!
//! Start with [`config::ScenarioConfig`] and [`cli::simulate`], or drive
//! [`solver::run`] directly. The `examples/` directory has one runnable
//! program per capability.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod grid;
mod linalg;
pub mod motility;
pub mod report;
pub mod snapshot;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use motility::MotilitySpec;
