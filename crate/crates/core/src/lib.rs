//! Small-time simulation of Lévy processes, trimming of their largest jumps,
//! exact distributional representations of the trimmed values, atom removal
//! by smoothing, and Monte Carlo diagnostics for convergence of the trimmed
//! process towards trimmed stable laws.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod jump_sampler;
pub mod levy_measure;
pub mod quad;
pub mod representation;
pub mod rng;
pub mod smoother;
pub mod stable_limits;
pub mod trimmer;

pub use error::{LevyError, Result};
pub use levy_measure::{Atom, LevyMeasureSpec, MeasureDoc, Side, TailFunction};
pub use stable_limits::StableParams;
pub use trimmer::TrimMode;
