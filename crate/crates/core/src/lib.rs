//! Shortfall-risk hedging of a European call in a truncated Heston model.
//!
//! The crate builds a trinomial lattice for the log-price and a decorrelated variance
//! coordinate, solves the shortfall dynamic program on it (exactly for tiny lattices, and
//! between two grid-rounded bounds at production scale), and provides Monte Carlo
//! references, structural diagnostics and a handful of small counterexample models.
//!
//! ```
//! use shortfall_core::prelude::*;
//!
//! let inst = Instance::reference(20);
//! let cfg = DpConfig::new(20, Bound::Minus);
//! let slice = dp_grid(&inst, &cfg).unwrap();
//! let value = slice.root_value(4); // lambda = 4/20, i.e. x = 20
//! assert!(value <= 0.0);
//! ```

pub mod demos;
pub mod diagnostics;
pub mod digest;
pub mod dp;
pub mod error;
pub mod forward;
pub mod kernel;
pub mod mc;
pub mod model;
pub mod sum;

pub use error::{CheckpointError, Error, Result};

pub mod prelude {
    pub use crate::dp::{
        control_upper, dp_exact_pwl, dp_grid, lambda_up, payoff_shortfall, sandwich_at,
        unhedged_value, Bound, CheckpointPolicy, DpConfig, LambdaRounding, PlusRounding,
        Precision, PwlConcave, SandwichResult, ValueSlice,
    };
    pub use crate::kernel::{
        martingale_kernel, min_valid_n, physical_kernel, DriftFunctional, Measure, MinValidN,
        ProjectionScheme, TransitionKernel, Triple,
    };
    pub use crate::mc::{McConfig, McEstimate};
    pub use crate::model::{
        clamp_variance, node_values, transform_coeffs, HestonParams, Instance, LatticeSpec,
        NodeState, TruncationBounds,
    };
}
