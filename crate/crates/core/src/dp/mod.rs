//! Shortfall-risk dynamic programs on the lattice.
//!
//! The state is a lattice node plus the wealth proportion `lambda = V / S`. At each step
//! the investor chooses `c = Lambda(-1)`, the proportion after a down move; the proportion
//! after an up move then follows from self-financing in the trinomial model with growth
//! factors `{e^{-a}, 1, e^{a}}`:
//!
//! ```text
//! Lambda(0) = lambda,   Lambda(1) = 1 ^ (lambda (1 + e^{-a}) - c e^{-a})
//! ```
//!
//! and admissibility (non-negative wealth) restricts `c` to `[0, min(1, lambda (1 + e^a))]`.

mod checkpoint;
mod exact;
mod grid;
mod slice;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{checkpoint_load, checkpoint_save, latest_checkpoint, CHECKPOINT_VERSION};
pub use exact::{
    dp_exact_pwl, dp_exact_pwl_budget, dp_exact_pwl_until, PwlConcave, DEFAULT_BREAKPOINT_BUDGET,
    EXACT_MAX_STEPS,
};
pub use grid::{
    dp_grid, dp_grid_from, dp_grid_until, estimate_cost, instance_digest, resume_dp_grid, DpCost,
};
pub use slice::{SliceData, ValueSlice};

use crate::error::{Error, Result};
use crate::forward::terminal_pmf;
use crate::kernel::{Measure, ProjectionScheme};
use crate::model::Instance;

/// Shortfall utility `U(v, s) = -((s - K)^+ - v)^+`.
#[inline]
pub fn payoff_shortfall(v: f64, s: f64, strike: f64) -> f64 {
    0.0f64.min(v - (s - strike).max(0.0))
}

/// Upper end of the admissible interval for `Lambda(-1)`: `min(1, lambda (1 + e^a))`.
#[inline]
pub fn control_upper(lambda: f64, a: f64) -> f64 {
    1.0f64.min(lambda * (1.0 + a.exp()))
}

/// How `Lambda(1)` is mapped onto the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaRounding {
    Exact,
    /// `floor(. M) / M`, used by the lower bound.
    Floor,
    /// `(ceil(. M) + 1) / M`, used by the upper bound.
    CeilPlus,
    /// `ceil(. M) / M`, a sensitivity variant of the upper bound.
    Ceil,
}

/// Slack below zero tolerated in the post-trade proportion before it is treated as
/// inadmissible.
const ADMISSIBILITY_SLACK: f64 = 1e-12;

/// Proportion after an up move given `lambda` and the down-move control `c`.
pub fn lambda_up(lambda: f64, c: f64, a: f64, m: usize, mode: LambdaRounding) -> Result<f64> {
    let inner = lambda * (1.0 + (-a).exp()) - c * (-a).exp();
    if inner < -ADMISSIBILITY_SLACK {
        return Err(Error::Inadmissible {
            lambda,
            control: c,
            inner,
        });
    }
    if mode == LambdaRounding::Exact {
        return Ok(inner.clamp(0.0, 1.0));
    }
    // grid modes: work in units of 1/M so that c == lambda gives an exact integer
    let mf = m as f64;
    let (l, ci) = ((lambda * mf).round(), (c * mf).round());
    let scaled = (l + (l - ci) * (-a).exp()).max(0.0);
    let idx = match mode {
        LambdaRounding::Floor => scaled.floor(),
        LambdaRounding::CeilPlus => scaled.ceil() + 1.0,
        LambdaRounding::Ceil => scaled.ceil(),
        LambdaRounding::Exact => unreachable!(),
    };
    Ok((idx / mf).min(1.0))
}

/// Which grid program to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Minus,
    Plus,
}

impl Bound {
    pub fn label(&self) -> &'static str {
        match self {
            Bound::Minus => "minus",
            Bound::Plus => "plus",
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "minus" => Ok(Bound::Minus),
            "plus" => Ok(Bound::Plus),
            other => Err(format!("unknown bound `{other}`")),
        }
    }
}

/// Rounding of `Lambda(1)` in the upper-bound program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlusRounding {
    #[default]
    CeilPlus,
    Ceil,
}

/// Storage width of value slices. Accumulation is always in `f64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum CheckpointPolicy {
    #[default]
    Never,
    /// Write the slice every `stride` steps into `dir`, keeping only the latest file.
    Every {
        dir: std::path::PathBuf,
        stride: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpConfig {
    pub m: usize,
    pub bound: Bound,
    pub projection: ProjectionScheme,
    pub plus_rounding: PlusRounding,
    pub precision: Precision,
    pub checkpoint: CheckpointPolicy,
}

impl DpConfig {
    pub fn new(m: usize, bound: Bound) -> Self {
        Self {
            m,
            bound,
            projection: ProjectionScheme::default(),
            plus_rounding: PlusRounding::default(),
            precision: Precision::default(),
            checkpoint: CheckpointPolicy::default(),
        }
    }

    pub fn with_projection(mut self, projection: ProjectionScheme) -> Self {
        self.projection = projection;
        self
    }

    pub fn with_bound(mut self, bound: Bound) -> Self {
        self.bound = bound;
        self
    }

    pub fn rounding(&self) -> LambdaRounding {
        match (self.bound, self.plus_rounding) {
            (Bound::Minus, _) => LambdaRounding::Floor,
            (Bound::Plus, PlusRounding::CeilPlus) => LambdaRounding::CeilPlus,
            (Bound::Plus, PlusRounding::Ceil) => LambdaRounding::Ceil,
        }
    }
}

/// Lattice value of doing nothing: `-E_P[((S_T - K)^+ - x)^+]` under the physical kernels.
pub fn unhedged_value(inst: &Instance, projection: ProjectionScheme, x: f64) -> Result<f64> {
    let pmf = terminal_pmf(inst, &Measure::Physical, projection)?;
    let n = inst.n() as i32;
    let strike = inst.params.strike;
    Ok(pmf
        .iter()
        .enumerate()
        .map(|(idx, p)| p * payoff_shortfall(x, inst.price(idx as i32 - n), strike))
        .sum())
}

/// Grid index of `x / s0`, accepting a relative error of `1e-12`.
pub fn grid_index(x: f64, s0: f64, m: usize) -> Result<usize> {
    let ratio = x / s0;
    let scaled = ratio * m as f64;
    let l = scaled.round();
    if !(0.0..=m as f64).contains(&l) || (scaled - l).abs() > 1e-12 * (m as f64).max(1.0) {
        return Err(Error::OffGrid { x, ratio, m });
    }
    Ok(l as usize)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichResult {
    pub x: f64,
    pub j_minus: f64,
    pub j_plus: f64,
    pub width: f64,
}

/// Both grid bounds at initial capital `x`, which must satisfy `x / s0 in GR`.
pub fn sandwich_at(
    inst: &Instance,
    m: usize,
    x: f64,
    projection: ProjectionScheme,
) -> Result<SandwichResult> {
    let l = grid_index(x, inst.params.s0, m)?;
    let base = DpConfig::new(m, Bound::Minus).with_projection(projection);
    let j_minus = dp_grid(inst, &base)?.root_value(l);
    let j_plus = dp_grid(inst, &base.with_bound(Bound::Plus))?.root_value(l);
    Ok(SandwichResult {
        x,
        j_minus,
        j_plus,
        width: j_plus - j_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff_shortfall(50.0, 100.0, 90.0), 0.0);
        assert_eq!(payoff_shortfall(0.0, 100.0, 90.0), -10.0);
        assert_eq!(payoff_shortfall(5.0, 100.0, 90.0), -5.0);
        assert_eq!(payoff_shortfall(0.0, 80.0, 90.0), 0.0);
    }

    #[test]
    fn control_upper_examples() {
        assert_eq!(control_upper(0.0, 0.25), 0.0);
        assert_eq!(control_upper(0.5, 0.25), 1.0);
        assert!((control_upper(0.1, 0.25) - 0.228_402_541_668_774_15).abs() < 1e-15);
    }

    #[test]
    fn lambda_up_examples() {
        let exact = lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::Exact).unwrap();
        assert!((exact - 0.577_880_078_307_140_5).abs() < 1e-15);
        assert_eq!(lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::Floor).unwrap(), 0.5);
        assert_eq!(lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::CeilPlus).unwrap(), 0.7);
        assert_eq!(lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::Ceil).unwrap(), 0.6);
        // truncation at one
        assert_eq!(lambda_up(1.0, 0.0, 0.25, 10, LambdaRounding::Exact).unwrap(), 1.0);
    }

    #[test]
    fn lambda_up_rejects_inadmissible_control() {
        assert!(matches!(
            lambda_up(0.1, 0.5, 0.25, 10, LambdaRounding::Floor),
            Err(Error::Inadmissible { .. })
        ));
        // floating-point slack at the admissible endpoint is clamped to zero
        let c = 0.1 * (1.0 + 0.25f64.exp());
        assert_eq!(lambda_up(0.1, c, 0.25, 10, LambdaRounding::Floor).unwrap(), 0.0);
    }

    #[test]
    fn grid_index_checks() {
        assert_eq!(grid_index(20.0, 100.0, 400).unwrap(), 80);
        assert_eq!(grid_index(100.0, 100.0, 12).unwrap(), 12);
        assert!(matches!(grid_index(20.0, 100.0, 12), Err(Error::OffGrid { .. })));
        assert!(grid_index(120.0, 100.0, 10).is_err());
    }

    #[test]
    fn unhedged_covers_worst_case() {
        let inst = Instance::reference(6);
        let x = inst.max_payoff();
        assert_eq!(unhedged_value(&inst, ProjectionScheme::Ps1, x).unwrap(), 0.0);
        assert!(unhedged_value(&inst, ProjectionScheme::Ps1, 0.0).unwrap() < 0.0);
    }
}
