//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use shortfall_core::demos::HullWhiteConfig;
use shortfall_core::digest::hex;
use shortfall_core::dp::{grid_index, Bound, PlusRounding, Precision};
use shortfall_core::kernel::ProjectionScheme;
use shortfall_core::mc::McConfig;
use shortfall_core::model::{HestonParams, Instance, TruncationBounds};

use crate::error::CliError;

/// Which grid bounds a table computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundSelection {
    Minus,
    Plus,
    Both,
}

impl BoundSelection {
    pub fn bounds(self) -> Vec<Bound> {
        match self {
            BoundSelection::Minus => vec![Bound::Minus],
            BoundSelection::Plus => vec![Bound::Plus],
            BoundSelection::Both => vec![Bound::Minus, Bound::Plus],
        }
    }
}

/// How `M = fraction * n` becomes an integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MRounding {
    Floor,
    Round,
    /// Both roundings, one row each when they differ.
    Both,
}

impl MRounding {
    pub fn apply(self, n: usize, fraction: f64) -> Vec<usize> {
        let raw = n as f64 * fraction;
        let mut ms = match self {
            MRounding::Floor => vec![raw.floor()],
            MRounding::Round => vec![raw.round()],
            MRounding::Both => vec![raw.floor(), raw.round()],
        }
        .into_iter()
        .map(|m| (m as usize).max(1))
        .collect::<Vec<_>>();
        ms.dedup();
        ms
    }
}

/// What to do when `x / s0` is not a multiple of `1/M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffGrid {
    Error,
    /// Evaluate at the largest grid proportion below `x / s0`.
    Floor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table2Config {
    pub sigma_hi: Vec<f64>,
    pub x: Vec<f64>,
}

impl Default for Table2Config {
    fn default() -> Self {
        Self {
            sigma_hi: vec![0.4, 0.6, 0.8, 1.0, 2.0],
            x: vec![0.0, 10.0, 20.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub x: f64,
    pub n: Vec<usize>,
    pub m_fractions: Vec<f64>,
    pub m_rounding: MRounding,
    pub off_grid: OffGrid,
}

impl LadderConfig {
    fn table3() -> Self {
        Self {
            x: 20.0,
            n: vec![50, 100, 200, 400],
            m_fractions: vec![0.25, 0.5, 1.0],
            m_rounding: MRounding::Both,
            off_grid: OffGrid::Floor,
        }
    }

    fn table4() -> Self {
        Self {
            m_fractions: vec![0.25],
            m_rounding: MRounding::Floor,
            ..Self::table3()
        }
    }
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self::table3()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Lattice sizes for the convergence probes.
    pub n: Vec<usize>,
    /// Paths of the fixed SDE sample the lattice laws are compared with.
    pub ks_paths: usize,
    /// Constant drift of the martingale measure.
    pub upsilon: f64,
    pub jump_paths: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            n: vec![25, 50, 100, 200],
            ks_paths: 1_000_000,
            upsilon: 0.0,
            jump_paths: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemosConfig {
    pub covariation_n: Vec<usize>,
    pub covariation_paths: usize,
    pub hullwhite_n: Vec<usize>,
    pub hullwhite: HullWhiteConfig,
    pub nonconcave_n: usize,
}

impl Default for DemosConfig {
    fn default() -> Self {
        Self {
            covariation_n: vec![10, 100, 1000],
            covariation_paths: 100_000,
            hullwhite_n: vec![12, 100, 400],
            hullwhite: HullWhiteConfig {
                paths: 100_000,
                seed: 7,
                strike: 1.0,
                sde_dt: 1e-3,
            },
            nonconcave_n: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: HestonParams,
    pub bounds: TruncationBounds,
    pub sigma_tilde: f64,
    pub n: usize,
    pub m: usize,
    pub projection: ProjectionScheme,
    pub bound: BoundSelection,
    pub plus_rounding: PlusRounding,
    pub precision: Precision,
    /// Capitals of the main table; each `x / s0` must lie on the control grid.
    pub x_grid: Vec<f64>,
    pub mc: McConfig,
    /// Also write every simulated terminal state of the `mc` verb.
    pub mc_dump_terminal: bool,
    pub table2: Table2Config,
    pub table3: LadderConfig,
    pub table4: LadderConfig,
    pub diagnostics: DiagnosticsConfig,
    pub demos: DemosConfig,
    /// Steps between checkpoints when a checkpoint directory is given.
    pub checkpoint_stride: usize,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut x_grid: Vec<f64> = (0..=12).map(|k| 5.0 * k as f64).collect();
        x_grid.extend([70.0, 80.0, 90.0, 100.0]);
        Self {
            params: HestonParams::reference(),
            bounds: TruncationBounds::reference(),
            sigma_tilde: 5.0,
            n: 400,
            m: 400,
            projection: ProjectionScheme::Ps1,
            bound: BoundSelection::Both,
            plus_rounding: PlusRounding::CeilPlus,
            precision: Precision::F64,
            x_grid,
            mc: McConfig::new(1_000_000, 1e-3, 20_240_601),
            mc_dump_terminal: false,
            table2: Table2Config::default(),
            table3: LadderConfig::table3(),
            table4: LadderConfig::table4(),
            diagnostics: DiagnosticsConfig::default(),
            demos: DemosConfig::default(),
            checkpoint_stride: 10,
            out: None,
            threads: None,
            checkpoint: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Lattice at `n` steps with the configured clamp.
    pub fn instance(&self, n: usize) -> Result<Instance, CliError> {
        self.instance_with(n, self.bounds)
    }

    pub fn instance_with(&self, n: usize, bounds: TruncationBounds) -> Result<Instance, CliError> {
        Instance::new(self.params, bounds, n, self.sigma_tilde).map_err(CliError::config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.params.validate().map_err(CliError::config)?;
        self.bounds.validate().map_err(CliError::config)?;
        if self.n == 0 || self.m == 0 {
            return bad("`n` and `m` must be at least 1".into());
        }
        self.instance(self.n)?;
        self.mc.validate(self.params.maturity).map_err(CliError::config)?;
        for &x in &self.x_grid {
            grid_index(x, self.params.s0, self.m).map_err(CliError::config)?;
        }
        for &hi in &self.table2.sigma_hi {
            let b = TruncationBounds::new(self.bounds.sigma_lo, hi).map_err(CliError::config)?;
            self.instance_with(self.n, b)?;
        }
        for (name, ladder) in [("table3", &self.table3), ("table4", &self.table4)] {
            if ladder.n.is_empty() || ladder.m_fractions.is_empty() {
                return bad(format!("`{name}` needs at least one n and one M fraction"));
            }
            if ladder.m_fractions.iter().any(|f| f.is_nan() || *f <= 0.0) || ladder.n.contains(&0) {
                return bad(format!("`{name}` sizes must be positive"));
            }
            if ladder.x < 0.0 || ladder.x > self.params.s0 {
                return bad(format!("`{name}.x` must lie in [0, s0]"));
            }
        }
        if self.diagnostics.n.contains(&0) || self.diagnostics.ks_paths == 0 {
            return bad("diagnostics sizes must be positive".into());
        }
        if self.demos.nonconcave_n == 0 || self.demos.nonconcave_n > 16 {
            return bad("`demos.nonconcave_n` must lie in 1..=16".into());
        }
        if self.demos.hullwhite_n.iter().any(|n| *n < 2) {
            return bad("`demos.hullwhite_n` entries must be at least 2".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything that determines results; output
    /// directory, thread count and checkpoint location are excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        c.checkpoint = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn shipped_example_spells_out_the_defaults() {
        let c: RunConfig = serde_json::from_str(include_str!("../config/example.json")).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"nn": 3}"#).is_err());
    }

    #[test]
    fn m_rounding_dedups() {
        assert_eq!(MRounding::Both.apply(50, 0.25), vec![12, 13]);
        assert_eq!(MRounding::Both.apply(100, 0.25), vec![25]);
    }

    #[test]
    fn digest_ignores_threads_and_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.threads = Some(8);
        b.out = Some("elsewhere".into());
        assert_eq!(a.digest(), b.digest());
        b.mc.seed += 1;
        assert_ne!(a.digest(), b.digest());
    }
}
