//! Euler Monte Carlo for the truncated and the raw Heston dynamics.
//!
//! Paths are independent: path `p` draws from a ChaCha8 stream keyed by `(seed, p)`, and
//! within a path the generator position is the step counter. Results are collected in
//! path order and reduced pairwise, so estimates do not depend on the worker count.

mod exit;

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exit::{alpha_exit_stats, exit_stats, exit_stats_ladder, AlphaExitStats, ExitStats};

use crate::error::{Error, Result};
use crate::model::{HestonParams, TruncationBounds};
use crate::sum::{mean_var, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(paths: usize, dt: f64, seed: u64) -> Self {
        Self {
            paths,
            dt,
            seed,
            antithetic: false,
        }
    }

    pub fn validate(&self, maturity: f64) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidParam {
                name: "paths",
                value: 0.0,
                reason: "at least one path is required",
            });
        }
        if !(self.dt > 0.0 && self.dt <= maturity) {
            return Err(Error::InvalidParam {
                name: "dt",
                value: self.dt,
                reason: "must lie in (0, maturity]",
            });
        }
        Ok(())
    }

    /// Number of Euler steps and the step actually used, `maturity / steps`.
    pub fn grid(&self, maturity: f64) -> (usize, f64) {
        let steps = ((maturity / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, maturity / steps as f64)
    }
}

/// A Monte Carlo answer with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Mean and standard error of per-path values. Under antithetic sampling consecutive
    /// pairs are averaged first, since they are not independent.
    pub fn from_values(values: &[f64], cfg: &McConfig) -> Self {
        let (mean, stderr) = if cfg.antithetic && values.len() >= 4 {
            let pairs: Vec<f64> = values
                .chunks(2)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let (_, var) = mean_var(&pairs);
            (
                pairwise_sum(values) / values.len() as f64,
                (var / pairs.len() as f64).sqrt(),
            )
        } else {
            let (mean, var) = mean_var(values);
            (mean, (var / values.len() as f64).sqrt())
        };
        Self {
            mean,
            stderr,
            paths: values.len(),
            seed: cfg.seed,
        }
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Normal source for one path. With antithetic sampling, paths `2m` and `2m + 1` share
/// stream `m` with opposite signs.
pub(crate) struct PathNormals {
    rng: ChaCha8Rng,
    sign: f64,
}

impl PathNormals {
    pub(crate) fn new(seed: u64, path: usize, antithetic: bool) -> Self {
        let (stream, sign) = if antithetic {
            ((path / 2) as u64, if path.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (path as u64, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, sign }
    }

    #[inline]
    pub(crate) fn next(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sign * z
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Runs `f` for every path index in parallel and returns the results in path order.
pub(crate) fn per_path<T: Send>(paths: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..paths).into_par_iter().map(f).collect()
}

/// Terminal values and barrier flags per path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TerminalSamples {
    pub s_t: Vec<f64>,
    pub nu_t: Vec<f64>,
    /// The path reached the lower clamp region (`nu <= sigma_lo^2`) on the Euler grid.
    pub hit_lo: Vec<bool>,
    /// The path reached the upper clamp region (`nu >= sigma_hi^2`).
    pub hit_hi: Vec<bool>,
}

impl TerminalSamples {
    pub fn len(&self) -> usize {
        self.s_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_t.is_empty()
    }

    /// CSV dump with columns `path,S_T,nu_T,hit_lo,hit_hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path,S_T,nu_T,hit_lo,hit_hi")?;
        for p in 0..self.len() {
            writeln!(
                w,
                "{p},{},{},{},{}",
                self.s_t[p], self.nu_t[p], self.hit_lo[p] as u8, self.hit_hi[p] as u8
            )?;
        }
        Ok(())
    }

    fn from_paths(rows: Vec<(f64, f64, bool, bool)>) -> Self {
        let mut out = TerminalSamples {
            s_t: Vec::with_capacity(rows.len()),
            nu_t: Vec::with_capacity(rows.len()),
            hit_lo: Vec::with_capacity(rows.len()),
            hit_hi: Vec::with_capacity(rows.len()),
        };
        for (s, nu, lo, hi) in rows {
            out.s_t.push(s);
            out.nu_t.push(nu);
            out.hit_lo.push(lo);
            out.hit_hi.push(hi);
        }
        out
    }
}

/// Correlated increments `(dW, dB)` with correlation `rho`, scaled by `sqrt(dt)`.
#[inline]
fn correlated(z: &mut PathNormals, rho: f64, rho_bar: f64, sqrt_dt: f64) -> (f64, f64) {
    let z1 = z.next();
    let z2 = z.next();
    (z1 * sqrt_dt, (rho * z1 + rho_bar * z2) * sqrt_dt)
}

/// Euler scheme for the truncated model: `h(nu)` replaces the variance in both drift and
/// diffusion, and `ln S` is stepped with drift `mu - h / 2`.
pub fn simulate_truncated(
    params: &HestonParams,
    bounds: &TruncationBounds,
    cfg: &McConfig,
) -> Result<TerminalSamples> {
    params.validate()?;
    bounds.validate()?;
    cfg.validate(params.maturity)?;
    let (steps, dt) = cfg.grid(params.maturity);
    let sqrt_dt = dt.sqrt();
    let p = *params;
    let b = *bounds;
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let rows = per_path(cfg.paths, |path| {
        let mut z = PathNormals::new(cfg.seed, path, cfg.antithetic);
        let (mut x, mut nu) = (p.s0.ln(), p.nu0);
        let (mut lo, mut hi) = (nu <= b.var_lo(), nu >= b.var_hi());
        for _ in 0..steps {
            let h = b.clamp(nu);
            let sh = h.sqrt();
            let (dw, db) = correlated(&mut z, p.rho, rho_bar, sqrt_dt);
            x += (p.mu - 0.5 * h) * dt + sh * dw;
            nu += p.kappa * (p.theta - h) * dt + p.sigma * sh * db;
            lo |= nu <= b.var_lo();
            hi |= nu >= b.var_hi();
        }
        (x.exp(), nu, lo, hi)
    });
    Ok(TerminalSamples::from_paths(rows))
}

/// Euler scheme with full truncation for the unmodified model: the positive part of the
/// variance enters drift and diffusion. Barrier flags are left false.
pub fn simulate_raw(params: &HestonParams, cfg: &McConfig) -> Result<TerminalSamples> {
    params.validate()?;
    cfg.validate(params.maturity)?;
    let (steps, dt) = cfg.grid(params.maturity);
    let sqrt_dt = dt.sqrt();
    let p = *params;
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let rows = per_path(cfg.paths, |path| {
        let mut z = PathNormals::new(cfg.seed, path, cfg.antithetic);
        let (mut x, mut nu) = (p.s0.ln(), p.nu0);
        for _ in 0..steps {
            let v = nu.max(0.0);
            let sv = v.sqrt();
            let (dw, db) = correlated(&mut z, p.rho, rho_bar, sqrt_dt);
            x += (p.mu - 0.5 * v) * dt + sv * dw;
            nu += p.kappa * (p.theta - v) * dt + p.sigma * sv * db;
        }
        (x.exp(), nu, false, false)
    });
    Ok(TerminalSamples::from_paths(rows))
}

/// `E[S_T e^{-mu T}]` per path, the quantity of the discounted-martingale check.
pub fn discounted_terminal(params: &HestonParams, samples: &TerminalSamples, cfg: &McConfig) -> McEstimate {
    let disc = (-params.mu * params.maturity).exp();
    let v: Vec<f64> = samples.s_t.iter().map(|s| s * disc).collect();
    McEstimate::from_values(&v, cfg)
}

/// Unhedged shortfall value `-E[((S_T - K)^+ - x)^+]` for each capital in `xs`, from one
/// simulation of the truncated model.
pub fn mc_unhedged_many(
    params: &HestonParams,
    bounds: &TruncationBounds,
    cfg: &McConfig,
    xs: &[f64],
) -> Result<Vec<McEstimate>> {
    let samples = simulate_truncated(params, bounds, cfg)?;
    Ok(unhedged_from_samples(params, &samples, cfg, xs))
}

pub fn mc_unhedged(
    params: &HestonParams,
    bounds: &TruncationBounds,
    cfg: &McConfig,
    x: f64,
) -> Result<McEstimate> {
    Ok(mc_unhedged_many(params, bounds, cfg, &[x])?[0])
}

pub fn unhedged_from_samples(
    params: &HestonParams,
    samples: &TerminalSamples,
    cfg: &McConfig,
    xs: &[f64],
) -> Vec<McEstimate> {
    xs.iter()
        .map(|&x| {
            let v: Vec<f64> = samples
                .s_t
                .iter()
                .map(|&s| -(params.call_payoff(s) - x).max(0.0))
                .collect();
            McEstimate::from_values(&v, cfg)
        })
        .collect()
}
