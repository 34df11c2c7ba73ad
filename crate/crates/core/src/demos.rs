//! Small binomial constructions that show where weak convergence of models does and does
//! not carry the value of the hedging problem along.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::ks_two_sample;
use crate::error::{Error, Result};
use crate::mc::{per_path, McConfig, McEstimate, PathNormals};

/// Partial-sum paths `W_k = sqrt(T/n) sum_{i<=k} xi_i` and
/// `W^_k = sqrt(T/n) sum_{i<=k} prod_{j<=i} xi_j` driven by one sign sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignPathPair {
    pub n: usize,
    pub w: Vec<f64>,
    pub w_hat: Vec<f64>,
    /// `[W, W^]_T = (T/n) sum_i prod_{j<i} xi_j`.
    pub covariation: f64,
}

impl SignPathPair {
    pub fn from_signs(signs: &[i8], maturity: f64) -> Self {
        let n = signs.len();
        let h = (maturity / n as f64).sqrt();
        let (mut w, mut w_hat) = (vec![0.0], vec![0.0]);
        let (mut prod, mut cov_sum) = (1i64, 0i64);
        for &s in signs {
            // prod_{j<i} before the update, prod_{j<=i} after
            cov_sum += prod;
            prod *= s as i64;
            w.push(w.last().unwrap() + h * s as f64);
            w_hat.push(w_hat.last().unwrap() + h * prod as f64);
        }
        Self {
            n,
            w,
            w_hat,
            covariation: maturity / n as f64 * cov_sum as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovariationReport {
    /// Estimate of `E[([W, W^]_T)^2]`.
    pub second_moment: McEstimate,
    /// `T^2 / n`.
    pub target: f64,
    /// Sample correlation of `W_T` and `W^_T`.
    pub terminal_correlation: f64,
    /// Standard error of that correlation under independence, `1 / sqrt(paths)`.
    pub correlation_stderr: f64,
}

fn random_signs(z: &mut PathNormals, n: usize) -> Vec<i8> {
    (0..n)
        .map(|_| if z.rng().random::<bool>() { 1 } else { -1 })
        .collect()
}

/// Monte Carlo of the squared covariation of the two sign-driven walks.
pub fn kais_covariation(n: usize, maturity: f64, paths: usize, seed: u64) -> Result<CovariationReport> {
    if n == 0 || paths < 2 {
        return Err(Error::Precondition("need n >= 1 and at least two paths".into()));
    }
    let rows = per_path(paths, |p| {
        let mut z = PathNormals::new(seed, p, false);
        let pair = SignPathPair::from_signs(&random_signs(&mut z, n), maturity);
        (pair.covariation, pair.w[n], pair.w_hat[n])
    });
    let sq: Vec<f64> = rows.iter().map(|r| r.0 * r.0).collect();
    let cfg = McConfig::new(paths, maturity, seed);
    let m = paths as f64;
    let (mx, my) = (
        rows.iter().map(|r| r.1).sum::<f64>() / m,
        rows.iter().map(|r| r.2).sum::<f64>() / m,
    );
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for r in &rows {
        sxy += (r.1 - mx) * (r.2 - my);
        sxx += (r.1 - mx).powi(2);
        syy += (r.2 - my).powi(2);
    }
    Ok(CovariationReport {
        second_moment: McEstimate::from_values(&sq, &cfg),
        target: maturity * maturity / n as f64,
        terminal_correlation: sxy / (sxx * syy).sqrt(),
        correlation_stderr: 1.0 / m.sqrt(),
    })
}

/// The sign-driven binomial Hull-White model with maturity 1:
/// `nu_k = prod (1 + sqrt(1/n) xi_i)` and
/// `S_k = prod (1 + min(nu_{i-1}, ln n) sqrt(1/n) prod_{j<=i} xi_j)`.
fn hullwhite_terminal(signs: &[i8]) -> f64 {
    let n = signs.len();
    let h = (1.0 / n as f64).sqrt();
    let cap = (n as f64).ln();
    let (mut nu, mut s, mut prod) = (1.0f64, 1.0f64, 1.0f64);
    for &x in signs {
        prod *= x as f64;
        s *= 1.0 + nu.min(cap) * h * prod;
        nu *= 1.0 + h * x as f64;
    }
    s
}

fn check_hullwhite(n: usize) -> Result<()> {
    let h = (1.0 / n as f64).sqrt();
    if n < 2 || 1.0 - h <= 0.0 || 1.0 - (n as f64).ln() * h <= 0.0 {
        return Err(Error::Precondition(format!(
            "binomial Hull-White model with n = {n} is not strictly positive"
        )));
    }
    Ok(())
}

/// Largest `n` for which the binomial model is enumerated exactly.
pub const HULLWHITE_ENUMERATION_MAX: usize = 20;

/// Settings of [`hullwhite_demo`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullWhiteConfig {
    pub paths: usize,
    pub seed: u64,
    pub strike: f64,
    /// Euler step of the limiting diffusion sample.
    pub sde_dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HullWhiteReport {
    pub n: usize,
    /// `E[S_T]`; exact (zero stderr) when enumerated.
    pub mean_terminal: McEstimate,
    /// `V_n = E[(S_T - K)^+]`, the unique price in the complete binomial model.
    pub call_price: McEstimate,
    /// `S_0 - V_n`.
    pub gap: f64,
    /// Two-sample KS distance between `S_T` of the binomial model and of the diffusion.
    pub ks_vs_sde: f64,
    pub enumerated: bool,
}

/// Terminal samples of `dS = nu S dW^`, `dnu = nu dW` on `[0, 1]` with independent noises,
/// `nu` sampled exactly and `ln S` by Euler. Uses streams disjoint from the binomial ones.
pub fn hullwhite_sde_sample(paths: usize, seed: u64, dt: f64) -> Result<Vec<f64>> {
    let cfg = McConfig::new(paths, dt, seed);
    cfg.validate(1.0)?;
    let (steps, dt) = cfg.grid(1.0);
    let sqrt_dt = dt.sqrt();
    Ok(per_path(paths, |p| {
        let mut z = PathNormals::new(seed ^ 0x5DE5_A3F1_0000_0000, p, false);
        let (mut w, mut x) = (0.0f64, 0.0f64);
        for step in 0..steps {
            let nu = (w - 0.5 * step as f64 * dt).exp();
            x += -0.5 * nu * nu * dt + nu * sqrt_dt * z.next();
            w += sqrt_dt * z.next();
        }
        x.exp()
    }))
}

fn enumerate_hullwhite(n: usize) -> Vec<f64> {
    (0..1u64 << n)
        .map(|bits| {
            let signs: Vec<i8> = (0..n).map(|b| if bits >> b & 1 == 1 { 1 } else { -1 }).collect();
            hullwhite_terminal(&signs)
        })
        .collect()
}

pub fn hullwhite_demo(n: usize, cfg: &HullWhiteConfig) -> Result<HullWhiteReport> {
    check_hullwhite(n)?;
    let mc = McConfig::new(cfg.paths.max(2), 1.0, cfg.seed);
    let sampled: Vec<f64> = per_path(mc.paths, |p| {
        let mut z = PathNormals::new(cfg.seed, p, false);
        hullwhite_terminal(&random_signs(&mut z, n))
    });
    let payoff = |s: &f64| (s - cfg.strike).max(0.0);
    let (mean_terminal, call_price, enumerated) = if n <= HULLWHITE_ENUMERATION_MAX {
        let all = enumerate_hullwhite(n);
        let exact = |v: f64| McEstimate {
            mean: v,
            stderr: 0.0,
            paths: all.len(),
            seed: cfg.seed,
        };
        let m = all.len() as f64;
        (
            exact(crate::sum::pairwise_sum(&all) / m),
            exact(crate::sum::pairwise_sum(&all.iter().map(payoff).collect::<Vec<_>>()) / m),
            true,
        )
    } else {
        let calls: Vec<f64> = sampled.iter().map(payoff).collect();
        (
            McEstimate::from_values(&sampled, &mc),
            McEstimate::from_values(&calls, &mc),
            false,
        )
    };
    let sde = hullwhite_sde_sample(mc.paths, cfg.seed, cfg.sde_dt)?;
    Ok(HullWhiteReport {
        n,
        mean_terminal,
        call_price,
        gap: 1.0 - call_price.mean,
        ks_vs_sde: ks_two_sample(&sampled, &sde)?,
        enumerated,
    })
}

/// Replication in the binomial model `S_k = prod (1 + xi_i / n^2)` of the claim
/// `2 * 1{xi_1 = +1}` from capital 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonConcaveReport {
    pub n: usize,
    /// `E[min(2, max(V_T, 1))]` for the replicating strategy.
    pub value: f64,
    /// Value of the limiting constant-price model from the same capital.
    pub limit_value: f64,
    /// Smallest wealth seen along any branch.
    pub min_wealth: f64,
    /// Largest deviation of the self-financed wealth from the claim at maturity.
    pub replication_error: f64,
}

/// Builds the replicating strategy by backward induction over all `2^n` branches and
/// rolls the wealth forward.
pub fn nonconcave_value(n: usize) -> Result<NonConcaveReport> {
    if !(1..=16).contains(&n) {
        return Err(Error::Precondition("nonconcave_value supports 1 <= n <= 16".into()));
    }
    let step = 1.0 / (n * n) as f64;
    let claim = |bits: u64| if bits & 1 == 1 { 2.0 } else { 0.0 };
    let utility = |v: f64| v.clamp(1.0, 2.0);
    // backward: value at a node is the mean of its children (the unique martingale
    // measure puts 1/2 on each move); node at depth k is the low k bits
    let mut layers: Vec<Vec<f64>> = vec![(0..1u64 << n).map(claim).collect()];
    for k in (0..n).rev() {
        let child = layers.last().unwrap();
        let layer: Vec<f64> = (0..1usize << k)
            .map(|b| 0.5 * (child[b] + child[b | 1 << k]))
            .collect();
        layers.push(layer);
    }
    layers.reverse();
    let mut min_wealth = f64::INFINITY;
    let mut err = 0.0f64;
    for bits in 0..1usize << n {
        let (mut v, mut s) = (layers[0][0], 1.0f64);
        min_wealth = min_wealth.min(v);
        for k in 0..n {
            let node = bits & ((1 << k) - 1);
            let (up, down) = (node | 1 << k, node);
            let delta = (layers[k + 1][up] - layers[k + 1][down]) / (2.0 * s * step);
            let x = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            let s_next = s * (1.0 + x * step);
            v += delta * (s_next - s);
            s = s_next;
            min_wealth = min_wealth.min(v);
        }
        err = err.max((v - claim(bits as u64)).abs());
    }
    let value = (0..1u64 << n).map(|b| utility(claim(b))).sum::<f64>() / (1u64 << n) as f64;
    Ok(NonConcaveReport {
        n,
        value,
        limit_value: utility(1.0),
        min_wealth,
        replication_error: err,
    })
}
