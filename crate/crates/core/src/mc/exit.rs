//! First exit of the volatility from a band, detected on the Euler grid.

use serde::Serialize;

use super::{per_path, McConfig, McEstimate, PathNormals};
use crate::error::{Error, Result};
use crate::model::{HestonParams, TruncationBounds};

/// Exit statistics of `sqrt(nu)` from `(sigma_lo, sigma_hi)` before maturity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExitStats {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// `P(Theta < T)`.
    pub p_exit: McEstimate,
    /// `P(Theta = T)`, the complement.
    pub p_no_exit: McEstimate,
    pub p_hit_lo: McEstimate,
    pub p_hit_hi: McEstimate,
}

/// Running extrema of the raw variance (full-truncation Euler) along each path.
fn variance_extrema(params: &HestonParams, cfg: &McConfig) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    cfg.validate(params.maturity)?;
    let (steps, dt) = cfg.grid(params.maturity);
    let sqrt_dt = dt.sqrt();
    let p = *params;
    Ok(per_path(cfg.paths, |path| {
        let mut z = PathNormals::new(cfg.seed, path, cfg.antithetic);
        let mut nu = p.nu0;
        let (mut lo, mut hi) = (nu, nu);
        for _ in 0..steps {
            // the price noise is drawn too so paths share streams with the joint simulators
            let _ = z.next();
            let db = z.next() * sqrt_dt;
            let v = nu.max(0.0);
            nu += p.kappa * (p.theta - v) * dt + p.sigma * v.sqrt() * db;
            lo = lo.min(nu);
            hi = hi.max(nu);
        }
        (lo, hi)
    }))
}

fn indicator_estimate(flags: impl Iterator<Item = bool>, cfg: &McConfig) -> McEstimate {
    let v: Vec<f64> = flags.map(|f| f as u8 as f64).collect();
    McEstimate::from_values(&v, cfg)
}

fn stats_from_extrema(extrema: &[(f64, f64)], lo: f64, hi: f64, cfg: &McConfig) -> ExitStats {
    let (vlo, vhi) = (lo * lo, hi * hi);
    let hit_lo = || extrema.iter().map(move |e| e.0 <= vlo);
    let hit_hi = || extrema.iter().map(move |e| e.1 >= vhi);
    let exit = || hit_lo().zip(hit_hi()).map(|(a, b)| a || b);
    ExitStats {
        sigma_lo: lo,
        sigma_hi: hi,
        p_exit: indicator_estimate(exit(), cfg),
        p_no_exit: indicator_estimate(exit().map(|e| !e), cfg),
        p_hit_lo: indicator_estimate(hit_lo(), cfg),
        p_hit_hi: indicator_estimate(hit_hi(), cfg),
    }
}

/// Exit statistics for one band.
pub fn exit_stats(
    params: &HestonParams,
    bounds: &TruncationBounds,
    cfg: &McConfig,
) -> Result<ExitStats> {
    Ok(exit_stats_ladder(params, bounds.sigma_lo, &[bounds.sigma_hi], cfg)?.remove(0))
}

/// Exit statistics for several upper barriers from a single set of paths.
pub fn exit_stats_ladder(
    params: &HestonParams,
    sigma_lo: f64,
    sigma_his: &[f64],
    cfg: &McConfig,
) -> Result<Vec<ExitStats>> {
    for &hi in sigma_his {
        TruncationBounds::new(sigma_lo, hi)?;
    }
    let extrema = variance_extrema(params, cfg)?;
    Ok(sigma_his
        .iter()
        .map(|&hi| stats_from_extrema(&extrema, sigma_lo, hi, cfg))
        .collect())
}

/// Barrier probabilities of the auxiliary process
/// `d alpha = (kappa (theta - alpha) + sigma rho alpha) dt + sigma sqrt(alpha) dW`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaExitStats {
    pub sigma_lo: f64,
    /// `P(inf sqrt(alpha) <= sigma_lo)`.
    pub p_lo: McEstimate,
    /// `(sigma_hi, P(sup sqrt(alpha) >= sigma_hi))` for each requested barrier.
    pub p_hi: Vec<(f64, McEstimate)>,
}

/// Full-truncation Euler simulation of `alpha` from `alpha_0 = nu0`.
pub fn alpha_exit_stats(
    params: &HestonParams,
    sigma_lo: f64,
    sigma_his: &[f64],
    cfg: &McConfig,
) -> Result<AlphaExitStats> {
    params.validate()?;
    cfg.validate(params.maturity)?;
    if sigma_lo.is_nan() || sigma_lo <= 0.0 {
        return Err(Error::InvalidParam {
            name: "sigma_lo",
            value: sigma_lo,
            reason: "must be strictly positive",
        });
    }
    let (steps, dt) = cfg.grid(params.maturity);
    let sqrt_dt = dt.sqrt();
    let p = *params;
    let extrema = per_path(cfg.paths, |path| {
        let mut z = PathNormals::new(cfg.seed, path, cfg.antithetic);
        let mut alpha = p.nu0;
        let (mut lo, mut hi) = (alpha, alpha);
        for _ in 0..steps {
            let v = alpha.max(0.0);
            let drift = p.kappa * (p.theta - v) + p.sigma * p.rho * v;
            alpha += drift * dt + p.sigma * v.sqrt() * z.next() * sqrt_dt;
            lo = lo.min(alpha);
            hi = hi.max(alpha);
        }
        (lo, hi)
    });
    let vlo = sigma_lo * sigma_lo;
    Ok(AlphaExitStats {
        sigma_lo,
        p_lo: indicator_estimate(extrema.iter().map(|e| e.0 <= vlo), cfg),
        p_hi: sigma_his
            .iter()
            .map(|&hi| {
                let vhi = hi * hi;
                (hi, indicator_estimate(extrema.iter().map(|e| e.1 >= vhi), cfg))
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_barriers_give_no_exit() {
        let p = HestonParams::reference();
        let s = exit_stats(
            &p,
            &TruncationBounds::new(1e-6, 1e3).unwrap(),
            &McConfig::new(500, 1e-2, 1),
        )
        .unwrap();
        assert_eq!(s.p_exit.mean, 0.0);
        assert_eq!(s.p_no_exit.mean, 1.0);
    }

    #[test]
    fn ladder_is_nested() {
        let p = HestonParams::reference();
        let cfg = McConfig::new(2000, 1e-2, 2);
        let st = exit_stats_ladder(&p, 1e-4, &[0.4, 0.6, 0.8, 1.0], &cfg).unwrap();
        for w in st.windows(2) {
            assert!(w[0].p_hit_hi.mean >= w[1].p_hit_hi.mean);
            assert!(w[0].p_exit.mean >= w[1].p_exit.mean);
        }
        for s in &st {
            assert!((s.p_exit.mean + s.p_no_exit.mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_upper_probabilities_decrease() {
        let p = HestonParams::reference();
        let a = alpha_exit_stats(&p, 1e-2, &[0.6, 0.8, 1.0, 1.5], &McConfig::new(2000, 1e-2, 3))
            .unwrap();
        assert!(a.p_hi.windows(2).all(|w| w[0].1.mean >= w[1].1.mean));
    }
}
