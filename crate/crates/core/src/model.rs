//! Truncated Heston model, the log-price / decorrelated-variance coordinates and the
//! trinomial lattice geometry.
//!
//! The variance clamp `h(z) = max(sigma_lo^2, min(z, sigma_hi^2))` enters every drift and
//! diffusion coefficient. The lattice lives in the coordinates
//! `Phi = ln S` and `Psi = nu / sigma - rho * Phi`, which are driven by independent
//! Brownian motions, so each coordinate gets its own trinomial step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Heston coefficients plus the European call that is being hedged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub s0: f64,
    pub nu0: f64,
    pub maturity: f64,
    pub strike: f64,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

impl HestonParams {
    /// The parameter set used for the reference shortfall tables: `K = 90`, `S0 = 100`,
    /// `T = 1`, `nu0 = 0.09`.
    pub fn reference() -> Self {
        Self {
            mu: 0.05,
            kappa: 1.15,
            theta: 0.348,
            sigma: 0.39,
            rho: -0.64,
            s0: 100.0,
            nu0: 0.09,
            maturity: 1.0,
            strike: 90.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParam {
                name: "mu",
                value: self.mu,
                reason: "must be finite",
            });
        }
        positive("kappa", self.kappa)?;
        positive("theta", self.theta)?;
        positive("sigma", self.sigma)?;
        positive("s0", self.s0)?;
        positive("nu0", self.nu0)?;
        positive("maturity", self.maturity)?;
        positive("strike", self.strike)?;
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParam {
                name: "rho",
                value: self.rho,
                reason: "must lie strictly inside (-1, 1)",
            });
        }
        let lhs = 2.0 * self.kappa * self.theta;
        let rhs = self.sigma * self.sigma;
        if lhs <= rhs {
            return Err(Error::Feller { lhs, rhs });
        }
        Ok(())
    }

    /// Exponent `2 kappa theta / sigma^2 - 1` governing how fast the variance process
    /// approaches zero.
    pub fn feller_exponent(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.sigma * self.sigma) - 1.0
    }

    pub fn call_payoff(&self, price: f64) -> f64 {
        (price - self.strike).max(0.0)
    }
}

/// Volatility barriers of the variance clamp.
///
/// `sigma_lo == sigma_hi` is accepted and freezes the variance at `sigma_lo^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationBounds {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl TruncationBounds {
    pub fn new(sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        let b = Self { sigma_lo, sigma_hi };
        b.validate()?;
        Ok(b)
    }

    /// Barriers `(1e-4, 1)` of the reference tables.
    pub fn reference() -> Self {
        Self {
            sigma_lo: 1e-4,
            sigma_hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma_lo", self.sigma_lo)?;
        positive("sigma_hi", self.sigma_hi)?;
        if self.sigma_lo > self.sigma_hi {
            return Err(Error::InvalidParam {
                name: "sigma_lo",
                value: self.sigma_lo,
                reason: "must not exceed sigma_hi",
            });
        }
        Ok(())
    }

    pub fn var_lo(&self) -> f64 {
        self.sigma_lo * self.sigma_lo
    }

    pub fn var_hi(&self) -> f64 {
        self.sigma_hi * self.sigma_hi
    }

    #[inline]
    pub fn clamp(&self, z: f64) -> f64 {
        clamp_variance(z, self)
    }
}

/// `h(z) = max(sigma_lo^2, min(z, sigma_hi^2))`.
#[inline]
pub fn clamp_variance(z: f64, bounds: &TruncationBounds) -> f64 {
    bounds.var_lo().max(z.min(bounds.var_hi()))
}

/// Drift and diffusion coefficients of `(Phi, Psi)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoeffSet {
    pub mu_phi: f64,
    pub sigma_phi: f64,
    pub mu_psi: f64,
    pub sigma_psi: f64,
    /// The clamped variance `h(sigma (rho y + z))` the coefficients were built from.
    pub variance: f64,
}

pub fn transform_coeffs(
    y: f64,
    z: f64,
    params: &HestonParams,
    bounds: &TruncationBounds,
) -> CoeffSet {
    let h = clamp_variance(params.sigma * (params.rho * y + z), bounds);
    coeffs_from_variance(h, params)
}

/// Coefficients as a function of the clamped variance alone.
pub fn coeffs_from_variance(h: f64, params: &HestonParams) -> CoeffSet {
    let mu_phi = params.mu - 0.5 * h;
    let sigma_phi = h.sqrt();
    let mu_psi = params.kappa / params.sigma * (params.theta - h) - params.rho * mu_phi;
    let sigma_psi = (1.0 - params.rho * params.rho).sqrt() * sigma_phi;
    CoeffSet {
        mu_phi,
        sigma_phi,
        mu_psi,
        sigma_psi,
        variance: h,
    }
}

/// Geometry of the `n`-step lattice: both coordinates move on the grid `phi0 + step * Z`
/// and `psi0 + step * Z` with `step = sigma_tilde * sqrt(T / n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSpec {
    pub n: usize,
    pub sigma_tilde: f64,
    pub step: f64,
    pub maturity: f64,
    pub dt: f64,
    pub sqrt_dt: f64,
    pub phi0: f64,
    pub psi0: f64,
    /// `e^{step}` and `e^{-step}`, computed once.
    pub exp_up: f64,
    pub exp_down: f64,
}

impl LatticeSpec {
    /// `n = 0` is accepted as the degenerate lattice with only the root node.
    pub fn new(
        n: usize,
        sigma_tilde: f64,
        params: &HestonParams,
        bounds: &TruncationBounds,
    ) -> Result<Self> {
        params.validate()?;
        bounds.validate()?;
        positive("sigma_tilde", sigma_tilde)?;
        if sigma_tilde < bounds.sigma_hi {
            return Err(Error::InvalidParam {
                name: "sigma_tilde",
                value: sigma_tilde,
                reason: "must be at least sigma_hi",
            });
        }
        let phi0 = params.s0.ln();
        let psi0 = params.nu0 / params.sigma - params.rho * phi0;
        let (dt, sqrt_dt, step) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let dt = params.maturity / n as f64;
            let sqrt_dt = dt.sqrt();
            (dt, sqrt_dt, sigma_tilde * sqrt_dt)
        };
        Ok(Self {
            n,
            sigma_tilde,
            step,
            maturity: params.maturity,
            dt,
            sqrt_dt,
            phi0,
            psi0,
            exp_up: step.exp(),
            exp_down: (-step).exp(),
        })
    }

    /// Number of lattice nodes `(i, j)` at time index `k`.
    pub fn width(k: usize) -> usize {
        2 * k + 1
    }

    /// Total node count `sum_k (2k+1)^2` over `k = 0..=n`.
    pub fn state_count(&self) -> u128 {
        (0..=self.n as u128).map(|k| (2 * k + 1) * (2 * k + 1)).sum()
    }

    #[inline]
    pub fn price(&self, s0: f64, i: i32) -> f64 {
        s0 * (i as f64 * self.step).exp()
    }
}

/// A lattice node: `i` up-minus-down moves of `Phi` and `j` of `Psi` after `k` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub k: usize,
    pub i: i32,
    pub j: i32,
}

impl NodeState {
    pub fn new(k: usize, i: i32, j: i32, spec: &LatticeSpec) -> Result<Self> {
        let node = Self { k, i, j };
        node.check(spec)?;
        Ok(node)
    }

    pub fn check(&self, spec: &LatticeSpec) -> Result<()> {
        let k = self.k as i64;
        if self.k > spec.n || (self.i as i64).abs() > k || (self.j as i64).abs() > k {
            return Err(Error::NodeOutOfBounds {
                k: self.k,
                i: self.i,
                j: self.j,
                n: spec.n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeValues {
    pub phi: f64,
    pub psi: f64,
    /// `sigma (Psi + rho Phi)` before clamping; may be negative.
    pub nu_raw: f64,
    pub price: f64,
}

pub fn node_values(
    node: NodeState,
    spec: &LatticeSpec,
    params: &HestonParams,
) -> Result<NodeValues> {
    node.check(spec)?;
    Ok(node_values_unchecked(node.i, node.j, spec, params))
}

#[inline]
pub(crate) fn node_values_unchecked(
    i: i32,
    j: i32,
    spec: &LatticeSpec,
    params: &HestonParams,
) -> NodeValues {
    let phi = spec.phi0 + i as f64 * spec.step;
    let psi = spec.psi0 + j as f64 * spec.step;
    NodeValues {
        phi,
        psi,
        nu_raw: params.sigma * (psi + params.rho * phi),
        price: spec.price(params.s0, i),
    }
}

/// A complete problem instance: model, clamp and lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub params: HestonParams,
    pub bounds: TruncationBounds,
    pub lattice: LatticeSpec,
}

impl Instance {
    pub fn new(
        params: HestonParams,
        bounds: TruncationBounds,
        n: usize,
        sigma_tilde: f64,
    ) -> Result<Self> {
        let lattice = LatticeSpec::new(n, sigma_tilde, &params, &bounds)?;
        Ok(Self {
            params,
            bounds,
            lattice,
        })
    }

    /// Reference parameters with `sigma_tilde = 5` and `n` steps.
    pub fn reference(n: usize) -> Self {
        Self::new(HestonParams::reference(), TruncationBounds::reference(), n, 5.0)
            .expect("reference parameters are valid")
    }

    pub fn n(&self) -> usize {
        self.lattice.n
    }

    #[inline]
    pub fn coeffs_at(&self, i: i32, j: i32) -> CoeffSet {
        let v = node_values_unchecked(i, j, &self.lattice, &self.params);
        transform_coeffs(v.phi, v.psi, &self.params, &self.bounds)
    }

    #[inline]
    pub fn price(&self, i: i32) -> f64 {
        self.lattice.price(self.params.s0, i)
    }

    /// Largest terminal price `s0 e^{n step}` and the corresponding call payoff.
    pub fn max_payoff(&self) -> f64 {
        self.params.call_payoff(self.price(self.n() as i32))
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn bounds() -> TruncationBounds {
        TruncationBounds::new(1e-4, 1.0).unwrap()
    }

    #[test]
    fn clamp_examples() {
        let b = bounds();
        assert_eq!(clamp_variance(0.09, &b), 0.09);
        assert_eq!(clamp_variance(2.0, &b), 1.0);
        assert_eq!(clamp_variance(-0.5, &b), 1e-4 * 1e-4);
    }

    #[test]
    fn reference_coefficients_at_root() {
        let p = HestonParams::reference();
        let spec = LatticeSpec::new(400, 5.0, &p, &bounds()).unwrap();
        let c = transform_coeffs(spec.phi0, spec.psi0, &p, &bounds());
        // closed-form values evaluated at 40 digits
        assert!((c.variance - 0.09).abs() < 1e-15);
        assert!((c.mu_phi - 0.005).abs() < 1e-15);
        assert!((c.sigma_phi - 0.3).abs() < 1e-15);
        assert!((c.sigma_psi - 0.230_512_472_547_582_55).abs() < 1e-14);
        assert!((c.mu_psi - 0.763_969_230_769_230_77).abs() < 1e-13);
    }

    #[test]
    fn psi0_reproduces_nu0() {
        let p = HestonParams::reference();
        let spec = LatticeSpec::new(10, 5.0, &p, &bounds()).unwrap();
        let nu = p.sigma * (spec.psi0 + p.rho * spec.phi0);
        assert!((nu - p.nu0).abs() < 1e-15);
        assert_eq!(spec.step, 5.0 * (1.0f64 / 10.0).sqrt());
    }

    #[test]
    fn node_value_examples() {
        let p = HestonParams::reference();
        let spec = LatticeSpec::new(400, 5.0, &p, &bounds()).unwrap();
        let root = node_values(NodeState::new(0, 0, 0, &spec).unwrap(), &spec, &p).unwrap();
        assert_eq!(root.price, 100.0);
        assert!((root.nu_raw - 0.09).abs() < 1e-15);
        assert_eq!(root.phi, 100f64.ln());

        let up = node_values(NodeState::new(1, 1, 0, &spec).unwrap(), &spec, &p).unwrap();
        assert_eq!(up.price, 100.0 * 0.25f64.exp());
        assert!((up.price - 128.402_541_668_774_15).abs() < 1e-10);

        let down = node_values(NodeState::new(1, 0, -1, &spec).unwrap(), &spec, &p).unwrap();
        assert!((down.nu_raw - (-0.0075)).abs() < 1e-14);
    }

    #[test]
    fn out_of_bounds_nodes_rejected() {
        let p = HestonParams::reference();
        let spec = LatticeSpec::new(3, 5.0, &p, &bounds()).unwrap();
        assert!(NodeState::new(1, 2, 0, &spec).is_err());
        assert!(NodeState::new(4, 0, 0, &spec).is_err());
        assert!(node_values(NodeState { k: 2, i: 0, j: -3 }, &spec, &p).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut p = HestonParams::reference();
        p.sigma = 1.0; // 2 kappa theta = 0.8004 < 1
        assert!(matches!(p.validate(), Err(Error::Feller { .. })));
        let mut p = HestonParams::reference();
        p.rho = 1.0;
        assert!(p.validate().is_err());
        assert!(TruncationBounds::new(0.5, 0.4).is_err());
        assert!(TruncationBounds::new(0.0, 0.4).is_err());
        assert!(LatticeSpec::new(10, 0.5, &HestonParams::reference(), &bounds()).is_err());
    }

    #[test]
    fn feller_exponent_reference() {
        let e = HestonParams::reference().feller_exponent();
        assert!((e - 4.262_327_416_173_570).abs() < 1e-12);
    }
}
