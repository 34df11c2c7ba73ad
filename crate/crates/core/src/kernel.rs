//! One-step transition kernels of the lattice.
//!
//! Each coordinate moves by `xi, xihat in {-1, 0, +1}` lattice steps, independently given
//! the current node. Under the physical measure the up/down weights are
//! `v/2 +- sqrt(T/n) * drift / (2 sigma_tilde)` with `v = sigma_coord^2 / sigma_tilde^2`,
//! which matches the first two conditional moments of the diffusion. Under a martingale
//! measure the `xi` weights are `v / (1 + e^{+-step})`, which makes `e^{Phi}` a martingale.
//!
//! Near the variance clamp the raw formulas can leave `[0,1]`; a [`ProjectionScheme`]
//! maps them back to a distribution and the kernel records that it fired.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coeffs_from_variance, HestonParams, Instance, NodeState, TruncationBounds};

/// Up/mid/down probabilities for one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Triple {
    pub up: f64,
    pub mid: f64,
    pub down: f64,
}

impl Triple {
    pub fn new(up: f64, mid: f64, down: f64) -> Self {
        Self { up, mid, down }
    }

    /// Raw trinomial weights from a variance ratio `v` and a half-drift term `d`.
    #[inline]
    fn from_moments(v: f64, d: f64) -> Self {
        Self {
            up: 0.5 * v + d,
            mid: 1.0 - v,
            down: 0.5 * v - d,
        }
    }

    pub fn sum(&self) -> f64 {
        self.down + self.mid + self.up
    }

    pub fn is_valid(&self) -> bool {
        [self.up, self.mid, self.down]
            .iter()
            .all(|p| (0.0..=1.0).contains(p))
    }

    /// Probability of the move `step in {-1, 0, 1}`.
    #[inline]
    pub fn prob(&self, step: i32) -> f64 {
        match step {
            -1 => self.down,
            0 => self.mid,
            1 => self.up,
            _ => 0.0,
        }
    }

    /// `[down, mid, up]`, the fixed summation order used throughout.
    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        [self.down, self.mid, self.up]
    }

    pub fn mean(&self) -> f64 {
        self.up - self.down
    }

    fn raw_array(&self) -> [f64; 3] {
        [self.up, self.mid, self.down]
    }
}

/// Rule applied when a raw triple leaves `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionScheme {
    /// Refuse invalid kernels.
    None,
    /// Clamp each entry into `[0,1]`, put the remainder on the middle move, and rescale the
    /// outer moves if the middle would go negative.
    #[default]
    Ps1,
    /// Shrink the drift term until the triple is valid; the variance term is untouched.
    Ps2,
    /// Zero out negative entries and renormalize.
    Ps3,
}

impl ProjectionScheme {
    pub fn label(&self) -> &'static str {
        match self {
            ProjectionScheme::None => "none",
            ProjectionScheme::Ps1 => "ps1",
            ProjectionScheme::Ps2 => "ps2",
            ProjectionScheme::Ps3 => "ps3",
        }
    }

    /// Maps a raw triple to a valid distribution. Returns `None` when the scheme is
    /// [`ProjectionScheme::None`].
    pub fn project(&self, raw: Triple) -> Option<Triple> {
        match self {
            ProjectionScheme::None => None,
            ProjectionScheme::Ps1 => {
                let mut up = raw.up.clamp(0.0, 1.0);
                let mut down = raw.down.clamp(0.0, 1.0);
                let mut mid = 1.0 - up - down;
                if mid < 0.0 {
                    let s = up + down;
                    up /= s;
                    down /= s;
                    mid = 0.0;
                }
                Some(Triple { up, mid, down })
            }
            ProjectionScheme::Ps2 => {
                let v = (raw.up + raw.down).clamp(0.0, 1.0);
                let d = (0.5 * (raw.up - raw.down)).clamp(-0.5 * v, 0.5 * v);
                Some(Triple {
                    up: 0.5 * v + d,
                    mid: 1.0 - v,
                    down: 0.5 * v - d,
                })
            }
            ProjectionScheme::Ps3 => {
                let up = raw.up.max(0.0);
                let mid = raw.mid.max(0.0);
                let down = raw.down.max(0.0);
                let s = up + mid + down;
                Some(Triple {
                    up: up / s,
                    mid: mid / s,
                    down: down / s,
                })
            }
        }
    }
}

impl fmt::Display for ProjectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProjectionScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "ps1" => Ok(Self::Ps1),
            "ps2" => Ok(Self::Ps2),
            "ps3" => Ok(Self::Ps3),
            other => Err(format!("unknown projection scheme `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    Xi,
    XiHat,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordinate::Xi => "xi",
            Coordinate::XiHat => "xihat",
        })
    }
}

/// Bounded Markov drift `upsilon(k, i)` of the decorrelated variance noise under a
/// martingale measure.
#[derive(Clone)]
pub struct DriftFunctional {
    rule: Arc<dyn Fn(usize, i32) -> f64 + Send + Sync>,
    bound: f64,
}

impl DriftFunctional {
    pub fn new(bound: f64, rule: impl Fn(usize, i32) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            bound,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, |_, _| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c.abs(), move |_, _| c)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, k: usize, i: i32) -> Result<f64> {
        let value = (self.rule)(k, i);
        if value.is_nan() || value.abs() > self.bound {
            return Err(Error::DriftBound {
                k,
                i,
                value,
                bound: self.bound,
            });
        }
        Ok(value)
    }
}

impl fmt::Debug for DriftFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftFunctional")
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum Measure {
    Physical,
    Martingale(DriftFunctional),
}

impl Measure {
    pub fn tag(&self) -> MeasureTag {
        match self {
            Measure::Physical => MeasureTag::Physical,
            Measure::Martingale(_) => MeasureTag::Martingale,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureTag {
    Physical,
    Martingale,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionKernel {
    pub xi: Triple,
    pub xihat: Triple,
    pub raw_xi: Triple,
    pub raw_xihat: Triple,
    pub projected_xi: bool,
    pub projected_xihat: bool,
    pub measure: MeasureTag,
    pub scheme: ProjectionScheme,
}

impl TransitionKernel {
    pub fn projected(&self) -> bool {
        self.projected_xi || self.projected_xihat
    }

    /// Joint probability of `(xi, xihat)`.
    #[inline]
    pub fn prob(&self, xi: i32, xihat: i32) -> f64 {
        self.xi.prob(xi) * self.xihat.prob(xihat)
    }
}

fn publish(
    raw: Triple,
    scheme: ProjectionScheme,
    node: NodeState,
    coordinate: Coordinate,
) -> Result<(Triple, bool)> {
    if raw.is_valid() {
        return Ok((raw, false));
    }
    scheme
        .project(raw)
        .map(|t| (t, true))
        .ok_or(Error::InvalidKernel {
            k: node.k,
            i: node.i,
            j: node.j,
            coordinate,
            raw: raw.raw_array(),
        })
}

/// Physical-measure kernel at `node`.
pub fn physical_kernel(
    inst: &Instance,
    node: NodeState,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    node.check(&inst.lattice)?;
    physical_kernel_unchecked(inst, node, scheme)
}

#[inline]
pub(crate) fn physical_kernel_unchecked(
    inst: &Instance,
    node: NodeState,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    let spec = &inst.lattice;
    let c = inst.coeffs_at(node.i, node.j);
    let st2 = spec.sigma_tilde * spec.sigma_tilde;
    let drift_scale = spec.sqrt_dt / (2.0 * spec.sigma_tilde);
    let raw_xi = Triple::from_moments(c.sigma_phi * c.sigma_phi / st2, drift_scale * c.mu_phi);
    let raw_xihat =
        Triple::from_moments(c.sigma_psi * c.sigma_psi / st2, drift_scale * c.mu_psi);
    let (xi, projected_xi) = publish(raw_xi, scheme, node, Coordinate::Xi)?;
    let (xihat, projected_xihat) = publish(raw_xihat, scheme, node, Coordinate::XiHat)?;
    Ok(TransitionKernel {
        xi,
        xihat,
        raw_xi,
        raw_xihat,
        projected_xi,
        projected_xihat,
        measure: MeasureTag::Physical,
        scheme,
    })
}

/// Martingale-measure kernel at `node` for the drift functional `upsilon`.
pub fn martingale_kernel(
    inst: &Instance,
    node: NodeState,
    upsilon: &DriftFunctional,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    node.check(&inst.lattice)?;
    martingale_kernel_unchecked(inst, node, upsilon, scheme)
}

#[inline]
pub(crate) fn martingale_kernel_unchecked(
    inst: &Instance,
    node: NodeState,
    upsilon: &DriftFunctional,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    let spec = &inst.lattice;
    let ups = upsilon.eval(node.k, node.i)?;
    let c = inst.coeffs_at(node.i, node.j);
    let st2 = spec.sigma_tilde * spec.sigma_tilde;
    let v_phi = c.sigma_phi * c.sigma_phi / st2;
    let raw_xi = Triple {
        up: v_phi / (1.0 + spec.exp_up),
        mid: 1.0 - v_phi,
        down: v_phi / (1.0 + spec.exp_down),
    };
    let drift_scale = spec.sqrt_dt / (2.0 * spec.sigma_tilde);
    let raw_xihat = Triple::from_moments(
        c.sigma_psi * c.sigma_psi / st2,
        drift_scale * (ups * c.sigma_psi + c.mu_psi),
    );
    let (xi, projected_xi) = publish(raw_xi, scheme, node, Coordinate::Xi)?;
    let (xihat, projected_xihat) = publish(raw_xihat, scheme, node, Coordinate::XiHat)?;
    Ok(TransitionKernel {
        xi,
        xihat,
        raw_xi,
        raw_xihat,
        projected_xi,
        projected_xihat,
        measure: MeasureTag::Martingale,
        scheme,
    })
}

pub fn kernel(
    inst: &Instance,
    node: NodeState,
    measure: &Measure,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    match measure {
        Measure::Physical => physical_kernel(inst, node, scheme),
        Measure::Martingale(u) => martingale_kernel(inst, node, u, scheme),
    }
}

#[inline]
pub(crate) fn kernel_unchecked(
    inst: &Instance,
    node: NodeState,
    measure: &Measure,
    scheme: ProjectionScheme,
) -> Result<TransitionKernel> {
    match measure {
        Measure::Physical => physical_kernel_unchecked(inst, node, scheme),
        Measure::Martingale(u) => martingale_kernel_unchecked(inst, node, u, scheme),
    }
}

/// Outcome of [`min_valid_n`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinValidN {
    Steps(u64),
    /// The required number of steps exceeds the cap (the value is the cap).
    ExceedsCap(u64),
}

/// Smallest `n` for which every raw kernel (physical, and martingale with `|upsilon| <=
/// upsilon_bound`) is a valid distribution for every clamped variance in
/// `[sigma_lo^2, sigma_hi^2]`.
///
/// Validity of a trinomial triple is `|drift term| <= v/2`, i.e.
/// `sqrt(T/n) <= V(h) / (sigma_tilde D(h))`. Writing `u = 1/h`, the ratio `D/V` is
/// `|a u + b|` for `Phi` and `|a u + b| + c sqrt(u)` for `Psi`; both are maximized over
/// the endpoints, the kink and the stationary points of each linear piece.
pub fn min_valid_n(
    params: &HestonParams,
    bounds: &TruncationBounds,
    sigma_tilde: f64,
    upsilon_bound: f64,
    cap: u64,
) -> Result<MinValidN> {
    params.validate()?;
    bounds.validate()?;
    if sigma_tilde < bounds.sigma_hi {
        return Err(Error::InvalidParam {
            name: "sigma_tilde",
            value: sigma_tilde,
            reason: "must be at least sigma_hi",
        });
    }
    let (u_lo, u_hi) = (1.0 / bounds.var_hi(), 1.0 / bounds.var_lo());
    let one_m_rho2 = 1.0 - params.rho * params.rho;

    // Phi: D/V = |mu - h/2| / h = |mu u - 1/2|
    let g_phi = worst_ratio(params.mu, -0.5, 0.0, u_lo, u_hi);
    // Psi: mu_psi(h) = alpha + beta h, V = (1 - rho^2) h,
    // D/V = (|alpha u + beta| + B sqrt(1 - rho^2) sqrt(u)) / (1 - rho^2)
    let alpha = params.kappa / params.sigma * params.theta - params.rho * params.mu;
    let beta = -params.kappa / params.sigma + 0.5 * params.rho;
    let g_psi = worst_ratio(alpha, beta, upsilon_bound * one_m_rho2.sqrt(), u_lo, u_hi)
        / one_m_rho2;
    let g = g_phi.max(g_psi);

    let t = params.maturity;
    let need = t * sigma_tilde * sigma_tilde * g * g;
    if !need.is_finite() || need > cap as f64 {
        return Ok(MinValidN::ExceedsCap(cap));
    }
    let mut n = (need.ceil() as u64).max(1);
    // guard against rounding in `need`
    while n > 1 && kernels_valid_everywhere(params, bounds, sigma_tilde, upsilon_bound, n - 1) {
        n -= 1;
    }
    while !kernels_valid_everywhere(params, bounds, sigma_tilde, upsilon_bound, n) {
        n += 1;
        if n > cap {
            return Ok(MinValidN::ExceedsCap(cap));
        }
    }
    Ok(MinValidN::Steps(n))
}

/// `max_{u in [u_lo, u_hi]} |a u + b| + c sqrt(u)` with `c >= 0`.
fn worst_ratio(a: f64, b: f64, c: f64, u_lo: f64, u_hi: f64) -> f64 {
    let f = |u: f64| (a * u + b).abs() + c * u.sqrt();
    let mut candidates = vec![u_lo, u_hi];
    if a != 0.0 {
        let root = -b / a;
        if root > u_lo && root < u_hi {
            candidates.push(root);
        }
        // stationary point of s (a u + b) + c sqrt(u) where s a < 0
        if c > 0.0 {
            let r = c / (2.0 * a.abs());
            let u = r * r;
            if u > u_lo && u < u_hi {
                candidates.push(u);
            }
        }
    }
    candidates.into_iter().map(f).fold(0.0, f64::max)
}

/// Checks the raw kernel conditions at the clamp endpoints and the analytic candidates.
fn kernels_valid_everywhere(
    params: &HestonParams,
    bounds: &TruncationBounds,
    sigma_tilde: f64,
    upsilon_bound: f64,
    n: u64,
) -> bool {
    let sqrt_dt = (params.maturity / n as f64).sqrt();
    let st2 = sigma_tilde * sigma_tilde;
    let scale = sqrt_dt / (2.0 * sigma_tilde);
    let one_m_rho2 = 1.0 - params.rho * params.rho;
    let mut hs = vec![bounds.var_lo(), bounds.var_hi()];
    let alpha = params.kappa / params.sigma * params.theta - params.rho * params.mu;
    let beta = -params.kappa / params.sigma + 0.5 * params.rho;
    if beta != 0.0 {
        hs.push(-alpha / beta);
    }
    if params.mu != 0.0 {
        hs.push(2.0 * params.mu);
    }
    if upsilon_bound > 0.0 && alpha != 0.0 {
        let r = upsilon_bound * one_m_rho2.sqrt() / (2.0 * alpha.abs());
        hs.push(1.0 / (r * r));
    }
    hs.into_iter()
        .filter(|h| *h >= bounds.var_lo() && *h <= bounds.var_hi())
        .all(|h| {
            let c = coeffs_from_variance(h, params);
            let xi = Triple::from_moments(h / st2, scale * c.mu_phi);
            let vpsi = c.sigma_psi * c.sigma_psi / st2;
            let worst_psi = c.mu_psi.abs() + upsilon_bound * c.sigma_psi;
            let xihat = Triple::from_moments(vpsi, scale * worst_psi);
            xi.is_valid() && xihat.is_valid()
        })
}
