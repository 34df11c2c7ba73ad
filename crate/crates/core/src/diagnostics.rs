//! Checks of the lattice construction: moment matching, martingale identities, density
//! moments of the physical against a martingale measure, jump sizes and distributional
//! distance to Monte Carlo samples.

use rand::Rng;
use serde::Serialize;

pub use crate::forward::terminal_pmf;
use crate::error::{Error, Result};
use crate::forward::propagate;
use crate::kernel::{
    kernel_unchecked, martingale_kernel_unchecked, physical_kernel_unchecked, DriftFunctional,
    Measure, ProjectionScheme, TransitionKernel, Triple,
};
use crate::mc::{per_path, PathNormals};
use crate::model::{node_values_unchecked, Instance, LatticeSpec, NodeState};

/// Result of [`kernel_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    /// Non-terminal nodes visited, `sum_{k<n} (2k+1)^2`.
    pub nodes_total: u64,
    pub projected_xi: u64,
    pub projected_xihat: u64,
    /// Largest `|sum - 1|` of a published triple.
    pub max_sum_error: f64,
    /// Largest residual of the drift and variance identities at unprojected coordinates.
    pub max_moment_residual: f64,
    /// Largest residual of `E[dPhi dPsi] = dt^2 mu_Phi mu_Psi` at fully unprojected
    /// nodes; physical measure only.
    pub max_cross_residual: Option<f64>,
    /// Largest `|p_up e^a + p_mid + p_down e^{-a} - 1|`; martingale measures only.
    pub max_martingale_residual: Option<f64>,
    /// Physical probability of ever visiting a node whose kernel was projected.
    pub projected_mass: f64,
}

impl KernelReport {
    pub fn nodes_projected(&self) -> u64 {
        self.projected_xi.max(self.projected_xihat)
    }
}

fn martingale_residual(t: &Triple, spec: &LatticeSpec) -> f64 {
    (t.up * spec.exp_up + t.mid + t.down * spec.exp_down - 1.0).abs()
}

/// Visits every non-terminal node, comparing raw and published kernels with the moments
/// they are built to match.
pub fn kernel_sweep(
    inst: &Instance,
    measure: &Measure,
    projection: ProjectionScheme,
) -> Result<KernelReport> {
    let spec = &inst.lattice;
    let (a, dt) = (spec.step, spec.dt);
    let physical = matches!(measure, Measure::Physical);
    let mut rep = KernelReport {
        nodes_total: 0,
        projected_xi: 0,
        projected_xihat: 0,
        max_sum_error: 0.0,
        max_moment_residual: 0.0,
        max_cross_residual: physical.then_some(0.0),
        max_martingale_residual: (!physical).then_some(0.0),
        projected_mass: 0.0,
    };
    for k in 0..inst.n() {
        let ki = k as i32;
        for i in -ki..=ki {
            for j in -ki..=ki {
                let node = NodeState { k, i, j };
                let ker = kernel_unchecked(inst, node, measure, projection)?;
                let c = inst.coeffs_at(i, j);
                rep.nodes_total += 1;
                rep.projected_xi += ker.projected_xi as u64;
                rep.projected_xihat += ker.projected_xihat as u64;
                rep.max_sum_error = rep
                    .max_sum_error
                    .max((ker.xi.sum() - 1.0).abs())
                    .max((ker.xihat.sum() - 1.0).abs());
                let mut res = 0.0f64;
                let xi_drift_target = match measure {
                    Measure::Physical => Some(dt * c.mu_phi),
                    Measure::Martingale(_) => None,
                };
                let psi_drift_target = match measure {
                    Measure::Physical => dt * c.mu_psi,
                    Measure::Martingale(u) => dt * (u.eval(k, i)? * c.sigma_psi + c.mu_psi),
                };
                if !ker.projected_xi {
                    let t = &ker.xi;
                    if let Some(target) = xi_drift_target {
                        res = res.max((a * (t.up - t.down) - target).abs());
                    }
                    res = res.max((a * a * (t.up + t.down) - dt * c.sigma_phi.powi(2)).abs());
                }
                if !ker.projected_xihat {
                    let t = &ker.xihat;
                    res = res.max((a * (t.up - t.down) - psi_drift_target).abs());
                    res = res.max((a * a * (t.up + t.down) - dt * c.sigma_psi.powi(2)).abs());
                }
                rep.max_moment_residual = rep.max_moment_residual.max(res);
                if let Some(cross) = rep.max_cross_residual.as_mut() {
                    if !ker.projected() {
                        let e = a * a * ker.xi.mean() * ker.xihat.mean();
                        *cross = cross.max((e - dt * dt * c.mu_phi * c.mu_psi).abs());
                    }
                }
                if let Some(m) = rep.max_martingale_residual.as_mut() {
                    *m = m.max(martingale_residual(&ker.xi, spec));
                }
            }
        }
    }
    let flagged = |node: NodeState, p_ker: &TransitionKernel| -> bool {
        match measure {
            Measure::Physical => p_ker.projected(),
            Measure::Martingale(_) => kernel_unchecked(inst, node, measure, projection)
                .map(|k| k.projected())
                .unwrap_or(true),
        }
    };
    rep.projected_mass = propagate(inst, &Measure::Physical, projection, Some(&flagged))?.absorbed;
    Ok(rep)
}

/// Largest price-martingale residual of the `xi` triple over all nodes under the
/// martingale measure for `upsilon`.
pub fn q_price_martingale(
    inst: &Instance,
    upsilon: &DriftFunctional,
    projection: ProjectionScheme,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..inst.n() {
        let ki = k as i32;
        for i in -ki..=ki {
            for j in -ki..=ki {
                let ker = martingale_kernel_unchecked(inst, NodeState { k, i, j }, upsilon, projection)?;
                worst = worst.max(martingale_residual(&ker.xi, &inst.lattice));
            }
        }
    }
    Ok(worst)
}

/// `E_Q[(dP/dQ)^q]` over the whole lattice, by backward induction of
/// `W_k(i, j) = sum q(xi, xihat) (p / q)^q W_{k+1}(i + xi, j + xihat)`.
pub fn density_moment(
    inst: &Instance,
    upsilon: &DriftFunctional,
    q: f64,
    projection: ProjectionScheme,
) -> Result<f64> {
    let n = inst.n();
    let wn = LatticeSpec::width(n);
    let mut prev = vec![1.0f64; wn * wn];
    for k in (0..n).rev() {
        let w = LatticeSpec::width(k);
        let w1 = LatticeSpec::width(k + 1);
        let ki = k as i32;
        let mut next = vec![0.0f64; w * w];
        for r in 0..w {
            for c in 0..w {
                let node = NodeState {
                    k,
                    i: r as i32 - ki,
                    j: c as i32 - ki,
                };
                let pk = physical_kernel_unchecked(inst, node, projection)?;
                let qk = martingale_kernel_unchecked(inst, node, upsilon, projection)?;
                let mut acc = 0.0;
                // fixed order: xi ascending, then xihat ascending
                for dx in 0..3 {
                    for dy in 0..3 {
                        let (xi, xh) = (dx as i32 - 1, dy as i32 - 1);
                        let (p, qq) = (pk.prob(xi, xh), qk.prob(xi, xh));
                        if qq == 0.0 {
                            if p > 0.0 {
                                return Err(Error::AbsoluteContinuity {
                                    k,
                                    i: node.i,
                                    j: node.j,
                                });
                            }
                            continue;
                        }
                        if p == 0.0 && q > 0.0 {
                            // zero weight even when the successor moment overflowed
                            continue;
                        }
                        acc += qq * (p / qq).powf(q) * prev[(r + dx) * w1 + c + dy];
                    }
                }
                next[r * w + c] = acc;
            }
        }
        prev = next;
    }
    Ok(prev[0])
}

/// Physical probability that the raw lattice variance `sigma (Psi + rho Phi)` leaves
/// `(sigma_lo^2, sigma_hi^2)` at some step `0..=n`: the lattice analogue of the
/// Monte Carlo exit statistics.
pub fn lattice_exit_probability(
    inst: &Instance,
    projection: ProjectionScheme,
    sigma_lo: f64,
    sigma_hi: f64,
) -> Result<f64> {
    let (vlo, vhi) = (sigma_lo * sigma_lo, sigma_hi * sigma_hi);
    let outside = |node: NodeState| {
        let v = node_values_unchecked(node.i, node.j, &inst.lattice, &inst.params).nu_raw;
        v <= vlo || v >= vhi
    };
    let flagged = |node: NodeState, _: &TransitionKernel| outside(node);
    let prop = propagate(inst, &Measure::Physical, projection, Some(&flagged))?;
    let n = inst.n() as i32;
    let mut at_maturity = 0.0;
    for i in -n..=n {
        for j in -n..=n {
            if outside(NodeState { k: inst.n(), i, j }) {
                at_maturity += prop.terminal.get(i, j);
            }
        }
    }
    Ok(prop.absorbed + at_maturity)
}

/// Largest relative price jump along simulated lattice paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpBound {
    /// `e^a - 1`, the largest relative move the lattice allows.
    pub a_n: f64,
    pub realized_max: f64,
    pub per_path: Vec<f64>,
}

impl JumpBound {
    pub fn holds(&self) -> bool {
        self.per_path.iter().all(|j| *j <= self.a_n)
    }
}

pub fn jump_bound(spec: &LatticeSpec) -> f64 {
    spec.exp_up - 1.0
}

#[inline]
fn sample_step(t: &Triple, u: f64) -> i32 {
    if u < t.down {
        -1
    } else if u < t.down + t.mid {
        0
    } else {
        1
    }
}

/// Simulates `paths` lattice paths under the physical kernels and records each path's
/// largest `|S_{k+1} / S_k - 1|`.
pub fn jump_bound_check(
    inst: &Instance,
    projection: ProjectionScheme,
    paths: usize,
    seed: u64,
) -> Result<JumpBound> {
    let spec = &inst.lattice;
    let per_path: Vec<f64> = per_path(paths, |p| -> Result<f64> {
        let mut z = PathNormals::new(seed, p, false);
        let (mut i, mut j) = (0i32, 0i32);
        let mut worst = 0.0f64;
        for k in 0..inst.n() {
            let ker = physical_kernel_unchecked(inst, NodeState { k, i, j }, projection)?;
            let dx = sample_step(&ker.xi, z.rng().random::<f64>());
            let dy = sample_step(&ker.xihat, z.rng().random::<f64>());
            // S_{k+1} / S_k is one of the growth factors {e^{-a}, 1, e^a}
            let jump = match dx {
                1 => spec.exp_up - 1.0,
                -1 => 1.0 - spec.exp_down,
                _ => 0.0,
            };
            worst = worst.max(jump);
            i += dx;
            j += dy;
        }
        Ok(worst)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(JumpBound {
        a_n: jump_bound(spec),
        realized_max: per_path.iter().copied().fold(0.0, f64::max),
        per_path,
    })
}

/// Kolmogorov-Smirnov distance between a discrete law (atoms with probabilities) and
/// the empirical law of `samples`.
pub fn ks_distance(atoms: &[f64], pmf: &[f64], samples: &[f64]) -> Result<f64> {
    if atoms.is_empty() || samples.is_empty() || atoms.len() != pmf.len() {
        return Err(Error::Precondition(
            "ks_distance needs non-empty inputs and one probability per atom".into(),
        ));
    }
    let mut law: Vec<(f64, f64)> = atoms.iter().copied().zip(pmf.iter().copied()).collect();
    law.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let total: f64 = pmf.iter().sum();
    let n = xs.len() as f64;
    let (mut a, mut b) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut d = 0.0f64;
    // walk the merged jump points; both CDFs are constant in between
    while a < law.len() || b < xs.len() {
        let x = match (law.get(a), xs.get(b)) {
            (Some(l), Some(s)) => l.0.min(*s),
            (Some(l), None) => l.0,
            (None, Some(s)) => *s,
            (None, None) => unreachable!(),
        };
        d = d.max((fa - fb).abs());
        while a < law.len() && law[a].0 == x {
            fa += law[a].1 / total;
            a += 1;
        }
        while b < xs.len() && xs[b] == x {
            b += 1;
        }
        fb = b as f64 / n;
        d = d.max((fa - fb).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Precondition("ks_two_sample needs non-empty inputs".into()));
    }
    let w = vec![1.0; y.len()];
    ks_distance(y, &w, x)
}

/// Lattice terminal prices `s0 e^{i a}`, indexed like [`terminal_pmf`].
pub fn terminal_prices(inst: &Instance) -> Vec<f64> {
    let n = inst.n() as i32;
    (-n..=n).map(|i| inst.price(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HestonParams, TruncationBounds};

    #[test]
    fn overflowing_density_moment_is_infinite_not_nan() {
        // a tiny lower clamp makes martingale moves of order 1e-10 likely under P
        let m = density_moment(&Instance::reference(100), &DriftFunctional::zero(), 2.0, ProjectionScheme::Ps1)
            .unwrap();
        assert_eq!(m, f64::INFINITY);
    }

    /// No node clamps and all raw kernels are valid.
    fn calm(n: usize) -> Instance {
        let mut p = HestonParams::reference();
        p.mu = 0.01;
        p.kappa = 0.5;
        p.theta = 0.09;
        p.sigma = 0.1;
        p.rho = 0.0;
        Instance::new(p, TruncationBounds::new(0.3, 0.3).unwrap(), n, 1.0).unwrap()
    }

    #[test]
    fn calm_instance_is_never_projected() {
        let inst = calm(6);
        let rep = kernel_sweep(&inst, &Measure::Physical, ProjectionScheme::None).unwrap();
        assert_eq!(rep.nodes_projected(), 0);
        assert_eq!(rep.nodes_total, 1 + 9 + 25 + 49 + 81 + 121);
        assert!(rep.max_moment_residual <= 1e-12);
        assert!(rep.max_cross_residual.unwrap() <= 1e-12);
        assert_eq!(rep.projected_mass, 0.0);
    }

    #[test]
    fn reference_instance_projects_at_the_root() {
        let inst = Instance::reference(400);
        let ker = physical_kernel_unchecked(&inst, NodeState { k: 0, i: 0, j: 0 }, ProjectionScheme::Ps1)
            .unwrap();
        assert!(ker.projected_xihat);
        let small = Instance::reference(20);
        let rep = kernel_sweep(&small, &Measure::Physical, ProjectionScheme::Ps1).unwrap();
        assert!(rep.nodes_projected() > 0);
        assert!(rep.max_moment_residual <= 1e-12);
        assert!(rep.max_sum_error <= 1e-12);
    }

    #[test]
    fn martingale_residuals() {
        let inst = Instance::reference(30);
        for u in [DriftFunctional::zero(), DriftFunctional::constant(0.7)] {
            assert!(q_price_martingale(&inst, &u, ProjectionScheme::Ps1).unwrap() <= 1e-12);
        }
        // lattice scale at the upper barrier: p_mid can vanish
        let p = HestonParams::reference();
        let edge = Instance::new(p, TruncationBounds::new(0.5, 0.5).unwrap(), 10, 0.5).unwrap();
        assert!(q_price_martingale(&edge, &DriftFunctional::zero(), ProjectionScheme::Ps1).unwrap() <= 1e-12);
    }

    #[test]
    fn density_moment_normalizations() {
        let inst = calm(5);
        let u = DriftFunctional::zero();
        let m0 = density_moment(&inst, &u, 0.0, ProjectionScheme::None).unwrap();
        let m1 = density_moment(&inst, &u, 1.0, ProjectionScheme::None).unwrap();
        assert!((m0 - 1.0).abs() < 1e-12);
        assert!((m1 - 1.0).abs() < 1e-12);
        let m2 = density_moment(&inst, &u, 2.0, ProjectionScheme::None).unwrap();
        assert!(m2 >= 1.0 - 1e-12);
    }

    #[test]
    fn jump_bound_holds_on_paths() {
        let inst = Instance::reference(400);
        assert!((jump_bound(&inst.lattice) - 0.284_025_416_687_741_5).abs() < 1e-15);
        let jb = jump_bound_check(&Instance::reference(50), ProjectionScheme::Ps1, 200, 5).unwrap();
        assert!(jb.holds());
        assert!(jb.realized_max > 0.0);
        // e^x - 1 ~ x, so quadrupling n roughly halves the bound
        let a1 = jump_bound(&Instance::reference(1600).lattice);
        let a4 = jump_bound(&Instance::reference(6400).lattice);
        assert!((a1 / a4 - 2.0).abs() < 0.1);
    }

    #[test]
    fn lattice_exit_is_monotone_in_the_upper_barrier() {
        let inst = Instance::reference(60);
        let p: Vec<f64> = [0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|hi| lattice_exit_probability(&inst, ProjectionScheme::Ps1, 1e-4, *hi).unwrap())
            .collect();
        assert!(p.windows(2).all(|w| w[0] >= w[1]), "{p:?}");
        // nu0 = 0.09 already lies above 0.2^2
        assert_eq!(lattice_exit_probability(&inst, ProjectionScheme::Ps1, 1e-4, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[5.0], &[1.0], &[5.0, 5.0]).unwrap(), 0.0);
        let d = ks_distance(&[1.0, 2.0], &[0.5, 0.5], &[1.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert_eq!(ks_distance(&[0.0], &[1.0], &[1.0]).unwrap(), 1.0);
        assert!(ks_distance(&[], &[], &[1.0]).is_err());
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn pmf_martingale_under_q() {
        let inst = Instance::reference(40);
        let pmf = terminal_pmf(&inst, &Measure::Martingale(DriftFunctional::zero()), ProjectionScheme::Ps1)
            .unwrap();
        let mean: f64 = pmf.iter().zip(terminal_prices(&inst)).map(|(p, s)| p * s).sum();
        assert!((mean - 100.0).abs() < 1e-9);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
