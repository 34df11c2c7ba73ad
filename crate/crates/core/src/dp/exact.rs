//! Exact continuous-control recursion for tiny lattices.
//!
//! Every value function `J_k(i, j, .)` is concave, piecewise linear and non-decreasing on
//! `[0, 1]`. Substituting `w = c e^{-a}` and `y = lambda (1 + e^{-a}) - w` turns the
//! maximization over the control into a sup-convolution evaluated at
//! `z = lambda (1 + e^{-a})`:
//!
//! ```text
//! A(w) = p_down G_{-1}(w e^a),   w in [0, e^{-a}]
//! B(y) = p_up   G_{+1}(1 ^ y),   y in [0, 1 + e^{-a}]
//! J_k(lambda) = (A # B)(lambda (1 + e^{-a})) + p_mid G_0(lambda)
//! ```
//!
//! where `G_xi` is the `xihat`-average of the successors. The sup-convolution of two
//! concave piecewise-linear functions merges their segments in order of decreasing slope.

use rayon::prelude::*;

use super::payoff_shortfall;
use crate::error::{Error, Result};
use crate::kernel::{physical_kernel_unchecked, ProjectionScheme};
use crate::model::{Instance, LatticeSpec, NodeState};

/// Largest lattice the exact recursion accepts.
pub const EXACT_MAX_STEPS: usize = 8;

/// Default cap on the breakpoints of a single value function.
pub const DEFAULT_BREAKPOINT_BUDGET: usize = 1 << 20;

/// Concave, non-decreasing piecewise-linear function on `[0, x_last]`, constant beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct PwlConcave {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PwlConcave {
    /// Builds a function from breakpoints; `xs` must start at 0 and increase strictly.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Precondition(
                "breakpoints and values must be non-empty and of equal length".into(),
            ));
        }
        if xs[0] != 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "breakpoints must start at 0 and increase strictly".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    /// Terminal value `lambda -> U(lambda s, s)`, kinked at `(s - K)^+ / s`.
    pub fn terminal(s: f64, strike: f64) -> Self {
        let kink = (s - strike).max(0.0) / s;
        let y = |x: f64| payoff_shortfall(x * s, s, strike);
        if kink > 0.0 {
            Self {
                xs: vec![0.0, kink, 1.0],
                ys: vec![y(0.0), 0.0, 0.0],
            }
        } else {
            Self {
                xs: vec![0.0, 1.0],
                ys: vec![0.0, 0.0],
            }
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= 0.0 {
            return self.ys[0];
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        let r = self.xs.partition_point(|b| *b <= x);
        let (x0, x1) = (self.xs[r - 1], self.xs[r]);
        let (y0, y1) = (self.ys[r - 1], self.ys[r]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
    }

    /// Slopes are non-increasing up to `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        let s: Vec<f64> = self.slopes().collect();
        s.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.ys.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    fn scale(&self, fx: f64, fy: f64) -> Self {
        Self {
            xs: self.xs.iter().map(|x| x * fx).collect(),
            ys: self.ys.iter().map(|y| y * fy).collect(),
        }
    }

    /// Restriction to `[0, end]`, interpolating the endpoint; `end` must be positive.
    fn truncate(mut self, end: f64) -> Self {
        let at_end = self.eval(end);
        let keep = self.xs.partition_point(|b| *b < end);
        self.xs.truncate(keep);
        self.ys.truncate(keep);
        self.xs.push(end);
        self.ys.push(at_end);
        self
    }

    /// Removes breakpoints that are closer than `eps` or where the slope barely changes.
    fn simplify(self) -> Self {
        const EPS_X: f64 = 1e-14;
        const EPS_SLOPE: f64 = 1e-12;
        let mut xs: Vec<f64> = Vec::with_capacity(self.xs.len());
        let mut ys: Vec<f64> = Vec::with_capacity(self.ys.len());
        let last = self.xs.len() - 1;
        for (idx, (&x, &y)) in self.xs.iter().zip(&self.ys).enumerate() {
            if let Some(&px) = xs.last() {
                if x - px < EPS_X && idx != last {
                    continue;
                }
                if x - px < EPS_X {
                    // keep the true endpoint, dropping the near-duplicate before it
                    xs.pop();
                    ys.pop();
                }
            }
            while xs.len() >= 2 {
                let n = xs.len();
                let s1 = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
                let s2 = (y - ys[n - 1]) / (x - xs[n - 1]);
                if (s1 - s2).abs() <= EPS_SLOPE * (1.0 + s1.abs().max(s2.abs())) {
                    xs.pop();
                    ys.pop();
                } else {
                    break;
                }
            }
            xs.push(x);
            ys.push(y);
        }
        Self { xs, ys }
    }
}

/// `sum_t w_t f_t` on the union of the breakpoints. All inputs share the domain end.
fn weighted_sum(terms: &[(f64, &PwlConcave)]) -> PwlConcave {
    let mut xs: Vec<f64> = terms
        .iter()
        .filter(|(w, _)| *w != 0.0)
        .flat_map(|(_, f)| f.xs.iter().copied())
        .collect();
    if xs.is_empty() {
        let end = terms.first().map_or(1.0, |(_, f)| *f.xs.last().unwrap());
        return PwlConcave {
            xs: vec![0.0, end],
            ys: vec![0.0, 0.0],
        };
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ys = xs
        .iter()
        .map(|&x| {
            terms
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .map(|(w, f)| w * f.eval(x))
                .sum()
        })
        .collect();
    PwlConcave { xs, ys }
}

/// Sup-convolution `(f # g)(z) = sup_{u + v = z} f(u) + g(v)` of concave functions on
/// `[0, x_f]` and `[0, x_g]`.
fn sup_convolution(f: &PwlConcave, g: &PwlConcave) -> PwlConcave {
    let seg = |h: &PwlConcave| -> Vec<(f64, f64)> {
        h.xs.windows(2)
            .zip(h.ys.windows(2))
            .map(|(x, y)| (x[1] - x[0], y[1] - y[0]))
            .collect()
    };
    let (sf, sg) = (seg(f), seg(g));
    let mut xs = Vec::with_capacity(sf.len() + sg.len() + 1);
    let mut ys = Vec::with_capacity(sf.len() + sg.len() + 1);
    let (mut x, mut y) = (0.0, f.ys[0] + g.ys[0]);
    xs.push(x);
    ys.push(y);
    let (mut a, mut b) = (0, 0);
    while a < sf.len() || b < sg.len() {
        let take_f = match (sf.get(a), sg.get(b)) {
            (Some(p), Some(q)) => p.1 * q.0 >= q.1 * p.0,
            (Some(_), None) => true,
            _ => false,
        };
        let (dx, dy) = if take_f {
            a += 1;
            sf[a - 1]
        } else {
            b += 1;
            sg[b - 1]
        };
        x += dx;
        y += dy;
        xs.push(x);
        ys.push(y);
    }
    PwlConcave { xs, ys }
}

/// One backward step at a node given the three `xihat`-averaged successors.
fn step(
    g_down: &PwlConcave,
    g_mid: &PwlConcave,
    g_up: &PwlConcave,
    probs: [f64; 3],
    exp_down: f64,
) -> PwlConcave {
    let [pd, pm, pu] = probs;
    let z_end = 1.0 + exp_down;
    let a = g_down.scale(exp_down, pd);
    let mut b = g_up.scale(1.0, pu);
    // flat extension of G_{+1}(1 ^ y) beyond y = 1
    b.xs.push(z_end);
    b.ys.push(*b.ys.last().unwrap());
    let c = sup_convolution(&a, &b).simplify().truncate(z_end);
    let mut conv = c.scale(1.0 / z_end, 1.0);
    *conv.xs.last_mut().unwrap() = 1.0;
    let conv = conv.simplify();
    weighted_sum(&[(1.0, &conv), (pm, g_mid)]).simplify()
}

/// Exact root value function `J_0(0, 0, .)` for `n <= EXACT_MAX_STEPS`.
pub fn dp_exact_pwl(inst: &Instance, projection: ProjectionScheme) -> Result<PwlConcave> {
    dp_exact_pwl_budget(inst, projection, DEFAULT_BREAKPOINT_BUDGET)
}

/// [`dp_exact_pwl`] with an explicit cap on breakpoints per value function.
pub fn dp_exact_pwl_budget(
    inst: &Instance,
    projection: ProjectionScheme,
    budget: usize,
) -> Result<PwlConcave> {
    let mut slice = dp_exact_pwl_until(inst, projection, budget, 0)?;
    Ok(slice.swap_remove(0))
}

/// Exact value functions at step `stop_k`, row-major in `(i, j)`.
pub fn dp_exact_pwl_until(
    inst: &Instance,
    projection: ProjectionScheme,
    budget: usize,
    stop_k: usize,
) -> Result<Vec<PwlConcave>> {
    let n = inst.n();
    if n > EXACT_MAX_STEPS {
        return Err(Error::TooManySteps {
            n,
            max: EXACT_MAX_STEPS,
        });
    }
    let strike = inst.params.strike;
    let wn = LatticeSpec::width(n);
    let mut prev: Vec<PwlConcave> = (0..wn * wn)
        .map(|idx| PwlConcave::terminal(inst.price((idx / wn) as i32 - n as i32), strike))
        .collect();
    let exp_down = inst.lattice.exp_down;
    for k in (stop_k..n).rev() {
        let w = LatticeSpec::width(k);
        let w1 = LatticeSpec::width(k + 1);
        let ki = k as i32;
        let prev_ref = &prev;
        let next: Vec<PwlConcave> = (0..w * w)
            .into_par_iter()
            .map(|idx| -> Result<PwlConcave> {
                let (r, c) = (idx / w, idx % w);
                let node = NodeState {
                    k,
                    i: r as i32 - ki,
                    j: c as i32 - ki,
                };
                let ker = physical_kernel_unchecked(inst, node, projection)?;
                let py = ker.xihat.as_array();
                let g: Vec<PwlConcave> = (0..3)
                    .map(|dx| {
                        let base = (r + dx) * w1 + c;
                        weighted_sum(&[
                            (py[0], &prev_ref[base]),
                            (py[1], &prev_ref[base + 1]),
                            (py[2], &prev_ref[base + 2]),
                        ])
                        .simplify()
                    })
                    .collect();
                let out = step(&g[0], &g[1], &g[2], ker.xi.as_array(), exp_down);
                if out.len() > budget {
                    return Err(Error::BreakpointBudget { budget, k });
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        prev = next;
    }
    Ok(prev)
}
