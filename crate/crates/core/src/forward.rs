//! Forward induction of the joint `(i, j)` lattice distribution.

use crate::error::Result;
use crate::kernel::{kernel_unchecked, Measure, ProjectionScheme, TransitionKernel};
use crate::model::{Instance, LatticeSpec, NodeState};

/// Joint mass over `(i, j)` at one time step, row-major in `i` then `j`.
#[derive(Clone, Debug)]
pub struct JointMass {
    pub k: usize,
    pub mass: Vec<f64>,
}

impl JointMass {
    fn root() -> Self {
        Self {
            k: 0,
            mass: vec![1.0],
        }
    }

    #[inline]
    pub fn get(&self, i: i32, j: i32) -> f64 {
        let w = LatticeSpec::width(self.k);
        let k = self.k as i32;
        self.mass[(i + k) as usize * w + (j + k) as usize]
    }

    /// Marginal over `i`, indexed by `i + k`.
    pub fn marginal_i(&self) -> Vec<f64> {
        let w = LatticeSpec::width(self.k);
        self.mass
            .chunks(w)
            .map(|row| row.iter().sum::<f64>())
            .collect()
    }
}

/// Result of [`propagate`].
#[derive(Clone, Debug)]
pub struct Propagation {
    pub terminal: JointMass,
    /// Mass removed at nodes flagged by the `absorb` predicate (first visit only).
    pub absorbed: f64,
}

/// Pushes the root mass forward `n` steps under `measure`.
///
/// When `absorb` returns true for a node's kernel, the mass sitting at that node is
/// counted in [`Propagation::absorbed`] and removed, so `absorbed` is the probability of
/// ever visiting such a node.
/// Predicate marking nodes whose mass is absorbed.
pub type AbsorbFn<'a> = &'a dyn Fn(NodeState, &TransitionKernel) -> bool;

pub fn propagate(
    inst: &Instance,
    measure: &Measure,
    scheme: ProjectionScheme,
    absorb: Option<AbsorbFn<'_>>,
) -> Result<Propagation> {
    let n = inst.n();
    let mut cur = JointMass::root();
    let mut absorbed = 0.0;
    for k in 0..n {
        let w = LatticeSpec::width(k);
        let w1 = LatticeSpec::width(k + 1);
        let mut next = vec![0.0; w1 * w1];
        let ki = k as i32;
        for (r, row) in cur.mass.chunks(w).enumerate() {
            let i = r as i32 - ki;
            for (c, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let j = c as i32 - ki;
                let node = NodeState { k, i, j };
                let ker = kernel_unchecked(inst, node, measure, scheme)?;
                if let Some(f) = absorb {
                    if f(node, &ker) {
                        absorbed += m;
                        continue;
                    }
                }
                let px = ker.xi.as_array();
                let py = ker.xihat.as_array();
                for (dx, p) in px.iter().enumerate() {
                    if *p == 0.0 {
                        continue;
                    }
                    let base = (r + dx) * w1 + c;
                    for (dy, q) in py.iter().enumerate() {
                        next[base + dy] += m * p * q;
                    }
                }
            }
        }
        cur = JointMass {
            k: k + 1,
            mass: next,
        };
    }
    Ok(Propagation {
        terminal: cur,
        absorbed,
    })
}

/// Exact law of the terminal `Phi` index, indexed by `i + n`.
pub fn terminal_pmf(
    inst: &Instance,
    measure: &Measure,
    scheme: ProjectionScheme,
) -> Result<Vec<f64>> {
    Ok(propagate(inst, measure, scheme, None)?.terminal.marginal_i())
}
