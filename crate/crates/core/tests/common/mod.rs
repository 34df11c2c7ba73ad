//! Brute-force oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shortfall_core::dp::{payoff_shortfall, Bound};
use shortfall_core::kernel::{kernel, Measure, ProjectionScheme, TransitionKernel};
use shortfall_core::model::{HestonParams, Instance, NodeState, TruncationBounds};

/// A valid instance with every parameter drawn from a wide but sane box.
pub fn random_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let kappa: f64 = rng.random_range(0.3..3.0);
    let theta: f64 = rng.random_range(0.02..0.5);
    let sigma_max = (1.8 * kappa * theta).sqrt().min(0.9);
    let params = HestonParams {
        mu: rng.random_range(-0.1..0.2),
        kappa,
        theta,
        sigma: rng.random_range(0.05 * sigma_max..sigma_max),
        rho: rng.random_range(-0.9..0.9),
        s0: rng.random_range(50.0..150.0),
        nu0: rng.random_range(0.01..0.5),
        maturity: rng.random_range(0.25..2.0),
        strike: rng.random_range(60.0..140.0),
    };
    let lo = rng.random_range(0.01..0.25);
    let hi = rng.random_range(0.3..1.2);
    let bounds = TruncationBounds::new(lo, hi).expect("lo < hi");
    let sigma_tilde = hi * rng.random_range(1.0..4.0);
    Instance::new(params, bounds, n, sigma_tilde).expect("generated instance is valid")
}

pub fn random_instances(count: usize, n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, n)).collect()
}

/// Joint probability of one lattice step as a 3x3 table indexed `[xi + 1][xihat + 1]`.
fn step_table(ker: &TransitionKernel) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (a, row) in t.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = ker.prob(a as i32 - 1, b as i32 - 1);
        }
    }
    t
}

/// Every path of the lattice as `(terminal i, terminal j, probability under each measure)`.
pub fn enumerate_paths(
    inst: &Instance,
    measures: &[Measure],
    projection: ProjectionScheme,
) -> Vec<(i32, i32, Vec<f64>)> {
    let mut out = Vec::new();
    let mut stack = vec![(0usize, 0i32, 0i32, vec![1.0; measures.len()])];
    while let Some((k, i, j, probs)) = stack.pop() {
        if k == inst.n() {
            out.push((i, j, probs));
            continue;
        }
        let tables: Vec<_> = measures
            .iter()
            .map(|m| step_table(&kernel(inst, NodeState { k, i, j }, m, projection).unwrap()))
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                let next = probs.iter().zip(&tables).map(|(p, t)| p * t[a][b]).collect();
                stack.push((k + 1, i + a as i32 - 1, j + b as i32 - 1, next));
            }
        }
    }
    out
}

/// Terminal law of the price index by summing over all paths, indexed by `i + n`.
pub fn enumerated_terminal_pmf(
    inst: &Instance,
    measure: &Measure,
    projection: ProjectionScheme,
) -> Vec<f64> {
    let n = inst.n() as i32;
    let mut pmf = vec![0.0; 2 * inst.n() + 1];
    for (i, _, p) in enumerate_paths(inst, std::slice::from_ref(measure), projection) {
        pmf[(i + n) as usize] += p[0];
    }
    pmf
}

/// `E_Q[(dP/dQ)^q]` as an explicit sum over paths.
pub fn enumerated_density_moment(
    inst: &Instance,
    q_measure: Measure,
    q: f64,
    projection: ProjectionScheme,
) -> f64 {
    enumerate_paths(inst, &[Measure::Physical, q_measure], projection)
        .iter()
        .filter(|(_, _, p)| p[1] > 0.0)
        .map(|(_, _, p)| p[1] * (p[0] / p[1]).powf(q))
        .sum()
}

/// Grid value by direct recursion: at every node and proportion, try every admissible
/// control and average over all nine successors.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_grid(
    inst: &Instance,
    m: usize,
    bound: Bound,
    projection: ProjectionScheme,
    k: usize,
    i: i32,
    j: i32,
    l: usize,
) -> f64 {
    let mf = m as f64;
    let lambda = l as f64 / mf;
    if k == inst.n() {
        let s = inst.price(i);
        return payoff_shortfall(lambda * s, s, inst.params.strike);
    }
    let spec = &inst.lattice;
    let ker = kernel(inst, NodeState { k, i, j }, &Measure::Physical, projection).unwrap();
    let ceiling = (lambda * (1.0 + spec.exp_up)).min(1.0);
    let mut best = f64::NEG_INFINITY;
    for c in 0..=m {
        let control = c as f64 / mf;
        if control > ceiling + 1e-12 {
            break;
        }
        let after_up = mf * (lambda * (1.0 + spec.exp_down) - control * spec.exp_down);
        let up = match bound {
            Bound::Minus => (after_up + 1e-9).floor(),
            Bound::Plus => (after_up - 1e-9).ceil() + 1.0,
        }
        .clamp(0.0, mf) as usize;
        let mut v = 0.0;
        for a in -1..=1 {
            let next_l = match a {
                -1 => c,
                0 => l,
                _ => up,
            };
            for b in -1..=1 {
                let p = ker.prob(a, b);
                if p != 0.0 {
                    v += p * brute_force_grid(inst, m, bound, projection, k + 1, i + a, j + b, next_l);
                }
            }
        }
        best = best.max(v);
    }
    best
}
