//! Lattice kernels against high-precision reference values and their moment identities.

// oracle digits are kept as printed
#![allow(clippy::excessive_precision)]

mod common;

use proptest::prelude::*;
use shortfall_core::diagnostics::{kernel_sweep, q_price_martingale};
use shortfall_core::dp::{control_upper, lambda_up, LambdaRounding};
use shortfall_core::kernel::{
    martingale_kernel, physical_kernel, DriftFunctional, Measure, ProjectionScheme,
};
use shortfall_core::model::{node_values, HestonParams, Instance, NodeState};

// produced by tests/oracles/kernel_values.py at 40 digits
const MU_PSI: f64 = 0.763_969_230_769_230_77;
const SIGMA_PSI: f64 = 0.230_512_472_547_582_55;
const XI_RAW: [f64; 3] = [0.001_775, 0.9964, 0.001_825];
const XIHAT_RAW: [f64; 3] = [-0.002_757_126_153_846_154, 0.997_874_56, 0.004_882_566_153_846_154];
const XI_Q: [f64; 3] = [0.002_023_835_403_188_873_2, 0.9964, 0.001_576_164_596_811_126_8];
const PRICE_UP: f64 = 128.402_541_668_774_15;
const JUMP_400: f64 = 0.284_025_416_687_741_48;
const CONTROL_UPPER_01: f64 = 0.228_402_541_668_774_15;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn reference_root_kernel_matches_oracle() {
    let inst = Instance::reference(400);
    let c = inst.coeffs_at(0, 0);
    assert!(close(c.mu_psi, MU_PSI, 1e-14), "{}", c.mu_psi);
    assert!(close(c.sigma_psi, SIGMA_PSI, 1e-15), "{}", c.sigma_psi);
    let root = NodeState { k: 0, i: 0, j: 0 };
    let p = physical_kernel(&inst, root, ProjectionScheme::Ps1).unwrap();
    for (got, want) in p.raw_xi.as_array().iter().zip(XI_RAW) {
        assert!(close(*got, want, 1e-15), "{got} vs {want}");
    }
    for (got, want) in p.raw_xihat.as_array().iter().zip(XIHAT_RAW) {
        assert!(close(*got, want, 1e-15), "{got} vs {want}");
    }
    // PS-1 drops the negative down move onto the middle
    assert!(p.projected_xihat && !p.projected_xi);
    assert_eq!(p.xihat.down, 0.0);
    assert!(close(p.xihat.mid, 1.0 - XIHAT_RAW[2], 1e-15));
    assert!(close(p.xihat.mid, 0.995_117_433_846_153_8, 1e-15));

    let q = martingale_kernel(&inst, root, &DriftFunctional::zero(), ProjectionScheme::Ps1).unwrap();
    for (got, want) in q.xi.as_array().iter().zip(XI_Q) {
        assert!(close(*got, want, 1e-15), "{got} vs {want}");
    }
}

#[test]
fn geometry_matches_oracle() {
    let inst = Instance::reference(400);
    assert!(close(inst.lattice.step, 0.25, 1e-15));
    let v = node_values(NodeState { k: 1, i: 1, j: 0 }, &inst.lattice, &inst.params).unwrap();
    assert!(close(v.price, PRICE_UP, 1e-10));
    let v = node_values(NodeState { k: 1, i: 0, j: -1 }, &inst.lattice, &inst.params).unwrap();
    assert!(close(v.nu_raw, -0.0075, 1e-14), "{}", v.nu_raw);
    assert!(close(inst.lattice.exp_up - 1.0, JUMP_400, 1e-15));
    assert!(close(control_upper(0.1, 0.25), CONTROL_UPPER_01, 1e-15));
    assert!(close(HestonParams::reference().feller_exponent(), 4.262_327_416_173_57, 1e-12));
}

#[test]
fn rounding_of_the_up_proportion_matches_oracle() {
    // inner = 0.5778800783 at M = 10
    let floor = lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::Floor).unwrap();
    let ceil_plus = lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::CeilPlus).unwrap();
    let exact = lambda_up(0.5, 0.4, 0.25, 10, LambdaRounding::Exact).unwrap();
    assert!(close(floor, 0.5, 1e-15));
    assert!(close(ceil_plus, 0.7, 1e-15));
    assert!(close(exact, 0.577_880_078_307_140_5, 1e-15));
}

#[test]
fn random_instances_satisfy_kernel_identities() {
    for inst in common::random_instances(100, 12, 0x6b65_726e) {
        let p = kernel_sweep(&inst, &Measure::Physical, ProjectionScheme::Ps1).unwrap();
        assert!(p.max_sum_error <= 1e-12);
        assert!(p.max_moment_residual <= 1e-12, "{p:?}");
        let q = DriftFunctional::constant(0.3);
        assert!(q_price_martingale(&inst, &q, ProjectionScheme::Ps1).unwrap() <= 1e-12);
    }
}

fn scheme() -> impl Strategy<Value = ProjectionScheme> {
    prop_oneof![
        Just(ProjectionScheme::Ps1),
        Just(ProjectionScheme::Ps2),
        Just(ProjectionScheme::Ps3),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn published_triples_are_distributions(seed in any::<u64>(), n in 1usize..40, s in scheme(), ups in -2.0f64..2.0) {
        let inst = common::random_instances(1, n, seed).remove(0);
        for measure in [Measure::Physical, Measure::Martingale(DriftFunctional::constant(ups))] {
            let rep = kernel_sweep(&inst, &measure, s).unwrap();
            prop_assert!(rep.max_sum_error <= 1e-12);
            prop_assert!(rep.max_moment_residual <= 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&rep.projected_mass));
            if let Some(m) = rep.max_martingale_residual {
                prop_assert!(m <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_leaves_valid_triples_alone(seed in any::<u64>(), s in scheme(), k in 0usize..6, i in -6i32..=6, j in -6i32..=6) {
        let inst = common::random_instances(1, 6, seed).remove(0);
        let node = NodeState { k, i: i.clamp(-(k as i32), k as i32), j: j.clamp(-(k as i32), k as i32) };
        let ker = physical_kernel(&inst, node, s).unwrap();
        if !ker.projected_xi {
            prop_assert_eq!(ker.xi, ker.raw_xi);
        }
        if !ker.projected_xihat {
            prop_assert_eq!(ker.xihat, ker.raw_xihat);
        }
        for a in -1..=1 {
            for b in -1..=1 {
                prop_assert!(ker.prob(a, b) >= 0.0);
            }
        }
    }
}
