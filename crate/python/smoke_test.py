"""Smoke test for the `shortfall` extension module.

Build and install first:

    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/shortfall-*.whl
"""

import math

import shortfall


def main():
    params = shortfall.HestonParams()
    assert params.s0 == 100.0 and params.strike == 90.0
    assert abs(params.feller_exponent() - 4.2623) < 1e-3

    inst = shortfall.Instance(12)
    assert inst.n == 12 and inst.step > 0

    # grid bounds bracket each other and vanish when the capital covers everything
    lo = shortfall.dp_grid_root(inst, 10, bound="minus")
    hi = shortfall.dp_grid_root(inst, 10, bound="plus")
    assert len(lo) == 11 and all(a <= b + 1e-12 for a, b in zip(lo, hi))
    assert lo[-1] == 0.0 and all(x <= y + 1e-12 for x, y in zip(lo, lo[1:]))
    j_minus, j_plus = shortfall.sandwich(inst, 10, 20.0)
    assert j_minus == lo[2] and j_plus == hi[2]

    # hedging never does worse than holding the cash
    small = shortfall.Instance(3)
    exact = shortfall.exact_value(small, [0.0, 0.2, 0.5, 1.0])
    for lam, v in zip([0.0, 0.2, 0.5, 1.0], exact):
        assert v >= shortfall.unhedged_value(small, 100.0 * lam) - 1e-9

    prices, probs = shortfall.terminal_law(inst)
    assert len(prices) == 25 and abs(sum(probs) - 1.0) < 1e-12
    _, q = shortfall.terminal_law(inst, upsilon=0.0)
    martingale_mean = sum(p * s for p, s in zip(q, prices))
    assert abs(martingale_mean - 100.0) < 1e-9

    mild = shortfall.Instance(25, bounds=shortfall.TruncationBounds(0.1, 1.0))
    moment = shortfall.density_moment(mild)
    assert 1.0 <= moment < 1.5

    report = shortfall.kernel_report(inst)
    assert report["max_sum_error"] < 1e-12

    est = shortfall.mc_unhedged([0.0, 20.0], paths=2000, dt=1e-2, seed=3)
    assert est[0]["mean"] <= est[1]["mean"] <= 0.0
    exits = shortfall.exit_probabilities([0.6, 0.8], paths=2000, dt=1e-2)
    assert exits[0]["p_no_exit"]["mean"] <= exits[1]["p_no_exit"]["mean"]

    assert shortfall.nonconcave_value(8) == 1.5
    m, se, target = shortfall.covariation(10, paths=5000)
    assert abs(m - target) <= 4 * se

    try:
        shortfall.sandwich(inst, 12, 20.0)
    except ValueError as e:
        assert "grid" in str(e)
    else:
        raise AssertionError("off-grid capital accepted")

    print("smoke test passed:", f"J-={j_minus:.4f}", f"J+={j_plus:.4f}", f"moment={moment:.4f}")


if __name__ == "__main__":
    main()
