"""Arbitrary-precision reference values for the lattice kernels.

Run with `python3 crates/core/tests/oracles/kernel_values.py`; values are frozen into the Rust tests.
"""
from mpmath import mp, mpf, sqrt, exp, log, ceil, floor

mp.dps = 40

mu, kappa, theta, sigma, rho = mpf("0.05"), mpf("1.15"), mpf("0.348"), mpf("0.39"), mpf("-0.64")
s0, nu0, T, K = mpf(100), mpf("0.09"), mpf(1), mpf(90)
slo, shi, stil = mpf("1e-4"), mpf(1), mpf(5)


def h(z):
    return max(slo**2, min(z, shi**2))


def coeffs(hv):
    mphi = mu - hv / 2
    sphi = sqrt(hv)
    mpsi = kappa / sigma * (theta - hv) - rho * mphi
    spsi = sqrt(1 - rho**2) * sphi
    return mphi, sphi, mpsi, spsi


hv = h(nu0)
mphi, sphi, mpsi, spsi = coeffs(hv)
print("mu_phi", mphi, "sigma_phi", sphi, "mu_psi", mpsi, "sigma_psi", spsi)

n = 400
dt = T / n
a = stil * sqrt(dt)
print("a", a)


def triple(var, drift):
    up = var / (2 * stil**2) + sqrt(dt) * drift / (2 * stil)
    dn = var / (2 * stil**2) - sqrt(dt) * drift / (2 * stil)
    return up, 1 - var / stil**2, dn


print("xi raw", triple(sphi**2, mphi))
print("xihat raw", triple(spsi**2, mpsi))
q_up = sphi**2 / (stil**2 * (1 + exp(a)))
q_dn = sphi**2 / (stil**2 * (1 + exp(-a)))
print("Q xi", q_up, 1 - sphi**2 / stil**2, q_dn)
print("Q mart", q_up * exp(a) + (1 - sphi**2 / stil**2) + q_dn * exp(-a))
print("price(1,1,0)", s0 * exp(a))
print("nu_raw(1,0,-1)", nu0 - sigma * a)
print("control_upper(0.1)", mpf("0.1") * (1 + exp(a)))
inner = mpf("0.5") * (1 + exp(-a)) - mpf("0.4") * exp(-a)
print("inner", inner, "floor", floor(inner * 10) / 10, "ceilplus", (ceil(inner * 10) + 1) / 10)
print("feller exponent", 2 * kappa * theta / sigma**2 - 1)
print("a_n n=400", exp(a) - 1)
print("table4 rel", (mpf("-5.4667") - mpf("-9.2138")) / mpf("9.2138"),
      (mpf("-3.7184") - mpf("-5.4667")) / mpf("5.4667"),
      (mpf("-2.9834") - mpf("-3.7184")) / mpf("3.7184"))
