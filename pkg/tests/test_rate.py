import numpy as np
import pytest
from scipy import stats

from fracshe.errors import DegenerateFunctional, SpeedInvalid, TailTooRare
from fracshe.fields import HolderSpec, coefficients, solve_deterministic
from fracshe.grid import GridSpec
from fracshe.kernel import validate_params
from fracshe.noise import SpectralMeasure, j_integral
from fracshe.rate import (INTERP_TOL, clt_variance_check, feas_tol, holder_interpolation_check,
                          kernel_holder_integrals, linear_rate, mdp_probe_mc, mdp_slope_linear,
                          rate_endpoint, space_increment_integral, time_increment_integral,
                          wilson_interval)
from fracshe.skeleton import ControlPath, solve_skeleton
from fracshe.speed import SpeedSpec

WHITE = SpectralMeasure.white()
HEAT = validate_params((2.0,), (0.0,))
FRAC = validate_params((1.5,), (0.3,))
LIN = coefficients("0", "1")
STD = coefficients("0.5*sin(u)", "1 + 0.25*cos(u)")
GRID = GridSpec(16.0, 64, 1.0, 32)


def test_zero_level():
    r = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 0.0, n_cells=8)
    assert r.value == 0.0
    assert not np.any(r.optimal_control.coeffs)


def test_quadratic_in_level():
    base = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.0, n_cells=8).value
    for a in (-1.0, 0.5, 2.0, 3.7):
        r = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, a, n_cells=8)
        assert r.value == pytest.approx(a ** 2 * base, rel=1e-10)


def test_optimality_certificate():
    for a in (1.0, -2.5):
        r = rate_endpoint(FRAC, STD, WHITE, GRID, 0.3, a, n_cells=8)
        assert r.feasibility_gap < feas_tol(a)
        assert r.gradient_norm < 1e-12 * abs(a)
        assert r.value == pytest.approx(0.5 * float(r.optimal_control.norm()) ** 2)
        # perturbing along any null direction can only raise the cost
        rng = np.random.default_rng(0)
        w = r.optimal_control.coeffs / np.linalg.norm(r.optimal_control.coeffs)
        k = rng.standard_normal(w.shape)
        k -= np.sum(k * w) * w
        bumped = ControlPath(GRID, WHITE, r.optimal_control.coeffs + 1e-2 * k)
        assert 0.5 * float(bumped.norm()) ** 2 > r.value


def test_closed_form_matches_skeleton_endpoint():
    u0 = solve_deterministic(FRAC, STD, GRID)
    r = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.5, n_cells=8, u_zero=u0)
    z = solve_skeleton(FRAC, STD, WHITE, u0, r.optimal_control, GRID)
    assert z.values[-1][GRID.site_index(0.0)] == pytest.approx(1.5, abs=1e-10)


def test_gradient_method_reproduces_closed_form():
    closed = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.0, n_cells=8).value
    grad = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.0, n_cells=8, method="gradient")
    assert grad.iterations > 0
    assert grad.value == pytest.approx(closed, rel=1e-3)


def test_representer_methods_agree():
    a = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.0, n_cells=8, representer="adjoint")
    b = rate_endpoint(FRAC, STD, WHITE, GRID, 0.0, 1.0, n_cells=8, representer="columns")
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_degenerate_functional():
    with pytest.raises(DegenerateFunctional):
        rate_endpoint(FRAC, coefficients("0", "0"), WHITE, GRID, 0.0, 1.0, n_cells=8)


def test_linear_gaussian_rate():
    g = GridSpec(16.0, 512, 1.0, 1024)
    r = rate_endpoint(HEAT, LIN, WHITE, g, 0.0, 1.0)
    oracle = 1 / (2 * np.sqrt(2 * np.pi))
    assert oracle == pytest.approx(0.1995, abs=1e-4)
    assert r.value == pytest.approx(oracle, rel=1e-2)
    assert linear_rate(HEAT, WHITE, g, 1.0)[0] == pytest.approx(oracle, rel=1e-2)


def test_analytic_slopes_converge_monotonically():
    g = GridSpec(16.0, 1024, 1.0, 64)
    rows = mdp_slope_linear(HEAT, WHITE, g, 0.0, 1.0, 0.25, [1e-4, 1e-6, 1e-8])
    istar = rows[0]["rate_star"]
    err = [abs(r["slope"] - istar) for r in rows]
    assert err[0] > err[1] > err[2]
    assert err[2] < 0.05 * istar
    assert rows[2]["lambda"] == pytest.approx(100.0)


def test_analytic_slope_against_gaussian_tail():
    g = GridSpec(16.0, 256, 1.0, 64)
    sd = np.sqrt(j_integral(HEAT, WHITE, 1.0, g))
    row = mdp_slope_linear(HEAT, WHITE, g, 0.0, 1.0, 0.25, [1e-2])[0]
    p = 2 * stats.norm.sf(row["lambda"] / sd)
    assert row["p_hat"] == pytest.approx(p, rel=1e-12)


def test_analytic_zero_level():
    row = mdp_slope_linear(HEAT, WHITE, GridSpec(16.0, 64, 1.0, 8), 0.0, 0.0, 0.25, [1e-4])[0]
    assert row["p_hat"] == 1.0 and row["slope"] == 0.0 and row["rate_star"] == 0.0


def test_analytic_rejects_bad_speed():
    with pytest.raises(SpeedInvalid):
        mdp_slope_linear(HEAT, WHITE, GridSpec(16.0, 64, 1.0, 8), 0.0, 1.0, 0.5, [1e-4])


MC_GRID = GridSpec(16.0, 256, 1.0, 16)


def test_mc_matches_analytic_slope():
    eps = 1e-2
    row = mdp_probe_mc(HEAT, LIN, WHITE, MC_GRID, 0.0, 1.0, SpeedSpec(0.25), [eps], 4000, 1)[0]
    exact = mdp_slope_linear(HEAT, WHITE, MC_GRID, 0.0, 1.0, 0.25, [eps])[0]
    assert row["p_lo"] <= exact["p_hat"] <= row["p_hi"]
    assert row["slope_lo"] <= exact["slope"] <= row["slope_hi"]


def test_mc_probability_decreases_with_level():
    ps = [mdp_probe_mc(FRAC, STD, WHITE, MC_GRID, 0.0, a, 0.25, [1e-2], 2000, 2)[0]["p_hat"]
          for a in (0.5, 1.0, 1.5)]
    assert ps[0] > ps[1] > ps[2]


def test_mc_two_seeds_consistent():
    r1 = mdp_probe_mc(FRAC, STD, WHITE, MC_GRID, 0.0, 1.0, 0.25, [1e-2], 2000, 3)[0]
    r2 = mdp_probe_mc(FRAC, STD, WHITE, MC_GRID, 0.0, 1.0, 0.25, [1e-2], 2000, 4)[0]
    assert r1["p_lo"] <= r2["p_hi"] and r2["p_lo"] <= r1["p_hi"]


def test_tail_too_rare():
    with pytest.raises(TailTooRare) as info:
        mdp_probe_mc(HEAT, LIN, WHITE, MC_GRID, 0.0, 4.0, 0.25, [1e-4], 200, 5)
    assert info.value.row["p_hat"] < 10 / 200


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert abs(lo) < 1e-15 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)
    # textbook value: k = 10, n = 100 gives (0.0552, 0.1744)
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.0552, abs=1e-4) and hi == pytest.approx(0.1744, abs=1e-4)


def test_clt_variance():
    g = GridSpec(16.0, 1024, 1.0, 16)
    res = clt_variance_check(HEAT, WHITE, g, 0.0, 10_000, 6)
    assert res.analytic == pytest.approx(2.5066, abs=5e-3)
    assert res.passed
    # Gaussian scaling: the same streams give the same rescaled sample for any eps
    small = GridSpec(16.0, 128, 1.0, 8)
    vals = [clt_variance_check(HEAT, WHITE, small, 0.0, 500, 7, eps=e).empirical
            for e in (1.0, 0.1, 0.01)]
    assert np.allclose(vals, vals[0], rtol=1e-10)
    other = clt_variance_check(HEAT, WHITE, small, 3.0, 2000, 8)
    here = clt_variance_check(HEAT, WHITE, small, 0.0, 2000, 8)
    assert abs(other.empirical - here.empirical) < 3 * np.hypot(other.stderr, here.stderr)


INTERP_GRID = GridSpec(8.0, 64, 1.0, 32)
INTERP_SPEC = HolderSpec(0.5, 0.5, window=(-0.25, 0.25))


@pytest.mark.parametrize("family", ["eps_sin_x", "eps15_cos_t"])
def test_interpolation_decaying_families(family):
    rows = holder_interpolation_check(family, INTERP_GRID, INTERP_SPEC)
    vals = [v for _, v in rows]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < INTERP_TOL


def test_interpolation_sqrt_family_decreases():
    vals = [v for _, v in holder_interpolation_check("sqrt_cos_t", INTERP_GRID, INTERP_SPEC)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_interpolation_negative_control():
    vals = [v for _, v in holder_interpolation_check("const", INTERP_GRID, INTERP_SPEC)]
    assert min(vals) >= 0.5


def test_interpolation_rate_for_eps_sin_x():
    # sup |eps sin x| on K plus increments bounded by eps * const: linear in eps
    rows = holder_interpolation_check("eps_sin_x", INTERP_GRID, INTERP_SPEC)
    (e0, v0), (e1, v1) = rows[1], rows[2]
    assert v1 / v0 == pytest.approx(e1 / e0, rel=1e-10)


def test_increment_integrals_vanish_at_zero_lag():
    assert time_increment_integral(HEAT, WHITE, 0.5, 0.0) == 0.0
    assert space_increment_integral(HEAT, WHITE, 0.5, 0.0) == 0.0


def test_kernel_holder_exponents_gaussian():
    fit = kernel_holder_integrals(HEAT, WHITE)
    assert 0.45 <= fit.time_exponent <= 0.55
    assert 0.9 <= fit.space_exponent <= 1.1
