import numpy as np
from hypothesis import assume, given, settings, strategies as st

from fracshe.fields import coefficients, solve_deterministic
from fracshe.grid import GridSpec
from fracshe.kernel import green_on_grid, symbol, validate_params
from fracshe.noise import HSpaceVector, SpectralMeasure, h_inner
from fracshe.skeleton import ControlPath, mode_table, solve_skeleton

alphas = st.floats(0.3, 2.0).filter(lambda a: abs(a - 1) > 0.05)


@st.composite
def stable_params(draw):
    a = draw(alphas)
    d = draw(st.floats(-1, 1)) * min(a, 2 - a)
    return validate_params((a,), (d,))


@settings(max_examples=50, deadline=None)
@given(stable_params(), st.floats(0.01, 5.0), st.floats(-50, 50))
def test_symbol_is_a_characteristic_function(p, t, xi):
    s = symbol(p, t, xi)
    assert abs(s) <= 1 + 1e-14
    assert np.isclose(symbol(p, t, -xi), np.conj(s), atol=1e-15)
    assert symbol(p, t, 0.0) == 1.0


@settings(max_examples=15, deadline=None)
@given(stable_params())
def test_lattice_kernel_mass_is_one(p):
    assume(p.alpha0 >= 1.2)
    kg = green_on_grid(p, 1.0, GridSpec(64.0, 1024), check_wrap=False)
    assert abs(kg.mass - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([None, 0.3, 0.7]))
def test_h_inner_is_symmetric_and_positive(seed, beta):
    mu = SpectralMeasure.white() if beta is None else SpectralMeasure.riesz(beta)
    g = GridSpec(10.0, 32)
    rng = np.random.default_rng(seed)
    a, b = (HSpaceVector.from_field(rng.standard_normal(32), g) for _ in range(2))
    assert h_inner(a, a, mu) > 0
    assert np.isclose(h_inner(a, b, mu), h_inner(b, a, mu), rtol=1e-12)
    assert h_inner(a, b, mu) ** 2 <= h_inner(a, a, mu) * h_inner(b, b, mu) * (1 + 1e-12)


GRID = GridSpec(16.0, 32, 1.0, 16)
P = validate_params((1.5,), (0.3,))
CO = coefficients("0.5*sin(u) + 0.3", "1 + 0.25*cos(u)")
U0 = solve_deterministic(P, CO, GRID)
M = len(mode_table(GRID, SpectralMeasure.white()))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
def test_skeleton_map_is_linear(seed, a):
    mu = SpectralMeasure.white()
    rng = np.random.default_rng(seed)
    h, g = rng.standard_normal((2, 4, M))
    z = lambda c: solve_skeleton(P, CO, mu, U0, ControlPath(GRID, mu, c), GRID).values
    zh, zg = z(h), z(g)
    scale = 1 + np.abs(zh).max() + np.abs(zg).max()
    assert np.abs(z(a * h + g) - a * zh - zg).max() < 1e-10 * scale
