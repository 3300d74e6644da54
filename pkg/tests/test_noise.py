import numpy as np
import pytest
from scipy import integrate

from fracshe.errors import Inconclusive
from fracshe.grid import GridSpec
from fracshe.kernel import validate_params
from fracshe.noise import (HSpaceVector, SpectralMeasure, check_integrability, h_inner,
                           h_norm_sq, j_function, j_integral, noise_stream,
                           riesz_cell_average, sample_increment, sandwich_check)
from fracshe.rate import variance_with_stderr

WHITE = SpectralMeasure.white()
HEAT = validate_params((2.0,), (0.0,))


def smooth_field(grid, rng):
    x = grid.coords()
    c = rng.standard_normal(3)
    return sum(ci * np.cos((i + 1) * 0.7 * x + ci) for i, ci in enumerate(c)) * np.exp(-x ** 2 / 3)


def test_integrability_white():
    res = check_integrability(WHITE, validate_params((1.5,), (0.0,)), 1.0)
    closed = 2 * np.pi / (1.5 * np.sin(np.pi / 1.5))
    assert res.finite
    assert res.value == pytest.approx(closed, rel=1e-8)
    assert res.value == pytest.approx(4.837, abs=1e-3)
    assert not check_integrability(WHITE, validate_params((0.5,), (0.0,)), 1.0).finite


def test_integrability_compact_support():
    mu = SpectralMeasure.tabulated([0, 1, 2, 3], [1.0, 0.5, 0.2, 0.0])
    for eta in (0.1, 0.5, 1.0):
        res = check_integrability(mu, validate_params((0.5,), (0.0,)), eta)
        assert res.finite and np.isfinite(res.value)


def test_integrability_monotone_in_eta():
    for a in (0.6, 1.2, 1.5, 2.0):
        p = validate_params((a,), (0.0,))
        flags = [check_integrability(WHITE, p, eta).finite for eta in np.linspace(0.1, 1, 10)]
        first = flags.index(True) if True in flags else len(flags)
        assert all(flags[first:])


def test_integrability_riesz():
    mu = SpectralMeasure.riesz(0.5)
    p = validate_params((1.5,), (0.0,))
    # psi ~ r^(-1/2): finite iff 1/2 < 1.5 eta
    assert check_integrability(mu, p, 0.5).finite
    assert not check_integrability(mu, p, 0.3).finite


def test_integrability_inconclusive_table():
    mu = SpectralMeasure.tabulated([0, 1, 2, 3, 4, 5], [1.0, 0.3, 2.0, 0.1, 5.0, 0.2])
    with pytest.raises(Inconclusive):
        check_integrability(mu, validate_params((1.5,), (0.0,)), 1.0)


def test_tabulated_from_csv(tmp_path):
    path = tmp_path / "psi.csv"
    r = np.linspace(0.5, 50, 40)
    path.write_text("r,psi\n" + "".join(f"{float(a)!r},{float(a) ** -0.5!r}\n" for a in r))
    mu = SpectralMeasure.from_csv(path)
    assert mu.tail_exponent() == pytest.approx(-0.5, abs=1e-10)
    assert mu.density(100.0) == pytest.approx(0.1, rel=1e-8)


def test_bad_measures():
    with pytest.raises(ValueError):
        SpectralMeasure.riesz(1.5, d=1)
    with pytest.raises(ValueError):
        SpectralMeasure.tabulated([0, 1], [1, -1])


def test_riesz_cell_average():
    h, beta = 0.3, 0.6
    val = integrate.quad(lambda x: abs(x) ** (beta - 1), -h / 2, h / 2, points=[0])[0] / h
    assert riesz_cell_average(beta, 1, h) == pytest.approx(val, rel=1e-10)
    # polar form over one eighth of the square: r^(beta - 2) r dr integrates in closed form
    ref2 = 8 * integrate.quad(lambda th: (h / 2 / np.cos(th)) ** beta / beta, 0, np.pi / 4)[0] / h ** 2
    assert riesz_cell_average(beta, 2, h) == pytest.approx(ref2, rel=1e-5)


def test_h_inner_properties():
    g = GridSpec(20.0, 256)
    rng = np.random.default_rng(3)
    for mu in (WHITE, SpectralMeasure.riesz(0.4)):
        f1, f2 = smooth_field(g, rng), smooth_field(g, rng)
        v1, v2 = HSpaceVector.from_field(f1, g), HSpaceVector.from_field(f2, g)
        assert h_inner(v1, v1, mu) >= 0
        assert h_inner(v1, v2, mu) == pytest.approx(h_inner(v2, v1, mu), rel=1e-12)


def test_white_parseval():
    # psi = 1 means mu is Lebesgue measure, so <f, g>_H = (2 pi)^d int f g
    g = GridSpec(20.0, 256)
    rng = np.random.default_rng(4)
    for _ in range(5):
        f1, f2 = rng.standard_normal(g.n), rng.standard_normal(g.n)
        hv = h_inner(HSpaceVector.from_field(f1, g), HSpaceVector.from_field(f2, g), WHITE)
        direct = 2 * np.pi * np.sum(f1 * f2) * g.dx
        assert abs(hv - direct) <= 1e-10 * abs(direct)
    g2 = GridSpec(8.0, 32, d=2)
    f = rng.standard_normal(g2.shape)
    assert h_norm_sq(f, SpectralMeasure.white(2), g2) == pytest.approx(
        (2 * np.pi) ** 2 * np.sum(f * f) * g2.dx ** 2, rel=1e-10)


def test_hspace_roundtrip():
    g = GridSpec(20.0, 64)
    f = np.random.default_rng(5).standard_normal(64)
    assert np.allclose(HSpaceVector.from_field(f, g).to_field(), f, atol=1e-13)


def test_j_function_gaussian():
    g = GridSpec(16.0, 1024)
    assert j_function(HEAT, WHITE, 1.0, g) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-10)
    ts = np.logspace(-3, 1, 20)
    js = [j_function(HEAT, WHITE, t, g) for t in ts]
    assert all(b < a for a, b in zip(js, js[1:]))
    assert all(v > 0 for v in js)


def test_j_integral_gaussian():
    # int_0^1 sqrt(pi / (2 s)) ds = sqrt(2 pi); lattice truncation loses ~1/xi_max
    assert j_integral(HEAT, WHITE, 1.0, GridSpec(16.0, 4096)) == pytest.approx(
        np.sqrt(2 * np.pi), rel=1e-3)
    # and the closed form in time agrees with quadrature of the lattice J
    g = GridSpec(16.0, 256)
    q = integrate.quad(lambda s: j_function(HEAT, WHITE, s, g), 0, 1, limit=200, points=[1e-4])
    assert j_integral(HEAT, WHITE, 1.0, g) == pytest.approx(q[0], rel=1e-7)


def test_j_function_rejects_zero_time():
    with pytest.raises(ValueError):
        j_function(HEAT, WHITE, 0.0, GridSpec(16.0, 64))


def test_sandwich():
    g = GridSpec(16.0, 1024)
    res = sandwich_check(HEAT, WHITE, [1.0, 2.0], g)
    assert res.B == pytest.approx(np.pi, rel=1e-8)
    assert res.A[0] == pytest.approx(np.sqrt(2 * np.pi), rel=3e-3)
    assert res.A[1] > res.A[0]
    assert 0.5 < res.lower_ratio <= res.upper_ratio < 2.0
    mu = SpectralMeasure.tabulated([0, 1, 2], [1.0, 1.0, 0.0])
    r2 = sandwich_check(HEAT, mu, 1.0, g)
    assert np.isfinite(r2.lower_ratio) and r2.lower_ratio > 0


def test_increment_isometry_and_mean():
    g = GridSpec(16.0, 256)
    dt = 0.02
    n = 10_000
    W = sample_increment(WHITE, g, dt, [noise_stream(11, r) for r in range(n)])
    assert W.dtype == np.float64
    rng = np.random.default_rng(6)
    for _ in range(3):
        f = smooth_field(g, rng)
        v, se = variance_with_stderr(W @ f * g.dx)
        assert abs(v - h_norm_sq(f, WHITE, g) * dt) < 3 * se
    # mean field: each site is N(0, s^2) with s^2 = 2 pi dt / dx
    m = W.mean(axis=0)
    s = np.sqrt(2 * np.pi * dt / g.dx / n)
    assert abs(m.mean()) < 3 * s / np.sqrt(g.n)
    assert np.mean(np.abs(m) < 3 * s) > 0.99


def test_increments_in_time_uncorrelated():
    g = GridSpec(16.0, 128)
    n = 10_000
    gens = [noise_stream(12, r) for r in range(n)]
    W1 = sample_increment(WHITE, g, 0.01, gens)
    W2 = sample_increment(WHITE, g, 0.01, gens)
    f = np.exp(-g.coords() ** 2)
    a, b = W1 @ f, W2 @ f
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 3 / np.sqrt(n)


def test_riesz_increment_isometry():
    mu = SpectralMeasure.riesz(0.5)
    g = GridSpec(32.0, 256)
    n = 10_000
    W = sample_increment(mu, g, 0.1, [noise_stream(13, r) for r in range(n)])
    f = np.exp(-g.coords() ** 2 / 2) * np.cos(g.coords())
    v, se = variance_with_stderr(W @ f * g.dx)
    assert abs(v - h_norm_sq(f, mu, g) * 0.1) < 3 * se


def test_streams_reproducible():
    a = noise_stream(7, 3).standard_normal(5)
    b = noise_stream(7, 3).standard_normal(5)
    c = noise_stream(7, 4).standard_normal(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
