"""Property suite behind ``fracshe verify`` and the acceptance tests.

Each stage is a function ``stage(seed) -> Outcome``; :func:`run_suite` runs
every stage twice with the same seed and adds a final determinism stage that
compares the SHA-256 digests of the two runs byte for byte.
"""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .fields import HolderSpec, coefficients, solve_deterministic, solve_spde
from .grid import GridSpec
from .kernel import (auto_grid, green_on_grid, heat_kernel, scaling_residual,
                     semigroup_residual, validate_params)
from .noise import SpectralMeasure, h_norm_sq, noise_stream, sample_increment
from .rate import (holder_interpolation_check, kernel_holder_integrals, mdp_probe_mc,
                   mdp_slope_linear, rate_endpoint, variance_with_stderr)
from .skeleton import ControlPath, mode_table, solve_skeleton, weak_continuity_probe

KERNEL_MATRIX = ((2.0, 0.0), (1.5, 0.0), (1.5, 0.4), (0.8, 0.2))
SQRT_2PI = np.sqrt(2 * np.pi)


@dataclass
class Outcome:
    passed: bool
    detail: str
    outputs: list = field(default_factory=list, repr=False)


@dataclass
class StageResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    digest: str
    budget: float

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def digest(arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=float))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _params(a, d=0.0):
    return validate_params((a,), (d,))


def gaussian_reduction(seed=0):
    p = _params(2.0)
    g = GridSpec(40.0, 1024)
    errs = []
    outs = []
    for t in (0.25, 1.0):
        kg = green_on_grid(p, t, g)
        errs.append(float(np.abs(kg.values - heat_kernel(t, g.coords())).max()))
        outs.append(kg.values)
    ok = max(errs) < 1e-6
    return Outcome(ok, "sup error " + ", ".join(f"{e:.2e}" for e in errs) + " (< 1e-06)", outs)


def _auto(a, d, t=1.0):
    return auto_grid(_params(a, d), t, L0=40.0, n0=1024)


def kernel_mass(seed=0):
    defects = []
    outs = []
    for a, d in KERNEL_MATRIX:
        kg = green_on_grid(_params(a, d), 1.0, _auto(a, d))
        defects.append(abs(kg.mass - 1.0))
        outs.append(kg.values)
    ok = max(defects) < 1e-6
    return Outcome(ok, f"max |mass - 1| = {max(defects):.2e} over {len(defects)} cases", outs)


def semigroup_scaling(seed=0):
    semi, scal = [], []
    for a, d in KERNEL_MATRIX:
        p = _params(a, d)
        g = _auto(a, d, t=2.0)
        semi.append(semigroup_residual(p, 1.0, 1.0, g))
        scal.append(scaling_residual(p, 2.0, g))
    ok = max(semi) < 1e-3 and max(scal) < 1e-3
    return Outcome(ok, f"max semigroup L1 {max(semi):.2e}, max scaling {max(scal):.2e} (< 1e-03)",
                   [semi, scal])


def _random_tests(grid, seed, count=3):
    rng = np.random.default_rng([seed, 4])
    x = grid.coords()
    out = []
    for _ in range(count):
        c = rng.standard_normal(4)
        f = rng.uniform(0.2, 2.0, 4)
        g = sum(ci * np.cos(fi * x + ci) for ci, fi in zip(c, f)) * np.exp(-x ** 2 / 2)
        out.append(g)
    return out


def ito_isometry(seed=0, count=10_000):
    mu = SpectralMeasure.white()
    g = GridSpec(16.0, 256)
    dt = 0.01
    tests = _random_tests(g, seed)
    rngs = [noise_stream(seed, r) for r in range(count)]
    W = sample_increment(mu, g, dt, rngs)
    ratios, ok = [], True
    for f in tests:
        pair = W @ f * g.dx
        v, se = variance_with_stderr(pair)
        ref = float(h_norm_sq(f, mu, g)) * dt
        r, s = v / ref, se / ref
        ratios.append((r, s))
        ok &= abs(r - 1) <= 3 * s
    txt = ", ".join(f"{r:.4f}+-{s:.4f}" for r, s in ratios)
    return Outcome(ok, f"Var ratio {txt} (each within 3 s.e. of 1)", [W[:16], ratios])


def linear_variance(seed=0, replicas=10_000):
    p = _params(2.0)
    mu = SpectralMeasure.white()
    g = GridSpec(16.0, 1024, 1.0, 16)
    u = solve_spde(p, coefficients("0", "1"), mu, 1.0, g, seed=seed, replicas=replicas,
                   record="final")
    x = np.asarray(u.values)[:, 0, g.site_index(0.0)[0]]
    v, se = variance_with_stderr(x)
    z = (v - SQRT_2PI) / se
    return Outcome(abs(z) <= 3, f"Var u(1,0) = {v:.4f} +- {se:.4f} vs sqrt(2 pi) = "
                                f"{SQRT_2PI:.4f} (z = {z:+.2f})", [x])


def _standard():
    p = _params(1.5, 0.3)
    mu = SpectralMeasure.white()
    co = coefficients("0.5*sin(u)", "1 + 0.25*cos(u)")
    return p, mu, co


def skeleton_linearity(seed=0):
    p, mu, co = _standard()
    g = GridSpec(16.0, 128, 1.0, 64)
    u0 = solve_deterministic(p, co, g)
    M = len(mode_table(g, mu))
    rng = np.random.default_rng([seed, 6])
    worst = 0.0
    outs = []
    for i in range(10):
        a = (-1.0, 0.5, 2.0)[i % 3] * rng.uniform(0.5, 1.5)
        h = ControlPath(g, mu, rng.standard_normal((16, M)))
        k = ControlPath(g, mu, rng.standard_normal((16, M)))
        zh = solve_skeleton(p, co, mu, u0, h, g).values
        zk = solve_skeleton(p, co, mu, u0, k, g).values
        zs = solve_skeleton(p, co, mu, u0, ControlPath(g, mu, a * h.coeffs + k.coeffs), g).values
        err = np.abs(zs - a * zh - zk).max()
        worst = max(worst, err / (1 + np.abs(zh).max() + np.abs(zk).max()))
        outs.append(zs[-1])
    return Outcome(worst < 1e-10, f"max relative defect {worst:.2e} (< 1e-10)", outs)


def weak_continuity(seed=0):
    p, mu, co = _standard()
    g = GridSpec(16.0, 128, 1.0, 1024)
    u0 = solve_deterministic(p, co, g)
    tab = mode_table(g, mu)
    nc = 256
    h = ControlPath(g, mu, np.zeros((nc, len(tab))))
    cg = np.zeros((nc, len(tab)))
    cg[:, 0] = 1.0
    cg[:, 1] = 0.5
    gc = ControlPath(g, mu, cg)
    spec = HolderSpec(0.15, 0.2, window=(-1.0, 1.0))
    rows = weak_continuity_probe(p, co, mu, u0, h, gc, (1, 4, 16, 64), spec, g)
    d = [r[1] for r in rows]
    ok = all(b < a for a, b in zip(d, d[1:])) and d[-1] < 0.05 * d[0]
    return Outcome(ok, "differences " + ", ".join(f"{v:.3e}" for v in d)
                   + f", last/first = {d[-1] / d[0]:.3f} (< 0.05)", [d])


def continuum_j_integral(T=1.0):
    """``int_0^T int exp(-2 s xi^2) dxi ds`` for the heat kernel and white noise, by quadrature."""
    f = lambda xi: -np.expm1(-2 * T * xi ** 2) / (2 * xi ** 2) if xi > 0 else T
    return 2.0 * integrate.quad(f, 0.0, np.inf, limit=200)[0]


def _rate_setup():
    p = _params(2.0)
    mu = SpectralMeasure.white()
    co = coefficients("0", "1")
    g = GridSpec(16.0, 1024, 1.0, 4096)
    return p, mu, co, g


def rate_closed_form(seed=0):
    p, mu, co, g = _rate_setup()
    ref = 1.0 / (2.0 * continuum_j_integral())
    r1 = rate_endpoint(p, co, mu, g, 0.0, 1.0)
    r2 = rate_endpoint(p, co, mu, g, 0.0, 2.0)
    rel = abs(r1.value / ref - 1)
    quad = abs(r2.value / (4 * r1.value) - 1)
    ok = rel < 0.01 and quad < 1e-10
    return Outcome(ok, f"I*(1) = {r1.value:.5f} vs {ref:.5f} (rel {rel:.2e} < 1e-2); "
                       f"I*(2)/4I*(1) - 1 = {quad:.1e} (< 1e-10)", [r1.value, r2.value])


def mdp_slope(seed=0, replicas=10_000):
    p, mu, co, g = _rate_setup()
    istar = rate_endpoint(p, co, mu, g, 0.0, 1.0).value
    rows = mdp_slope_linear(p, mu, g, 0.0, 1.0, 0.25, (1e-4, 1e-6, 1e-8), rate_star=istar)
    gaps = [abs(r["slope"] - istar) for r in rows]
    mono = all(b < a for a, b in zip(gaps, gaps[1:]))
    last = gaps[-1] / istar
    gm = GridSpec(16.0, 512, 1.0, 16)
    ana = mdp_slope_linear(p, mu, gm, 0.0, 1.0, 0.25, (1e-2,))[0]["slope"]
    mc = mdp_probe_mc(p, co, mu, gm, 0.0, 1.0, 0.25, (1e-2,), replicas, seed, rate_star=istar)[0]
    br = mc["slope_lo"] <= ana <= mc["slope_hi"]
    ok = mono and last < 0.05 and br
    return Outcome(ok, "slopes " + ", ".join(f"{r['slope']:.5f}" for r in rows)
                   + f" vs I* = {istar:.5f} (rel gap {last:.2e}); MC slope "
                     f"[{mc['slope_lo']:.4f}, {mc['slope_hi']:.4f}] vs analytic {ana:.4f}",
                   [[r["slope"] for r in rows], [mc["p_hat"]]])


def kernel_holder(seed=0):
    fit = kernel_holder_integrals(_params(2.0), SpectralMeasure.white())
    ok = 0.45 <= fit.time_exponent <= 0.55 and 0.9 <= fit.space_exponent <= 1.1
    return Outcome(ok, f"time slope {fit.time_exponent:.4f} in [0.45, 0.55], space slope "
                       f"{fit.space_exponent:.4f} in [0.9, 1.1]",
                   [fit.time_values, fit.space_values])


def holder_interpolation(seed=0):
    g = GridSpec(16.0, 256, 1.0, 64)
    spec = HolderSpec(0.5, 0.5, window=(-0.25, 0.25))
    eps = (1.0, 0.1, 0.01, 0.001)
    res = {name: [r[1] for r in holder_interpolation_check(name, g, spec, eps_list=eps)]
           for name in ("eps_sin_x", "eps15_cos_t", "sqrt_cos_t", "const")}
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))
    ok = (dec(res["eps_sin_x"]) and res["eps_sin_x"][-1] < 1e-3
          and dec(res["eps15_cos_t"]) and res["eps15_cos_t"][-1] < 1e-3
          and dec(res["sqrt_cos_t"])
          and min(res["const"]) >= 0.5)
    txt = ", ".join(f"{k} {v[-1]:.2e}" for k, v in res.items())
    return Outcome(ok, f"norms at eps=1e-3: {txt}", list(res.values()))


STAGES = (
    (1, "gaussian reduction", gaussian_reduction, 1.0),
    (2, "kernel mass", kernel_mass, 5.0),
    (3, "semigroup and scaling", semigroup_scaling, 10.0),
    (4, "Ito isometry", ito_isometry, 10.0),
    (5, "linear variance identity", linear_variance, 60.0),
    (6, "skeleton linearity", skeleton_linearity, 30.0),
    (7, "weak continuity", weak_continuity, 60.0),
    (8, "rate closed form", rate_closed_form, 30.0),
    (9, "MDP slope", mdp_slope, 120.0),
    (10, "kernel Hölder integrals", kernel_holder, 30.0),
    (11, "Hölder interpolation", holder_interpolation, 5.0),
)


def run_stage(number, seed=0):
    num, name, fn, budget = STAGES[number - 1]
    t0 = time.perf_counter()
    try:
        out = fn(seed)
    except Exception as e:  # a crash is a failure of that stage, not of the suite
        out = Outcome(False, f"{type(e).__name__}: {e}", [])
    dt = time.perf_counter() - t0
    return StageResult(num, name, bool(out.passed), out.detail, dt, digest(_flat(out.outputs)),
                       budget)


def _flat(obj):
    if isinstance(obj, (list, tuple)) and any(isinstance(o, (list, tuple, np.ndarray))
                                              for o in obj):
        out = []
        for o in obj:
            out.extend(_flat(o))
        return out
    return [np.ravel(np.asarray(obj, dtype=float))]


def run_suite(seed=0, stages=None, repeat=True, echo=None):
    """Run the stages (all by default); with ``repeat`` add the determinism check.

    ``echo`` is called with each finished :class:`StageResult`.
    """
    picks = range(1, len(STAGES) + 1) if stages is None else stages
    first = []
    for k in picks:
        r = run_stage(k, seed)
        first.append(r)
        if echo:
            echo(r)
    if not repeat:
        return first
    t0 = time.perf_counter()
    second = [run_stage(r.number, seed) for r in first]
    same = [a.digest == b.digest for a, b in zip(first, second)]
    bad = [a.number for a, s in zip(first, same) if not s]
    det = StageResult(12, "determinism", not bad,
                      "all stage digests identical across two runs" if not bad
                      else f"stages {bad} differ between runs",
                      time.perf_counter() - t0, digest([]), 360.0)
    if echo:
        echo(det)
    return first + [det]
