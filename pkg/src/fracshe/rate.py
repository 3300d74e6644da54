"""Moderate-deviation rate function for endpoint functionals and tail-slope probes.

The rate of the event ``Z(T, x0) = a`` is

    I*(a) = inf { ||h||^2 / 2 : Z^h(T, x0) = a },

a quadratic program with one linear constraint, because the frozen-coefficient
skeleton map is linear.  With ``w`` the coefficients of the endpoint
functional on the control basis (see :func:`~fracshe.skeleton.endpoint_representer`)
and cell length ``dt_c``,

    I*(a) = a^2 / (2 S),   S = sum w^2 / dt_c,   c* = a (w / dt_c) / S.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import DegenerateFunctional, TailTooRare
from .fields import HolderSpec, SpaceTimeField, holder_norm, solve_deterministic, solve_spde
from .noise import j_integral
from .skeleton import ControlPath, endpoint_representer, solve_skeleton
from .speed import SpeedSpec, validate_speed

INTERP_TOL = 1e-3
MIN_EXCEEDANCES = 10
PROBE_COLUMNS = ("eps", "lambda", "p_hat", "p_lo", "p_hi", "slope", "slope_lo", "slope_hi",
                 "rate_star")


def feas_tol(a):
    return 1e-8 * max(1.0, abs(a))


@dataclass(frozen=True)
class RateResult:
    value: float
    optimal_control: ControlPath = field(repr=False)
    iterations: int
    gradient_norm: float
    feasibility_gap: float
    level: float = 1.0
    sensitivity: float = np.nan


def _site_value(z, grid, site):
    return float(np.asarray(z.values)[(grid.n_t,) + grid.site_index(site)])


def rate_endpoint(params, coeffs, mu, grid, site, a, n_cells=None, method="closed",
                  representer="adjoint", u_zero=None, tol=1e-12, max_iter=10_000):
    """Minimal energy ``I*`` of controls steering ``Z^h(T, site)`` to ``a``.

    Parameters
    ----------
    n_cells : int, optional
        Number of time cells of the control basis (default ``grid.n_t``).
    method : {"closed", "gradient"}
        Closed form through the representer, or projected gradient descent
        started from a feasible single-coefficient control.
    representer : {"adjoint", "columns"}
        How the endpoint functional is assembled.

    Returns
    -------
    RateResult
        ``feasibility_gap`` is ``|Z^{h*}(T, site) - a|`` from an independent
        forward skeleton solve; ``gradient_norm`` is the component of ``h*``
        in the null space of the constraint (zero at a KKT point).
    """
    if not np.isfinite(a):
        raise ValueError("level a must be finite")
    n_cells = grid.n_t if n_cells is None else int(n_cells)
    if u_zero is None:
        u_zero = solve_deterministic(params, coeffs, grid)
    w = endpoint_representer(params, coeffs, mu, u_zero, grid, site, n_cells, representer)
    dtc = grid.T / n_cells
    S = float(np.sum(w ** 2)) / dtc
    if not S > 1e-300:
        raise DegenerateFunctional(f"endpoint at {site} is unreachable by controls (I* = inf)")
    if method == "closed":
        c = a * (w / dtc) / S
        iters = 0
    elif method == "gradient":
        c, iters = _projected_gradient(w, dtc, a, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    h = ControlPath(grid, mu, c)
    value = 0.5 * float(h.norm()) ** 2
    z = solve_skeleton(params, coeffs, mu, u_zero, h, grid)
    gap = abs(_site_value(z, grid, site) - a)
    wn = w / np.linalg.norm(w)
    null = c - np.sum(c * wn) * wn
    gnorm = float(np.sqrt(dtc * np.sum(null ** 2)))
    return RateResult(value, h, iters, gnorm, gap, float(a), S)


def _projected_gradient(w, dtc, a, tol, max_iter):
    """Descent on ``dtc |c|^2 / 2`` over the affine set ``<w, c> = a``."""
    wn2 = float(np.sum(w ** 2))

    def project(c):
        return c + (a - np.sum(w * c)) / wn2 * w

    j = np.unravel_index(np.argmax(np.abs(w)), w.shape)
    c = np.zeros_like(w)
    c[j] = a / w[j]
    step = 0.5 / dtc
    for k in range(1, max_iter + 1):
        g = dtc * c
        g = g - np.sum(g * w) / wn2 * w
        if np.sqrt(np.sum(g ** 2) / dtc) <= tol * max(1.0, abs(a)):
            return c, k - 1
        c = project(c - step * g)
    return c, max_iter


def wilson_interval(k, n, level=0.95):
    """Wilson score interval for a binomial proportion."""
    z = stats.norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z ** 2 / n
    mid = (p + z ** 2 / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def _slope(p, lam):
    with np.errstate(divide="ignore"):
        return -np.log(p) / lam ** 2


def linear_rate(params, mu, grid, a, sigma=1.0, drift=0.0):
    """``a^2 / (2 sigma_T^2)`` with ``sigma_T^2 = sigma^2 int_0^T J`` (drift folded in)."""
    var = sigma ** 2 * j_integral(params, mu, grid.T, grid, drift)
    return a ** 2 / (2 * var), var


def mdp_slope_linear(params, mu, grid, site, a, speed, eps_list, sigma=1.0, drift=0.0,
                     rate_star=None):
    """Exact Gaussian tail slopes ``-lambda^-2 log P(|u_eps - u0|(T, x0) >= a sqrt(eps) lambda)``.

    For constant ``sigma`` and linear drift ``b(u) = b0 + drift u`` the
    deviation is centred Gaussian with variance ``eps sigma_T^2``, so
    ``p = 2 Phi(-a lambda / sigma_T)``; the log is taken with ``log_ndtr``
    and stays accurate far in the tail.  ``site`` does not enter (spatial
    homogeneity) and is kept for a uniform call signature.
    """
    spd = validate_speed(speed.rho if isinstance(speed, SpeedSpec) else speed)
    I, var = linear_rate(params, mu, grid, a, sigma, drift)
    rstar = I if rate_star is None else rate_star
    sd = np.sqrt(var)
    rows = []
    for eps in eps_list:
        lam = float(spd.lam(eps))
        if a == 0:
            logp = 0.0
        else:
            logp = float(np.log(2.0) + special.log_ndtr(-abs(a) * lam / sd))
        p = float(np.exp(logp))
        s = -logp / lam ** 2
        rows.append(dict(eps=float(eps), **{"lambda": lam}, p_hat=p, p_lo=p, p_hi=p,
                         slope=s, slope_lo=s, slope_hi=s, rate_star=float(rstar)))
    return rows


def mdp_probe_mc(params, coeffs, mu, grid, site, a, speed, eps_list, replicas, seed,
                 rate_star=np.nan, u_zero=None):
    """Monte Carlo tail probabilities with 95% Wilson intervals and slope brackets.

    Raises
    ------
    TailTooRare
        When fewer than ten exceedances are seen; ``row`` holds the counts.
    """
    spd = validate_speed(speed.rho if isinstance(speed, SpeedSpec) else speed)
    if u_zero is None:
        u_zero = solve_deterministic(params, coeffs, grid, record="final")
    u0 = float(np.asarray(u_zero.values)[(-1,) + grid.site_index(site)])
    rows = []
    for eps in eps_list:
        lam = float(spd.lam(eps))
        u = solve_spde(params, coeffs, mu, eps, grid, seed=seed, replicas=replicas,
                       record="final")
        x = np.asarray(u.values)[(slice(None), 0) + grid.site_index(site)]
        k = int(np.sum(np.abs(x - u0) >= a * np.sqrt(eps) * lam))
        lo, hi = wilson_interval(k, replicas)
        row = dict(eps=float(eps), **{"lambda": lam}, p_hat=k / replicas, p_lo=lo, p_hi=hi,
                   slope=float(_slope(k / replicas, lam)), slope_lo=float(_slope(hi, lam)),
                   slope_hi=float(_slope(lo, lam)), rate_star=float(rate_star))
        if k < MIN_EXCEEDANCES:
            raise TailTooRare(f"only {k} exceedances in {replicas} replicas at eps={eps}",
                              row)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class VarianceCheck:
    empirical: float
    analytic: float
    stderr: float

    @property
    def zscore(self):
        return (self.empirical - self.analytic) / self.stderr

    @property
    def passed(self):
        return abs(self.zscore) <= 3.0


def variance_with_stderr(x):
    """Unbiased variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = x - x.mean()
    v = float(np.sum(c ** 2) / (n - 1))
    m4 = float(np.mean(c ** 4))
    return v, float(np.sqrt(max(m4 - v ** 2, 0.0) / n))


def clt_variance_check(params, mu, grid, site, replicas, seed, eps=1.0):
    """Empirical ``Var((u_eps - u0)(T, site) / sqrt(eps))`` against ``int_0^T J`` for ``sigma = 1``, ``b = 0``."""
    from .fields import coefficients
    co = coefficients("0", "1")
    u = solve_spde(params, co, mu, eps, grid, seed=seed, replicas=replicas, record="final")
    x = np.asarray(u.values)[(slice(None), 0) + grid.site_index(site)] / np.sqrt(eps)
    v, se = variance_with_stderr(x)
    return VarianceCheck(v, j_integral(params, mu, grid.T, grid), se)


FAMILIES = {
    "eps_sin_x": lambda e, t, x: e * np.sin(x),
    "eps15_cos_t": lambda e, t, x: e ** 1.5 * np.cos(t),
    "sqrt_cos_t": lambda e, t, x: np.sqrt(e) * np.cos(t),
    "const": lambda e, t, x: np.ones_like(t + x),
}


def holder_interpolation_check(family, grid, spec, theta=0.5, eps_list=(1.0, 0.1, 0.01, 0.001)):
    """Rows ``(eps, norm)`` of the ``(theta b1, theta b2)``-Hölder norm of ``V^eps`` on ``K``.

    ``family`` is a name from :data:`FAMILIES` or a callable ``V(eps, t, x)``.
    """
    fn = FAMILIES[family] if isinstance(family, str) else family
    t = grid.times()[:, None]
    x = grid.coords()[None, :]
    sub = HolderSpec(theta * spec.beta1, theta * spec.beta2, spec.eta, spec.window)
    rows = []
    for eps in eps_list:
        v = np.broadcast_to(fn(eps, t, x), (grid.n_t + 1, grid.n)).astype(float)
        rows.append((float(eps), holder_norm(SpaceTimeField(grid, v), sub)))
    return rows


def _time_integrand(params, s, h):
    al, de = params.alpha[0], params.delta[0]

    def f(xi):
        lam = xi ** al * np.exp(-0.5j * np.pi * de)
        a, b = lam.real, lam.imag
        acc = -np.expm1(-2 * a * s) / (2 * a) if a > 0 else s
        return acc * (1 - 2 * np.exp(-h * a) * np.cos(h * b) + np.exp(-2 * h * a))
    return f


def _half_line(g, k, lo=0.0, decades=8):
    """``int_lo^inf g`` split at ``k, 10k, ...`` so that each piece is resolved."""
    edges = [lo] + [k * 10.0 ** j for j in range(decades) if k * 10.0 ** j > lo]
    val = sum(integrate.quad(g, a, b, limit=400)[0] for a, b in zip(edges, edges[1:]))
    return val + integrate.quad(g, edges[-1], np.inf, limit=400)[0]


def time_increment_integral(params, mu, s, h):
    """``int_0^s ||G(s + h - r) - G(s - r)||_H^2 dr`` by quadrature over frequencies (d = 1)."""
    if h == 0:
        return 0.0
    f = _time_integrand(params, s, h)
    # the symbol is conjugate-symmetric, so both half-lines contribute equally
    g = lambda xi: mu.density(xi) * f(xi)
    val = _half_line(g, h ** (-1.0 / params.alpha[0]))
    return 2.0 * val


def space_increment_integral(params, mu, t, z):
    """``int_0^t ||G(t - r, x - .) - G(t - r, x + z - .)||_H^2 dr`` by quadrature (d = 1)."""
    if z == 0:
        return 0.0
    al, de = params.alpha[0], params.delta[0]
    a_of = lambda xi: xi ** al * np.cos(0.5 * np.pi * de)

    def f(xi):
        a = a_of(xi)
        acc = np.where(a > 0, -np.expm1(-2 * a * t) / (2 * np.where(a > 0, a, 1.0)), t)
        return mu.density(xi) * acc

    # 1 - cos(xi z) resolved by plain quadrature up to A, Fourier quadrature beyond
    A = 50.0 / abs(z)
    g = lambda xi: f(xi) * (1 - np.cos(xi * z))
    pts = np.linspace(0.0, A, 9)
    head = sum(integrate.quad(g, lo, hi, limit=400)[0] for lo, hi in zip(pts, pts[1:]))
    tail = _half_line(f, A, lo=A)
    osc = integrate.quad(f, A, np.inf, weight="cos", wvar=abs(z))[0]
    return 4.0 * (head + tail - osc)


@dataclass(frozen=True)
class KernelHolderFit:
    time_exponent: float
    space_exponent: float
    time_values: tuple
    space_values: tuple


def kernel_holder_integrals(params, mu, lag_list=None, grid=None, s=None):
    """Log-log slopes of the time and space increment integrals of the Green kernel.

    The fit uses the half of ``lag_list`` closest to zero, where the small-lag
    power law dominates.  ``grid`` only supplies the horizon ``T`` (default 1).
    """
    if params.d != 1:
        raise NotImplementedError("increment integrals implemented for d = 1")
    T = grid.T if grid is not None else 1.0
    s = T / 2 if s is None else s
    lags = np.asarray(np.logspace(-6, -2, 9) if lag_list is None else lag_list, dtype=float)
    tv = np.array([time_increment_integral(params, mu, s, h) for h in lags])
    sv = np.array([space_increment_integral(params, mu, s, z) for z in lags])
    order = np.argsort(lags)
    keep = order[: max(2, (len(lags) + 1) // 2)]
    fit = lambda v: float(np.polyfit(np.log(lags[keep]), np.log(v[keep]), 1)[0])
    return KernelHolderFit(fit(tv), fit(sv), tuple(tv), tuple(sv))
