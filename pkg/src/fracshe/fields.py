"""Time stepping of the deterministic and perturbed equations, Hölder norms.

All solvers use a per-Fourier-mode exponential Euler step.  For a mode with
exponent ``Lambda`` and step ``dt``

    u_{m+1} = exp(-Lambda dt) u_m + phi1 F[b(u_m)] + sqrt(eps) q F[sigma(u_m) dW_m],

where ``phi1 = (1 - exp(-Lambda dt)) / Lambda`` integrates a frozen forcing
exactly over the step and ``q`` carries the exact Itô variance of the
semigroup over the step, ``|q|^2 dt = int_0^dt |exp(-Lambda s)|^2 ds``.
Coefficients are evaluated at the left point.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, IntegrabilityFail, TooFewLags, Unstable
from .expr import LIPSCHITZ_BOUND, CoefficientExpr, parse_expr
from .grid import GridSpec, irfft, rfft
from .kernel import lattice_exponent
from .noise import check_integrability, increment_amplitude, noise_stream

OVERFLOW = 1e12
PAIR_BUDGET = 200_000
THREADS_ENV = "FRACSHE_THREADS"


@dataclass(frozen=True)
class CoefficientSpec:
    """Drift ``b`` and diffusion ``sigma`` with their Lipschitz data."""

    b: CoefficientExpr
    sigma: CoefficientExpr

    @property
    def L(self):
        return max(self.b.lipschitz, self.sigma.lipschitz)

    @property
    def L_prime(self):
        return self.b.lipschitz_deriv


def coefficients(b="0", sigma="1", bound=LIPSCHITZ_BOUND):
    """Parse and validate a coefficient pair (conditions (C) and (D))."""
    if not isinstance(b, CoefficientExpr):
        b = parse_expr(b, bound)
    if not isinstance(sigma, CoefficientExpr):
        sigma = parse_expr(sigma, bound)
    return CoefficientSpec(b, sigma)


@dataclass(frozen=True)
class SpaceTimeField:
    """Values indexed ``[..., step, *sites]`` on ``grid``; leading axes are replicas."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    @property
    def times(self):
        return self.grid.times()

    def at(self, step, x):
        return self.values[(..., step) + self.grid.site_index(x)]

    def __sub__(self, other):
        if self.grid != other.grid:
            raise GridMismatch("fields live on different grids")
        return SpaceTimeField(self.grid, self.values - other.values)


@dataclass(frozen=True)
class HolderSpec:
    """Hölder exponents in time and space and the spatial window ``K = [lo, hi]^d``."""

    beta1: float
    beta2: float
    eta: float = None
    window: tuple = (-1.0, 1.0)

    def admissible(self, alpha0):
        """Conservative exponent range ``beta1 < alpha0 (1-eta)/2``, ``beta2 < min(alpha0 (1-eta)/2, 1/2)``."""
        if self.eta is None:
            return self.beta1 > 0 and self.beta2 > 0
        cap = alpha0 * (1.0 - self.eta) / 2.0
        return 0 < self.beta1 < cap and 0 < self.beta2 < min(cap, 0.5)


class Stepper:
    """Per-mode multipliers of the exponential Euler step for one (params, grid)."""

    def __init__(self, params, grid):
        self.params = params
        self.grid = grid
        dt = grid.dt
        lam = lattice_exponent(params, grid)
        self.decay = np.exp(-lam * dt)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = -np.expm1(-lam * dt) / lam
            a = lam.real
            q2 = -np.expm1(-2 * a * dt) / (2 * a * dt)
        small = np.abs(lam * dt) < 1e-14
        self.phi1 = np.where(small, dt, phi)
        q = np.sqrt(np.where(a * dt < 1e-14, 1.0, q2))
        self.q = q * np.exp(-0.5j * lam.imag * dt)

    def step(self, u, forcing=None, noise=None, noise_hat=None):
        """One step; ``forcing`` is integrated with ``phi1``, ``noise`` is an Itô increment field."""
        uh = rfft(u, self.grid) * self.decay
        if forcing is not None:
            uh += self.phi1 * rfft(forcing, self.grid)
        if noise is not None:
            uh += self.q * rfft(noise, self.grid)
        if noise_hat is not None:
            uh += self.q * noise_hat
        return irfft(uh, self.grid)


@lru_cache(maxsize=32)
def stepper(params, grid):
    return Stepper(params, grid)


def _guard(u, step):
    m = np.max(np.abs(u))
    if not np.isfinite(m) or m > OVERFLOW:
        raise Unstable(f"|u| reached {m:.3e} at step {step}; check the coefficients")


def _record_mask(grid, record):
    if record is None or record == "all":
        return np.arange(grid.n_t + 1)
    if record == "final":
        return np.array([grid.n_t])
    return np.asarray(sorted(set(int(s) for s in record)))


def solve_deterministic(params, coeffs, grid, record="all"):
    """Mild solution ``u0`` of the noiseless equation from zero initial data."""
    return solve_spde(params, coeffs, None, 0.0, grid, seed=0, record=record)


@lru_cache(maxsize=64)
def _well_posed(mu, params):
    # finiteness at eta = 1 is implied by finiteness at any smaller eta
    return check_integrability(mu, params, 1.0).finite


def thread_count():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def solve_spde(params, coeffs, mu, eps, grid, seed=0, replicas=None, record="all",
               chunk=256):
    """Mild solution ``u^eps`` by exponential Euler.

    Parameters
    ----------
    replicas : int or sequence of int, optional
        Replica indices; each replica draws from its own counter-based stream
        ``noise_stream(seed, replica)``.  ``None`` gives a single unbatched
        trajectory for replica 0.
    record : "all", "final" or sequence of step indices
        Time steps stored in the returned field.

    Notes
    -----
    With ``eps == 0`` or a zero ``sigma`` no noise is drawn and the result is
    bit-identical to :func:`solve_deterministic`.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    steps = _record_mask(grid, record)
    noisy = eps > 0 and not (coeffs.sigma.is_constant and float(coeffs.sigma(0.0)) == 0.0)
    if noisy and mu is None:
        raise ValueError("a spectral measure is needed when eps > 0")
    if noisy and not _well_posed(mu, params):
        raise IntegrabilityFail("int mu / (1 + S_alpha) diverges, so no eta <= 1 is admissible")
    single = replicas is None
    ids = [0] if single else (list(range(replicas)) if np.isscalar(replicas) else list(replicas))
    if not noisy:
        out = _run(params, coeffs, mu, 0.0, grid, seed, [0] if single else ids[:1], steps)
        if not single:
            out = np.repeat(out, len(ids), axis=0)
    else:
        chunks = [ids[i:i + chunk] for i in range(0, len(ids), chunk)]
        job = lambda c: _run(params, coeffs, mu, eps, grid, seed, c, steps)
        nthreads = thread_count()
        if nthreads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(nthreads) as ex:
                parts = list(ex.map(job, chunks))
        else:
            parts = [job(c) for c in chunks]
        out = np.concatenate(parts, axis=0)
    if single:
        out = out[0]
    if len(steps) == grid.n_t + 1:
        return SpaceTimeField(grid, out)
    return RecordedField(grid, out, tuple(int(s) for s in steps))


@dataclass(frozen=True)
class RecordedField(SpaceTimeField):
    """Field stored only at a subset of time steps."""

    steps: tuple = ()

    @property
    def times(self):
        return np.asarray(self.steps) * self.grid.dt

    def at(self, step, x):
        return self.values[(..., self.steps.index(step)) + self.grid.site_index(x)]


def _run(params, coeffs, mu, eps, grid, seed, ids, steps):
    st = stepper(params, grid)
    B = len(ids)
    u = np.zeros((B,) + grid.shape)
    out = np.empty((B, len(steps)) + grid.shape)
    slot = {int(s): i for i, s in enumerate(steps)}
    if 0 in slot:
        out[:, slot[0]] = u
    const_b = coeffs.b.is_constant
    b0 = float(coeffs.b(0.0))
    noisy = eps > 0
    if noisy:
        rngs = [noise_stream(seed, r) for r in ids]
        amp = increment_amplitude(mu, grid, grid.dt) * np.sqrt(eps)
        const_sigma = coeffs.sigma.is_constant
        s0 = float(coeffs.sigma(0.0))
    for m in range(grid.n_t):
        if const_b:
            forcing = None if b0 == 0.0 else np.full_like(u, b0)
        else:
            forcing = coeffs.b(u)
        if noisy:
            dw_hat = draw_noise_hat(rngs, grid, amp)
            if const_sigma:
                u = st.step(u, forcing, noise_hat=s0 * dw_hat)
            else:
                u = st.step(u, forcing, noise=coeffs.sigma(u) * irfft(dw_hat, grid))
        else:
            u = st.step(u, forcing)
        _guard(u, m + 1)
        if m + 1 in slot:
            out[:, slot[m + 1]] = u
    return out


def draw_noise_hat(rngs, grid, amp):
    """rfft of one noise increment per generator, scaled by ``amp``."""
    z = np.stack([g.standard_normal(grid.shape) for g in rngs])
    return rfft(z, grid) * amp


def clt_rescale(u_eps, u_zero, eps, lam):
    """``(u_eps - u_zero) / (sqrt(eps) * lam)``."""
    if not (eps > 0 and lam > 0):
        raise ValueError("eps and lambda must be positive")
    if u_eps.grid != u_zero.grid:
        raise GridMismatch("fields live on different grids")
    return SpaceTimeField(u_eps.grid, (u_eps.values - u_zero.values) / (np.sqrt(eps) * lam))


def _window_index(grid, window):
    x = grid.coords()
    lo, hi = window
    idx = np.nonzero((x >= lo - 1e-12) & (x <= hi + 1e-12))[0]
    if idx.size == 0:
        raise ValueError(f"window {window} holds no lattice site")
    return idx


def holder_norm(field, spec, pair_budget=PAIR_BUDGET, seed=0):
    """Hölder norm ``sup|f| + sup |f(t,x) - f(s,y)| / (|t-s|^b1 + |x-y|^b2)`` on ``[0,T] x K``.

    All pairs are used when their number fits in ``pair_budget``; otherwise
    pairs are drawn with a fixed seed, stratified over dyadic classes of time
    and space lags so that both short and long lags are represented.
    """
    grid = field.grid
    v = np.asarray(field.values)
    if v.ndim != grid.d + 1:
        raise ValueError("holder_norm expects a single trajectory")
    idx = _window_index(grid, spec.window)
    sub = v[np.ix_(*([np.arange(v.shape[0])] + [idx] * grid.d))]
    t = np.asarray(field.times)
    xs = grid.coords()[idx]
    sup = float(np.max(np.abs(sub)))
    npts = sub.size
    if npts * (npts - 1) // 2 <= pair_budget:
        q = _exact_quotient(sub, t, xs, spec, grid.d)
    else:
        q = _sampled_quotient(sub, t, xs, spec, grid.d, pair_budget, seed)
    return sup + q


def _exact_quotient(sub, t, xs, spec, d):
    nt = sub.shape[0]
    if d == 1:
        best = 0.0
        nk = sub.shape[1]
        for lt in range(nt):
            dtp = (t[lt:] - t[:nt - lt])[:, None] if lt else 0.0
            for lx in range(-(nk - 1), nk):
                if lt == 0 and lx <= 0:
                    continue
                a = sub[lt:, max(lx, 0):nk + min(lx, 0)]
                b = sub[:nt - lt, max(-lx, 0):nk - max(lx, 0)]
                dx = abs(xs[abs(lx)] - xs[0])
                den = (np.abs(dtp) ** spec.beta1 if lt else 0.0) + dx ** spec.beta2
                best = max(best, float(np.max(np.abs(a - b) / den)))
        return best
    pts_t = np.repeat(t, sub[0].size)
    grids = np.meshgrid(*([xs] * d), indexing="ij")
    pts_x = np.tile(np.stack([g.ravel() for g in grids], axis=1), (nt, 1))
    vals = sub.reshape(-1)
    best = 0.0
    for i in range(vals.size - 1):
        dtp = np.abs(pts_t[i + 1:] - pts_t[i])
        dxp = np.sqrt(np.sum((pts_x[i + 1:] - pts_x[i]) ** 2, axis=1))
        den = dtp ** spec.beta1 + dxp ** spec.beta2
        best = max(best, float(np.max(np.abs(vals[i + 1:] - vals[i]) / den)))
    return best


def _dyadic_classes(nmax):
    out = [(0, 0)]
    lo = 1
    while lo <= nmax:
        out.append((lo, min(2 * lo - 1, nmax)))
        lo *= 2
    return out


def _sampled_quotient(sub, t, xs, spec, d, budget, seed):
    rng = np.random.default_rng(seed)
    nt = sub.shape[0]
    nk = sub.shape[1]
    dt = t[1] - t[0] if nt > 1 else 1.0
    dx = xs[1] - xs[0] if nk > 1 else 1.0
    tcls = _dyadic_classes(nt - 1)
    xcls = _dyadic_classes(nk - 1)
    per = max(1, budget // (len(tcls) * len(xcls)))
    best = 0.0
    for tlo, thi in tcls:
        for xlo, xhi in xcls:
            if thi == 0 and xhi == 0:
                continue
            lt = rng.integers(tlo, thi + 1, size=per)
            t0 = rng.integers(0, nt - lt)
            i0 = [t0]
            i1 = [t0 + lt]
            dist2 = 0.0
            for _ in range(d):
                lx = rng.integers(xlo, xhi + 1, size=per)
                x0 = rng.integers(0, nk - lx)
                flip = rng.random(per) < 0.5
                a, b = np.where(flip, x0 + lx, x0), np.where(flip, x0, x0 + lx)
                i0.append(a)
                i1.append(b)
                dist2 = dist2 + (lx * dx) ** 2
            diff = np.abs(sub[tuple(i1)] - sub[tuple(i0)])
            den = (lt * dt) ** spec.beta1 + np.sqrt(dist2) ** spec.beta2
            ok = den > 0
            if np.any(ok):
                best = max(best, float(np.max(diff[ok] / den[ok])))
    return best


@dataclass(frozen=True)
class HolderFit:
    time_slope: float
    space_slope: float
    time_lags: tuple
    space_lags: tuple


def _dyadic_lags(nmax):
    lags = []
    k = 1
    while k <= nmax:
        lags.append(k)
        k *= 2
    return lags


def _slope(lags, meds):
    # a flat direction has no defined exponent
    if np.min(meds) <= 0:
        return float("nan")
    return float(np.polyfit(np.log(lags), np.log(meds), 1)[0])


def fit_holder_exponents(field, window=None, start_step=0):
    """Log-log slopes of median absolute increments against dyadic time and space lags.

    Increments are pooled over replicas (leading axes), sites in ``window``
    and time steps from ``start_step``.  Lags run up to a quarter of the
    available range.
    """
    grid = field.grid
    v = np.asarray(field.values)
    if grid.d != 1:
        raise ValueError("exponent fitting is implemented for d = 1")
    if window is not None:
        v = v[..., _window_index(grid, window)]
    v = v[..., start_step:, :]
    nt, nk = v.shape[-2], v.shape[-1]
    tl = _dyadic_lags((nt - 1) // 4)
    xl = _dyadic_lags((nk - 1) // 4)
    if len(tl) < 4 or len(xl) < 4:
        raise TooFewLags(f"need 4 dyadic lags, have {len(tl)} in time and {len(xl)} in space")
    tm = [np.median(np.abs(v[..., k:, :] - v[..., :-k, :])) for k in tl]
    xm = [np.median(np.abs(v[..., k:] - v[..., :-k])) for k in xl]
    t_lag = np.asarray(tl) * grid.dt
    x_lag = np.asarray(xl) * grid.dx
    return HolderFit(_slope(t_lag, tm), _slope(x_lag, xm), tuple(t_lag), tuple(x_lag))
