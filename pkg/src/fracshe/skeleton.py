"""Linearised skeleton equation and the controlled fluctuation process.

For a control ``h`` in ``L^2(0, T; H)`` the skeleton ``Z^h`` solves

    Z(t) = int_0^t G(t-s) * [ b'(u0(s)) Z(s) + sigma(u0(s)) R h(s) ] ds,

with ``R`` the representer map of ``H`` (``int f R h = <f, h>_H``).  Controls
are piecewise constant on ``n_cells`` equal time cells and expanded on the
H-orthonormal real Fourier basis of :class:`~fracshe.grid.ModeTable`, so that
``||h||^2 = sum_cells dt_cell sum_m c[cell, m]^2``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch
from .fields import SpaceTimeField, _guard, draw_noise_hat, holder_norm, stepper
from .grid import ModeTable, irfft, rfft
from .noise import increment_amplitude, noise_stream
from .speed import SpeedSpec, validate_speed


@lru_cache(maxsize=16)
def mode_table(grid, mu):
    """H-orthonormal real Fourier basis for ``mu`` on ``grid`` (cached)."""
    return ModeTable(grid, mu.lattice_weight(grid))


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant control with coefficients ``coeffs[..., cell, mode]``.

    ``adapted`` marks controls built from information up to each cell start
    only; deterministic controls are trivially adapted.
    """

    grid: object
    mu: object
    coeffs: np.ndarray = field(repr=False)
    adapted: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim < 2:
            raise ValueError("coeffs must have shape (..., n_cells, n_modes)")
        nc, nm = c.shape[-2:]
        if nm != len(self.modes):
            raise ValueError(f"expected {len(self.modes)} modes, got {nm}")
        if nc < 1 or self.grid.n_t % nc:
            raise ValueError(f"n_cells={nc} must divide n_t={self.grid.n_t}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid, mu, n_cells):
        return cls(grid, mu, np.zeros((n_cells, len(mode_table(grid, mu)))))

    @property
    def modes(self):
        return mode_table(self.grid, self.mu)

    @property
    def n_cells(self):
        return self.coeffs.shape[-2]

    @property
    def cell_steps(self):
        return self.grid.n_t // self.n_cells

    @property
    def cell_dt(self):
        return self.grid.T / self.n_cells

    def norm(self):
        """``||h||_{L^2(0,T;H)}``."""
        return np.sqrt(self.cell_dt * np.sum(self.coeffs ** 2, axis=(-2, -1)))

    def scaled(self, factor):
        return ControlPath(self.grid, self.mu, self.coeffs * factor, self.adapted)

    def values(self):
        """Spatial fields ``h(cell)`` with shape ``(..., n_cells, *grid.shape)``."""
        return self.modes.synthesize(self.coeffs)

    def representers(self):
        """Fields ``R h(cell)``; ``R e_m = (2 pi)^d psi_m e_m`` on this basis."""
        tab = self.modes
        return tab.synthesize(self.coeffs * ((2 * np.pi) ** self.grid.d * tab.weight))


def control_norm(h):
    return h.norm()


def _check(grid, h):
    if h.grid != grid:
        raise GridMismatch("control and solver grids differ")


def _frozen(coeffs, u_zero, grid):
    v = np.asarray(u_zero.values if hasattr(u_zero, "values") else u_zero)
    if v.shape != (grid.n_t + 1,) + grid.shape:
        raise GridMismatch("u_zero must be a full trajectory on the solver grid")
    return coeffs.sigma(v), coeffs.b.deriv(v)


def solve_skeleton(params, coeffs, mu, u_zero, h, grid, record="all"):
    """Skeleton ``Z^h`` by exponential Euler with frozen ``sigma(u0)``, ``b'(u0)``.

    ``h`` may carry leading batch axes; the result then does too.
    """
    _check(grid, h)
    sig, bp = _frozen(coeffs, u_zero, grid)
    r = h.representers()
    return SpaceTimeField(grid, _skeleton_run(params, grid, sig, bp, r, h.cell_steps,
                                              record == "final"))


def _skeleton_run(params, grid, sig, bp, reps, cell_steps, final_only=False, start=0):
    st = stepper(params, grid)
    lead = reps.shape[:-grid.d - 1]
    z = np.zeros(lead + grid.shape)
    lin = np.any(bp != 0)
    out = None if final_only else np.zeros(lead + (grid.n_t + 1,) + grid.shape)
    for m in range(start, grid.n_t):
        cell = m // cell_steps
        if cell < reps.shape[-grid.d - 1]:
            f = sig[m] * reps[..., cell, :]
        else:
            f = 0.0
        if lin:
            f = f + bp[m] * z
        z = st.step(z, f if np.ndim(f) else None)
        if out is not None:
            out[..., m + 1, :] = z
    return z if final_only else out


def endpoint_representer(params, coeffs, mu, u_zero, grid, site, n_cells,
                         method="adjoint"):
    """Weights ``w[cell, m]`` with ``Z^h(T, site) = sum c[cell, m] w[cell, m]``.

    ``method="adjoint"`` runs one backward solve with the transposed step;
    ``method="columns"`` assembles the same map from forward skeleton solves,
    one unit control per column.
    """
    tab = mode_table(grid, mu)
    sig, bp = _frozen(coeffs, u_zero, grid)
    idx = grid.site_index(site)
    if grid.n_t % n_cells:
        raise ValueError(f"n_cells={n_cells} must divide n_t={grid.n_t}")
    cs = grid.n_t // n_cells
    rw = (2 * np.pi) ** grid.d * tab.weight
    if method == "columns":
        M = len(tab)
        w = np.zeros((n_cells, M))
        eye = tab.synthesize(np.eye(M) * rw)
        for c in range(n_cells):
            reps = np.zeros((M, n_cells) + grid.shape)
            reps[:, c] = eye
            z = _skeleton_run(params, grid, sig, bp, reps, cs, final_only=True, start=c * cs)
            w[c] = z[(slice(None),) + idx]
        return w
    if method != "adjoint":
        raise ValueError(f"unknown method {method!r}")
    st = stepper(params, grid)
    lam = np.zeros(grid.shape)
    lam[idx] = 1.0
    w = np.zeros((n_cells, len(tab)))
    for m in range(grid.n_t - 1, -1, -1):
        lh = rfft(lam, grid)
        g = irfft(np.conj(st.phi1) * lh, grid)
        w[m // cs] += tab.project(sig[m] * g)
        lam = irfft(np.conj(st.decay) * lh, grid) + bp[m] * g
    return w * rw


def skeleton_bound_scan(params, coeffs, mu, u_zero, grid, N_list, probes, spec):
    """Largest Hölder norm of ``Z^h`` over probe controls rescaled to ``||h|| = N``.

    Returns rows ``(N, max_norm)``; a bound uniform on balls grows at most linearly.
    """
    base = []
    for h in probes:
        nh = float(h.norm())
        if nh == 0:
            continue
        z = solve_skeleton(params, coeffs, mu, u_zero, h.scaled(1.0 / nh), grid)
        base.append(z)
    rows = []
    for N in N_list:
        best = 0.0
        for z in base:
            # the skeleton is linear in h
            best = max(best, holder_norm(SpaceTimeField(grid, N * z.values), spec))
        rows.append((float(N), best))
    return rows


def oscillating_controls(h, g, n_list):
    """``h_n(t) = h(t) + sin(n pi t / T) g(t)``, evaluated at cell midpoints; ``h_n -> h`` weakly."""
    tm = (np.arange(h.n_cells) + 0.5) / h.n_cells
    out = []
    for n in n_list:
        s = np.sin(n * np.pi * tm)[:, None]
        out.append(ControlPath(h.grid, h.mu, h.coeffs + s * g.coeffs, h.adapted))
    return out


def weak_continuity_probe(params, coeffs, mu, u_zero, h, g, n_list, spec, grid):
    """Rows ``(n, ||Z^{h_n} - Z^h||_holder)`` along an oscillating weakly convergent sequence."""
    z0 = solve_skeleton(params, coeffs, mu, u_zero, h, grid)
    rows = []
    for n, hn in zip(n_list, oscillating_controls(h, g, n_list)):
        zn = solve_skeleton(params, coeffs, mu, u_zero, hn, grid)
        rows.append((int(n), holder_norm(zn - z0, spec)))
    return rows


def solve_controlled(params, coeffs, mu, eps, speed, v, grid, seed=0, u_zero=None,
                     replicas=None, record="all"):
    """Controlled fluctuation ``Z^{eps, v} = (u^{eps, v} - u0) / (sqrt(eps) lambda)``.

    The noise is shifted by ``lambda v dt``, so that

        dZ = -A Z + [b(u0 + k Z) - b(u0)] / k dt + sigma(u0 + k Z) R v dt
             + lambda^-1 sigma(u0 + k Z) dW,        k = sqrt(eps) lambda.

    ``speed`` is a :class:`SpeedSpec` or the exponent ``rho``.  Replica ``r``
    uses ``noise_stream(seed, r)``; ``v`` may be one control for all replicas
    or carry a leading replica axis.
    """
    spd = validate_speed(speed) if not isinstance(speed, SpeedSpec) else validate_speed(speed.rho)
    if not eps > 0:
        raise ValueError("eps must be positive")
    _check(grid, v)
    if u_zero is None:
        from .fields import solve_deterministic
        u_zero = solve_deterministic(params, coeffs, grid)
    u0 = np.asarray(u_zero.values)
    lam = float(spd.lam(eps))
    kappa = float(spd.scale(eps))
    single = replicas is None
    ids = [0] if single else (list(range(replicas)) if np.isscalar(replicas) else list(replicas))
    reps = v.representers()
    if reps.ndim == grid.d + 1:
        reps = np.broadcast_to(reps, (len(ids),) + reps.shape)
    elif reps.shape[0] != len(ids):
        raise ValueError("control batch does not match the replica count")
    st = stepper(params, grid)
    rngs = [noise_stream(seed, r) for r in ids]
    amp = increment_amplitude(mu, grid, grid.dt) / lam
    cs = v.cell_steps
    z = np.zeros((len(ids),) + grid.shape)
    out = np.zeros((len(ids), grid.n_t + 1) + grid.shape) if record == "all" else None
    for m in range(grid.n_t):
        u = u0[m] + kappa * z
        s = coeffs.sigma(u)
        f = (coeffs.b(u) - coeffs.b(u0[m])) / kappa + s * reps[:, m // cs]
        noise = s * irfft(draw_noise_hat(rngs, grid, amp), grid)
        z = st.step(z, f, noise=noise)
        _guard(z, m + 1)
        if out is not None:
            out[:, m + 1] = z
    vals = z if out is None else out
    if single:
        vals = vals[0]
    return SpaceTimeField(grid, vals) if out is not None else vals
