"""Spatially homogeneous Gaussian noise described by its spectral density.

The spectral measure is ``mu(dxi) = psi(|xi|) dxi`` with ``psi`` radial.  The
H-space inner product is

    <f, g>_H = int psi(xi) F f(xi) conj(F g(xi)) dxi,

so white noise (``psi = 1``) gives ``<f, g>_H = (2 pi)^d int f g dx`` under
the transform convention of :mod:`fracshe.grid`.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import Inconclusive
from .grid import fourier_transform, inverse_fourier_transform
from .kernel import lattice_exponent

WHITE = "white"
RIESZ = "riesz"
TABULATED = "tabulated"


@dataclass(frozen=True)
class SpectralMeasure:
    """Radial spectral density of the spatial covariance.

    Parameters
    ----------
    kind : {"white", "riesz", "tabulated"}
    d : int
        Spatial dimension.
    beta : float, optional
        Riesz exponent, ``psi(xi) = |xi|^(beta - d)`` with ``0 < beta < d``.
    table : tuple of two tuples, optional
        ``(r, psi)`` samples of a tabulated radial density, linearly
        interpolated; zero beyond the last radius when the last sample is
        zero, power-law continued otherwise.
    """

    kind: str
    d: int = 1
    beta: float = None
    table: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (WHITE, RIESZ, TABULATED):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == RIESZ:
            if self.beta is None or not (0 < self.beta < self.d):
                raise ValueError(f"Riesz exponent must satisfy 0 < beta < d={self.d}")
        if self.kind == TABULATED:
            if self.table is None:
                raise ValueError("tabulated noise needs a (r, psi) table")
            r, p = (np.asarray(v, dtype=float) for v in self.table)
            if r.ndim != 1 or r.shape != p.shape or r.size < 2:
                raise ValueError("table must hold two equal-length 1-d sequences")
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ValueError("table radii must be increasing and nonnegative")
            if np.any(p < 0):
                raise ValueError("spectral density must be nonnegative")

    @classmethod
    def white(cls, d=1):
        return cls(WHITE, d)

    @classmethod
    def riesz(cls, beta, d=1):
        return cls(RIESZ, d, beta=float(beta))

    @classmethod
    def tabulated(cls, r, psi, d=1):
        return cls(TABULATED, d, table=(tuple(map(float, r)), tuple(map(float, psi))))

    @classmethod
    def from_csv(cls, path, d=1):
        r, p = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                r.append(float(row["r"]))
                p.append(float(row["psi"]))
        return cls.tabulated(r, p, d)

    @property
    def compact(self):
        return self.kind == TABULATED and self.table[1][-1] == 0.0

    def tail_exponent(self):
        """Exponent ``p`` with ``psi(r) ~ r^p`` as ``r -> inf``; ``-inf`` for compact support.

        Raises :class:`Inconclusive` when a table gives no usable exponent.
        """
        if self.kind == WHITE:
            return 0.0
        if self.kind == RIESZ:
            return self.beta - self.d
        if self.compact:
            return -np.inf
        r, p = (np.asarray(v) for v in self.table)
        m = max(3, r.size // 4)
        rr, pp = r[-m:], p[-m:]
        if np.any(pp <= 0) or np.any(rr <= 0):
            raise Inconclusive("tabulated density has no positive power-law tail")
        x, y = np.log(rr), np.log(pp)
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        ss = np.sum((y - y.mean()) ** 2)
        if ss > 0 and 1 - np.sum(resid ** 2) / ss < 0.99:
            raise Inconclusive("tabulated tail is not a clean power law")
        return float(slope)

    def density(self, r):
        """``psi`` at radius ``r`` (array)."""
        r = np.asarray(r, dtype=float)
        if self.kind == WHITE:
            return np.ones_like(r)
        if self.kind == RIESZ:
            with np.errstate(divide="ignore"):
                return np.where(r > 0, np.abs(r) ** (self.beta - self.d), np.inf)
        rt, pt = (np.asarray(v) for v in self.table)
        out = np.interp(r, rt, pt, right=0.0)
        if not self.compact:
            beyond = r > rt[-1]
            try:
                p = self.tail_exponent()
            except Inconclusive:
                p = 0.0
            out = np.where(beyond, pt[-1] * (np.maximum(r, rt[-1]) / rt[-1]) ** p, out)
        return out

    def lattice_weight(self, grid):
        """``psi`` on the full dual lattice (numpy FFT layout).

        For the Riesz kernel the singular zero mode receives the cell average
        of ``|xi|^(beta-d)``.
        """
        if grid.d != self.d:
            raise ValueError(f"measure has d={self.d} but grid has d={grid.d}")
        xs = grid.freqs(real=False)
        r = np.sqrt(sum(v ** 2 for v in xs))
        w = np.array(self.density(r), dtype=float)
        if self.kind == RIESZ:
            w[(0,) * grid.d] = riesz_cell_average(self.beta, grid.d, grid.dxi)
        return w


def riesz_cell_average(beta, d, h):
    """Average of ``|xi|^(beta - d)`` over the cube ``[-h/2, h/2]^d``."""
    a = h / 2.0
    if d == 1:
        return 2.0 * a ** beta / beta / h
    if d == 2:
        val, _ = integrate.quad(lambda th: (a / np.cos(th)) ** beta, 0.0, np.pi / 4)
        return 8.0 / beta * val / h ** 2
    raise NotImplementedError("cell average implemented for d <= 2")


@dataclass(frozen=True)
class IntegrabilityResult:
    finite: bool
    value: float
    tail_exponent: float


def check_integrability(mu, params, eta, cutoff=1e3):
    """Test ``int mu(dxi) / (1 + S_alpha(xi))^eta < inf``.

    ``finite`` comes from comparing power laws at infinity (and at the
    origin); ``value`` is the quadrature of the integral, over
    ``|xi| <= cutoff`` when it diverges.
    """
    if not (0 < eta <= 1):
        raise ValueError("eta must lie in ]0, 1]")
    if mu.d != params.d:
        raise ValueError("dimension mismatch between measure and parameters")
    d = mu.d
    p = mu.tail_exponent()
    if p == -np.inf:
        finite = True
    elif mu.kind == WHITE and d > 1:
        finite = eta > sum(1.0 / a for a in params.alpha)
    else:
        lo, hi = min(params.alpha), max(params.alpha)
        if p + d < lo * eta:
            finite = True
        elif p + d >= hi * eta:
            finite = False
        else:
            raise Inconclusive("anisotropic indices straddle the tail exponent")
    if mu.kind == RIESZ and mu.beta <= 0:
        finite = False
    value = _radial_quadrature(mu, params, eta, np.inf if finite else cutoff)
    return IntegrabilityResult(bool(finite), float(value), float(p))


def _radial_quadrature(mu, params, eta, rmax):
    al = params.alpha
    rt = mu.table[0][-1] if mu.kind == TABULATED else None
    if mu.compact:
        rmax = min(rmax, rt)
    brk = [b for b in (1.0, rt) if b is not None and b < rmax]

    def integrate_r(f):
        edges = [0.0] + sorted(brk) + [rmax]
        return sum(integrate.quad(f, lo, hi, limit=400)[0] for lo, hi in zip(edges, edges[1:]))

    if params.d == 1:
        return 2.0 * integrate_r(lambda r: mu.density(r) / (1.0 + r ** al[0]) ** eta)
    if params.d == 2:
        def radial(th):
            c, s = abs(np.cos(th)), abs(np.sin(th))
            return integrate_r(lambda r: mu.density(r) * r
                               / (1.0 + (r * c) ** al[0] + (r * s) ** al[1]) ** eta)
        return 4.0 * integrate.quad(radial, 0.0, np.pi / 2, limit=100)[0]
    raise NotImplementedError("quadrature implemented for d <= 2")


class HSpaceVector:
    """Element of H stored by its Fourier transform on the dual lattice (numpy layout)."""

    def __init__(self, coef, grid):
        self.coef = np.asarray(coef, dtype=complex)
        self.grid = grid

    @classmethod
    def from_field(cls, f, grid):
        return cls(fourier_transform(np.asarray(f, dtype=float), grid), grid)

    def to_field(self):
        return inverse_fourier_transform(self.coef, self.grid).real


def h_inner(phi, psi, mu):
    """``<phi, psi>_H = sum_xi psi(xi) F phi conj(F psi) dxi^d`` (real part)."""
    if phi.grid != psi.grid:
        raise ValueError("vectors live on different lattices")
    g = phi.grid
    w = mu.lattice_weight(g)
    val = np.sum(w * phi.coef * np.conj(psi.coef), axis=g.axes) * g.dxi ** g.d
    return np.real(val)


def h_norm_sq(f, mu, grid):
    """``||f||_H^2`` for a lattice field (or batch of fields)."""
    v = HSpaceVector.from_field(f, grid)
    return h_inner(v, v, mu)


def representer_multiplier(mu, grid):
    """rfft-layout multiplier turning ``h`` into the field ``r`` with ``int f r dx = <f, h>_H``."""
    w = mu.lattice_weight(grid)
    w = w[..., : grid.n // 2 + 1]
    return (2 * np.pi) ** grid.d * w


def _decay_rate(params, grid, real):
    return lattice_exponent(params, grid, real=real).real


def j_function(params, mu, t, grid):
    """``J(t) = int mu(dxi) |F G(t)(xi)|^2`` as a lattice sum."""
    if not (t > 0):
        raise ValueError("t must be positive")
    a = _decay_rate(params, grid, real=False)
    w = mu.lattice_weight(grid)
    return float(np.sum(w * np.exp(-2 * t * a)) * grid.dxi ** grid.d)


def j_integral_weights(params, grid, T, drift=0.0, real=False):
    """Per-mode ``int_0^T |symbol(s)|^2 exp(2 drift s) ds`` in closed form."""
    c = 2.0 * (_decay_rate(params, grid, real) - drift)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-c * T) / c
    return np.where(np.abs(c * T) < 1e-12, T, out)


def j_integral(params, mu, T, grid, drift=0.0):
    """``int_0^T J(s) ds``, exact in time and summed over the lattice.

    ``drift`` folds in a constant linear drift ``b(u) = drift * u``.
    """
    w = mu.lattice_weight(grid)
    return float(np.sum(w * j_integral_weights(params, grid, T, drift)) * grid.dxi ** grid.d)


@dataclass(frozen=True)
class SandwichResult:
    A: tuple
    B: float
    lower_ratio: float
    upper_ratio: float


def sandwich_check(params, mu, T, grid):
    """Compare ``A = int_0^T J`` with ``B = int mu / (1 + S_alpha)`` for one or several ``T``."""
    Ts = np.atleast_1d(T)
    B = check_integrability(mu, params, 1.0).value
    A = tuple(j_integral(params, mu, float(t), grid) for t in Ts)
    ratios = np.array(A) / B
    return SandwichResult(A, B, float(ratios.min()), float(ratios.max()))


def noise_stream(seed, replica=0):
    """Counter-based generator for one replica, derived from a 64-bit seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.Philox(ss))


def increment_amplitude(mu, grid, dt):
    """rfft-layout amplitude applied to the transform of i.i.d. N(0,1) site values."""
    w = mu.lattice_weight(grid)[..., : grid.n // 2 + 1]
    return np.sqrt(grid.size * grid.dxi ** grid.d * w * dt)


def sample_increment(mu, grid, dt, rng, amplitude=None):
    """Sample the noise increment over a time step of length ``dt``.

    ``rng`` is a ``numpy.random.Generator`` for one field or a sequence of
    them for a batch (one row per generator).  The result is a real density
    field ``W`` with ``Var(sum_x W g dx^d) = dt ||g||_H^2``.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    amp = increment_amplitude(mu, grid, dt) if amplitude is None else amplitude
    if isinstance(rng, np.random.Generator):
        z = rng.standard_normal(grid.shape)
    else:
        z = np.stack([g.standard_normal(grid.shape) for g in rng])
    zh = np.fft.rfftn(z, axes=grid.axes) * amp
    return np.fft.irfftn(zh, s=grid.shape, axes=grid.axes)
