"""Green kernel of the non-symmetric fractional operator on a periodic lattice.

The kernel ``G(t, .)`` is the density of a d-dimensional product of
independent stable laws with characteristic function

    exp(-t * sum_i |xi_i|^alpha_i * exp(-i delta_i pi/2 sgn xi_i)).

On the torus it is obtained by inverse FFT of that multiplier, which makes
the lattice kernel the periodisation of the whole-space density.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import AlphaOutOfRange, InterpOutOfRange, MassDefect, SkewOutOfRange
from .grid import GridSpec, apply_multiplier, inverse_fourier_transform

MASS_TOL = 1e-6
IM_TOL = 1e-10
CONV_TOL = 1e-3
SCALE_TOL = 1e-3
PROD_TOL = 1e-8
NEG_TOL = 1e-4
WRAP_TOL = 2e-2


@dataclass(frozen=True)
class StableParams:
    """Stability indices ``alpha`` and skewness ``delta``, one per axis."""

    alpha: tuple
    delta: tuple

    @property
    def d(self):
        return len(self.alpha)

    @property
    def alpha0(self):
        return min(self.alpha)

    def axis(self, i):
        return StableParams((self.alpha[i],), (self.delta[i],))


def validate_params(alpha, delta):
    """Check the admissible region and return :class:`StableParams`.

    Raises
    ------
    AlphaOutOfRange
        If some ``alpha_i`` is outside ``]0, 2]`` or equals 1.
    SkewOutOfRange
        If ``|delta_i| > min(alpha_i, 2 - alpha_i)``.
    """
    alpha = tuple(float(a) for a in np.atleast_1d(alpha))
    delta = tuple(float(s) for s in np.atleast_1d(delta))
    if len(alpha) != len(delta) or len(alpha) == 0:
        raise ValueError("alpha and delta must be non-empty and of equal length")
    for i, (a, s) in enumerate(zip(alpha, delta)):
        if not (0.0 < a <= 2.0) or a == 1.0:
            raise AlphaOutOfRange(f"alpha[{i}] = {a} is not in ]0,2] minus {{1}}")
        bound = min(a, 2.0 - a)
        if abs(s) > bound + 1e-15:
            raise SkewOutOfRange(f"|delta[{i}]| = {abs(s)} exceeds min(alpha, 2-alpha) = {bound}")
    return StableParams(alpha, delta)


def _as_axes(params, xi):
    if params.d == 1 and not isinstance(xi, (list, tuple)):
        return [np.asarray(xi, dtype=float)]
    if len(xi) != params.d:
        raise ValueError(f"expected {params.d} frequency components, got {len(xi)}")
    return [np.asarray(v, dtype=float) for v in xi]


def axis_exponent(alpha, delta, xi):
    """Per-axis exponent ``|xi|^alpha * exp(-i delta pi/2 sgn xi)``."""
    xi = np.asarray(xi, dtype=float)
    return np.abs(xi) ** alpha * np.exp(-1j * delta * np.pi / 2 * np.sign(xi))


def exponent(params, xi):
    """Characteristic exponent ``Lambda(xi)``, so that ``symbol = exp(-t Lambda)``."""
    out = 0j
    for a, s, v in zip(params.alpha, params.delta, _as_axes(params, xi)):
        out = out + axis_exponent(a, s, v)
    return out


def symbol(params, t, xi):
    """Fourier multiplier of the semigroup at time ``t`` and frequency ``xi``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return np.exp(-t * exponent(params, xi))


def s_alpha(params, xi):
    """``sum_i |xi_i|^alpha_i``."""
    return sum(np.abs(v) ** a for a, v in zip(params.alpha, _as_axes(params, xi)))


def lattice_exponent(params, grid, real=True, flip=True):
    """Exponent on the dual lattice in numpy FFT layout.

    ``flip=True`` evaluates at ``-xi`` (the convention for multipliers acting on
    numpy FFT coefficients).  On the Nyquist frequency, which has no partner of
    opposite sign, the exponent is replaced by its real part so the lattice
    multiplier stays exactly Hermitian.
    """
    _check_dim(params, grid)
    out = 0j
    for i, v in enumerate(grid.freqs(real=real)):
        a, s = params.alpha[i], params.delta[i]
        lam = axis_exponent(a, s, -v if flip else v)
        nyq = np.isclose(np.abs(v), np.pi / grid.dx)
        lam = np.where(nyq, lam.real, lam)
        out = out + lam
    return out


def lattice_multiplier(params, t, grid):
    """rfft-layout multiplier of convolution with ``G(t, .)``."""
    return np.exp(-t * lattice_exponent(params, grid))


def _check_dim(params, grid):
    if params.d != grid.d:
        raise ValueError(f"params have d={params.d} but grid has d={grid.d}")


@dataclass(frozen=True)
class KernelGrid:
    """Immutable lattice kernel ``G(t, .)`` in density units (centred, x = 0 at index n/2)."""

    params: StableParams
    t: float
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    symbol_cache: np.ndarray = field(repr=False)
    im_residue: float
    mass: float
    wrapped_mass: float

    @property
    def min_value(self):
        return float(self.values.min())

    def axis_kernel(self, i):
        return green_on_grid(self.params.axis(i), self.t,
                             GridSpec(self.grid.L, self.grid.n, self.grid.T, self.grid.n_t, 1),
                             check_wrap=False)


def green_on_grid(params, t, grid, *, mass_tol=MASS_TOL, im_tol=IM_TOL,
                  wrap_tol=WRAP_TOL, check_wrap=True):
    """Evaluate ``G(t, .)`` on the lattice by inverse FFT of the symbol.

    Raises
    ------
    MassDefect
        When the lattice mass is off by more than ``mass_tol`` or, with
        ``check_wrap``, when more than ``wrap_tol`` of the whole-space mass
        lies outside the window; ``required_L`` then holds the smallest
        doubling of ``L`` that fits.
    """
    if not (t > 0):
        raise ValueError("the kernel is only materialised for t > 0")
    return _green_cached(params, float(t), grid, float(mass_tol), float(im_tol),
                         float(wrap_tol), bool(check_wrap))


@lru_cache(maxsize=64)
def _green_cached(params, t, grid, mass_tol, im_tol, wrap_tol, check_wrap):
    _check_dim(params, grid)
    sym = np.exp(-t * lattice_exponent(params, grid, real=False, flip=False))
    raw = inverse_fourier_transform(sym, grid)
    sup = np.abs(raw.real).max()
    im_residue = float(np.abs(raw.imag).max() / sup)
    if im_residue > im_tol:
        raise ArithmeticError(f"imaginary residue {im_residue:.3e} exceeds {im_tol:.1e}")
    values = np.ascontiguousarray(raw.real)
    mass = float(values.sum() * grid.dx ** grid.d)
    wrapped = wrapped_mass(params, t, grid.L) if check_wrap else float("nan")
    if abs(mass - 1.0) > mass_tol:
        raise MassDefect(f"lattice mass {mass!r} deviates from 1 by more than {mass_tol}",
                         required_L=required_length(params, t, grid.L, wrap_tol))
    if check_wrap and wrapped > wrap_tol:
        req = required_length(params, t, grid.L, wrap_tol)
        raise MassDefect(f"{wrapped:.3e} of the kernel mass lies outside the window of "
                         f"side L={grid.L}; need L >= {req}", required_L=req)
    values.setflags(write=False)
    sym.setflags(write=False)
    return KernelGrid(params, t, grid, values, sym, im_residue, mass, wrapped)


def axis_mass_inside(alpha, delta, t, a):
    """Mass of the 1-d kernel ``G(t, .)`` on ``[-a, a]``, by Fourier quadrature."""
    c = np.cos(delta * np.pi / 2)
    s = np.sin(delta * np.pi / 2)

    def re_sym(xi):
        r = t * xi ** alpha
        return np.exp(-r * c) * np.cos(r * s)

    head, _ = integrate.quad(lambda u: re_sym(u / a) * np.sinc(u / np.pi), 0.0, np.pi,
                             limit=200, epsabs=1e-13)
    tail, _ = integrate.quad(lambda u: re_sym(u / a) / u, np.pi, np.inf, weight="sin",
                             wvar=1.0, limlst=200, epsabs=1e-13)
    return 2.0 / np.pi * (head + tail)


def wrapped_mass(params, t, L):
    """Whole-space kernel mass outside the window ``[-L/2, L/2)^d``."""
    inside = 1.0
    for a, s in zip(params.alpha, params.delta):
        inside *= axis_mass_inside(a, s, t, L / 2.0)
    return max(0.0, 1.0 - inside)


def required_length(params, t, L, wrap_tol=WRAP_TOL, max_doublings=40):
    """Smallest ``L * 2**k`` whose window holds all but ``wrap_tol`` of the mass."""
    for _ in range(max_doublings):
        if wrapped_mass(params, t, L) <= wrap_tol:
            return L
        L *= 2.0
    return float("inf")


def auto_grid(params, t, L0=40.0, dx=None, n0=1024, wrap_tol=WRAP_TOL, n_max=2 ** 20,
              T=1.0, n_t=1):
    """Grid whose window is doubled until the wrapped mass is below ``wrap_tol``.

    The spacing ``dx`` (default ``L0 / n0``) is kept fixed, so ``n`` doubles
    with ``L``.  Raises :class:`MassDefect` if that would exceed ``n_max``.
    """
    d = params.d
    dx = L0 / n0 if dx is None else dx
    L = required_length(params, t, L0, wrap_tol)
    n = 1 << int(np.ceil(np.log2(max(8, L / dx))))
    if n > n_max or not np.isfinite(L):
        raise MassDefect(f"window L={L} at spacing {dx} needs n={n} > n_max={n_max}",
                         required_L=L)
    return GridSpec(n * dx, n, T, n_t, d)


def convolve(f, g, grid):
    """Circular convolution of two centred lattice fields (density-weighted by dx^d)."""
    ax = grid.axes
    fs = np.fft.ifftshift(f, axes=ax)
    gs = np.fft.ifftshift(g, axes=ax)
    out = np.fft.irfftn(np.fft.rfftn(fs, axes=ax) * np.fft.rfftn(gs, axes=ax),
                        s=grid.shape, axes=ax) * grid.dx ** grid.d
    return np.fft.fftshift(out, axes=ax)


def semigroup_residual(params, t, s, grid):
    """L1 lattice norm of ``G(t+s) - G(t) * G(s)``."""
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    gts = green_on_grid(params, t + s, grid).values
    conv = convolve(green_on_grid(params, t, grid).values, green_on_grid(params, s, grid).values,
                    grid)
    return float(np.abs(gts - conv).sum() * grid.dx ** grid.d)


def cubic_interp(xs, ys, xq):
    """Local four-point Lagrange interpolation on a uniform grid."""
    h = xs[1] - xs[0]
    u = (np.asarray(xq) - xs[0]) / h
    j = np.floor(u).astype(int)
    if np.any(j < 1) or np.any(j > len(xs) - 3):
        raise InterpOutOfRange("query points leave the interior of the interpolation grid")
    f = u - j
    y0, y1, y2, y3 = ys[j - 1], ys[j], ys[j + 1], ys[j + 2]
    return (-f * (f - 1) * (f - 2) / 6 * y0 + (f + 1) * (f - 1) * (f - 2) / 2 * y1
            - (f + 1) * f * (f - 2) / 2 * y2 + (f + 1) * f * (f - 1) / 6 * y3)


def scaling_residual(params, t, grid):
    """``max_x |G(t,x) - t^(-1/alpha) G(1, t^(-1/alpha) x)|`` with interpolation from t = 1."""
    if params.d != 1:
        raise ValueError("scaling check is one-dimensional")
    if not (t > 0):
        raise ValueError("t must be positive")
    a = params.alpha[0]
    x = grid.coords()
    g1 = green_on_grid(params, 1.0, grid).values
    gt = green_on_grid(params, t, grid).values
    c = t ** (-1.0 / a)
    q = c * x
    if np.any(q < x[0]) or np.any(q > grid.L / 2):
        raise InterpOutOfRange(f"t^(-1/alpha) x leaves the window for t={t}")
    # the lattice kernel is periodic, so the stencil may wrap at the window edge
    xp = np.concatenate([x[:1] - grid.dx, x, x[-1] + grid.dx * np.arange(1, 3)])
    yp = np.concatenate([g1[-1:], g1, g1[:2]])
    rhs = c * cubic_interp(xp, yp, q)
    return float(np.abs(gt - rhs).max())


def tail_envelope(params, grid):
    """Fitted constant ``max G(1,x) (1 + |x|^(1+alpha))`` over ``|x| <= L/4``.

    The outer half of the window is left out because the periodised kernel
    there carries the mass of neighbouring images.
    """
    if params.d != 1:
        raise ValueError("tail envelope is one-dimensional")
    a = params.alpha[0]
    x = grid.coords()
    g = green_on_grid(params, 1.0, grid).values
    inner = np.abs(x) <= grid.L / 4
    return float(np.max(g[inner] * (1.0 + np.abs(x[inner]) ** (1.0 + a))))


def heat_kernel(t, x, d=1):
    """Closed-form kernel of ``alpha = 2, delta = 0``: ``(4 pi t)^(-d/2) exp(-|x|^2 / 4t)``."""
    x = np.asarray(x, dtype=float)
    r2 = x ** 2 if d == 1 else np.sum(x ** 2, axis=0)
    return (4 * np.pi * t) ** (-d / 2) * np.exp(-r2 / (4 * t))


def smooth(field, params, t, grid):
    """Apply the semigroup ``G(t) *`` to a lattice field (or a batch of them)."""
    return apply_multiplier(field, lattice_multiplier(params, t, grid), grid)
