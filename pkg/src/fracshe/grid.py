"""Periodic space-time lattice and the Fourier machinery shared by all solvers.

The whole space R^d is replaced by the torus [-L/2, L/2)^d sampled at ``n``
points per axis.  Continuous Fourier transforms use the convention

    F f(xi) = int exp(+i xi.x) f(x) dx,      f(x) = (2 pi)^-d int exp(-i xi.x) F f(xi) dxi,

so that the characteristic function of a density is its Fourier transform.
numpy's forward FFT carries the opposite sign, hence every Fourier multiplier
``m(xi)`` is applied to ``numpy.fft`` coefficients as ``m(-xi)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatch


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice of ``n**d`` sites with side ``L`` and ``n_t`` time steps up to ``T``."""

    L: float
    n: int
    T: float = 1.0
    n_t: int = 1
    d: int = 1

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (self.T > 0):
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n_t < 1:
            raise ValueError(f"n_t must be >= 1, got {self.n_t}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")

    @property
    def dx(self):
        return self.L / self.n

    @property
    def dt(self):
        return self.T / self.n_t

    @property
    def dxi(self):
        return 2.0 * np.pi / self.L

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n ** self.d

    @property
    def axes(self):
        """Trailing array axes holding the spatial lattice."""
        return tuple(range(-self.d, 0))

    @property
    def origin(self):
        """Lattice index of x = 0 along each axis."""
        return self.n // 2

    def coords(self):
        """Per-axis site coordinates ``(j - n/2) * dx``."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    def mesh(self):
        return np.meshgrid(*([self.coords()] * self.d), indexing="ij")

    def times(self):
        return np.arange(self.n_t + 1) * self.dt

    def site_index(self, x):
        """Nearest lattice index tuple for a point ``x`` (scalar or length-d)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size == 1 and self.d > 1:
            x = np.repeat(x, self.d)
        j = np.rint(x / self.dx).astype(int) + self.n // 2
        if np.any(j < 0) or np.any(j >= self.n):
            raise ValueError(f"point {x} lies outside the window [-L/2, L/2)")
        return tuple(int(v) for v in j)

    def int_freqs(self):
        """Signed integer frequencies in numpy FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    def freqs(self, real=False):
        """Angular frequencies as ``d`` broadcastable arrays.

        With ``real=True`` the last axis follows ``rfftn`` layout.
        """
        full = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        out = []
        for i in range(self.d):
            v = half if (real and i == self.d - 1) else full
            shape = [1] * self.d
            shape[i] = v.size
            out.append(v.reshape(shape))
        return out

    def with_time(self, T=None, n_t=None):
        return GridSpec(self.L, self.n, self.T if T is None else T,
                        self.n_t if n_t is None else n_t, self.d)


def check_same_grid(a, b):
    if a != b:
        raise GridMismatch(f"grids differ: {a} vs {b}")


def rfft(field, grid):
    return np.fft.rfftn(field, axes=grid.axes)


def irfft(coef, grid):
    return np.fft.irfftn(coef, s=grid.shape, axes=grid.axes)


def apply_multiplier(field, multiplier, grid):
    """Convolve ``field`` with the kernel whose numpy-ordered rfft multiplier is given."""
    return irfft(rfft(field, grid) * multiplier, grid)


def fourier_transform(field, grid):
    """Continuous Fourier transform of a lattice field at the dual lattice (numpy order).

    The phase of the window offset is included so that the result
    approximates ``int exp(i xi.x) f(x) dx`` with ``x`` the true coordinate.
    """
    n, d = grid.n, grid.d
    coef = np.fft.ifftn(np.fft.ifftshift(field, axes=grid.axes), axes=grid.axes)
    return coef * (n * grid.dx) ** d


def inverse_fourier_transform(coef, grid):
    """Inverse of :func:`fourier_transform`."""
    out = np.fft.fftn(coef, axes=grid.axes) / grid.L ** grid.d
    return np.fft.fftshift(out, axes=grid.axes)


class ModeTable:
    """Real Fourier basis of the lattice, orthonormal for a diagonal spectral weight.

    Each mode is ``cos(xi_k . x)`` or ``sin(xi_k . x)`` divided by its norm in
    the weighted space, where ``||f||^2 = sum_k weight(xi_k) |F f(xi_k)|^2 dxi^d``.
    Frequencies with zero weight carry no mass in that space and are left out.
    """

    def __init__(self, grid, weight):
        self.grid = grid
        n, d = grid.n, grid.d
        weight = np.broadcast_to(np.asarray(weight, dtype=float), grid.shape)
        ints = grid.int_freqs()
        kk = np.stack(np.meshgrid(*([ints] * d), indexing="ij"), axis=-1).reshape(-1, d)
        neg = (-kk) % n
        neg = np.where(neg >= n // 2, neg - n, neg)
        # canonical representative of each +-k pair: lexicographically larger tuple
        flat = np.ravel_multi_index(tuple((kk % n).T), grid.shape)
        flat_neg = np.ravel_multi_index(tuple((neg % n).T), grid.shape)
        selfconj = flat == flat_neg
        keep = selfconj | _lex_greater(kk, neg)
        w = weight.reshape(-1)
        N = grid.size
        scale = grid.dx ** (2 * d) * grid.dxi ** d
        rows = []
        for i in np.nonzero(keep)[0]:
            if selfconj[i]:
                nsq = w[i] * N ** 2 * scale
                kinds = (0,)
            else:
                nsq = (w[i] + w[flat_neg[i]]) * N ** 2 / 4.0 * scale
                kinds = (0, 1)
            if nsq <= 0:
                continue
            for kind in kinds:
                rows.append((i, kind, np.sqrt(nsq)))
        rows.sort(key=lambda r: (np.abs(kk[r[0]]).sum(), tuple(np.abs(kk[r[0]])),
                                 tuple(-kk[r[0]]), r[1]))
        sel = np.array([r[0] for r in rows], dtype=int)
        self.k = kk[sel]
        self.kind = np.array([r[1] for r in rows], dtype=int)
        self.norm = np.array([r[2] for r in rows])
        self.selfconj = selfconj[sel]
        self.pos = flat[sel]
        self.neg = flat_neg[sel]
        self.sign = np.where(self.k.sum(axis=1) % 2 == 0, 1.0, -1.0)
        self.weight = w[sel]

    def __len__(self):
        return len(self.kind)

    @cached_property
    def xi(self):
        return self.k * self.grid.dxi

    def synthesize(self, coeffs):
        """Spatial field ``sum_m coeffs[..., m] e_m`` on the lattice."""
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        N = self.grid.size
        F = np.zeros(lead + (N,), dtype=complex)
        amp = coeffs * (self.sign / self.norm)
        cos = self.kind == 0
        sc = cos & self.selfconj
        pc = cos & ~self.selfconj
        sn = self.kind == 1
        F[..., self.pos[sc]] += amp[..., sc] * N
        F[..., self.pos[pc]] += amp[..., pc] * (N / 2.0)
        F[..., self.neg[pc]] += amp[..., pc] * (N / 2.0)
        F[..., self.pos[sn]] += amp[..., sn] * (-0.5j * N)
        F[..., self.neg[sn]] += amp[..., sn] * (0.5j * N)
        F = F.reshape(lead + self.grid.shape)
        return np.fft.ifftn(F, axes=self.grid.axes).real

    def project(self, field):
        """Lattice dot products ``sum_x field(x) e_m(x)`` for every mode (adjoint of synthesize)."""
        field = np.asarray(field, dtype=float)
        lead = field.shape[:-self.grid.d]
        G = np.fft.fftn(field, axes=self.grid.axes).reshape(lead + (self.grid.size,))
        g = G[..., self.pos]
        val = np.where(self.kind == 0, g.real, -g.imag)
        return val * (self.sign / self.norm)


def _lex_greater(a, b):
    """Row-wise strict lexicographic comparison ``a > b``."""
    out = np.zeros(a.shape[0], dtype=bool)
    decided = np.zeros(a.shape[0], dtype=bool)
    for j in range(a.shape[1]):
        gt = (a[:, j] > b[:, j]) & ~decided
        lt = (a[:, j] < b[:, j]) & ~decided
        out |= gt
        decided |= gt | lt
    return out
