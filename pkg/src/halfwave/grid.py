"""Uniform half-line discretization with the Dirichlet sine basis.

The three-dimensional problem is restricted to the spherically symmetric
sector via u(r) = r*psi(r), which turns the Laplacian into -d^2/dr^2 with
Dirichlet conditions at r = 0 and at the artificial boundary r = L.  On the
uniform grid r_j = j*h (j = 1..N, L = (N+1)*h) the sine modes
sin(k_m r) with k_m = m*pi/L diagonalize -d^2/dr^2 exactly, so |p| and any
power of it act as multipliers in the transformed representation.

The type-I discrete sine transform with orthonormal scaling is unitary and
its own inverse, which makes Parseval hold to machine precision and keeps
the trapezoidal inner product h*sum(conj(u)*v) consistent between the sample
and coefficient sides (the Dirichlet endpoints contribute nothing).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dst, dct


class GridError(ValueError):
    """Invalid grid construction or mismatched grids."""


class RadialGrid:
    """Uniform Dirichlet grid on (0, L) with its sine-basis momentum nodes.

    Immutable after construction; transform plans are stateless scipy calls,
    so a grid can be shared freely across workers.
    """

    __slots__ = ("n_points", "h", "r", "k")

    def __init__(self, n_points: int, h: float):
        if n_points < 8:
            raise GridError(f"n_points must be >= 8, got {n_points}")
        if not (h > 0):
            raise GridError(f"spacing h must be positive, got {h}")
        object.__setattr__(self, "n_points", int(n_points))
        object.__setattr__(self, "h", float(h))
        j = np.arange(1, self.n_points + 1, dtype=float)
        r = j * self.h
        k = j * (np.pi / self.extent)
        r.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "k", k)

    def __setattr__(self, name, value):
        raise AttributeError("RadialGrid is immutable")

    @property
    def extent(self) -> float:
        """Domain length L = (N+1)*h."""
        return (self.n_points + 1) * self.h

    @property
    def dk(self) -> float:
        """Momentum resolution pi/L."""
        return np.pi / self.extent

    @property
    def k_max(self) -> float:
        return float(self.k[-1])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RadialGrid)
            and self.n_points == other.n_points
            and self.h == other.h
        )

    def __hash__(self) -> int:
        return hash((self.n_points, self.h))

    def __repr__(self) -> str:
        return f"RadialGrid(n_points={self.n_points}, h={self.h})"


def build_radial_grid(n_points: int, h: float) -> RadialGrid:
    """Construct a grid; momentum resolution dk = pi/L is derived."""
    return RadialGrid(n_points, h)


@dataclass
class WaveFunction:
    """Complex samples of u(r_j) on a grid, with the h-weighted L2 pairing."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise GridError(
                f"values shape {v.shape} does not match grid ({self.grid.n_points},)"
            )
        self.values = v

    def norm(self) -> float:
        return float(np.sqrt(self.grid.h) * np.linalg.norm(self.values))

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.values.copy())

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if n == 0.0:
            raise GridError("cannot normalize the zero wavefunction")
        return WaveFunction(self.grid, self.values / n)


@dataclass
class SpectralCoefficients:
    """Sine-basis coefficients; orthonormal DST-I keeps Parseval exact."""

    grid: RadialGrid
    values: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(self.grid.h) * np.linalg.norm(self.values))


def sine_transform(psi: WaveFunction) -> SpectralCoefficients:
    """Forward DST-I (orthonormal).  Mode sin(k_m r) maps to coefficient m."""
    return SpectralCoefficients(psi.grid, dst(psi.values, type=1, norm="ortho"))


def inverse_sine_transform(c: SpectralCoefficients) -> WaveFunction:
    """Inverse transform; DST-I with orthonormal scaling is an involution."""
    return WaveFunction(c.grid, dst(c.values, type=1, norm="ortho"))


def _dst_ortho(values: np.ndarray) -> np.ndarray:
    return dst(values, type=1, norm="ortho")


def apply_k_multiplier(grid: RadialGrid, values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """idst(mult * dst(values)): the basic diagonal-operator apply."""
    return _dst_ortho(mult * _dst_ortho(values))


def differentiate(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Spectral d/dr: sine coefficients become a cosine series term-by-term.

    u = sum b_m sin(k_m r)  =>  u' = sum b_m k_m cos(k_m r), evaluated at the
    nodes through a zero-padded DCT-I of length N+2.
    """
    n = grid.n_points
    c = _dst_ortho(values)
    a = np.zeros(n + 2, dtype=c.dtype)
    a[1 : n + 1] = grid.k * c
    # DCT-I: y_j = x_0 + (-1)^j x_{N+1} + 2 sum_m x_m cos(pi m j/(N+1))
    y = dct(a, type=1)
    return y[1 : n + 1] / np.sqrt(2.0 * (n + 1))


def weighted_norm(psi: WaveFunction, s: float) -> float:
    """|| <r>^s psi || with <r> = sqrt(1 + r^2), trapezoidal quadrature.

    The Dirichlet endpoints carry zero samples, so the trapezoid rule reduces
    to h * sum over interior nodes and weighted_norm(psi, 0) equals norm().
    """
    if abs(s) > 4:
        raise GridError(f"weight exponent |s| <= 4 required, got {s}")
    w = (1.0 + psi.grid.r**2) ** (s / 2.0)
    return float(np.sqrt(psi.grid.h) * np.linalg.norm(w * psi.values))


def inner(phi: WaveFunction, psi: WaveFunction) -> complex:
    """Sesquilinear pairing h * sum(conj(phi) * psi); conjugate-symmetric."""
    if phi.grid != psi.grid:
        raise GridError("inner product requires matching grids")
    return complex(phi.grid.h * np.vdot(phi.values, psi.values))


def boundary_mass(psi: WaveFunction, fraction: float = 0.9) -> float:
    """Probability mass at r > fraction*L; the runs flag breaches of 1e-6."""
    sel = psi.grid.r > fraction * psi.grid.extent
    return float(psi.grid.h * np.sum(np.abs(psi.values[sel]) ** 2))
