"""Functional calculus: smoothed cutoffs, dyadic shells, f(H), f(A), commutators.

Cutoffs are mollified piecewise-linear ramps: a linear ramp over
[c - delta + w, c + delta - w] convolved with a polynomial bump of half-width
w = rho*delta.  The convolution has a closed piecewise-polynomial form through
the bump's first and second antiderivatives, so the cutoff, its derivative and
second derivative all evaluate exactly and the transition occupies exactly
[c - delta, c + delta].

Dyadic shells are built in square-partition form: with s_m a smoothed step-up
at the edge 2^-m, the shell profile is
    e_n = sin(pi/2 s_{n+1}) * cos(pi/2 s_n),
so that sum_n e_n^2 telescopes exactly and the complement is again a smooth
profile.  This avoids the square root of a vanishing function, keeping every
profile as smooth as the underlying ramp (C^{p-1} for a degree-p bump).

f(H) is a matrix-free Chebyshev filter with a measured sup-norm certificate;
f(A) goes through the Mellin representation (A is -i d/dx on the logarithmic
half-line), with a dilation-group quadrature as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.fft import fft, ifft, fftfreq, dct
from scipy.interpolate import make_interp_spline

from halfwave.grid import RadialGrid, WaveFunction, apply_k_multiplier, sine_transform
from halfwave.operators import (
    OperatorHandle,
    PotentialSpec,
    ParameterError,
    DilationEvaluator,
    KMultiplier,
    RMultiplier,
    apply_hamiltonian,
    commutator_H_A_op,
    fractional_momentum_op,
)

# a dyadic shell must span at least this many momentum nodes to be resolvable
RESOLUTION_FACTOR = 5

FILTER_DEGREE_CAP = 200_000


class FilterCapError(RuntimeError):
    """Chebyshev degree cap reached without meeting the tolerance."""


class MellinDomainError(ValueError):
    """State has appreciable mass where log-resampling is unreliable."""


# ---------------------------------------------------------------------------
# Smooth cutoffs
# ---------------------------------------------------------------------------

def _bump_antiderivatives(power: int) -> tuple[Polynomial, Polynomial, Polynomial]:
    raw = Polynomial([1.0, 0.0, -1.0]) ** power
    mass = raw.integ()(1.0) - raw.integ()(-1.0)
    g = raw / mass
    g_int = g.integ()
    big_g = g_int - g_int(-1.0)          # CDF, 0 at -1, 1 at +1
    big_i_raw = big_g.integ()
    big_i = big_i_raw - big_i_raw(-1.0)  # second antiderivative, I(x>=1) = x
    return g, big_g, big_i


_BUMP_CACHE: dict[int, tuple[Polynomial, Polynomial, Polynomial]] = {}


def _bump(power: int) -> tuple[Polynomial, Polynomial, Polynomial]:
    if power not in _BUMP_CACHE:
        _BUMP_CACHE[power] = _bump_antiderivatives(power)
    return _BUMP_CACHE[power]


class SmoothCutoff:
    """Smoothed step or bump with transition exactly inside [c-delta, c+delta].

    kind "step_up": 0 for lam <= c - delta, 1 for lam >= c + delta, monotone,
    with sup|F'| = 1/(2 delta (1 - rho)) and |F''| <= C/delta^2.
    kind "step_down" is the complement; kind "bump" is the product of a
    step-up and a step-down meeting at c (support [c - delta, c + delta]).
    """

    def __init__(self, kind: str, c: float, delta: float, rho: float = 0.1, power: int = 4):
        if delta <= 0:
            raise ParameterError(f"cutoff width must be positive, got {delta}")
        if not (0 < rho < 0.5):
            raise ParameterError("mollifier fraction rho must lie in (0, 1/2)")
        if kind not in ("step_up", "step_down", "bump"):
            raise ParameterError(f"unknown cutoff kind {kind!r}")
        self.kind = kind
        self.c = float(c)
        self.delta = float(delta)
        self.rho = float(rho)
        self.power = int(power)
        if kind == "bump":
            half = delta / 2.0
            self._up = SmoothCutoff("step_up", c - half, half, rho, power)
            self._down = SmoothCutoff("step_down", c + half, half, rho, power)
        else:
            self._w = rho * delta
            self._a = self.c - delta + self._w
            self._b = self.c + delta - self._w
            self._slope = 1.0 / (self._b - self._a)

    # -- evaluators ---------------------------------------------------------

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "bump":
            return self._up(lam) * self._down(lam)
        val = self._slope * self._w * (self._ii((lam - self._a) / self._w)
                                       - self._ii((lam - self._b) / self._w))
        val = np.clip(val, 0.0, 1.0)
        return val if self.kind == "step_up" else 1.0 - val

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "bump":
            return self._up.derivative(lam) * self._down(lam) + self._up(lam) * self._down.derivative(lam)
        val = self._slope * (self._gg((lam - self._a) / self._w)
                             - self._gg((lam - self._b) / self._w))
        return val if self.kind == "step_up" else -val

    def second_derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "bump":
            return (self._up.second_derivative(lam) * self._down(lam)
                    + 2.0 * self._up.derivative(lam) * self._down.derivative(lam)
                    + self._up(lam) * self._down.second_derivative(lam))
        val = (self._slope / self._w) * (self._g((lam - self._a) / self._w)
                                         - self._g((lam - self._b) / self._w))
        return val if self.kind == "step_up" else -val

    def _g(self, x):
        g, _, _ = _bump(self.power)
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=float)
        inside = np.abs(x) < 1.0
        out[inside] = g(x[inside])
        return out

    def _gg(self, x):
        _, big_g, _ = _bump(self.power)
        x = np.asarray(x)
        out = np.where(x >= 1.0, 1.0, 0.0)
        inside = np.abs(x) < 1.0
        out[inside] = big_g(x[inside])
        return out

    def _ii(self, x):
        _, _, big_i = _bump(self.power)
        x = np.asarray(x)
        out = np.where(x >= 1.0, x, 0.0)
        inside = np.abs(x) < 1.0
        out[inside] = big_i(x[inside])
        return out

    # -- metadata -----------------------------------------------------------

    @property
    def limits(self) -> tuple[float, float]:
        """(F(-inf), F(+inf))."""
        if self.kind == "step_up":
            return (0.0, 1.0)
        if self.kind == "step_down":
            return (1.0, 0.0)
        return (0.0, 0.0)

    @property
    def derivative_support(self) -> tuple[float, float]:
        return (self.c - self.delta, self.c + self.delta)

    @property
    def breakpoints(self) -> list[float]:
        """Knots of the piecewise-polynomial structure (for exact quadrature)."""
        if self.kind == "bump":
            return sorted(set(self._up.breakpoints + self._down.breakpoints))
        return [self._a - self._w, self._a + self._w, self._b - self._w, self._b + self._w]

    def fourier_of_derivative(self, xi) -> np.ndarray:
        """phi(xi) = int F'(c) e^{-i xi c} dc, Gauss-Legendre per smooth segment.

        F itself is a step (not integrable); its transform is only ever used
        through F', i.e. against at least one power of the group variable.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return _segment_fourier(self.derivative, self.derivative_support,
                                self.breakpoints, xi)

    def __repr__(self) -> str:
        return f"SmoothCutoff({self.kind}, c={self.c}, delta={self.delta})"


def _segment_fourier(func: Callable, support: tuple[float, float],
                     knots: list[float], xi: np.ndarray) -> np.ndarray:
    """int func(c) e^{-i xi c} dc over [support], Gauss-Legendre per segment.

    The integrand is polynomial between knots, so per-segment quadrature with
    enough nodes for the oscillation is exact to roundoff.
    """
    lo, hi = support
    edges = sorted({lo, hi, *[k for k in knots if lo < k < hi]})
    out = np.zeros(len(xi), dtype=complex)
    xi_max = float(np.max(np.abs(xi))) if len(xi) else 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(24, int(2.0 * xi_max * (b - a) / np.pi) + 16)
        n_sub = max(1, (n + 47) // 48)
        sub = np.linspace(a, b, n_sub + 1)
        nodes, weights = np.polynomial.legendre.leggauss(min(n, 48))
        for sa, sb in zip(sub[:-1], sub[1:]):
            cq = 0.5 * (sa + sb) + 0.5 * (sb - sa) * nodes
            wq = 0.5 * (sb - sa) * weights * func(cq)
            out = out + np.exp(-1j * np.outer(xi, cq)) @ wq
    return out


def make_cutoff(kind: str, c: float, delta: float, **kw) -> SmoothCutoff:
    return SmoothCutoff(kind, c, delta, **kw)


def square_pair(c: float, delta: float, **kw) -> tuple[Callable, Callable]:
    """(up, down) profiles with up^2 + down^2 = 1 and Property-(F) transitions."""
    step = SmoothCutoff("step_up", c, delta, **kw)
    up = lambda lam: np.sin(0.5 * np.pi * step(lam))
    down = lambda lam: np.cos(0.5 * np.pi * step(lam))
    return up, down


# ---------------------------------------------------------------------------
# Dyadic shells
# ---------------------------------------------------------------------------

@dataclass
class DyadicShell:
    """Shell n covering I_n = [2^{-n-1}, 2^{-n}] with edge-proportional margins.

    The profile is e_n = sin(pi/2 s_{n+1}) cos(pi/2 s_n) where s_m is the
    smoothed step at edge 2^{-m}; supp e_n = [2^{-n-1}(1-delta), 2^{-n}(1+delta)].
    """

    n: int
    delta: float
    _lower_step: SmoothCutoff = field(repr=False)
    _upper_step: SmoothCutoff = field(repr=False)

    @property
    def interval(self) -> tuple[float, float]:
        return (2.0 ** (-self.n - 1), 2.0 ** (-self.n))

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.interval
        return (lo * (1.0 - self.delta), hi * (1.0 + self.delta))

    def profile(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        out = np.sin(0.5 * np.pi * self._lower_step(lam)) * np.cos(
            0.5 * np.pi * self._upper_step(lam)
        )
        lo, hi = self.support
        return np.where((lam < lo) | (lam > hi), 0.0, out)

    __call__ = profile

    def squared(self, lam) -> np.ndarray:
        return self.profile(lam) ** 2

    def widened(self, factor: float = 2.0) -> Callable:
        """A profile identically 1 on supp e_n (the tilde companion)."""
        lo, hi = self.support
        w_lo = self.delta * self.interval[0] * factor
        w_hi = self.delta * self.interval[1] * factor
        up = SmoothCutoff("step_up", lo - w_lo, w_lo * 0.95)
        down = SmoothCutoff("step_down", hi + w_hi, w_hi * 0.95)
        return lambda lam: up(lam) * down(lam)


def _edge_step(m: int, delta: float) -> SmoothCutoff:
    edge = 2.0 ** (-m)
    return SmoothCutoff("step_up", edge, delta * edge)


@dataclass
class DyadicPartition:
    """Shells 0..n_max plus the smooth complement profile (the tail).

    sum_n e_n^2 + tail^2 = 1 identically: the sines and cosines telescope
    because each step finishes rising before the next one starts.
    """

    n_max: int
    delta: float
    shells: list[DyadicShell]

    def tail(self, lam) -> np.ndarray:
        low = np.sin(0.5 * np.pi * _edge_step(self.n_max + 1, self.delta)(lam))
        high = np.sin(0.5 * np.pi * _edge_step(0, self.delta)(lam))
        return np.sqrt(np.clip(1.0 - low**2 + high**2, 0.0, None))

    def reconstruction(self, lam) -> np.ndarray:
        total = self.tail(lam) ** 2
        for sh in self.shells:
            total = total + sh.squared(lam)
        return total


def make_dyadic_partition(
    n_max: int, delta: float = 0.05, grid: RadialGrid | None = None
) -> DyadicPartition:
    """Shells n = 0..n_max; with a grid given, enforces shell resolvability."""
    if n_max < 0:
        raise ParameterError("n_max must be nonnegative")
    if not (0 < delta < 1.0 / 3.0):
        raise ParameterError("relative margin delta must lie in (0, 1/3)")
    if grid is not None:
        min_edge = 2.0 ** (-n_max - 1)
        if min_edge < RESOLUTION_FACTOR * grid.dk:
            raise ParameterError(
                f"shell n={n_max} unresolvable: 2^-{n_max + 1} = {min_edge:.3e} "
                f"< {RESOLUTION_FACTOR}*dk = {RESOLUTION_FACTOR * grid.dk:.3e}"
            )
    shells = [
        DyadicShell(n, delta, _edge_step(n + 1, delta), _edge_step(n, delta))
        for n in range(n_max + 1)
    ]
    return DyadicPartition(n_max, delta, shells)


# ---------------------------------------------------------------------------
# Chebyshev functional calculus for H
# ---------------------------------------------------------------------------

@dataclass
class FilterCertificate:
    """Measured quality of one f(H) application."""

    window: tuple[float, float]
    degree: int
    sup_error: float
    tol: float
    exact: bool = False  # diagonal route (V = 0)

    def as_dict(self) -> dict:
        return {
            "window": list(self.window),
            "degree": self.degree,
            "sup_error": self.sup_error,
            "tol": self.tol,
            "exact": self.exact,
        }


def _chebpts(n: int) -> np.ndarray:
    """Chebyshev points of the first kind (roots of T_n)."""
    return np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))


def _cheb_fit(f: Callable, degree: int) -> np.ndarray:
    """Chebyshev coefficients of the degree-d interpolant via a DCT-II.

    O(d log d); the Vandermonde route is quadratic and unusable at the
    degrees narrow dyadic shells need.
    """
    n = degree + 1
    vals = np.asarray(f(_chebpts(n)), dtype=float)
    c = dct(vals, type=2) / n
    c[0] *= 0.5
    return c


def _cheb_eval_chebpts(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Evaluate the Chebyshev series at the m first-kind points via DCT-III."""
    z = np.zeros(m)
    z[: len(coeffs)] = coeffs
    z[1:] *= 0.5
    return dct(z, type=3)


_WINDOW_CACHE: dict[tuple, tuple[float, float]] = {}


def spectral_window(grid: RadialGrid, potential: PotentialSpec, pad: float = 0.01) -> tuple[float, float]:
    """Interval enclosing the numerical spectrum of H, padded.

    Iterative extremal-eigenvalue estimates are clipped against the rigorous
    bounds min(V) <= H <= k_max + max(V, 0) so the window always encloses.
    """
    key = (grid.n_points, grid.h, potential.label)
    if key in _WINDOW_CACHE:
        return _WINDOW_CACHE[key]
    v = potential(grid.r)
    lo_safe = min(0.0, float(np.min(v)))
    hi_safe = grid.k_max + max(0.0, float(np.max(v)))
    lo_est, hi_est = lo_safe, hi_safe
    if grid.n_points <= 8192:
        try:
            from scipy.sparse.linalg import eigsh, LinearOperator as SpLinOp

            hop = SpLinOp(
                (grid.n_points, grid.n_points),
                matvec=lambda x: apply_k_multiplier(grid, x, grid.k) + v * x,
                dtype=complex,
            )
            v0 = np.ones(grid.n_points)
            hi_est = float(eigsh(hop, k=1, which="LA", tol=1e-3, v0=v0,
                                 return_eigenvectors=False)[0])
            lo_est = float(eigsh(hop, k=1, which="SA", tol=1e-3, v0=v0,
                                 return_eigenvectors=False)[0])
        except Exception:
            pass
    span = hi_safe - lo_safe
    lo = max(lo_safe - 1e-12, lo_est - pad * span)
    hi = min(hi_safe + 1e-12, hi_est + pad * span)
    lo = min(lo, lo_safe)
    hi = max(hi, hi_safe)
    window = (lo, hi)
    _WINDOW_CACHE[key] = window
    return window


class FunctionOfH(OperatorHandle):
    """Matrix-free f(H) via a certified Chebyshev expansion.

    The degree is auto-selected by doubling until the sup-norm error of the
    expansion on a 10d-point mesh meets the tolerance; the cap signals the
    caller to fall back to the dense oracle.
    """

    def __init__(
        self,
        grid: RadialGrid,
        potential: PotentialSpec,
        profile: Callable[[np.ndarray], np.ndarray],
        tol: float = 1e-6,
        window: tuple[float, float] | None = None,
        degree_cap: int = FILTER_DEGREE_CAP,
    ):
        super().__init__(grid)
        self.potential = potential
        self.profile = profile
        self._v = potential(grid.r) if not potential.is_zero else None
        if potential.is_zero:
            self.certificate = FilterCertificate((0.0, grid.k_max), 0, 0.0, tol, exact=True)
            self._coeffs = None
            return
        lo, hi = window if window is not None else spectral_window(grid, potential)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        fx = lambda x: np.asarray(profile(mid + half * np.asarray(x)), dtype=float)
        # fixed log-dense probe mesh: dyadic-shell features live at small
        # lambda and would slip between coarse Chebyshev meshes entirely
        lam_probe = np.geomspace(max(abs(lo) * 1e-3, hi * 1e-9, 1e-12), hi, 4096)
        x_probe = np.clip((lam_probe - mid) / half, -1.0, 1.0)
        f_probe = np.asarray(profile(lam_probe), dtype=float)
        degree = 64
        coeffs, err = None, np.inf
        while True:
            coeffs = _cheb_fit(fx, degree)
            mesh_size = 10 * degree + 1
            err = float(
                np.max(np.abs(_cheb_eval_chebpts(coeffs, mesh_size) - fx(_chebpts(mesh_size))))
            )
            if degree <= 8192:  # beyond this the 10d mesh is denser than the probe
                from numpy.polynomial.chebyshev import chebval

                err = max(err, float(np.max(np.abs(chebval(x_probe, coeffs) - f_probe))))
            if err <= tol or degree >= degree_cap:
                break
            degree = min(2 * degree, degree_cap)
        if err > tol:
            raise FilterCapError(
                f"degree cap {degree_cap} reached with sup error {err:.3e} > tol {tol:.3e}"
            )
        # drop trailing negligible coefficients
        keep = np.nonzero(np.abs(coeffs) > 1e-16 * np.max(np.abs(coeffs)))[0]
        if len(keep):
            coeffs = coeffs[: keep[-1] + 1]
        self._coeffs = coeffs
        self._mid, self._half = mid, half
        self.certificate = FilterCertificate((lo, hi), len(coeffs) - 1, err, tol)

    def _h_apply(self, x: np.ndarray) -> np.ndarray:
        out = apply_k_multiplier(self.grid, x, self.grid.k)
        if self._v is not None:
            out = out + self._v * x
        return out

    def _scaled_apply(self, x: np.ndarray) -> np.ndarray:
        return (self._h_apply(x) - self._mid * x) / self._half

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.potential.is_zero:
            return apply_k_multiplier(self.grid, values, np.asarray(self.profile(self.grid.k)))
        c = self._coeffs
        w_prev = values
        w_curr = self._scaled_apply(values)
        acc = c[0] * w_prev + (c[1] * w_curr if len(c) > 1 else 0.0)
        for j in range(2, len(c)):
            w_next = 2.0 * self._scaled_apply(w_curr) - w_prev
            acc = acc + c[j] * w_next
            w_prev, w_curr = w_curr, w_next
        return acc

    def adjoint(self) -> "FunctionOfH":
        return self  # real profiles of a self-adjoint operator


def apply_function_of_H(
    profile: Callable,
    potential: PotentialSpec,
    psi: WaveFunction,
    tol: float = 1e-6,
    **kw,
) -> tuple[WaveFunction, FilterCertificate]:
    op = FunctionOfH(psi.grid, potential, profile, tol, **kw)
    return op.apply_wf(psi), op.certificate


# ---------------------------------------------------------------------------
# Mellin functional calculus for A
# ---------------------------------------------------------------------------

@dataclass
class MellinReport:
    """Per-call quality diagnostics of an f(A/s) application."""

    dx: float
    n_physical: int
    n_total: int
    pad_mass: float          # mass of the output left outside (h, L)
    wrap_sentinel: float     # mass in the outermost quarter of the pads
    roundtrip_error: float   # resample-only round trip, relative


def _mellin_content_cap(psi: WaveFunction) -> float:
    """Estimate of the state's largest relevant Mellin frequency ~ k_eff * r_eff."""
    g = psi.grid
    c = np.abs(sine_transform(psi).values) ** 2
    total = float(np.sum(c))
    if total == 0.0:
        return 20.0
    cum = np.cumsum(c) / total
    k_eff = g.k[min(int(np.searchsorted(cum, 1.0 - 1e-12)), g.n_points - 1)]
    mag = np.abs(psi.values)
    big = np.nonzero(mag > 1e-9 * mag.max())[0]
    r_eff = g.r[big[-1]] if len(big) else g.r[-1]
    return 1.3 * k_eff * r_eff + 40.0


class FunctionOfA(OperatorHandle):
    """f(A/s) through the Mellin pipeline.

    Unitarily maps u to v(x) = e^{x/2} u(e^x) on a log-uniform grid, applies
    f(tau/s) to the Fourier transform in x (tau is the generalized eigenvalue
    of A), and maps back.  Both directions use quintic resampling; the grid
    step resolves the state's k*r content, and zero-padding in x absorbs the
    kernel spread of f.
    """

    def __init__(
        self,
        grid: RadialGrid,
        profile: Callable,
        scale: float,
        mass_tol: float = 1e-6,
        pad_x: float = 8.0,
        oversample: float = 2.0,
        strict: bool = True,
        max_points: int = 1 << 22,
    ):
        super().__init__(grid)
        if scale <= 0:
            raise ParameterError(f"scale must be positive, got {scale}")
        self.profile = profile
        self.scale = float(scale)
        self.mass_tol = mass_tol
        self.pad_x = pad_x
        self.oversample = oversample
        self.strict = strict
        self.max_points = max_points
        self.last_report: MellinReport | None = None

    def apply(self, values: np.ndarray) -> np.ndarray:
        psi = WaveFunction(self.grid, values)
        out, report = mellin_apply(
            psi,
            self.profile,
            self.scale,
            mass_tol=self.mass_tol,
            pad_x=self.pad_x,
            oversample=self.oversample,
            strict=self.strict,
            max_points=self.max_points,
            estimate_roundtrip=False,
        )
        self.last_report = report
        return out.values

    def adjoint(self) -> "FunctionOfA":
        return self  # real multiplier in Mellin space


def mellin_apply(
    psi: WaveFunction,
    profile: Callable,
    scale: float,
    mass_tol: float = 1e-6,
    pad_x: float = 8.0,
    oversample: float = 2.0,
    strict: bool = True,
    max_points: int = 1 << 22,
    estimate_roundtrip: bool = True,
) -> tuple[WaveFunction, MellinReport]:
    """Compute f(A/scale) psi; see FunctionOfA."""
    g = psi.grid
    norm_sq = g.h * float(np.sum(np.abs(psi.values) ** 2))
    if norm_sq == 0.0:
        return psi.copy(), MellinReport(0.0, 0, 0, 0.0, 0.0, 0.0)
    inner_mass = g.h * float(np.sum(np.abs(psi.values[g.r < 4 * g.h]) ** 2)) / norm_sq
    outer_mass = g.h * float(np.sum(np.abs(psi.values[g.r > 0.9 * g.extent]) ** 2)) / norm_sq
    if strict and (inner_mass > mass_tol or outer_mass > mass_tol):
        raise MellinDomainError(
            f"state mass near the resampling boundaries: {inner_mass:.2e} at r<4h, "
            f"{outer_mass:.2e} at r>0.9L (tolerance {mass_tol:.1e})"
        )

    x_lo, x_hi = math.log(g.h), math.log(g.extent)
    tau_cap = _mellin_content_cap(psi)
    dx = np.pi / (oversample * tau_cap)
    n_phys = int(np.ceil((x_hi - x_lo) / dx)) + 1
    n_pad = int(np.ceil(pad_x / dx))
    n_total = n_phys + 2 * n_pad
    n_total = 1 << int(np.ceil(np.log2(n_total)))
    if n_total > max_points:
        raise MellinDomainError(
            f"Mellin grid would need {n_total} points (> {max_points}); "
            "state content k*r too large for the configured cap"
        )
    dx = (x_hi - x_lo) / (n_phys - 1)
    x_full = x_lo + (np.arange(n_total) - n_pad) * dx

    spline = make_interp_spline(
        np.concatenate(([0.0], g.r, [g.extent])),
        np.concatenate(([0.0], psi.values, [0.0])),
        k=5,
    )
    v = np.zeros(n_total, dtype=complex)
    phys = slice(n_pad, n_pad + n_phys)
    r_phys = np.exp(x_full[phys])
    r_phys = np.clip(r_phys, 0.0, g.extent)
    v[phys] = np.exp(0.5 * x_full[phys]) * spline(r_phys)

    tau = 2.0 * np.pi * fftfreq(n_total, d=dx)
    v_out = ifft(np.asarray(profile(tau / scale)) * fft(v))

    pads = np.concatenate((v_out[:n_pad], v_out[n_pad + n_phys:]))
    pad_mass = dx * float(np.sum(np.abs(pads) ** 2)) / norm_sq
    q = max(n_pad // 4, 1)
    sentinel = dx * float(
        np.sum(np.abs(v_out[:q]) ** 2) + np.sum(np.abs(v_out[-q:]) ** 2)
    ) / norm_sq

    back = make_interp_spline(x_full, v_out, k=5)
    x_nodes = np.log(g.r)
    out_values = back(x_nodes) / np.sqrt(g.r)

    roundtrip = 0.0
    if estimate_roundtrip:
        ident = make_interp_spline(x_full, v, k=5)
        rt = ident(x_nodes) / np.sqrt(g.r)
        roundtrip = float(
            np.sqrt(g.h) * np.linalg.norm(rt - psi.values) / math.sqrt(norm_sq)
        )

    report = MellinReport(dx, n_phys, n_total, pad_mass, sentinel, roundtrip)
    return WaveFunction(g, out_values), report


def apply_function_of_A(
    profile: Callable,
    scale: float,
    psi: WaveFunction,
    **kw,
) -> tuple[WaveFunction, MellinReport]:
    return mellin_apply(psi, profile, scale, **kw)


def function_of_A_by_group_quadrature(
    cutoff: SmoothCutoff,
    scale: float,
    psi: WaveFunction,
    t_max: float | None = None,
    nodes_per_panel: int = 16,
    n_panels: int | None = None,
    lam_max: float = 3.0,
) -> WaveFunction:
    """Cross-check route: F(A/s) by quadrature over the dilation group.

    Uses F(a) = (F(inf)+F(-inf))/2 + (1/pi) int_0^T dt/t Im[phi(t) e^{itA/s}]
    with phi the transform of F'.  The group parameter t/s must stay within
    the dilation evaluator's range, so this route is meaningful when
    s * delta is large enough that phi has decayed by t = s*lam_max.
    """
    if t_max is None:
        t_max = min(40.0 / cutoff.delta, scale * lam_max)
    tau_cap = _mellin_content_cap(psi)
    if n_panels is None:
        n_panels = int(np.ceil(t_max * (tau_cap / scale + 1.0) / (0.6 * nodes_per_panel))) + 4
    ev = DilationEvaluator(psi)
    f_lo, f_hi = cutoff.limits
    acc = 0.5 * (f_lo + f_hi) * psi.values.astype(complex)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, t_max, n_panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        tq = 0.5 * (a + b) + 0.5 * (b - a) * gl_nodes
        wq = 0.5 * (b - a) * gl_weights
        phi = cutoff.fourier_of_derivative(tq)
        for t, w, ph in zip(tq, wq, phi):
            up = ev.apply(t / scale).wavefunction.values
            dn = ev.apply(-t / scale).wavefunction.values
            imag_part = (ph * up - np.conj(ph) * dn) / 2j
            acc = acc + (w / (np.pi * t)) * imag_part
    return WaveFunction(psi.grid, acc)


# ---------------------------------------------------------------------------
# Commutator expansion
# ---------------------------------------------------------------------------

def _ad_chain(kind: str, grid: RadialGrid, potential: PotentialSpec | None, order: int):
    """[K, A]-chain for K in {p, p_half, hamiltonian}.

    For |p|^alpha the dilation algebra gives ad_A^k(|p|^alpha) = (-i alpha)^k
    |p|^alpha; for H the potential contributes multiplication operators built
    from r V' and r^2 V''.
    """
    if kind == "p":
        base = fractional_momentum_op(grid, 1.0)
        return base, [((-1j) ** k) * base for k in range(1, order + 1)]
    if kind == "p_half":
        base = fractional_momentum_op(grid, 0.5)
        return base, [((-0.5j) ** k) * base for k in range(1, order + 1)]
    if kind == "hamiltonian":
        if potential is None:
            raise ParameterError("hamiltonian kind needs a potential")
        from halfwave.operators import hamiltonian_op

        base = hamiltonian_op(grid, potential)
        ads: list[OperatorHandle] = [(-1j) * commutator_H_A_op(grid, potential)]
        if order >= 2:
            w_term = grid.r * potential.derivative(grid.r) + grid.r**2 * potential.second_derivative(grid.r)
            ad2 = (-1.0) * (fractional_momentum_op(grid, 1.0) + RMultiplier(grid, w_term))
            ads.append(ad2)
        if order > 2:
            raise ParameterError("hamiltonian expansion implemented to order 2")
        return base, ads
    raise ParameterError(f"unknown commutator kind {kind!r} (use p, p_half, hamiltonian)")


@dataclass
class ExpansionProbeResult:
    direct_norm: float
    expansion_norm: float
    remainder_norm: float
    r2_quadrature_norm: float | None
    r2_vs_remainder: float | None


@dataclass
class ExpansionReport:
    kind: str
    scale: float
    order: int
    probes: list[ExpansionProbeResult]

    @property
    def max_remainder(self) -> float:
        return max(p.remainder_norm for p in self.probes)


def commutator_expansion(
    kind: str,
    cutoff: SmoothCutoff,
    scale: float,
    order: int,
    probes: list[WaveFunction],
    potential: PotentialSpec | None = None,
    r2_quadrature: bool = False,
    r2_lambda_cap: float | None = None,
    r2_shell: Callable | None = None,
    band_limit: float | None = None,
    mellin_kw: dict | None = None,
) -> ExpansionReport:
    """Direct commutator [K, f(A/s)], its operator expansion, and the remainder.

    order-k expansion: sum_k (1/k!) s^-k f^(k)(A/s) ad_A^k(K).  With
    r2_quadrature=True (order 1, K = |p|^alpha) the remainder is also
    evaluated as an explicit dilation-group integral, truncated at
    |lambda| <= s*ln2(1+margin); the comparison against the direct remainder
    is made inside the shell sandwich (pass the shell profile as r2_shell):
    the support-motion argument that justifies the truncation only controls
    the shell-projected difference.

    band_limit, when set, applies a smooth momentum cutoff to the remainder
    vectors: the probes are band-limited, so content far above their band is
    resampling noise that the |p|^alpha factor would otherwise amplify.
    """
    if order not in (1, 2):
        raise ParameterError("expansion order must be 1 or 2")
    if not probes:
        raise ParameterError("at least one probe state required")
    grid = probes[0].grid
    base, ads = _ad_chain(kind, grid, potential, order)
    mkw = dict(mellin_kw or {})
    derivs = [cutoff.derivative, cutoff.second_derivative]
    if band_limit is not None:
        blim = SmoothCutoff("step_down", band_limit, 0.2 * band_limit)(grid.k)
    shell_mult = np.asarray(r2_shell(grid.k)) if r2_shell is not None else None

    results = []
    for psi in probes:
        f_psi, _ = mellin_apply(psi, cutoff, scale, **mkw)
        k_f_psi = base.apply(f_psi.values)
        k_psi = base.apply(psi.values)
        f_k_psi, _ = mellin_apply(WaveFunction(grid, k_psi), cutoff, scale, **mkw)
        direct = k_f_psi - f_k_psi.values

        expansion = np.zeros_like(direct)
        for k in range(1, order + 1):
            ad_psi = ads[k - 1].apply(psi.values)
            term, _ = mellin_apply(WaveFunction(grid, ad_psi), derivs[k - 1], scale, **mkw)
            expansion = expansion + term.values / (math.factorial(k) * scale**k)
        remainder = direct - expansion
        if band_limit is not None:
            remainder = apply_k_multiplier(grid, remainder, blim)
        scale_norm = math.sqrt(grid.h)
        res = ExpansionProbeResult(
            direct_norm=scale_norm * float(np.linalg.norm(direct)),
            expansion_norm=scale_norm * float(np.linalg.norm(expansion)),
            remainder_norm=scale_norm * float(np.linalg.norm(remainder)),
            r2_quadrature_norm=None,
            r2_vs_remainder=None,
        )
        if r2_quadrature:
            if kind == "hamiltonian":
                raise ParameterError("R2 quadrature applies to the |p|^alpha kinds")
            alpha = 1.0 if kind == "p" else 0.5
            r2 = _r2_group_quadrature(
                cutoff, scale, alpha, WaveFunction(grid, k_psi), r2_lambda_cap
            )
            res.r2_quadrature_norm = scale_norm * float(np.linalg.norm(r2))
            if shell_mult is not None:
                diff_v = apply_k_multiplier(grid, r2 - remainder, shell_mult)
                ref_v = apply_k_multiplier(grid, remainder, shell_mult)
            else:
                diff_v, ref_v = r2 - remainder, remainder
            res.r2_vs_remainder = float(
                np.linalg.norm(diff_v) / max(np.linalg.norm(ref_v), 1e-300)
            )
        results.append(res)
    return ExpansionReport(kind, scale, order, results)


def _r2_group_quadrature(
    cutoff: SmoothCutoff,
    scale: float,
    alpha: float,
    k_psi: WaveFunction,
    lambda_cap: float | None,
) -> np.ndarray:
    """R2 = -(1/2pi) int f''^(mu) * (e^{alpha mu/s}-1-alpha mu/s)/mu^2 e^{i mu A/s} K psi dmu.

    The integrand is the second-order Taylor remainder of the group action on
    |p|^alpha; for shell-localized states the support motion of the dilation
    group kills contributions beyond |mu/s| = ln 2, which is where the
    integral is truncated (the exponential growth is then harmless).
    """
    if lambda_cap is None:
        lambda_cap = scale * math.log(2.0) * 1.05
    tau_cap = _mellin_content_cap(k_psi)
    nodes_per_panel = 16
    n_panels = int(np.ceil(2 * lambda_cap * (tau_cap / scale + cutoff.delta + 1.0)
                           / (0.6 * nodes_per_panel))) + 4
    ev = DilationEvaluator(k_psi)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(-lambda_cap, lambda_cap, n_panels + 1)
    acc = np.zeros(k_psi.grid.n_points, dtype=complex)
    for a, b in zip(edges[:-1], edges[1:]):
        mq = 0.5 * (a + b) + 0.5 * (b - a) * gl_nodes
        wq = 0.5 * (b - a) * gl_weights
        fpp_hat = _fourier_of_second_derivative(cutoff, mq)
        for mu, w, ghat in zip(mq, wq, fpp_hat):
            z = alpha * mu / scale
            if abs(z) < 1e-6:
                taylor = 0.5 + z / 6.0 + z * z / 24.0
                factor = taylor * (alpha / scale) ** 2
            else:
                factor = (math.exp(z) - 1.0 - z) / mu**2
            group = ev.apply(mu / scale).wavefunction.values
            acc = acc + (w * (-ghat) * factor / (2.0 * np.pi)) * group
    return acc


def _fourier_of_second_derivative(cutoff: SmoothCutoff, xi) -> np.ndarray:
    """int F''(c) e^{-i xi c} dc over the compact support of F''."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return _segment_fourier(cutoff.second_derivative, cutoff.derivative_support,
                            cutoff.breakpoints, xi)
