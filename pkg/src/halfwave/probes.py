"""Reproducible probe states for tests and certificates.

Band-limited interior probes are random sine-coefficient vectors with a
smoothly tapered band, localized by a Gaussian envelope kept strictly inside
(0, L).  Tapering matters: residual content near k = 0 produces long-range
tails under |p| that the finite box truncates, which would contaminate
covariance and commutator measurements at the 1e-5 level.
"""

from __future__ import annotations

import math

import numpy as np

from halfwave.grid import (
    RadialGrid,
    WaveFunction,
    SpectralCoefficients,
    inverse_sine_transform,
)


def bandlimited_state(
    grid: RadialGrid,
    k_lo: float,
    k_hi: float,
    center: float,
    width: float,
    seed: int | np.random.Generator = 0,
) -> WaveFunction:
    """Random band-tapered state under a Gaussian envelope at `center`.

    The envelope must keep ~3.5 widths inside (0, L); callers scaling the
    state afterwards (dilation quadratures) should leave room for that too.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if center - 3.0 * width <= 0 or center + 3.0 * width >= grid.extent:
        raise ValueError(
            f"envelope (center={center}, width={width}) is not interior to (0, {grid.extent})"
        )
    c = np.zeros(grid.n_points, dtype=complex)
    sel = (grid.k >= k_lo) & (grid.k <= k_hi)
    if not np.any(sel):
        raise ValueError(f"band [{k_lo}, {k_hi}] contains no momentum node")
    kk = grid.k[sel]
    taper = np.sin(np.pi * (kk - k_lo) / (k_hi - k_lo)) ** 2
    c[sel] = (rng.standard_normal(sel.sum()) + 1j * rng.standard_normal(sel.sum())) * taper
    u = inverse_sine_transform(SpectralCoefficients(grid, c))
    env = np.exp(-(((grid.r - center) / width) ** 2))
    return WaveFunction(grid, u.values * env).normalized()


def gaussian_packet(
    grid: RadialGrid, center: float, width: float, momentum: float = 0.0
) -> WaveFunction:
    """Normalized Gaussian bump, optionally with an outgoing carrier e^{ikr}."""
    env = np.exp(-(((grid.r - center) / (2.0 * width)) ** 2) * 2.0)
    if momentum != 0.0:
        env = env * np.exp(1j * momentum * grid.r)
    return WaveFunction(grid, env.astype(complex)).normalized()


def random_state(grid: RadialGrid, seed: int | np.random.Generator = 0) -> WaveFunction:
    """Unstructured complex white noise (for adjoint/Parseval-type checks)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)
    return WaveFunction(grid, v).normalized()


def logwide_state(
    grid: RadialGrid,
    k0: float,
    r_min: float,
    r_max: float,
    edge: float = 0.35,
) -> WaveFunction:
    """Near-monochromatic wave over a log-wide annulus: u = r^{-1/2} e^{ik0 r} W(ln r).

    Its dilation-generator density is proportional to 1/tau over
    tau in ~[k0*r_min, k0*r_max]: the natural probe when a measurement must
    straddle a whole range of scaling thresholds at once (commutator
    remainders, where the transition of f(A/s) moves with s).
    """
    from halfwave.funcalc import SmoothCutoff

    if not (0 < r_min < r_max < grid.extent):
        raise ValueError("need 0 < r_min < r_max < L")
    x = np.log(grid.r)
    up = SmoothCutoff("step_up", math.log(r_min) + edge, edge)
    down = SmoothCutoff("step_down", math.log(r_max) - edge, edge)
    window = up(x) * down(x)
    vals = window * np.exp(1j * k0 * grid.r) / np.sqrt(grid.r)
    return WaveFunction(grid, vals).normalized()
