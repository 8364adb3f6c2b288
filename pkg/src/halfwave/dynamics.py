"""Time propagation, state preparation, observable series, Heisenberg checks.

Propagation uses Strang splitting e^{-iV dt/2} e^{-i|p| dt} e^{-iV dt/2}
with the kinetic factor exact in the sine basis.  Both factors are unitary,
so the norm identities the estimates rely on survive discretization; the
only error is the O(dt^2) splitting error against e^{-iHt}.

Sample times live on a geometric grid t_{k+1} = rho * t_k: the propagation
integrals carry dt/t, and geometric samples make that log-measure quadrature
uniform-weight.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from halfwave.grid import (
    RadialGrid,
    WaveFunction,
    GridError,
    apply_k_multiplier,
    boundary_mass,
    inner,
    weighted_norm,
)
from halfwave.operators import PotentialSpec, ParameterError, apply_hamiltonian
from halfwave.funcalc import (
    FunctionOfH,
    FilterCertificate,
    SmoothCutoff,
    apply_function_of_H,
)


@dataclass
class StateSpec:
    """Initial-state recipe: profile plus a smoothed energy window.

    The profile is a Gaussian bump (center, width, optional carrier momentum)
    or user samples; the energy filter is a smoothed indicator of
    [window_lo, window_hi] applied through the functional calculus of H.
    """

    center: float = 100.0
    width: float = 10.0
    momentum: float = 0.0
    window_lo: float = 0.1
    window_hi: float = 0.5
    window_margin: float = 0.1  # relative smoothing of the window edges
    samples: np.ndarray | None = None
    epsilon: float = 0.5  # the extra weight exponent recorded as 1 + epsilon

    def window_profile(self) -> Callable:
        lo, hi = self.window_lo, self.window_hi
        up = SmoothCutoff("step_up", lo, self.window_margin * lo)
        down = SmoothCutoff("step_down", hi, self.window_margin * hi)
        return lambda lam: up(lam) * down(lam)

    def wide_window_profile(self) -> Callable:
        """Identically 1 on the filter's pass band including its margins."""
        lo, hi = self.window_lo, self.window_hi
        w_lo, w_hi = self.window_margin * lo, self.window_margin * hi
        up = SmoothCutoff("step_up", lo - 2.2 * w_lo, w_lo)
        down = SmoothCutoff("step_down", hi + 2.2 * w_hi, w_hi)
        return lambda lam: up(lam) * down(lam)


@dataclass
class PreparedState:
    wavefunction: WaveFunction
    filter_certificate: FilterCertificate
    tail_norm: float
    weighted_norms: dict[str, float]


def prepare_state(
    spec: StateSpec,
    potential: PotentialSpec,
    grid: RadialGrid,
    tol: float = 1e-8,
) -> PreparedState:
    """Normalized, energy-filtered state with its manifest entries.

    Rejects windows below the grid's resolvable width and profiles whose
    spectral content misses the window entirely.
    """
    if spec.window_lo <= 0 or spec.window_hi <= spec.window_lo:
        raise ParameterError("energy window must satisfy 0 < lo < hi")
    if spec.window_lo < 8 * grid.dk:
        raise ParameterError(
            f"window_lo = {spec.window_lo} below 8*dk = {8 * grid.dk:.3e}: unresolvable"
        )
    if spec.samples is not None:
        base = WaveFunction(grid, np.asarray(spec.samples, dtype=complex))
    else:
        env = np.exp(-(((grid.r - spec.center) / (2.0 * spec.width)) ** 2) * 2.0)
        if spec.momentum != 0.0:
            env = env * np.exp(1j * spec.momentum * grid.r)
        base = WaveFunction(grid, env.astype(complex))
    base = base.normalized()

    filtered, cert = apply_function_of_H(spec.window_profile(), potential, base, tol=tol)
    amp = filtered.norm()
    if amp < 1e-6:
        raise ParameterError(
            f"energy window [{spec.window_lo}, {spec.window_hi}] excludes the "
            f"profile's spectral support (filtered mass {amp:.2e})"
        )
    psi0 = filtered.normalized()

    wide = spec.wide_window_profile()
    inside, _ = apply_function_of_H(wide, potential, psi0, tol=tol)
    tail = float(
        np.sqrt(grid.h) * np.linalg.norm(psi0.values - inside.values)
    )
    norms = {
        "0.5": weighted_norm(psi0, 0.5),
        "1": weighted_norm(psi0, 1.0),
        f"{1 + spec.epsilon}": weighted_norm(psi0, 1.0 + spec.epsilon),
    }
    return PreparedState(psi0, cert, tail, norms)


# ---------------------------------------------------------------------------
# Split-step propagation
# ---------------------------------------------------------------------------

def geometric_times(t_start: float, t_end: float, ratio: float) -> np.ndarray:
    """t_k = t_start * ratio^k up to t_end (inclusive within rounding)."""
    if not (ratio > 1.0):
        raise ParameterError("geometric ratio must exceed 1")
    n = int(math.floor(math.log(t_end / t_start) / math.log(ratio) + 1e-12)) + 1
    ts = t_start * ratio ** np.arange(n)
    if ts[-1] < t_end * (1.0 - 1e-12):
        ts = np.append(ts, t_end)
    return ts


@dataclass
class Trajectory:
    """States stored at geometric sample times, with health diagnostics."""

    grid: RadialGrid
    potential: PotentialSpec
    times: np.ndarray
    states: list[WaveFunction]
    norm_drift: float
    boundary_series: np.ndarray
    flagged: bool
    dt: float

    def state_at(self, index: int) -> WaveFunction:
        return self.states[index]


class SplitStepPropagator:
    """Strang splitting with the kinetic half exact in the sine basis."""

    def __init__(self, grid: RadialGrid, potential: PotentialSpec, dt: float):
        if dt > 0.1:
            raise ParameterError(f"dt must be <= 0.1, got {dt}")
        self.grid = grid
        self.potential = potential
        self.dt = dt
        self._v = potential(grid.r)
        self._half_v = np.exp(-0.5j * dt * self._v)
        self._kin = np.exp(-1j * dt * grid.k)

    def step_many(self, values: np.ndarray, n_steps: int) -> np.ndarray:
        """n_steps Strang steps; half-potential factors are fused between steps."""
        if n_steps <= 0:
            return values
        from scipy.fft import dst

        v = self._half_v * values
        full_v = self._half_v * self._half_v
        for j in range(n_steps):
            v = dst(self._kin * dst(v, type=1, norm="ortho"), type=1, norm="ortho")
            v = (full_v if j < n_steps - 1 else self._half_v) * v
        return v

    def advance(self, values: np.ndarray, duration: float) -> np.ndarray:
        """Advance by `duration` using steps of at most self.dt (exactly landing)."""
        if duration <= 1e-14:
            return values
        n = max(1, int(math.ceil(duration / self.dt - 1e-12)))
        dt_eff = duration / n
        if abs(dt_eff - self.dt) < 1e-14:
            return self.step_many(values, n)
        sub = SplitStepPropagator(self.grid, self.potential, dt_eff)
        return sub.step_many(values, n)


def propagate_split_step(
    psi0: WaveFunction,
    potential: PotentialSpec,
    t_end: float,
    dt: float,
    t_start: float = 1.0,
    ratio: float = 2.0 ** (1.0 / 8.0),
    boundary_tol: float = 1e-6,
) -> Trajectory:
    """Evolve from t = 0, storing samples on the geometric grid in [t_start, t_end]."""
    prop = SplitStepPropagator(psi0.grid, potential, dt)
    times = geometric_times(t_start, t_end, ratio)
    norm0 = psi0.norm()
    states = []
    bmass = np.zeros(len(times))
    values = psi0.values
    t_now = 0.0
    worst_drift = 0.0
    for i, t in enumerate(times):
        values = prop.advance(values, t - t_now)
        t_now = t
        wf = WaveFunction(psi0.grid, values.copy())
        states.append(wf)
        bmass[i] = boundary_mass(wf)
        worst_drift = max(worst_drift, abs(wf.norm() - norm0) / max(t, 1.0))
    flagged = bool(np.any(bmass > boundary_tol))
    return Trajectory(psi0.grid, potential, times, states, worst_drift, bmass, flagged, dt)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

@dataclass
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    tag: str

    def monotone_from(self, t0: float) -> bool:
        sel = self.times >= t0
        v = self.values[sel]
        return bool(np.all(np.diff(v) <= 1e-12 + 1e-6 * np.abs(v[:-1])))


def observable_series(
    traj: Trajectory,
    profile: Callable,
    direction: str,
    speed: float,
    tag: str = "",
    shell_filter: FunctionOfH | None = None,
) -> ObservableSeries:
    """P(t_k) = || F(r / (speed * t_k)) psi(t_k) ||^2 for a position cutoff.

    direction "outgoing" uses F(r/t > speed) (requires speed > 1 in the
    theorems), "incoming" uses F(r/t < speed) (speed < 1).  The cutoff is a
    multiplication operator, evaluated pointwise exactly.  An optional
    E_n-localized variant applies the shell filter first.
    """
    if direction == "outgoing":
        if speed <= 1.0:
            raise ParameterError("outgoing observable requires speed a > 1")
    elif direction == "incoming":
        if speed >= 1.0:
            raise ParameterError("incoming observable requires speed b < 1")
    else:
        raise ParameterError("direction must be 'outgoing' or 'incoming'")
    g = traj.grid
    vals = np.zeros(len(traj.times))
    for i, t in enumerate(traj.times):
        psi = traj.states[i]
        if shell_filter is not None:
            psi = shell_filter.apply_wf(psi)
        cut = np.asarray(profile(g.r / t))
        vals[i] = g.h * float(np.sum((cut * np.abs(psi.values)) ** 2))
    return ObservableSeries(traj.times.copy(), vals, tag or f"{direction}@{speed}")


def heisenberg_check(
    phi_family: Callable[[float], Callable[[WaveFunction], WaveFunction]],
    traj: Trajectory,
    indices: list[int],
    dt_fd: float = 5e-3,
    dlam_fd: float | None = None,
    return_raw: bool = False,
):
    """Relative residual of d/dt <psi, Phi(t) psi> = <psi, (i[H,Phi] + dPhi/dt) psi>.

    The left side is a centered difference along the evolution; i[H, Phi] is
    evaluated by composed applies and dPhi/dt by centered differencing in the
    time parameter of the family.  With return_raw, the two sides are
    returned alongside the residuals (the relative residual saturates at the
    noise scale when both sides vanish).
    """
    g = traj.grid
    dlam = dlam_fd if dlam_fd is not None else dt_fd
    prop = SplitStepPropagator(g, traj.potential, min(traj.dt, dt_fd / 4.0))
    residuals = np.zeros(len(indices))
    raw = np.zeros((len(indices), 2))
    for out_i, idx in enumerate(indices):
        t = traj.times[idx]
        psi = traj.states[idx]
        phi_t = phi_family(t)

        fwd = WaveFunction(g, prop.advance(psi.values, dt_fd))
        # backward evolution: conjugate trick, e^{+iH dt} v = conj(e^{-iH dt} conj(v))
        back = WaveFunction(g, np.conj(prop.advance(np.conj(psi.values), dt_fd)))
        e_plus = inner(fwd, phi_family(t + dt_fd)(fwd))
        e_minus = inner(back, phi_family(t - dt_fd)(back))
        lhs = (e_plus.real - e_minus.real) / (2.0 * dt_fd)

        h_phi = apply_hamiltonian(phi_t(psi), traj.potential)
        phi_h = phi_t(apply_hamiltonian(psi, traj.potential))
        comm = 1j * (inner(psi, h_phi) - inner(psi, phi_h))
        dphi = (
            inner(psi, phi_family(t + dlam)(psi)) - inner(psi, phi_family(t - dlam)(psi))
        ) / (2.0 * dlam)
        rhs = comm.real + dphi.real
        scale = max(abs(lhs), abs(rhs), 1e-12)
        residuals[out_i] = abs(lhs - rhs) / scale
        raw[out_i] = (lhs, rhs)
    if return_raw:
        return residuals, raw
    return residuals


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"HWTRAJ01"


def save_checkpoint(path, traj: Trajectory, potential_id: str = "") -> None:
    """Flat binary layout: header (grid params, potential id, times), then
    interleaved re/im samples per stored state."""
    pot = (potential_id or traj.potential.label).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qdqd", traj.grid.n_points, traj.grid.h, len(traj.times), traj.dt))
        fh.write(struct.pack("<q", len(pot)))
        fh.write(pot)
        fh.write(np.asarray(traj.times, dtype="<f8").tobytes())
        fh.write(np.asarray(traj.boundary_series, dtype="<f8").tobytes())
        for wf in traj.states:
            inter = np.empty(2 * traj.grid.n_points)
            inter[0::2] = wf.values.real
            inter[1::2] = wf.values.imag
            fh.write(inter.astype("<f8").tobytes())


def load_checkpoint(path, potential: PotentialSpec | None = None) -> Trajectory:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise GridError(f"{path} is not a trajectory checkpoint")
        n_points, h, n_times, dt = struct.unpack("<qdqd", fh.read(32))
        (pot_len,) = struct.unpack("<q", fh.read(8))
        pot_id = fh.read(pot_len).decode()
        grid = RadialGrid(n_points, h)
        times = np.frombuffer(fh.read(8 * n_times), dtype="<f8").copy()
        bseries = np.frombuffer(fh.read(8 * n_times), dtype="<f8").copy()
        states = []
        for _ in range(n_times):
            inter = np.frombuffer(fh.read(16 * n_points), dtype="<f8")
            states.append(WaveFunction(grid, inter[0::2] + 1j * inter[1::2]))
    from halfwave.operators import zero_potential

    pot = potential if potential is not None else zero_potential()
    if potential is None and pot_id != "zero":
        pot.label = pot_id
    return Trajectory(grid, pot, times, states, 0.0, bseries, False, dt)
