"""Matrix-free operators: |p|^alpha, V, H, the dilation generator A and group U(lambda).

All operators act on the sample vector of a WaveFunction over a fixed grid.
Fractional momentum powers are diagonal multipliers k_m^alpha in the sine
basis; negative powers down to alpha = -2 are admissible because the
Dirichlet basis has no zero mode (the smallest multiplier is k_1 = pi/L).

The radial form of the dilation generator on u = r*psi is
A = -i (r d/dr + 1/2), whose group U(lam) u (r) = e^{lam/2} u(e^lam r) is
unitary on L^2(0, inf).  U(lam) is applied by quintic spline interpolation
with zero extension beyond L; the per-call norm defect and the dropped
boundary mass are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from halfwave.grid import RadialGrid, WaveFunction, GridError, apply_k_multiplier, differentiate


class ParameterError(ValueError):
    """Operator parameter out of its admissible range."""


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

DECAY_EXPONENTS = (1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass
class PotentialSpec:
    """Radial potential with its decay norms and Hardy-subordination constant.

    Families:
      - "zero"
      - "soft_decay": V(r) = gamma * (1 + r^2)^(-beta/2), beta > 2 for
        admissible decay
      - "tabulated": user samples on a grid (norms taken as grid suprema)
    """

    family: str
    gamma: float = 0.0
    beta: float = 3.0
    samples: np.ndarray | None = None
    sample_grid: RadialGrid | None = None
    label: str = ""

    def __post_init__(self):
        if self.family not in ("zero", "soft_decay", "tabulated"):
            raise ParameterError(f"unknown potential family {self.family!r}")
        if self.family == "tabulated":
            if self.samples is None or self.sample_grid is None:
                raise ParameterError("tabulated potential needs samples and sample_grid")
            self.samples = np.asarray(self.samples, dtype=float)
        if not self.label:
            self.label = self._default_label()

    def _default_label(self) -> str:
        if self.family == "zero":
            return "zero"
        if self.family == "soft_decay":
            return f"soft_decay(gamma={self.gamma}, beta={self.beta})"
        return "tabulated"

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or (self.family == "soft_decay" and self.gamma == 0.0)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "soft_decay":
            return self.gamma * (1.0 + r**2) ** (-self.beta / 2.0)
        return np.interp(r, self.sample_grid.r, self.samples)

    def derivative(self, r: np.ndarray) -> np.ndarray:
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "soft_decay":
            return -self.gamma * self.beta * r * (1.0 + r**2) ** (-self.beta / 2.0 - 1.0)
        return np.gradient(self.samples, self.sample_grid.r)[
            np.searchsorted(self.sample_grid.r, r).clip(0, self.sample_grid.n_points - 1)
        ]

    def second_derivative(self, r: np.ndarray) -> np.ndarray:
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "soft_decay":
            q = 1.0 + r**2
            return self.gamma * self.beta * (
                (self.beta + 2.0) * r**2 * q ** (-self.beta / 2.0 - 2.0)
                - q ** (-self.beta / 2.0 - 1.0)
            )
        raise ParameterError("second derivative unavailable for tabulated potentials")

    def virial_weight(self, r: np.ndarray) -> np.ndarray:
        """-r V'(r), the potential part of i[H, A]."""
        return -r * self.derivative(r)

    def decay_norm(self, alpha: float) -> float:
        """|||V|||_alpha = sup_r <r>^alpha |V(r)| (analytic for closed forms)."""
        if alpha < 0:
            raise ParameterError("decay exponent must be nonnegative")
        if self.family == "zero":
            return 0.0
        if self.family == "soft_decay":
            return abs(self.gamma) if alpha <= self.beta else math.inf
        w = (1.0 + self.sample_grid.r**2) ** (alpha / 2.0)
        return float(np.max(w * np.abs(self.samples)))

    @property
    def decay_norms(self) -> dict[float, float]:
        return {a: self.decay_norm(a) for a in DECAY_EXPONENTS}

    @property
    def hardy_constant(self) -> float:
        """c_bar = sup_r r|V(r)|; subordination |V| < 1/(2r) needs c_bar < 1/2."""
        if self.family == "zero":
            return 0.0
        if self.family == "soft_decay":
            if self.beta <= 1:
                return math.inf
            b = self.beta
            return abs(self.gamma) * (b - 1.0) ** (-0.5) * (b / (b - 1.0)) ** (-b / 2.0)
        return float(np.max(self.sample_grid.r * np.abs(self.samples)))

    @property
    def hardy_subordinate(self) -> bool:
        return self.hardy_constant < 0.5

    @property
    def decay_admissible(self) -> bool:
        if self.family == "zero":
            return True
        if self.family == "soft_decay":
            return self.beta > 2.0
        return self.decay_norm(2.0) < math.inf


def zero_potential() -> PotentialSpec:
    return PotentialSpec("zero")


def soft_decay_potential(gamma: float, beta: float) -> PotentialSpec:
    return PotentialSpec("soft_decay", gamma=gamma, beta=beta)


def potential_norms(potential: PotentialSpec, alpha: float, grid: RadialGrid | None = None) -> float:
    """sup over grid nodes of <r>^alpha |V|, merged with the analytic supremum."""
    analytic = potential.decay_norm(alpha)
    if grid is None:
        return analytic
    w = (1.0 + grid.r**2) ** (alpha / 2.0)
    on_grid = float(np.max(w * np.abs(potential(grid.r))))
    return max(on_grid, analytic) if analytic < math.inf else math.inf


# ---------------------------------------------------------------------------
# Matrix-free applies
# ---------------------------------------------------------------------------

def apply_fractional_momentum(psi: WaveFunction, alpha: float) -> WaveFunction:
    """|p|^alpha via the k_m^alpha multiplier; alpha in [-2, 2]."""
    if not (-2.0 <= alpha <= 2.0):
        raise ParameterError(f"fractional power alpha must lie in [-2, 2], got {alpha}")
    mult = psi.grid.k**alpha
    return WaveFunction(psi.grid, apply_k_multiplier(psi.grid, psi.values, mult))


def apply_hamiltonian(psi: WaveFunction, potential: PotentialSpec) -> WaveFunction:
    """H u = |p| u + V u."""
    out = apply_k_multiplier(psi.grid, psi.values, psi.grid.k)
    if not potential.is_zero:
        out = out + potential(psi.grid.r) * psi.values
    return WaveFunction(psi.grid, out)


def apply_generator_A(psi: WaveFunction) -> WaveFunction:
    """A u = -i (r u' + u/2), with u' computed spectrally."""
    du = differentiate(psi.grid, psi.values)
    return WaveFunction(psi.grid, -1j * (psi.grid.r * du + 0.5 * psi.values))


@dataclass
class DilationResult:
    """U(lam) psi together with its per-call quality diagnostics."""

    wavefunction: WaveFunction
    eps_scale: float      # relative norm defect |  ||U psi|| - ||psi||  | / ||psi||
    dropped_mass: float   # probability mass scaled past the outer boundary


class DilationEvaluator:
    """Reusable quintic-spline evaluator of u at arbitrary radii.

    The spline is anchored with the Dirichlet zeros at r = 0 and r = L, so a
    single construction serves every group parameter in a quadrature.
    """

    def __init__(self, psi: WaveFunction):
        g = psi.grid
        x = np.concatenate(([0.0], g.r, [g.extent]))
        y = np.concatenate(([0.0], psi.values, [0.0]))
        self.grid = g
        self.norm_in = psi.norm()
        self._spline = make_interp_spline(x, y, k=5)

    def sample(self, radii: np.ndarray) -> np.ndarray:
        vals = np.zeros(len(radii), dtype=complex)
        inside = (radii >= 0.0) & (radii <= self.grid.extent)
        vals[inside] = self._spline(radii[inside])
        return vals

    def apply(self, lam: float) -> DilationResult:
        g = self.grid
        scale = math.exp(lam)
        out = math.sqrt(scale) * self.sample(scale * g.r)
        wf = WaveFunction(g, out)
        if lam < 0:
            # the image extends past L; record the source mass that is lost
            sel = g.r >= scale * g.extent
            dropped = float(g.h * np.sum(np.abs(self._spline(g.r[sel])) ** 2))
        else:
            dropped = 0.0
        eps = abs(wf.norm() - self.norm_in) / self.norm_in if self.norm_in > 0 else 0.0
        return DilationResult(wf, eps, dropped)


def apply_dilation_group(
    psi: WaveFunction, lam: float, lam_max: float = 3.0
) -> DilationResult:
    """(U(lam) u)(r) = e^{lam/2} u(e^lam r), zero-extended beyond L."""
    if abs(lam) > lam_max:
        raise ParameterError(f"|lambda| = {abs(lam)} exceeds the configured maximum {lam_max}")
    return DilationEvaluator(psi).apply(lam)


def dilation_reference_error(psi: WaveFunction, lam: float) -> float:
    """Interpolation-error estimate for U(lam) from a doubled-resolution reference.

    The state is upsampled exactly (zero-padding in the sine basis, the two
    grids share their momentum nodes) and re-interpolated; the difference
    against the coarse-grid result bounds the coarse interpolation error.
    """
    g = psi.grid
    coarse = apply_dilation_group(psi, lam).wavefunction

    n_fine = 2 * g.n_points + 1
    fine = RadialGrid(n_fine, g.h / 2.0)
    c = np.zeros(n_fine, dtype=complex)
    from scipy.fft import dst

    c[: g.n_points] = dst(psi.values, type=1, norm="ortho") * math.sqrt(
        (n_fine + 1) / (g.n_points + 1)
    )
    u_fine = WaveFunction(fine, dst(c, type=1, norm="ortho"))
    ref = DilationEvaluator(u_fine).apply(lam).wavefunction
    # compare on the coarse nodes (every second fine node)
    diff = coarse.values - ref.values[1::2]
    return float(np.sqrt(g.h) * np.linalg.norm(diff) / max(psi.norm(), 1e-300))


# ---------------------------------------------------------------------------
# Operator handles (composable, with adjoints, for norm estimation)
# ---------------------------------------------------------------------------

class OperatorHandle:
    """Linear operator on sample vectors over a fixed grid.

    Handles are immutable and reentrant; compositions build chains whose
    operator norms the oracle module measures by power iteration.
    """

    def __init__(self, grid: RadialGrid):
        self.grid = grid

    def apply(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self) -> "OperatorHandle":
        raise NotImplementedError

    def apply_wf(self, psi: WaveFunction) -> WaveFunction:
        return WaveFunction(self.grid, self.apply(psi.values))

    def __matmul__(self, other: "OperatorHandle") -> "OperatorHandle":
        return Composition([self, other])

    def __add__(self, other: "OperatorHandle") -> "OperatorHandle":
        return OperatorSum([self, other], [1.0, 1.0])

    def __sub__(self, other: "OperatorHandle") -> "OperatorHandle":
        return OperatorSum([self, other], [1.0, -1.0])

    def __rmul__(self, scalar: complex) -> "OperatorHandle":
        return OperatorSum([self], [scalar])


class KMultiplier(OperatorHandle):
    """Diagonal multiplier in the sine basis (functions of |p|)."""

    def __init__(self, grid: RadialGrid, mult: np.ndarray):
        super().__init__(grid)
        self.mult = np.asarray(mult)

    def apply(self, values):
        return apply_k_multiplier(self.grid, values, self.mult)

    def adjoint(self):
        if np.isrealobj(self.mult):
            return self
        return KMultiplier(self.grid, np.conj(self.mult))


class RMultiplier(OperatorHandle):
    """Pointwise multiplication in position (potentials, position weights)."""

    def __init__(self, grid: RadialGrid, values: np.ndarray):
        super().__init__(grid)
        self.values = np.asarray(values)

    def apply(self, values):
        return self.values * values

    def adjoint(self):
        if np.isrealobj(self.values):
            return self
        return RMultiplier(self.grid, np.conj(self.values))


class GeneratorA(OperatorHandle):
    """The dilation generator A = -i (r d/dr + 1/2); self-adjoint."""

    def apply(self, values):
        du = differentiate(self.grid, values)
        return -1j * (self.grid.r * du + 0.5 * values)

    def adjoint(self):
        return self


class DilationOp(OperatorHandle):
    """U(lam) as a handle; adjoint is U(-lam) by unitarity."""

    def __init__(self, grid: RadialGrid, lam: float, lam_max: float = 3.0):
        super().__init__(grid)
        if abs(lam) > lam_max:
            raise ParameterError(f"|lambda| = {abs(lam)} exceeds {lam_max}")
        self.lam = lam
        self.lam_max = lam_max

    def apply(self, values):
        psi = WaveFunction(self.grid, values)
        return DilationEvaluator(psi).apply(self.lam).wavefunction.values

    def adjoint(self):
        return DilationOp(self.grid, -self.lam, self.lam_max)


class Composition(OperatorHandle):
    def __init__(self, ops: list[OperatorHandle]):
        if not ops:
            raise ParameterError("empty composition")
        for op in ops:
            if op.grid != ops[0].grid:
                raise GridError("composition factors live on different grids")
        super().__init__(ops[0].grid)
        self.ops = list(ops)

    def apply(self, values):
        out = values
        for op in reversed(self.ops):
            out = op.apply(out)
        return out

    def adjoint(self):
        return Composition([op.adjoint() for op in reversed(self.ops)])


class OperatorSum(OperatorHandle):
    def __init__(self, ops: list[OperatorHandle], weights: list[complex]):
        super().__init__(ops[0].grid)
        self.ops = list(ops)
        self.weights = list(weights)

    def apply(self, values):
        out = self.weights[0] * self.ops[0].apply(values)
        for w, op in zip(self.weights[1:], self.ops[1:]):
            out = out + w * op.apply(values)
        return out

    def adjoint(self):
        return OperatorSum([op.adjoint() for op in self.ops], [np.conj(w) for w in self.weights])


class Identity(OperatorHandle):
    def apply(self, values):
        return values

    def adjoint(self):
        return self


def fractional_momentum_op(grid: RadialGrid, alpha: float) -> OperatorHandle:
    if not (-2.0 <= alpha <= 2.0):
        raise ParameterError(f"fractional power alpha must lie in [-2, 2], got {alpha}")
    return KMultiplier(grid, grid.k**alpha)


def potential_op(grid: RadialGrid, potential: PotentialSpec) -> OperatorHandle:
    return RMultiplier(grid, potential(grid.r))


def hamiltonian_op(grid: RadialGrid, potential: PotentialSpec) -> OperatorHandle:
    if potential.is_zero:
        return KMultiplier(grid, grid.k)
    return KMultiplier(grid, grid.k) + potential_op(grid, potential)


def position_weight_op(grid: RadialGrid, s: float) -> OperatorHandle:
    """<r>^s as a position multiplier."""
    return RMultiplier(grid, (1.0 + grid.r**2) ** (s / 2.0))


def commutator_H_A_op(grid: RadialGrid, potential: PotentialSpec) -> OperatorHandle:
    """i[H, A] in closed form: |p| - r V'(r).

    Applying the dilation algebra directly (i[|p|, A] = |p| and
    i[V, A] = -r V') avoids the cancellation error of differencing composed
    commutators in the Mourre checks.
    """
    kin = KMultiplier(grid, grid.k)
    if potential.is_zero:
        return kin
    return kin + RMultiplier(grid, potential.virial_weight(grid.r))


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    """Operational admissibility flags for a potential.

    resonance_free uses the Birman-Schwinger norm || |V|^{1/2} |p|^{-1} |V|^{1/2} ||
    < 1 as the computable stand-in for the absence of zero-energy resonances
    and eigenvalues; it is a surrogate criterion and is reported as such.
    """

    decay_ok: bool
    hardy_ok: bool
    birman_schwinger_norm: float
    resonance_free: bool
    hardy_constant: float = 0.0
    notes: str = "resonance_free is the Birman-Schwinger surrogate criterion"

    @property
    def all_ok(self) -> bool:
        return self.decay_ok and self.hardy_ok and self.resonance_free


def validate_potential(
    potential: PotentialSpec,
    grid: RadialGrid | None = None,
    oracle_points: int = 1024,
    oracle_spacing: float = 0.25,
) -> AdmissibilityReport:
    """Decay, Hardy-subordination and Birman-Schwinger checks."""
    if potential.is_zero:
        return AdmissibilityReport(True, True, 0.0, True, 0.0)
    g = grid if grid is not None and grid.n_points <= 2048 else RadialGrid(oracle_points, oracle_spacing)
    v = potential(g.r)
    sq = np.sqrt(np.abs(v))
    # |V|^{1/2} |p|^{-1} |V|^{1/2} assembled in the sine basis
    j = np.arange(1, g.n_points + 1)
    s_mat = np.sqrt(2.0 / (g.n_points + 1)) * np.sin(
        np.pi * np.outer(j, j) / (g.n_points + 1)
    )
    pinv = (s_mat * (1.0 / g.k)) @ s_mat.T
    bs = (sq[:, None] * pinv) * sq[None, :]
    bs_norm = float(np.linalg.norm(bs, 2))
    return AdmissibilityReport(
        decay_ok=potential.decay_admissible,
        hardy_ok=potential.hardy_subordinate,
        birman_schwinger_norm=bs_norm,
        resonance_free=bs_norm < 1.0,
        hardy_constant=potential.hardy_constant,
    )
