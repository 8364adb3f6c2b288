"""Numerical certification of the static operator inequalities.

Each check returns a BoundCertificate holding the raw measured values, any
fit diagnostics, and pass/fail against a configured acceptance envelope.
Dense routes share one eigendecomposition per (grid, potential) through a
DenseWorkspace; measured norms reduce to singular values of small column
blocks in the H eigenbasis, so a full shell battery costs one eigh plus one
large matmul.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from halfwave.grid import RadialGrid, WaveFunction
from halfwave.operators import (
    PotentialSpec,
    ParameterError,
    apply_fractional_momentum,
    apply_generator_A,
    apply_hamiltonian,
    commutator_H_A_op,
    validate_potential,
    DilationOp,
    KMultiplier,
    RMultiplier,
)
from halfwave.oracle import DenseOperator, assemble_dense, operator_norm, sine_matrix
from halfwave.funcalc import DyadicShell, make_dyadic_partition
from halfwave.probes import bandlimited_state


@dataclass
class BoundCertificate:
    """One measured inequality: raw values always stored alongside any fit."""

    identifier: str
    params: dict
    measured: dict
    asserted: str
    envelope: dict
    passed: bool
    fit: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def clean(x):
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, np.ndarray):
                return [clean(v) for v in x.tolist()]
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, (np.bool_, bool)):
                return bool(x)
            return x

        return {
            "id": self.identifier,
            "params": clean(self.params),
            "measured": clean(self.measured),
            "asserted": self.asserted,
            "envelope": clean(self.envelope),
            "fit": clean(self.fit),
            "pass": bool(self.passed),
        }


class DenseWorkspace:
    """Shared dense factorizations for one (grid, potential) pair.

    B = S^T U maps H eigenvectors to the sine basis, where |p| and every
    function of it are diagonal; most shell norms become singular values of
    scaled column blocks of B or U.
    """

    def __init__(self, grid: RadialGrid, potential: PotentialSpec):
        if grid.n_points > 2048:
            raise ParameterError("dense workspace capped at 2048 points")
        self.grid = grid
        self.potential = potential
        self.v = potential(grid.r)
        self.h_op = assemble_dense("hamiltonian", grid, potential)
        self.evals, self.evecs = self.h_op.eig()
        self.smat = sine_matrix(grid)
        self.b = self.smat.T @ self.evecs  # sine-basis coordinates of H eigenvectors

    def shell_columns(self, shell: DyadicShell, cutoff: float = 1e-14):
        w = shell.profile(self.evals)
        idx = np.nonzero(np.abs(w) > cutoff)[0]
        return idx, w[idx]

    def norm_p_shell(self, shell: DyadicShell) -> float:
        """|| |p| E_n(H) ||."""
        idx, w = self.shell_columns(shell)
        if len(idx) == 0:
            return 0.0
        block = (self.grid.k[:, None] * self.b[:, idx]) * w
        return float(np.linalg.svd(block, compute_uv=False)[0])

    def norm_v_shell(self, shell: DyadicShell) -> float:
        """|| V E_n(H) ||."""
        idx, w = self.shell_columns(shell)
        if len(idx) == 0:
            return 0.0
        block = (self.v[:, None] * self.evecs[:, idx]) * w
        return float(np.linalg.svd(block, compute_uv=False)[0])

    def norm_weight_shell(self, shell: DyadicShell, s: float = -1.0) -> float:
        """|| <r>^s E_n(H) ||."""
        idx, w = self.shell_columns(shell)
        if len(idx) == 0:
            return 0.0
        wt = (1.0 + self.grid.r**2) ** (s / 2.0)
        block = (wt[:, None] * self.evecs[:, idx]) * w
        return float(np.linalg.svd(block, compute_uv=False)[0])

    def norm_pshell_hshell(self, shell_p: DyadicShell, shell_h: DyadicShell) -> float:
        """|| E_nbar(|p|) E_n(H) ||."""
        idx, w = self.shell_columns(shell_h)
        if len(idx) == 0:
            return 0.0
        mult = shell_p.profile(self.grid.k)
        block = (mult[:, None] * self.b[:, idx]) * w
        return float(np.linalg.svd(block, compute_uv=False)[0])

    def norm_delta_shell(self, shell: DyadicShell) -> float:
        """|| tilde-E_n(H) (E_n(H) - E_n(|p|)) ||."""
        tilde = shell.widened()
        wt = tilde(self.evals)
        rows = np.nonzero(np.abs(wt) > 1e-14)[0]
        if len(rows) == 0:
            return 0.0
        e_h = shell.profile(self.evals)
        e_k = shell.profile(self.grid.k)
        # in the H eigenbasis: diag(e_h) - B^T diag(e_k) B, restricted to tilde rows
        cross = (self.b[:, rows].T * 0.0)  # placeholder shape (m, N)
        cross = self.b[:, rows].T @ (e_k[:, None] * self.b)
        mat = -cross
        mat[np.arange(len(rows)), rows] += e_h[rows]
        mat = wt[rows, None] * mat
        return float(np.linalg.svd(mat, compute_uv=False)[0])

    def mourre_upper(self, shell: DyadicShell) -> float:
        """|| E_n i[H, A] E_n || with i[H,A] = |p| - r V' applied in closed form."""
        idx, w = self.shell_columns(shell)
        if len(idx) == 0:
            return 0.0
        w_a = self.potential.virial_weight(self.grid.r)
        pe = (self.grid.k[:, None] * self.b[:, idx]) * w
        core = self.b[:, idx].T @ pe + (self.evecs[:, idx].T @ (w_a[:, None] * self.evecs[:, idx]) * w)
        core = w[:, None] * core
        return float(np.linalg.norm(core, 2))

    def mourre_lower(self, shell: DyadicShell, support_cut: float = 1e-3) -> float:
        """Smallest generalized eigenvalue of (E_n |p| E_n, E_n^2) on range(E_n)."""
        from scipy.linalg import eigh

        idx, w = self.shell_columns(shell, cutoff=support_cut)
        if len(idx) == 0:
            return math.nan
        pe = (self.grid.k[:, None] * self.b[:, idx]) * w
        a_mat = w[:, None] * (self.b[:, idx].T @ pe)
        b_mat = np.diag(w**2)
        vals = eigh(0.5 * (a_mat + a_mat.T), b_mat, eigvals_only=True)
        return float(vals[0])


# ---------------------------------------------------------------------------
# Individual checks
# ---------------------------------------------------------------------------

def check_hardy(
    grid: RadialGrid, n_states: int = 1000, seed: int = 42, slack: float = 1e-2
) -> BoundCertificate:
    """|| r^{-1} |p|^{-1} || <= 2: dense SVD plus random-state ratios."""
    smat = sine_matrix(grid)
    pinv = (smat * (1.0 / grid.k)) @ smat.T
    mat = (1.0 / grid.r)[:, None] * pinv
    dense_norm = float(np.linalg.norm(mat, 2))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_states):
        x = rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)
        worst = max(worst, float(np.linalg.norm(mat @ x) / np.linalg.norm(x)))
    passed = dense_norm <= 2.0 * (1.0 + slack) and worst <= 2.0 * (1.0 + slack)
    return BoundCertificate(
        "hardy_half_line",
        {"n_points": grid.n_points, "n_states": n_states, "seed": seed},
        {"dense_norm": dense_norm, "max_state_ratio": worst},
        "||r^-1 |p|^-1|| <= 2",
        {"bound": 2.0, "slack": slack},
        passed,
    )


_RADIAL_IDENTITY_PAIRS = ((2.0, -0.75), (-2.0, -0.75), (2.0, -3.0), (-2.0, -3.0))


def check_radial_identity(grid: RadialGrid, tol: float = 1e-6) -> BoundCertificate:
    """Which (c1, c0) satisfies r^2(-Delta) = A^2 + c1*iA + c0 on this sector.

    The sign of the iA term is convention-dependent and the source constants
    are inconsistent; the identity is resolved by measurement and the winning
    pair recorded as operative.  Probes are O(1)-scale analytic bumps (the
    constant term would be invisible against r^2*Lap on large-r states), so
    the grid must resolve r ~ 1: h <= 0.1 and L >= 30.
    """
    if grid.h > 0.1 or grid.extent < 30.0:
        raise ParameterError("radial identity check needs h <= 0.1 and L >= 30")
    # odd-smooth probes (r times polynomials in r^2): their odd extension is
    # smooth at the origin, so the sine-basis derivatives are spectrally exact
    scales = (1.0, 2.0, 4.0)
    probes = [
        WaveFunction(grid, grid.r * np.exp(-((grid.r / s) ** 2) / 2.0)).normalized()
        for s in scales
    ] + [
        WaveFunction(
            grid,
            grid.r * (1.0 + (grid.r / s) ** 2) * np.exp(-((grid.r / s) ** 2) / 2.0),
        ).normalized()
        for s in scales
    ]
    residuals = {pair: 0.0 for pair in _RADIAL_IDENTITY_PAIRS}
    for psi in probes:
        lap = apply_fractional_momentum(psi, 2.0)
        lhs = grid.r**2 * lap.values
        a_psi = apply_generator_A(psi)
        a2_psi = apply_generator_A(a_psi)
        scale = math.sqrt(grid.h) * np.linalg.norm(lhs)
        for c1, c0 in _RADIAL_IDENTITY_PAIRS:
            rhs = a2_psi.values + c1 * (1j * a_psi.values) + c0 * psi.values
            res = math.sqrt(grid.h) * np.linalg.norm(lhs - rhs) / max(scale, 1e-300)
            residuals[(c1, c0)] = max(residuals[(c1, c0)], res)
    winner = min(residuals, key=residuals.get)
    others = [v for k, v in residuals.items() if k != winner]
    passed = residuals[winner] <= tol and min(others) >= 1e-1
    return BoundCertificate(
        "radial_identity",
        {"n_points": grid.n_points, "h": grid.h},
        {
            "residuals": {f"c1={k[0]:+g},c0={k[1]:+g}": v for k, v in residuals.items()},
            "winner": f"c1={winner[0]:+g},c0={winner[1]:+g}",
        },
        "r^2(-Lap) = A^2 + c1 iA + c0 for exactly one candidate pair",
        {"tol": tol, "separation": 1e-1},
        passed,
    )


def check_mutual_domination(
    potential: PotentialSpec, grid: RadialGrid, bound_state_tol: float = 1e-10
) -> BoundCertificate:
    """H >= m|p| and |p| >= delta*H on the continuous subspace; m, delta > 0."""
    from scipy.linalg import eigh

    report = validate_potential(potential, grid)
    ws = DenseWorkspace(grid, potential)
    p_dense = (ws.smat * grid.k) @ ws.smat.T
    h_dense = ws.h_op.matrix
    n_bound = int(np.sum(ws.evals < -bound_state_tol))
    flagged = n_bound > 0
    if flagged:
        keep = ws.evals >= -bound_state_tol
        basis = ws.evecs[:, keep]
        h_c = basis.T @ h_dense @ basis
        p_c = basis.T @ p_dense @ basis
    else:
        h_c, p_c = h_dense, p_dense
    m = float(eigh(h_c, 0.5 * (p_c + p_c.T), eigvals_only=True)[0])
    delta = float(eigh(0.5 * (p_c + p_c.T), h_c, eigvals_only=True)[0])
    passed = m > 0 and delta > 0 and report.all_ok
    return BoundCertificate(
        "mutual_domination",
        {"potential": potential.label, "n_points": grid.n_points, "n_bound_states": n_bound},
        {"m": m, "delta": delta, "flagged_bound_states": flagged,
         "birman_schwinger": report.birman_schwinger_norm},
        "H >= m|p| and |p| >= delta H with m, delta > 0 (continuous subspace)",
        {"positive": True},
        passed,
    )


def check_dyadic_localization(
    potential: PotentialSpec,
    grid: RadialGrid,
    n_list: Sequence[int],
    delta: float = 0.05,
    envelope_ratio: float = 8.0,
    workspace: DenseWorkspace | None = None,
) -> BoundCertificate:
    """The five 2^n-scaled shell quantities, certified uniformly bounded in n."""
    part = make_dyadic_partition(max(n_list), delta, grid)
    ws = workspace if workspace is not None else DenseWorkspace(grid, potential)
    v_norm2 = max(potential.decay_norm(2.0), 1e-300)
    rows = {}
    for n in n_list:
        sh = part.shells[n]
        scale = 2.0**n
        row = {
            "p_shell": ws.norm_p_shell(sh) * scale,
            "v_shell": ws.norm_v_shell(sh) * scale,
            "weight_shell": ws.norm_weight_shell(sh, -1.0) * scale,
            "delta_shell": ws.norm_delta_shell(sh) * scale / v_norm2,
        }
        cross = []
        for nbar in (n - 2, n + 2):
            if 0 <= nbar <= part.n_max:
                cross.append(ws.norm_pshell_hshell(part.shells[nbar], sh) * scale)
        row["cross_shell"] = max(cross) if cross else 0.0
        rows[n] = row
    ratios = {}
    passed = True
    for key in ("p_shell", "v_shell", "weight_shell"):
        vals = np.array([rows[n][key] for n in n_list])
        ratio = float(vals.max() / max(vals.min(), 1e-300))
        ratios[key] = ratio
        passed = passed and ratio <= envelope_ratio
    # delta and cross terms are upper-bounded rather than ratio-tested: they
    # may legitimately degenerate to ~0 (V=0 makes them vanish identically)
    for key in ("delta_shell", "cross_shell"):
        vals = np.array([rows[n][key] for n in n_list])
        ratios[key + "_max"] = float(vals.max())
        passed = passed and bool(np.all(np.isfinite(vals)))
    return BoundCertificate(
        "dyadic_localization",
        {"potential": potential.label, "n_points": grid.n_points,
         "n_list": list(n_list), "delta": delta},
        {"per_shell": {str(n): rows[n] for n in n_list}, "ratios": ratios},
        "2^n-scaled shell norms uniformly bounded across n",
        {"max_over_min": envelope_ratio},
        passed,
    )


def check_support_disjointness(
    n: int,
    lam: float,
    grid: RadialGrid,
    delta: float = 0.05,
    threshold_far: float = 1e-3,
    threshold_near: float = 0.1,
    use_dense: bool = True,
) -> BoundCertificate:
    """|| E_n(|p|) U(lam) E_n(|p|) ||: ~0 once the scaled supports separate.

    Supports disjoin at e^lam > 2(1+delta)/(1-delta), i.e. lam beyond
    ln 2 + ln((1+delta)/(1-delta)).  The norm is taken over states whose
    dilation orbit stays inside the box: smooth interior shields multiply
    both factors, since on (0, L) the unshielded sup is dominated by
    wavepackets whose stretched image is truncated at the artificial
    boundary (a discretization artifact, not support overlap).  The shell
    multiplier's position kernel decays on the scale 2^{n+1}/delta, so the
    extent L must be a few times that for the far-side threshold to be
    measurable.
    """
    from halfwave.funcalc import SmoothCutoff

    part = make_dyadic_partition(n, delta, grid)
    shell = part.shells[n]
    mult = shell.profile(grid.k)
    lam_crit = math.log(2.0) + math.log((1 + delta) / (1 - delta))
    lam_eff = -abs(lam)
    edge_in = 0.75 * math.exp(lam_eff) * grid.extent
    shield_in = SmoothCutoff("step_down", edge_in, 0.12 * edge_in)(grid.r)
    shield_out = SmoothCutoff("step_down", 0.75 * grid.extent, 0.09 * 0.75 * grid.extent)(grid.r)
    if use_dense and grid.n_points <= 2048:
        smat = sine_matrix(grid)
        e_mat = (smat * mult) @ smat.T
        cols = np.empty((grid.n_points, grid.n_points))
        dil = DilationOp(grid, lam_eff)
        eye = np.eye(grid.n_points)
        for j in range(grid.n_points):
            cols[:, j] = dil.apply(eye[:, j].astype(complex)).real
        full = (shield_out[:, None] * (e_mat @ cols @ e_mat)) * shield_in
        value = float(np.linalg.norm(full, 2))
        method = "dense"
    else:
        chain = (
            RMultiplier(grid, shield_out)
            @ KMultiplier(grid, mult)
            @ DilationOp(grid, lam_eff)
            @ KMultiplier(grid, mult)
            @ RMultiplier(grid, shield_in)
        )
        est = operator_norm(chain)
        value = est.value
        method = f"power_iteration(converged={est.converged})"
    disjoint = abs(lam) >= lam_crit
    passed = value <= threshold_far if disjoint else value >= threshold_near
    return BoundCertificate(
        "support_disjointness",
        {"n": n, "lambda": lam, "delta": delta, "n_points": grid.n_points, "method": method},
        {"norm": value, "lambda_critical": lam_crit, "scaled_supports_disjoint": disjoint},
        "||E_n(|p|) U(lam) E_n(|p|)|| small for |lam| past ln 2, O(1) below",
        {"far": threshold_far, "near": threshold_near},
        passed,
    )


def check_reverse_mourre(
    potential: PotentialSpec,
    grid: RadialGrid,
    n_list: Sequence[int],
    delta: float = 0.05,
    upper_envelope: float = 4.0,
    lower_floor: float = 0.8,
    gate: float = 0.2,
    workspace: DenseWorkspace | None = None,
    commutator_probe_seed: int = 23,
) -> BoundCertificate:
    """Upper: ||E_n i[H,A] E_n|| * 2^n uniform in n.  Lower: quantitative
    Mourre eigenvalue ratio >= lower_floor wherever the potential gate holds.

    Also measures which coefficient in i[H,A] = |p| - coeff * rV' matches the
    directly-differenced commutator (the source writes both 1 and 2).
    """
    part = make_dyadic_partition(max(n_list), delta, grid)
    ws = workspace if workspace is not None else DenseWorkspace(grid, potential)
    uppers, lowers, gates = {}, {}, {}
    for n in n_list:
        sh = part.shells[n]
        uppers[n] = ws.mourre_upper(sh) * 2.0**n
        lowers[n] = ws.mourre_lower(sh) / 2.0 ** (-n - 1)
        gates[n] = ws.norm_v_shell(sh) * 2.0 ** (n + 1)

    up_vals = np.array([uppers[n] for n in n_list])
    upper_ratio = float(up_vals.max() / max(up_vals.min(), 1e-300))
    lower_ok = all(
        (gates[n] > gate) or (lowers[n] >= lower_floor) for n in n_list
    )

    # commutator coefficient: i[H,A]psi vs |p|psi - c * rV' psi, c in {1, 2},
    # measured on a fine grid where the probe overlaps the potential core
    # (rV' is negligible at large r, which would make the comparison vacuous)
    g_core = RadialGrid(1024, 0.05)
    psi = bandlimited_state(g_core, 1.0, 4.0, 10.0, 2.5, commutator_probe_seed)
    h_a = apply_hamiltonian(apply_generator_A(psi), potential).values
    a_h = apply_generator_A(apply_hamiltonian(psi, potential)).values
    direct = 1j * (h_a - a_h)
    p_psi = apply_fractional_momentum(psi, 1.0).values
    rvp = g_core.r * potential.derivative(g_core.r) * psi.values
    res = {}
    for coeff in (1.0, 2.0):
        cand = p_psi - coeff * rvp
        res[coeff] = float(
            np.linalg.norm(direct - cand) / max(np.linalg.norm(direct), 1e-300)
        )
    coeff_winner = min(res, key=res.get)

    passed = upper_ratio <= upper_envelope and lower_ok
    return BoundCertificate(
        "reverse_mourre",
        {"potential": potential.label, "n_points": grid.n_points,
         "n_list": list(n_list), "delta": delta},
        {
            "upper_scaled": {str(n): uppers[n] for n in n_list},
            "lower_ratio": {str(n): lowers[n] for n in n_list},
            "gate_values": {str(n): gates[n] for n in n_list},
            "upper_max_over_min": upper_ratio,
            "commutator_coeff_residuals": {str(k): v for k, v in res.items()},
            "commutator_coeff_winner": coeff_winner,
        },
        "||E_n i[H,A] E_n|| ~ 2^-n uniformly; E_n|p|E_n >= (1-eps) 2^-n-1 on range",
        {"upper_ratio": upper_envelope, "lower_floor": lower_floor, "gate": gate},
        passed,
    )


# ---------------------------------------------------------------------------
# Kernel decay bounds (time-indexed operator chains on the dense oracle)
# ---------------------------------------------------------------------------

def _fit_log_slope(t_list: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    mask = values > 0
    if mask.sum() < 2:
        return math.nan, math.nan
    coeff = np.polyfit(np.log(t_list[mask]), np.log(values[mask]), 1)
    return float(coeff[0]), float(coeff[1])


def _half_comm_probes(grid: RadialGrid, shell: DyadicShell, t_arr: np.ndarray, seed: int):
    """Interior shell-localized probes whose A-content tracks the moving
    transition of Fmin(A/t): centers at x*t plus two fixed stations."""
    lo, hi = shell.support
    per_t = []
    for i, t in enumerate(t_arr):
        centers = [x * t for x in (0.25, 0.5, 0.8)] + [0.15 * grid.extent, 0.3 * grid.extent]
        probes = []
        for j, c in enumerate(centers):
            width = max(8 * grid.h, 0.08 * c)
            if c - 3.2 * width <= 0 or c + 3.2 * width >= 0.85 * grid.extent:
                continue
            probes.append(
                bandlimited_state(grid, lo, hi, c, width, seed + 31 * i + j)
            )
        per_t.append(probes)
    return per_t


def check_kernel_bounds(
    potential: PotentialSpec,
    grid: RadialGrid,
    n_list: Sequence[int],
    t_list: Sequence[float],
    a: float = 1.25,
    big_r: float = 1.1,
    b: float = 0.5,
    a_far: float = 5.5,
    r_far: float = 1.05,
    delta: float = 0.3,
    cutoff_width: float = 0.25,
    frac_width: float = 0.95,
    slope_max: float = -0.9,
    prefactor_ratio: float = 3.0,
    ir_floor: float = 0.08,
    workspace: DenseWorkspace | None = None,
) -> BoundCertificate:
    """Decay fits for the five kernel bounds on dense chains.

    families (norm vs t, scaling asserted):
      w_shell      : F_n(A/t) W(r) E_n(H), W = <r>^-3          ~ 1/t
      out_incoming : E_n F_a(r/t > a_far) Fbar_n(A/t)          ~ 2^n/t
      loc_lemma    : E_n F_b(r/t < b) F_n(A/t) E_n             ~ 2^n/t
      half_comm    : [E_n |p|^{1/2}, Fmin_n(A/t)]              ~ 2^{n/2}/t
      frac_power   : [H^{1/2}, F_a(r/t)] H^{-1/2} E(H >= h0)   ~ 1/t
    Side conditions enforced: a > R > 1 (both parameter sets) and b/R < 1.

    Measurement notes, consequences of the finite box and finite window:
      - Fbar_n is the two-sided complement 1 - F(A/s>1) - F(-A/s>1); a
        one-sided complement is identically 1 on incoming states at r > at,
        where the bound fails trivially.  On the half-line |A| ~ k*r on a
        shell, so genuine support separation needs a large against R (at
        a ~ R the norm is O(1) by classical phase-space overlap and the
        asserted constant degrades); the family runs at (a_far, r_far) on a
        stretched copy of the grid so a_far * t_max stays interior.
      - frac_power carries the theorems' own energy localization: an
        infrared filter E(H >= ir_floor) excludes the box's isolated
        infrared modes, which in the continuum belong to the continuous
        spectrum handled by the H^{-1/2} weight.  Its cutoff is wide
        (frac_width) to keep the 1/t prefactor small enough that the decay
        regime starts inside the t window.
      - every chain is sandwiched between smooth interior shields; shell
        margins default to delta = 0.3 here, which shortens the shell
        kernels' position tails and the onset time of the asymptotic decay.
      - half_comm reaches its 1/t regime only at t ~ 2^n * O(10/delta); over
        a fixed t window the fitted slope may sit above the asymptotic -1
        while the values remain inside the asserted envelope.  Raw series
        are always stored alongside the fits.
    """
    from halfwave.funcalc import SmoothCutoff

    if not (a > big_r > 1.0) or not (a_far > r_far > 1.0):
        raise ParameterError(f"need a > R > 1, got ({a}, {big_r}) and ({a_far}, {r_far})")
    if not (b / big_r < 1.0 and b < 1.0):
        raise ParameterError(f"need b < 1 and b/R < 1, got b={b}, R={big_r}")
    t_arr = np.asarray(sorted(t_list), dtype=float)
    if t_arr[-1] / t_arr[0] < 10.0:
        raise ParameterError("t_list must span at least one decade")
    if a * t_arr[-1] > 0.72 * grid.extent:
        raise ParameterError(
            f"extent L = {grid.extent:.0f} too small for a*t_max = {a * t_arr[-1]:.0f}"
        )
    ws = workspace if workspace is not None else DenseWorkspace(grid, potential)
    part = make_dyadic_partition(max(n_list), delta, grid)
    a_dense = assemble_dense("generator", grid)
    a_vals, a_vecs = a_dense.eig()
    h_vals, h_vecs = ws.evals, ws.evecs
    sqrt_h = h_vecs @ (np.sqrt(np.clip(h_vals, 0, None))[:, None] * h_vecs.T)
    ir_mult = np.where(h_vals >= ir_floor, 1.0 / np.sqrt(np.clip(h_vals, 1e-300, None)), 0.0)
    inv_sqrt_ir = h_vecs @ (ir_mult[:, None] * h_vecs.T)
    w_decay = (1.0 + grid.r**2) ** (-1.5)
    p_half = (ws.smat * np.sqrt(grid.k)) @ ws.smat.T
    shield = SmoothCutoff("step_down", 0.78 * grid.extent, 0.06 * grid.extent)(grid.r)

    # stretched copy for the far-field family: a_far * t_max interior
    stretch = max(1.0, (a_far * t_arr[-1]) / (0.65 * grid.extent))
    grid_far = RadialGrid(grid.n_points, grid.h * stretch)
    ws_far = DenseWorkspace(grid_far, potential)
    a_far_dense = assemble_dense("generator", grid_far)
    af_vals, af_vecs = a_far_dense.eig()
    shield_far = SmoothCutoff("step_down", 0.78 * grid_far.extent, 0.06 * grid_far.extent)(grid_far.r)

    def shielded_norm(mat: np.ndarray, chi: np.ndarray) -> float:
        return float(np.linalg.norm((chi[:, None] * mat) * chi, 2))

    series: dict[str, dict[int, np.ndarray]] = {
        "w_shell": {}, "out_incoming": {}, "loc_lemma": {}, "half_comm": {}
    }
    frac_vals = np.zeros(len(t_arr))
    f_afar_cut = SmoothCutoff("step_up", a_far, cutoff_width * a_far)
    f_frac_cut = SmoothCutoff("step_up", a, frac_width * a)
    f_b_cut = SmoothCutoff("step_down", b, cutoff_width * b)
    fn_cut = SmoothCutoff("step_up", 1.0, cutoff_width)
    fmin_cut = SmoothCutoff("step_down", 0.5, 0.5)

    def a_function(fvals):
        return (a_vecs * fvals) @ a_vecs.conj().T

    def a_function_far(fvals):
        return (af_vecs * fvals) @ af_vecs.conj().T

    for n in n_list:
        sh = part.shells[n]
        e_h = h_vecs @ (sh.profile(h_vals)[:, None] * h_vecs.T)
        e_h_far = ws_far.evecs @ (sh.profile(ws_far.evals)[:, None] * ws_far.evecs.T)
        e_half = e_h @ p_half
        for key in series:
            series[key].setdefault(n, np.zeros(len(t_arr)))
        for i, t in enumerate(t_arr):
            s_n = big_r * t * 2.0 ** (-n)
            f_n = a_function(fn_cut(a_vals / s_n))
            series["w_shell"][n][i] = shielded_norm(f_n @ (w_decay[:, None] * e_h), shield)
            s_far = r_far * t * 2.0 ** (-n)
            fbar = a_function_far(
                1.0 - fn_cut(af_vals / s_far) - fn_cut(-af_vals / s_far)
            )
            f_afar = f_afar_cut(grid_far.r / t)
            series["out_incoming"][n][i] = shielded_norm(
                e_h_far @ (f_afar[:, None] * fbar), shield_far
            )
            f_b = f_b_cut(grid.r / t)
            series["loc_lemma"][n][i] = shielded_norm(e_h @ (f_b[:, None] * f_n) @ e_h, shield)
            f_min = a_function(fmin_cut(np.abs(a_vals) * 2.0**n / t))
            series["half_comm"][n][i] = shielded_norm(e_half @ f_min - f_min @ e_half, shield)
    for i, t in enumerate(t_arr):
        f_a = f_frac_cut(grid.r / t)
        comm = sqrt_h * f_a[None, :] - f_a[:, None] * sqrt_h
        frac_vals[i] = shielded_norm(comm @ inv_sqrt_ir, shield)

    fits, levels, passed = {}, {}, True
    t_mid = math.sqrt(t_arr[0] * t_arr[-1])
    for key, scaling in (("w_shell", 0.0), ("out_incoming", 1.0),
                         ("loc_lemma", 1.0), ("half_comm", 0.5)):
        for n in n_list:
            slope, intercept = _fit_log_slope(t_arr, series[key][n])
            fits[f"{key}_n{n}"] = slope
            # compare 2^n-scaled levels at the window's geometric center
            # (intercepts extrapolate to t = 1 and are meaningless when the
            # fitted slopes differ between shells)
            levels[f"{key}_n{n}"] = math.exp(intercept + slope * math.log(t_mid)) * 2.0 ** (-scaling * n)
            passed = passed and slope <= slope_max
        lv = [levels[f"{key}_n{n}"] for n in n_list]
        if len(lv) >= 2:
            for x, y in zip(lv[:-1], lv[1:]):
                ratio = max(x, y) / max(min(x, y), 1e-300)
                passed = passed and ratio <= prefactor_ratio
                fits[f"{key}_prefactor_ratio"] = ratio
    slope_frac, _ = _fit_log_slope(t_arr, frac_vals)
    fits["frac_power"] = slope_frac
    passed = passed and slope_frac <= slope_max

    measured = {
        "t_list": t_arr,
        **{f"{key}_n{n}": series[key][n] for key in series for n in n_list},
        "frac_power": frac_vals,
    }
    return BoundCertificate(
        "kernel_decay",
        {"potential": potential.label, "n_points": grid.n_points, "n_list": list(n_list),
         "a": a, "R": big_r, "b": b, "a_far": a_far, "R_far": r_far, "delta": delta,
         "cutoff_width": cutoff_width, "frac_width": frac_width, "ir_floor": ir_floor},
        measured,
        "operator norms decay like 1/t (2^n- or 2^{n/2}-scaled levels consistent)",
        {"slope_max": slope_max, "prefactor_ratio": prefactor_ratio},
        passed,
        fit=fits,
    )
