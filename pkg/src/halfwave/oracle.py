"""Dense small-grid references: full matrices, exact functional calculus, norms.

Everything the matrix-free paths compute has a ground-truth counterpart here,
assembled on grids of at most 2048 points so that a full eigendecomposition
stays cheap.  |p| is built as S diag(k) S^T with S the orthonormal sine
matrix, A as the spectral differentiation matrix symmetrized to kill the
O(1e-12) asymmetry of the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from halfwave.grid import RadialGrid, WaveFunction, differentiate
from halfwave.operators import OperatorHandle, PotentialSpec, ParameterError

DENSE_MAX_POINTS = 2048


class DenseSizeError(ValueError):
    """Grid too large for dense assembly."""


def sine_matrix(grid: RadialGrid) -> np.ndarray:
    """Orthonormal DST-I matrix: S[j,m] = sqrt(2/(N+1)) sin(pi (j+1)(m+1)/(N+1))."""
    n = grid.n_points
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(j, j) / (n + 1))


@dataclass
class DenseOperator:
    """Full matrix with an optional cached eigendecomposition."""

    grid: RadialGrid
    matrix: np.ndarray
    hermitian: bool = True
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and orthonormal eigenvectors (computed once, then shared)."""
        if self._eig is None:
            if not self.hermitian:
                raise ParameterError("eigendecomposition is only cached for Hermitian kinds")
            vals, vecs = np.linalg.eigh(self.matrix)
            self._eig = (vals, vecs)
        return self._eig

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def assemble_dense(
    kind: str,
    grid: RadialGrid,
    potential: PotentialSpec | None = None,
    alpha: float = 1.0,
    s: float = 1.0,
) -> DenseOperator:
    """Assemble |p|^alpha, V, H, A or <r>^s as a full matrix.

    kind: "momentum" (alias fractional with alpha), "potential", "hamiltonian",
    "generator" (A), "position_weight" (<r>^s).
    """
    n = grid.n_points
    if n > DENSE_MAX_POINTS:
        raise DenseSizeError(f"dense assembly capped at {DENSE_MAX_POINTS} points, got {n}")
    if kind in ("momentum", "fractional_momentum"):
        smat = sine_matrix(grid)
        m = (smat * grid.k**alpha) @ smat.T
        return DenseOperator(grid, m)
    if kind == "potential":
        if potential is None:
            raise ParameterError("potential kind requires a PotentialSpec")
        return DenseOperator(grid, np.diag(potential(grid.r)).astype(float))
    if kind == "hamiltonian":
        if potential is None:
            raise ParameterError("hamiltonian kind requires a PotentialSpec")
        smat = sine_matrix(grid)
        m = (smat * grid.k) @ smat.T + np.diag(potential(grid.r))
        return DenseOperator(grid, m)
    if kind == "generator":
        cols = np.empty((n, n), dtype=complex)
        eye = np.eye(n)
        for j in range(n):
            du = differentiate(grid, eye[:, j].astype(complex))
            cols[:, j] = -1j * (grid.r * du + 0.5 * eye[:, j])
        m = 0.5 * (cols + cols.conj().T)
        return DenseOperator(grid, m)
    if kind == "position_weight":
        return DenseOperator(grid, np.diag((1.0 + grid.r**2) ** (s / 2.0)))
    raise ParameterError(f"unknown dense kind {kind!r}")


def dense_function(op: DenseOperator, f: Callable[[np.ndarray], np.ndarray]) -> DenseOperator:
    """f applied to the eigenvalues in the eigenbasis (spectral theorem)."""
    vals, vecs = op.eig()
    fv = np.asarray(f(vals))
    m = (vecs * fv) @ vecs.conj().T
    return DenseOperator(op.grid, m, hermitian=bool(np.isrealobj(fv)))


def dense_function_apply(
    op: DenseOperator, f: Callable[[np.ndarray], np.ndarray], values: np.ndarray
) -> np.ndarray:
    """f(M) v without forming the full matrix of f(M)."""
    vals, vecs = op.eig()
    return vecs @ (np.asarray(f(vals)) * (vecs.conj().T @ values))


def dense_propagate(
    psi0: WaveFunction, potential: PotentialSpec, t: float, hamiltonian: DenseOperator | None = None
) -> WaveFunction:
    """e^{-iHt} psi0 by eigendecomposition; unitary to roundoff."""
    h_op = hamiltonian if hamiltonian is not None else assemble_dense("hamiltonian", psi0.grid, potential)
    vals, vecs = h_op.eig()
    coeff = vecs.conj().T @ psi0.values
    return WaveFunction(psi0.grid, vecs @ (np.exp(-1j * vals * t) * coeff))


def lanczos_propagate(
    psi0: WaveFunction,
    potential: PotentialSpec,
    t: float,
    krylov_dim: int = 64,
    step: float = 1.0,
) -> WaveFunction:
    """Second propagation oracle: Lanczos exponential in a Krylov basis.

    Restarted every `step` time units; intended for cross-checks at N <= 2048.
    """
    from halfwave.operators import apply_hamiltonian
    from scipy.linalg import expm

    if psi0.grid.n_points > DENSE_MAX_POINTS:
        raise DenseSizeError("lanczos oracle capped at 2048 points")
    psi = psi0.values.copy()
    remaining = t
    while remaining > 1e-14:
        dt = min(step, remaining)
        beta0 = np.linalg.norm(psi)
        v = np.zeros((krylov_dim + 1, len(psi)), dtype=complex)
        alpha = np.zeros(krylov_dim)
        beta = np.zeros(krylov_dim + 1)
        v[0] = psi / beta0
        m_used = krylov_dim
        for j in range(krylov_dim):
            w = apply_hamiltonian(WaveFunction(psi0.grid, v[j]), potential).values
            if j > 0:
                w = w - beta[j] * v[j - 1]
            alpha[j] = np.real(np.vdot(v[j], w))
            w = w - alpha[j] * v[j]
            # full reorthogonalization keeps the small basis numerically clean
            w = w - (v[: j + 1].conj() @ w) @ v[: j + 1]
            beta[j + 1] = np.linalg.norm(w)
            if beta[j + 1] < 1e-14:
                m_used = j + 1
                break
            v[j + 1] = w / beta[j + 1]
        tmat = np.diag(alpha[:m_used]) + np.diag(beta[1:m_used], 1) + np.diag(beta[1:m_used], -1)
        small = expm(-1j * tmat * dt)[:, 0]
        psi = beta0 * (small @ v[:m_used])
        remaining -= dt
    return WaveFunction(psi0.grid, psi)


@dataclass
class NormEstimate:
    value: float
    converged: bool
    iterations: int


def operator_norm(
    op: OperatorHandle | DenseOperator | np.ndarray,
    rtol: float = 1e-6,
    max_iter: int = 10000,
    seed: int = 7,
) -> NormEstimate:
    """Largest singular value: direct SVD for dense, power iteration otherwise.

    Power iteration runs on K^dagger K with a randomized start and stops when
    the Rayleigh estimate stagnates to `rtol` relative; non-convergence is
    flagged, not raised.
    """
    if isinstance(op, np.ndarray):
        return NormEstimate(float(np.linalg.norm(op, 2)), True, 0)
    if isinstance(op, DenseOperator):
        return NormEstimate(float(np.linalg.norm(op.matrix, 2)), True, 0)
    rng = np.random.default_rng(seed)
    n = op.grid.n_points
    adj = op.adjoint()
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    prev = 0.0
    for it in range(1, max_iter + 1):
        y = adj.apply(op.apply(x))
        val = np.linalg.norm(y)
        if val == 0.0:
            return NormEstimate(0.0, True, it)
        x = y / val
        est = np.sqrt(val)
        if abs(est - prev) <= rtol * max(est, 1e-300):
            return NormEstimate(float(est), True, it)
        prev = est
    return NormEstimate(float(prev), False, max_iter)
