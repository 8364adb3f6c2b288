import math

import numpy as np
import pytest

from halfwave.grid import RadialGrid, WaveFunction, apply_k_multiplier
from halfwave.operators import ParameterError, soft_decay_potential, zero_potential
from halfwave.oracle import assemble_dense, dense_function_apply
from halfwave.funcalc import (
    FilterCapError,
    FunctionOfH,
    MellinDomainError,
    SmoothCutoff,
    apply_function_of_A,
    apply_function_of_H,
    commutator_expansion,
    function_of_A_by_group_quadrature,
    make_cutoff,
    make_dyadic_partition,
    mellin_apply,
    square_pair,
)
from halfwave.probes import bandlimited_state, logwide_state, random_state


# --- cutoffs ----------------------------------------------------------------

def test_cutoff_step_values():
    f = make_cutoff("step_up", 1.0, 0.1)
    assert f(1.2) == 1.0
    assert f(0.85) == 0.0
    assert f(1.0) == pytest.approx(0.5, abs=1e-3)


def test_cutoff_derivative_properties():
    f = make_cutoff("step_up", 1.0, 0.1)
    lam = np.linspace(0.5, 1.5, 40001)
    fp = f.derivative(lam)
    assert fp.min() >= -1e-15
    assert fp.max() <= (1.0 / 0.1) * (1 + 1e-2)
    assert np.trapezoid(fp, lam) == pytest.approx(1.0, abs=1e-10)
    fpp = f.second_derivative(lam)
    assert np.abs(fpp).max() <= 8.0 / 0.1**2
    # derivative evaluators consistent with finite differences
    eps = 1e-6
    fd = (f(lam + eps) - f(lam - eps)) / (2 * eps)
    assert np.max(np.abs(fd - fp)) <= 1e-6 / 0.1


def test_cutoff_range_and_monotonicity():
    f = make_cutoff("step_up", 2.0, 0.5)
    lam = np.linspace(0.0, 4.0, 10001)
    vals = f(lam)
    assert vals.min() >= 0.0 and vals.max() <= 1.0 + 1e-12
    assert np.all(np.diff(vals) >= -1e-15)
    g = make_cutoff("step_down", 2.0, 0.5)
    assert np.allclose(g(lam), 1.0 - vals, atol=1e-15)


def test_bump_cutoff():
    b = make_cutoff("bump", 1.0, 0.2)
    assert b(1.0) == pytest.approx(1.0, abs=1e-12)
    assert b(0.79) == 0.0 and b(1.21) == 0.0
    lam = np.linspace(0.7, 1.3, 5001)
    assert b(lam).max() <= 1.0 + 1e-12


def test_cutoff_errors():
    with pytest.raises(ParameterError):
        make_cutoff("step_up", 1.0, 0.0)
    with pytest.raises(ParameterError):
        make_cutoff("sideways", 1.0, 0.1)


def test_square_pair_partition():
    up, down = square_pair(1.0, 0.2)
    lam = np.linspace(0.0, 2.0, 2001)
    assert np.max(np.abs(up(lam) ** 2 + down(lam) ** 2 - 1.0)) <= 1e-14


def test_fourier_of_derivative():
    f = make_cutoff("step_up", 1.0, 0.25)
    phi = f.fourier_of_derivative(np.array([0.0]))
    assert phi[0] == pytest.approx(1.0, abs=1e-12)  # integral of F'
    # quadrature matches a dense reference at moderate frequency
    xi = np.array([3.0])
    c = np.linspace(0.75, 1.25, 20001)
    ref = np.trapezoid(f.derivative(c) * np.exp(-1j * xi[0] * c), c)
    assert abs(f.fourier_of_derivative(xi)[0] - ref) <= 1e-7


# --- dyadic shells ----------------------------------------------------------

def test_shell_intervals_and_support():
    part = make_dyadic_partition(3, 0.05)
    assert part.shells[1].interval == (0.25, 0.5)
    lo, hi = part.shells[1].support
    assert lo == pytest.approx(0.25 * 0.95)
    assert hi == pytest.approx(0.5 * 1.05)
    lam = np.linspace(0.01, 1.2, 5000)
    prof = part.shells[1].profile(lam)
    outside = (lam < lo - 1e-9) | (lam > hi + 1e-9)
    assert np.max(np.abs(prof[outside])) == 0.0


def test_partition_identity():
    part = make_dyadic_partition(7, 0.05)
    lam = np.linspace(2.0**-9, 1.5, 3000)
    assert np.max(np.abs(part.reconstruction(lam) - 1.0)) <= 1e-10


def test_partition_resolvability():
    g = RadialGrid(16384, 0.25)
    make_dyadic_partition(7, 0.05, g)  # admissible
    with pytest.raises(ParameterError):
        make_dyadic_partition(8, 0.05, g)  # resolution cutoff exceeded


def test_widened_shell_covers_support():
    part = make_dyadic_partition(3, 0.05)
    sh = part.shells[2]
    tilde = sh.widened()
    lam = np.linspace(*sh.support, 500)
    assert np.min(tilde(lam)) >= 1.0 - 1e-12


# --- functions of H ----------------------------------------------------------

def test_function_of_h_identity(grid_small, attractive):
    psi = random_state(grid_small, 0)
    out, cert = apply_function_of_H(lambda lam: np.ones_like(lam), attractive, psi, tol=1e-8)
    assert math.sqrt(grid_small.h) * np.linalg.norm(out.values - psi.values) <= 1e-7
    assert cert.sup_error <= 1e-8


def test_function_of_h_zero_potential_exact(grid_small, free):
    part = make_dyadic_partition(3, 0.05)
    psi = random_state(grid_small, 1)
    out, cert = apply_function_of_H(part.shells[2].profile, free, psi, tol=1e-6)
    exact = apply_k_multiplier(grid_small, psi.values, part.shells[2].profile(grid_small.k))
    assert np.linalg.norm(out.values - exact) == 0.0
    assert cert.exact


def test_function_of_h_vs_dense(attractive):
    g = RadialGrid(256, 1.0)
    part = make_dyadic_partition(3, 0.05, g)
    h_dense = assemble_dense("hamiltonian", g, attractive)
    psi = random_state(g, 2)
    out, cert = apply_function_of_H(part.shells[2].profile, attractive, psi, tol=1e-6)
    ref = dense_function_apply(h_dense, part.shells[2].profile, psi.values)
    assert math.sqrt(g.h) * np.linalg.norm(out.values - ref) <= 2 * cert.sup_error + 1e-8


def test_function_of_h_idempotence(grid_small, attractive):
    part = make_dyadic_partition(1, 0.05, grid_small)
    sh = part.shells[1]
    psi = random_state(grid_small, 3)
    tol = 1e-6
    filtered, _ = apply_function_of_H(sh.profile, attractive, psi, tol=tol)
    again, _ = apply_function_of_H(sh.widened(), attractive, filtered, tol=tol)
    err = math.sqrt(grid_small.h) * np.linalg.norm(again.values - filtered.values)
    assert err <= 2 * tol


def test_function_of_h_cap():
    g = RadialGrid(1024, 0.05)  # wide spectral window, narrow resolvable shell
    v = soft_decay_potential(-0.3, 3.0)
    with pytest.raises(FilterCapError):
        FunctionOfH(g, v, make_dyadic_partition(4, 0.05).shells[4].profile,
                    tol=1e-8, degree_cap=256)


def test_partition_reconstruction_on_state(grid_small, attractive):
    # || sum E_n^2 psi + tail^2 psi - psi || <= (n_max + 2) * tol
    g = grid_small
    part = make_dyadic_partition(3, 0.05)
    psi = bandlimited_state(g, 0.1, 0.45, 0.3 * g.extent, 0.05 * g.extent, 5)
    tol = 1e-7
    acc = np.zeros(g.n_points, dtype=complex)
    for sh in part.shells:
        out, _ = apply_function_of_H(sh.squared, attractive, psi, tol=tol)
        acc += out.values
    out_tail, _ = apply_function_of_H(lambda lam: part.tail(lam) ** 2, attractive, psi, tol=tol)
    acc += out_tail.values
    err = math.sqrt(g.h) * np.linalg.norm(acc - psi.values)
    assert err <= (part.n_max + 2) * tol


# --- functions of A ----------------------------------------------------------

def test_mellin_identity(grid_mid):
    psi = bandlimited_state(grid_mid, 0.2, 0.8, 0.25 * grid_mid.extent, 20.0, 9)
    out, rep = apply_function_of_A(lambda t: np.ones_like(t), 5.0, psi)
    err = math.sqrt(grid_mid.h) * np.linalg.norm(out.values - psi.values)
    assert err <= 1e-6
    assert rep.roundtrip_error <= 1e-6


def test_mellin_vs_dense_low_scale():
    # dense f(A) eigenbasis is trustworthy when the multiplier varies below
    # the state's Mellin content floor; agreement there validates both paths
    g = RadialGrid(512, 1.0)
    a_dense = assemble_dense("generator", g)
    f = make_cutoff("step_up", 1.0, 0.25)
    errs = []
    rng = np.random.default_rng(17)
    for trial in range(20):
        s = float(rng.uniform(1.0, 6.0))
        psi = bandlimited_state(g, 0.25, 0.8, 0.3 * g.extent, 20.0, rng)
        out, _ = apply_function_of_A(f, s, psi, estimate_roundtrip=False)
        ref = dense_function_apply(a_dense, lambda t: f(t / s), psi.values)
        errs.append(math.sqrt(g.h) * np.linalg.norm(out.values - ref))
    assert max(errs) <= 1e-5


def test_mellin_vs_analytic_packet():
    # Mellin-Gaussian wave packet: f(A/s) has a closed form in Mellin space
    g = RadialGrid(512, 1.0)
    f = make_cutoff("step_up", 1.0, 0.25)
    s = 32.0
    x0, sx, tau0 = math.log(120.0), 0.35, 30.0
    x = np.log(g.r)
    v = np.exp(-((x - x0) ** 2) / (2 * sx**2) + 1j * tau0 * x)
    uvals = v / np.sqrt(g.r)
    nrm = math.sqrt(g.h) * np.linalg.norm(uvals)
    psi = WaveFunction(g, uvals / nrm)
    tau = np.linspace(tau0 - 30 / sx, tau0 + 30 / sx, 60001)
    vhat = sx * math.sqrt(2 * math.pi) * np.exp(-0.5 * sx**2 * (tau - tau0) ** 2) * np.exp(
        -1j * (tau - tau0) * x0
    )
    w = f(tau / s) * vhat
    dtau = tau[1] - tau[0]
    exact = np.empty(g.n_points, dtype=complex)
    for chunk in range(0, g.n_points, 128):
        ph = np.exp(1j * np.outer(x[chunk:chunk + 128], tau))
        exact[chunk:chunk + 128] = (ph @ (w * dtau)) / (2 * math.pi)
    exact = (exact / np.sqrt(g.r)) / nrm
    out, _ = apply_function_of_A(f, s, psi)
    assert math.sqrt(g.h) * np.linalg.norm(out.values - exact) <= 2e-5


def test_mellin_selfadjoint(grid_mid):
    g = grid_mid
    f = make_cutoff("step_up", 1.0, 0.25)
    phi = bandlimited_state(g, 0.2, 0.7, 0.25 * g.extent, 18.0, 1)
    psi = bandlimited_state(g, 0.2, 0.7, 0.3 * g.extent, 18.0, 2)
    from halfwave.grid import inner

    a, _ = apply_function_of_A(f, 4.0, psi, estimate_roundtrip=False)
    b, _ = apply_function_of_A(f, 4.0, phi, estimate_roundtrip=False)
    assert abs(inner(phi, a) - np.conj(inner(psi, b))) <= 1e-8


def test_mellin_domain_rejection(grid_mid):
    v = np.ones(grid_mid.n_points, dtype=complex)  # mass everywhere incl. boundaries
    psi = WaveFunction(grid_mid, v).normalized()
    with pytest.raises(MellinDomainError):
        mellin_apply(psi, lambda t: np.ones_like(t), 1.0)


def test_group_quadrature_cross_check(grid_mid):
    # F(A/s) by dilation-group quadrature agrees with the Mellin route when
    # s * delta is large enough for the transform of F' to decay in range
    g = grid_mid
    f = make_cutoff("step_up", 1.0, 0.3)
    psi = bandlimited_state(g, 0.25, 0.6, 0.25 * g.extent, 18.0, 21)
    s = 64.0
    ref, _ = apply_function_of_A(f, s, psi, estimate_roundtrip=False)
    out = function_of_A_by_group_quadrature(f, s, psi)
    err = math.sqrt(g.h) * np.linalg.norm(out.values - ref.values)
    assert err <= 5e-4


# --- commutator expansion -----------------------------------------------------

def test_expansion_trivial_cutoff(grid_mid):
    # f == 1 on the state's A-content: commutator and expansion both ~ 0
    g = grid_mid
    one = make_cutoff("step_up", -100.0, 1.0)
    psi = bandlimited_state(g, 0.2, 0.6, 0.25 * g.extent, 18.0, 3)
    rep = commutator_expansion("p", one, 8.0, 1, [psi])
    assert rep.probes[0].direct_norm <= 1e-5
    assert rep.max_remainder <= 2e-5


def test_expansion_order2_below_order1():
    g = RadialGrid(1024, 0.5)
    f = make_cutoff("step_up", 1.0, 0.4)
    probes = [logwide_state(g, 0.35, 8.0, 0.75 * g.extent)]
    mk = {"mass_tol": 3e-5, "estimate_roundtrip": False}
    r1 = commutator_expansion("p", f, 16.0, 1, probes, mellin_kw=mk)
    r2 = commutator_expansion("p", f, 16.0, 2, probes, mellin_kw=mk)
    assert r2.max_remainder <= r1.max_remainder


def test_expansion_hamiltonian_kind(attractive):
    g = RadialGrid(1024, 0.5)
    f = make_cutoff("step_up", 1.0, 0.4)
    probes = [logwide_state(g, 0.3, 10.0, 0.7 * g.extent)]
    mk = {"mass_tol": 3e-5, "estimate_roundtrip": False}
    rep = commutator_expansion("hamiltonian", f, 32.0, 1, probes,
                               potential=attractive, mellin_kw=mk)
    # the expansion captures the direct commutator to leading order
    assert rep.probes[0].remainder_norm <= 0.25 * rep.probes[0].direct_norm


def test_expansion_rejects_bad_order(grid_mid):
    f = make_cutoff("step_up", 1.0, 0.25)
    psi = bandlimited_state(grid_mid, 0.2, 0.6, 0.25 * grid_mid.extent, 15.0, 4)
    with pytest.raises(ParameterError):
        commutator_expansion("p", f, 8.0, 3, [psi])
    with pytest.raises(ParameterError):
        commutator_expansion("x", f, 8.0, 1, [psi])
