import numpy as np
import pytest

from halfwave.grid import RadialGrid
from halfwave.operators import soft_decay_potential, zero_potential, ParameterError
from halfwave.estimates import (
    DenseWorkspace,
    check_dyadic_localization,
    check_hardy,
    check_kernel_bounds,
    check_mutual_domination,
    check_radial_identity,
    check_reverse_mourre,
    check_support_disjointness,
)


@pytest.fixture(scope="module")
def shell_workspace(attractive):
    # shells 0..5 resolvable at this size; unit tests stay under the
    # acceptance scale (full n = 0..7 runs at N = 2048 in acceptance)
    grid = RadialGrid(512, 2.8)
    return grid, DenseWorkspace(grid, attractive)


def test_hardy_certificate():
    cert = check_hardy(RadialGrid(512, 0.25), n_states=100)
    assert cert.passed
    assert 1.5 <= cert.measured["dense_norm"] <= 2.0
    assert cert.measured["max_state_ratio"] <= 2.02


def test_radial_identity_winner():
    cert = check_radial_identity(RadialGrid(1024, 0.05))
    assert cert.passed
    assert cert.measured["winner"] == "c1=+2,c0=-0.75"
    others = [v for k, v in cert.measured["residuals"].items() if k != cert.measured["winner"]]
    assert min(others) >= 1e-1


def test_radial_identity_needs_fine_grid():
    with pytest.raises(ParameterError):
        check_radial_identity(RadialGrid(256, 1.0))


def test_mutual_domination_cases(attractive):
    g = RadialGrid(512, 1.0)
    cert = check_mutual_domination(attractive, g)
    assert cert.passed
    assert 0.0 < cert.measured["m"] < 1.0
    assert 0.0 < cert.measured["delta"] <= 1.0 + 1e-8

    free_cert = check_mutual_domination(zero_potential(), g)
    assert abs(free_cert.measured["m"] - 1.0) <= 1e-10
    assert abs(free_cert.measured["delta"] - 1.0) <= 1e-10

    rep = check_mutual_domination(soft_decay_potential(0.3, 3.0), g)
    assert rep.measured["m"] >= 1.0 - 1e-9


def test_dyadic_localization(shell_workspace, attractive):
    grid, ws = shell_workspace
    cert = check_dyadic_localization(attractive, grid, list(range(6)), workspace=ws)
    assert cert.passed
    ratios = cert.measured["ratios"]
    assert ratios["p_shell"] <= 8.0


def test_dyadic_localization_free_exact():
    # V = 0: the measured norms equal the analytic multiplier suprema on the
    # grid, and far shells are exactly orthogonal
    g = RadialGrid(512, 2.8)
    ws = DenseWorkspace(g, zero_potential())
    from halfwave.funcalc import make_dyadic_partition

    part = make_dyadic_partition(4, 0.05, g)
    sh = part.shells[2]
    measured = ws.norm_p_shell(sh)
    analytic = np.max(g.k * sh.profile(g.k))
    assert measured == pytest.approx(analytic, rel=1e-8)
    cross = ws.norm_pshell_hshell(part.shells[0], part.shells[2])
    assert cross <= 1e-12


def test_reverse_mourre(shell_workspace, attractive):
    grid, ws = shell_workspace
    cert = check_reverse_mourre(attractive, grid, list(range(6)), workspace=ws)
    assert cert.passed
    assert cert.measured["upper_max_over_min"] <= 4.0
    assert cert.measured["commutator_coeff_winner"] == 1.0
    for n, v in cert.measured["lower_ratio"].items():
        if cert.measured["gate_values"][n] <= 0.2:
            assert v >= 0.8


def test_reverse_mourre_free_exact():
    g = RadialGrid(512, 2.8)
    ws = DenseWorkspace(g, zero_potential())
    from halfwave.funcalc import make_dyadic_partition

    part = make_dyadic_partition(3, 0.05, g)
    sh = part.shells[1]
    upper = ws.mourre_upper(sh) * 2.0
    analytic = 2.0 * np.max(g.k * sh.profile(g.k) ** 2)
    assert upper == pytest.approx(analytic, rel=1e-8)
    lower = ws.mourre_lower(sh) / 2.0 ** (-2)
    assert lower >= 1.0 - 0.05 - 0.01  # (1 - delta) up to grid discreteness


def test_support_disjointness_transition():
    g = RadialGrid(1024, 1.0)
    near = check_support_disjointness(2, 0.60, g)
    assert near.measured["norm"] >= 0.1
    zero = check_support_disjointness(2, 0.0, g)
    assert zero.measured["norm"] == pytest.approx(1.0, abs=1e-3)


def test_support_disjointness_monotone_tail():
    g = RadialGrid(1024, 1.0)
    vals = [check_support_disjointness(2, lam, g).measured["norm"]
            for lam in (0.9, 1.2, 1.6)]
    assert vals[0] >= vals[1] * 0.5 and vals[1] >= vals[2] * 0.5


def test_kernel_bounds_side_conditions(attractive):
    g = RadialGrid(512, 2.0)
    with pytest.raises(ParameterError):
        check_kernel_bounds(attractive, g, [2], [50, 500], b=1.2)
    with pytest.raises(ParameterError):
        check_kernel_bounds(attractive, g, [2], [50, 500], a=1.0, big_r=1.1)
    with pytest.raises(ParameterError):
        check_kernel_bounds(attractive, g, [2], [50.0, 100.0])  # < 1 decade


def test_kernel_bounds_fast_families(attractive):
    # trimmed kernel battery: one shell, shorter t list
    g = RadialGrid(512, 2.0)
    t_list = list(np.geomspace(50.0, 500.0, 5))
    cert = check_kernel_bounds(attractive, g, [2], t_list)
    assert cert.fit["w_shell_n2"] <= -0.9
    assert cert.fit["loc_lemma_n2"] <= -0.9
    assert cert.fit["out_incoming_n2"] <= -0.9
    assert cert.fit["frac_power"] <= -0.9


def test_certificates_reproducible(attractive):
    a = check_hardy(RadialGrid(256, 0.25), n_states=50, seed=9)
    b = check_hardy(RadialGrid(256, 0.25), n_states=50, seed=9)
    assert a.as_dict() == b.as_dict()
