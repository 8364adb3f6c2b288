import math

import numpy as np
import pytest

from halfwave.grid import RadialGrid, WaveFunction, apply_k_multiplier, inner
from halfwave.operators import ParameterError, zero_potential
from halfwave.oracle import assemble_dense, dense_propagate
from halfwave.funcalc import FunctionOfH, SmoothCutoff, make_dyadic_partition, mellin_apply
from halfwave.dynamics import (
    StateSpec,
    SplitStepPropagator,
    Trajectory,
    geometric_times,
    heisenberg_check,
    load_checkpoint,
    observable_series,
    prepare_state,
    propagate_split_step,
    save_checkpoint,
)
from halfwave.probes import gaussian_packet


def test_prepare_state_basic(grid_mid, attractive):
    spec = StateSpec(center=100.0, width=12.0, momentum=0.3,
                     window_lo=0.1, window_hi=0.6)
    prep = prepare_state(spec, attractive, grid_mid)
    assert prep.wavefunction.norm() == pytest.approx(1.0)
    assert prep.tail_norm <= 1e-6
    assert prep.weighted_norms["0.5"] > 0
    assert "1.5" in prep.weighted_norms


def test_prepare_state_rejects_empty_window(grid_mid, attractive):
    # profile concentrated at k ~ 1.5, window far below
    spec = StateSpec(center=100.0, width=30.0, momentum=1.5,
                     window_lo=0.05, window_hi=0.12)
    with pytest.raises(ParameterError):
        prepare_state(spec, attractive, grid_mid)


def test_prepare_state_rejects_unresolvable_window(grid_mid, attractive):
    spec = StateSpec(center=100.0, width=10.0, window_lo=1e-4, window_hi=0.5)
    with pytest.raises(ParameterError):
        prepare_state(spec, attractive, grid_mid)


def test_split_step_free_exact(grid_small, free):
    psi0 = gaussian_packet(grid_small, 20.0, 4.0, 0.5)
    prop = SplitStepPropagator(grid_small, free, 0.05)
    out = prop.advance(psi0.values, 7.0)
    exact = apply_k_multiplier(grid_small, psi0.values, np.exp(-1j * grid_small.k * 7.0))
    assert np.linalg.norm(out - exact) <= 1e-12 * np.linalg.norm(exact)


def test_split_step_norm_conservation(grid_small, attractive):
    psi0 = gaussian_packet(grid_small, 25.0, 4.0, 0.5)
    prop = SplitStepPropagator(grid_small, attractive, 0.05)
    out = prop.advance(psi0.values, 100.0)
    assert abs(np.linalg.norm(out) - np.linalg.norm(psi0.values)) <= 1e-10


def test_split_step_second_order(attractive):
    g = RadialGrid(512, 0.1)
    spec = StateSpec(center=12.0, width=3.0, momentum=-1.0, window_lo=0.5, window_hi=3.0)
    psi0 = prepare_state(spec, attractive, g).wavefunction
    ref = dense_propagate(psi0, attractive, 10.0)
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        out = SplitStepPropagator(g, attractive, dt).advance(psi0.values, 10.0)
        errs.append(math.sqrt(g.h) * np.linalg.norm(out - ref.values))
    slope = np.polyfit(np.log([4e-3, 2e-3, 1e-3]), np.log(errs), 1)[0]
    assert 1.9 <= slope <= 2.1
    assert errs[-1] <= 1e-6


def test_split_step_dt_cap(grid_small, free):
    with pytest.raises(ParameterError):
        SplitStepPropagator(grid_small, free, 0.2)


def test_geometric_times():
    ts = geometric_times(1.0, 16.0, 2.0)
    assert np.allclose(ts, [1, 2, 4, 8, 16])


def test_trajectory_boundary_flag(grid_small, free):
    # outgoing packet reaches the boundary within T: run must be flagged
    psi0 = gaussian_packet(grid_small, 30.0, 4.0, 0.8)
    traj = propagate_split_step(psi0, free, t_end=64.0, dt=0.05)
    assert traj.flagged
    assert traj.norm_drift <= 1e-8


def test_observable_series_support(grid_small, free):
    psi0 = gaussian_packet(grid_small, 10.0, 2.0, 0.5)
    traj = propagate_split_step(psi0, free, t_end=8.0, dt=0.05)
    up = SmoothCutoff("step_up", 1.25, 0.1)
    series = observable_series(traj, up, "outgoing", 1.25)
    # state fully inside r < 0.5 * a * t at late times? support test at t=8:
    # bulk at r ~ 18 needs r > 1.15*8 = 9.2... instead check exact-zero case
    psi_far = gaussian_packet(grid_small, 5.0, 1.0, 0.0)
    traj2 = Trajectory(grid_small, free, np.array([50.0]), [psi_far], 0.0,
                       np.zeros(1), False, 0.05)
    z = observable_series(traj2, up, "outgoing", 1.25)
    assert z.values[0] == 0.0


def test_observable_series_side_conditions(grid_small, free):
    psi0 = gaussian_packet(grid_small, 10.0, 2.0, 0.5)
    traj = propagate_split_step(psi0, free, t_end=4.0, dt=0.05)
    up = SmoothCutoff("step_up", 1.25, 0.1)
    with pytest.raises(ParameterError):
        observable_series(traj, up, "outgoing", 0.9)
    with pytest.raises(ParameterError):
        observable_series(traj, up, "incoming", 1.5)


def test_complementary_pair_partition(grid_small, free):
    # squared profiles with aligned widths sum to the norm
    from halfwave.funcalc import square_pair

    psi0 = gaussian_packet(grid_small, 25.0, 5.0, 0.4)
    traj = propagate_split_step(psi0, free, t_end=16.0, dt=0.05)
    lo_up, lo_down = square_pair(0.5, 0.1)
    hi_up, hi_down = square_pair(1.25, 0.1)
    g = grid_small
    for i, t in enumerate(traj.times):
        psi = traj.states[i]
        x = g.r / t
        p_in = g.h * float(np.sum((lo_down(x) * np.abs(psi.values)) ** 2))
        p_band = g.h * float(np.sum((lo_up(x) * hi_down(x) * np.abs(psi.values)) ** 2))
        p_out = g.h * float(np.sum((hi_up(x) * np.abs(psi.values)) ** 2))
        total = p_in + p_band + p_out
        assert abs(total - psi.norm() ** 2) <= 1e-10


def test_heisenberg_commuting_observable(attractive):
    # Phi = g(H) constant in t: both sides vanish within filter error
    g = RadialGrid(512, 0.5)
    spec = StateSpec(center=30.0, width=5.0, momentum=0.4, window_lo=0.2, window_hi=1.2)
    prep = prepare_state(spec, attractive, g)
    traj = propagate_split_step(prep.wavefunction, attractive, t_end=8.0, dt=0.02)
    gq = FunctionOfH(g, attractive,
                     SmoothCutoff("step_down", 0.8, 0.2), tol=1e-8)

    def family(t):
        return lambda psi: gq.apply_wf(psi)

    # both sides vanish for a conserved observable: check them directly
    _, raw = heisenberg_check(family, traj, [len(traj.times) // 2], return_raw=True)
    assert abs(raw[0, 0]) <= 1e-5 and abs(raw[0, 1]) <= 1e-5


def test_heisenberg_shell_observable_free(free):
    # Phi_n(t) = E_n F(A/(R t 2^-n) > 1) E_n on a shell-filtered free state
    g = RadialGrid(1024, 0.5)
    spec = StateSpec(center=60.0, width=10.0, momentum=0.2, window_lo=0.06,
                     window_hi=0.5, window_margin=0.15)
    prep = prepare_state(spec, free, g)
    part = make_dyadic_partition(3, 0.05, g)
    e2 = FunctionOfH(g, free, part.shells[2].profile, tol=1e-8)
    psi_n = e2.apply_wf(prep.wavefunction).normalized()
    traj = propagate_split_step(psi_n, free, t_end=64.0, dt=0.02)
    cut = SmoothCutoff("step_up", 1.0, 0.25)
    big_r = 2.0
    mk = {"mass_tol": 1e-4, "estimate_roundtrip": False, "strict": False}

    def family(t):
        s = big_r * t * 0.25
        def apply(psi):
            inner_f, _ = mellin_apply(e2.apply_wf(psi), cut, s, **mk)
            return e2.apply_wf(inner_f)
        return apply

    idx = [len(traj.times) // 2]
    res = heisenberg_check(family, traj, idx, dt_fd=0.05)
    assert res[0] <= 1e-3

    def family_weighted(t):
        s = big_r * t * 0.25
        def apply(psi):
            prof = lambda tau: (tau / t) * cut(tau / s)
            inner_f, _ = mellin_apply(e2.apply_wf(psi), prof, 1.0, **mk)
            return e2.apply_wf(inner_f)
        return apply

    res2 = heisenberg_check(family_weighted, traj, idx, dt_fd=0.05)
    assert res2[0] <= 1e-3


def test_checkpoint_roundtrip(tmp_path, grid_small, free):
    psi0 = gaussian_packet(grid_small, 20.0, 4.0, 0.3)
    traj = propagate_split_step(psi0, free, t_end=4.0, dt=0.05)
    path = tmp_path / "test.traj"
    save_checkpoint(path, traj, "zero")
    back = load_checkpoint(path)
    assert back.grid == traj.grid
    assert np.array_equal(back.times, traj.times)
    for a, b in zip(back.states, traj.states):
        assert np.array_equal(a.values, b.values)
