from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavbistab.dynamics import (
    IntegratorControls,
    MeanFieldState,
    NotSteadyError,
    RampSpec,
    homogeneous_rhs,
    integrate,
    integrate_many,
    random_states,
    rhs,
    rhs_norm,
    stability,
)
from cavbistab.params import SystemParams, collective, derive
from cavbistab.phases import resonant_onset
from cavbistab.steadystate import photon_numbers, steady_states

TIGHT = IntegratorControls(rtol=1e-10, atol=1e-12, n_samples=101)


def test_ground_state_is_stationary_without_pump(lab):
    assert rhs_norm(MeanFieldState.ground(), lab) == 0.0
    positions = np.linspace(0, np.pi, 5)
    p = lab.replace(n_atoms=5)
    assert np.max(np.abs(rhs(MeanFieldState.ground(positions), p).to_vector())) == 0.0


def test_empty_cavity_charges_up():
    p = SystemParams(g=0.3, gamma=1.0, n_atoms=0, eta_plus=0.8, delta_c=0.5)
    traj = integrate(MeanFieldState.ground(), p, t_end=10.0, controls=TIGHT)
    steady = p.eta_plus / complex(p.kappa, -p.delta_c)
    expected = steady * (1 - np.exp(complex(-p.kappa, p.delta_c) * traj.t))
    got = traj.y[:, 3] + 1j * traj.y[:, 4]
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-6)


def test_decoupled_atom_relaxes():
    p = SystemParams(g=0.0, gamma=0.7, n_atoms=3, delta_a=1.3)
    start = MeanFieldState(0.2 + 0.1j, 0.4, 0j)
    traj = integrate(start, p, t_end=8.0, controls=TIGHT)
    z = traj.y[:, 2]
    s = traj.y[:, 0] + 1j * traj.y[:, 1]
    np.testing.assert_allclose(z, -1 + 1.4 * np.exp(-0.7 * traj.t), atol=1e-8)
    np.testing.assert_allclose(s, (0.2 + 0.1j) * np.exp(complex(-0.35, 1.3) * traj.t), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bloch_ball_is_invariant(seed):
    rng = np.random.default_rng(seed)
    p = collective(2.0, 0.5, 50, eta_plus=3.0, delta_a=0.3, delta_c=-0.2)
    (state,) = random_states(rng, 1, alpha_scale=2.0)
    traj = integrate(state, p, t_end=5.0, controls=IntegratorControls(rtol=1e-9, atol=1e-11, n_samples=51))
    excess = [traj.state(k).bloch_excess() for k in range(len(traj.t))]
    assert max(excess) <= 1e-7


def test_steady_states_are_fixed_points_with_expected_stability(lab):
    q = lab.with_n_eta(1e5 / derive(lab).s1)
    states = steady_states(q, with_stability=True)
    assert [s.stability for s in states] == ["stable", "unstable", "stable"]
    for s in states:
        assert rhs_norm(MeanFieldState.from_steady(q, s), q) <= 1e-10 * (1 + q.eta_plus)


def test_triple_root_is_marginal():
    onset = resonant_onset(SystemParams(g=0.5, gamma=1.0, n_atoms=1))
    q = SystemParams(g=0.5, gamma=1.0, n_atoms=16).with_n_eta(onset.n_eta)
    (s,) = steady_states(q)
    tag, rate = stability(q, s)
    assert tag == "marginal"
    assert abs(rate) <= 1e-6


def test_empty_cavity_state_is_stable():
    q = SystemParams(g=0.5, gamma=1.0, n_atoms=0, eta_plus=1.0)
    (s,) = steady_states(q)
    assert stability(q, s) == ("stable", pytest.approx(-0.5))


def test_stability_rejects_non_stationary_state(lab):
    q = lab.with_n_eta(10.0)
    with pytest.raises(NotSteadyError):
        stability(q, MeanFieldState(0j, -1.0, 1.0 + 0j))


def test_perturbed_stable_state_returns():
    p = collective(3.0, 1.0, 200, delta_a=0.5, delta_c=0.5)
    p = p.with_n_eta(50.0)
    (s,) = steady_states(p, with_stability=True)
    assert s.stability == "stable"
    kick = MeanFieldState(s.sigma_minus + 0.01, s.sigma_z - 0.01, s.alpha_plus * 1.05)
    traj = integrate(kick, p, t_end=60.0, controls=TIGHT)
    final = traj.final_state
    assert abs(final.alpha_plus - s.alpha_plus) <= 1e-6 * abs(s.alpha_plus)
    assert rhs_norm(final, p) <= 1e-6


def test_slow_pump_ramp_tracks_quasi_static_branch():
    # relaxation time is of order 1/kappa, so the lag behind the root is ~ 2 tau / t
    p = collective(3.0, 1.0, 200)
    ramp = RampSpec("pump", start=0.0, stop=np.sqrt(30.0), duration=4000.0)
    controls = IntegratorControls(rtol=1e-9, atol=1e-11, t_eval=np.linspace(1000.0, 4000.0, 7))
    traj = integrate(MeanFieldState.ground(), p, ramp=ramp, t_end=4000.0, controls=controls)
    for t, n in zip(traj.t, traj.photon_number):
        eta = float(ramp.value(t))
        (expected,) = photon_numbers(p.replace(eta_plus=eta)).values
        assert n == pytest.approx(expected, rel=1e-2)


def test_detuning_ramp_holds_cavity_offset():
    p = SystemParams(g=0.1, gamma=1.0, n_atoms=4, delta_a=0.0, delta_c=-0.5)
    ramp = RampSpec("delta_a", start=-1.0, stop=1.0, duration=10.0)
    da, dc, eta = ramp.apply(p, 5.0)
    assert (da, dc, eta) == pytest.approx((0.0, -0.5, 0.0))
    da, dc, _ = ramp.apply(p, 20.0)
    assert da - dc == pytest.approx(p.delta_ca) and da == 1.0
    held = RampSpec("delta_a", start=-1.0, stop=1.0, duration=10.0, hold="delta_c")
    assert held.apply(p, 0.0)[1] == -0.5
    with pytest.raises(ValueError):
        RampSpec("gamma", 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        RampSpec("pump", 0.0, 1.0, 0.0)


def test_tolerance_convergence():
    p = collective(2.0, 0.5, 100, eta_plus=4.0, delta_a=0.2, delta_c=0.2)
    coarse = integrate(MeanFieldState.ground(), p, t_end=20.0, controls=IntegratorControls(rtol=1e-6, atol=1e-8))
    fine = integrate(MeanFieldState.ground(), p, t_end=20.0, controls=IntegratorControls(rtol=1e-10, atol=1e-12))
    np.testing.assert_allclose(coarse.y[-1], fine.y[-1], atol=1e-4)
    lsoda = integrate(MeanFieldState.ground(), p, t_end=20.0, controls=IntegratorControls(rtol=1e-10, atol=1e-12, method="LSODA"))
    np.testing.assert_allclose(lsoda.y[-1], fine.y[-1], atol=1e-6)


def test_stacked_integration_matches_single(rng):
    p = collective(2.0, 0.5, 100, eta_plus=2.0)
    states = random_states(rng, 3, alpha_scale=1.0)
    many = integrate_many(states, p, t_end=5.0, controls=TIGHT)
    for state, traj in zip(states, many):
        single = integrate(state, p, t_end=5.0, controls=TIGHT)
        np.testing.assert_allclose(traj.y[-1], single.y[-1], atol=1e-8)


def test_per_atom_equations_reduce_to_homogeneous():
    n = 6
    p = collective(1.5, 0.8, n, eta_plus=0.7, delta_a=0.4, delta_c=-0.1)
    positions = np.zeros(n)
    s, z, a = 0.1 - 0.2j, -0.6, 0.3 + 0.5j
    state = MeanFieldState(np.full(n, s), np.full(n, z), a, 0j, positions)
    per_atom = rhs(state, p)
    hom = homogeneous_rhs([s.real, s.imag, z, a.real, a.imag], p.g, n, p.gamma, p.kappa, p.delta_a, p.delta_c, p.eta_plus)
    assert per_atom.sigma_minus == pytest.approx(np.full(n, complex(hom[0], hom[1])))
    assert per_atom.sigma_z == pytest.approx(np.full(n, hom[2]))
    assert per_atom.alpha_plus == pytest.approx(complex(hom[3], hom[4]))


def test_atom_number_mismatch_rejected(lab):
    state = MeanFieldState.ground(np.zeros(3))
    with pytest.raises(ValueError):
        rhs(state, lab)
    with pytest.raises(ValueError):
        integrate(state, lab, t_end=1.0)
