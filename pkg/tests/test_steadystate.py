from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavbistab.params import SystemParams, collective, derive
from cavbistab.steadystate import (
    AtomConfiguration,
    SpuriousRootError,
    atomic_observables,
    coefficient_arrays,
    coefficients,
    excited_population,
    field_amplitude,
    fixed_point_rhs,
    photon_numbers,
    single_mode_guess,
    steady_states,
    two_mode_residual,
    two_mode_solve,
)


def test_coefficients_empty_cavity_example():
    # s1 = 2 needs g = gamma / 2
    p = SystemParams(g=0.5, gamma=1.0, n_atoms=0, eta_plus=1.0)
    assert derive(p).s1 == pytest.approx(2.0)
    c = coefficients(p, 0.0, 0.0)
    assert (c.a3, c.a2, c.a1, c.a0) == pytest.approx((4.0, 0.0, -3.0, -1.0))


def test_coefficients_triple_root_example():
    # N*upsilon = 16 and s_eta = 27 at resonance give a triple root at s1 n = 3
    s1 = 2.0
    a3, a2, a1, a0 = coefficient_arrays(s1, 16.0, 27.0 / s1, 0.0, 0.0)
    scale = float(a3)
    assert (a3 / scale, a2 / scale, a1 / scale, a0 / scale) == pytest.approx((1.0, -4.5, 6.75, -27.0 / 8.0))
    roots = np.roots([float(a3), float(a2), float(a1), float(a0)])
    assert np.max(np.abs(roots - 1.5)) <= 1e-4


def test_coefficients_vanish_without_atoms_or_pump():
    a3, a2, a1, a0 = coefficient_arrays(3.0, 0.0, 0.0, 0.4, -0.7)
    # with no pump the only positive root must be n = 0
    assert a0 == 0.0
    assert a3 > 0 and a1 > 0


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1e-2, 1e2),
    st.floats(0, 1e4),
    st.floats(1e-2, 1e4),
    st.floats(-20, 20),
    st.floats(-20, 20),
)
def test_roots_satisfy_fixed_point(s1, n_ups, n_eta, bar_da, bar_dc):
    a3, a2, a1, a0 = coefficient_arrays(s1, n_ups, n_eta, bar_da, bar_dc)
    for n in np.roots([float(a3), float(a2), float(a1), float(a0)]):
        if abs(n.imag) > 1e-9 * abs(n) or n.real <= 0:
            continue
        rhs = fixed_point_rhs(s1, n_ups, n_eta, bar_da, bar_dc, n.real)
        assert rhs == pytest.approx(n.real, rel=1e-6)


def test_empty_cavity_transmission():
    p = SystemParams(g=0.01, gamma=1.0, n_atoms=0, eta_plus=2.0)
    assert photon_numbers(p).values == pytest.approx([4.0], rel=1e-12)
    sol = steady_states(p)
    assert len(sol) == 1 and sol[0].transmission == pytest.approx(1.0, rel=1e-12)
    half = steady_states(p.replace(delta_c=1.0))
    assert half[0].transmission == pytest.approx(0.5, rel=1e-12)
    # bare cavity amplitude i eta / (delta_c + i kappa)
    assert half[0].alpha_plus == pytest.approx(2j / (1.0 + 1j), rel=1e-12)


def test_three_roots_in_bistable_window(lab):
    d = derive(lab)
    roots = photon_numbers(lab.with_n_eta(1e5 / d.s1)).values
    assert len(roots) == 3
    for n in roots:
        rhs = fixed_point_rhs(d.s1, lab.n_atoms * d.upsilon, 1e5 / d.s1, 0.0, 0.0, n)
        assert rhs == pytest.approx(n, rel=1e-12)
    assert len(photon_numbers(lab.with_n_eta(1e3 / d.s1))) == 1
    assert len(photon_numbers(lab.with_n_eta(1e6 / d.s1))) == 1


def test_field_amplitude_reproduces_photon_number(lab):
    p = lab.with_n_eta(1e5 / derive(lab).s1).with_detunings(0.3, -0.2)
    for n in photon_numbers(p).values:
        alpha = field_amplitude(p, n)
        assert abs(alpha) ** 2 == pytest.approx(n, rel=1e-9)


def test_field_amplitude_rejects_spurious_photon_number(lab):
    p = lab.with_n_eta(1e5 / derive(lab).s1)
    with pytest.raises(SpuriousRootError):
        field_amplitude(p, 17.0)


def test_atomic_observables_examples():
    p = SystemParams(g=1.0, gamma=1.0)
    s1 = derive(p).s1
    assert atomic_observables(p, 0.0) == (-1.0, 0j, 0.0)
    sz, _, pe = atomic_observables(p, np.sqrt(1.0 / s1))
    assert sz == pytest.approx(-0.5, rel=1e-14)
    assert pe == pytest.approx(0.25, rel=1e-14)
    _, _, pe = atomic_observables(p, np.sqrt(99.0 / s1))
    assert pe == pytest.approx(0.495, rel=1e-14)
    assert excited_population(s1, 99.0 / s1, 0.0) == pytest.approx(0.495, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(-50, 50), st.floats(0, 1e4), st.floats(0, 2 * np.pi))
def test_atom_stays_inside_bloch_sphere(g, gamma, delta_a, n, phase):
    p = SystemParams(g=g, gamma=gamma, delta_a=delta_a)
    alpha = np.sqrt(n) * np.exp(1j * phase)
    sz, sm, pe = atomic_observables(p, alpha)
    assert -1.0 <= sz < 0.0
    assert 0.0 <= pe < 0.5
    assert 4 * abs(sm) ** 2 + sz**2 <= 1.0 + 1e-12


def test_low_saturation_limit():
    p = collective(12.4, 0.5, 10_000)
    d = derive(p)
    n_ups = p.n_atoms * d.upsilon
    assert n_ups >= 1e3
    pump = 1e-3 / d.s1 * (n_ups / 2) ** 2  # keeps s1 n ~ 1e-3
    q = p.replace(eta_plus=np.sqrt(pump))
    (n,) = photon_numbers(q).values
    assert d.s1 * n <= 1.1e-3
    alpha = field_amplitude(q, n)
    assert abs(alpha) == pytest.approx(q.eta_plus * 2 / n_ups, rel=3e-3)


def test_high_saturation_limit():
    p = collective(1.2, 0.5, 1000)
    d = derive(p)
    q = p.with_n_eta(1e6 * d.upsilon_n / d.s1)
    (n,) = photon_numbers(q).values
    assert n / derive(q).n_eta == pytest.approx(1.0, rel=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(1e-2, 1e5))
def test_detuning_reflection_symmetry(delta_a, delta_c, s_eta):
    p = collective(3.0, 0.7, 500)
    q = p.with_n_eta(s_eta / derive(p).s1)
    both = photon_numbers(q, delta_a, delta_c).values
    flipped = photon_numbers(q, -delta_a, -delta_c).values
    assert len(both) == len(flipped)
    np.testing.assert_allclose(both, flipped, rtol=1e-9)
    if delta_c == 0.0:
        np.testing.assert_allclose(photon_numbers(q, delta_a, 0.0).values, photon_numbers(q, -delta_a, 0.0).values, rtol=1e-9)


def _direct_residual(params, kz, ap, am):
    """Loop form of the two-mode equations used as an independent check."""
    dk = complex(params.delta_c, params.kappa)
    u = params.g**2 / complex(params.delta_a, params.gamma / 2)
    sum_p = 0j
    sum_m = 0j
    for z in kz:
        e = np.exp(1j * z)
        field = e * ap + am / e
        sat = 1.0 + 2 * params.g**2 * abs(field) ** 2 / (params.delta_a**2 + params.gamma**2 / 4)
        sum_p += (ap + am * np.exp(-2j * z)) / sat
        sum_m += (am + ap * np.exp(2j * z)) / sat
    return dk * ap - u * sum_p - 1j * params.eta_plus, dk * am - u * sum_m - 1j * params.eta_minus


def test_two_mode_residual_matches_direct_sum(rng):
    p = SystemParams(g=0.2, gamma=0.8, kappa=1.0, n_atoms=40, eta_plus=1.3, eta_minus=0.4, delta_a=0.6, delta_c=-0.3)
    config = AtomConfiguration.random(40, rng)
    for _ in range(5):
        ap, am = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        got = two_mode_residual(p, config, ap, am)
        ref = _direct_residual(p, config.positions, ap, am)
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_two_mode_empty_cavity():
    p = SystemParams(g=0.3, gamma=1.0, n_atoms=0, eta_plus=1.0, eta_minus=0.5, delta_c=0.4)
    ap, am = two_mode_solve(p, AtomConfiguration.from_phases([]))
    dk = complex(0.4, 1.0)
    assert ap == pytest.approx(1j / dk) and am == pytest.approx(0.5j / dk)
    assert two_mode_residual(p, AtomConfiguration.from_phases([]), ap, am) == pytest.approx((0j, 0j), abs=1e-15)


def test_uniform_cloud_matches_single_mode():
    p = collective(1.2, 0.0022, 10_000)
    p = p.with_n_eta(1e3 / derive(p).s1)
    config = AtomConfiguration.evenly_spread(10_000)
    assert config.bunching < 1e-12
    ap, am = two_mode_solve(p, config, single_mode_guess(p))
    (n,) = photon_numbers(p).values
    assert abs(ap) ** 2 == pytest.approx(n, rel=1e-3)
    assert abs(am) <= 1e-3 * abs(ap)


def test_bunched_cloud_backscatters():
    p = SystemParams(g=0.1, gamma=1.0, n_atoms=100, eta_plus=0.5, delta_a=100.0)
    config = AtomConfiguration.lattice(100)
    assert config.bunching == pytest.approx(1.0)
    ap, am = two_mode_solve(p, config)
    assert abs(am) > 1e-4
    # damped fixed-point iteration as an independent route
    dk = complex(p.delta_c, p.kappa)
    u = p.g**2 / complex(p.delta_a, p.gamma / 2)
    bp, bm = 0j, 0j
    for _ in range(500):
        field = bp + bm
        w = 1.0 / (1.0 + 2 * p.g**2 * abs(field) ** 2 / (p.delta_a**2 + p.gamma**2 / 4))
        bp, bm = (u * p.n_atoms * w * field + 1j * p.eta_plus) / dk, (u * p.n_atoms * w * field) / dk
    assert ap == pytest.approx(bp, rel=1e-8)
    assert am == pytest.approx(bm, rel=1e-8)


def test_two_mode_needs_positions(lab):
    with pytest.raises(ValueError):
        two_mode_residual(lab, AtomConfiguration.homogeneous(), 0j, 0j)
    with pytest.raises(ValueError):
        two_mode_residual(lab, AtomConfiguration.lattice(3), 0j, 0j)
