import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import assert_close_scaled
from georamsey.core import HBAR, BeamGeometry, ConvergenceError, PulseSchedule, strontium87
from georamsey.darkspace import (SIGMA_Y, bare_projection, dark_frame, frame_at, frame_overlap,
                                 free_phase, gauge_potential_A, jump_matrix, propagate_dark,
                                 rotation_coupling_w, scalar_potential_Q)
from georamsey.pulses import angles_at, rabi_at

SP = strontium87()
angles = st.floats(0.0, math.pi / 2)
STENCIL = 1e-9  # metres


def _grad(theta, phi, geometry=None, h=STENCIL):
    """Spatial derivatives of the dark frame by a five-point central stencil."""
    geometry = geometry or BeamGeometry()
    K = geometry.wavevectors(SP.k)

    def frame(r):
        return dark_frame(theta, phi, geometry.spatial_phases(SP.k, r)).coeffs

    out = []
    for e in np.eye(2):
        d = (-frame(2 * h * e) + 8 * frame(h * e) - 8 * frame(-h * e) + frame(-2 * h * e)) / (12 * h)
        out.append(d)
    return frame(np.zeros(2)), out, K


def fd_Q(theta, phi, geometry=None):
    _, (dx, dy), _ = _grad(theta, phi, geometry)
    return HBAR**2 / (2 * SP.mass) * (dx.conj() @ dx.T + dy.conj() @ dy.T)


def fd_A(theta, phi, geometry=None):
    D, (dx, dy), _ = _grad(theta, phi, geometry)
    return 1j * HBAR * (D.conj() @ dx.T), 1j * HBAR * (D.conj() @ dy.T)


def fd_w(t, schedule, h=1e-9):
    f = lambda tt: frame_at(tt, schedule).coeffs
    D = f(t)
    dD = (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    return -1j * HBAR * (D.conj() @ dD.T)


# ------------------------------------------------------------------ frame


def test_frame_asymptotic_examples():
    f = dark_frame(math.pi / 2, math.pi / 2).coeffs
    np.testing.assert_allclose(f, [[1, 0, 0, 0], [0, 0, -1, 0]], atol=1e-15)
    f = dark_frame(math.pi / 2, 0.0).coeffs
    np.testing.assert_allclose(f, [[0, -1, 0, 0], [0, 0, -1, 0]], atol=1e-15)


@given(angles, angles, st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_frame_orthonormal(theta, phi, phases):
    f = dark_frame(theta, phi, phases)
    np.testing.assert_allclose(f.gram(), np.eye(2), atol=1e-12)
    assert np.all(f.coeffs[..., 3] == 0)


@given(st.floats(0, 46e-6), st.floats(-3, 3))
def test_dark_condition(t, jump):
    s = PulseSchedule(phase_jump=jump)
    om = rabi_at(t, s).values
    f = frame_at(t, s)
    residual = f.coeffs[:, :3] @ om
    assert np.max(np.abs(residual)) <= 1e-12 * np.linalg.norm(om)


# ------------------------------------------------------------- potentials


def test_Q_examples():
    e = SP.recoil_momentum**2 / (2 * SP.mass)
    Q = scalar_potential_Q(math.pi / 2, math.pi / 2, SP)
    lim = SP.recoil_momentum**2 / SP.mass
    assert Q[0, 0] == 2 * lim
    np.testing.assert_allclose(Q, lim * np.diag([2.0, 0.0]), rtol=0, atol=1e-30 * lim)
    Q = scalar_potential_Q(0.0, math.pi / 4, SP)
    np.testing.assert_allclose(Q, e * np.array([[3, 1], [1, 3]]), rtol=1e-14)
    assert np.all(scalar_potential_Q(0.3, 0.2, SP, sign=-1) == -scalar_potential_Q(0.3, 0.2, SP))


def test_asymptotic_limit_exact():
    # lasers off between the pulses: Q = diag(2 p_r^2 / m, 0) up to cos(pi/2) roundoff
    s = PulseSchedule(T=200e-6)
    ang = angles_at(s.jump_time + 50e-6, s)
    assert ang.theta == math.pi / 2 and ang.phi == math.pi / 2
    Q = scalar_potential_Q(ang.theta, ang.phi, SP)
    lim = 2 * SP.recoil_momentum**2 / SP.mass
    assert Q[0, 0] == lim
    assert abs(Q[1, 1]) <= 1e-30 * lim and abs(Q[0, 1]) <= 1e-15 * lim


@given(angles, angles)
def test_Q_matches_gradient_oracle(theta, phi):
    assert_close_scaled(scalar_potential_Q(theta, phi, SP), fd_Q(theta, phi).real, rtol=1e-6)
    assert np.max(np.abs(fd_Q(theta, phi).imag)) < 1e-9 * np.max(np.abs(fd_Q(theta, phi)))


@given(angles, angles, st.floats(0, 2 * math.pi))
def test_general_geometry_Q_and_A(theta, phi, rot):
    # the generic einsum path must agree with the oracle for a rotated tripod
    c, s = math.cos(rot), math.sin(rot)
    R = np.array([[c, -s], [s, c]])
    g = BeamGeometry(directions=tuple(map(tuple, (R @ np.array(BeamGeometry().directions).T).T)))
    assert_close_scaled(scalar_potential_Q(theta, phi, SP, g), fd_Q(theta, phi, g).real, rtol=1e-6)
    ax, ay = gauge_potential_A(theta, phi, SP, g)
    fx, fy = fd_A(theta, phi, g)
    assert_close_scaled(ax, fx, rtol=1e-6)
    assert_close_scaled(ay, fy, rtol=1e-6)


@given(angles, angles)
def test_A_matches_gradient_oracle(theta, phi):
    ax, ay = gauge_potential_A(theta, phi, SP)
    fx, fy = fd_A(theta, phi)
    assert_close_scaled(ax, fx, rtol=1e-6)
    assert_close_scaled(ay, fy, rtol=1e-6)
    for a in (ax, ay):
        np.testing.assert_allclose(a, a.conj().T, atol=1e-12 * SP.recoil_momentum)
    hk = SP.recoil_momentum
    assert ax[0, 0] == pytest.approx(hk * math.cos(phi) ** 2, abs=1e-12 * hk)
    assert ay[0, 0] == pytest.approx(-hk * (1 + math.sin(phi) ** 2), abs=1e-12 * hk)


def test_A_examples():
    hk = SP.recoil_momentum
    ax, ay = gauge_potential_A(math.pi / 2, math.pi / 2, SP)
    assert ay[0, 0] == pytest.approx(-2 * hk) and ax[0, 0] == pytest.approx(0, abs=1e-15 * hk)
    for phi in (0.0, 0.4, 1.2):
        ax, ay = gauge_potential_A(math.pi / 2, phi, SP)
        assert abs(ax[1, 1]) <= 1e-30 * hk and abs(ay[1, 1]) <= 1e-30 * hk


def test_w_examples():
    np.testing.assert_array_equal(rotation_coupling_w(0.4, 0.0), 0)
    np.testing.assert_allclose(rotation_coupling_w(math.pi / 2, 1e5), 0, atol=1e-40)
    np.testing.assert_allclose(rotation_coupling_w(0.0, 2.0, "printed"), HBAR * 2.0 * SIGMA_Y)
    np.testing.assert_allclose(rotation_coupling_w(0.0, 2.0), -HBAR * 2.0 * SIGMA_Y)


@given(st.floats(-3.5, 3.5), st.sampled_from([1, 2]))
def test_w_matches_time_derivative_oracle(x, j):
    s = PulseSchedule()
    t = s.t3(j) + x * s.sigma_t
    ang = angles_at(t, s)
    w = rotation_coupling_w(ang.theta, ang.phi_dot)
    oracle = fd_w(t, s)
    assert_close_scaled(w, oracle, rtol=1e-6)
    # purely off-diagonal imaginary, proportional to sigma_y
    assert np.all(w.real == 0) and w[0, 0] == 0 and w[1, 1] == 0


# ------------------------------------------------------------ propagation


def test_identity_without_generator(schedule):
    run = propagate_dark(schedule, include_Q=False, include_w=False, record_every=200)
    np.testing.assert_allclose(run.unitaries, np.broadcast_to(np.eye(2), run.unitaries.shape), atol=1e-15)


def test_unitarity_every_step(schedule):
    run = propagate_dark(schedule, record_every=1, p=(0.2 * SP.recoil_momentum, -0.1 * SP.recoil_momentum))
    U = run.unitaries
    err = np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - np.eye(2)).max()
    assert err < 1e-10
    np.testing.assert_allclose(run.populations.sum(axis=-1), 1.0, atol=1e-10)


def test_no_Q_returns_to_three(schedule):
    P = propagate_dark(schedule, include_Q=False).final_populations
    assert P[2] > 0.99 and P[0] < 0.01 and P[1] < 0.01


def test_frame_projection_examples(schedule):
    far = schedule.replace(T=200e-6)
    f1 = frame_at(far.jump_time, far)
    assert bare_projection(np.array([0, 1]), f1)[2] == pytest.approx(1.0, abs=1e-12)
    f2 = frame_at(far.duration + 20 * far.sigma_t, far)
    assert bare_projection(np.array([1, 0]), f2)[1] == pytest.approx(1.0, abs=1e-12)
    # at default spacing the residual laser tails tilt theta by about 0.01 rad
    f1 = frame_at(schedule.jump_time, schedule)
    assert bare_projection(np.array([0, 1]), f1)[2] == pytest.approx(1.0, abs=2e-4)


@given(st.complex_numbers(max_magnitude=1), st.complex_numbers(max_magnitude=1), angles, angles)
def test_projection_conserves_probability(a, b, theta, phi):
    v = np.array([a, b])
    n = np.linalg.norm(v)
    if n < 1e-3:
        return
    assert bare_projection(v / n, dark_frame(theta, phi, (0.1, 0.2, 0.3))).sum() == pytest.approx(1, abs=1e-12)


def test_free_phase_matches_propagation():
    s = PulseSchedule(T=120e-6)
    t_a, t_b = s.t3(1) + 40e-6, s.t3(1) + 100e-6
    run = propagate_dark(s, record_every=50, t_stop=t_b)
    ia, ib = np.argmin(np.abs(run.times - t_a)), -1
    U = run.unitaries[ib] @ np.conj(run.unitaries[ia]).T
    dt = run.times[ib] - run.times[ia]
    rel = np.angle(U[1, 1] / U[0, 0])
    assert abs(U[0, 1]) < 1e-14
    expected = free_phase(SP, dt)
    assert expected == pytest.approx(2 * SP.recoil_momentum**2 / (HBAR * SP.mass) * dt, rel=1e-12)
    assert np.mod(rel - expected + math.pi, 2 * math.pi) - math.pi == pytest.approx(0, abs=1e-8 * expected)


def test_jump_matrix_is_frame_overlap():
    s = PulseSchedule(T=200e-6, phase_jump=0.9)
    t = s.jump_time
    M = frame_overlap(frame_at(t + 1e-9, s), frame_at(t - 1e-9, s))
    np.testing.assert_allclose(M, jump_matrix(0.9), atol=1e-12)


def test_phase_jump_periodic_and_even():
    base = PulseSchedule()
    P3 = lambda phi: propagate_dark(base.replace(phase_jump=phi)).final_populations[2]
    for phi in (0.3, 1.7, 4.0):
        assert P3(phi) == pytest.approx(P3(phi + 2 * math.pi), abs=1e-12)
    from georamsey.analysis import fit_cosine
    phis = np.linspace(0, 2 * math.pi, 25)
    fit = fit_cosine(phis, [P3(p) for p in phis])
    assert fit.residual_rms < 1e-12
    extremum = -fit.phi0
    for d in (0.4, 1.0, 2.0):
        assert P3(extremum + d) == pytest.approx(P3(extremum - d), abs=1e-10)


def test_convergence_check(schedule):
    propagate_dark(schedule, check_convergence=True)
    with pytest.raises(ConvergenceError):
        propagate_dark(schedule, dt=schedule.sigma_t / 2, check_convergence=True)


def test_fringe_frequency_zero_temperature(schedule):
    from georamsey.analysis import fit_damped_cosine
    Ts = np.linspace(0, 120e-6, 49)
    y = [propagate_dark(schedule.replace(T=float(T))).final_populations[2] for T in Ts]
    fit = fit_damped_cosine(Ts, y)
    assert fit.omega == pytest.approx(SP.fringe_frequency, rel=0.02)
