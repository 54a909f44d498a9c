"""Dark-state frame, geometric potentials and the effective two-level propagator.

Inside the dark subspace {|D1>, |D2>} the atom sees

* the geometric scalar potential Q = (hbar^2 / 2m) <grad D_mu | grad D_nu>,
* the gauge potential A = i hbar <D_mu | grad D_nu>,
* the rotation coupling w = -i hbar <D_mu | d/dt D_nu>,

and, neglecting kinetic and spin-orbit terms, evolves under Q + w.  The
semiclassical option restores p^2/2m - A.p/m for a fixed envelope momentum p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import kernels
from .core import HBAR, BeamGeometry, ConvergenceError, PulseSchedule, SpeciesConstants, strontium87
from .pulses import angles_at, beam_phases, step_grid

SIGMA_Y = np.array([[0, -1j], [1j, 0]])

# w sign conventions: "derived" follows from the dark-state basis through
# -i hbar <D_mu|dD_nu/dt>; "printed" is the opposite overall sign.
W_SIGN = {"derived": -1.0, "printed": 1.0}


@dataclass(frozen=True)
class DarkFrame:
    """Rows |D1>, |D2> over (|1>, |2>, |3>, |e>), shape ``(..., 2, 4)``."""

    coeffs: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    phases: np.ndarray

    def gram(self) -> np.ndarray:
        c = self.coeffs
        return c.conj() @ np.swapaxes(c, -1, -2)


def dark_frame(theta, phi, phases=(0.0, 0.0, 0.0)) -> DarkFrame:
    """Dark states for mixing angles (theta, phi) and total beam phases S_a."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    S = np.asarray(phases, dtype=float)
    shape = np.broadcast_shapes(theta.shape, phi.shape, S.shape[:-1])
    theta, phi = np.broadcast_to(theta, shape), np.broadcast_to(phi, shape)
    S = np.broadcast_to(S, shape + (3,))
    e1 = np.exp(1j * (S[..., 2] - S[..., 0]))
    e2 = np.exp(1j * (S[..., 2] - S[..., 1]))
    c = np.zeros(shape + (2, 4), dtype=complex)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    c[..., 0, 0] = sp * e1
    c[..., 0, 1] = -cp * e2
    c[..., 1, 0] = ct * cp * e1
    c[..., 1, 1] = ct * sp * e2
    c[..., 1, 2] = -st
    return DarkFrame(coeffs=c, theta=theta, phi=phi, phases=S)


def frame_at(t, schedule: PulseSchedule, species: SpeciesConstants | None = None,
             geometry: BeamGeometry | None = None, r=(0.0, 0.0)) -> DarkFrame:
    """Dark frame along the schedule at position ``r`` (default origin)."""
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    ang = angles_at(t, schedule, geometry)
    S = beam_phases(t, schedule, geometry) + geometry.wavevectors(species.k) @ np.asarray(r, float)
    return dark_frame(ang.theta, ang.phi, S)


def frame_overlap(after: DarkFrame, before: DarkFrame) -> np.ndarray:
    """M_{mu nu} = <D_mu(after) | D_nu(before)>."""
    return after.coeffs.conj() @ np.swapaxes(before.coeffs, -1, -2)


def _real_frame(theta, phi) -> np.ndarray:
    """Phase-free ground-state coefficients (..., 2, 3)."""
    return dark_frame(theta, phi).coeffs[..., :3].real


def scalar_potential_Q(theta, phi, species: SpeciesConstants, geometry: BeamGeometry | None = None,
                       sign: float = 1.0) -> np.ndarray:
    """Geometric scalar potential in joules, shape ``(..., 2, 2)``.

    With the default beam layout this is (p_r^2 / 2m) times
    [[2(1 + sin^2 phi), cos theta sin 2phi], [cos theta sin 2phi, 2 cos^2 theta (1 + cos^2 phi)]].
    ``sign=-1`` gives the negative-definite variant.  Any other geometry is
    handled through the recoil offsets of the ground states.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if geometry is None or geometry == BeamGeometry():
        e = species.recoil_momentum**2 / (2 * species.mass)
        ct = np.cos(theta)
        q = np.empty(np.broadcast_shapes(theta.shape, phi.shape) + (2, 2))
        q[..., 0, 0] = 2 * (1 + np.sin(phi) ** 2)
        q[..., 0, 1] = q[..., 1, 0] = ct * np.sin(2 * phi)
        q[..., 1, 1] = 2 * ct**2 * (1 + np.cos(phi) ** 2)
        return sign * e * q
    c = _real_frame(theta, phi)
    kin = np.sum(geometry.recoil_offsets(species.k) ** 2, axis=-1) / (2 * species.mass)
    return sign * np.einsum("...ia,a,...ja->...ij", c, kin, c)


def rotation_coupling_w(theta, phi_dot, convention: str = "derived") -> np.ndarray:
    """Rotation coupling hbar cos(theta) dphi/dt sigma_y (times the convention sign), joules."""
    s = W_SIGN[convention]
    amp = s * HBAR * np.cos(np.asarray(theta, dtype=float)) * np.asarray(phi_dot, dtype=float)
    return amp[..., None, None] * SIGMA_Y


def gauge_potential_A(theta, phi, species: SpeciesConstants, geometry: BeamGeometry | None = None):
    """x and y components of the gauge potential (kg m/s), each ``(..., 2, 2)``.

    For the default layout A_11 = hbar k (cos^2 phi x - (1 + sin^2 phi) y).
    """
    geometry = geometry or BeamGeometry()
    c = _real_frame(theta, phi)
    q = geometry.recoil_offsets(species.k)
    Ax = -np.einsum("...ia,a,...ja->...ij", c, q[:, 0], c)
    Ay = -np.einsum("...ia,a,...ja->...ij", c, q[:, 1], c)
    return Ax, Ay


def bare_projection(state, frame: DarkFrame) -> np.ndarray:
    """Bare populations (P1, P2, P3, Pe) of a dark-state superposition."""
    amp = np.einsum("...m,...ma->...a", np.asarray(state), frame.coeffs)
    return np.abs(amp) ** 2


def dark_amplitudes(bare_state, frame: DarkFrame) -> np.ndarray:
    """Projection <D_mu|psi> of a bare (family) state onto the dark frame."""
    return np.einsum("...ma,...a->...m", frame.coeffs.conj(), np.asarray(bare_state))


def _pauli(h):
    """Pauli coefficients (identity, x, y, z) of 2x2 Hermitian matrices."""
    h = np.asarray(h)
    return np.stack([
        0.5 * (h[..., 0, 0] + h[..., 1, 1]).real,
        h[..., 0, 1].real,
        -h[..., 0, 1].imag,
        0.5 * (h[..., 0, 0] - h[..., 1, 1]).real,
    ], axis=-1)


def dark_generator(t, schedule: PulseSchedule, species: SpeciesConstants, geometry: BeamGeometry,
                   include_Q=True, include_w=True, q_sign=1.0, w_convention="derived"):
    """Pauli coefficients of the effective generator at times ``t`` (rad/s).

    Returns ``(base, lin)``: ``base`` is (Q + w)/hbar, ``lin`` stacks the
    terms multiplying p_x, p_y and |p|^2 in the semiclassical generator.
    """
    ang = angles_at(t, schedule, geometry)
    n = np.shape(t)
    base = np.zeros(n + (4,))
    if include_Q:
        base += _pauli(scalar_potential_Q(ang.theta, ang.phi, species, geometry, q_sign)) / HBAR
    if include_w:
        base[..., 2] += W_SIGN[w_convention] * np.cos(ang.theta) * ang.phi_dot
    Ax, Ay = gauge_potential_A(ang.theta, ang.phi, species, geometry)
    m = species.mass
    lin = np.zeros((3,) + n + (4,))
    lin[0] = -_pauli(Ax) / (m * HBAR)
    lin[1] = -_pauli(Ay) / (m * HBAR)
    lin[2, ..., 0] = 1.0 / (2 * m * HBAR)
    return base, lin


def default_dark_step(schedule: PulseSchedule) -> float:
    return schedule.sigma_t / 500


def jump_matrix(phase_jump: float) -> np.ndarray:
    """Dark-basis change when beam 3 jumps by ``phase_jump`` with the lasers off."""
    return np.diag([np.exp(-1j * phase_jump), 1.0])


def evolve_dark_batch(schedule: PulseSchedule, momenta, psi0, *, species=None, geometry=None,
                      include_Q=True, include_w=True, semiclassical=True, dt=None, t_stop=None,
                      marks=None, q_sign=1.0, w_convention="derived", backend=None):
    """Propagate a batch of dark-state amplitudes, one row per momentum sample.

    Returns ``(grid, final_states, recorded_states)`` with the recording taken
    at ``marks`` (step indices of ``grid``; default only the final step).
    """
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    dt = dt or default_dark_step(schedule)
    grid = step_grid(schedule, dt, t_stop)
    base, lin = dark_generator(grid.mids, schedule, species, geometry, include_Q, include_w,
                               q_sign, w_convention)
    psi0 = np.atleast_2d(np.asarray(psi0, dtype=complex))
    momenta = np.atleast_2d(np.asarray(momenta, dtype=float))
    if semiclassical:
        weights = np.column_stack([momenta[:, 0], momenta[:, 1], np.sum(momenta**2, axis=1)])
    else:
        lin = lin[:0]
        weights = np.zeros((len(momenta), 0))
    if len(weights) != len(psi0):
        weights = np.broadcast_to(weights, (len(psi0), weights.shape[1]))
    dts = grid.dts
    if marks is None:
        marks = grid.marks(None)

    def step(a, b, psi, local):
        return kernels.evolve_su2(base[a:b], dts[a:b], psi, lin[:, a:b], weights, local, backend)

    jump = np.diag(jump_matrix(schedule.phase_jump))
    psi, rec = kernels.evolve_segments(step, grid.segments, marks, psi0, lambda v: v * jump)
    return grid, psi, rec


@dataclass(frozen=True)
class DarkRun:
    """Trajectory of the effective model.

    ``unitaries[i]`` is U(times[i]) in the dark basis; ``states`` applies it to
    the initial state; ``populations`` are bare-state projections.
    """

    times: np.ndarray
    unitaries: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    frames: DarkFrame

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_populations(self):
        return self.populations[-1]

    @property
    def final_unitary(self):
        return self.unitaries[-1]


def propagate_dark(schedule: PulseSchedule, species: SpeciesConstants | None = None,
                   geometry: BeamGeometry | None = None, *, include_Q: bool = True,
                   include_w: bool = True, p=None, dt: float | None = None,
                   t_stop: float | None = None, record_every: int | None = None,
                   initial=(0.0, 1.0), q_sign: float = 1.0, w_convention: str = "derived",
                   check_convergence: bool = False, tol: float = 1e-6, backend=None) -> DarkRun:
    """Time-ordered evolution exp(-(i/hbar) int (Q + w) dt') in the dark subspace.

    The sequence starts in |D2> (adiabatically |3>) unless ``initial`` says
    otherwise.  With ``p`` set, the semiclassical terms p^2/2m - A.p/m are
    included.  With ``check_convergence`` the run is repeated at half the step
    and a :class:`ConvergenceError` raised if any final population moves by
    more than ``tol``.
    """
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    dt = dt or default_dark_step(schedule)
    grid = step_grid(schedule, dt, t_stop)
    marks = grid.marks(record_every)
    semiclassical = p is not None
    mom = np.zeros((2, 2)) if p is None else np.tile(np.asarray(p, float), (2, 1))
    _, _, rec = evolve_dark_batch(
        schedule, mom, np.eye(2), species=species, geometry=geometry, include_Q=include_Q,
        include_w=include_w, semiclassical=semiclassical, dt=dt, t_stop=t_stop, marks=marks,
        q_sign=q_sign, w_convention=w_convention, backend=backend)
    U = np.transpose(rec, (1, 2, 0))
    times = grid.edges[marks]
    states = U @ np.asarray(initial, dtype=complex)
    frames = frame_at(times, schedule, species, geometry)
    run = DarkRun(times=times, unitaries=U, states=states,
                  populations=bare_projection(states, frames), frames=frames)
    if check_convergence:
        fine = propagate_dark(schedule, species, geometry, include_Q=include_Q, include_w=include_w,
                              p=p, dt=dt / 2, t_stop=t_stop, initial=initial, q_sign=q_sign,
                              w_convention=w_convention, backend=backend)
        err = np.max(np.abs(fine.final_populations - run.final_populations))
        if err > tol:
            raise ConvergenceError(
                f"dark propagation not converged: halving dt={dt:.3g}s moves populations by {err:.2e}")
    return run


def free_phase(species: SpeciesConstants, duration: float) -> float:
    """Relative D1-D2 phase accumulated with the lasers off: 2 p_r^2 T / (hbar m)."""
    return 2 * species.recoil_momentum**2 * duration / (HBAR * species.mass)


def rotation_angle(schedule: PulseSchedule, pulse: int = 1, n: int = 20001) -> float:
    """Integral of cos(theta) dphi/dt over one pulse window (trapezoid rule)."""
    t3 = schedule.t3(pulse)
    t = np.linspace(t3 - 4 * schedule.sigma_t, t3 + 4 * schedule.sigma_t, n)
    ang = angles_at(t, schedule)
    return float(trapezoid(np.cos(ang.theta) * ang.phi_dot, t))


__all__ = [
    "DarkFrame", "DarkRun", "SIGMA_Y", "bare_projection", "dark_amplitudes", "dark_frame",
    "dark_generator", "evolve_dark_batch", "frame_at", "frame_overlap", "free_phase",
    "gauge_potential_A", "jump_matrix", "propagate_dark", "rotation_angle",
    "rotation_coupling_w", "scalar_potential_Q",
]
