"""Gaussian Rabi envelopes, tripod mixing angles and their time derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BeamGeometry, PulseSchedule

#: Relative amplitude floor below which the lasers count as off.
AMPLITUDE_FLOOR = 1e-6


@dataclass(frozen=True)
class RabiTriple:
    """Complex Rabi frequencies of the three beams, shape ``(..., 3)``.

    ``rates`` holds d|Omega_a|/dt so that the mixing-angle derivative can be
    evaluated analytically.
    """

    values: np.ndarray
    rates: np.ndarray | None = None

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class MixingAngles:
    theta: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    phi_dot: np.ndarray | None = None


def _envelopes(t, schedule: PulseSchedule):
    """Summed Gaussian envelopes (…, 3) and their time derivatives."""
    t = np.asarray(t, dtype=float)[..., None]
    amp = np.asarray(schedule.omega0)
    s2 = 4 * schedule.sigma_t**2
    env = np.zeros(t.shape[:-1] + (3,))
    rate = np.zeros_like(env)
    for j in (1, 2):
        c = np.asarray(schedule.centers(j))
        g = amp * np.exp(-((t - c) ** 2) / s2)
        env += g
        rate += g * (-2 * (t - c) / s2)
    return env, rate


def beam_phases(t, schedule: PulseSchedule, geometry: BeamGeometry | None = None) -> np.ndarray:
    """Laser phases delta_a(t), including the beam-3 jump after mid free evolution."""
    geometry = geometry or BeamGeometry()
    t = np.asarray(t, dtype=float)
    ph = np.broadcast_to(np.asarray(geometry.offsets), t.shape + (3,)).copy()
    ph[..., 2] += np.where(t > schedule.jump_time, schedule.phase_jump, 0.0)
    return ph


def rabi_at(t, schedule: PulseSchedule, geometry: BeamGeometry | None = None) -> RabiTriple:
    env, rate = _envelopes(t, schedule)
    values = env * np.exp(1j * beam_phases(t, schedule, geometry))
    return RabiTriple(values=values, rates=rate)


def asymptotic_angles(t, schedule: PulseSchedule):
    """(theta, phi) held while every beam is below the amplitude floor.

    Before the first pulse |3> is fed by beam 1 alone (phi = 0); between the
    pulses beam 2 dominates (phi = pi/2); after a mirrored second pulse beam 1
    closes the sequence (phi = 0).  theta = pi/2 throughout.
    """
    t = np.asarray(t, dtype=float)
    after2 = 0.0 if schedule.mirror else math.pi / 2
    phi = np.where(t < schedule.t3(1), 0.0, np.where(t <= schedule.t3(2), math.pi / 2, after2))
    return np.full(t.shape, math.pi / 2), phi


def mixing_angles(rabi: RabiTriple, floor: float = 0.0, fallback=None) -> MixingAngles:
    """theta = arccos(|O3|/O), phi = arctan(|O2|/|O1|), O the total Rabi frequency.

    Where ``O <= floor`` the angles are taken from ``fallback`` (a
    ``(theta, phi)`` pair) and the derivative is zero.  Without a fallback the
    lasers-off limit after the first pulse (pi/2, pi/2) is used.
    """
    a = rabi.magnitudes
    omega = np.sqrt(np.sum(a * a, axis=-1))
    off = omega <= floor
    safe = np.where(off, 1.0, omega)
    theta = np.arccos(np.clip(a[..., 2] / safe, 0.0, 1.0))
    phi = np.arctan2(a[..., 1], a[..., 0])
    if np.any(off):
        if fallback is None:
            fb_theta, fb_phi = np.full(omega.shape, math.pi / 2), np.full(omega.shape, math.pi / 2)
        else:
            fb_theta, fb_phi = (np.broadcast_to(x, omega.shape) for x in fallback)
        theta = np.where(off, fb_theta, theta)
        phi = np.where(off, fb_phi, phi)
    phi_dot = None
    if rabi.rates is not None:
        a1, a2 = a[..., 0], a[..., 1]
        r1, r2 = rabi.rates[..., 0], rabi.rates[..., 1]
        den = a1 * a1 + a2 * a2
        with np.errstate(invalid="ignore", divide="ignore"):
            phi_dot = np.where(off | (den == 0), 0.0, (a1 * r2 - a2 * r1) / np.where(den == 0, 1.0, den))
    return MixingAngles(theta=theta, phi=phi, omega=omega, phi_dot=phi_dot)


def angles_at(t, schedule: PulseSchedule, geometry: BeamGeometry | None = None) -> MixingAngles:
    """Mixing angles along the schedule with the lasers-off limits applied."""
    floor = AMPLITUDE_FLOOR * schedule.peak_amplitude
    return mixing_angles(rabi_at(t, schedule, geometry), floor, asymptotic_angles(t, schedule))


def phi_rate(t, schedule: PulseSchedule) -> np.ndarray:
    """Exact dphi/dt of the summed envelopes, zero where the lasers are off."""
    return angles_at(t, schedule).phi_dot


def phi_rate_sech(t, schedule: PulseSchedule) -> np.ndarray:
    """Single-pulse closed form (eta / 2 sigma) sech(eta (t - t3) / sigma).

    Valid for |Omega_01| = |Omega_02| when the other pulse's tails are
    negligible.  Zero outside the two 8-sigma pulse windows.
    """
    t = np.asarray(t, dtype=float)
    s, eta = schedule.sigma_t, schedule.eta
    out = np.zeros(t.shape)
    for j in (1, 2):
        t3 = schedule.t3(j)
        sign = -1.0 if (j == 2 and schedule.mirror) else 1.0
        inside = np.abs(t - t3) <= 4 * s
        out = np.where(inside, sign * eta / (2 * s) / np.cosh(eta * (t - t3) / s), out)
    return out


@dataclass(frozen=True)
class StepGrid:
    """Uniform-per-segment time steps with a break at the phase-jump instant.

    ``segments`` lists half-open step-index ranges; the phase jump (if inside
    the window) falls exactly on the boundary between the first two.
    """

    edges: np.ndarray
    segments: tuple

    @property
    def mids(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def n_steps(self) -> int:
        return len(self.edges) - 1

    def marks(self, every: int | None) -> np.ndarray:
        """Step indices to record: every ``every`` steps plus segment ends."""
        n = self.n_steps
        if not every:
            return np.array([n], dtype=np.intp)
        m = set(range(0, n + 1, every)) | {n} | {b for _, b in self.segments}
        return np.array(sorted(m), dtype=np.intp)


def step_grid(schedule: PulseSchedule, dt: float, t_stop: float | None = None) -> StepGrid:
    if not dt > 0:
        raise ValueError(f"step must be positive, got {dt!r}")
    t_stop = schedule.duration if t_stop is None else float(t_stop)
    if not t_stop > 0:
        raise ValueError("t_stop must be positive")
    cuts = [0.0, t_stop]
    if 0.0 < schedule.jump_time < t_stop:
        cuts.insert(1, schedule.jump_time)
    pieces, segments, start = [], [], 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
        segments.append((start, start + n))
        start += n
    edges = np.concatenate(pieces + [np.array([t_stop])])
    return StepGrid(edges=edges, segments=tuple(segments))
