"""Brute-force 4-level dynamics of a closed momentum family.

A plane-wave envelope momentum p fixes the family
{|1, p + q1>, |2, p + q2>, |3, p>, |e, p + hbar k3>} with q_a = hbar (k3 - k_a).
Spatial phases are absorbed into this basis, so the Hamiltonian is a 4x4
matrix: kinetic energies on the diagonal plus resonant couplings
c hbar Omega_a(t) |e><a| + h.c., where c = 1 ("full", bright states shifted by
+-hbar Omega) or c = 1/2 ("half", shifts +-hbar Omega/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import HBAR, BeamGeometry, ConvergenceError, PulseSchedule, SpeciesConstants, strontium87
from .darkspace import dark_amplitudes, frame_at
from .pulses import rabi_at, step_grid

COUPLING = {"full": 1.0, "half": 0.5}


def family_offsets(species: SpeciesConstants, geometry: BeamGeometry) -> np.ndarray:
    """Momentum offsets (4, 2) of |1>, |2>, |3>, |e> relative to the |3> member."""
    q = geometry.recoil_offsets(species.k)
    qe = HBAR * geometry.wavevectors(species.k)[2]
    return np.vstack([q, qe])


def kinetic_energies(p, species: SpeciesConstants, geometry: BeamGeometry | None = None) -> np.ndarray:
    """E_a = |p + q_a|^2 / 2m for each family member, joules, shape (..., 4)."""
    geometry = geometry or BeamGeometry()
    p = np.asarray(p, dtype=float)[..., None, :]
    return np.sum((p + family_offsets(species, geometry)) ** 2, axis=-1) / (2 * species.mass)


def _coupling_generator(t, schedule, geometry, coupling, decay, linewidth):
    """Time-dependent part of H/hbar (rad/s): couplings and optional decay."""
    omega = rabi_at(t, schedule, geometry).values * COUPLING[coupling]
    g = np.zeros(np.shape(t) + (4, 4), dtype=complex)
    g[..., 3, :3] = omega
    g[..., :3, 3] = omega.conj()
    if decay:
        g[..., 3, 3] = -0.5j * linewidth
    return g


def family_hamiltonian(p, t, schedule: PulseSchedule, species: SpeciesConstants | None = None,
                       geometry: BeamGeometry | None = None, *, decay: bool = False,
                       coupling: str = "full") -> np.ndarray:
    """4x4 family Hamiltonian in joules over (|1>, |2>, |3>, |e>)."""
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    h = HBAR * _coupling_generator(t, schedule, geometry, coupling, decay, species.linewidth)
    idx = np.arange(4)
    h[..., idx, idx] += kinetic_energies(p, species, geometry)
    return h


def default_bare_step(schedule: PulseSchedule, coupling: str = "full") -> float:
    omega_max = COUPLING[coupling] * float(np.sqrt(np.sum(np.square(schedule.omega0))))
    step = schedule.sigma_t / 500
    if omega_max > 0:
        step = min(step, 1.0 / (50 * omega_max))
    return step


def evolve_family_batch(schedule: PulseSchedule, momenta, psi0, *, species=None, geometry=None,
                        decay=False, coupling="full", dt=None, t_stop=None, marks=None,
                        backend=None):
    """Propagate family states, one row per envelope momentum.

    Returns ``(grid, final_states, recorded_states)``.
    """
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    dt = dt or default_bare_step(schedule, coupling)
    grid = step_grid(schedule, dt, t_stop)
    gen = _coupling_generator(grid.mids, schedule, geometry, coupling, decay, species.linewidth)
    momenta = np.atleast_2d(np.asarray(momenta, dtype=float))
    shift = kinetic_energies(momenta, species, geometry) / HBAR
    psi0 = np.atleast_2d(np.asarray(psi0, dtype=complex))
    if len(shift) != len(psi0):
        shift = np.broadcast_to(shift, (len(psi0), 4))
    dts = grid.dts
    if marks is None:
        marks = grid.marks(None)

    def step(a, b, psi, local):
        return kernels.evolve_family(gen[a:b], dts[a:b], psi, shift, local, backend)

    psi, rec = kernels.evolve_segments(step, grid.segments, marks, psi0)
    return grid, psi, rec


@dataclass(frozen=True)
class FamilyRun:
    times: np.ndarray
    states: np.ndarray

    @property
    def populations(self) -> np.ndarray:
        """(P1, P2, P3, Pe) at each recorded time."""
        return np.abs(self.states) ** 2

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_populations(self):
        return self.populations[-1]


INITIAL_STATE = np.array([0, 0, 1, 0], dtype=complex)


def propagate_family(schedule: PulseSchedule, p=(0.0, 0.0), species: SpeciesConstants | None = None,
                     geometry: BeamGeometry | None = None, *, dt: float | None = None,
                     t_stop: float | None = None, record_every: int | None = None,
                     decay: bool = False, coupling: str = "full", initial=INITIAL_STATE,
                     check_convergence: bool = False, tol: float = 1e-6,
                     backend=None) -> FamilyRun:
    """Piecewise-constant midpoint stepping of one momentum family from |3>."""
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    dt = dt or default_bare_step(schedule, coupling)
    grid = step_grid(schedule, dt, t_stop)
    marks = grid.marks(record_every)
    _, _, rec = evolve_family_batch(schedule, np.asarray(p, float), initial, species=species,
                                    geometry=geometry, decay=decay, coupling=coupling, dt=dt,
                                    t_stop=t_stop, marks=marks, backend=backend)
    run = FamilyRun(times=grid.edges[marks], states=rec[0])
    if check_convergence:
        fine = propagate_family(schedule, p, species, geometry, dt=dt / 2, t_stop=t_stop,
                                decay=decay, coupling=coupling, initial=initial, backend=backend)
        err = np.max(np.abs(fine.final_populations - run.final_populations))
        if err > tol:
            raise ConvergenceError(
                f"family propagation not converged: halving dt={dt:.3g}s moves populations by {err:.2e}")
    return run


def project_dark(run: FamilyRun, schedule: PulseSchedule, species: SpeciesConstants | None = None,
                 geometry: BeamGeometry | None = None) -> np.ndarray:
    """Dark-state amplitudes <D_mu(t)|psi(t)> along a family trajectory."""
    frames = frame_at(run.times, schedule, species, geometry)
    return dark_amplitudes(run.states, frames)
