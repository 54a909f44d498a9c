"""Thermal averaging over the envelope momentum of the gas.

The momentum distribution is Maxwell-Boltzmann in the x-y plane, per-axis
variance m k_B T0, sampled either on a Gauss-Hermite tensor grid or by
seeded Monte Carlo.  Samples are propagated independently and reduced in
grid order, so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baremodel import INITIAL_STATE, default_bare_step, evolve_family_batch, family_offsets
from .core import HBAR, KB, BeamGeometry, ConvergenceError, DomainError, PulseSchedule, SpeciesConstants, strontium87
from .darkspace import bare_projection, default_dark_step, evolve_dark_batch, frame_at
from .pulses import step_grid

DEFAULT_SEED = 0x5EED_2023_0689_0087
MODELS = ("effective", "bare")


@dataclass(frozen=True)
class ThermalGrid:
    momenta: np.ndarray
    weights: np.ndarray
    temperature: float
    scheme: str

    def __len__(self):
        return len(self.weights)

    def second_moment(self) -> np.ndarray:
        """Weighted <p_x^2>, <p_y^2>."""
        return self.weights @ self.momenta**2


def momentum_width(T0: float, species: SpeciesConstants) -> float:
    return math.sqrt(species.mass * KB * T0)


def doppler_order(T0: float, t_max: float, species: SpeciesConstants | None = None,
                  geometry: BeamGeometry | None = None, minimum: int = 20) -> tuple[int, int]:
    """Per-axis Gauss-Hermite order resolving the Doppler phase up to ``t_max``.

    The widest phase spread across the distribution is b = |q| sigma_p t / (m hbar)
    for the largest family recoil component q along the axis; about b^2/2 + 16
    nodes integrate exp(-x^2/2) cos(b x) to 1e-8.
    """
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    if T0 <= 0:
        return (1, 1)
    q = np.max(np.abs(family_offsets(species, geometry)), axis=0)
    b = q * momentum_width(T0, species) * t_max / (species.mass * HBAR)
    return tuple(max(minimum, math.ceil(x * x / 2) + 16) for x in b)


def thermal_grid(T0: float, species: SpeciesConstants | None = None, scheme: str = "gauss-hermite",
                 order=20, size: int = 4096, seed: int = DEFAULT_SEED,
                 prune: float = 1e-16) -> ThermalGrid:
    """Momentum samples and weights for a gas at temperature ``T0``.

    ``order`` is the Gauss-Hermite order per axis (an int or an ``(nx, ny)``
    pair).  Nodes whose weight is below ``prune`` times the largest are
    dropped and the rest renormalised.
    """
    species = species or strontium87()
    if not T0 >= 0:
        raise DomainError(f"temperature must be >= 0, got {T0!r}")
    if T0 == 0:
        return ThermalGrid(np.zeros((1, 2)), np.ones(1), 0.0, scheme)
    sp = momentum_width(T0, species)
    if scheme == "gauss-hermite":
        nx, ny = (order, order) if np.isscalar(order) else order
        if int(nx) < 1 or int(ny) < 1:
            raise DomainError(f"quadrature order must be positive, got {order!r}")
        xs, wx = np.polynomial.hermite_e.hermegauss(int(nx))
        ys, wy = np.polynomial.hermite_e.hermegauss(int(ny))
        px, py = np.meshgrid(xs * sp, ys * sp, indexing="ij")
        w = np.outer(wx, wy).ravel()
        p = np.column_stack([px.ravel(), py.ravel()])
        keep = w > prune * w.max()
        p, w = p[keep], w[keep]
        return ThermalGrid(p, w / w.sum(), float(T0), scheme)
    if scheme == "monte-carlo":
        if int(size) < 1:
            raise DomainError(f"sample size must be positive, got {size!r}")
        rng = np.random.default_rng(seed)
        p = rng.normal(0.0, sp, size=(int(size), 2))
        return ThermalGrid(p, np.full(int(size), 1.0 / int(size)), float(T0), scheme)
    raise DomainError(f"unknown scheme {scheme!r}; use 'gauss-hermite' or 'monte-carlo'")


@dataclass(frozen=True)
class EnsembleResult:
    times: np.ndarray
    populations: np.ndarray

    @property
    def final_populations(self):
        return self.populations[-1]


def ensemble_average(schedule: PulseSchedule, grid: ThermalGrid, model: str = "effective", *,
                     species: SpeciesConstants | None = None, geometry: BeamGeometry | None = None,
                     t_stop: float | None = None, record_every: int | None = None,
                     dt: float | None = None, coupling: str = "full", include_Q: bool = True,
                     chunk: int = 512, backend=None) -> EnsembleResult:
    """Weighted average of bare populations over the momentum samples.

    ``model`` is "effective" (semiclassical dark-state model) or "bare".
    """
    species = species or strontium87()
    geometry = geometry or BeamGeometry()
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}; choose from {MODELS}")
    if model == "effective":
        dt = dt or default_dark_step(schedule)
    else:
        dt = dt or default_bare_step(schedule, coupling)
    steps = step_grid(schedule, dt, t_stop)
    marks = steps.marks(record_every)
    times = steps.edges[marks]
    frames = frame_at(times, schedule, species, geometry) if model == "effective" else None
    total = np.zeros((len(marks), 4))
    for start in range(0, len(grid), chunk):
        p = grid.momenta[start:start + chunk]
        w = grid.weights[start:start + chunk]
        if model == "effective":
            psi0 = np.tile([0.0, 1.0], (len(p), 1))
            _, _, rec = evolve_dark_batch(schedule, p, psi0, species=species, geometry=geometry,
                                          include_Q=include_Q, dt=dt, t_stop=t_stop, marks=marks,
                                          backend=backend)
            pops = bare_projection(rec, frames)
        else:
            psi0 = np.tile(INITIAL_STATE, (len(p), 1))
            _, _, rec = evolve_family_batch(schedule, p, psi0, species=species, geometry=geometry,
                                            coupling=coupling, dt=dt, t_stop=t_stop, marks=marks,
                                            backend=backend)
            pops = np.abs(rec) ** 2
        norm = pops.sum(axis=-1)
        bad = ~np.all(np.isfinite(norm) & (np.abs(norm - 1) < 1e-6), axis=1)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ConvergenceError(
                f"sample {start + i} (p = {p[i].tolist()} kg m/s) lost normalisation in the {model} model")
        total += np.einsum("s,smk->mk", w, pops)
    return EnsembleResult(times=times, populations=total)


def scan(schedule: PulseSchedule, name: str, values, grid: ThermalGrid, model: str = "effective",
         **kwargs) -> np.ndarray:
    """Final averaged populations (len(values), 4) while sweeping one schedule field."""
    out = np.empty((len(values), 4))
    for i, v in enumerate(values):
        out[i] = ensemble_average(schedule.replace(**{name: float(v)}), grid, model, **kwargs).final_populations
    return out
