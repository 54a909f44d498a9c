"""Physical constants, beam geometry and the Ramsey pulse schedule.

Everything here is an immutable value object shared by the simulators.
Units are SI throughout; Rabi frequencies are angular (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

HBAR = sc.hbar
KB = sc.k
AMU = sc.atomic_mass

#: Isotopic mass of strontium-87 in unified atomic mass units.
SR87_MASS_U = 86.9088775
#: Intercombination-line wavelength used for the tripod beams.
SR87_WAVELENGTH = 689e-9
#: Linewidth of the 1S0 -> 3P1 line (angular).
SR87_LINEWIDTH = 2 * math.pi * 7.5e3


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConvergenceError(RuntimeError):
    """A propagation or fit did not reach the requested accuracy."""


@dataclass(frozen=True)
class SpeciesConstants:
    """Atomic species data plus the recoil quantities derived from it."""

    mass: float
    wavelength: float
    linewidth: float
    k: float = field(init=False)
    recoil_momentum: float = field(init=False)
    recoil_frequency: float = field(init=False)

    def __post_init__(self):
        for name in ("mass", "wavelength", "linewidth"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        k = 2 * math.pi / self.wavelength
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "recoil_momentum", HBAR * k)
        object.__setattr__(self, "recoil_frequency", HBAR * k * k / (2 * self.mass))

    @property
    def recoil_energy(self) -> float:
        """Single-photon recoil energy p_r**2 / 2m in joules."""
        return HBAR * self.recoil_frequency

    @property
    def fringe_frequency(self) -> float:
        """Angular frequency 2 p_r**2 / (hbar m) of the free-evolution phase."""
        return 4 * self.recoil_frequency


def derive_species_constants(mass: float, wavelength: float, linewidth: float) -> SpeciesConstants:
    return SpeciesConstants(mass=mass, wavelength=wavelength, linewidth=linewidth)


def strontium87() -> SpeciesConstants:
    return SpeciesConstants(SR87_MASS_U * AMU, SR87_WAVELENGTH, SR87_LINEWIDTH)


@dataclass(frozen=True)
class BeamGeometry:
    """Propagation directions (unit vectors in the x-y plane) and static phases.

    The default puts beam 1 along -y, beam 2 along +x and beam 3 along +y, which
    gives |1> and |2> the spatial phases exp(2iky) and exp(ik(y - x)) relative
    to |3> inside the dark states.
    """

    directions: tuple = ((0.0, -1.0), (1.0, 0.0), (0.0, 1.0))
    offsets: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (3, 2):
            raise DomainError("directions must be three 2-vectors")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, rtol=0, atol=1e-12):
            raise DomainError("beam directions must be unit vectors")
        if len(self.offsets) != 3:
            raise DomainError("need one phase offset per beam")
        object.__setattr__(self, "directions", tuple(map(tuple, d.tolist())))
        object.__setattr__(self, "offsets", tuple(float(x) for x in self.offsets))

    def wavevectors(self, k: float) -> np.ndarray:
        """(3, 2) array of beam wavevectors."""
        return k * np.asarray(self.directions)

    def recoil_offsets(self, k: float) -> np.ndarray:
        """Momentum offsets hbar(k_3 - k_a) of the ground states in a family.

        Rows are ordered (|1>, |2>, |3>); the excited state sits at hbar k_3.
        """
        kv = self.wavevectors(k)
        return HBAR * (kv[2] - kv)

    def spatial_phases(self, k: float, r=(0.0, 0.0)) -> np.ndarray:
        """Total beam phases S_a = k_a . r + delta_a."""
        return self.wavevectors(k) @ np.asarray(r, dtype=float) + np.asarray(self.offsets)


@dataclass(frozen=True)
class PulseSchedule:
    """Two geometric pi/2 pulses, each made of three Gaussian beams.

    Pulse j has beam-3 center ``t3(j)``; beams 1 and 2 sit at ``t3 -/+ eta sigma``
    for the first pulse.  With ``mirror`` on, the second pulse is the time
    reflection of the first (beam 2 leads, beam 1 closes the sequence).
    ``phase_jump`` is added to beam 3 at the middle of the free evolution.
    """

    omega0: tuple = (2 * math.pi * 260e3, 2 * math.pi * 260e3, 2 * math.pi * 130e3)
    sigma_t: float = 2.5e-6
    eta: float = 1.8
    T: float = 6e-6
    mirror: bool = True
    phase_jump: float = 0.0

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise DomainError(f"sigma_t must be positive, got {self.sigma_t!r}")
        if self.T < 0:
            raise DomainError(f"free evolution time must be >= 0, got {self.T!r}")
        if len(self.omega0) != 3 or any(o < 0 for o in self.omega0):
            raise DomainError("omega0 must hold three non-negative amplitudes")
        object.__setattr__(self, "omega0", tuple(float(o) for o in self.omega0))

    def t3(self, j: int) -> float:
        if j == 1:
            return 4 * self.sigma_t
        if j == 2:
            return 4 * self.sigma_t + 8 * self.sigma_t + self.T
        raise DomainError(f"pulse index must be 1 or 2, got {j!r}")

    def centers(self, j: int) -> tuple[float, float, float]:
        t3 = self.t3(j)
        d = self.eta * self.sigma_t
        if j == 2 and self.mirror:
            return (t3 + d, t3 - d, t3)
        return (t3 - d, t3 + d, t3)

    @property
    def jump_time(self) -> float:
        """Middle of the free evolution, where the beam-3 phase jump is applied."""
        return 8 * self.sigma_t + self.T / 2

    @property
    def duration(self) -> float:
        return 16 * self.sigma_t + self.T

    @property
    def overlap_bound(self) -> float:
        """Upper bound on the relative tail of one pulse at the other's peak."""
        return math.exp(-((4 + self.T / self.sigma_t) ** 2) / 8)

    @property
    def peak_amplitude(self) -> float:
        return max(self.omega0)

    def replace(self, **changes) -> "PulseSchedule":
        from dataclasses import replace

        return replace(self, **changes)


def pulse_centers(j: int, schedule: PulseSchedule) -> tuple[float, float, float]:
    """Centers of the three beam envelopes (beams 1, 2, 3) in pulse ``j``."""
    return schedule.centers(j)
