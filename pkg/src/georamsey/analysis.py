"""Fringe fitting, dark-state polar angle and closed-form figures of merit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import hilbert

from .core import HBAR, KB, BeamGeometry, DomainError, PulseSchedule, SpeciesConstants, strontium87


@dataclass(frozen=True)
class FringeFit:
    """y = C + A exp(-t/tau) cos(omega t + phi0)."""

    C: float
    A: float
    tau: float
    omega: float
    phi0: float
    residual_rms: float
    converged: bool
    iterations: int = 0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        decay = np.exp(-t / self.tau) if np.isfinite(self.tau) else 1.0
        return self.C + self.A * decay * np.cos(self.omega * t + self.phi0)

    @property
    def frequency(self) -> float:
        """Fringe frequency in Hz."""
        return self.omega / (2 * math.pi)


@dataclass(frozen=True)
class CosineFit:
    """y = C + A cos(Phi + phi0) with the period fixed to 2 pi."""

    C: float
    A: float
    phi0: float
    residual_rms: float
    determined: bool

    def __call__(self, x):
        return self.C + self.A * np.cos(np.asarray(x, dtype=float) + self.phi0)


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _spectral_peak(t, y):
    """Angular frequency of the strongest non-DC component (zero-padded FFT)."""
    tu = np.linspace(t[0], t[-1], len(t))
    yu = np.interp(tu, t, y) - np.mean(y)
    n = 16 * len(tu)
    spec = np.abs(np.fft.rfft(yu * np.hanning(len(tu)), n))
    freqs = np.fft.rfftfreq(n, tu[1] - tu[0])
    # skip the DC lobe of the window
    lo = max(1, int(np.ceil(2 * n / len(tu) / 2)))
    k = lo + int(np.argmax(spec[lo:]))
    return 2 * math.pi * freqs[k]


def _envelope_rate(t, y, c):
    """Decay rate from a straight-line fit to the log Hilbert envelope."""
    env = np.abs(hilbert(y - c))
    mask = env > 0.05 * env.max()
    if mask.sum() < 3:
        return 0.0
    slope = np.polyfit(t[mask], np.log(env[mask]), 1)[0]
    return max(-slope, 0.0)


def _linear_part(t, y, omega, gamma):
    e = np.exp(-gamma * t)
    M = np.column_stack([np.ones_like(t), e * np.cos(omega * t), e * np.sin(omega * t)])
    (c, a, b), *_ = np.linalg.lstsq(M, y, rcond=None)
    return c, math.hypot(a, b), math.atan2(-b, a)


def fit_damped_cosine(t, y, max_iter: int = 500) -> FringeFit:
    """Least-squares fit of an exponentially damped cosine with offset.

    Initial values come from the spectral peak (omega), the mean (C) and the
    log-envelope slope (tau); refinement is Levenberg-Marquardt with an
    analytic Jacobian.  The decay rate 1/tau is the fitted variable, so an
    undamped signal returns ``tau = inf``.  Non-convergence is reported in
    ``converged`` rather than raised.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise DomainError("t and y must be 1-D arrays of equal length")
    if len(t) < 12:
        raise DomainError(f"need at least 12 samples, got {len(t)}")
    order = np.argsort(t)
    t, y = t[order], y[order]
    span = t[-1] - t[0]
    if not span > 0:
        raise DomainError("samples must span a non-zero interval")
    t0 = t[0]
    ts = (t - t0) / span
    c0 = float(np.mean(y))
    w0 = _spectral_peak(ts, y)
    g0 = _envelope_rate(ts, y, c0)
    c0, a0, p0 = _linear_part(ts, y, w0, g0)

    def model(x):
        c, a, g, w, p = x
        return c + a * np.exp(-g * ts) * np.cos(w * ts + p)

    def resid(x):
        return model(x) - y

    def jac(x):
        c, a, g, w, p = x
        e = np.exp(-g * ts)
        cs, sn = np.cos(w * ts + p), np.sin(w * ts + p)
        return np.column_stack([np.ones_like(ts), e * cs, -a * ts * e * cs, -a * ts * e * sn, -a * e * sn])

    res = least_squares(resid, [c0, a0, g0, w0, p0], jac=jac, method="lm", max_nfev=max_iter,
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c, a, g, w, p = res.x
    if a < 0:
        a, p = -a, p + math.pi
    if w < 0:
        w, p = -w, -p
    # back to physical time, re-origin to t = 0
    omega = w / span
    gamma = g / span
    phi0 = _wrap(p - omega * t0)
    amp = a * math.exp(gamma * t0)
    tau = 1.0 / gamma if gamma > 0 else math.inf
    rms = float(np.sqrt(np.mean(res.fun**2)))
    ok = bool(res.success) and bool(np.all(np.isfinite(res.x))) and res.nfev < max_iter
    return FringeFit(C=float(c), A=float(amp), tau=float(tau), omega=float(omega), phi0=float(phi0),
                     residual_rms=rms, converged=ok, iterations=int(res.nfev))


def fit_cosine(phase, y) -> CosineFit:
    """Linear least squares for C + A cos(Phi + phi0); the period is 2 pi.

    A constant input gives ``A = 0`` and ``determined = False`` with phi0 set
    to NaN.
    """
    x = np.asarray(phase, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise DomainError("need matching 1-D arrays with at least 3 samples")
    if np.ptp(x) < 2 * math.pi * (1 - 1e-9):
        raise DomainError("phase samples must span at least 2 pi")
    M = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    (c, a, b), *_ = np.linalg.lstsq(M, y, rcond=None)
    amp = math.hypot(a, b)
    rms = float(np.sqrt(np.mean((M @ [c, a, b] - y) ** 2)))
    if amp <= 1e-12 * max(1.0, abs(c)):
        return CosineFit(C=float(c), A=0.0, phi0=math.nan, residual_rms=rms, determined=False)
    return CosineFit(C=float(c), A=float(amp), phi0=float(math.atan2(-b, a)), residual_rms=rms, determined=True)


def polar_angle(state) -> float:
    """Bloch polar angle with |D2> at the pole: 2 atan2(|c_D1|, |c_D2|)."""
    c = np.asarray(state, dtype=complex)
    if not np.any(np.abs(c) > 0):
        raise DomainError("polar angle of the zero state is undefined")
    return float(2 * math.atan2(abs(c[0]), abs(c[1])))


def splitter_deviation(state) -> float:
    """Deviation of the polar angle from the ideal pi/2 splitter."""
    return polar_angle(state) - math.pi / 2


def decoherence_time(T0: float, species: SpeciesConstants | None = None) -> float:
    """Time for the two arms to separate by a thermal de Broglie wavelength."""
    species = species or strontium87()
    if not T0 > 0:
        raise DomainError(f"temperature must be positive, got {T0!r}")
    return math.sqrt(species.mass * math.pi / (2 * species.k**2 * KB * T0))


def thermal_de_broglie_wavelength(T0: float, species: SpeciesConstants | None = None) -> float:
    species = species or strontium87()
    if not T0 > 0:
        raise DomainError(f"temperature must be positive, got {T0!r}")
    return 2 * math.pi * HBAR / math.sqrt(2 * math.pi * species.mass * KB * T0)


def recoil_temperature(species: SpeciesConstants | None = None) -> float:
    """k_B T_R = hbar^2 k^2 / 2m."""
    species = species or strontium87()
    return HBAR * species.recoil_frequency / KB


def splitter_state(schedule: PulseSchedule, model: str = "bare", species: SpeciesConstants | None = None,
                   geometry: BeamGeometry | None = None, **kwargs) -> np.ndarray:
    """Dark-state amplitudes (c_D1, c_D2) midway through the free evolution, p = 0.

    The bare model is projected onto the instantaneous dark frame; the
    effective model is read off directly.
    """
    from .baremodel import project_dark, propagate_family
    from .darkspace import propagate_dark

    t_mid = schedule.jump_time
    if model == "bare":
        run = propagate_family(schedule, species=species, geometry=geometry, t_stop=t_mid, **kwargs)
        return project_dark(run, schedule, species, geometry)[-1]
    if model == "effective":
        return propagate_dark(schedule, species, geometry, t_stop=t_mid, **kwargs).final_state
    raise DomainError(f"unknown model {model!r}; choose 'bare' or 'effective'")


def polar_deviation_scan(schedule: PulseSchedule, sigmas, model: str = "bare", **kwargs) -> np.ndarray:
    """Delta theta = theta - pi/2 after the first pulse for each pulse width."""
    return np.array([splitter_deviation(splitter_state(schedule.replace(sigma_t=float(s)), model, **kwargs))
                     for s in sigmas])
