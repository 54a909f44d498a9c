"""Backend selection for the step loops.

The compiled extension is used when it imports; otherwise (or with
``GEORAMSEY_PURE=1`` in the environment) the numpy fallback takes over.
Both backends share one calling convention; see ``evolve_su2`` and
``evolve_family`` below.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("GEORAMSEY_PURE"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def _impl(backend):
    name = backend or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None


def _marks(marks, n):
    if marks is None:
        return np.zeros(0, dtype=np.intp)
    marks = np.ascontiguousarray(marks, dtype=np.intp)
    if marks.size and (marks.min() < 0 or marks.max() > n or np.any(np.diff(marks) < 0)):
        raise ValueError("marks must be sorted step indices in [0, N]")
    return marks


def evolve_su2(base, dt, psi0, lin=None, weights=None, marks=None, backend=None):
    """Propagate 2-level states through piecewise-constant Pauli generators.

    base : (N, 4) coefficients (identity, x, y, z) of H/hbar in rad/s.
    lin, weights : optional (L, N, 4) terms added per sample as
        ``sum_l weights[s, l] * lin[l]``.
    psi0 : (S, 2) initial states.
    marks : step indices at which to record the state (0 is the initial state).
    """
    base = np.ascontiguousarray(base, dtype=float)
    n = base.shape[0]
    psi0 = np.ascontiguousarray(np.atleast_2d(psi0), dtype=complex)
    if lin is None:
        lin = np.zeros((0, n, 4))
        weights = np.zeros((psi0.shape[0], 0))
    lin = np.ascontiguousarray(lin, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    dt = np.ascontiguousarray(np.broadcast_to(dt, (n,)), dtype=float)
    return _impl(backend).evolve_su2(base, lin, weights, dt, psi0, _marks(marks, n))


def evolve_family(gen, dt, psi0, shift=None, marks=None, backend=None):
    """Propagate 4-level family states through piecewise-constant generators.

    gen : (N, 4, 4) complex H/hbar in rad/s (may be non-Hermitian).
    shift : (S, 4) per-sample diagonal offsets (kinetic energies at momentum p).
    """
    gen = np.ascontiguousarray(gen, dtype=complex)
    n = gen.shape[0]
    psi0 = np.ascontiguousarray(np.atleast_2d(psi0), dtype=complex)
    if shift is None:
        shift = np.zeros((psi0.shape[0], 4))
    shift = np.ascontiguousarray(shift, dtype=float)
    dt = np.ascontiguousarray(np.broadcast_to(dt, (n,)), dtype=float)
    return _impl(backend).evolve_family(gen, shift, dt, psi0, _marks(marks, n))


def evolve_segments(step, segments, marks, psi0, between=None):
    """Chain ``step`` over consecutive step-index segments.

    ``step(i0, i1, psi, local_marks)`` must return ``(psi_out, recorded)`` like
    the kernels above.  ``between(psi)`` is applied at each internal segment
    boundary (after that boundary has been recorded).  Returns the final
    states and the states at the global ``marks``.
    """
    psi = np.ascontiguousarray(np.atleast_2d(psi0), dtype=complex)
    marks = np.asarray(marks, dtype=np.intp)
    recs = []
    for k, (a, b) in enumerate(segments):
        sel = (marks >= a) & (marks <= b)
        if k > 0:
            sel &= marks > a
        psi, rec = step(a, b, psi, marks[sel] - a)
        recs.append(rec)
        if between is not None and k < len(segments) - 1:
            psi = between(psi)
    return psi, np.concatenate(recs, axis=1)
