"""Pure numpy implementation of the step loops in ``_kernels.pyx``.

Step propagators are built for all steps at once; the ordered product is then
formed by pairwise tree reduction, so the Python-level loop runs only over the
recorded marks and ``log2(N)`` reduction levels.
"""

import numpy as np
import scipy.linalg


def ordered_product(U):
    """U[-1] @ ... @ U[1] @ U[0] for a stack of square matrices."""
    U = np.asarray(U)
    d = U.shape[-1]
    if len(U) == 0:
        return np.eye(d, dtype=complex)
    while len(U) > 1:
        if len(U) % 2:
            U = np.concatenate([U, np.eye(d, dtype=U.dtype)[None]])
        U = U[1::2] @ U[0::2]
    return U[0]


def su2_steps(coef, dt):
    """exp(-i (c0 + c.sigma) dt) for coefficient rows ``coef`` (N, 4)."""
    c0, cx, cy, cz = np.moveaxis(np.asarray(coef), -1, 0)
    nrm = np.sqrt(cx * cx + cy * cy + cz * cz)
    a = nrm * dt
    ca = np.cos(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        sa = np.where(nrm > 0, np.sin(a) / np.where(nrm > 0, nrm, 1.0), dt)
    g = np.exp(-1j * c0 * dt)
    U = np.empty(c0.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = g * (ca - 1j * sa * cz)
    U[..., 0, 1] = g * sa * (-cy - 1j * cx)
    U[..., 1, 0] = g * sa * (cy - 1j * cx)
    U[..., 1, 1] = g * (ca + 1j * sa * cz)
    return U


def family_steps(gen, dt):
    """exp(-i H dt) for a stack of 4x4 generators; eigh when Hermitian."""
    gen = np.asarray(gen)
    if np.allclose(gen, np.conj(np.swapaxes(gen, -1, -2)), rtol=0, atol=1e-9 * max(1.0, np.abs(gen).max())):
        w, V = np.linalg.eigh(gen)
        return np.einsum("nij,nj,nkj->nik", V, np.exp(-1j * w * dt[:, None]), V.conj())
    return scipy.linalg.expm(-1j * gen * dt[:, None, None])


def _march(U, psi0, marks):
    N = len(U)
    psi = np.array(psi0, dtype=complex)
    rec = np.empty((len(marks), len(psi)), dtype=complex)
    pos = 0
    for m, idx in enumerate(marks):
        if idx > pos:
            psi = ordered_product(U[pos:idx]) @ psi
            pos = idx
        rec[m] = psi
    if pos < N:
        psi = ordered_product(U[pos:N]) @ psi
    return psi, rec


def evolve_su2(base, lin, weights, dt, psi0, marks):
    base = np.asarray(base)
    out = np.empty(psi0.shape, dtype=complex)
    rec = np.empty((psi0.shape[0], len(marks), 2), dtype=complex)
    for s in range(psi0.shape[0]):
        coef = base + np.tensordot(weights[s], lin, axes=(0, 0)) if len(lin) else base
        out[s], rec[s] = _march(su2_steps(coef, dt), psi0[s], marks)
    return out, rec


def evolve_family(gen, shift, dt, psi0, marks):
    gen = np.asarray(gen)
    out = np.empty(psi0.shape, dtype=complex)
    rec = np.empty((psi0.shape[0], len(marks), 4), dtype=complex)
    idx = np.arange(4)
    for s in range(psi0.shape[0]):
        g = gen.copy()
        g[:, idx, idx] += shift[s]
        out[s], rec[s] = _march(family_steps(g, dt), psi0[s], marks)
    return out, rec
