import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from georamsey import _pykernels, kernels

BACKENDS = sorted(kernels.BACKENDS)
needs_compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")


def random_su2(rng, n):
    base = rng.normal(size=(n, 4)) * 1e5
    lin = rng.normal(size=(3, n, 4)) * 1e3
    dt = rng.uniform(1e-9, 1e-8, n)
    return base, lin, dt


def direct_su2(base, dt, psi):
    sig = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    for c, h in zip(base, dt):
        H = sum(ci * s for ci, s in zip(c, sig))
        psi = expm(-1j * H * h) @ psi
    return psi


@pytest.mark.parametrize("backend", BACKENDS)
def test_su2_matches_expm(backend):
    rng = np.random.default_rng(1)
    base, lin, dt = random_su2(rng, 60)
    psi0 = np.array([[0.6, 0.8j]])
    out = kernels.evolve_su2(base, dt, psi0, backend=backend)
    np.testing.assert_allclose(out[0][0], direct_su2(base, dt, psi0[0]), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_family_matches_expm(backend):
    rng = np.random.default_rng(2)
    n = 40
    A = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    gen = (A + np.conj(np.swapaxes(A, 1, 2))) * 3e6
    dt = rng.uniform(1e-9, 5e-8, n)
    shift = rng.normal(size=(1, 4)) * 1e5
    psi0 = np.array([[0, 0, 1, 0]], dtype=complex)
    out, _ = kernels.evolve_family(gen, dt, psi0, shift, backend=backend)
    ref = psi0[0]
    for g, h in zip(gen, dt):
        ref = expm(-1j * (g + np.diag(shift[0])) * h) @ ref
    np.testing.assert_allclose(out[0], ref, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_family_non_hermitian(backend):
    gen = np.zeros((5, 4, 4), dtype=complex)
    gen[:, 3, 3] = -0.5j * 1e5
    gen[:, 0, 3] = gen[:, 3, 0] = 2e5
    dt = np.full(5, 2e-6)
    psi0 = np.array([[1, 0, 0, 0]], dtype=complex)
    out, _ = kernels.evolve_family(gen, dt, psi0, backend=backend)
    ref = expm(-1j * gen[0] * 1e-5) @ psi0[0]
    np.testing.assert_allclose(out[0], ref, atol=1e-12)


@needs_compiled
@given(st.integers(1, 200), st.integers(1, 5), st.integers(0, 2**31))
def test_backends_agree_su2(n, samples, seed):
    rng = np.random.default_rng(seed)
    base, lin, dt = random_su2(rng, n)
    w = rng.normal(size=(samples, 3))
    psi0 = rng.normal(size=(samples, 2)) + 1j * rng.normal(size=(samples, 2))
    marks = np.unique(rng.integers(0, n + 1, size=4))
    a = kernels.evolve_su2(base, dt, psi0, lin, w, marks, backend="compiled")
    b = kernels.evolve_su2(base, dt, psi0, lin, w, marks, backend="python")
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-11 * np.abs(psi0).max())


@needs_compiled
@given(st.integers(1, 80), st.integers(0, 2**31))
def test_backends_agree_family(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    gen = (A + np.conj(np.swapaxes(A, 1, 2))) * 1e6
    dt = rng.uniform(1e-9, 1e-7, n)
    shift = rng.normal(size=(3, 4)) * 1e4
    psi0 = rng.normal(size=(3, 4)) + 0j
    marks = np.array([0, n // 2, n])
    a = kernels.evolve_family(gen, dt, psi0, shift, marks, backend="compiled")
    b = kernels.evolve_family(gen, dt, psi0, shift, marks, backend="python")
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-10 * np.abs(psi0).max())


def test_ordered_product_order():
    a = np.array([[[0, 1], [1, 0]], [[1, 0], [0, -1]], [[0, -1j], [1j, 0]]], dtype=complex)
    np.testing.assert_allclose(_pykernels.ordered_product(a), a[2] @ a[1] @ a[0])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.evolve_su2(np.zeros((1, 4)), np.ones(1), np.ones((1, 2)), backend="fortran")


def test_env_var_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, GEORAMSEY_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from georamsey import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_evolve_segments_applies_between():
    def step(a, b, psi, local):
        rec = np.repeat(psi[:, None, :], len(local), axis=1)
        return psi, rec

    psi, rec = kernels.evolve_segments(step, ((0, 3), (3, 6)), np.array([0, 3, 6]),
                                       np.ones((1, 2), dtype=complex), lambda v: 2 * v)
    np.testing.assert_allclose(psi, [[2, 2]])
    np.testing.assert_allclose(rec[0, :, 0], [1, 1, 2])
