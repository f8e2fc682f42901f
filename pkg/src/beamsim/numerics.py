"""Small dense complex linear algebra used throughout the simulator.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``.
All matrices handled here are tiny (at most codebook size), so the
routines favour clarity and stability over speed.
"""

import numpy as np

HERMITIAN_RTOL = 1e-10
PD_RTOL = 1e-12


class NotHermitian(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


def kron(a, b):
    """Kronecker product of two vectors; entry ``i*len(b) + j`` is ``a[i]*b[j]``."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("kron of an empty vector")
    return np.outer(a, b).ravel()


def _symmetrized(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.conj().T) > HERMITIAN_RTOL * max(scale, 1e-300):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def _fix_phase(vecs):
    # first non-negligible entry of each column made real-positive
    mag = np.abs(vecs)
    first = np.argmax(mag > 1e-12 * np.maximum(mag.max(axis=0), 1e-300), axis=0)
    p = vecs[first, np.arange(vecs.shape[1])]
    scale = np.ones_like(p)
    nz = p != 0
    scale[nz] = np.abs(p[nz]) / p[nz]
    return vecs * scale


def hermitian_eig(m):
    """Eigendecomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray of float, sorted descending
    eigenvectors : ndarray of complex, orthonormal columns matching
        ``eigenvalues``; the first nonzero entry of each column is real and
        positive.

    Raises
    ------
    NotHermitian
        If ``m`` deviates from ``m^H`` by more than ``1e-10 * ||m||_F``.
    """
    h = _symmetrized(m)
    w, v = np.linalg.eigh(h)
    order = np.argsort(w)[::-1]
    return w[order], _fix_phase(v[:, order])


def inv_sqrt_pd(m):
    """Hermitian inverse square root ``R`` of a positive-definite ``m`` (``R m R = I``)."""
    w, v = hermitian_eig(m)
    if w[-1] <= PD_RTOL * max(w[0], 0.0) or w[0] <= 0.0:
        raise NotPositiveDefinite(
            f"min eigenvalue {w[-1]:.3e} vs max {w[0]:.3e}")
    r = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return 0.5 * (r + r.conj().T)


def rayleigh_quotient(a, b, x):
    """(x^H a x) / (x^H b x) as a real number."""
    x = np.asarray(x, dtype=complex)
    num = np.vdot(x, a @ x).real
    den = np.vdot(x, b @ x).real
    return num / den


def max_generalized_rayleigh(a, b):
    """Maximize the generalized Rayleigh quotient ``x^H a x / x^H b x``.

    The problem is whitened with ``b^{-1/2}``: the maximizer is
    ``b^{-1/2} e_max`` with ``e_max`` the dominant eigenvector of
    ``b^{-1/2} a b^{-1/2}``, normalized to unit length.

    Returns
    -------
    x_star : ndarray, unit-norm maximizer
    value : float, the maximal quotient (largest whitened eigenvalue)
    """
    a = _symmetrized(a)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    g = inv_sqrt_pd(b)
    w, v = hermitian_eig(g @ a @ g)
    x = g @ v[:, 0]
    x = x / np.linalg.norm(x)
    return _fix_phase(x[:, None])[:, 0], float(w[0])
