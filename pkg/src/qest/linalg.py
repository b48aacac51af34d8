"""Dense complex matrix primitives shared by all modules.

Conventions used throughout the package:

* ``vec`` stacks columns: vec(A) = [A_11, A_21, ..., A_m1, A_12, ...]^T.
* Matrix exponentials of Hermitian generators are computed spectrally,
  ``herm_expm(H, s) = exp(-i s H)``.
* Matrix logarithms of unitaries use eigenphases on the principal branch
  (-pi, pi] and return the traceless Hermitian generator.

The JSON schema for matrices used repo-wide is
``{"rows": r, "cols": c, "data": [[re, im], ...]}`` with ``data`` in the
same column-stacked order as ``vec``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import BranchAmbiguityWarning, ContractViolationError


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return float(np.linalg.norm(a - a.conj().T)) <= tol


def is_unitary(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    eye = np.eye(a.shape[0])
    return float(np.linalg.norm(a.conj().T @ a - eye)) <= tol


def is_psd(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if not is_hermitian(a, max(tol, 1e-10)):
        return False
    w = np.linalg.eigvalsh((a + a.conj().T) / 2)
    return float(w.min()) >= -tol


@dataclass(frozen=True, eq=False)
class HermitianBasis:
    """Traceless orthonormal Hermitian operator basis of a d-dimensional space.

    ``elements`` is a stacked array of shape (d**2 - 1, d, d) satisfying
    Tr(O_i) = 0 and Tr(O_i O_j) = delta_ij.
    """

    dim: int
    elements: np.ndarray

    @property
    def size(self) -> int:
        return self.dim * self.dim - 1


@lru_cache(maxsize=None)
def gell_mann_basis(d: int) -> HermitianBasis:
    """Generalized Gell-Mann basis, normalized to unit Hilbert-Schmidt norm.

    Ordering is fixed: the d(d-1)/2 symmetric elements first, then the
    d(d-1)/2 antisymmetric ones, then the d-1 diagonal ones; off-diagonal
    blocks are lexicographic in (row, col).  For d=2 this is
    (sigma_x, sigma_y, sigma_z)/sqrt(2).
    """
    if d < 2:
        raise ValueError(f"invalid dimension d={d}; need d >= 2")
    elems = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = 1.0
            m[k, j] = 1.0
            elems.append(m / np.sqrt(2.0))
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1.0j
            m[k, j] = 1.0j
            elems.append(m / np.sqrt(2.0))
    for l in range(1, d):
        diag = [1.0] * l + [-float(l)] + [0.0] * (d - l - 1)
        m = np.diag(diag).astype(complex)
        elems.append(m / np.sqrt(l * (l + 1.0)))
    stacked = np.stack(elems)
    stacked.setflags(write=False)
    return HermitianBasis(dim=d, elements=stacked)


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("vec expects a matrix")
    return a.ravel(order="F")


def vec_inv(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of ``vec``: rebuild the rows x cols matrix from a column-stacked vector."""
    v = np.asarray(v).ravel()
    if v.size != rows * cols:
        raise ValueError(f"vector of length {v.size} cannot fill a {rows}x{cols} matrix")
    return v.reshape((rows, cols), order="F")


def herm_expm(h: np.ndarray, s: float = 1.0) -> np.ndarray:
    """exp(-i s H) for Hermitian H, via spectral decomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, 1e-10):
        raise ContractViolationError("herm_expm requires a Hermitian generator")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * s * w)) @ v.conj().T


def nearest_unitary(s: np.ndarray) -> np.ndarray:
    """Polar factor of a full-rank square matrix.

    Returns U V^dag from the SVD S = U Sigma V^dag, the unitary closest to S
    in Frobenius norm.
    """
    s = np.asarray(s, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("nearest_unitary expects a square matrix")
    u, sig, vh = np.linalg.svd(s)
    if sig[-1] <= 1e-12:
        raise ContractViolationError(
            "rank-deficient input: the polar factor is not unique"
        )
    return u @ vh


def unitary_log(u: np.ndarray, t: float) -> np.ndarray:
    """Traceless Hermitian H with exp(-i H t) equal to U up to a global phase.

    Eigenphases are taken on the principal branch (-pi, pi]; the result is
    shifted by a multiple of the identity to make it traceless.  Recovery of a
    generator H is faithful only when no eigenphase of U wraps, i.e. when the
    caller guarantees ||H||_2 * t < pi.  Eigenphases within 1e-6 of the cut
    raise a :class:`BranchAmbiguityWarning`.
    """
    u = np.asarray(u, dtype=complex)
    if t <= 0:
        raise ValueError("t must be positive")
    if not is_unitary(u, 1e-8):
        raise ContractViolationError("unitary_log requires a unitary input")
    d = u.shape[0]
    tmat, z = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(tmat))
    gap = np.minimum(np.abs(phases - np.pi), np.abs(phases + np.pi))
    if float(gap.min()) <= 1e-6:
        warnings.warn(
            "eigenphase within 1e-6 of the branch cut at pi; the recovered "
            "generator may sit on the wrong branch",
            BranchAmbiguityWarning,
            stacklevel=2,
        )
    h = (z * (-phases / t)) @ z.conj().T
    h = h - (np.trace(h) / d) * np.eye(d)
    return (h + h.conj().T) / 2


def matrix_to_json(a: np.ndarray) -> dict:
    """Serialize a complex matrix to the repo-wide JSON schema."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError("matrix_to_json expects a matrix")
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(x.real), float(x.imag)] for x in vec(a)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    """Inverse of :func:`matrix_to_json`."""
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    flat = np.array([complex(re, im) for re, im in data])
    return vec_inv(flat, rows, cols)
