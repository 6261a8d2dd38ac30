"""Minimal dense complex linear algebra for small Hermitian problems.

The kernels here (cyclic Jacobi eigensolver, LU with partial pivoting,
operator functions via the spectral decomposition) are deliberately
hand-rolled: problem sizes are tiny (dim <= ~16, never beyond ~64) and the
solvers must be bit-reproducible across runs and platforms, which rules out
threaded BLAS backends.  Everything is a pure function of its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "LinAlgError",
    "NotHermitianError",
    "SingularMatrixError",
    "IllConditionedWarning",
    "HermitianEigen",
    "max_abs",
    "frobenius",
    "check_hermitian",
    "eig_hermitian",
    "func_of_hermitian",
    "solve",
    "principal_sqrt",
    "unitarity_residual",
]

HERMITICITY_RTOL = 1e-12
JACOBI_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100
PIVOT_RTOL = 1e-14
CONDITION_WARN_AT = 1e8


class LinAlgError(Exception):
    """Numerical failure in a dense kernel."""


class NotHermitianError(LinAlgError):
    pass


class SingularMatrixError(LinAlgError):
    pass


class IllConditionedWarning(UserWarning):
    pass


def max_abs(a: np.ndarray) -> float:
    """Entrywise max-magnitude norm."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def _square_complex(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise LinAlgError(f"{name} must be square and non-empty, got shape {a.shape}")
    return a


def check_hermitian(a: np.ndarray, rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    """Validate Hermiticity within a relative tolerance; return complex copy."""
    a = _square_complex(a)
    asym = max_abs(a - a.conj().T)
    if asym > rtol * (1.0 + max_abs(a)):
        raise NotHermitianError(
            f"matrix is not Hermitian: max asymmetry {asym:.3e} "
            f"exceeds {rtol:.1e} * (1 + max|A|)"
        )
    return a


@dataclass(frozen=True)
class HermitianEigen:
    """Spectral decomposition A = V diag(w) V^dagger, eigenvalues ascending.

    Eigenvector phases are fixed (largest-magnitude component of each column
    made real positive) so repeated runs give identical matrices.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _jacobi_rotation(work: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """Zero work[p, q] with a unitary plane rotation; update work and v in place."""
    apq = work[p, q]
    m = abs(apq)
    if m == 0.0:
        return
    phase = apq / m
    d = (work[q, q].real - work[p, p].real) / (2.0 * m)
    if d == 0.0:
        t = 1.0
    else:
        t = np.sign(d) / (abs(d) + np.hypot(d, 1.0))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
    g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
    work[:, [p, q]] = work[:, [p, q]] @ g
    work[[p, q], :] = g.conj().T @ work[[p, q], :]
    work[p, q] = 0.0
    work[q, p] = 0.0
    work[p, p] = work[p, p].real
    work[q, q] = work[q, q].real
    v[:, [p, q]] = v[:, [p, q]] @ g


def _off_diagonal_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return frobenius(off)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        piv = v[i, j]
        mag = abs(piv)
        if mag > 0.0:
            v[:, j] *= np.conj(piv) / mag
            v[i, j] = mag  # force exactly real positive
    return v


def eig_hermitian(a: np.ndarray, rtol: float = HERMITICITY_RTOL) -> HermitianEigen:
    """Hermitian eigendecomposition by cyclic Jacobi rotations.

    Robust and deterministic for the small dimensions used here; convergence
    is declared when the off-diagonal Frobenius norm drops below
    1e-14 * ||A||_F (at most 100 sweeps).
    """
    a = check_hermitian(a, rtol=rtol)
    n = a.shape[0]
    work = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    norm0 = frobenius(work)
    tol = JACOBI_RTOL * norm0
    if norm0 == 0.0:
        return HermitianEigen(np.zeros(n), np.eye(n, dtype=complex))
    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_diagonal_norm(work) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                _jacobi_rotation(work, v, p, q)
    else:
        if _off_diagonal_norm(work) > tol:
            raise LinAlgError(
                f"Jacobi sweep limit reached ({JACOBI_MAX_SWEEPS}) without convergence"
            )
    w = np.diag(work).real.copy()
    order = np.argsort(w, kind="stable")
    return HermitianEigen(w[order], _fix_phases(v[:, order]))


def func_of_hermitian(a: np.ndarray, f: Callable[[float], complex]) -> np.ndarray:
    """Apply a scalar function to a Hermitian operator: V diag(f(w)) V^dagger."""
    eig = eig_hermitian(a)
    fw = np.empty(eig.eigenvalues.size, dtype=complex)
    for i, lam in enumerate(eig.eigenvalues):
        val = f(lam)
        if not np.all(np.isfinite([np.real(val), np.imag(val)])):
            raise LinAlgError(f"function undefined at eigenvalue {lam!r} (got {val!r})")
        fw[i] = val
    v = eig.eigenvectors
    return (v * fw) @ v.conj().T


def _lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """LU with partial pivoting; returns (packed LU, row permutation, cond estimate)."""
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    scale = max_abs(a)
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    for k in range(n):
        ip = k + int(np.argmax(np.abs(lu[k:, k])))
        piv = abs(lu[ip, k])
        if piv < PIVOT_RTOL * scale:
            pivots = np.abs(np.diag(lu)[:k])
            cond = float(pivots.max() / piv) if (k and piv > 0.0) else np.inf
            raise SingularMatrixError(
                f"singular or near-singular matrix: pivot {piv:.3e} below "
                f"{PIVOT_RTOL:.0e} * max|A| (condition estimate {cond:.3e})"
            )
        if ip != k:
            lu[[k, ip]] = lu[[ip, k]]
            perm[[k, ip]] = perm[[ip, k]]
        lu[k + 1 :, k] /= lu[k, k]
        if k + 1 < n:
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    pivots = np.abs(np.diag(lu))
    cond = float(pivots.max() / pivots.min())
    return lu, perm, cond


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B by LU with partial pivoting.

    Rejects (near-)singular systems; warns via IllConditionedWarning when the
    pivot-ratio condition estimate exceeds 1e8.
    """
    a = _square_complex(a, "A")
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.shape[0] != a.shape[0]:
        raise LinAlgError(f"shape mismatch: A is {a.shape}, B is {b.shape}")
    lu, perm, cond = _lu_factor(a)
    if cond > CONDITION_WARN_AT:
        warnings.warn(
            f"ill-conditioned solve: pivot-ratio condition estimate {cond:.3e}",
            IllConditionedWarning,
            stacklevel=2,
        )
    x = b[perm].copy()
    n = a.shape[0]
    for k in range(n - 1):
        x[k + 1 :] -= lu[k + 1 :, k, None] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] /= lu[k, k]
        if k:
            x[:k] -= lu[:k, k, None] * x[k]
    return x[:, 0] if vector else x


def principal_sqrt(z):
    """Principal square root with the cut on the negative real axis.

    Real negative inputs map to +i*sqrt(|z|), so Im(sqrt) >= 0 for all real
    inputs and evanescent channels decay instead of growing.
    """
    arr = np.asarray(z, dtype=complex)
    # force +0.0 imaginary part on the real axis so the branch is one-sided
    arr = np.where(arr.imag == 0.0, arr.real + 0.0j, arr)
    out = np.sqrt(arr)
    return out if np.ndim(z) else complex(out)


def unitarity_residual(u: np.ndarray) -> float:
    """max|U^dagger U - I|."""
    u = np.asarray(u, dtype=complex)
    return max_abs(u.conj().T @ u - np.eye(u.shape[1]))
