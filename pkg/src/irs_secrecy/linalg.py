"""Small dense linear-algebra kernels used by the precoder and phase updates.

Factorizations are delegated to LAPACK through numpy/scipy; this module adds
the Hermitian checks, the deterministic power method and a scalar bisection.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .errors import BracketInvalid, NoConvergence, NotHermitian, NotPositiveDefinite

HERMITIAN_TOL = 1e-10
POWER_MAX_ITER = 10_000
EIGH_MAX_DIM = 64


def hermitian_part(A: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (A + A^H)/2 after checking that A is Hermitian up to ``tol``.

    The tolerance is applied elementwise relative to ``max(1, max|A_ij|)`` so
    that badly scaled but symmetric matrices are accepted.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {A.shape}")
    if A.size == 0:
        return A.astype(complex)
    scale = max(1.0, float(np.max(np.abs(A))))
    asym = float(np.max(np.abs(A - A.conj().T)))
    if not np.isfinite(asym) or asym > tol * scale:
        raise NotHermitian(f"asymmetry {asym:.3g} exceeds {tol:g} x {scale:.3g}")
    return 0.5 * (A + A.conj().T)


def solve_hpd(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve ``A x = y`` for Hermitian positive-definite ``A`` by Cholesky."""
    A = hermitian_part(A)
    y = np.asarray(y)
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has length {y.shape[0]}, matrix is {A.shape}")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, y)


def power_method(
    A: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = POWER_MAX_ITER,
) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    Starts from the normalized all-ones vector and returns the final
    Rayleigh quotient.
    """
    n = A.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    y = A @ x
    lam = float(np.real(np.vdot(x, y)))
    for _ in range(max_iter):
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        y = A @ x
        lam_new = float(np.real(np.vdot(x, y)))
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return max(lam_new, 0.0)
        lam = lam_new
    raise NoConvergence(f"power method did not converge in {max_iter} iterations")


def max_eigenvalue(A: np.ndarray, method: str = "auto") -> float:
    """Largest eigenvalue of a Hermitian PSD matrix.

    ``method`` is ``"eigh"`` (full decomposition), ``"power"`` or ``"auto"``,
    which picks the decomposition up to dimension 64 and power iteration above.
    """
    A = hermitian_part(A)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if method == "auto":
        method = "eigh" if n <= EIGH_MAX_DIM else "power"
    if method == "eigh":
        return max(float(np.linalg.eigvalsh(A)[-1]), 0.0)
    if method == "power":
        return power_method(A)
    raise ValueError(f"unknown method {method!r}")


def bisect(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 400,
) -> float:
    """Find x in [lo, hi] with f(x) close to ``target`` for non-increasing f.

    Returns as soon as ``|f(x) - target| <= tol``; otherwise stops when the
    bracket is narrower than ``1e-12 * (1 + hi)`` and returns its upper end,
    the side where ``f <= target``.
    """
    f_lo = f(lo)
    if abs(f_lo - target) <= tol:
        return lo
    f_hi = f(hi)
    if abs(f_hi - target) <= tol:
        return hi
    if not (f_lo >= target >= f_hi):
        raise BracketInvalid(
            f"target {target:.6g} not within [f(hi), f(lo)] = [{f_hi:.6g}, {f_lo:.6g}]"
        )
    for _ in range(max_iter):
        if hi - lo <= 1e-12 * (1.0 + abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid - target) <= tol:
            return mid
        if f_mid > target:
            lo = mid
        else:
            hi = mid
    return hi
