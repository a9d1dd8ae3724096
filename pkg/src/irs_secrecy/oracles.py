"""Brute-force and numerical oracles used to certify the solvers in tests.

Everything here recomputes rates from the raw link arrays with its own
arithmetic and never calls the solver modules. The functions are slow on
purpose.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .channel import ChannelSet
from .errors import DimensionTooLarge

GRID_MAX_N = 2
SELECTOR_MAX_K = 12


def _log_ratios_direct(
    heff: np.ndarray, geff: np.ndarray, W: np.ndarray, sigma2: np.ndarray, mu2: np.ndarray
) -> np.ndarray:
    """``log2((1+SINR_k)/(1+ESNR_k))`` for every user by explicit summation."""
    K = W.shape[1]
    out = np.zeros(K)
    for k in range(K):
        signal = abs(np.sum(heff[:, k].conj() * W[:, k])) ** 2
        interference = sum(
            abs(np.sum(heff[:, k].conj() * W[:, i])) ** 2 for i in range(K) if i != k
        )
        leak = sum(
            abs(np.sum(geff[:, j].conj() * W[:, k])) ** 2 / mu2[j] for j in range(geff.shape[1])
        )
        out[k] = np.log2(1.0 + signal / (interference + sigma2[k])) - np.log2(1.0 + leak)
    return out


def _cascade(direct: np.ndarray, cascades: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``direct[:, k] + cascades[k] @ phi`` for a batch of phase vectors.

    ``phi`` has shape ``(P, N)``; the result has shape ``(P, M, K)``.
    """
    return direct[None, :, :] + np.einsum("kmn,pn->pmk", cascades, phi)


def grid_phase_oracle(
    cs: ChannelSet,
    W: np.ndarray,
    b: np.ndarray,
    weights: np.ndarray,
    resolution_deg: float,
) -> tuple[np.ndarray, float]:
    """Exhaustive maximization of the selector objective over a phase grid.

    Every element angle runs over ``{0, res, 2 res, ...} < 360`` degrees.
    Returns the best phases and the best value of
    ``sum_k w_k b_k log2((1+SINR_k)/(1+ESNR_k))``. Raises
    :class:`DimensionTooLarge` for ``N > 2``.
    """
    N = cs.dims.N
    if N > GRID_MAX_N:
        raise DimensionTooLarge(f"grid oracle supports N <= {GRID_MAX_N}, got {N}")
    if not resolution_deg > 0:
        raise ValueError("resolution_deg must be positive")
    angles = np.deg2rad(np.arange(0.0, 360.0, resolution_deg))
    grid = np.array(list(itertools.product(angles, repeat=N)))
    phi = np.exp(-1j * grid)
    W = np.asarray(W, dtype=complex)
    wb = np.asarray(weights, dtype=float) * np.asarray(b, dtype=float)
    heff = _cascade(cs.h_d, cs.H, phi)
    geff = _cascade(cs.g_d, cs.G, phi)
    # Batched form of _log_ratios_direct over the grid.
    gains = np.abs(np.einsum("pmk,mi->pki", heff.conj(), W)) ** 2
    signal = np.einsum("pkk->pk", gains)
    interference = gains.sum(axis=2) - signal
    leak = (np.abs(np.einsum("pmj,mk->pjk", geff.conj(), W)) ** 2 / cs.mu2[None, :, None]).sum(axis=1)
    value = (wb * (np.log2(1.0 + signal / (interference + cs.sigma2)) - np.log2(1.0 + leak))).sum(axis=1)
    best = int(np.argmax(value))
    return phi[best].copy(), float(value[best])


def exhaustive_b_oracle(
    cs: ChannelSet, W: np.ndarray, phi: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Selector in ``{0,1}^K`` maximizing the selector objective by enumeration.

    Ties keep the selector enumerated first, so users with a zero log-ratio
    are left out.
    """
    K = cs.dims.K
    if K > SELECTOR_MAX_K:
        raise DimensionTooLarge(f"selector oracle supports K <= {SELECTOR_MAX_K}, got {K}")
    phi = np.asarray(phi, dtype=complex)
    heff = _cascade(cs.h_d, cs.H, phi[None, :])[0]
    geff = _cascade(cs.g_d, cs.G, phi[None, :])[0]
    terms = np.asarray(weights, dtype=float) * _log_ratios_direct(
        heff, geff, np.asarray(W, dtype=complex), cs.sigma2, cs.mu2
    )
    best, best_value = None, -np.inf
    for bits in itertools.product((0, 1), repeat=K):
        value = sum(t for t, on in zip(terms, bits) if on)
        if value > best_value:
            best, best_value = bits, value
    return np.array(best, dtype=int)


def finite_diff_gradient(
    objective: Callable[[np.ndarray], float], point: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a real function of a real vector.

    Component ``i`` uses the step ``step * max(1, |x_i|)``.
    """
    x = np.asarray(point, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x.flat[i]))
        up, down = x.copy(), x.copy()
        up.flat[i] += h
        down.flat[i] -= h
        grad.flat[i] = (objective(up) - objective(down)) / (2.0 * h)
    return grad
