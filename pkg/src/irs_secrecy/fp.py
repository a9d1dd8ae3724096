"""Fractional-programming building blocks.

Both marginal problems split every user's secrecy term into a legitimate part
``log(1 + A^m/B^m)`` and an eavesdropper part ``log(1 + A^e/B^e)`` where
``A^e = B^U - B^e`` is kept non-negative by an upper bound ``B^U`` on the
leakage. The Lagrangian-dual transform moves each ratio out of the logarithm
with a real auxiliary (``t``/``alpha`` for the precoder, ``q``/``psi`` for the
phases), and the quadratic transform decouples the remaining ratio with a
complex auxiliary (``beta`` for the precoder, ``f`` for the phases). Every
``update_*`` function below is the closed-form maximizer of its block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ChannelSet,
    check_phase,
    effective_eve_channels,
    effective_legit_channels,
    link_ratios,
    selector_from_ratios,
)
from .errors import NegativeInput


def xi(x: np.ndarray | float, base: float = 2.0) -> np.ndarray | float:
    """``log(1 + x) - x`` with logarithm in ``base`` (bits by default).

    The closed-form dual updates are exact maximizers of the transform only
    with the natural logarithm; pass ``base=np.e`` when evaluating the dual
    objective itself.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeInput("xi is defined for x >= 0")
    out = np.log1p(arr) / np.log(base) - arr
    return float(out) if out.ndim == 0 else out


@dataclass
class AuxState:
    """Auxiliary variables of both marginal problems for ``K`` users."""

    t: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    f: np.ndarray
    q: np.ndarray
    psi: np.ndarray
    varpi: np.ndarray
    b: np.ndarray

    @classmethod
    def empty(cls, K: int, b: np.ndarray | None = None) -> "AuxState":
        zr = np.zeros(K)
        zc = np.zeros(K, dtype=complex)
        sel = np.ones(K, dtype=int) if b is None else np.asarray(b, dtype=int).copy()
        return cls(zr.copy(), zr.copy(), zc.copy(), zc.copy(), zc.copy(),
                   zr.copy(), zr.copy(), zc.copy(), sel)


@dataclass(frozen=True)
class MarginalW:
    """Ratio components of the precoder problem for all users.

    ``S`` holds the cross gains ``S[k, i] = h_k^H w_i`` for reuse.
    """

    A1m: np.ndarray
    B1m: np.ndarray
    B1e: np.ndarray
    A1e: np.ndarray
    B1U: float
    S: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MarginalPhi:
    """Ratio components of the phase problem for all users.

    ``S`` holds the cross gains ``S[k, i] = h_k(phi)^H w_i``.
    """

    A2m: np.ndarray
    B2m: np.ndarray
    B2e: np.ndarray
    A2e: np.ndarray
    B2U: np.ndarray
    S: np.ndarray = field(repr=False)


def marginal_w_from_channels(
    heff: np.ndarray,
    geff: np.ndarray,
    W: np.ndarray,
    sigma2: np.ndarray,
    mu2: np.ndarray,
    p_max: float,
) -> MarginalW:
    """Precoder-problem components from precomputed effective channels."""
    S = heff.conj().T @ W
    power = np.abs(S) ** 2
    A1m = np.diag(power).copy()
    B1m = np.maximum(power.sum(axis=1) - A1m, 0.0) + sigma2
    if geff.shape[1] == 0:
        B1e = np.ones(W.shape[1])
        B1U = 1.0
    else:
        E = geff.conj().T @ W
        B1e = 1.0 + (np.abs(E) ** 2 / mu2[:, None]).sum(axis=0)
        B1U = 1.0 + p_max * float(np.sum(np.abs(geff) ** 2 / mu2[None, :]))
    A1e = np.maximum(B1U - B1e, 0.0)
    return MarginalW(A1m=A1m, B1m=B1m, B1e=B1e, A1e=A1e, B1U=B1U, S=S)


def marginal_w_components(
    cs: ChannelSet, W: np.ndarray, phi0: np.ndarray, p_max: float
) -> MarginalW:
    """Components ``A1m = |h_k^H w_k|^2``, ``B1m``, ``B1e``, ``A1e`` and ``B1U``.

    ``B1U = 1 + ||diag(1/mu) G^H||_F^2 p_max`` bounds ``B1e`` for every
    feasible precoder, so ``A1e = B1U - B1e >= 0``.
    """
    phi0 = check_phase(phi0, cs.dims.N)
    return marginal_w_from_channels(
        effective_legit_channels(cs, phi0),
        effective_eve_channels(cs, phi0),
        np.asarray(W, dtype=complex),
        cs.sigma2,
        cs.mu2,
        p_max,
    )


def update_t(mw: MarginalW) -> np.ndarray:
    """Legitimate dual auxiliary ``t = A1m / B1m`` (the SINR)."""
    return mw.A1m / mw.B1m


def update_alpha(mw: MarginalW) -> np.ndarray:
    """Eavesdropper dual auxiliary ``alpha = A1e / B1e``."""
    return mw.A1e / mw.B1e


def _fp_weight(weights: np.ndarray, b: np.ndarray, ratio: np.ndarray) -> np.ndarray:
    return np.asarray(weights, dtype=float) * np.asarray(b, dtype=float) * (1.0 + ratio)


def beta_from_components(
    mw: MarginalW, t: np.ndarray, weights: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Quadratic-transform auxiliary ``beta = C1m / D1m``."""
    C = np.sqrt(_fp_weight(weights, b, t)) * np.diag(mw.S)
    return C / (mw.A1m + mw.B1m)


def update_beta(
    cs: ChannelSet,
    W: np.ndarray,
    phi0: np.ndarray,
    t: np.ndarray,
    weights: np.ndarray,
    b: np.ndarray,
    p_max: float = 1.0,
) -> np.ndarray:
    """``beta_k = sqrt(w_k b_k (1+t_k)) h_k^H w_k / (A1m_k + B1m_k)``.

    ``p_max`` only enters the eavesdropper bound and does not affect the
    result.
    """
    return beta_from_components(marginal_w_components(cs, W, phi0, p_max), t, weights, b)


def update_gamma(
    mw: MarginalW, weights: np.ndarray, b: np.ndarray, alpha: np.ndarray
) -> np.ndarray:
    """Eavesdropper quadratic auxiliary ``gamma = sqrt(w b (1+alpha) / B1U) sqrt(A1e)``.

    It has no influence on the precoder update and is kept for inspection.
    """
    return (np.sqrt(_fp_weight(weights, b, alpha) / mw.B1U) * np.sqrt(mw.A1e)).astype(complex)


class PhaseWorkspace:
    """Phase-independent products of a fixed precoder ``W0``.

    Holds ``h_d^H W0``, ``H_k^H W0``, ``g_d^H W0`` and ``G_j^H W0`` so that the
    phase-dependent quantities cost ``O(N K^2 + N J K)`` per evaluation.
    """

    def __init__(self, cs: ChannelSet, W0: np.ndarray):
        W0 = np.asarray(W0, dtype=complex)
        self.cs = cs
        self.W0 = W0
        N = cs.dims.N
        # direct[k, i] = h_dk^H w_i ; reflect[k, :, i] = H_k^H w_i
        self.direct = cs.h_d.conj().T @ W0
        self.reflect = np.einsum("kmn,mi->kni", cs.H.conj(), W0)
        # eve_direct[j, k] = g_dj^H w_k ; eve_reflect[j, :, k] = G_j^H w_k
        self.eve_direct = cs.g_d.conj().T @ W0
        self.eve_reflect = np.einsum("jmn,mk->jnk", cs.G.conj(), W0)
        if cs.dims.J == 0:
            self.B2U = np.ones(cs.dims.K)
        else:
            bound = np.abs(self.eve_direct) + np.sqrt(N) * np.linalg.norm(self.eve_reflect, axis=1)
            self.B2U = 1.0 + (bound**2 / cs.mu2[:, None]).sum(axis=0)

    def cross_gains(self, phi: np.ndarray) -> np.ndarray:
        """``S[k, i] = h_k(phi)^H w_i``."""
        return self.direct + np.einsum("n,kni->ki", phi.conj(), self.reflect)

    def eve_gains(self, phi: np.ndarray) -> np.ndarray:
        """``E[j, k] = g_j(phi)^H w_k``."""
        return self.eve_direct + np.einsum("n,jnk->jk", phi.conj(), self.eve_reflect)

    def ratios(self, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """SINR and ESNR of every user at ``phi``."""
        S = self.cross_gains(phi)
        power = np.abs(S) ** 2
        signal = np.diag(power).copy()
        sinr = signal / (np.maximum(power.sum(axis=1) - signal, 0.0) + self.cs.sigma2)
        if self.cs.dims.J == 0:
            return sinr, np.zeros_like(sinr)
        E = self.eve_gains(phi)
        return sinr, (np.abs(E) ** 2 / self.cs.mu2[:, None]).sum(axis=0)

    def components(self, phi: np.ndarray) -> MarginalPhi:
        S = self.cross_gains(phi)
        power = np.abs(S) ** 2
        A2m = np.diag(power).copy()
        B2m = np.maximum(power.sum(axis=1) - A2m, 0.0) + self.cs.sigma2
        if self.cs.dims.J == 0:
            B2e = np.ones(self.cs.dims.K)
        else:
            E = self.eve_gains(phi)
            B2e = 1.0 + (np.abs(E) ** 2 / self.cs.mu2[:, None]).sum(axis=0)
        A2e = np.maximum(self.B2U - B2e, 0.0)
        return MarginalPhi(A2m=A2m, B2m=B2m, B2e=B2e, A2e=A2e, B2U=self.B2U.copy(), S=S)


def marginal_phi_components(cs: ChannelSet, W0: np.ndarray, phi: np.ndarray) -> MarginalPhi:
    """Phase-problem components at ``phi`` for the fixed precoder ``W0``.

    ``B2U_k = 1 + sum_j (|g_dj^H w_k| + sqrt(N) ||G_j^H w_k||)^2 / mu_j^2``
    bounds ``B2e_k`` for every unit-modulus ``phi`` by the triangle inequality.
    """
    phi = check_phase(phi, cs.dims.N)
    return PhaseWorkspace(cs, W0).components(phi)


def update_q_psi(mp: MarginalPhi) -> tuple[np.ndarray, np.ndarray]:
    """Dual auxiliaries ``q = A2m / B2m`` and ``psi = A2e / B2e``."""
    return mp.A2m / mp.B2m, mp.A2e / mp.B2e


def f_from_components(
    mp: MarginalPhi, q: np.ndarray, weights: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Quadratic-transform auxiliary ``f = C2m / D2m``."""
    C = np.sqrt(_fp_weight(weights, b, q)) * np.diag(mp.S)
    return C / (mp.A2m + mp.B2m)


def update_f(
    cs: ChannelSet,
    W0: np.ndarray,
    phi: np.ndarray,
    q: np.ndarray,
    weights: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """``f_k = sqrt(w_k b_k (1+q_k)) h_k(phi)^H w_k / (||h_k(phi)^H W0||^2 + sigma_k^2)``."""
    return f_from_components(marginal_phi_components(cs, W0, phi), q, weights, b)


def update_varpi(
    mp: MarginalPhi, weights: np.ndarray, b: np.ndarray, psi: np.ndarray
) -> np.ndarray:
    """Eavesdropper quadratic auxiliary of the phase problem (inspection only)."""
    return (np.sqrt(_fp_weight(weights, b, psi) / mp.B2U) * np.sqrt(mp.A2e)).astype(complex)


def update_b(cs: ChannelSet, W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Selector with ``b_k = 1`` exactly when SINR_k > ESNR_k."""
    phi = check_phase(phi, cs.dims.N)
    s, e = link_ratios(
        effective_legit_channels(cs, phi),
        effective_eve_channels(cs, phi),
        np.asarray(W, dtype=complex),
        cs.sigma2,
        cs.mu2,
    )
    return selector_from_ratios(s, e)
