"""Precoder marginal problem: closed-form update and its inner loop.

With the auxiliaries fixed, the surrogate is a concave quadratic in each
column ``w_k`` and its maximizer under ``||W||_F^2 <= p_max`` is

    w_k = rho_k (Gamma_k + lambda I)^{-1} h_k,
    Gamma_k = H diag(|beta|^2) H^H + tau_k G diag(1/mu^2) G^H,

with ``rho_k = sqrt(w_k b_k (1+t_k)) beta_k``, ``tau_k = w_k b_k (1+alpha_k)/B1U``
and the multiplier ``lambda >= 0`` chosen so that the budget holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelSet,
    check_phase,
    effective_eve_channels,
    effective_legit_channels,
    link_ratios,
    wssr_q_from_ratios,
)
from .errors import BracketInvalid, NotPositiveDefinite, SingularSystem
from .fp import (
    AuxState,
    beta_from_components,
    marginal_w_from_channels,
    update_alpha,
    update_gamma,
    update_t,
)
from .linalg import bisect, solve_hpd

# Eigen-components of Gamma_k below this fraction of the largest one are
# treated as its null space. It sits just above the eigensolver roundoff:
# at high transmit power the eavesdropper term makes Gamma_k legitimately
# ill-conditioned (condition numbers near 1e13 at 0 dBW), so a looser cut
# discards the signal subspace.
NULL_RTOL = 64 * np.finfo(float).eps
LAMBDA_HI_CAP = 2.0**60
LAMBDA_LO_FLOOR = 2.0**-200
POWER_RTOL = 1e-12


@dataclass(frozen=True)
class PrecoderUpdateParams:
    """Matrices and scalars of the closed-form precoder update."""

    heff: np.ndarray
    gamma_base: np.ndarray
    eve_gram: np.ndarray
    tau: np.ndarray
    rho: np.ndarray

    def gamma(self, k: int, lambda_p: float = 0.0) -> np.ndarray:
        """``Gamma_k + lambda_p I``."""
        M = self.gamma_base.shape[0]
        return self.gamma_base + self.tau[k] * self.eve_gram + lambda_p * np.eye(M)


def _params_from_channels(
    heff: np.ndarray,
    geff: np.ndarray,
    mu2: np.ndarray,
    aux: AuxState,
    weights: np.ndarray,
    B1U: float,
) -> PrecoderUpdateParams:
    w_b = np.asarray(weights, dtype=float) * np.asarray(aux.b, dtype=float)
    rho = np.sqrt(w_b * (1.0 + aux.t)) * aux.beta
    tau = w_b * (1.0 + aux.alpha) / B1U
    gamma_base = (heff * np.abs(aux.beta) ** 2) @ heff.conj().T
    eve_gram = (geff / mu2) @ geff.conj().T if geff.shape[1] else np.zeros_like(gamma_base)
    return PrecoderUpdateParams(heff=heff, gamma_base=gamma_base, eve_gram=eve_gram,
                                tau=tau, rho=rho)


def precoder_params(
    cs: ChannelSet, phi0: np.ndarray, aux: AuxState, weights: np.ndarray, p_max: float
) -> PrecoderUpdateParams:
    """Assemble ``Gamma_k``, ``rho_k`` and ``tau_k`` at the phases ``phi0``."""
    phi0 = check_phase(phi0, cs.dims.N)
    heff = effective_legit_channels(cs, phi0)
    geff = effective_eve_channels(cs, phi0)
    B1U = 1.0 + p_max * float(np.sum(np.abs(geff) ** 2 / cs.mu2[None, :]))
    return _params_from_channels(heff, geff, cs.mu2, aux, weights, B1U)


def w_update(
    cs: ChannelSet,
    phi0: np.ndarray,
    aux: AuxState,
    weights: np.ndarray,
    p_max: float,
    lambda_p: float,
) -> np.ndarray:
    """Precoder ``w_k = rho_k (Gamma_k + lambda_p I)^{-1} h_k`` for a given multiplier."""
    if lambda_p < 0:
        raise ValueError("lambda_p must be non-negative")
    params = precoder_params(cs, phi0, aux, weights, p_max)
    M, K = params.heff.shape
    W = np.zeros((M, K), dtype=complex)
    for k in range(K):
        if params.rho[k] == 0:
            continue
        try:
            W[:, k] = params.rho[k] * solve_hpd(params.gamma(k, lambda_p), params.heff[:, k])
        except NotPositiveDefinite as exc:
            raise SingularSystem(f"Gamma_{k} is singular at lambda_p={lambda_p:g}") from exc
    return W


class _SpectralPrecoder:
    """Eigendecomposition of every ``Gamma_k`` for fast evaluation in ``lambda``.

    Null-space components are dropped: ``h_k`` lies in the range of
    ``Gamma_k`` whenever ``rho_k != 0``, so this is the limit ``lambda -> 0+``.
    """

    def __init__(self, params: PrecoderUpdateParams):
        M, K = params.heff.shape
        self.rho = params.rho
        self.eigvals = np.zeros((K, M))
        self.vecs = np.zeros((K, M, M), dtype=complex)
        self.coef = np.zeros((K, M), dtype=complex)
        active = np.flatnonzero(params.rho != 0)
        for k in active:
            d, V = np.linalg.eigh(params.gamma(k))
            self.eigvals[k] = d
            self.vecs[k] = V
            self.coef[k] = V.conj().T @ params.heff[:, k]
        self.scale = float(self.eigvals.max(initial=0.0))
        keep = self.eigvals > NULL_RTOL * self.scale
        keep[np.setdiff1d(np.arange(K), active)] = False
        self.coef = np.where(keep, self.coef, 0.0)
        self.eigvals = np.where(keep, self.eigvals, 1.0)
        self.weight = np.abs(self.rho)[:, None] ** 2 * np.abs(self.coef) ** 2

    def power(self, lambda_p: float) -> float:
        return float(np.sum(self.weight / (self.eigvals + lambda_p) ** 2))

    def precoder(self, lambda_p: float) -> np.ndarray:
        scaled = self.rho[:, None] * self.coef / (self.eigvals + lambda_p)
        return np.einsum("kmj,kj->mk", self.vecs, scaled)


def _tune(params: PrecoderUpdateParams, p_max: float) -> tuple[np.ndarray, float]:
    spectral = _SpectralPrecoder(params)
    if spectral.power(0.0) <= p_max:
        return spectral.precoder(0.0), 0.0
    # Bracket geometrically, then bisect on log(lambda) so the stopping width
    # is relative to the multiplier. A width relative to the bracket end
    # leaves the multiplier inaccurate when it is far below the bracket scale.
    hi = spectral.scale
    while spectral.power(hi) > p_max:
        hi *= 2.0
        if hi > LAMBDA_HI_CAP * spectral.scale:
            raise BracketInvalid("power multiplier exceeded its bracket cap")
    lo = hi / 2.0
    while spectral.power(lo) <= p_max:
        lo /= 2.0
        if lo < LAMBDA_LO_FLOOR * spectral.scale:
            raise BracketInvalid("power multiplier fell below its bracket floor")
    log_lambda = bisect(
        lambda u: spectral.power(float(np.exp(u))), p_max, np.log(lo), np.log(hi),
        tol=POWER_RTOL * p_max,
    )
    lambda_p = float(np.exp(log_lambda))
    return spectral.precoder(lambda_p), lambda_p


def tune_lambda_p(
    cs: ChannelSet, phi0: np.ndarray, aux: AuxState, weights: np.ndarray, p_max: float
) -> tuple[np.ndarray, float]:
    """Precoder and multiplier satisfying the power budget.

    ``lambda_p = 0`` when the unconstrained maximizer already meets the
    budget; otherwise the multiplier is bisected until the transmit power
    matches ``p_max`` to within ``1e-12`` relative.
    """
    return _tune(precoder_params(cs, phi0, aux, weights, p_max), p_max)


def a1_aux(
    heff: np.ndarray,
    geff: np.ndarray,
    W: np.ndarray,
    sigma2: np.ndarray,
    mu2: np.ndarray,
    weights: np.ndarray,
    b: np.ndarray,
    p_max: float,
) -> tuple[AuxState, float]:
    """Auxiliaries of one precoder iteration evaluated at the current ``W``.

    ``t`` is computed first so that ``beta`` uses the ratio at the same ``W``;
    this keeps the surrogate tight at the current point.
    """
    mw = marginal_w_from_channels(heff, geff, W, sigma2, mu2, p_max)
    aux = AuxState.empty(W.shape[1], b)
    aux.t = update_t(mw)
    aux.alpha = update_alpha(mw)
    aux.beta = beta_from_components(mw, aux.t, weights, b)
    aux.gamma = update_gamma(mw, weights, b, aux.alpha)
    return aux, mw.B1U


def inner_loop_a1(
    cs: ChannelSet,
    phi: np.ndarray,
    b: np.ndarray,
    weights: np.ndarray,
    p_max: float,
    init_W: np.ndarray,
    max_iter: int = 100,
    rel_tol: float = 1e-5,
) -> tuple[np.ndarray, list[float]]:
    """Iterate the precoder update at fixed phases and selector.

    Returns the final precoder and the trace of the selector objective,
    starting with its value at ``init_W``. Stops once the change is at most
    ``rel_tol * (1 + |R|)`` or after ``max_iter`` updates.
    """
    phi = check_phase(phi, cs.dims.N)
    heff = effective_legit_channels(cs, phi)
    geff = effective_eve_channels(cs, phi)
    weights = np.asarray(weights, dtype=float)
    b = np.asarray(b, dtype=int)
    W = np.asarray(init_W, dtype=complex)
    value = wssr_q_from_ratios(*link_ratios(heff, geff, W, cs.sigma2, cs.mu2), weights, b)
    trace = [value]
    for _ in range(max_iter):
        aux, B1U = a1_aux(heff, geff, W, cs.sigma2, cs.mu2, weights, b, p_max)
        params = _params_from_channels(heff, geff, cs.mu2, aux, weights, B1U)
        W, _ = _tune(params, p_max)
        new_value = wssr_q_from_ratios(*link_ratios(heff, geff, W, cs.sigma2, cs.mu2), weights, b)
        trace.append(new_value)
        if abs(new_value - value) <= rel_tol * (1.0 + abs(new_value)):
            break
        value = new_value
    return W, trace
