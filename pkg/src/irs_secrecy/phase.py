"""Phase marginal problem: quadratic form, unit-modulus tuners and inner loop.

With the auxiliaries fixed, maximizing the surrogate over the IRS phases is
equivalent to minimizing

    Q(phi) = phi^H U phi + 2 Re{phi^H v}   subject to |phi_n| = 1.

Two tuners decrease ``Q`` monotonically. The MM tuner replaces ``U`` by
``lambda_max I`` around the current point, which turns the problem into an
elementwise projection. The BCD tuner minimizes over one entry at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import ChannelSet, check_phase, wssr_q_from_ratios
from .fp import AuxState, PhaseWorkspace, f_from_components, update_q_psi
from .linalg import max_eigenvalue

DEGENERATE_ABS = 1e-300


@dataclass(frozen=True)
class QuadraticForm:
    """``Q(phi) = phi^H U phi + 2 Re{phi^H v}`` with its MM constant."""

    U: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    lambda_max: float

    def objective(self, phi: np.ndarray) -> float:
        return float(np.real(np.vdot(phi, self.U @ phi)) + 2.0 * np.real(np.vdot(phi, self.v)))

    def majorizer(self, phi: np.ndarray, phi0: np.ndarray) -> float:
        """Upper bound of ``Q(phi)`` that touches it at ``phi0``."""
        lam = self.lambda_max
        linear = self.U @ phi0 + self.v - lam * phi0
        return float(
            lam * (np.vdot(phi, phi).real + np.vdot(phi0, phi0).real)
            + 2.0 * np.real(np.vdot(phi, linear))
            - np.real(np.vdot(phi0, self.U @ phi0))
        )


def quadratic_from_workspace(
    ws: PhaseWorkspace,
    f: np.ndarray,
    q: np.ndarray,
    psi: np.ndarray,
    b: np.ndarray,
    weights: np.ndarray,
    eig_method: str = "auto",
) -> QuadraticForm:
    """Assemble ``U`` and ``v`` as a Gram matrix of stacked columns.

    ``U = X X^H`` where ``X`` stacks ``|f_k| H_k^H w_i`` for every pair
    ``(k, i)`` and ``sqrt(kappa_k)/mu_j G_j^H w_k`` for every pair ``(j, k)``.
    """
    cs = ws.cs
    N, K, J = cs.dims.N, cs.dims.K, cs.dims.J
    w_b = np.asarray(weights, dtype=float) * np.asarray(b, dtype=float)
    eta = np.conj(f) * np.sqrt(w_b * (1.0 + q))
    kappa = w_b * (1.0 + psi) / ws.B2U
    f_abs = np.abs(f)

    X_legit = (f_abs[:, None, None] * ws.reflect).transpose(1, 0, 2).reshape(N, K * K)
    y_legit = (f_abs[:, None] * ws.direct.conj()).reshape(K * K)
    if J:
        coef = np.sqrt(kappa[None, :] / cs.mu2[:, None])
        X_eve = (ws.eve_reflect * coef[:, None, :]).transpose(1, 0, 2).reshape(N, J * K)
        y_eve = (coef * ws.eve_direct.conj()).reshape(J * K)
        X = np.hstack([X_legit, X_eve])
        y = np.concatenate([y_legit, y_eve])
    else:
        X, y = X_legit, y_legit

    U = X @ X.conj().T
    own = ws.reflect[np.arange(K), :, np.arange(K)]  # H_k^H w_k, shape (K, N)
    v = X @ y - eta @ own
    return QuadraticForm(U=U, v=v, kappa=kappa, eta=eta,
                         lambda_max=max_eigenvalue(U, method=eig_method))


def build_quadratic(
    cs: ChannelSet, W0: np.ndarray, aux: AuxState, weights: np.ndarray, eig_method: str = "auto"
) -> QuadraticForm:
    """Quadratic form of the phase surrogate for auxiliaries ``f, q, psi, b``.

    ``U = sum_k |f_k|^2 H_k^H W0 W0^H H_k + sum_{k,j} kappa_k/mu_j^2 G_j^H w_k w_k^H G_j``
    and ``v = sum_k |f_k|^2 H_k^H W0 W0^H h_dk - eta_k H_k^H w_k
    + sum_{k,j} kappa_k/mu_j^2 G_j^H w_k w_k^H g_dj`` with
    ``kappa_k = w_k b_k (1+psi_k)/B2U_k`` and ``eta_k = f_k^* sqrt(w_k b_k (1+q_k))``.
    """
    ws = PhaseWorkspace(cs, W0)
    return quadratic_from_workspace(ws, aux.f, aux.q, aux.psi, aux.b, weights, eig_method)


def _project(candidate: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """``-candidate/|candidate|`` entrywise, keeping ``previous`` where it vanishes."""
    mag = np.abs(candidate)
    out = previous.copy()
    ok = mag >= DEGENERATE_ABS
    out[ok] = -candidate[ok] / mag[ok]
    return out


def _sweep_in_place(qf: QuadraticForm, phi: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Gauss-Seidel sweep in ascending order.

    Entry ``n`` is set to ``-(r_n - shift_n phi_n)/|...|`` where
    ``r = U phi + v`` reflects all updates made so far in the sweep.
    """
    U = qf.U
    phi = phi.copy()
    r = U @ phi + qf.v
    for n in range(phi.shape[0]):
        cand = r[n] - shift[n] * phi[n]
        mag = abs(cand)
        if mag < DEGENERATE_ABS:
            continue
        new = -cand / mag
        delta = new - phi[n]
        if delta != 0:
            r += U[:, n] * delta
            phi[n] = new
    return phi


def _run_tuner(
    qf: QuadraticForm,
    phi0: np.ndarray,
    step: Callable[[np.ndarray], np.ndarray],
    max_iter: int,
    rel_tol: float,
) -> np.ndarray:
    phi = np.asarray(phi0, dtype=complex).copy()
    value = qf.objective(phi)
    for _ in range(max_iter):
        phi = step(phi)
        new_value = qf.objective(phi)
        if abs(new_value - value) <= rel_tol * (1.0 + abs(new_value)):
            break
        value = new_value
    return phi


def mm_tune(
    qf: QuadraticForm,
    phi0: np.ndarray,
    max_iter: int = 20,
    rel_tol: float = 1e-10,
    in_place: bool = False,
) -> np.ndarray:
    """Majorization-minimization over unit-modulus phases.

    Each iteration sets ``phi_n = -p_n/|p_n|`` with
    ``p = U phi + v - lambda_max phi``. By default ``p`` is evaluated at the
    previous iterate; ``in_place=True`` updates entries sequentially and uses
    the newest values. Entries with ``|p_n| < 1e-300`` keep their value.
    """
    lam = qf.lambda_max
    if in_place:
        shift = np.full(qf.v.shape[0], lam)

        def step(phi: np.ndarray) -> np.ndarray:
            return _sweep_in_place(qf, phi, shift)
    else:
        def step(phi: np.ndarray) -> np.ndarray:
            return _project(qf.U @ phi + qf.v - lam * phi, phi)

    return _run_tuner(qf, phi0, step, max_iter, rel_tol)


def bcd_tune(
    qf: QuadraticForm,
    phi0: np.ndarray,
    max_iter: int = 20,
    rel_tol: float = 1e-10,
    jacobi: bool = False,
) -> np.ndarray:
    """Element-wise block coordinate descent over unit-modulus phases.

    Entry ``n`` is set to ``-a_n/|a_n|`` with ``a_n = v_n + sum_{m != n} U_nm phi_m``.
    The default sweep updates in place in ascending ``n``; ``jacobi=True``
    evaluates every ``a_n`` at the previous iterate, which is not guaranteed
    to decrease the objective.
    """
    diag = np.real(np.diag(qf.U)).copy()
    if jacobi:
        def step(phi: np.ndarray) -> np.ndarray:
            return _project(qf.U @ phi + qf.v - diag * phi, phi)
    else:
        def step(phi: np.ndarray) -> np.ndarray:
            return _sweep_in_place(qf, phi, diag)

    return _run_tuner(qf, phi0, step, max_iter, rel_tol)


TUNERS = ("MM", "BCD")


def inner_loop_a2(
    cs: ChannelSet,
    W: np.ndarray,
    b: np.ndarray,
    weights: np.ndarray,
    init_phi: np.ndarray,
    tuner: str = "MM",
    max_iter: int = 100,
    rel_tol: float = 1e-5,
    tuner_max_iter: int = 20,
    tuner_rel_tol: float = 1e-10,
    in_place: bool = False,
    jacobi: bool = False,
    eig_method: str = "auto",
) -> tuple[np.ndarray, list[float]]:
    """Iterate the phase update at a fixed precoder and selector.

    Each iteration recomputes ``q``, ``psi`` and ``f`` at the current phases,
    assembles the quadratic form and runs the tuner from the current phases.
    Returns the final phases and the selector-objective trace starting with
    its value at ``init_phi``.
    """
    if tuner not in TUNERS:
        raise ValueError(f"tuner must be one of {TUNERS}, got {tuner!r}")
    phi = check_phase(init_phi, cs.dims.N).copy()
    weights = np.asarray(weights, dtype=float)
    b = np.asarray(b, dtype=int)
    ws = PhaseWorkspace(cs, W)
    value = wssr_q_from_ratios(*ws.ratios(phi), weights, b)
    trace = [value]
    for _ in range(max_iter):
        mp = ws.components(phi)
        q, psi = update_q_psi(mp)
        f = f_from_components(mp, q, weights, b)
        qf = quadratic_from_workspace(ws, f, q, psi, b, weights, eig_method)
        if tuner == "MM":
            phi = mm_tune(qf, phi, tuner_max_iter, tuner_rel_tol, in_place=in_place)
        else:
            phi = bcd_tune(qf, phi, tuner_max_iter, tuner_rel_tol, jacobi=jacobi)
        new_value = wssr_q_from_ratios(*ws.ratios(phi), weights, b)
        trace.append(new_value)
        if abs(new_value - value) <= rel_tol * (1.0 + abs(new_value)):
            break
        value = new_value
    return phi, trace
