"""Outer alternating drivers for joint precoding and phase tuning.

The two-tiers driver alternates a converged precoder loop, a converged phase
loop and the selector update. The single-loop driver is the same iteration
with every inner budget set to one.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import (
    ChannelSet,
    effective_eve_channels,
    effective_legit_channels,
    phases_from_angles,
    sinr_esnr_all,
    wssr_from_ratios,
    wssr_q_from_ratios,
)
from .errors import NonMonotoneError
from .fp import update_b
from .phase import TUNERS, inner_loop_a2
from .precoder import inner_loop_a1

MODES = ("TwoTiers", "SingleLoop")
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    """Iteration budgets and options of the outer drivers.

    In ``SingleLoop`` mode the inner budgets are forced to one (see
    :meth:`effective`).
    """

    mode: str = "TwoTiers"
    tuner: str = "MM"
    outer_max_iter: int = 30
    outer_rel_tol: float = 1e-4
    inner_max_iter_a1: int = 100
    inner_max_iter_a2: int = 100
    tuner_max_iter: int = 20
    inner_rel_tol: float = 1e-5
    tuner_rel_tol: float = 1e-10
    seed: int = 0
    mm_in_place: bool = False
    bcd_jacobi: bool = False
    # Run every loop to its budget without early stopping.
    fixed_iterations: bool = False
    check_monotone: bool = True
    leakage_aware_init: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tuner not in TUNERS:
            raise ValueError(f"tuner must be one of {TUNERS}, got {self.tuner!r}")
        for name in ("outer_max_iter", "inner_max_iter_a1", "inner_max_iter_a2", "tuner_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("outer_rel_tol", "inner_rel_tol", "tuner_rel_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def effective(self) -> "OptimizerConfig":
        """Configuration actually run; single-loop pins all inner budgets to one."""
        if self.mode == "SingleLoop":
            return dataclasses.replace(
                self, inner_max_iter_a1=1, inner_max_iter_a2=1, tuner_max_iter=1
            )
        return self


@dataclass
class RunTrace:
    """Per-outer-iteration record of one optimization run.

    ``wssr`` holds the objective at the end of every outer iteration;
    ``initial_wssr`` is its value at the initial point.
    """

    wssr: list[float] = field(default_factory=list)
    wssr_q: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    initial_wssr: float = 0.0
    final_W: np.ndarray | None = None
    final_phi: np.ndarray | None = None
    final_b: np.ndarray | None = None
    converged: bool = False

    @property
    def final_wssr(self) -> float:
        return self.wssr[-1] if self.wssr else self.initial_wssr

    @property
    def total_ms(self) -> float:
        return float(sum(self.wall_ms))

    @property
    def iterations(self) -> int:
        return len(self.wssr)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "wssr", "wssr_q", "wall_ms"])
        for i, (r, rq, ms) in enumerate(zip(self.wssr, self.wssr_q, self.wall_ms), start=1):
            writer.writerow([i, f"{r:.12g}", f"{rq:.12g}", f"{ms:.12g}"])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"iterations: {self.iterations}",
            f"converged: {str(self.converged).lower()}",
            f"initial_wssr: {self.initial_wssr:.12g}",
            f"final_wssr: {self.final_wssr:.12g}",
            f"total_ms: {self.total_ms:.6g}",
        ]
        if self.final_b is not None:
            lines.append("final_b: " + " ".join(str(int(x)) for x in self.final_b))
        return "\n".join(lines) + "\n"


def matched_filter(
    heff: np.ndarray,
    p_max: float,
    geff: np.ndarray | None = None,
    mu2: np.ndarray | None = None,
) -> np.ndarray:
    """Equal-power matched filter with ``||W||_F^2 = p_max``.

    When eavesdropper channels are given, column ``k`` is
    ``(G diag(1/mu^2) G^H + (K/p_max) I)^{-1} h_k``, the beam maximizing
    ``|h_k^H w|^2 / (1 + ESNR)`` at power ``p_max/K``. Without eavesdroppers
    this is the plain matched filter. Users with a zero channel get the first
    canonical direction.
    """
    M, K = heff.shape
    directions = heff
    if geff is not None and geff.shape[1] > 0:
        leak = (geff / mu2) @ geff.conj().T + (K / p_max) * np.eye(M)
        directions = np.linalg.solve(leak, heff)
    norms = np.linalg.norm(directions, axis=0)
    W = np.zeros((M, K), dtype=complex)
    for k in range(K):
        if norms[k] > 0:
            W[:, k] = directions[:, k] / norms[k]
        else:
            W[0, k] = 1.0
    return W * np.sqrt(p_max / K)


def initial_precoder(
    cs: ChannelSet, phi: np.ndarray, p_max: float, leakage_aware: bool = True
) -> np.ndarray:
    """Starting precoder at phases ``phi``; see :func:`matched_filter`."""
    heff = effective_legit_channels(cs, phi)
    if leakage_aware:
        return matched_filter(heff, p_max, effective_eve_channels(cs, phi), cs.mu2)
    return matched_filter(heff, p_max)


def random_phases(N: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus phases with angles uniform on ``[0, 2 pi)``."""
    return phases_from_angles(rng.uniform(0.0, 2.0 * np.pi, size=N))


def initialize(
    cs: ChannelSet, p_max: float, seed: int, leakage_aware: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random phases, matched-filter precoder at full power and all-ones selector."""
    rng = np.random.default_rng(seed)
    phi = random_phases(cs.dims.N, rng)
    W = initial_precoder(cs, phi, p_max, leakage_aware)
    return W, phi, np.ones(cs.dims.K, dtype=int)


def _objectives(
    cs: ChannelSet, W: np.ndarray, phi: np.ndarray, weights: np.ndarray, b: np.ndarray
) -> tuple[float, float]:
    s, e = sinr_esnr_all(cs, W, phi)
    return wssr_from_ratios(s, e, weights), wssr_q_from_ratios(s, e, weights, b)


def _drive(
    cs: ChannelSet,
    weights: np.ndarray,
    p_max: float,
    cfg: OptimizerConfig,
    W: np.ndarray,
    phi: np.ndarray,
    b: np.ndarray,
    step: Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]],
) -> RunTrace:
    """Shared outer loop: ``step`` maps ``(W, phi, b)`` to new ``(W, phi)``."""
    weights = np.asarray(weights, dtype=float)
    trace = RunTrace()
    trace.initial_wssr = _objectives(cs, W, phi, weights, b)[0]
    previous = None
    for it in range(1, cfg.outer_max_iter + 1):
        start = time.perf_counter()
        W, phi = step(W, phi, b)
        b = update_b(cs, W, phi)
        value, value_q = _objectives(cs, W, phi, weights, b)
        trace.wall_ms.append(1e3 * (time.perf_counter() - start))
        trace.wssr.append(value)
        trace.wssr_q.append(value_q)
        if previous is not None:
            if cfg.check_monotone and value < previous - MONOTONE_SLACK:
                raise NonMonotoneError(it, previous, value)
            if not cfg.fixed_iterations and abs(value - previous) <= cfg.outer_rel_tol * (1.0 + value):
                trace.converged = True
                break
        if not cfg.fixed_iterations and not np.any(b):
            # With every user deselected the next precoder is zero and the
            # objective stays at zero.
            trace.converged = True
            break
        previous = value
    trace.final_W, trace.final_phi, trace.final_b = W, phi, b
    return trace


def two_tiers(
    cs: ChannelSet, weights: np.ndarray, p_max: float, cfg: OptimizerConfig = OptimizerConfig()
) -> RunTrace:
    """Alternate the precoder loop, the phase loop and the selector update.

    Runs until the weighted secrecy sum-rate changes by at most
    ``outer_rel_tol * (1 + R)`` or ``outer_max_iter`` iterations. Raises
    :class:`NonMonotoneError` if the objective drops by more than ``1e-9``.
    """
    cfg = cfg.effective()
    W, phi, b = initialize(cs, p_max, cfg.seed, cfg.leakage_aware_init)

    # A zero tolerance runs every inner loop to its budget.
    inner_tol = 0.0 if cfg.fixed_iterations else cfg.inner_rel_tol
    tuner_tol = 0.0 if cfg.fixed_iterations else cfg.tuner_rel_tol

    def step(W: np.ndarray, phi: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        W, _ = inner_loop_a1(cs, phi, b, weights, p_max, W, cfg.inner_max_iter_a1, inner_tol)
        phi, _ = inner_loop_a2(
            cs, W, b, weights, phi,
            tuner=cfg.tuner,
            max_iter=cfg.inner_max_iter_a2,
            rel_tol=inner_tol,
            tuner_max_iter=cfg.tuner_max_iter,
            tuner_rel_tol=tuner_tol,
            in_place=cfg.mm_in_place,
            jacobi=cfg.bcd_jacobi,
        )
        return W, phi

    return _drive(cs, weights, p_max, cfg, W, phi, b, step)


def single_loop(
    cs: ChannelSet, weights: np.ndarray, p_max: float, cfg: OptimizerConfig = OptimizerConfig()
) -> RunTrace:
    """One precoder update, one phase update and one selector update per iteration."""
    return two_tiers(cs, weights, p_max, dataclasses.replace(cfg, mode="SingleLoop"))


def precoder_only(
    cs: ChannelSet,
    weights: np.ndarray,
    p_max: float,
    cfg: OptimizerConfig,
    phi: np.ndarray,
    init_W: np.ndarray | None = None,
) -> RunTrace:
    """Precoder loop and selector update with the phases held at ``phi``.

    A cold start uses the all-ones selector. A warm start from ``init_W``
    uses its indicator selector, so the result never falls below the rate
    of ``init_W``.
    """
    phi = np.asarray(phi, dtype=complex)
    if init_W is None:
        W = initial_precoder(cs, phi, p_max, cfg.leakage_aware_init)
        b = np.ones(cs.dims.K, dtype=int)
    else:
        W = np.asarray(init_W, dtype=complex)
        b = update_b(cs, W, phi)

    def step(W: np.ndarray, phi_: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        W, _ = inner_loop_a1(cs, phi_, b, weights, p_max, W, cfg.inner_max_iter_a1, cfg.inner_rel_tol)
        return W, phi_

    return _drive(cs, weights, p_max, cfg, W, phi, b, step)
