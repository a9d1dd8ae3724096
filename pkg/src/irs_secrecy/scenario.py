"""Random geometry, Rayleigh channels, reference schemes and ergodic averaging.

The base station sits at the origin and the IRS at ``(D, 0)``. Users are
dropped uniformly over a disk of radius ``r_irs`` around the IRS and
eavesdroppers over a disk of radius ``r_bs`` around the base station. Every
channel entry is ``sqrt(path_loss) * CN(0, 1)``.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelSet, SystemDims, angles_from_phases, phases_from_angles
from .optimizer import OptimizerConfig, RunTrace, precoder_only, random_phases


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, propagation and power settings of one experiment point."""

    M: int = 8
    N: int = 64
    K: int = 4
    J: int = 6
    D: float = 25.0
    r_irs: float = 10.0
    r_bs: float = 10.0
    r_min: float = 1.0
    rho_ref_db: float = -30.0
    exp_direct: float = 3.5
    exp_reflect: float = 2.3
    noise_db: float = -147.0
    p_max_db: float = -30.0
    seed: int = 1

    def __post_init__(self) -> None:
        SystemDims(self.M, self.N, self.K, self.J)
        for name in ("D", "r_irs", "r_bs", "r_min", "exp_direct", "exp_reflect"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def dims(self) -> SystemDims:
        return SystemDims(self.M, self.N, self.K, self.J)

    @property
    def p_max(self) -> float:
        return db_to_linear(self.p_max_db)

    @property
    def noise(self) -> float:
        return db_to_linear(self.noise_db)

    @property
    def rho_ref(self) -> float:
        return db_to_linear(self.rho_ref_db)


@dataclass(frozen=True)
class QuantizerConfig:
    """Phase resolution in bits; ``None`` means unquantized."""

    bits: int | None = None

    def __post_init__(self) -> None:
        if self.bits is not None and not 1 <= self.bits <= 16:
            raise ValueError(f"bits must be in [1, 16], got {self.bits}")


def path_loss(d: np.ndarray | float, exponent: float, rho_ref: float) -> np.ndarray | float:
    """Large-scale power gain ``rho_ref / d**exponent``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = rho_ref / d**exponent
    return float(out) if out.ndim == 0 else out


def _disk_points(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over a disk centred at the origin, as complex numbers."""
    r = radius * np.sqrt(rng.uniform(size=n))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return r * np.exp(1j * angle)


def _cn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class Geometry:
    """Terminal positions (complex plane) and their link distances."""

    users: np.ndarray
    eves: np.ndarray
    d_user_bs: np.ndarray
    d_user_irs: np.ndarray
    d_eve_bs: np.ndarray
    d_eve_irs: np.ndarray


def sample_geometry(cfg: ScenarioConfig, rng: np.random.Generator) -> Geometry:
    irs = complex(cfg.D, 0.0)
    users = irs + _disk_points(cfg.K, cfg.r_irs, rng)
    eves = _disk_points(cfg.J, cfg.r_bs, rng)
    clamp = lambda d: np.maximum(d, cfg.r_min)  # noqa: E731
    return Geometry(
        users=users,
        eves=eves,
        d_user_bs=clamp(np.abs(users)),
        d_user_irs=clamp(np.abs(users - irs)),
        d_eve_bs=clamp(np.abs(eves)),
        d_eve_irs=clamp(np.abs(eves - irs)),
    )


def sample_channels(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one geometry and one Rayleigh fading realization."""
    geo = sample_geometry(cfg, rng)
    M, N, K, J = cfg.M, cfg.N, cfg.K, cfg.J
    amp = lambda d, e: np.sqrt(path_loss(d, e, cfg.rho_ref))  # noqa: E731
    T = amp(cfg.D, cfg.exp_reflect) * _cn(rng, M, N)
    h_r = amp(geo.d_user_irs, cfg.exp_reflect)[None, :] * _cn(rng, N, K)
    h_d = amp(geo.d_user_bs, cfg.exp_direct)[None, :] * _cn(rng, M, K)
    g_r = amp(geo.d_eve_irs, cfg.exp_reflect)[None, :] * _cn(rng, N, J)
    g_d = amp(geo.d_eve_bs, cfg.exp_direct)[None, :] * _cn(rng, M, J)
    return ChannelSet.from_links(T, h_r, h_d, g_r, g_d, sigma2=cfg.noise, mu2=cfg.noise)


def baseline_ref1(
    cs: ChannelSet, weights: np.ndarray, p_max: float, cfg: OptimizerConfig = OptimizerConfig()
) -> RunTrace:
    """Reference with the IRS switched off: precoder-only loop on direct links."""
    cfg = dataclasses.replace(cfg, mode="TwoTiers")
    off = cs.without_reflection()
    return precoder_only(off, weights, p_max, cfg, np.ones(cs.dims.N, dtype=complex))


def baseline_ref2(
    cs: ChannelSet,
    weights: np.ndarray,
    p_max: float,
    cfg: OptimizerConfig = OptimizerConfig(),
    rng: np.random.Generator | None = None,
) -> RunTrace:
    """Reference with random IRS phases held fixed and a precoder-only loop."""
    cfg = dataclasses.replace(cfg, mode="TwoTiers")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return precoder_only(cs, weights, p_max, cfg, random_phases(cs.dims.N, rng))


def quantize_phases(phi: np.ndarray, q: QuantizerConfig | int | None) -> np.ndarray:
    """Snap every angle to the nearest point of ``{2 pi m / 2^B}``.

    Ties go to the smaller ``m``.
    """
    if not isinstance(q, QuantizerConfig):
        q = QuantizerConfig(q)
    phi = np.asarray(phi, dtype=complex)
    if q.bits is None:
        return phi.copy()
    levels = 2**q.bits
    x = angles_from_phases(phi) * levels / (2.0 * np.pi)
    m = np.mod(np.ceil(x - 0.5), levels)
    return phases_from_angles(2.0 * np.pi * m / levels)


def realization_seeds(master_seed: int, n: int) -> list[int]:
    """Independent per-realization seeds derived from a master seed."""
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no values to average")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def ergodic_average(
    master_seed: int,
    runner: Callable[[int], float],
    n_realizations: int,
    jobs: int = 1,
) -> tuple[float, float, list[float]]:
    """Average ``runner(seed)`` over independent realizations.

    Returns the sample mean, its standard error (zero for one realization)
    and the per-realization values in realization order. With ``jobs > 1``
    the runner must be picklable.
    """
    seeds = realization_seeds(master_seed, n_realizations)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(runner, seeds))
    else:
        values = [runner(s) for s in seeds]
    mean, se = mean_and_stderr(values)
    return mean, se, values
