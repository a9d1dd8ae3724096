"""Wiretap system model with an intelligent reflecting surface (IRS).

A base station with ``M`` antennas serves ``K`` single-antenna users while
``J`` single-antenna eavesdroppers listen. The IRS has ``N`` unit-modulus
reflection coefficients ``phi``. The effective channel of user ``k`` is
``h_d[:, k] + H[k] @ phi`` with cascade ``H[k] = T @ diag(h_r[:, k])``;
eavesdropper channels follow the same pattern with ``g_d`` and ``G``.

Precoders are ``M x K`` complex arrays with column ``k`` serving user ``k``.
Phase vectors are length-``N`` complex arrays and selectors are length-``K``
0/1 integer arrays. Rates are in bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange

LN2 = np.log(2.0)
UNIT_MODULUS_TOL = 1e-12


@dataclass(frozen=True)
class SystemDims:
    """Antenna, element, user and eavesdropper counts."""

    M: int
    N: int
    K: int
    J: int

    def __post_init__(self) -> None:
        for name in ("M", "N", "K"):
            if getattr(self, name) < 1:
                raise DimensionMismatch(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.J < 0:
            raise DimensionMismatch(f"J must be >= 0, got {self.J}")


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """All channels of one realization plus the receiver noise powers.

    Attributes
    ----------
    h_d : (M, K) direct BS-user channels.
    H : (K, M, N) user cascades.
    g_d : (M, J) direct BS-eavesdropper channels.
    G : (J, M, N) eavesdropper cascades.
    sigma2 : (K,) user noise powers.
    mu2 : (J,) eavesdropper noise powers.
    T, h_r, g_r : raw BS-IRS and IRS-terminal channels when known.
    """

    h_d: np.ndarray
    H: np.ndarray
    g_d: np.ndarray
    G: np.ndarray
    sigma2: np.ndarray
    mu2: np.ndarray
    T: np.ndarray | None = None
    h_r: np.ndarray | None = None
    g_r: np.ndarray | None = None
    dims: SystemDims = field(init=False)

    def __post_init__(self) -> None:
        h_d = np.asarray(self.h_d, dtype=complex)
        M, K = h_d.shape
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 3 or H.shape[:2] != (K, M):
            raise DimensionMismatch(f"H must be (K, M, N) = ({K}, {M}, N), got {H.shape}")
        N = H.shape[2]
        g_d = np.asarray(self.g_d, dtype=complex).reshape(M, -1)
        J = g_d.shape[1]
        G = np.asarray(self.G, dtype=complex).reshape(J, M, N)
        sigma2 = np.asarray(self.sigma2, dtype=float).reshape(-1)
        mu2 = np.asarray(self.mu2, dtype=float).reshape(-1)
        if sigma2.shape != (K,) or mu2.shape != (J,):
            raise DimensionMismatch(
                f"noise powers must have lengths K={K}, J={J}; got {sigma2.shape}, {mu2.shape}"
            )
        if np.any(sigma2 <= 0) or np.any(mu2 <= 0):
            raise DimensionMismatch("noise powers must be strictly positive")
        for name, arr in (("h_d", h_d), ("H", H), ("g_d", g_d), ("G", G)):
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch(f"{name} has non-finite entries")
        object.__setattr__(self, "h_d", h_d)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "g_d", g_d)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "mu2", mu2)
        object.__setattr__(self, "dims", SystemDims(M, N, K, J))
        for arr in (h_d, H, g_d, G, sigma2, mu2):
            arr.setflags(write=False)

    @classmethod
    def from_links(
        cls,
        T: np.ndarray,
        h_r: np.ndarray,
        h_d: np.ndarray,
        g_r: np.ndarray,
        g_d: np.ndarray,
        sigma2: np.ndarray | float,
        mu2: np.ndarray | float,
    ) -> "ChannelSet":
        """Build a channel set from raw links, precomputing the cascades."""
        T = np.asarray(T, dtype=complex)
        h_r = np.asarray(h_r, dtype=complex)
        g_r = np.asarray(g_r, dtype=complex).reshape(T.shape[1], -1)
        K = h_r.shape[1]
        J = g_r.shape[1]
        H = T[None, :, :] * h_r.T[:, None, :]
        G = T[None, :, :] * g_r.T[:, None, :]
        return cls(
            h_d=h_d,
            H=H,
            g_d=np.asarray(g_d, dtype=complex).reshape(T.shape[0], J),
            G=G,
            sigma2=np.broadcast_to(np.asarray(sigma2, dtype=float), (K,)).copy(),
            mu2=np.broadcast_to(np.asarray(mu2, dtype=float), (J,)).copy(),
            T=T,
            h_r=h_r,
            g_r=g_r,
        )

    def without_reflection(self) -> "ChannelSet":
        """Same direct links with all cascades set to zero (IRS switched off)."""
        return ChannelSet(
            h_d=self.h_d,
            H=np.zeros_like(self.H),
            g_d=self.g_d,
            G=np.zeros_like(self.G),
            sigma2=self.sigma2,
            mu2=self.mu2,
        )

    # Snapshot format: magic, four int64 dims, then h_d, H, g_d, G as
    # row-major interleaved re/im float64, then sigma2 and mu2 as float64.
    _MAGIC = b"IRSCSET1"

    def to_bytes(self) -> bytes:
        d = self.dims
        parts = [self._MAGIC, struct.pack("<4q", d.M, d.N, d.K, d.J)]
        for arr in (self.h_d, self.H, self.g_d, self.G):
            parts.append(np.ascontiguousarray(arr, dtype="<c16").tobytes())
        for arr in (self.sigma2, self.mu2):
            parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChannelSet":
        if data[:8] != cls._MAGIC:
            raise ValueError("not a channel-set snapshot")
        M, N, K, J = struct.unpack("<4q", data[8:40])
        offset = 40

        def take(shape: tuple[int, ...], dtype: str) -> np.ndarray:
            nonlocal offset
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
            offset += arr.nbytes
            return arr.reshape(shape).copy()

        h_d = take((M, K), "<c16")
        H = take((K, M, N), "<c16")
        g_d = take((M, J), "<c16")
        G = take((J, M, N), "<c16")
        sigma2 = take((K,), "<f8")
        mu2 = take((J,), "<f8")
        if offset != len(data):
            raise ValueError("trailing bytes in channel-set snapshot")
        return cls(h_d=h_d, H=H, g_d=g_d, G=G, sigma2=sigma2, mu2=mu2)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ChannelSet":
        return cls.from_bytes(Path(path).read_bytes())


def check_phase(phi: np.ndarray, N: int) -> np.ndarray:
    """Validate a phase vector: length ``N`` and unit modulus."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.shape != (N,):
        raise DimensionMismatch(f"phase vector must have length {N}, got {phi.shape}")
    if np.max(np.abs(np.abs(phi) - 1.0), initial=0.0) > 1e-9:
        raise DimensionMismatch("phase vector entries must have unit modulus")
    return phi


def phases_from_angles(theta: np.ndarray) -> np.ndarray:
    """Reflection coefficients ``exp(-j theta)``."""
    return np.exp(-1j * np.asarray(theta, dtype=float))


def angles_from_phases(phi: np.ndarray) -> np.ndarray:
    """Angles in ``[0, 2 pi)`` with ``phi = exp(-j theta)``."""
    return np.mod(-np.angle(phi), 2.0 * np.pi)


def _check_precoder(cs: ChannelSet, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=complex)
    if W.shape != (cs.dims.M, cs.dims.K):
        raise DimensionMismatch(f"precoder must be {cs.dims.M}x{cs.dims.K}, got {W.shape}")
    return W


def effective_legit_channels(cs: ChannelSet, phi: np.ndarray) -> np.ndarray:
    """All effective user channels as columns of an ``M x K`` array."""
    return cs.h_d + np.einsum("kmn,n->mk", cs.H, phi)


def effective_eve_channels(cs: ChannelSet, phi: np.ndarray) -> np.ndarray:
    """All effective eavesdropper channels as columns of an ``M x J`` array."""
    return cs.g_d + np.einsum("jmn,n->mj", cs.G, phi)


def effective_legit_channel(cs: ChannelSet, k: int, phi: np.ndarray) -> np.ndarray:
    """Effective channel ``h_d[:, k] + H[k] @ phi`` of user ``k``."""
    if not 0 <= k < cs.dims.K:
        raise IndexOutOfRange(f"user index {k} outside [0, {cs.dims.K})")
    phi = check_phase(phi, cs.dims.N)
    return cs.h_d[:, k] + cs.H[k] @ phi


def effective_eve_channel(cs: ChannelSet, j: int, phi: np.ndarray) -> np.ndarray:
    """Effective channel ``g_d[:, j] + G[j] @ phi`` of eavesdropper ``j``."""
    if not 0 <= j < cs.dims.J:
        raise IndexOutOfRange(f"eavesdropper index {j} outside [0, {cs.dims.J})")
    phi = check_phase(phi, cs.dims.N)
    return cs.g_d[:, j] + cs.G[j] @ phi


def link_ratios(
    heff: np.ndarray,
    geff: np.ndarray,
    W: np.ndarray,
    sigma2: np.ndarray,
    mu2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """SINR and ESNR of every user from precomputed effective channels."""
    S = heff.conj().T @ W
    power = np.abs(S) ** 2
    signal = np.diag(power).copy()
    interference = power.sum(axis=1) - signal
    # Guard against round-off making the interference slightly negative.
    interference = np.maximum(interference, 0.0)
    sinr = signal / (interference + sigma2)
    if geff.shape[1] == 0:
        esnr = np.zeros(W.shape[1])
    else:
        E = geff.conj().T @ W
        esnr = (np.abs(E) ** 2 / mu2[:, None]).sum(axis=0)
    return sinr, esnr


def sinr_esnr_all(cs: ChannelSet, W: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectors of SINR and ESNR for all users."""
    W = _check_precoder(cs, W)
    phi = check_phase(phi, cs.dims.N)
    return link_ratios(
        effective_legit_channels(cs, phi), effective_eve_channels(cs, phi), W, cs.sigma2, cs.mu2
    )


def sinr(cs: ChannelSet, W: np.ndarray, phi: np.ndarray, k: int) -> float:
    """Signal-to-interference-plus-noise ratio of user ``k``."""
    if not 0 <= k < cs.dims.K:
        raise IndexOutOfRange(f"user index {k} outside [0, {cs.dims.K})")
    return float(sinr_esnr_all(cs, W, phi)[0][k])


def esnr(cs: ChannelSet, W: np.ndarray, phi: np.ndarray, k: int) -> float:
    """Noise-normalized leakage of stream ``k`` summed over eavesdroppers."""
    if not 0 <= k < cs.dims.K:
        raise IndexOutOfRange(f"user index {k} outside [0, {cs.dims.K})")
    return float(sinr_esnr_all(cs, W, phi)[1][k])


def log_ratio_bits(sinr_vals: np.ndarray, esnr_vals: np.ndarray) -> np.ndarray:
    """Unclamped ``log2((1 + SINR) / (1 + ESNR))`` per user."""
    return (np.log1p(sinr_vals) - np.log1p(esnr_vals)) / LN2


def secrecy_rates(cs: ChannelSet, W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Clamped secrecy rate of every user, in bits."""
    s, e = sinr_esnr_all(cs, W, phi)
    return np.maximum(log_ratio_bits(s, e), 0.0)


def secrecy_rate(cs: ChannelSet, W: np.ndarray, phi: np.ndarray, k: int) -> float:
    """Clamped secrecy rate of user ``k``, in bits."""
    if not 0 <= k < cs.dims.K:
        raise IndexOutOfRange(f"user index {k} outside [0, {cs.dims.K})")
    return float(secrecy_rates(cs, W, phi)[k])


def _check_weights(cs: ChannelSet, weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape != (cs.dims.K,):
        raise DimensionMismatch(f"weights must have length {cs.dims.K}, got {weights.shape}")
    if np.any(weights < 0):
        raise DimensionMismatch("weights must be non-negative")
    return weights


def _check_selector(cs: ChannelSet, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b).reshape(-1)
    if b.shape != (cs.dims.K,):
        raise DimensionMismatch(f"selector must have length {cs.dims.K}, got {b.shape}")
    if not np.all((b == 0) | (b == 1)):
        raise DimensionMismatch("selector entries must be 0 or 1")
    return b.astype(int)


def wssr_from_ratios(sinr_vals: np.ndarray, esnr_vals: np.ndarray, weights: np.ndarray) -> float:
    """Weighted secrecy sum-rate given per-user SINR and ESNR."""
    return float(np.sum(weights * np.maximum(log_ratio_bits(sinr_vals, esnr_vals), 0.0)))


def wssr_q_from_ratios(
    sinr_vals: np.ndarray, esnr_vals: np.ndarray, weights: np.ndarray, b: np.ndarray
) -> float:
    """Selector-weighted, unclamped secrecy sum-rate given SINR and ESNR."""
    return float(np.sum(weights * b * log_ratio_bits(sinr_vals, esnr_vals)))


def wssr(cs: ChannelSet, W: np.ndarray, phi: np.ndarray, weights: np.ndarray) -> float:
    """Weighted secrecy sum-rate ``sum_k omega_k [log2((1+SINR)/(1+ESNR))]^+``."""
    weights = _check_weights(cs, weights)
    s, e = sinr_esnr_all(cs, W, phi)
    return wssr_from_ratios(s, e, weights)


def wssr_q(
    cs: ChannelSet, W: np.ndarray, phi: np.ndarray, weights: np.ndarray, b: np.ndarray
) -> float:
    """Selector form ``sum_k omega_k b_k log2((1+SINR)/(1+ESNR))`` without clamping."""
    weights = _check_weights(cs, weights)
    b = _check_selector(cs, b)
    s, e = sinr_esnr_all(cs, W, phi)
    return wssr_q_from_ratios(s, e, weights, b)


def selector_from_ratios(sinr_vals: np.ndarray, esnr_vals: np.ndarray) -> np.ndarray:
    """``b_k = 1`` exactly when SINR_k > ESNR_k."""
    return (sinr_vals > esnr_vals).astype(int)
