"""Shared random instances for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from irs_secrecy.channel import ChannelSet, phases_from_angles


def cn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_channels(
    rng: np.random.Generator,
    M: int,
    N: int,
    K: int,
    J: int,
    direct_scale: float = 1.0,
    reflect_scale: float = 0.3,
    sigma2: float = 1.0,
    mu2: float = 1.0,
) -> ChannelSet:
    """Unit-scale channel set built from raw links with the given noise powers."""
    return ChannelSet.from_links(
        T=reflect_scale * cn(rng, M, N),
        h_r=cn(rng, N, K),
        h_d=direct_scale * cn(rng, M, K),
        g_r=cn(rng, N, J),
        g_d=direct_scale * cn(rng, M, J),
        sigma2=sigma2,
        mu2=mu2,
    )


def random_phases(rng: np.random.Generator, N: int) -> np.ndarray:
    return phases_from_angles(rng.uniform(0.0, 2.0 * np.pi, N))


def random_precoder(rng: np.random.Generator, M: int, K: int, p_max: float) -> np.ndarray:
    """Random precoder scaled to ``||W||_F^2 = p_max``."""
    W = cn(rng, M, K)
    return W * np.sqrt(p_max) / np.linalg.norm(W)


def random_hpd(rng: np.random.Generator, n: int) -> np.ndarray:
    B = cn(rng, n, n)
    return B.conj().T @ B + np.eye(n)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


# Acceptance verdicts, echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Print and record one ``PASS``/``FAIL`` line per acceptance check."""

    def report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
