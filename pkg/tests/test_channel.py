import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cn, random_channels, random_phases, random_precoder
from irs_secrecy.channel import (
    ChannelSet,
    SystemDims,
    angles_from_phases,
    check_phase,
    effective_eve_channel,
    effective_legit_channel,
    esnr,
    phases_from_angles,
    secrecy_rate,
    secrecy_rates,
    sinr,
    sinr_esnr_all,
    wssr,
    wssr_q,
)
from irs_secrecy.errors import DimensionMismatch, IndexOutOfRange
from irs_secrecy.fp import update_b


def scalar_link(h: complex, g: complex | None, sigma2: float = 1.0, mu2: float = 1.0) -> ChannelSet:
    """One antenna, one element with a blocked reflection, one user and at most one eavesdropper."""
    J = 0 if g is None else 1
    return ChannelSet(
        h_d=np.array([[h]]),
        H=np.zeros((1, 1, 1)),
        g_d=np.array([[g]]) if J else np.zeros((1, 0)),
        G=np.zeros((J, 1, 1)),
        sigma2=[sigma2],
        mu2=[mu2] if J else [],
    )


ONE = np.ones(1, dtype=complex)


def term_by_term(cs: ChannelSet, W: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """SINR and ESNR by explicit loops over users, streams and eavesdroppers."""
    M, N, K, J = cs.dims.M, cs.dims.N, cs.dims.K, cs.dims.J
    h = [cs.h_d[:, k] + sum(phi[n] * cs.H[k][:, n] for n in range(N)) for k in range(K)]
    g = [cs.g_d[:, j] + sum(phi[n] * cs.G[j][:, n] for n in range(N)) for j in range(J)]
    s = np.zeros(K)
    e = np.zeros(K)
    for k in range(K):
        gains = [abs(sum(h[k][m].conjugate() * W[m, i] for m in range(M))) ** 2 for i in range(K)]
        s[k] = gains[k] / (sum(gains) - gains[k] + cs.sigma2[k])
        e[k] = sum(abs(sum(g[j][m].conjugate() * W[m, k] for m in range(M))) ** 2 / cs.mu2[j]
                   for j in range(J))
    return s, e


# --------------------------------------------------------------------------- types


def test_dims_reject_zero_counts():
    with pytest.raises(DimensionMismatch):
        SystemDims(0, 1, 1, 0)
    with pytest.raises(DimensionMismatch):
        SystemDims(1, 1, 1, -1)


def test_channel_set_rejects_bad_noise(rng):
    with pytest.raises(DimensionMismatch):
        ChannelSet(h_d=cn(rng, 2, 1), H=cn(rng, 1, 2, 3), g_d=np.zeros((2, 0)),
                   G=np.zeros((0, 2, 3)), sigma2=[0.0], mu2=[])


def test_channel_set_rejects_shape_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        ChannelSet(h_d=cn(rng, 2, 1), H=cn(rng, 1, 3, 3), g_d=np.zeros((2, 0)),
                   G=np.zeros((0, 2, 3)), sigma2=[1.0], mu2=[])


def test_channel_set_rejects_non_finite(rng):
    h = cn(rng, 2, 1)
    h[0, 0] = np.nan
    with pytest.raises(DimensionMismatch):
        ChannelSet(h_d=h, H=cn(rng, 1, 2, 3), g_d=np.zeros((2, 0)),
                   G=np.zeros((0, 2, 3)), sigma2=[1.0], mu2=[])


def test_cascade_recomputable_from_raw_links(rng):
    cs = random_channels(rng, M=3, N=4, K=2, J=2)
    for k in range(2):
        np.testing.assert_allclose(cs.H[k], cs.T @ np.diag(cs.h_r[:, k]))
    for j in range(2):
        np.testing.assert_allclose(cs.G[j], cs.T @ np.diag(cs.g_r[:, j]))


def test_channel_set_is_read_only(rng):
    cs = random_channels(rng, M=2, N=2, K=1, J=1)
    with pytest.raises(ValueError):
        cs.h_d[0, 0] = 1.0


def test_snapshot_round_trip(rng, tmp_path):
    cs = random_channels(rng, M=3, N=5, K=2, J=3, sigma2=0.5, mu2=2.0)
    path = tmp_path / "cs.bin"
    cs.save(path)
    back = ChannelSet.load(path)
    assert back.dims == cs.dims
    for name in ("h_d", "H", "g_d", "G", "sigma2", "mu2"):
        np.testing.assert_array_equal(getattr(back, name), getattr(cs, name))


def test_snapshot_rejects_foreign_bytes():
    with pytest.raises(ValueError):
        ChannelSet.from_bytes(b"NOTACSET" + bytes(32))


def test_snapshot_rejects_trailing_bytes(rng):
    cs = random_channels(rng, M=2, N=2, K=1, J=0)
    with pytest.raises(ValueError):
        ChannelSet.from_bytes(cs.to_bytes() + b"\x00")


def test_phase_angle_round_trip(rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, 20)
    np.testing.assert_allclose(angles_from_phases(phases_from_angles(theta)), theta, atol=1e-12)


def test_check_phase_rejects_non_unit():
    with pytest.raises(DimensionMismatch):
        check_phase(np.array([1.0, 0.5]), 2)
    with pytest.raises(DimensionMismatch):
        check_phase(np.ones(3), 2)


# --------------------------------------------------------------------------- effective channels


def test_effective_legit_identity_cascade():
    cs = ChannelSet(h_d=np.array([[1.0], [0.0]]), H=np.eye(2)[None], g_d=np.zeros((2, 0)),
                    G=np.zeros((0, 2, 2)), sigma2=[1.0], mu2=[])
    np.testing.assert_allclose(effective_legit_channel(cs, 0, np.ones(2)), [2.0, 1.0])


def test_effective_legit_blocked_reflection(rng):
    h_d = cn(rng, 3, 1)
    cs = ChannelSet(h_d=h_d, H=np.zeros((1, 3, 4)), g_d=np.zeros((3, 0)),
                    G=np.zeros((0, 3, 4)), sigma2=[1.0], mu2=[])
    np.testing.assert_allclose(effective_legit_channel(cs, 0, random_phases(rng, 4)), h_d[:, 0])


def test_effective_channels_match_direct_sum(rng):
    cs = random_channels(rng, M=3, N=4, K=2, J=2)
    phi = random_phases(rng, 4)
    for k in range(2):
        expected = cs.h_d[:, k] + sum(phi[n] * cs.H[k][:, n] for n in range(4))
        np.testing.assert_allclose(effective_legit_channel(cs, k, phi), expected, atol=1e-14)
    for j in range(2):
        expected = cs.g_d[:, j] + sum(phi[n] * cs.G[j][:, n] for n in range(4))
        np.testing.assert_allclose(effective_eve_channel(cs, j, phi), expected, atol=1e-14)


def test_effective_eve_blocked_reflection(rng):
    g_d = cn(rng, 2, 1)
    cs = ChannelSet(h_d=cn(rng, 2, 1), H=cn(rng, 1, 2, 2), g_d=g_d, G=np.zeros((1, 2, 2)),
                    sigma2=[1.0], mu2=[1.0])
    np.testing.assert_allclose(effective_eve_channel(cs, 0, random_phases(rng, 2)), g_d[:, 0])


def test_effective_eve_identity_cascade():
    cs = ChannelSet(h_d=np.ones((2, 1)), H=np.zeros((1, 2, 2)), g_d=np.zeros((2, 1)),
                    G=np.eye(2)[None], sigma2=[1.0], mu2=[1.0])
    np.testing.assert_allclose(effective_eve_channel(cs, 0, np.array([1j, 1j])), [1j, 1j])


@pytest.mark.parametrize("fn", [effective_legit_channel, effective_eve_channel])
def test_effective_channel_index_out_of_range(rng, fn):
    cs = random_channels(rng, M=2, N=2, K=2, J=2)
    with pytest.raises(IndexOutOfRange):
        fn(cs, 2, np.ones(2))


# --------------------------------------------------------------------------- SINR and ESNR


def test_sinr_single_user_no_interference():
    cs = scalar_link(1.0, None)
    assert sinr(cs, np.array([[2.0]]), ONE, 0) == pytest.approx(4.0)


def test_sinr_orthogonal_interference():
    cs = ChannelSet(h_d=np.array([[1.0, 0.0], [0.0, 1.0]]), H=np.zeros((2, 2, 1)),
                    g_d=np.zeros((2, 0)), G=np.zeros((0, 2, 1)), sigma2=[1.0, 1.0], mu2=[])
    W = np.array([[np.sqrt(3.0), 0.0], [0.0, 5.0]])
    assert sinr(cs, W, ONE, 0) == pytest.approx(3.0)


def test_sinr_esnr_match_term_by_term(rng):
    cs = random_channels(rng, M=4, N=5, K=3, J=2, sigma2=0.3, mu2=0.7)
    W = random_precoder(rng, 4, 3, 2.0)
    phi = random_phases(rng, 5)
    s, e = term_by_term(cs, W, phi)
    for k in range(3):
        assert sinr(cs, W, phi, k) == pytest.approx(s[k], rel=1e-12)
        assert esnr(cs, W, phi, k) == pytest.approx(e[k], rel=1e-12)


def test_esnr_single_eavesdropper():
    cs = scalar_link(1.0, 1.0)
    assert esnr(cs, np.array([[1.0 + 1.0j]]), ONE, 0) == pytest.approx(2.0)


def test_esnr_zero_stream(rng):
    cs = random_channels(rng, M=3, N=2, K=2, J=2)
    W = random_precoder(rng, 3, 2, 1.0)
    W[:, 1] = 0.0
    assert esnr(cs, W, np.ones(2), 1) == 0.0


def test_esnr_without_eavesdroppers(rng):
    cs = random_channels(rng, M=3, N=2, K=2, J=0)
    np.testing.assert_array_equal(sinr_esnr_all(cs, random_precoder(rng, 3, 2, 1.0), np.ones(2))[1], 0.0)


@pytest.mark.parametrize("fn", [sinr, esnr, secrecy_rate])
def test_rate_index_out_of_range(rng, fn):
    cs = random_channels(rng, M=2, N=2, K=2, J=1)
    with pytest.raises(IndexOutOfRange):
        fn(cs, np.zeros((2, 2)), np.ones(2), -1)


def test_precoder_shape_checked(rng):
    cs = random_channels(rng, M=2, N=2, K=2, J=1)
    with pytest.raises(DimensionMismatch):
        sinr_esnr_all(cs, np.zeros((2, 3)), np.ones(2))


# --------------------------------------------------------------------------- secrecy rates


def test_secrecy_rate_ratio():
    cs = scalar_link(1.0, 1.0, mu2=3.0)
    W = np.array([[np.sqrt(3.0)]])  # SINR 3, ESNR 1
    assert secrecy_rate(cs, W, ONE, 0) == pytest.approx(1.0)


def test_secrecy_rate_clamps_at_zero():
    cs = scalar_link(0.0, np.sqrt(5.0))  # SINR 0, ESNR 5
    assert secrecy_rate(cs, np.array([[1.0]]), ONE, 0) == 0.0


def test_secrecy_rates_match_clamped_ratio(rng):
    cs = random_channels(rng, M=3, N=4, K=3, J=3)
    W = random_precoder(rng, 3, 3, 1.0)
    phi = random_phases(rng, 4)
    s, e = term_by_term(cs, W, phi)
    expected = np.maximum(np.log2((1.0 + s) / (1.0 + e)), 0.0)
    np.testing.assert_allclose(secrecy_rates(cs, W, phi), expected, rtol=1e-12, atol=1e-14)


def test_wssr_single_user():
    cs = scalar_link(1.0, 1.0, mu2=3.0)
    assert wssr(cs, np.array([[np.sqrt(3.0)]]), ONE, [1.0]) == pytest.approx(1.0)


def test_wssr_zero_weights(rng):
    cs = random_channels(rng, M=3, N=2, K=3, J=1)
    assert wssr(cs, random_precoder(rng, 3, 3, 1.0), np.ones(2), np.zeros(3)) == 0.0


def test_wssr_matches_weighted_sum(rng):
    cs = random_channels(rng, M=4, N=3, K=4, J=2)
    W = random_precoder(rng, 4, 4, 3.0)
    phi = random_phases(rng, 3)
    weights = rng.uniform(0.0, 2.0, 4)
    s, e = term_by_term(cs, W, phi)
    expected = sum(weights[k] * max(np.log2((1 + s[k]) / (1 + e[k])), 0.0) for k in range(4))
    assert wssr(cs, W, phi, weights) == pytest.approx(expected, rel=1e-12)


def test_wssr_rejects_negative_weights(rng):
    cs = random_channels(rng, M=2, N=2, K=2, J=1)
    with pytest.raises(DimensionMismatch):
        wssr(cs, np.zeros((2, 2)), np.ones(2), [1.0, -1.0])


def test_wssr_q_all_zero_selector(rng):
    cs = random_channels(rng, M=3, N=2, K=3, J=2)
    assert wssr_q(cs, random_precoder(rng, 3, 3, 1.0), np.ones(2), np.ones(3), np.zeros(3)) == 0.0


def test_wssr_q_keeps_negative_terms():
    cs = scalar_link(1.0, np.sqrt(3.0))  # SINR 1, ESNR 3
    assert wssr_q(cs, np.array([[1.0]]), ONE, [1.0], [1]) == pytest.approx(-1.0)


def test_wssr_q_rejects_non_binary_selector(rng):
    cs = random_channels(rng, M=2, N=2, K=2, J=1)
    with pytest.raises(DimensionMismatch):
        wssr_q(cs, np.zeros((2, 2)), np.ones(2), np.ones(2), [1, 2])


def test_wssr_q_with_indicator_equals_wssr(rng):
    for _ in range(200):
        cs = random_channels(rng, M=4, N=6, K=4, J=3, direct_scale=rng.uniform(0.2, 2.0))
        W = random_precoder(rng, 4, 4, rng.uniform(0.1, 10.0))
        phi = random_phases(rng, 6)
        weights = rng.uniform(0.0, 2.0, 4)
        b = update_b(cs, W, phi)
        full = wssr(cs, W, phi, weights)
        assert wssr_q(cs, W, phi, weights, b) == pytest.approx(full, rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 4), J=st.integers(0, 3), seed=st.integers(0, 2**32 - 1))
def test_wssr_q_bounded_by_wssr_for_every_selector(K, J, seed):
    rng = np.random.default_rng(seed)
    cs = random_channels(rng, M=3, N=3, K=K, J=J)
    W = random_precoder(rng, 3, K, rng.uniform(0.1, 10.0))
    phi = random_phases(rng, 3)
    weights = rng.uniform(0.0, 2.0, K)
    full = wssr(cs, W, phi, weights)
    for bits in itertools.product((0, 1), repeat=K):
        assert wssr_q(cs, W, phi, weights, np.array(bits)) <= full + 1e-12 * (1.0 + full)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), log_scale=st.floats(-3.0, 3.0))
def test_secrecy_rate_invariant_to_user_rescaling(seed, log_scale):
    rng = np.random.default_rng(seed)
    cs = random_channels(rng, M=3, N=3, K=2, J=2)
    c = 10.0**log_scale * np.exp(1j * rng.uniform(0, 2 * np.pi))
    scaled = ChannelSet(h_d=c * cs.h_d, H=c * cs.H, g_d=cs.g_d, G=cs.G,
                        sigma2=abs(c) ** 2 * cs.sigma2, mu2=cs.mu2)
    W = random_precoder(rng, 3, 2, 1.0)
    phi = random_phases(rng, 3)
    np.testing.assert_allclose(secrecy_rates(scaled, W, phi), secrecy_rates(cs, W, phi),
                               rtol=1e-9, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 3))
def test_rates_invariant_to_joint_unitary_rotation(seed, J):
    rng = np.random.default_rng(seed)
    cs = random_channels(rng, M=3, N=2, K=2, J=J)
    Q, _ = np.linalg.qr(cn(rng, 3, 3))
    rotated = ChannelSet(h_d=Q @ cs.h_d, H=Q @ cs.H, g_d=Q @ cs.g_d, G=Q @ cs.G,
                         sigma2=cs.sigma2, mu2=cs.mu2)
    W = random_precoder(rng, 3, 2, 1.0)
    phi = random_phases(rng, 2)
    s0, e0 = sinr_esnr_all(cs, W, phi)
    s1, e1 = sinr_esnr_all(rotated, Q @ W, phi)
    np.testing.assert_allclose(s1, s0, rtol=1e-10)
    np.testing.assert_allclose(e1, e0, rtol=1e-10)
