import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnaf.channel import ChannelRealization, NoiseDraws, draw_channel, draw_noise, frame_rng
from gnaf.codes import RelayCode, naf_relay_code
from gnaf.protocol import (
    NAF_PERMUTATION,
    ProtocolConfig,
    codeword_matrix,
    equivalent_model,
    gnaf_config,
    jing_hassibi_config,
    naf_frame,
    stacked_channel,
    transmit_frame,
)

from conftest import crandn
from test_codes import theta4_prime_oracle

VARIANTS = ["GNAF-I", "GNAF-II", "GNAF-III", "JING-HASSIBI"]


def random_code(rng, R, T2, T1, with_source=True):
    A, B = crandn(rng, R, T2, T1), crandn(rng, R, T2, T1)
    norms = np.sum(np.abs(A) ** 2 + np.abs(B) ** 2, axis=(1, 2))
    A, B = A / np.sqrt(norms)[:, None, None], B / np.sqrt(norms)[:, None, None]
    if not with_source:
        return RelayCode(A, B)
    A0, B0 = crandn(rng, T2, T1), crandn(rng, T2, T1)
    n0 = np.sqrt(np.sum(np.abs(A0) ** 2 + np.abs(B0) ** 2))
    return RelayCode(A, B, A0 / n0, B0 / n0)


def config_for(variant, T1, T2, R, P):
    if variant == "JING-HASSIBI":
        return jing_hassibi_config(T1, R, P)
    pi2 = 0.0 if variant == "GNAF-II" else 0.5
    return gnaf_config(variant, T1, T2, R, P, pi2=pi2)


def zero_noise(config):
    return NoiseDraws.zeros(config)


class TestConfig:
    def test_power_constraint(self):
        with pytest.raises(ValueError):
            ProtocolConfig("GNAF-I", 2, 2, 2, 1.0, 1.0, 0.9, 10.0)

    @pytest.mark.parametrize("pi1,pi3", [(0.0, 2.0), (4.0, 0.0)])
    def test_degenerate_powers(self, pi1, pi3):
        with pytest.raises(ValueError):
            ProtocolConfig("GNAF-I", 2, 2, 2, pi1, 4 - pi1 - 2 * pi3, pi3, 10.0)

    def test_gnaf2_requires_silent_source(self):
        with pytest.raises(ValueError):
            gnaf_config("GNAF-II", 4, 4, 4, 10.0, pi2=1.0)

    def test_jing_hassibi_requires_equal_phases(self):
        with pytest.raises(ValueError):
            ProtocolConfig("JING-HASSIBI", 4, 3, 3, 4.0, 0.0, 1.0, 10.0)

    def test_jing_hassibi_default_split(self):
        cfg = jing_hassibi_config(4, 4, 10.0)
        assert cfg.pi1 + cfg.R * cfg.pi3 == 8 and cfg.pi2 == 0
        assert cfg.max_diversity == 4 and not cfg.observes_broadcast

    def test_jing_hassibi_simulation_split(self):
        cfg = jing_hassibi_config(4, 4, 10.0, pi1=4, pi3=1)
        assert cfg.pi1 + cfg.pi2 + cfg.R * cfg.pi3 == cfg.T1 + cfg.T2

    def test_jing_hassibi_needs_long_frames(self):
        with pytest.raises(ValueError):
            jing_hassibi_config(3, 4, 10.0)

    def test_variant_flags(self):
        flags = {v: (config_for(v, 2, 2, 2, 1.0).observes_broadcast, config_for(v, 2, 2, 2, 1.0).source_cooperates)
                 for v in VARIANTS}
        assert flags == {"GNAF-I": (True, True), "GNAF-II": (True, False),
                         "GNAF-III": (False, True), "JING-HASSIBI": (False, False)}


class TestTransmitFrame:
    def test_dead_relays(self):
        cfg = gnaf_config("GNAF-II", 2, 2, 2, 10.0)
        s = np.array([1 + 1j, -1j])
        ch = ChannelRealization(1.0 + 0j, np.zeros(2, complex), np.zeros(2, complex))
        tr = transmit_frame(cfg, naf_relay_code(1, 1), s, ch, zero_noise(cfg))
        np.testing.assert_array_equal(tr.yD2, 0)
        np.testing.assert_allclose(tr.yD1, np.sqrt(cfg.pi1 * cfg.P) * s)

    def test_single_relay_chain(self):
        code = RelayCode(np.eye(1)[None], np.zeros((1, 1, 1)))
        cfg = gnaf_config("GNAF-II", 1, 1, 1, 7.0)
        s = np.array([0.6 - 0.8j])
        ch = ChannelRealization(0j, np.ones(1, complex), np.ones(1, complex))
        tr = transmit_frame(cfg, code, s, ch, zero_noise(cfg))
        P = cfg.P
        expected = np.sqrt(cfg.pi3 * P / (cfg.pi1 * P + 1)) * np.sqrt(cfg.pi1 * P) * s
        np.testing.assert_allclose(tr.yD2, expected, rtol=1e-15)

    def test_relay_output_reproducible_from_reception(self, rng, theta4):
        cfg = gnaf_config("GNAF-I", 4, 4, 4, 30.0, pi2=1.0)
        tr = transmit_frame(cfg, theta4, crandn(rng, 4), draw_channel(4, rng), draw_noise(cfg, rng))
        for i in range(4):
            t = cfg.relay_gain * (theta4.A[i] @ tr.r[i] + theta4.B[i] @ np.conj(tr.r[i]))
            np.testing.assert_array_equal(t, tr.t[i])

    def test_gnaf2_has_no_direct_source_term(self, rng):
        code = random_code(rng, 2, 3, 2)
        cfg = gnaf_config("GNAF-II", 2, 3, 2, 50.0)
        ch = ChannelRealization(5.0 + 2j, np.zeros(2, complex), np.zeros(2, complex))
        tr = transmit_frame(cfg, code, crandn(rng, 2), ch, zero_noise(cfg))
        np.testing.assert_array_equal(tr.yD2, 0)

    def test_gnaf3_omits_broadcast(self, rng):
        cfg = config_for("GNAF-III", 2, 3, 2, 10.0)
        code = random_code(rng, 2, 3, 2)
        tr = transmit_frame(cfg, code, crandn(rng, 2), draw_channel(2, rng), draw_noise(cfg, rng))
        assert tr.yD1 is None and tr.y.shape == (3,)
        y, _ = equivalent_model(cfg, code, tr.s, draw_channel(2, rng), draw_noise(cfg, rng))
        assert y.shape == (3,)

    def test_shape_errors(self, rng, theta4):
        cfg = gnaf_config("GNAF-II", 4, 4, 4, 10.0)
        with pytest.raises(ValueError):
            transmit_frame(cfg, theta4, np.ones(3), draw_channel(4, rng), draw_noise(cfg, rng))
        with pytest.raises(ValueError):
            transmit_frame(gnaf_config("GNAF-II", 2, 2, 2, 1.0), theta4, np.ones(2),
                           draw_channel(2, rng), draw_noise(cfg, rng))


class TestModelIdentity:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_agreement(self, variant):
        rng = frame_rng(99, VARIANTS.index(variant))
        for trial in range(200):
            T1 = int(rng.integers(1, 4))
            T2 = T1 if variant == "JING-HASSIBI" else int(rng.integers(1, 4))
            R = int(rng.integers(1, T1 + 1)) if variant == "JING-HASSIBI" else int(rng.integers(1, 4))
            cfg = config_for(variant, T1, T2, R, 10 ** rng.uniform(-1, 5))
            code = random_code(rng, R, T2, T1)
            s, ch, nz = crandn(rng, T1), draw_channel(R, rng), draw_noise(cfg, rng)
            direct = transmit_frame(cfg, code, s, ch, nz).y
            y, _ = equivalent_model(cfg, code, s, ch, nz)
            assert np.linalg.norm(y - direct) <= 1e-10 * np.linalg.norm(direct)

    def test_noiseless(self, rng, theta4):
        cfg = gnaf_config("GNAF-II", 4, 4, 4, 100.0)
        s, ch = crandn(rng, 4), draw_channel(4, rng)
        y, W = equivalent_model(cfg, theta4, s, ch, zero_noise(cfg))
        assert not W.any()
        expected = cfg.mean_scale * codeword_matrix(cfg, theta4, s) @ stacked_channel(ch)
        np.testing.assert_allclose(y, expected, rtol=1e-14)


class TestCodewordMatrix:
    def test_single_relay_instance(self):
        cfg = gnaf_config("GNAF-I", 1, 1, 1, 5.0, pi2=0.5)
        code = RelayCode(np.ones((1, 1, 1)), np.zeros((1, 1, 1)))
        sigma = 0.3 + 0.4j
        S = codeword_matrix(cfg, code, [sigma])
        k1 = np.sqrt((cfg.pi1 * cfg.P + 1) / (cfg.pi3 * cfg.P))
        np.testing.assert_allclose(S, [[k1 * sigma, 0, 0, 0], [0, sigma, 0, 0]], rtol=1e-15)

    def test_source_columns_vanish_without_source_power(self, rng):
        code = random_code(rng, 3, 2, 2)
        S = codeword_matrix(gnaf_config("GNAF-I", 2, 2, 3, 5.0, pi2=0.0), code, crandn(rng, 2))
        assert not S[2:, 0].any() and not S[2:, 4].any()

    def test_layout(self, rng):
        cfg = gnaf_config("GNAF-I", 2, 3, 2, 5.0, pi2=0.5)
        code = random_code(rng, 2, 3, 2)
        s = crandn(rng, 2)
        S = codeword_matrix(cfg, code, s)
        assert S.shape == (5, 6)
        assert not S[:2, 1:].any()
        c0 = np.sqrt(cfg.pi2 * (cfg.pi1 * cfg.P + 1) / (cfg.pi3 * cfg.pi1 * cfg.P))
        np.testing.assert_allclose(S[2:, 0], c0 * code.A0 @ s)
        np.testing.assert_allclose(S[2:, 3], c0 * code.B0 @ np.conj(s))
        np.testing.assert_allclose(S[2:, 2], code.A[1] @ s)
        np.testing.assert_allclose(S[2:, 5], code.B[1] @ np.conj(s))

    def test_theta4_cooperation_block(self, rng, theta4):
        cfg = gnaf_config("GNAF-II", 4, 4, 4, 10.0)
        for _ in range(20):
            x = crandn(rng, 3)
            S = codeword_matrix(cfg, theta4, np.append(x, 0))
            block = S[4:, [1, 2, 3, 4, 6, 7, 8, 9]]
            np.testing.assert_allclose(block, theta4.scale * theta4_prime_oracle(x), atol=1e-14)

    def test_batched(self, rng, theta4):
        cfg = gnaf_config("GNAF-II", 4, 4, 4, 10.0)
        s = crandn(rng, 5, 4)
        S = codeword_matrix(cfg, theta4, s)
        np.testing.assert_array_equal(S[3], codeword_matrix(cfg, theta4, s[3]))


class TestStackedChannel:
    def test_unit_fades(self):
        ch = ChannelRealization(1 + 0j, np.ones(3, complex), np.ones(3, complex))
        np.testing.assert_array_equal(stacked_channel(ch), np.ones(8))

    def test_conjugation(self):
        g0 = 0.5 - 0.1j
        ch = ChannelRealization(g0, np.array([1j]), np.array([1 + 0j]))
        np.testing.assert_array_equal(stacked_channel(ch), [g0, 1j, g0, -1j])

    def test_structure(self, rng):
        ch = draw_channel(4, rng)
        H = stacked_channel(ch)
        np.testing.assert_allclose(H[6:], ch.g * np.conj(ch.f))
        assert H[0] == H[5] == ch.g0


class TestNafEquivalence:
    def test_observation_is_permutation(self, rng):
        A0 = np.diag([0.6, 0.6]).astype(complex)
        code = naf_relay_code(0.9, 0.7, A0, np.zeros((2, 2)))
        cfg = gnaf_config("GNAF-I", 2, 2, 2, 40.0, pi2=1.0)
        for _ in range(200):
            s, ch, nz = crandn(rng, 2), draw_channel(2, rng), draw_noise(cfg, rng)
            gnaf_y = transmit_frame(cfg, code, s, ch, nz).y
            np.testing.assert_allclose(naf_frame(cfg, code, s, ch, nz), gnaf_y[NAF_PERMUTATION], atol=1e-12)


def analytic_frame_energy(config, code, codebook):
    """Expected transmitted energy per frame, averaged over codebook, fades and noise.

    With unit-variance fades and noise, E||A r + B r*||^2 equals
    pi1 P (||A s||^2 + ||B s*||^2) + ||A||_F^2 + ||B||_F^2 because the
    cross terms carry E[f^2] = 0.
    """
    P, vec = config.P, codebook.vectors
    src = config.pi1 * P * np.mean(np.sum(np.abs(vec) ** 2, axis=1))
    if config.source_cooperates and code.A0 is not None:
        coop = vec @ code.A0.T + np.conj(vec) @ code.B0.T
        src += config.pi2 * P * np.mean(np.sum(np.abs(coop) ** 2, axis=1))
    relay = 0.0
    for i in range(config.R):
        sig = vec @ code.A[i].T
        sig_c = np.conj(vec) @ code.B[i].T
        mean_sig = np.mean(np.sum(np.abs(sig) ** 2 + np.abs(sig_c) ** 2, axis=1))
        relay += config.relay_gain**2 * (config.pi1 * P * mean_sig + code.power_norms()[i])
    return src + relay


class TestPowerAccounting:
    @pytest.mark.slow
    def test_monte_carlo_energy(self, theta4, theta4_codebook):
        A0 = np.eye(4, dtype=complex) / 2
        code = theta4.with_source_pair(A0, np.zeros((4, 4)))
        cfg = gnaf_config("GNAF-I", 4, 4, 4, 20.0, pi1=4, pi2=1.0)
        rng = frame_rng(5)
        n = 100_000
        idx = rng.integers(len(theta4_codebook), size=n)
        total = 0.0
        for k in range(n):
            s = theta4_codebook.vectors[idx[k]]
            tr = transmit_frame(cfg, code, s, draw_channel(4, rng), draw_noise(cfg, rng))
            src = cfg.pi1 * cfg.P * np.vdot(s, s).real
            src += cfg.pi2 * cfg.P * np.sum(np.abs(A0 @ s) ** 2)
            total += src + np.sum(np.abs(tr.t) ** 2)
        mean = total / n
        expected = analytic_frame_energy(cfg, code, theta4_codebook)
        assert abs(mean / expected - 1) < 0.02
        assert expected <= (cfg.T1 + cfg.T2) * cfg.P

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.floats(0.1, 1e4))
    def test_budget_never_exceeded(self, T1, T2, R, P):
        from gnaf.codes import rotated_qpsk_codebook

        rng = np.random.default_rng(T1 * 100 + T2 * 10 + R)
        code = random_code(rng, R, T2, T1)
        cfg = gnaf_config("GNAF-I", T1, T2, R, P, pi2=0.5)
        cb = rotated_qpsk_codebook(10.0, T1, T1)
        assert analytic_frame_energy(cfg, code, cb) <= (T1 + T2) * P * (1 + 1e-12)
