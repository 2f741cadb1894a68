import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qutrit_metrology import protocol
from qutrit_metrology.protocol import (
    LinearOracle,
    PhaseOracle,
    ProtocolConfig,
    decode_field,
    digit_probabilities,
    encode_field,
    outcome_distribution,
    run_fourier_estimation,
    string_likelihood,
    transmon_backend,
)
from qutrit_metrology.qudit import DigitString
from qutrit_metrology.transmon import frequency_shift

from .conftest import PHI0


def exact_config(d, K, mode="analytic", seed=0):
    # tau0 = 1 and H0 = d, so h0 = 1 and the field equals its digit fraction
    return ProtocolConfig(d, K, 1.0, float(d), mode, seed)


def estimate(digits: DigitString, **kw):
    cfg = exact_config(digits.base, len(digits), **kw)
    oracle = LinearOracle.for_field(decode_field(digits, cfg.h0), cfg)
    return run_fourier_estimation(cfg, oracle)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(base=1), dict(steps=0), dict(tau0=0.0),
                                    dict(field_range=-1.0), dict(mode="bayes")])
    def test_invalid(self, kw):
        args = dict(base=3, steps=2, tau0=1.0, field_range=1.0, mode="analytic")
        args.update(kw)
        with pytest.raises(ValueError):
            ProtocolConfig(**args)


class TestEstimation:
    def test_single_trit(self):
        digits, records = estimate(DigitString(3, (1,)))
        assert digits.digits == (1,)
        np.testing.assert_allclose(records[0].probabilities, [0, 1, 0], atol=1e-12)

    def test_qubit_three_bits(self):
        cfg = exact_config(2, 3)
        oracle = LinearOracle.for_field(cfg.h0 * (1 + 0 / 2 + 1 / 4), cfg)
        digits, _ = run_fourier_estimation(cfg, oracle)
        assert digits.digits == (1, 0, 1)

    def test_random_four_trits(self, rng):
        for _ in range(200):
            truth = DigitString.from_integer(int(rng.integers(3**4)), 3, 4)
            assert estimate(truth)[0] == truth

    def test_records_audit_trail(self):
        truth = DigitString(3, (2, 1, 2))
        _, records = estimate(truth)
        assert [r.step for r in records] == [2, 1, 0]
        np.testing.assert_allclose([r.delay for r in records], [9.0, 3.0, 1.0])
        # step 1 compensates the last trit (2) one position down: 2 pi/3 * 2/3
        assert records[1].compensation == pytest.approx(4 * np.pi / 9)
        for r in records:
            assert abs(r.probabilities.sum() - 1) < 1e-12
            assert 0 <= r.outcome < 3

    def test_non_finite_oracle(self):
        class Broken(PhaseOracle):
            def phase(self, tau):
                return np.inf

        with pytest.raises(protocol.OracleError):
            run_fourier_estimation(exact_config(3, 2), Broken())

    @given(st.sampled_from([2, 3, 5]), st.integers(1, 8), st.data())
    @settings(max_examples=60, deadline=None)
    def test_exact_fields_round_trip(self, d, K, data):
        n = data.draw(st.integers(0, d**K - 1))
        truth = DigitString.from_integer(n, d, K)
        digits, _ = estimate(truth)
        assert digits == truth
        cfg = exact_config(d, K)
        assert decode_field(digits, cfg.h0) == pytest.approx(decode_field(truth, cfg.h0), abs=0)


class TestProbabilities:
    def test_exact_digit(self):
        np.testing.assert_allclose(digit_probabilities(1, 0.0, 3), [0, 1, 0], atol=1e-15)

    def test_zero_phase(self):
        assert digit_probabilities(0, 0.0, 3)[0] == pytest.approx(1.0)

    def test_sector_boundary(self):
        np.testing.assert_allclose(digit_probabilities(0, np.pi / 3, 3), [4 / 9, 4 / 9, 1 / 9], atol=1e-15)

    def test_residual_scaling(self):
        np.testing.assert_allclose(digit_probabilities(2, 0.01, 3, step_scale=9),
                                   digit_probabilities(2, 0.09, 3), atol=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 7])
    def test_general_base_matches_matrix_path(self, d, rng):
        for _ in range(20):
            t, res = int(rng.integers(d)), rng.uniform(-1, 1)
            phi = 2 * np.pi * t / d + res
            direct = LinearOracle(phi).cycle_state(d, 1.0, 0.0)
            np.testing.assert_allclose(digit_probabilities(t, res, d),
                                       np.abs(direct.amplitudes) ** 2, atol=1e-12)


class TestSectorDecision:
    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_argmax_is_sector(self, d, rng):
        cfg = exact_config(d, 1)
        for phi in rng.uniform(0, 2 * np.pi, 300):
            width = 2 * np.pi / d
            offset = (phi + width / 2) % width
            if min(offset, width - offset) < 1e-6:
                continue
            sector = int(np.floor((phi + width / 2) / width)) % d
            digits, _ = run_fourier_estimation(cfg, LinearOracle(phi))
            assert digits.digits == (sector,)

    def test_tie_goes_to_smaller_digit(self):
        cfg = exact_config(3, 1)
        assert run_fourier_estimation(cfg, LinearOracle(np.pi / 3))[0].digits == (0,)
        assert run_fourier_estimation(cfg, LinearOracle(np.pi))[0].digits == (1,)
        assert run_fourier_estimation(cfg, LinearOracle(5 * np.pi / 3))[0].digits == (0,)


class TestLikelihood:
    @pytest.mark.parametrize("d,K", [(2, 5), (3, 4), (5, 3)])
    def test_path_product_matches_string_likelihood(self, d, K, rng):
        cfg = exact_config(d, K)
        for _ in range(50):
            field = rng.uniform(0, d)
            oracle = LinearOracle.for_field(field, cfg)
            digits, records = run_fourier_estimation(cfg, oracle)
            path = np.prod([r.probabilities[r.outcome] for r in records])
            assert path == pytest.approx(string_likelihood(oracle(1.0), digits), abs=1e-10)

    def test_distribution_sums_to_one(self):
        cfg = exact_config(3, 3)
        dist = outcome_distribution(cfg, LinearOracle.for_field(1.2345, cfg))
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
        for digits, p in dist.items():
            assert p == pytest.approx(string_likelihood(LinearOracle.for_field(1.2345, cfg)(1.0), digits),
                                      abs=1e-12)


class TestSampled:
    def test_seed_reproducible(self):
        cfg = exact_config(3, 4, mode="sampled", seed=99)
        oracle = LinearOracle.for_field(1.111, cfg)
        a = protocol.run_many(cfg, oracle, 50)
        b = protocol.run_many(cfg, oracle, 50)
        assert [x[0] for x in a] == [x[0] for x in b]

    def test_per_step_frequencies(self):
        cfg = exact_config(3, 3, mode="sampled", seed=2024)
        oracle = LinearOracle.for_field(1.2345, cfg)
        n = 10_000
        runs = protocol.run_many(cfg, oracle, n)
        dist = outcome_distribution(cfg, oracle)
        for k in range(3):
            exact = np.zeros(3)
            for digits, p in dist.items():
                exact[digits[k]] += p
            counts = np.bincount([d[k] for d, _ in runs], minlength=3)
            sigma = np.sqrt(n * exact * (1 - exact))
            assert np.all(np.abs(counts - n * exact) <= 3 * sigma + 1e-9), (k, counts, n * exact)


class TestFieldCoding:
    def test_decode(self):
        assert decode_field(DigitString(3, (1, 0)), 2.0) == 2.0
        assert decode_field(DigitString(3, (2, 2, 2)), 9.0) == pytest.approx(26.0)

    def test_encode_decode(self):
        cfg = exact_config(3, 5)
        for n in range(0, 3**5, 7):
            ds = DigitString.from_integer(n, 3, 5)
            assert encode_field(decode_field(ds, cfg.h0), cfg) == ds


class TestTransmonBackend:
    def test_no_flux_change_no_phase(self, device):
        oracle = transmon_backend(device, 0.3 * PHI0, 0.3 * PHI0)
        for tau in (1e-9, 1e-6, 3.0):
            assert oracle(tau) == 0.0

    def test_linear_in_tau(self, device):
        oracle = transmon_backend(device, 0.301 * PHI0, 0.3 * PHI0)
        assert oracle(2e-8) == pytest.approx(2 * oracle(1e-8), rel=1e-12)

    def test_cycle_matches_closed_form(self, device, rng):
        for _ in range(100):
            flux_ref = rng.uniform(0.05, 0.45) * PHI0
            flux = flux_ref + rng.uniform(-0.01, 0.01) * PHI0
            tau = rng.uniform(1e-9, 1e-6)
            oracle = transmon_backend(device, flux, flux_ref)
            phi = float(frequency_shift(device, flux, flux_ref)) * tau
            probs = np.abs(oracle.cycle_state(3, tau, 0.0).amplitudes) ** 2
            j = np.arange(3)
            np.testing.assert_allclose(probs, (1 + 2 * np.cos(phi - 2 * np.pi * j / 3)) ** 2 / 9, atol=1e-9)
            ideal = LinearOracle(oracle.rate).cycle_state(3, tau, 0.0)
            np.testing.assert_allclose(probs, np.abs(ideal.amplitudes) ** 2, atol=1e-9)

    def test_estimation_through_transmon(self, device, rng):
        flux_ref = 0.3 * PHI0
        oracle = transmon_backend(device, flux_ref - 1e-3 * PHI0, flux_ref)
        assert oracle.rate > 0
        for _ in range(30):
            truth = DigitString.from_integer(int(rng.integers(3**5)), 3, 5)
            tau0 = 2 * np.pi / 3 * truth.fraction() / oracle.rate
            if tau0 == 0:
                continue
            cfg = ProtocolConfig(3, 5, tau0, 1.0)
            assert run_fourier_estimation(cfg, oracle)[0] == truth

    def test_qutrit_only(self, device):
        oracle = transmon_backend(device, 0.31 * PHI0, 0.3 * PHI0)
        with pytest.raises(ValueError):
            run_fourier_estimation(ProtocolConfig(2, 2, 1e-8, 1.0), oracle)
