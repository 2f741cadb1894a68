import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.signal import argrelmax

from qutrit_metrology import analysis, constants
from qutrit_metrology.analysis import (
    PosteriorSpec,
    ResourceBudget,
    central_peak_probability,
    coherence_time,
    density_profile,
    heisenberg_precision,
    long_time_precision,
    posterior_density,
    posterior_product,
    step_ratio,
    steps_required,
    t2_limited_precision,
)
from qutrit_metrology.qudit import DigitString

MU = 1e5 * constants.MU_B


def random_digits(d, K, rng):
    return DigitString(d, tuple(int(x) for x in rng.integers(0, d, K)))


class TestPosteriorDensity:
    def test_peak_value(self):
        assert posterior_density(1.0, PosteriorSpec(3, 2, 1.0)) == pytest.approx(9 / (2 * np.pi), rel=1e-15)

    def test_continuous_through_series_cutoff(self):
        spec = PosteriorSpec(3, 4, 0.5)
        inside = posterior_density(0.5 + 0.999e-6, spec)
        outside = posterior_density(0.5 + 1.001e-6, spec)
        assert inside == pytest.approx(outside, rel=1e-9)

    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("K", [1, 2, 3, 4, 5])
    def test_normalized(self, d, K):
        spec = PosteriorSpec(d, K, 2.0)
        # independent check: plain adaptive quadrature, peak location flagged
        val, _ = quad(posterior_density, 0, 2 * np.pi, args=(spec,), points=[2.0],
                      limit=2000, epsabs=1e-11)
        assert val == pytest.approx(1.0, abs=1e-8)
        assert analysis.integrate_posterior(spec, -np.pi, np.pi) == pytest.approx(1.0, abs=1e-10)

    def test_central_peak_width(self):
        spec = PosteriorSpec(3, 3, 0.0)
        zeros = posterior_density(np.array([-2 * np.pi / 27, 2 * np.pi / 27]), spec)
        np.testing.assert_allclose(zeros, 0, atol=1e-12)
        assert posterior_density(np.pi / 27, spec) > 0

    def test_periodic(self):
        spec = PosteriorSpec(2, 4, 1.0)
        x = np.linspace(0, 2 * np.pi, 17)
        np.testing.assert_allclose(posterior_density(x, spec), posterior_density(x + 2 * np.pi, spec), atol=1e-9)


class TestPosteriorProduct:
    @pytest.mark.parametrize("d", [2, 3])
    def test_matches_closed_form(self, d, rng):
        worst = 0.0
        for _ in range(200):
            K = int(rng.integers(1, 7))
            digits = random_digits(d, K, rng)
            phi = rng.uniform(0, 2 * np.pi, 5)
            a = posterior_product(phi, digits)
            b = posterior_density(phi, PosteriorSpec.from_digits(digits))
            worst = max(worst, np.abs(a - b).max())
        assert worst < 1e-10

    def test_maximum_at_reference(self):
        digits = DigitString(3, (1, 2, 0))
        ref = digits.reference_phase()
        grid = np.linspace(0, 2 * np.pi, 2001)
        assert posterior_product(ref, digits) >= posterior_product(grid, digits).max()
        assert posterior_product(ref, digits) == pytest.approx(27 / (2 * np.pi))

    def test_orthogonal_counting_state(self):
        digits = DigitString(3, (0,))
        assert posterior_product(2 * np.pi / 3, digits) == pytest.approx(0, abs=1e-15)


class TestCentralPeak:
    def test_large_k_limit(self):
        assert analysis.large_k_peak_probability() == pytest.approx(0.9028233335802806, abs=1e-12)

    @pytest.mark.parametrize("d,K,expected", [
        # frozen from 30-digit mpmath quadrature of the kernel
        (3, 1, 0.942331114377562691),
        (3, 2, 0.906967131055378953),
        (3, 6, 0.902823960806413554),
        (2, 8, 0.902828419886606331),
    ])
    def test_values(self, d, K, expected):
        assert central_peak_probability(d, K) == pytest.approx(expected, abs=1e-10)

    def test_k1_qubit_is_certain(self):
        # the window |delta| <= pi covers the whole period
        assert central_peak_probability(2, 1) == pytest.approx(1.0, abs=1e-12)

    def test_delta_limit(self):
        masses = [central_peak_probability(3, K) for K in range(1, 10)]
        assert min(masses) >= 0.90
        for K in range(6, 9):
            assert abs(masses[K] - masses[K - 1]) / masses[K - 1] < 0.005


class TestResources:
    def test_coherence_time(self):
        assert coherence_time(2, 3, 1.0) == 7
        assert coherence_time(3, 3, 1.0) == 13

    def test_large_k_qutrit(self):
        for K in range(8, 14):
            assert coherence_time(3, K, 1.0) / (3**K / 2) == pytest.approx(1, rel=0.01)

    def test_budget(self):
        b = ResourceBudget.for_protocol(3, 4, 2e-9)
        assert b.total_time == pytest.approx(2e-9 * 40)
        assert b.total_time == pytest.approx(b.tau0 * (3**b.steps - 1) / 2)

    def test_heisenberg_qubit_form(self):
        assert heisenberg_precision(2, 1e-6, MU) == 2 * np.pi * constants.HBAR / (MU * 1e-6)

    def test_qutrit_halves(self):
        for T in (1e-9, 3.7e-7, 1e-3):
            assert heisenberg_precision(3, T, MU) == heisenberg_precision(2, T, MU) / 2

    def test_inverse_time_scaling(self):
        a = heisenberg_precision(3, 1e-6, MU) * 1e-6
        b = heisenberg_precision(3, 5e-5, MU) * 5e-5
        assert a == pytest.approx(b, rel=1e-14)

    def test_precision_relation_to_range(self):
        # dH = H0/d^K with T = tau0 (d^K-1)/(d-1), tau0 = 2 pi hbar/(mu H0): matches for large K
        H0, d, K = 1e-6, 3, 12
        tau0 = 2 * np.pi * constants.HBAR / (MU * H0)
        T = tau0 * d**K / (d - 1)
        assert heisenberg_precision(d, T, MU) == pytest.approx(H0 / d**K, rel=1e-12)


class TestSensitivity:
    def test_quarter_nanotesla(self):
        dh = t2_limited_precision(MU, 3, 1e-6)
        assert 0.1e-9 <= dh <= 0.5e-9
        assert dh == pytest.approx(2.3815911671e-10, rel=1e-9)

    def test_crossover_continuity(self):
        assert long_time_precision(MU, 3, 1e-6, 1e-6) == pytest.approx(t2_limited_precision(MU, 3, 1e-6), rel=1e-15)

    def test_repetition_equal_t2(self):
        assert long_time_precision(MU, 3, 2e-6, 1.0, t_rep=2e-6) == pytest.approx(
            long_time_precision(MU, 3, 2e-6, 1.0), rel=1e-14)

    def test_standard_scaling(self):
        a = long_time_precision(MU, 3, 1e-6, 1.0)
        b = long_time_precision(MU, 3, 1e-6, 4.0)
        assert a / b == pytest.approx(2.0)


class TestSteps:
    def test_exact_power(self):
        assert steps_required(3, 3.0**-5) == 5
        assert steps_required(2, 2.0**-10) == 10

    def test_thousandth(self):
        assert steps_required(3, 1e-3) == 7
        assert steps_required(2, 1e-3) == 10

    def test_against_brute_force(self):
        for d in (2, 3, 5):
            for r in np.geomspace(1e-12, 0.9, 50):
                K = next(k for k in range(200) if d ** -k <= r)
                assert steps_required(d, r) == K

    def test_asymptotic_ratio(self):
        assert step_ratio(2, 3) == pytest.approx(math.log(2) / math.log(3))
        assert step_ratio(2, 3) == pytest.approx(0.631, abs=5e-4)

    def test_integer_ratio_converges(self):
        target = math.log(2) / math.log(3)
        errs = [abs(step_ratio(2, 3, 10.0**-e, integer=True) - target) for e in (6, 60, 300)]
        assert errs[-1] < 0.001
        assert errs[-1] < errs[0]

    def test_max_steps(self):
        assert analysis.max_steps(3, 1e-6, 1e-9) == 1 + math.floor(math.log(1000, 3))
        assert analysis.max_steps(3, 9e-9, 1e-9) == 3
        assert analysis.max_steps(2, 1e-10, 1e-9) == 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            steps_required(3, 1.5)


class TestDensityProfile:
    def test_peak(self):
        table = density_profile(PosteriorSpec(3, 3), np.linspace(-np.pi, np.pi, 2001))
        mid = table[1000]
        assert mid[0] == pytest.approx(0, abs=1e-12)
        assert mid[1] == pytest.approx(27 / (2 * np.pi), rel=1e-9)

    def test_satellites_decay(self):
        for d in (2, 3):
            grid = np.linspace(0, np.pi, 20001)
            dens = density_profile(PosteriorSpec(d, 3), grid)[:, 1]
            peaks = dens[argrelmax(dens)[0]]
            assert len(peaks) >= 2
            assert np.all(np.diff(peaks) < 0)

    def test_qutrit_narrower(self):
        # first zero of the kernel sits at 2 pi / d^K
        def first_zero(d):
            spec = PosteriorSpec(d, 3)
            grid = np.linspace(1e-4, np.pi, 400_001)
            dens = density_profile(spec, grid)[:, 1]
            return grid[argrelmax(-dens)[0][0]]

        assert first_zero(2) / first_zero(3) == pytest.approx((3 / 2) ** 3, rel=1e-3)
