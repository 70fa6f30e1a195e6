import numpy as np
import pytest

from horizonlab.errors import ContractViolation, DimensionError
from horizonlab.evolution import (
    FULL, OverlapSeries, evolve_approx, evolve_exact, linear_grid, log_grid, overlap_series,
    phase_sum, unitarity_check,
)
from horizonlab.perturbation import ErrorDistribution, exact_spectrum, sample_perturbed
from horizonlab.spectral_core import SpectralModel, inner_product

from conftest import random_state


@pytest.fixture
def pair():
    m = SpectralModel.oscillator_ladder(40)
    return m, sample_perturbed(m, ErrorDistribution.uniform_with_dispersion(1e-2, 5), 1e-3)


def test_exact_perturbation_keeps_overlap_one():
    m = SpectralModel.oscillator_ladder(16)
    s = overlap_series(m, exact_spectrum(m), linear_grid(1e4, 50))
    np.testing.assert_allclose(s.overlap_re, 1.0, atol=1e-12)
    np.testing.assert_allclose(s.deviation, 0.0, atol=1e-6)


def test_series_matches_explicit_states(pair):
    m, p = pair
    for T in (0.0, 3.7, 250.0):
        direct = inner_product(evolve_exact(m, T), evolve_approx(p, m, T))
        s = overlap_series(m, p, np.array([T]))
        assert s.overlap[0] == pytest.approx(direct, abs=1e-12)


def test_single_error_matches_cosine():
    m = SpectralModel.equal_coefficients([0.5])
    p = sample_perturbed(m, ErrorDistribution("fixed", 0.2, 0))
    t = linear_grid(100.0, 101)
    s = overlap_series(m, p, t)
    np.testing.assert_allclose(s.overlap_re, np.cos(0.2 * t), atol=1e-12)


def test_full_mode_without_residuals_equals_diagonal(pair):
    m, p = pair
    t = linear_grid(50.0, 11)
    a = overlap_series(m, p, t)
    b = overlap_series(m, p, t, mode=FULL)
    np.testing.assert_allclose(a.overlap, b.overlap, atol=1e-12)


def test_full_mode_with_residuals_stays_bounded():
    m = SpectralModel.oscillator_ladder(12)
    p = sample_perturbed(m, ErrorDistribution.uniform_with_dispersion(1e-2, 1), residual_eps=1e-2)
    s = overlap_series(m, p, linear_grid(100.0, 21), mode=FULL)
    assert np.all(np.abs(s.overlap) <= 1 + 1e-12)
    assert s.overlap_re[0] > 0.99


def test_phase_sum_large_times_is_accurate():
    w = np.array([0.5, 0.5])
    f = np.array([1e-3, -1e-3])
    t = np.array([1e6, 1e9])
    np.testing.assert_allclose(phase_sum(w, f, t), np.cos(f[0] * t), atol=1e-9)


def test_grid_contracts(pair):
    m, p = pair
    with pytest.raises(DimensionError):
        overlap_series(m, p, np.array([]))
    with pytest.raises(ContractViolation):
        overlap_series(m, p, np.array([1.0, 0.5]))
    g = log_grid(1.0, 1e3, 4)
    np.testing.assert_allclose(g, [1, 10, 100, 1000])


def test_series_csv_round_trip(pair, tmp_path):
    m, p = pair
    s = overlap_series(m, p, linear_grid(10.0, 7))
    back = OverlapSeries.from_csv(s.to_csv(tmp_path / "s.csv"))
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.overlap_re, s.overlap_re)
    np.testing.assert_array_equal(back.deviation, s.deviation)


def test_unitarity_small(rng):
    m = SpectralModel.oscillator_ladder(8)
    a, b = random_state(rng, 8), random_state(rng, 8)
    assert unitarity_check(m, a, b, log_grid(1.0, 1e6, 20)) < 1e-12
