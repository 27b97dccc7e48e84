"""Tests for Wiener increments, delay laws and the squared-error identity."""

import math

import numpy as np
import pytest

from core.stochastic import (
    DelayModel, RngStream, delay_moments, delay_quadrature, delay_sample, delay_samples,
    delay_support_grid, squared_error_check, variance_family, wiener_increment, wiener_increments
)
from utils.errors import ConfigError


class TestRngStream:
    def test_same_seed_same_draws(self):
        a = RngStream(7).generator.normal(size=5)
        b = RngStream(7).generator.normal(size=5)
        assert np.array_equal(a, b)

    def test_streams_and_substreams_differ(self):
        base = RngStream(7).generator.normal(size=5)
        other_stream = RngStream(7, stream_id=1).generator.normal(size=5)
        child = RngStream(7).substream(0).generator.normal(size=5)
        assert not np.array_equal(base, other_stream)
        assert not np.array_equal(base, child)

    def test_substream_is_reproducible(self):
        root = RngStream(99)
        assert np.array_equal(
            root.substream(3).generator.normal(size=4),
            RngStream(99).substream(3).generator.normal(size=4)
        )

    @pytest.mark.parametrize('seed', [-1, 2 ** 64])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError):
            RngStream(seed)


class TestWienerIncrement:
    def test_zero_step_draws_nothing(self):
        rng = RngStream(1)
        assert wiener_increment(0.0, rng) == 0.0
        # The stream was not advanced
        assert rng.generator.normal() == RngStream(1).generator.normal()

    def test_negative_step_rejected(self):
        with pytest.raises(ValueError):
            wiener_increment(-0.1, RngStream(1))
        with pytest.raises(ValueError):
            wiener_increments(-0.1, 3, RngStream(1))

    def test_variance_matches_step(self):
        draws = wiener_increments(0.5, 200_000, RngStream(3))
        assert abs(draws.mean()) < 0.01
        assert draws.var() == pytest.approx(0.5, rel=0.02)


class TestDelayModel:
    def test_moments_are_exact(self):
        assert delay_moments(DelayModel.deterministic(1.5)) == (1.5, 2.25)
        assert delay_moments(DelayModel.exponential(2.0)) == (0.5, 0.5)
        mu, second = delay_moments(DelayModel.discrete([0.0, 2.0], [0.25, 0.75]))
        assert mu == pytest.approx(1.5)
        assert second == pytest.approx(3.0)

    def test_lognormal_moments(self):
        model = DelayModel.lognormal(0.1, 0.4)
        mu, second = delay_moments(model)
        assert mu == pytest.approx(math.exp(0.1 + 0.08))
        assert second == pytest.approx(math.exp(0.2 + 0.32))

    def test_probs_must_sum_to_one(self):
        with pytest.raises(ValueError, match='probs'):
            DelayModel.discrete([1.0, 2.0], [0.5, 0.4])

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            DelayModel.deterministic(-1.0)
        with pytest.raises(ValueError):
            DelayModel.exponential(0.0)
        with pytest.raises(ValueError):
            DelayModel.discrete([-1.0, 1.0], [0.5, 0.5])

    def test_from_dict_reports_field_path(self):
        with pytest.raises(ConfigError) as info:
            DelayModel.from_dict({'kind': 'discrete', 'values': [1, 2], 'probs': [0.3, 0.3]})
        assert info.value.field == 'delay.probs'

    def test_from_dict_rejects_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            DelayModel.from_dict({'kind': 'deterministic', 'd': 1.0, 'rate': 2.0})
        assert info.value.field == 'delay.rate'

    def test_from_dict_round_trip(self):
        model = DelayModel.lognormal(-0.05, 0.3)
        assert DelayModel.from_dict(model.to_dict()) == model

    def test_samples_follow_the_law(self):
        rng = RngStream(5)
        assert np.all(delay_samples(DelayModel.deterministic(2.0), 10, rng) == 2.0)
        draws = delay_samples(DelayModel.exponential(2.0), 100_000, rng)
        assert draws.mean() == pytest.approx(0.5, rel=0.02)
        picks = delay_samples(DelayModel.discrete([1.0, 3.0], [0.5, 0.5]), 1000, rng)
        assert set(np.unique(picks)) <= {1.0, 3.0}
        assert delay_sample(DelayModel.deterministic(0.7), rng) == 0.7

    @pytest.mark.parametrize('model', [
        DelayModel.deterministic(1.5),
        DelayModel.exponential(2.0),
        DelayModel.lognormal(0.0, math.sqrt(0.1)),
        DelayModel.discrete([0.5, 1.0, 4.0], [0.3, 0.5, 0.2]),
    ], ids=['deterministic', 'exponential', 'lognormal', 'discrete'])
    def test_sample_moments_within_four_standard_errors(self, model):
        draws = delay_samples(model, 100_000, RngStream(21))
        mu, second = delay_moments(model)
        n = draws.size
        assert abs(draws.mean() - mu) <= 4 * draws.std(ddof=1) / math.sqrt(n) + 1e-12
        squares = draws * draws
        assert abs(squares.mean() - second) <= 4 * squares.std(ddof=1) / math.sqrt(n) + 1e-12

    def test_lognormal_mean(self):
        assert delay_moments(DelayModel.lognormal(0.0, math.sqrt(0.1)))[0] == pytest.approx(math.exp(0.05))


class TestDelayQuadrature:
    @pytest.mark.parametrize('model', [
        DelayModel.deterministic(1.0),
        DelayModel.exponential(0.5),
        DelayModel.lognormal(-0.05, 0.3),
        DelayModel.discrete([0.5, 1.5, 4.0], [0.2, 0.5, 0.3]),
    ])
    def test_reproduces_moments(self, model):
        nodes, weights = delay_quadrature(model)
        mu, second = delay_moments(model)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.dot(weights, nodes) == pytest.approx(mu, rel=1e-8)
        assert np.dot(weights, nodes ** 2) == pytest.approx(second, rel=1e-8)

    def test_support_grid(self):
        assert np.array_equal(delay_support_grid(DelayModel.deterministic(1.0)), [1.0])
        assert np.array_equal(delay_support_grid(DelayModel.discrete([2.0, 1.0], [0.5, 0.5])), [1.0, 2.0])
        grid = delay_support_grid(DelayModel.exponential(1.0), 11)
        assert grid[0] == 0.0 and grid.size == 11
        assert grid[-1] == pytest.approx(-math.log(0.001))


class TestVarianceFamily:
    @pytest.mark.parametrize('family', ['lognormal', 'two_point'])
    @pytest.mark.parametrize('sigma2', [0.1, 1.0, 2.5])
    def test_mean_and_variance_held(self, family, sigma2):
        model = variance_family(family, 1.0, sigma2)
        mu, second = delay_moments(model)
        assert mu == pytest.approx(1.0, rel=1e-12)
        assert second - mu * mu == pytest.approx(sigma2, rel=1e-9)

    def test_zero_variance_is_deterministic(self):
        assert variance_family('lognormal', 1.0, 0.0) == DelayModel.deterministic(1.0)
        assert variance_family('two_point', 1.0, 0.0) == DelayModel.deterministic(1.0)

    def test_two_point_stays_nonnegative(self):
        model = variance_family('two_point', 1.0, 2.5)
        assert min(model.values) == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            variance_family('gamma', 1.0, 0.1)
        with pytest.raises(ValueError):
            variance_family('lognormal', 1.0, -0.1)


class TestSquaredErrorCheck:
    def test_zero_horizon(self):
        est = squared_error_check(2.0, 0.0, 10, RngStream(0))
        assert est.mc_estimate == 0.0 and est.closed_form == 0.0

    def test_closed_form(self):
        est = squared_error_check(3.0, 2.0, 10, RngStream(0), n_steps=4)
        assert est.closed_form == pytest.approx(2.0 + 6.0)

    def test_matches_closed_form(self):
        est = squared_error_check(1.0, 1.0, 20_000, RngStream(11), n_steps=200)
        assert abs(est.mc_estimate - est.closed_form) <= 4 * est.std_error + 1e-3

    @pytest.mark.slow
    @pytest.mark.parametrize('e0', [0.0, 0.5, 1.0, 3.0])
    @pytest.mark.parametrize('y', [0.5, 1.0, 2.0])
    def test_full_grid(self, e0, y):
        est = squared_error_check(e0, y, 100_000, RngStream(12345), n_steps=1000)
        tolerance = max(0.02 * est.closed_form, 4 * est.std_error)
        assert abs(est.mc_estimate - est.closed_form) <= tolerance
