import json

import numpy as np
import pytest

from sicaloha import (DegreeDistribution, FinitePopulation, InfinitePopulation,
                      RetransmitPolicy, SystemConfig, ValidationError, make_irregular,
                      make_regular, sample_degree, sample_degrees)


class TestMakeRegular:
    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_single_entry(self, degree):
        dist = make_regular(degree)
        assert dist.entries == ((degree, 1.0),)
        assert dist.is_regular
        assert dist.max_degree == degree

    def test_rejects_zero_degree(self):
        with pytest.raises(ValidationError):
            make_regular(0)

    def test_rejects_negative_and_nonint(self):
        with pytest.raises(ValidationError):
            make_regular(-2)
        with pytest.raises(ValidationError):
            make_regular(2.5)


class TestMakeIrregular:
    def test_valid_two_degree_mix(self):
        dist = make_irregular([(2, 0.5), (3, 0.5)])
        assert dist.degrees == (2, 3)
        assert sum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)
        assert not dist.is_regular

    def test_rejects_sum_above_one(self):
        with pytest.raises(ValidationError):
            make_irregular([(2, 0.6), (3, 0.6)])

    def test_rejects_zero_degree(self):
        with pytest.raises(ValidationError):
            make_irregular([(0, 1.0)])

    def test_rejects_duplicate_degrees(self):
        with pytest.raises(ValidationError):
            make_irregular([(2, 0.5), (2, 0.5)])

    def test_rejects_negative_probability(self):
        with pytest.raises(ValidationError):
            make_irregular([(2, 1.2), (3, -0.2)])

    def test_renormalizes_within_tolerance(self):
        # decimal literals that sum to 1 only approximately are accepted
        dist = make_irregular([(2, 0.3333333), (3, 0.6666667)])
        assert sum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)

    def test_drops_zero_probability_entries(self):
        dist = make_irregular([(2, 1.0), (5, 0.0)])
        assert dist.degrees == (2,)
        assert dist.is_regular

    def test_mean_degree(self):
        assert make_irregular([(2, 0.5), (4, 0.5)]).mean_degree() == pytest.approx(3.0)


class TestSampleDegree:
    def test_regular_always_returns_its_degree(self):
        rng = np.random.default_rng(0)
        dist = make_regular(2)
        assert all(sample_degree(dist, rng) == 2 for _ in range(50))

    def test_degree_one_trivial(self):
        assert sample_degree(make_regular(1), np.random.default_rng(3)) == 1

    def test_law_of_large_numbers_half_half(self):
        dist = make_irregular([(2, 0.5), (3, 0.5)])
        draws = sample_degrees(dist, 10**5, np.random.default_rng(42))
        freq2 = np.mean(draws == 2)
        assert 0.49 <= freq2 <= 0.51

    def test_frequencies_within_three_standard_errors(self):
        dist = make_irregular([(1, 0.2), (2, 0.3), (3, 0.5)])
        n = 10**5
        draws = sample_degrees(dist, n, np.random.default_rng(7))
        for degree, p in dist.entries:
            se = (p * (1 - p) / n) ** 0.5
            assert abs(np.mean(draws == degree) - p) <= 3 * se

    def test_deterministic_given_seed(self):
        dist = make_irregular([(2, 0.5), (3, 0.5)])
        a = sample_degrees(dist, 1000, np.random.default_rng(1))
        b = sample_degrees(dist, 1000, np.random.default_rng(1))
        assert np.array_equal(a, b)


class TestSystemConfig:
    def test_accepts_degree_equal_to_frame_size(self):
        SystemConfig(3, 1, make_regular(3))

    def test_rejects_degree_above_frame_size(self):
        with pytest.raises(ValidationError):
            SystemConfig(2, 10, make_regular(3))

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValidationError):
            SystemConfig(0, 1, make_regular(1))
        with pytest.raises(ValidationError):
            SystemConfig(10, 0, make_regular(1))


class TestPopulationAndPolicy:
    def test_finite_bounds(self):
        FinitePopulation(1, 0.0)
        FinitePopulation(350, 1.0)
        with pytest.raises(ValidationError):
            FinitePopulation(0, 0.5)
        with pytest.raises(ValidationError):
            FinitePopulation(10, 1.5)

    def test_infinite_bounds(self):
        InfinitePopulation(0.0)
        with pytest.raises(ValidationError):
            InfinitePopulation(-0.1)

    def test_retransmit_prob_open_interval(self):
        RetransmitPolicy(1.0)
        RetransmitPolicy(1e-6)
        with pytest.raises(ValidationError):
            RetransmitPolicy(0.0)
        with pytest.raises(ValidationError):
            RetransmitPolicy(1.5)


class TestJsonForm:
    def test_round_trip(self):
        dist = make_irregular([(2, 0.25), (3, 0.75)])
        obj = dist.to_json_obj()
        assert json.loads(json.dumps(obj)) == obj
        assert DegreeDistribution.from_json_obj(obj) == dist

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValidationError):
            DegreeDistribution.from_json_obj({"degrees": [{"l": 2, "p": 1.0}], "x": 1})
        with pytest.raises(ValidationError):
            DegreeDistribution.from_json_obj({"degrees": [{"l": 2, "p": 1.0, "q": 0}]})
