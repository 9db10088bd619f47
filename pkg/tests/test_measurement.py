import math

import numpy as np
import pytest

from qstbench.errors import DimensionError
from qstbench.measurement import (
    MeasurementRecord,
    build_projectors,
    depolarize,
    ideal_probabilities,
    sample_record,
    squared_difference,
    uniform_record,
)
from qstbench.qstate import haar_random_pure, to_density


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_projector_count_and_grouping(d):
    proj = build_projectors(d)
    assert len(proj) == 6**d
    assert proj.settings.shape == (3**d, 2**d)
    eye = np.eye(2**d)
    for setting in proj.settings:
        np.testing.assert_allclose(proj.projectors[setting].sum(axis=0), eye, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_projectors_are_rank_one(d):
    for p in build_projectors(d).projectors:
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        assert np.trace(p).real == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-15)


def test_single_qubit_projectors():
    proj = build_projectors(1)
    assert proj.labels == tuple("HVDARL")
    np.testing.assert_allclose(proj.projectors[0], [[1, 0], [0, 0]])
    np.testing.assert_allclose(proj.projectors[4], [[0.5, -0.5j], [0.5j, 0.5]], atol=1e-15)


def test_canonical_order_two_qubits():
    labels = build_projectors(2).labels
    assert labels[:4] == ("HH", "HV", "VH", "VV")
    assert labels[4:8] == ("HD", "HA", "VD", "VA")
    # setting 3 = (X, Z)
    assert labels[12:16] == ("DH", "DV", "AH", "AV")
    assert labels[-1] == "LL"


def test_ideal_probabilities_basis_state():
    rec = ideal_probabilities(np.diag([1.0, 0.0]), build_projectors(1))
    np.testing.assert_allclose(rec.values, [1, 0, 0.5, 0.5, 0.5, 0.5], atol=1e-15)
    assert rec.is_ideal


def test_ideal_probabilities_mixed_and_diagonal():
    proj = build_projectors(1)
    np.testing.assert_allclose(ideal_probabilities(np.eye(2) / 2, proj).values, [0.5] * 6)
    s = 1 / math.sqrt(2)
    rec = ideal_probabilities(to_density([s, s]), proj)
    np.testing.assert_allclose(rec.values, [0.5, 0.5, 1, 0, 0.5, 0.5], atol=1e-15)


def test_ideal_probabilities_dimension_mismatch():
    with pytest.raises(DimensionError):
        ideal_probabilities(np.eye(4) / 4, build_projectors(1))


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_born_rule_completeness(d):
    proj = build_projectors(d)
    rng = np.random.default_rng(d)
    for _ in range(5):
        rec = ideal_probabilities(to_density(haar_random_pure(d, rng)), proj)
        np.testing.assert_allclose(rec.setting_sums(), 1.0, atol=1e-10)


def test_record_validation():
    with pytest.raises(DimensionError):
        MeasurementRecord(d=1, values=np.zeros(5))
    with pytest.raises(ValueError):
        MeasurementRecord(d=1, values=[1.5, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        MeasurementRecord(d=1, values=[0.5] * 6, shots=0)


class TestSampling:
    def test_deterministic_outcome(self):
        ideal = ideal_probabilities(np.diag([1.0, 0.0]), build_projectors(1))
        rec = sample_record(ideal, 37, 0)
        assert rec.values[0] == 1.0 and rec.values[1] == 0.0
        assert rec.shots == 37

    def test_counts_partition_shots(self):
        proj = build_projectors(2)
        ideal = ideal_probabilities(to_density(haar_random_pure(2, 1)), proj)
        for shots in (1, 5, 15, 1000):
            rec = sample_record(ideal, shots, shots)
            counts = rec.values * shots
            np.testing.assert_allclose(counts, np.round(counts), atol=1e-9)
            assert np.all(np.round(counts).reshape(9, 4).sum(axis=1) == shots)
            np.testing.assert_allclose(rec.setting_sums(), 1.0, atol=1e-12)

    def test_binomial_spread(self):
        ideal = uniform_record(1)
        n = 8192
        freqs = [sample_record(ideal, n, seed).values[0] for seed in range(100)]
        expected = math.sqrt(0.25 / n)
        assert expected == pytest.approx(0.0055, abs=1e-4)
        assert expected / 1.3 <= np.std(freqs) <= expected * 1.3

    def test_converges_at_large_shots(self):
        proj = build_projectors(2)
        ideal = ideal_probabilities(to_density(haar_random_pure(2, 77)), proj)
        rec = sample_record(ideal, 2**20, 5)
        assert np.max(np.abs(rec.values - ideal.values)) < 0.005

    def test_rejects_zero_shots_and_sampled_input(self):
        ideal = uniform_record(1)
        with pytest.raises(ValueError):
            sample_record(ideal, 0, 0)
        with pytest.raises(ValueError):
            sample_record(sample_record(ideal, 10, 0), 10, 0)

    def test_seeded(self):
        ideal = uniform_record(2)
        np.testing.assert_array_equal(sample_record(ideal, 15, 3).values, sample_record(ideal, 15, 3).values)


class TestDepolarize:
    def test_endpoints(self):
        rho = to_density(haar_random_pure(2, 0))
        np.testing.assert_allclose(depolarize(rho, 0.0), rho)
        np.testing.assert_allclose(depolarize(rho, 1.0), np.eye(4) / 4)

    @pytest.mark.parametrize("p", [0.0, 0.05, 0.3, 1.0])
    def test_trace_preserved(self, p):
        rho = to_density(haar_random_pure(3, 1))
        assert np.trace(depolarize(rho, p)).real == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [-0.1, 1.1])
    def test_range(self, p):
        with pytest.raises(ValueError):
            depolarize(np.eye(2) / 2, p)

    @pytest.mark.parametrize("p", [0.05, 0.5])
    def test_linear_in_probabilities(self, p):
        proj = build_projectors(2)
        rho = to_density(haar_random_pure(2, 9))
        lhs = ideal_probabilities(depolarize(rho, p), proj).values
        rhs = (1 - p) * ideal_probabilities(rho, proj).values + p * uniform_record(2).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestSquaredDifference:
    def test_zero(self):
        rec = uniform_record(2)
        assert squared_difference(rec, rec) == 0.0

    def test_arithmetic(self):
        a = MeasurementRecord(1, [1, 0, 0.5, 0.5, 0.5, 0.5])
        assert squared_difference(a, uniform_record(1)) == pytest.approx(0.5)

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            squared_difference(uniform_record(1), uniform_record(2))

    def test_matches_multinomial_variance(self):
        # E[sum (f - p)^2] = sum_settings sum_outcomes p(1-p)/N
        proj = build_projectors(2)
        ideal = ideal_probabilities(to_density(haar_random_pure(2, 12)), proj)
        p = ideal.values
        n = 64
        analytic = np.sum(p * (1 - p)) / n
        draws = [squared_difference(sample_record(ideal, n, s), ideal) for s in range(2000)]
        assert np.mean(draws) == pytest.approx(analytic, rel=0.05)
