import numpy as np
import pytest

from dmlkit.data import derive_seed, make_partition, validate_dataset
from dmlkit.errors import (
    DegenerateArmError,
    KTooLargeError,
    KTooSmallError,
    LengthMismatchError,
    NonBinaryTreatmentError,
    NonFiniteValueError,
)


class TestValidateDataset:
    def test_minimal_valid(self):
        ds = validate_dataset([1.0, 2.0], [0, 1], [[0.0], [1.0]])
        assert ds.n == 2
        assert ds.p == 1
        assert ds.treatments.tolist() == [0, 1]

    def test_empty_treated_arm(self):
        with pytest.raises(DegenerateArmError):
            validate_dataset([1.0, 2.0], [0, 0], [[0.0], [1.0]])

    def test_empty_control_arm(self):
        with pytest.raises(DegenerateArmError):
            validate_dataset([1.0, 2.0], [1, 1], [[0.0], [1.0]])

    def test_non_binary_treatment(self):
        with pytest.raises(NonBinaryTreatmentError):
            validate_dataset([1.0, 2.0], [0, 2], [[0.0], [1.0]])

    def test_fractional_treatment(self):
        with pytest.raises(NonBinaryTreatmentError):
            validate_dataset([1.0, 2.0], [0, 0.5], [[0.0], [1.0]])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            validate_dataset([1.0, 2.0, 3.0], [0, 1], [[0.0], [1.0]])

    def test_nan_outcome(self):
        with pytest.raises(NonFiniteValueError):
            validate_dataset([1.0, np.nan], [0, 1], [[0.0], [1.0]])

    def test_inf_covariate(self):
        with pytest.raises(NonFiniteValueError):
            validate_dataset([1.0, 2.0], [0, 1], [[np.inf], [1.0]])

    def test_feature_names_length_checked(self):
        with pytest.raises(LengthMismatchError):
            validate_dataset([1.0, 2.0], [0, 1], [[0.0], [1.0]], feature_names=["a", "b"])

    def test_arrays_are_read_only(self):
        ds = validate_dataset([1.0, 2.0], [0, 1], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            ds.outcomes[0] = 5.0


class TestMakePartition:
    def test_forced_balance(self):
        part = make_partition(4, 2, seed=7)
        assert sorted(part.fold_sizes().tolist()) == [2, 2]

    def test_remainder_rule(self):
        part = make_partition(5, 2, seed=123)
        assert sorted(part.fold_sizes().tolist(), reverse=True) == [3, 2]

    def test_determinism(self):
        a = make_partition(100, 5, seed=1)
        b = make_partition(100, 5, seed=1)
        assert np.array_equal(a.assignments, b.assignments)

    def test_different_seeds_differ(self):
        a = make_partition(100, 5, seed=1)
        b = make_partition(100, 5, seed=2)
        assert not np.array_equal(a.assignments, b.assignments)

    def test_k_too_small(self):
        with pytest.raises(KTooSmallError):
            make_partition(10, 1, seed=0)

    def test_k_too_large(self):
        with pytest.raises(KTooLargeError):
            make_partition(3, 4, seed=0)

    def test_balance_and_exhaustiveness_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            N = int(rng.integers(2, 200))
            K = int(rng.integers(2, N + 1))
            seed = int(rng.integers(0, 2**31))
            part = make_partition(N, K, seed)
            sizes = part.fold_sizes()
            assert sizes.max() - sizes.min() <= 1
            assert sizes.sum() == N
            union = np.concatenate([part.fold_indices(k) for k in range(1, K + 1)])
            assert sorted(union.tolist()) == list(range(N))
            assert np.all((part.assignments >= 1) & (part.assignments <= K))

    def test_complement_indices(self):
        part = make_partition(10, 2, seed=3)
        fold = set(part.fold_indices(1).tolist())
        comp = set(part.complement_indices(1).tolist())
        assert fold | comp == set(range(10))
        assert fold & comp == set()


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
    assert derive_seed(0) >= 0
