"""Permutation-aligned accuracy and Frobenius error metrics."""

import numpy as np
import pytest

from fsvar.metrics import (
    BenchmarkRecord,
    aligned_frob_errors,
    frob_error,
    state_accuracy,
)


def test_identity_sequence_perfect():
    s = np.array([1, 2, 1, 2, 2])
    acc, perm = state_accuracy(s, s, 2)
    assert acc == 1.0
    assert perm == (1, 2)


def test_swapped_labels_perfect():
    truth = np.array([1, 1, 2, 2, 1])
    est = np.array([2, 2, 1, 1, 2])
    acc, perm = state_accuracy(est, truth, 2)
    assert acc == 1.0
    assert perm == (2, 1)  # est label k plays truth role perm[k-1]


def test_constant_estimate_half_accuracy():
    truth = np.array([1] * 10 + [2] * 10)
    acc, _ = state_accuracy(np.ones(20, dtype=np.int64), truth, 2)
    assert acc == 0.5


def test_joint_relabel_invariance():
    rng = np.random.default_rng(0)
    truth = rng.integers(1, 4, size=60)
    est = rng.integers(1, 4, size=60)
    acc0, _ = state_accuracy(est, truth, 3)
    relabel = {1: 3, 2: 1, 3: 2}
    est2 = np.array([relabel[v] for v in est])
    acc1, _ = state_accuracy(est2, truth, 3)
    assert acc0 == acc1


def test_three_state_partial():
    truth = np.array([1, 1, 2, 2, 3, 3])
    est = np.array([2, 2, 3, 3, 1, 2])  # cyclic relabel, one error at the end
    acc, perm = state_accuracy(est, truth, 3)
    assert acc == pytest.approx(5 / 6)
    assert perm == (3, 1, 2)


def test_state_accuracy_validation():
    with pytest.raises(ValueError, match="length"):
        state_accuracy(np.array([1, 2]), np.array([1, 2, 1]), 2)
    with pytest.raises(ValueError, match="enumeration"):
        state_accuracy(np.ones(4, dtype=np.int64), np.ones(4, dtype=np.int64), 7)


def test_frob_error_trivials():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert frob_error(A, A) == 0.0
    B = A.copy()
    B[0, 0] += 0.5
    assert frob_error(B, A) == pytest.approx(0.25)
    assert frob_error(np.zeros_like(A), A) == pytest.approx(np.sum(A**2))
    assert frob_error(A, B) == frob_error(B, A)


def test_frob_error_shape_mismatch():
    with pytest.raises(ValueError):
        frob_error(np.zeros((2, 2)), np.zeros((3, 3)))


def test_aligned_frob_errors_swap():
    truth = np.stack([np.eye(2), 2 * np.eye(2)])
    est = np.stack([2 * np.eye(2) + 0.1, np.eye(2)])  # est 1 plays truth 2
    errs = aligned_frob_errors(est, truth, (2, 1))
    # slot = truth regime: est[1]=eye vs truth[0]=eye -> 0; est[0] vs truth[1]
    assert errs[0] == pytest.approx(0.0)
    assert errs[1] == pytest.approx(4 * 0.01)


def test_aligned_frob_errors_identity_perm():
    rng = np.random.default_rng(1)
    truth = rng.standard_normal((2, 3, 3))
    est = truth + 0.1
    errs = aligned_frob_errors(est, truth, (1, 2))
    np.testing.assert_allclose(errs, [9 * 0.01, 9 * 0.01])


def test_benchmark_record_fields():
    rec = BenchmarkRecord(
        N=10, method="kmeans", replication=0,
        state_accuracy=0.9, frob_sq_error=[0.1, 0.2], runtime_ms=12.5,
    )
    assert rec.N == 10 and rec.frob_sq_error[1] == 0.2
