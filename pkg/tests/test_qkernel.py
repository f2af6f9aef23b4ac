from functools import reduce
from math import pi

import numpy as np
import pytest

from app.core.errors import ShapeError
from app.quantum.qkernel import KernelConfig, KernelKind, eval_kernel, kernel_entry, prepare_states, train_kernel
from app.quantum.qsim import Ordering
from tests.test_qsim import H, dense_cx, dense_single, phase, ry


def dense_two_qubit_state(z, theta):
    """|Phi> = V(z) U(theta) |00> from explicit 4x4 matrices."""
    u = reduce(lambda acc, m: m @ acc, [
        dense_single(ry(theta[0]), 0, 2), dense_single(ry(theta[1]), 1, 2),
        dense_cx(0, 1, 2),
        dense_single(ry(theta[2]), 0, 2), dense_single(ry(theta[3]), 1, 2),
    ], np.eye(4))
    v = reduce(lambda acc, m: m @ acc, [
        dense_single(H, 0, 2), dense_single(H, 1, 2),
        dense_single(phase(2 * z[0]), 0, 2), dense_single(phase(2 * z[1]), 1, 2),
        dense_cx(0, 1, 2), dense_single(phase(2 * (pi - z[0]) * (pi - z[1])), 1, 2), dense_cx(0, 1, 2),
    ], np.eye(4))
    return v @ u @ np.eye(4)[0]


def test_self_fidelity_is_one(kernel_cfg_2q):
    theta = np.random.default_rng(0).normal(size=4)
    assert kernel_entry([0.3, 1.1], [0.3, 1.1], theta, kernel_cfg_2q) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("z2, expected", [(pi / 2, 0.0), (pi / 4, 0.5), (0.3, np.cos(0.3) ** 2)])
def test_single_qubit_kernel_is_cos_squared(z2, expected):
    cfg = KernelConfig.for_qubits(1)
    assert kernel_entry([0.0], [z2], np.zeros(2), cfg) == pytest.approx(expected, abs=1e-10)


def test_two_qubit_entry_matches_dense_oracle(kernel_cfg_2q):
    rng = np.random.default_rng(3)
    z1, z2 = rng.uniform(0, pi, 2), rng.uniform(0, pi, 2)
    theta = rng.normal(size=4)
    expected = abs(np.vdot(dense_two_qubit_state(z1, theta), dense_two_qubit_state(z2, theta))) ** 2
    assert kernel_entry(z1, z2, theta, kernel_cfg_2q) == pytest.approx(expected, abs=1e-10)


def test_train_kernel_singleton_and_structure(kernel_cfg_2q):
    single = train_kernel([[0.4, 0.2]], np.zeros(4), kernel_cfg_2q)
    np.testing.assert_array_equal(single.values, [[1.0]])
    assert single.kind is KernelKind.SYMMETRIC_TRAIN

    rng = np.random.default_rng(8)
    k = train_kernel(rng.uniform(0, 1, size=(9, 2)), rng.normal(size=4), kernel_cfg_2q).values
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_array_equal(np.diag(k), 1.0)
    assert k.min() >= 0.0 and k.max() <= 1.0 + 1e-12
    assert np.linalg.eigvalsh(k).min() >= -1e-10


def test_train_kernel_matches_brute_force(kernel_cfg_2q):
    rng = np.random.default_rng(4)
    z = rng.uniform(0, 1, size=(3, 2))
    theta = rng.normal(size=4)
    k = train_kernel(z, theta, kernel_cfg_2q).values
    for i in range(3):
        for j in range(3):
            assert k[i, j] == pytest.approx(kernel_entry(z[i], z[j], theta, kernel_cfg_2q), abs=1e-12)


def test_eval_kernel_matches_train_kernel_and_brute_force(kernel_cfg_2q):
    rng = np.random.default_rng(5)
    train = rng.uniform(0, 1, size=(3, 2))
    theta = rng.normal(size=4)
    same = eval_kernel(train, train, theta, kernel_cfg_2q)
    np.testing.assert_allclose(same.values, train_kernel(train, theta, kernel_cfg_2q).values, atol=1e-10)
    assert same.kind is KernelKind.RECTANGULAR_EVAL

    evals = rng.uniform(0, 1, size=(2, 2))
    k = eval_kernel(evals, train, theta, kernel_cfg_2q).values
    assert k.shape == (2, 3)
    for i in range(2):
        for j in range(3):
            assert k[i, j] == pytest.approx(kernel_entry(evals[i], train[j], theta, kernel_cfg_2q), abs=1e-12)


def test_eval_kernel_with_no_rows(kernel_cfg_2q):
    k = eval_kernel(np.zeros((0, 2)), np.ones((4, 2)), np.zeros(4), kernel_cfg_2q)
    assert k.shape == (0, 4)


def test_kernel_shape_checks(kernel_cfg_2q):
    with pytest.raises(ShapeError):
        train_kernel(np.zeros((3, 3)), np.zeros(4), kernel_cfg_2q)
    with pytest.raises(ShapeError):
        train_kernel(np.zeros((3, 2)), np.zeros(5), kernel_cfg_2q)


def test_threaded_preparation_is_identical(kernel_cfg_2q):
    rng = np.random.default_rng(6)
    z = rng.uniform(0, 1, size=(10, 2))
    theta = rng.normal(size=4)
    threaded = kernel_cfg_2q.model_copy(update={"n_threads": 4})
    np.testing.assert_array_equal(prepare_states(z, theta, kernel_cfg_2q), prepare_states(z, theta, threaded))


def test_literal_ordering_cancels_the_ansatz():
    z = np.random.default_rng(30).uniform(0, 1, size=(5, 2))
    literal_cfg = KernelConfig.for_qubits(2, ordering=Ordering.LITERAL_EQ3)
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        first = train_kernel(z, rng.uniform(-pi, pi, 4), literal_cfg).values
        second = train_kernel(z, rng.uniform(-pi, pi, 4), literal_cfg).values
        assert np.max(np.abs(first - second)) < 1e-9


def test_default_ordering_depends_on_theta():
    z = np.random.default_rng(30).uniform(0, 1, size=(5, 2))
    cfg = KernelConfig.for_qubits(2)
    gaps = []
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        first = train_kernel(z, rng.uniform(-pi, pi, 4), cfg).values
        second = train_kernel(z, rng.uniform(-pi, pi, 4), cfg).values
        gaps.append(np.max(np.abs(first - second)))
    assert max(gaps) > 0.01


def test_train_kernel_is_permutation_equivariant(kernel_cfg_2q):
    rng = np.random.default_rng(12)
    z = rng.uniform(0, 1, size=(7, 2))
    theta = rng.normal(size=4)
    perm = rng.permutation(7)
    k = train_kernel(z, theta, kernel_cfg_2q).values
    np.testing.assert_allclose(train_kernel(z[perm], theta, kernel_cfg_2q).values, k[np.ix_(perm, perm)], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gram_matrix_properties(seed, kernel_cfg_2q):
    rng = np.random.default_rng(seed)
    k = train_kernel(rng.uniform(0, 1, size=(8, 2)), rng.normal(size=4), kernel_cfg_2q).values
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_array_equal(np.diag(k), 1.0)
    assert k.min() >= 0.0 and k.max() <= 1.0 + 1e-12
    assert np.linalg.eigvalsh(k).min() >= -1e-10


def test_single_qubit_kernel_matches_cos_squared_on_random_pairs():
    cfg = KernelConfig.for_qubits(1)
    pairs = np.random.default_rng(13).uniform(0, pi, size=(100, 2))
    for z1, z2 in pairs:
        assert kernel_entry([z1], [z2], np.zeros(2), cfg) == pytest.approx(np.cos(z1 - z2) ** 2, abs=1e-10)


def test_twelve_class_scale_shape():
    cfg = KernelConfig.for_qubits(11)
    z = np.random.default_rng(0).uniform(0, 1, size=(120, 11))
    k = train_kernel(z, np.zeros(22), cfg)
    assert k.shape == (120, 120)
    np.testing.assert_array_equal(k.values, k.values.T)
