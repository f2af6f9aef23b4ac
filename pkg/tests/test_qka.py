import numpy as np
import pytest

from app.core.errors import NumericalError, ShapeError, SpsaDivergenceError
from app.learning.qka import (
    LossKind,
    SpsaConfig,
    ThetaInit,
    align,
    initial_theta,
    kta_loss,
    load_trace,
    spsa_gradient,
    spsa_minimize,
    svc_loss,
    svc_loss_terms,
    target_matrix,
    write_trace,
)
from app.quantum.qkernel import KernelConfig, train_kernel


def _quadratic(seed=11, dim=6):
    optimum = np.random.default_rng(seed).normal(size=dim)
    return lambda theta: float(np.sum((theta - optimum) ** 2))


def _bumpy(theta):
    return float(np.sum((theta - 1.0) ** 2) + 0.5 * np.sin(5.0 * theta).sum())


def _clustered_latents(n_classes, per_class, dim, seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.2, 0.8, size=(n_classes, dim))
    labels = np.repeat(np.arange(n_classes), per_class)
    latents = np.clip(centers[labels] + 0.05 * rng.normal(size=(labels.size, dim)), 0.0, 1.0)
    return latents, labels


def test_target_matrix():
    np.testing.assert_array_equal(target_matrix([0, 0, 1]).values, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    np.testing.assert_array_equal(target_matrix([2, 2, 2]).values, np.ones((3, 3)))
    np.testing.assert_array_equal(target_matrix([0, 1, 2, 3]).values, np.eye(4))


def test_svc_loss_prefers_separating_kernel():
    labels = [0, 0, 1, 1]
    separated = np.kron(np.eye(2), np.ones((2, 2)))
    assert svc_loss(separated, labels) < svc_loss(np.ones((4, 4)), labels)
    assert svc_loss(separated, labels) == pytest.approx(1.0, abs=1e-6)
    assert svc_loss(np.ones((4, 4)), labels) == pytest.approx(4.0)


@pytest.mark.parametrize("c_reg, expected", [(10.0, 1.0), (1.0, 1.0), (0.5, 0.75)])
def test_svc_loss_two_point_hand_value(c_reg, expected):
    assert svc_loss(np.eye(2), [0, 1], c_reg) == pytest.approx(expected)


def test_svc_loss_is_invariant_to_relabeling():
    latents, labels = _clustered_latents(3, 3, 2, seed=0)
    k = train_kernel(latents, np.random.default_rng(1).normal(size=4), KernelConfig.for_qubits(2))
    relabeled = np.array([2, 0, 1])[labels]
    assert svc_loss(k, relabeled) == pytest.approx(svc_loss(k, labels), rel=1e-9)


def test_svc_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        svc_loss(np.eye(3), [0, 1])


def test_kta_loss_values():
    t = target_matrix([0, 0, 1])
    assert kta_loss(t.values, t) == pytest.approx(-1.0, abs=1e-15)
    assert kta_loss(np.eye(4), np.eye(4)) == -1.0
    assert kta_loss(np.ones((4, 4)), np.eye(4)) == pytest.approx(-0.5)
    with pytest.raises(NumericalError):
        kta_loss(np.zeros((2, 2)), np.eye(2))


def test_spsa_converges_on_quadratic():
    cfg = SpsaConfig(maxiter=200, learning_rate=0.05, perturbation=0.1, allowed_increase=0.0, seed=3)
    state = spsa_minimize(_quadratic(), np.zeros(6), cfg)
    assert len(state.trace) == 200
    assert state.final_loss <= 0.1 * state.initial_loss


def test_blocking_keeps_accepted_loss_non_increasing():
    cfg = SpsaConfig(maxiter=60, learning_rate=0.2, perturbation=0.1, allowed_increase=0.0, seed=4)
    state = spsa_minimize(_bumpy, np.zeros(3), cfg)
    accepted = [state.initial_loss] + [step.current_loss for step in state.trace]
    assert all(b <= a for a, b in zip(accepted, accepted[1:]))
    for previous, step in zip(state.trace, state.trace[1:]):
        if not step.accepted:
            assert step.theta == previous.theta


def test_identical_seeds_give_identical_traces():
    cfg = SpsaConfig(maxiter=25, seed=9)
    first = spsa_minimize(_bumpy, np.zeros(3), cfg)
    second = spsa_minimize(_bumpy, np.zeros(3), cfg)
    assert [s.to_record() for s in first.trace] == [s.to_record() for s in second.trace]


def test_unblocked_trace_records_estimated_losses():
    cfg = SpsaConfig(maxiter=5, blocking=False, seed=1)
    state = spsa_minimize(_quadratic(), np.zeros(6), cfg)
    assert all(step.accepted and step.estimated for step in state.trace)
    assert state.n_evaluations == 10


def test_resume_from_trace_file_reproduces_full_run(tmp_path):
    cfg = SpsaConfig(maxiter=12, learning_rate=0.1, seed=5)
    full = spsa_minimize(_bumpy, np.zeros(3), cfg)
    path = write_trace(full.trace[:5], tmp_path / "trace.jsonl")
    resumed = spsa_minimize(_bumpy, np.zeros(3), cfg, resume=load_trace(path))
    assert [s.to_record() for s in resumed.trace] == [s.to_record() for s in full.trace]
    np.testing.assert_array_equal(resumed.theta, full.theta)


def test_divergent_objective_raises_with_partial_trace():
    calls = {"n": 0}

    def objective(theta):
        calls["n"] += 1
        return float("nan") if calls["n"] > 7 else float(np.sum(theta ** 2))

    with pytest.raises(SpsaDivergenceError) as info:
        spsa_minimize(objective, np.ones(2), SpsaConfig(maxiter=10))
    assert len(info.value.trace) == 2


def test_initial_theta():
    np.testing.assert_array_equal(initial_theta(4), np.zeros(4))
    uniform = initial_theta(8, ThetaInit.UNIFORM, seed=2)
    assert uniform.shape == (8,) and np.all(np.abs(uniform) <= 0.1)
    np.testing.assert_array_equal(uniform, initial_theta(8, "uniform", seed=2))


def test_align_with_zero_budget_returns_theta0():
    latents, labels = _clustered_latents(2, 3, 2, seed=1)
    theta0 = np.array([0.1, 0.2, 0.3, 0.4])
    state = align(latents, labels, KernelConfig.for_qubits(2), SpsaConfig(maxiter=0), theta0=theta0)
    np.testing.assert_array_equal(state.theta, theta0)
    assert state.trace == []


@pytest.mark.parametrize("blocking, builds", [(True, 1 + 3 * 3), (False, 3 * 2)])
def test_align_kernel_build_count(blocking, builds):
    latents, labels = _clustered_latents(2, 3, 2, seed=2)
    state = align(latents, labels, KernelConfig.for_qubits(2), SpsaConfig(maxiter=3, blocking=blocking))
    assert len(state.trace) == 3
    assert state.n_evaluations == builds


def test_align_rejects_wrong_latent_width():
    latents, labels = _clustered_latents(2, 3, 3, seed=2)
    with pytest.raises(ShapeError):
        align(latents, labels, KernelConfig.for_qubits(2), SpsaConfig(maxiter=1))


@pytest.mark.parametrize("loss", [LossKind.SVC, LossKind.KTA])
def test_desk_scale_alignment_does_not_increase_loss(loss):
    latents, labels = _clustered_latents(3, 8, 4, seed=3)
    cfg = SpsaConfig(maxiter=8, allowed_increase=0.0, seed=0)
    state = align(latents, labels, KernelConfig.for_qubits(4), cfg, loss=loss)
    assert state.final_loss <= state.initial_loss
    assert state.theta.shape == (8,)


def test_spsa_gradient_is_unbiased_on_quadratic():
    optimum = np.random.default_rng(11).normal(size=6)
    theta = np.zeros(6)
    analytic = 2.0 * (theta - optimum)
    estimate, sampled = spsa_gradient(_quadratic(), theta, 0.1, np.random.default_rng(0), resamplings=20_000)
    assert len(sampled) == 40_000
    assert np.linalg.norm(estimate - analytic) <= 0.05 * np.linalg.norm(analytic)


def test_svc_loss_terms_reports_capped_pairs():
    labels = [0, 0, 1, 1, 2, 2]
    _, capped = svc_loss_terms(np.eye(6), labels, 1.0)
    assert capped == []
    terms, capped = svc_loss_terms(np.eye(6), labels, 1.0, max_iter=1)
    assert capped == [(0, 1), (0, 2), (1, 2)]
    assert all(np.isfinite(v) for v in terms.values())


def test_align_counts_capped_svm_solves():
    latents, labels = _clustered_latents(3, 3, 2, seed=4)
    cfg = SpsaConfig(maxiter=2, seed=0)
    assert align(latents, labels, KernelConfig.for_qubits(2), cfg).capped_pairs == 0
    state = align(latents, labels, KernelConfig.for_qubits(2), cfg, svm_max_iter=1)
    assert state.n_evaluations == 1 + 2 * 3
    assert state.capped_pairs == state.n_evaluations * 3
