import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_rdf.errors import CapacityError, DomainError
from causal_rdf.probability import CausalKernelFamily
from causal_rdf.source import (
    MAX_TABLE_ENTRIES,
    check_capacity,
    SourceModel,
    build_joint,
    joint_source_measure,
    posterior_source_history,
)

import bruteforce as bf


def test_memoryless_uniform_joint():
    mu = joint_source_measure(SourceModel.memoryless([0.5, 0.5], 1))
    np.testing.assert_allclose(mu.table, np.full((2, 2), 0.25))


def test_deterministic_chain():
    mu = joint_source_measure(SourceModel.markov1([1, 0], np.eye(2), 2))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 1.0
    np.testing.assert_array_equal(mu.table, expected)


def test_markov_hand_product():
    mu = joint_source_measure(SourceModel.markov1([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]], 1))
    assert mu.table[0, 0] == pytest.approx(0.4)
    assert mu.table[0, 1] == pytest.approx(0.1)


def test_general_source_matches_enumeration(rng):
    stages = [rng.dirichlet(np.ones(3), size=(3,) * i) for i in range(3)]
    model = SourceModel.general(stages)
    mu = joint_source_measure(model)
    for xs in itertools.product(range(3), repeat=3):
        assert mu.table[xs] == pytest.approx(bf.source_prob(model, xs), abs=1e-15)


def test_capacity_error():
    with pytest.raises(CapacityError):
        joint_source_measure(SourceModel.memoryless([0.5, 0.5], 30))
    # 4^8 source entries fit, but the (x^n, y^n) table would hold 16^8
    assert 4**8 <= MAX_TABLE_ENTRIES
    joint_source_measure(SourceModel.memoryless([0.25] * 4, 7))
    with pytest.raises(CapacityError):
        check_capacity(7, 4, 4)


def test_bad_source_rows():
    with pytest.raises(DomainError):
        SourceModel.markov1([0.5, 0.5], [[0.9, 0.2], [0.5, 0.5]], 1)
    with pytest.raises(DomainError):
        SourceModel(1, 2, "hidden")


def test_uniform_kernel_joint():
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 2)
    mu = joint_source_measure(model)
    joint = build_joint(mu, CausalKernelFamily.uniform(2, 2, 2))
    expected = np.broadcast_to(mu.table[..., None, None, None] * 2.0**-3, (2,) * 6)
    np.testing.assert_allclose(joint.table, expected, atol=1e-15)


def test_copy_kernel_joint():
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 1)
    mu = joint_source_measure(model)
    joint = build_joint(mu, CausalKernelFamily.copy_kernel(1, 2))
    for xs, ys in itertools.product(itertools.product(range(2), repeat=2), repeat=2):
        assert joint.table[xs + ys] == pytest.approx(mu.table[xs] if xs == ys else 0.0)
    np.testing.assert_allclose(joint.marginal_y, mu.table)


def test_random_joint_matches_enumeration(rng):
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 1)
    q = CausalKernelFamily.random(1, 2, 3, rng)
    joint = build_joint(joint_source_measure(model), q)
    ref = bf.enumerate_joint(model, q)
    for (xs, ys), p in ref.items():
        assert joint.table[xs + ys] == pytest.approx(p, abs=1e-15)
    np.testing.assert_allclose(joint.table.sum(axis=(0, 1)), joint.marginal_y, atol=1e-12)


def test_shape_mismatch():
    mu = joint_source_measure(SourceModel.memoryless([0.5, 0.5], 1))
    with pytest.raises(DomainError):
        build_joint(mu, CausalKernelFamily.uniform(2, 2, 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(2, 3), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_marginal_consistency(n, nx, ny, seed):
    g = np.random.default_rng(seed)
    model = SourceModel.general([g.dirichlet(np.ones(nx), size=(nx,) * i) for i in range(n + 1)])
    mu = joint_source_measure(model)
    joint = build_joint(mu, CausalKernelFamily.random(n, nx, ny, g))
    np.testing.assert_allclose(joint.marginal_x(), mu.table, atol=1e-10)
    assert abs(joint.table.sum() - 1) < 1e-10
    np.testing.assert_allclose(joint.table.sum(axis=joint.x_axes()), joint.marginal_y, atol=1e-10)


def test_build_joint_is_causal(rng):
    """P(y_i | x^n, y^{i-1}) computed from the joint ignores x_{i+1..n}."""
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 2)
    q = CausalKernelFamily.random(2, 2, 2, rng)
    ref = bf.enumerate_joint(model, q)
    joint = build_joint(joint_source_measure(model), q)
    for i in range(3):
        for xs in itertools.product(range(2), repeat=3):
            for yh in itertools.product(range(2), repeat=i):
                num = [sum(p for (a, b), p in ref.items() if a == xs and b[:i] == yh and b[i] == y) for y in range(2)]
                cond = np.array(num) / sum(num)
                np.testing.assert_allclose(cond, q.stages[i].row(yh, xs[: i + 1]), atol=1e-12)
    assert joint.table.shape == (2,) * 6


def test_posterior_stage_zero_is_prior():
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 1)
    mu = joint_source_measure(model)
    joint = build_joint(mu, CausalKernelFamily.random(1, 2, 2, np.random.default_rng(0)))
    np.testing.assert_allclose(posterior_source_history(joint, 0, []), [0.3, 0.7])


def test_posterior_uninformative_channel():
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 2)
    mu = joint_source_measure(model)
    rows = [np.array([0.2, 0.8]), np.array([[0.5, 0.5], [0.9, 0.1]]), np.full((2, 2, 2), 0.5)]
    # rows depend only on y^{i-1}: expand to full layout
    tables = [
        np.broadcast_to(rows[0], (2, 2)),
        np.broadcast_to(rows[1][:, None, None, :], (2, 2, 2, 2)),
        np.broadcast_to(rows[2][:, :, None, None, None, :], (2, 2, 2, 2, 2, 2)),
    ]
    joint = build_joint(mu, CausalKernelFamily.from_tables(tables, 2, 2))
    for i in range(3):
        prior = mu.prefix(i).reshape(-1)
        for yh in itertools.product(range(2), repeat=i):
            np.testing.assert_allclose(posterior_source_history(joint, i, yh), prior, atol=1e-12)


def test_posterior_matches_bayes_enumeration(rng):
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 1)
    q = CausalKernelFamily.random(1, 2, 2, rng)
    ref = bf.enumerate_joint(model, q)
    joint = build_joint(joint_source_measure(model), q)
    for i in range(2):
        for yh in itertools.product(range(2), repeat=i):
            expected = bf.posterior(ref, i, yh, 2)
            expected /= expected.sum()
            got = posterior_source_history(joint, i, yh)
            np.testing.assert_allclose(got, expected, atol=1e-12)
            assert abs(got.sum() - 1) < 1e-12 and np.all(got >= 0)


def test_posterior_null_history_returns_prior():
    model = SourceModel.memoryless([0.4, 0.6], 1)
    mu = joint_source_measure(model)
    joint = build_joint(mu, CausalKernelFamily.copy_kernel(1, 2))
    # copy kernel: y_0 = x_0, so no history is null; force one with a deterministic stage 0
    q = CausalKernelFamily.from_tables([np.array([[1.0, 0.0], [1.0, 0.0]]), joint_kernel_stage1()], 2, 2)
    joint = build_joint(mu, q)
    np.testing.assert_allclose(posterior_source_history(joint, 1, [1]), mu.prefix(1).reshape(-1))


def joint_kernel_stage1():
    return np.full((2, 2, 2, 2), 0.5)
