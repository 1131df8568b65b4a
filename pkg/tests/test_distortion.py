import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bruteforce as bf
from causal_rdf.distortion import (
    DistortionMatrix,
    average_distortion,
    cumulative_distortion,
    minimum_distortion,
)
from causal_rdf.errors import DomainError
from causal_rdf.probability import CausalKernelFamily
from causal_rdf.source import SourceModel, build_joint, joint_source_measure


def test_cumulative_examples(hamming2):
    assert cumulative_distortion([0, 1, 1], [0, 1, 1], hamming2) == 0.0
    assert cumulative_distortion([0, 1, 0], [1, 1, 1], hamming2) == 2.0
    se = DistortionMatrix.squared_error([0.0, 1.0])
    assert cumulative_distortion([0, 1], [1, 1], se) == 1.0


def test_cumulative_errors(hamming2):
    with pytest.raises(DomainError):
        cumulative_distortion([0, 1], [0], hamming2)
    with pytest.raises(DomainError):
        cumulative_distortion([0, 2], [0, 1], hamming2)


def test_matrix_validation():
    with pytest.raises(DomainError):
        DistortionMatrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(DomainError):
        DistortionMatrix(np.array([1.0, 2.0]))
    m = DistortionMatrix.hamming(2, 3)
    assert m.rho.shape == (2, 3)
    with pytest.raises(ValueError):
        m.rho[0, 0] = 5.0


def test_block_table_matches_cumulative(rng):
    rho = DistortionMatrix(rng.random((2, 3)))
    table = rho.block_table(2)
    assert table.shape == (2, 2, 2, 3, 3, 3)
    for idx in np.ndindex(*table.shape):
        assert table[idx] == pytest.approx(cumulative_distortion(idx[:3], idx[3:], rho))


def test_average_copy_kernel_is_zero(hamming2, iid_binary):
    joint = build_joint(joint_source_measure(iid_binary(2)), CausalKernelFamily.copy_kernel(2, 2))
    assert average_distortion(joint, hamming2) == pytest.approx(0.0, abs=1e-15)


def test_average_independent_uniform(hamming2, iid_binary):
    joint = build_joint(joint_source_measure(iid_binary(1)), CausalKernelFamily.uniform(1, 2, 2))
    assert average_distortion(joint, hamming2) == pytest.approx(1.0)


def test_average_zero_matrix(iid_binary, rng):
    joint = build_joint(joint_source_measure(iid_binary(1)), CausalKernelFamily.random(1, 2, 2, rng))
    assert average_distortion(joint, DistortionMatrix(np.zeros((2, 2)))) == 0.0


def test_average_matches_enumeration(rng):
    model = SourceModel.markov1([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], 2)
    rho = DistortionMatrix(rng.random((2, 3)))
    q = CausalKernelFamily.random(2, 2, 3, rng)
    joint = build_joint(joint_source_measure(model), q)
    ref = bf.avg_distortion(bf.enumerate_joint(model, q), rho.rho)
    assert average_distortion(joint, rho) == pytest.approx(ref, abs=1e-13)


def test_average_shape_mismatch(iid_binary):
    joint = build_joint(joint_source_measure(iid_binary(1)), CausalKernelFamily.uniform(1, 2, 2))
    with pytest.raises(DomainError):
        average_distortion(joint, DistortionMatrix.hamming(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_linear_in_rho(seed, a, b):
    g = np.random.default_rng(seed)
    model = SourceModel.general([g.dirichlet(np.ones(2), size=(2,) * i) for i in range(2)])
    joint = build_joint(joint_source_measure(model), CausalKernelFamily.random(1, 2, 2, g))
    r1, r2 = g.random((2, 2)), g.random((2, 2))
    lhs = average_distortion(joint, DistortionMatrix(a * r1 + b * r2))
    rhs = a * average_distortion(joint, DistortionMatrix(r1)) + b * average_distortion(joint, DistortionMatrix(r2))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounded_between_min_and_max(seed):
    g = np.random.default_rng(seed)
    model = SourceModel.markov1(g.dirichlet(np.ones(3)), g.dirichlet(np.ones(3), size=3), 1)
    rho = DistortionMatrix(g.random((3, 2)))
    joint = build_joint(joint_source_measure(model), CausalKernelFamily.random(1, 3, 2, g))
    d = average_distortion(joint, rho)
    d_min = minimum_distortion([model.marginal(i) for i in range(2)], rho)
    assert d_min - 1e-12 <= d <= 2 * rho.rho.max() + 1e-12


def test_minimum_distortion_examples(hamming2):
    assert minimum_distortion([np.array([0.5, 0.5])] * 3, hamming2) == 0.0
    rho = DistortionMatrix(np.array([[1.0, 2.0], [3.0, 0.5]]))
    assert minimum_distortion([np.array([0.25, 0.75])], rho) == pytest.approx(0.25 + 0.375)
