import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_rdf.errors import DegenerateDistributionError, DomainError
from causal_rdf.probability import (
    Alphabet,
    CausalKernelFamily,
    OutputKernelFamily,
    StageKernel,
    decode_history,
    encode_history,
    entropy,
    is_prob_vector,
    kl_divergence,
    normalize,
)


def test_empty_history_encodes_to_zero():
    assert encode_history([], []).code == 0


def test_mixed_radix_code():
    assert encode_history([1, 0], [2, 2]).code == 2


def test_round_trip_exhaustive():
    radices = [2, 3, 2]
    codes = set()
    for t in itertools.product(*(range(r) for r in radices)):
        h = encode_history(t, radices)
        assert decode_history(h.code, radices) == t
        assert h.symbols == t
        codes.add(h.code)
    assert codes == set(range(12))


def test_symbol_out_of_range():
    with pytest.raises(DomainError):
        encode_history([2, 0], [2, 2])
    with pytest.raises(DomainError):
        decode_history(4, [2, 2])


def test_alphabet_rejects_empty():
    with pytest.raises(DomainError):
        Alphabet(0)
    assert Alphabet(3).size == 3


@pytest.mark.parametrize(
    "weights, expected",
    [([2, 2], [0.5, 0.5]), ([1, 0, 0], [1, 0, 0]), ([0.2, 0.3, 0.5], [0.2, 0.3, 0.5])],
)
def test_normalize(weights, expected):
    np.testing.assert_allclose(normalize(weights), expected, atol=1e-15, rtol=0)


def test_normalize_all_zero():
    with pytest.raises(DegenerateDistributionError):
        normalize([0, 0])


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert kl_divergence([0.5, 0.5], [1, 0]) == math.inf


def test_entropy_uniform():
    assert entropy([0.25] * 4) == pytest.approx(math.log(4))


simplex = st.integers(2, 5).flatmap(
    lambda k: st.tuples(
        st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k),
        st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k),
    )
)


@settings(max_examples=200, deadline=None)
@given(simplex)
def test_gibbs_inequality(pair):
    p, q = normalize(pair[0]), normalize(pair[1])
    d = kl_divergence(p, q)
    assert d >= 0
    assert kl_divergence(p, p) == 0.0
    if d == 0:
        np.testing.assert_allclose(p, q, atol=1e-12)
    if np.max(np.abs(p - q)) > 1e-6:
        assert d > 0


def test_stage_kernel_row_count():
    fam = CausalKernelFamily.uniform(2, 3, 2)
    for i, stg in enumerate(fam.stages):
        assert stg.rows.shape == (2**i * 3 ** (i + 1), 2)
        assert all(is_prob_vector(r) for r in stg.rows)


def test_stage_kernel_rejects_bad_rows():
    with pytest.raises(DomainError):
        StageKernel(0, 2, 2, np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(DomainError):
        StageKernel(1, 2, 2, np.full((2, 2), 0.5))


def test_stage_kernel_is_immutable():
    fam = CausalKernelFamily.uniform(1, 2, 2)
    with pytest.raises(ValueError):
        fam.stages[0].table[0, 0] = 1.0


def test_row_lookup_matches_mixed_radix_code():
    fam = CausalKernelFamily.random(2, 2, 3, np.random.default_rng(1))
    st2 = fam.stages[2]
    for ys in itertools.product(range(3), repeat=2):
        for xs in itertools.product(range(2), repeat=3):
            code = encode_history(ys + xs, st2.history_shape).code
            np.testing.assert_array_equal(st2.rows[code], st2.row(ys, xs))


def test_markov_tables_expand():
    r1 = np.array([[[0.9, 0.1], [0.2, 0.8]], [[0.6, 0.4], [0.3, 0.7]]])  # (y0, x1, y1)
    fam = CausalKernelFamily.from_markov_tables([np.array([[0.7, 0.3], [0.4, 0.6]]), r1], nx=2)
    for y0, x0, x1 in itertools.product(range(2), repeat=3):
        np.testing.assert_array_equal(fam.stages[1].row([y0], [x0, x1]), r1[y0, x1])


def test_output_family_shapes():
    nu = OutputKernelFamily.uniform(2, 3)
    assert [t.shape for t in nu.stages] == [(3,), (3, 3), (3, 3, 3)]
    with pytest.raises(DomainError):
        OutputKernelFamily((np.array([0.5, 0.4]),))
