"""Slow, loop-based reference computations shared by the tests.

Nothing here touches the vectorized code paths of the package: every
probability is obtained by enumerating sequences with itertools.
"""

import itertools
import math

import numpy as np


def source_prob(model, xs):
    p = 1.0
    for i, xi in enumerate(xs):
        if model.kind == "memoryless":
            p *= model.probs[xi]
        elif model.kind == "markov1":
            p *= model.initial[xi] if i == 0 else model.transition[xs[i - 1], xi]
        else:
            p *= model.stages[i][tuple(xs[: i + 1])]
    return p


def kernel_prob(q, xs, ys):
    p = 1.0
    for i, st in enumerate(q.stages):
        p *= st.table[tuple(ys[:i]) + tuple(xs[: i + 1]) + (ys[i],)]
    return p


def enumerate_joint(model, q):
    """dict (xs, ys) -> probability."""
    n1 = model.horizon + 1
    out = {}
    for xs in itertools.product(range(model.nx), repeat=n1):
        px = source_prob(model, xs)
        for ys in itertools.product(range(q.ny), repeat=n1):
            out[(xs, ys)] = px * kernel_prob(q, xs, ys)
    return out


def mutual_information(joint):
    px, py = {}, {}
    for (xs, ys), p in joint.items():
        px[xs] = px.get(xs, 0.0) + p
        py[ys] = py.get(ys, 0.0) + p
    return sum(p * math.log(p / (px[xs] * py[ys])) for (xs, ys), p in joint.items() if p > 0)


def avg_distortion(joint, rho):
    return sum(p * sum(rho[a, b] for a, b in zip(xs, ys)) for (xs, ys), p in joint.items())


def posterior(joint, i, y_hist, nx):
    """P(x^i | y^{i-1}) as a flat list in mixed-radix order."""
    acc = np.zeros(nx ** (i + 1))
    for (xs, ys), p in joint.items():
        if tuple(ys[:i]) == tuple(y_hist):
            code = 0
            for a in xs[: i + 1]:
                code = code * nx + a
            acc[code] += p
    return acc


def output_conditional(joint, i, y_hist, ny):
    """P(y_i | y^{i-1}) by summation."""
    acc = np.zeros(ny)
    for (xs, ys), p in joint.items():
        if tuple(ys[:i]) == tuple(y_hist):
            acc[ys[i]] += p
    return acc / acc.sum()


def binary_entropy(d):
    return -d * math.log(d) - (1 - d) * math.log(1 - d)


def binary_rd(d):
    """Per-letter rate distortion of a uniform binary source under Hamming distortion (nats)."""
    return math.log(2) - binary_entropy(d)
