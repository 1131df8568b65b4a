import sys
import numpy as np
import pytest

from causal_rdf import DistortionMatrix, SourceModel


@pytest.fixture
def hamming2():
    return DistortionMatrix.hamming(2)


@pytest.fixture
def iid_binary():
    def make(n):
        return SourceModel.memoryless([0.5, 0.5], n)

    return make


@pytest.fixture
def markov_flip():
    def make(n, flip=0.2):
        return SourceModel.markov1([0.5, 0.5], [[1 - flip, flip], [flip, 1 - flip]], n)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
