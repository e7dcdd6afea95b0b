import numpy as np
import pytest

from models.connection import Connection
from models.fields import ConnectionWord
from processors.connection import (
    fourier_matrix,
    gauge_transform,
    hadamard_connection,
    parallel_connection,
    random_gauge,
    renormalize,
)
from processors.graphs import builtin_example, compute_pf
from utils.console import set_quiet
from utils.fixtures import load_connection


@pytest.fixture(autouse=True)
def quiet():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fourier2():
    return hadamard_connection(fourier_matrix(2))


@pytest.fixture
def fourier3():
    return hadamard_connection(fourier_matrix(3))


@pytest.fixture
def identity3():
    return hadamard_connection(np.eye(3))


@pytest.fixture
def gauged_fourier3(fourier3):
    gauge = random_gauge(fourier3.config, np.random.default_rng(7))
    return gauge_transform(fourier3, gauge)


@pytest.fixture
def parallel3():
    return parallel_connection(fourier_matrix(3))


@pytest.fixture
def example1_like(rng):
    """Random values on the cells of example1; not unitary, only the weights matter"""
    cfg = builtin_example("example1")
    values = rng.standard_normal(cfg.edge_counts) + 1j * rng.standard_normal(cfg.edge_counts)
    return Connection.from_array(cfg, compute_pf(cfg), values)


@pytest.fixture
def stored_fourier3():
    return load_connection("fourier3.json")


def closed_word(w):
    return ConnectionWord((w, renormalize(w, "prime")))


@pytest.fixture
def word_fourier2(fourier2):
    return closed_word(fourier2)


@pytest.fixture
def word_fourier3(fourier3):
    return closed_word(fourier3)
