import itertools
import math

import numpy as np
import pytest

from models.connection import Connection, GaugePair
from models.errors import GaugeError, GraphMismatchError
from models.graph import FAIL, PASS, PFData
from processors.connection import (
    check_biunitarity,
    check_unitarity,
    direct_sum,
    flip_value,
    fourier_matrix,
    gauge_transform,
    hadamard_connection,
    intertwiner_space,
    is_irreducible,
    mirror_value,
    mu_factor,
    parallel_connection,
    product,
    random_gauge,
    random_unitary,
    renormalize,
    trivial_connection,
)
from processors.graphs import balance_residuals, make_config


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_fourier_spin_model_is_biunitary(n):
    w = hadamard_connection(fourier_matrix(n))
    report = check_biunitarity(w)
    assert report.passed
    assert report.max_defect < 1e-10
    assert len(w.cells()) == n * n


def test_identity_spin_model_is_unitary_only(identity3):
    assert check_unitarity(identity3).passed
    report = check_biunitarity(identity3)
    assert not report.passed
    assert report.status_of("unitarity") == PASS
    assert report.status_of("prime_unitarity") == FAIL
    assert report.max_defect == pytest.approx(2.0)


def test_non_square_matrix_is_rejected():
    with pytest.raises(GraphMismatchError):
        hadamard_connection(np.ones((2, 3)))


def test_small_perturbation_breaks_biunitarity(fourier3):
    values = np.array(fourier3.values)
    values[0, 0, 0, 0] += 1e-3
    perturbed = Connection.from_array(fourier3.config, fourier3.pf, values)
    report = check_biunitarity(perturbed)
    assert not report.passed
    assert report.max_defect > 1e-4


def test_values_off_cells_are_dropped(fourier2):
    values = np.ones(fourier2.config.edge_counts)
    w = Connection.from_array(fourier2.config, fourier2.pf, values)
    assert w.value(0, 1, 0, 0) == 0
    assert w.value(1, 0, 0, 1) == 1


def test_mu_factor_on_spin_model(fourier3):
    assert np.allclose(mu_factor(fourier3), math.sqrt(3))


def test_prime_values(fourier3):
    prime = renormalize(fourier3, "prime")
    for e0, e1, e2, e3 in fourier3.cells():
        expected = math.sqrt(3) * np.conj(fourier3.values[e0, e1, e2, e3])
        assert prime.values[e0, e3, e2, e1] == pytest.approx(expected)
    assert prime.config.sizes == (3, 1, 3, 1)


@pytest.mark.parametrize("mode", ["prime", "bar"])
def test_renormalization_is_an_involution(fourier3, example1_like, mode):
    for w in (fourier3, example1_like):
        twice = renormalize(renormalize(w, mode), mode)
        assert np.abs(twice.values - w.values).max() < 1e-12


def test_bar_then_prime_is_bar_prime(fourier3, example1_like):
    for w in (fourier3, example1_like):
        composed = renormalize(renormalize(w, "bar"), "prime")
        direct = renormalize(w, "bar_prime")
        assert np.abs(composed.values - direct.values).max() < 1e-12
        assert np.abs(direct.values - w.values.transpose(2, 3, 0, 1)).max() < 1e-12


def test_unknown_mode(fourier2):
    with pytest.raises(ValueError):
        renormalize(fourier2, "twist")


def test_mirror_and_flip(fourier3):
    for cell in fourier3.cells():
        value = fourier3.value(*cell)
        assert mirror_value(fourier3, *cell) == pytest.approx(value.conjugate())
        assert flip_value(fourier3, *cell) == pytest.approx(math.sqrt(3) * value)


@pytest.mark.parametrize("seed", range(50))
def test_gauge_preserves_biunitarity(fourier3, parallel3, seed):
    rng = np.random.default_rng(seed)
    for w in (fourier3, parallel3):
        gauged = gauge_transform(w, random_gauge(w.config, rng))
        assert check_biunitarity(gauged).passed
        assert check_biunitarity(product(gauged, renormalize(gauged, "bar"))).max_defect < 1e-8
        assert check_biunitarity(direct_sum(gauged, w)).max_defect < 1e-8


def test_gauge_must_be_unitary(parallel3):
    gauge = GaugePair(u=2 * np.eye(3), v=np.eye(3))
    with pytest.raises(GaugeError):
        gauge_transform(parallel3, gauge)


def test_gauge_must_respect_blocks(fourier3):
    gauge = GaugePair(u=fourier_matrix(3), v=np.eye(3))
    with pytest.raises(GaugeError):
        gauge_transform(fourier3, gauge)


def test_gauge_composition(parallel3, rng):
    g = random_gauge(parallel3.config, rng)
    h = random_gauge(parallel3.config, rng)
    stepwise = gauge_transform(gauge_transform(parallel3, g), h)
    at_once = gauge_transform(parallel3, g.compose(h))
    assert np.allclose(stepwise.values, at_once.values)
    back = gauge_transform(gauge_transform(parallel3, g), g.adjoint())
    assert np.allclose(back.values, parallel3.values)
    unchanged = gauge_transform(parallel3, GaugePair.identity(parallel3.config))
    assert np.array_equal(unchanged.values, parallel3.values)


def test_spin_models_are_irreducible(fourier2, fourier3):
    assert is_irreducible(fourier2)
    assert is_irreducible(fourier3)


def test_identity_spin_model_splits(identity3):
    assert len(intertwiner_space(identity3, identity3)) == 3
    assert not is_irreducible(identity3)


def test_intertwiner_recovers_gauge(fourier3):
    gauge = random_gauge(fourier3.config, np.random.default_rng(7))
    gauged = gauge_transform(fourier3, gauge)
    space = intertwiner_space(gauged, fourier3)
    assert len(space) == 1
    pair = space[0]
    scale = pair.u[0, 0] / gauge.u[0, 0]
    assert np.allclose(pair.u, scale * gauge.u)
    assert np.allclose(pair.v, scale * gauge.v.conj().T)


def test_direct_sum(fourier3):
    total = direct_sum(fourier3, fourier3)
    assert total.pf.beta1 == pytest.approx(2 * fourier3.pf.beta1)
    assert check_biunitarity(total).passed
    assert len(intertwiner_space(total, total)) == 4


def test_direct_sum_needs_same_horizontal_graphs(fourier2, fourier3):
    with pytest.raises(GraphMismatchError):
        direct_sum(fourier2, fourier3)


@pytest.mark.parametrize("name", ["fourier3", "parallel3"])
def test_product_with_dual_is_biunitary(name, request):
    w = request.getfixturevalue(name)
    total = product(w, renormalize(w, "bar"))
    assert max(balance_residuals(total.config, total.pf).values()) < 1e-9
    assert check_biunitarity(total).passed


def test_product_with_trivial_connection(fourier3):
    trivial = trivial_connection(fourier3)
    assert check_biunitarity(trivial).passed
    total = product(fourier3, trivial)
    assert np.allclose(total.values, fourier3.values)
    assert total.pf.beta1 == pytest.approx(fourier3.pf.beta1)


def test_product_needs_matching_middle_graph(fourier3):
    with pytest.raises(GraphMismatchError):
        product(fourier3, fourier3)


def test_random_parallel_connection_is_biunitary(rng):
    u = random_unitary(4, rng)
    assert np.allclose(u @ u.conj().T, np.eye(4))
    assert check_biunitarity(parallel_connection(u)).passed


def _single_cell(mu, value=1.0):
    cfg = make_config({slot: [(0, 0)] for slot in ("G0", "G1", "G2", "G3")}, (1, 1, 1, 1))
    pf = PFData(mu=tuple(np.array([m]) for m in mu), beta0=1.0, beta1=1.0)
    return Connection.from_array(cfg, pf, np.full((1, 1, 1, 1), value))


def test_prime_with_unequal_weights():
    # mu(s(xi0)) = 1, mu(s(xi2)) = 2, mu(r(xi2)) = 3, mu(r(xi0)) = 4
    w = _single_cell((1.0, 2.0, 3.0, 4.0))
    assert renormalize(w, "prime").value(0, 0, 0, 0) == pytest.approx(math.sqrt(3 / 8))
    assert renormalize(w, "bar").value(0, 0, 0, 0) == pytest.approx(math.sqrt(3 / 8))
    assert renormalize(w, "bar_prime").value(0, 0, 0, 0) == pytest.approx(1.0)


def _intertwines(w, pair):
    left = np.einsum("ab,xbyd->xayd", pair.u, w.values)
    right = np.einsum("xayc,cd->xayd", w.values, pair.v)
    return np.abs(left - right).max()


@pytest.mark.parametrize("name", ["identity3", "fourier3"])
def test_intertwiners_form_an_algebra(name, request):
    w = request.getfixturevalue(name)
    if name == "fourier3":
        w = direct_sum(w, gauge_transform(w, random_gauge(w.config, np.random.default_rng(3))))
    basis = intertwiner_space(w, w)
    assert len(basis) > 1
    for p in basis:
        assert _intertwines(w, p) < 1e-9
        assert _intertwines(w, p.adjoint()) < 1e-9
        for q in basis:
            assert _intertwines(w, GaugePair(u=p.u @ q.u, v=p.v @ q.v)) < 1e-9


def _dense_product(w1, w2, total):
    """Sum over the shared middle edge, cell by cell"""
    values = np.zeros(total.config.edge_counts, dtype=complex)
    left, right = total.config.g1.parts, total.config.g3.parts
    for e0, e4 in itertools.product(range(w1.config.g0.num_edges), range(w2.config.g2.num_edges)):
        for k1, (a1, b1) in enumerate(left):
            for k3, (a3, b3) in enumerate(right):
                for e2 in range(w1.config.g2.num_edges):
                    values[e0, k1, e4, k3] += w1.values[e0, a1, e2, a3] * w2.values[e2, b1, e4, b3]
    return values


@pytest.mark.parametrize("name", ["fourier3", "gauged_fourier3", "example1_like"])
def test_product_matches_dense_contraction(name, request):
    w = request.getfixturevalue(name)
    lower = renormalize(w, "bar")
    total = product(w, lower)
    assert np.abs(total.values - _dense_product(w, lower, total)).max() < 1e-12
