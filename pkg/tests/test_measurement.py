import numpy as np
import pytest
from numpy.testing import assert_allclose

from qdiscern.core import PureState, evolve_constant, pauli, propagator, random_hermitian, random_state
from qdiscern.errors import NormalizationError, PositivityError, StationaryStateError
from qdiscern.information import classical_fisher, quantum_fisher_energy
from qdiscern.measurement import (
    OutcomeDistribution,
    Povm,
    outcome_distribution,
    projector_test_povm,
    random_povm,
    rho_derivatives,
    sld_optimal_povm,
    trivial_povm,
)


def test_povm_validation():
    with pytest.raises(PositivityError):
        Povm((np.diag([1.5, 0]), np.diag([-0.5, 1])))
    with pytest.raises(NormalizationError):
        Povm((np.diag([1, 0]), np.diag([0, 0.9])))
    with pytest.raises(ValueError):
        Povm((np.eye(2),))


def test_distribution_validation():
    with pytest.raises(NormalizationError):
        OutcomeDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        OutcomeDistribution([1.1, -0.1])
    assert_allclose(OutcomeDistribution([1.0, -1e-14]).probs, [1.0, 0.0])


def test_projector_on_own_state(plus):
    p = outcome_distribution(plus, projector_test_povm(plus))
    assert_allclose(p.probs, [1, 0], atol=1e-15)


@pytest.mark.parametrize("t", [0.05, 0.4, 1.2])
def test_projector_after_evolution(plus, sz, t):
    p = outcome_distribution(evolve_constant(sz, t, 1.0, plus), projector_test_povm(plus))
    assert_allclose(p.probs, [np.cos(t) ** 2, np.sin(t) ** 2], atol=1e-14)


def test_trivial_povm(rng):
    p = outcome_distribution(random_state(2, rng), trivial_povm(2))
    assert_allclose(p.probs, [0.5, 0.5], atol=1e-15)


def test_projector_povm_forms(up, plus):
    els = projector_test_povm(up).elements
    assert_allclose(els[0].matrix, np.diag([1, 0]))
    assert_allclose(els[1].matrix, np.diag([0, 1]))
    els = projector_test_povm(plus).elements
    I, X = np.eye(2), pauli("x").matrix
    assert_allclose(els[0].matrix, (I + X) / 2, atol=1e-15)
    assert_allclose(els[1].matrix, (I - X) / 2, atol=1e-15)


def test_rho_derivative_qubit(plus, sz):
    _, drho, d2rho = rho_derivatives(plus, sz)
    assert_allclose(drho, pauli("y").matrix, atol=1e-15)
    # second derivative matches a central difference of rho(t)
    h = 1e-4
    rp = evolve_constant(sz, h, 1.0, plus).density_matrix()
    rm = PureState(propagator(sz, -h, 1.0) @ plus.amplitudes).density_matrix()
    assert_allclose((rp - 2 * plus.density_matrix() + rm) / h**2, d2rho, atol=1e-6)


def test_sld_qubit_sigma_y_basis(plus, sz):
    povm = sld_optimal_povm(plus, sz)
    vecs = [np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)]
    targets = [np.outer(v, v.conj()) for v in vecs]
    got = [e.matrix for e in povm]
    assert len(got) == 2
    for T in targets:
        assert min(np.max(np.abs(G - T)) for G in got) < 1e-14


def test_sld_stationary(up, sz):
    with pytest.raises(StationaryStateError):
        sld_optimal_povm(up, sz)


def test_sld_random_d4_attains(rng):
    psi, H = random_state(4, rng), random_hermitian(4, rng)
    povm = sld_optimal_povm(psi, H)
    Js = quantum_fisher_energy(psi, H)
    assert classical_fisher(psi, H, 1.0, povm) == pytest.approx(Js, rel=1e-8)


def test_random_povm_deterministic():
    a, b = random_povm(2, 2, seed=7), random_povm(2, 2, seed=7)
    for x, y in zip(a, b):
        assert np.array_equal(x.matrix, y.matrix)
    c = random_povm(2, 2, seed=8)
    assert not np.array_equal(a.elements[0].matrix, c.elements[0].matrix)


@pytest.mark.parametrize("d,m", [(2, 2), (3, 5), (4, 6), (8, 3)])
def test_random_povm_invariants(d, m):
    for seed in range(10):
        povm = random_povm(d, m, seed)
        assert len(povm) == m
        S = sum(e.matrix for e in povm)
        assert np.max(np.abs(S - np.eye(d))) <= 1e-10
        assert all(np.linalg.eigvalsh(e.matrix)[0] >= -1e-10 for e in povm)


def test_outcome_probabilities_sum_to_one(rng):
    for d in (2, 3, 5):
        povm = random_povm(d, 4, int(rng.integers(1 << 30)))
        p = outcome_distribution(random_state(d, rng), povm)
        assert abs(p.probs.sum() - 1) < 1e-12
        assert np.all(p.probs >= 0)
