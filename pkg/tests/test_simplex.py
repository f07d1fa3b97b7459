import numpy as np
import pytest

from noisyor.errors import NumericalError
from noisyor.simplex import project_to_simplex, simplex_least_squares


def test_projection_hand_cases():
    # already on the simplex: unchanged
    v = np.array([0.2, 0.5, 0.3])
    assert np.allclose(project_to_simplex(v), v)
    # uniform shift cancels out
    assert np.allclose(project_to_simplex(v + 7.0), v)
    # one dominant coordinate collapses to a vertex
    assert np.allclose(project_to_simplex(np.array([10.0, 0.0, 0.0])), [1.0, 0.0, 0.0])
    # symmetric negative vector lands on the barycenter
    assert np.allclose(project_to_simplex(np.array([-3.0, -3.0])), [0.5, 0.5])
    # worked example: [0.8, 0.6] -> theta = 0.2 -> [0.6, 0.4]
    assert np.allclose(project_to_simplex(np.array([0.8, 0.6])), [0.6, 0.4])


def test_projection_output_is_distribution():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = project_to_simplex(rng.standard_normal(rng.integers(1, 12)))
        assert np.all(x >= 0)
        assert np.isclose(x.sum(), 1.0)


def test_projection_idempotent():
    rng = np.random.default_rng(8)
    for _ in range(20):
        x = project_to_simplex(rng.standard_normal(6) * 3)
        assert np.allclose(project_to_simplex(x), x, atol=1e-12)


def test_projection_rejects_empty():
    with pytest.raises(NumericalError):
        project_to_simplex(np.array([]))
    with pytest.raises(NumericalError):
        project_to_simplex(np.zeros((2, 2)))


def test_least_squares_recovers_interior_solution():
    rng = np.random.default_rng(11)
    truth = rng.dirichlet(np.ones(8))
    A = rng.standard_normal((40, 8))
    x, info = simplex_least_squares(A, A @ truth)
    assert info["converged"]
    assert np.allclose(x, truth, atol=1e-6)
    assert info["objective"] < 1e-12


def test_least_squares_inconsistent_system_projects():
    # unconstrained optimum is outside the simplex; solution sits on a face
    A = np.eye(2)
    b = np.array([2.0, -1.0])
    x, info = simplex_least_squares(A, b)
    assert np.allclose(x, [1.0, 0.0], atol=1e-8)
    assert info["converged"]
    # objective equals the distance to the vertex
    assert info["objective"] == pytest.approx(1.0 + 1.0, abs=1e-8)


def test_least_squares_warm_start():
    rng = np.random.default_rng(12)
    truth = rng.dirichlet(np.ones(4))
    A = rng.standard_normal((10, 4))
    b = A @ truth
    cold, _ = simplex_least_squares(A, b)
    warm, info = simplex_least_squares(A, b, x0=truth + 0.001 * rng.standard_normal(4))
    assert np.allclose(cold, warm, atol=1e-6)
    assert info["converged"]


def test_least_squares_shape_and_signal_errors():
    with pytest.raises(NumericalError):
        simplex_least_squares(np.ones((3, 2)), np.ones(4))
    with pytest.raises(NumericalError):
        simplex_least_squares(np.zeros((3, 2)), np.ones(3))


def test_least_squares_result_feasible_even_unconverged():
    rng = np.random.default_rng(13)
    A = rng.standard_normal((30, 6))
    b = rng.standard_normal(30)
    x, info = simplex_least_squares(A, b, max_iters=3)
    assert not info["converged"]
    assert info["iterations"] == 3
    assert np.all(x >= 0) and np.isclose(x.sum(), 1.0)
