"""Least squares over the probability simplex.

Solves min ||A x - b||^2 subject to x >= 0, sum(x) = 1 with an accelerated
projected-gradient iteration.  The problem sizes here are tiny (x has 2**n
entries for n <= 10) but A is often ill conditioned, so the solver works on
the normal equations with a step size from the largest eigenvalue of A^T A
and restarts its momentum whenever the objective moves the wrong way.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def project_to_simplex(v):
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise NumericalError("simplex projection needs a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _largest_eigenvalue(M, iters=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(iters):
        y = M @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        lam = norm
        x = y / norm
    return float(lam)


def simplex_least_squares(A, b, x0=None, tol=1e-10, max_iters=100_000):
    """Minimize ||A x - b||^2 over the simplex; returns (x, info).

    info carries the iteration count, whether the tolerance was met, and the
    final objective value.  x0, when given, is projected and used as the
    starting point.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != b.size:
        raise NumericalError(f"shape mismatch: A is {A.shape}, b has {b.size} entries")
    d = A.shape[1]
    AtA = A.T @ A
    Atb = A.T @ b
    lam = _largest_eigenvalue(AtA)
    if lam <= 0.0:
        raise NumericalError("design matrix has no signal; cannot take gradient steps")
    step = 1.0 / lam

    def objective(x):
        r = A @ x - b
        return float(r @ r)

    x = project_to_simplex(np.full(d, 1.0 / d) if x0 is None else np.asarray(x0, dtype=float))
    y = x
    t = 1.0
    f_prev = objective(x)
    converged = False
    iterations = max_iters
    for k in range(max_iters):
        grad = AtA @ y - Atb
        x_new = project_to_simplex(y - step * grad)
        f_new = objective(x_new)
        if f_new > f_prev:  # momentum overshoots; restart from the last point
            y = x
            t = 1.0
            grad = AtA @ y - Atb
            x_new = project_to_simplex(y - step * grad)
            f_new = objective(x_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        delta = float(np.max(np.abs(x_new - x)))
        x, t, f_prev = x_new, t_new, f_new
        if delta < tol:
            converged = True
            iterations = k + 1
            break
    return x, {"iterations": iterations, "converged": converged, "objective": f_prev}
