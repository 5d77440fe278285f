"""Centralized reference solutions, independent of the distributed controller.

``optimal_trajectory`` solves the constrained problem at a single time;
``penalized_optimal_trajectory`` finds the common point where the summed
penalized gradients vanish.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError, InfeasibleError
from .penalty import in_domain, penalized_gradient, penalized_hessian, penalized_value
from .problem import ProblemInstance, global_cost

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


def golden_section(f, a: float, b: float, tol: float = 1e-12) -> float:
    """Minimize a unimodal ``f`` on ``[a, b]``; returns the midpoint of the final bracket."""
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(steps):
        h *= INV_PHI
        if yc < yd:
            b, d, yd = d, c, yc
            c = a + INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            d = a + INV_PHI * h
            yd = f(d)
    return 0.5 * (a + d) if yc < yd else 0.5 * (c + b)


def _bisect_boundary(worst, inside: float, outside: float) -> float:
    """Last feasible point between a feasible ``inside`` and infeasible ``outside``."""
    for _ in range(200):
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if worst(mid) <= 0:
            inside = mid
        else:
            outside = mid
    return inside


def _scalar_optimum(instance: ProblemInstance, t: float) -> float:
    constraints = [g for a in instance.agents for g in a.constraints]
    F = lambda x: global_cost(instance, [x], t)
    worst = (lambda x: max(g.value([x], t) for g in constraints)) if constraints else (lambda x: -1.0)

    span = 1.0
    x_feas = 0.0
    while worst(x_feas) > 0:
        x_feas = golden_section(worst, -span, span)
        if worst(x_feas) <= 0:
            break
        if span > 1e12:
            raise InfeasibleError(f"no point satisfies all constraints at t={t}", time=t)
        span *= 2.0

    span = max(1.0, 2.0 * abs(x_feas))
    f0 = F(x_feas)
    while not (F(-span) > f0 and F(span) > f0):
        span *= 2.0
        if span > 1e12:
            raise ConvergenceError(f"global cost has no bounded minimizer at t={t}", time=t)

    lo = -span if worst(-span) <= 0 else _bisect_boundary(worst, x_feas, -span)
    hi = span if worst(span) <= 0 else _bisect_boundary(worst, x_feas, span)
    # |F'| is unimodal for convex F and, unlike F itself, resolves the
    # minimizer below sqrt(machine eps)
    slope = lambda x: abs(float(sum(a.cost.gradient([x], t)[0] for a in instance.agents)))
    return golden_section(slope, lo, hi, tol=1e-13 * max(1.0, hi - lo))


def _vector_optimum(instance: ProblemInstance, t: float) -> np.ndarray:
    n = instance.dimension
    constraints = [g for a in instance.agents for g in a.constraints]
    fun = lambda x: global_cost(instance, x, t)
    jac = lambda x: sum(a.cost.gradient(x, t) for a in instance.agents)
    cons = [
        {"type": "ineq", "fun": (lambda x, g=g: -g.value(x, t)), "jac": (lambda x, g=g: -g.gradient(x, t))}
        for g in constraints
    ]
    res = minimize(fun, np.zeros(n), jac=jac, constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    if constraints and max(g.value(res.x, t) for g in constraints) > 1e-8:
        raise InfeasibleError(f"no point satisfies all constraints at t={t}", time=t)
    return res.x


def optimal_trajectory(instance: ProblemInstance, t: float) -> np.ndarray:
    """Minimizer of ``sum_i f_i(x, t)`` subject to every agent's ``g_i(x, t) <= 0``.

    For ``n == 1``: golden-section search for the zero of the summed cost
    derivative over the feasible interval. SLSQP otherwise.
    """
    if instance.dimension == 1:
        return np.array([_scalar_optimum(instance, t)])
    return _vector_optimum(instance, t)


def penalized_optimal_trajectory(
    instance: ProblemInstance, t: float, tol: float = 1e-10, max_iter: int = 100, seed=None
) -> np.ndarray:
    """Common point with ``sum_i grad L_i(x, t) = 0``, by damped Newton from ``optimal_trajectory``."""
    agents = instance.agents
    x = np.atleast_1d(np.asarray(seed if seed is not None else optimal_trajectory(instance, t), dtype=float))

    def inside(y):
        return all(in_domain(a, y, t) for a in agents)

    if not inside(x):
        raise DomainError(f"Newton seed {x} is outside the common barrier domain", time=t)

    def residual(y):
        return sum(penalized_gradient(a, y, t) for a in agents)

    def merit(y):
        return sum(penalized_value(a, y, t) for a in agents)

    r = residual(x)
    for _ in range(max_iter):
        rnorm = float(np.linalg.norm(r))
        if rnorm < tol:
            return x
        H = sum(penalized_hessian(a, x, t) for a in agents)
        dx = -np.linalg.solve(H, r)
        phi = merit(x)
        slope = float(r @ dx)
        alpha = 1.0
        for _ in range(60):
            y = x + alpha * dx
            if inside(y):
                ry = residual(y)
                if merit(y) <= phi + 1e-4 * alpha * slope or np.linalg.norm(ry) < rnorm:
                    break
            alpha *= 0.5
        else:
            raise ConvergenceError(f"line search failed at t={t}", time=t)
        x, r = y, ry
    if float(np.linalg.norm(r)) < tol:
        return x
    raise ConvergenceError(f"Newton did not reach |sum grad| < {tol:g} in {max_iter} iterations at t={t}", time=t)
