"""Built-in test objectives, a derivative checker and a brute-force grid oracle.

The grid oracle scans a square around the origin for the global minimizer of
a cubic-regularized quadratic and reports how well the first- and
second-order necessary conditions hold there.  It exists to validate the
subproblem solver and the necessary conditions; the solvers never call it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Problem, RegularizedQuadratic
from .norms import GeneralNorm

BUILTIN_NAMES = ("quadratic", "rosenbrock", "sixhumpcamel", "rastrigin2d",
                 "regquad_as_objective")


def householder_matrix(u) -> np.ndarray:
    """Reflection I - 2 u u^T / <u, u>; eigenvalues are -1 (along u) and +1."""
    u = np.asarray(u, dtype=float)
    return np.eye(u.shape[0]) - 2.0 * np.outer(u, u) / float(u @ u)


def _quadratic(n: int) -> Problem:
    return Problem(
        n,
        f=lambda x: 0.5 * float(x @ x),
        grad=lambda x: x.copy(),
        hess=lambda x: np.eye(n),
        f_low=0.0,
        known_lipschitz=(0.0, 0.0),
        name="quadratic",
    )


def _rosenbrock(n: int) -> Problem:
    if n < 2:
        raise ValueError("rosenbrock needs n >= 2")

    def f(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def grad(x):
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
        return g

    def hess(x):
        H = np.zeros((n, n))
        for i in range(n - 1):
            H[i, i] += -400.0 * (x[i + 1] - x[i] ** 2) + 800.0 * x[i] ** 2 + 2.0
            H[i, i + 1] += -400.0 * x[i]
            H[i + 1, i] += -400.0 * x[i]
            H[i + 1, i + 1] += 200.0
        return H

    return Problem(n, f, grad, hess, f_low=0.0, name="rosenbrock")


def _sixhumpcamel(n: int) -> Problem:
    if n != 2:
        raise ValueError("sixhumpcamel is two-dimensional")

    def f(v):
        x, y = v
        return float((4.0 - 2.1 * x * x + x ** 4 / 3.0) * x * x + x * y
                     + (-4.0 + 4.0 * y * y) * y * y)

    def grad(v):
        x, y = v
        return np.array([
            8.0 * x - 8.4 * x ** 3 + 2.0 * x ** 5 + y,
            x - 8.0 * y + 16.0 * y ** 3,
        ])

    def hess(v):
        x, y = v
        return np.array([
            [8.0 - 25.2 * x * x + 10.0 * x ** 4, 1.0],
            [1.0, -8.0 + 48.0 * y * y],
        ])

    # Known global minimum value, to one part in 1e4.
    return Problem(2, f, grad, hess, f_low=-1.0317, name="sixhumpcamel")


def _rastrigin2d(n: int) -> Problem:
    if n != 2:
        raise ValueError("rastrigin2d is two-dimensional")
    two_pi = 2.0 * math.pi

    def f(x):
        return float(20.0 + np.sum(x * x - 10.0 * np.cos(two_pi * x)))

    def grad(x):
        return 2.0 * x + 10.0 * two_pi * np.sin(two_pi * x)

    def hess(x):
        return np.diag(2.0 + 10.0 * two_pi * two_pi * np.cos(two_pi * x))

    return Problem(2, f, grad, hess, f_low=0.0, name="rastrigin2d")


def _regquad_as_objective(n: int) -> Problem:
    if n != 2:
        raise ValueError("regquad_as_objective is two-dimensional")
    H = householder_matrix(np.array([5.0, 1.0]))
    # Constant indefinite Hessian with lambda_min = -1: unbounded below, so a
    # second-order target can never be met.  Useful for budget-error paths.
    return Problem(
        2,
        f=lambda x: 0.5 * float(x @ (H @ x)),
        grad=lambda x: H @ x,
        hess=lambda x: H.copy(),
        known_lipschitz=(0.0, 0.0),
        name="regquad_as_objective",
    )


def builtin_problem(name: str, n: int = 2) -> Problem:
    """A fresh built-in objective with exact derivatives and zeroed tallies."""
    factories = {
        "quadratic": _quadratic,
        "rosenbrock": _rosenbrock,
        "sixhumpcamel": _sixhumpcamel,
        "rastrigin2d": _rastrigin2d,
        "regquad_as_objective": _regquad_as_objective,
    }
    if name not in factories:
        raise ValueError(f"unknown problem {name!r}, expected one of {BUILTIN_NAMES}")
    return factories[name](int(n))


@dataclass
class DerivativeReport:
    ok: bool
    grad_error: float
    hess_error: float
    worst_grad_index: int
    worst_hess_index: tuple
    tolerance: float


def check_derivatives(problem: Problem, x, h: float = 1e-5) -> DerivativeReport:
    """Central-difference check of the gradient and Hessian callbacks at x.

    Relative tolerance max(1e-5, 100 h^2).  A failing report keeps the worst
    entries so the offending component is easy to find.
    """
    if not h > 0.0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    g = problem.eval_grad(x)
    scale = 1.0 + float(np.max(np.abs(g)))
    g_num = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g_num[i] = (problem.eval_f(x + e) - problem.eval_f(x - e)) / (2.0 * h)
    g_err = np.abs(g_num - g) / scale
    worst_g = int(np.argmax(g_err))

    H = problem.eval_hess(x)
    hscale = 1.0 + float(np.max(np.abs(H)))
    H_num = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H_num[i] = (problem.eval_grad(x + e) - problem.eval_grad(x - e)) / (2.0 * h)
    H_num = 0.5 * (H_num + H_num.T)
    H_err = np.abs(H_num - H) / hscale
    worst_h = np.unravel_index(int(np.argmax(H_err)), H_err.shape)

    tol = max(1e-5, 100.0 * h * h)
    return DerivativeReport(
        ok=bool(g_err[worst_g] <= tol and H_err[worst_h] <= tol),
        grad_error=float(g_err[worst_g]),
        hess_error=float(H_err[worst_h]),
        worst_grad_index=worst_g,
        worst_hess_index=tuple(int(i) for i in worst_h),
        tolerance=tol,
    )


@dataclass
class GridOracleResult:
    s_star: np.ndarray
    m_star: float
    grid_step: float
    noc1_residual: float
    noc2_residual: float


def _grid_norms(S1: np.ndarray, S2: np.ndarray, kind: str) -> np.ndarray:
    if kind == "l1":
        return np.abs(S1) + np.abs(S2)
    if kind == "l2":
        return np.hypot(S1, S2)
    return np.maximum(np.abs(S1), np.abs(S2))


def grid_oracle(q: RegularizedQuadratic, resolution: int = 401) -> GridOracleResult:
    """Brute-force global minimizer of a 2-D regularized quadratic on a grid.

    Scans the square [-R, R]^2 with R the a-priori step radius of ``q``
    (every point with m <= m(0) lies inside).  Reports the best vertex, the
    first-order residual |dual(g+Hs*) - sigma/2 ||s*||^2| and the
    second-order residual lambda_min + omega(s*) sigma ||s*||.  An odd
    resolution keeps the origin on the grid.
    """
    if q.dim != 2:
        raise ValueError("the grid oracle only supports dimension 2")
    if resolution < 101:
        raise ValueError("resolution must be at least 101")
    R = q.kappa_upper()
    axis = np.linspace(-R, R, resolution)
    S1, S2 = np.meshgrid(axis, axis, indexing="ij")
    g1, g2 = q.g
    h11, h12, h22 = q.H[0, 0], q.H[0, 1], q.H[1, 1]
    quad = (q.f0 + g1 * S1 + g2 * S2
            + 0.5 * (h11 * S1 * S1 + 2.0 * h12 * S1 * S2 + h22 * S2 * S2))
    norms = _grid_norms(S1, S2, q.norm.kind)
    m = quad + q.sigma / 6.0 * norms ** 3
    flat = int(np.argmin(m))
    i, j = np.unravel_index(flat, m.shape)
    s_star = np.array([S1[i, j], S2[i, j]])
    t = q.norm.value(s_star)
    noc1 = abs(q.norm.dual_value(q.grad(s_star)) - 0.5 * q.sigma * t * t)
    noc2 = q.lambda_min + q.omega(s_star) * q.sigma * t
    grid_step = 2.0 * R / (resolution - 1) if resolution > 1 else 0.0
    return GridOracleResult(
        s_star=s_star,
        m_star=float(m[i, j]),
        grid_step=float(grid_step),
        noc1_residual=float(noc1),
        noc2_residual=float(noc2),
    )
