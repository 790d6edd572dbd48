"""Objective wrapper, solver configuration and the cubic-regularized model.

Shared by both outer solvers and the subproblem solver: Taylor values and
decreases, the regularized model value, the acceptance ratio, the
regularization-weight update and step certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import EigenPair, check_symmetric, eigh_jacobi
from .norms import GeneralNorm, _checked_vector

KAPPA_OMEGA = 1.0 + 2.0 / math.sqrt(3.0)

_TINY_DECREASE = 1e-300


class Problem:
    """Objective with exact derivative callbacks and evaluation tallies.

    Each callback has a one-point cache: re-evaluating at the point most
    recently seen does not call back into user code and does not bump the
    tally.  This is what lets the outer solvers reuse derivatives at a
    rejected iterate while keeping honest evaluation counts.
    """

    def __init__(
        self,
        dim: int,
        f: Callable[[np.ndarray], float],
        grad: Callable[[np.ndarray], np.ndarray],
        hess: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        f_low: Optional[float] = None,
        known_lipschitz: Optional[tuple] = None,
        name: str = "",
    ):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self._f = f
        self._grad = grad
        self._hess = hess
        self.f_low = f_low
        self.known_lipschitz = known_lipschitz
        self.name = name
        self.n_f = 0
        self.n_g = 0
        self.n_H = 0
        self._cached = {"f": None, "g": None, "H": None}

    def _point(self, x) -> np.ndarray:
        x = _checked_vector(x, "point")
        if x.shape[0] != self.dim:
            raise ValueError(f"point has dimension {x.shape[0]}, expected {self.dim}")
        return x

    def _from_cache(self, slot: str, x: np.ndarray):
        entry = self._cached[slot]
        if entry is not None and np.array_equal(entry[0], x):
            return entry[1]
        return None

    def eval_f(self, x) -> float:
        x = self._point(x)
        hit = self._from_cache("f", x)
        if hit is not None:
            return hit
        val = float(self._f(x))
        if not math.isfinite(val):
            raise ValueError("objective returned a non-finite value")
        self.n_f += 1
        self._cached["f"] = (x.copy(), val)
        return val

    def eval_grad(self, x) -> np.ndarray:
        x = self._point(x)
        hit = self._from_cache("g", x)
        if hit is not None:
            return hit
        g = _checked_vector(self._grad(x), "gradient")
        if g.shape[0] != self.dim:
            raise ValueError("gradient callback returned the wrong dimension")
        self.n_g += 1
        self._cached["g"] = (x.copy(), g)
        return g

    def eval_hess(self, x) -> np.ndarray:
        if self._hess is None:
            raise ValueError("problem has no Hessian callback")
        x = self._point(x)
        hit = self._from_cache("H", x)
        if hit is not None:
            return hit
        H = check_symmetric(self._hess(x), "Hessian")
        if H.shape[0] != self.dim:
            raise ValueError("Hessian callback returned the wrong dimension")
        self.n_H += 1
        self._cached["H"] = (x.copy(), H)
        return H

    def reset_counters(self):
        self.n_f = self.n_g = self.n_H = 0
        self._cached = {"f": None, "g": None, "H": None}


@dataclass
class ARConfig:
    """Constants of the outer adaptive-regularization loops.

    The constructor enforces the standard ordering constraints:
    sigma_min in (0, sigma0], 0 < eta1 <= eta2 < 1, theta1 > 1, theta2 > 1,
    0 < gamma1 < 1 < gamma2 < gamma3, eps1 and eps2 in (0, 1], p in {1, 2}.
    """

    p: int = 2
    sigma0: float = 1.0
    sigma_min: float = 1e-10
    eta1: float = 0.1
    eta2: float = 0.9
    gamma1: float = 0.5
    gamma2: float = 2.0
    gamma3: float = 10.0
    theta1: float = 2.0
    theta2: float = 2.0
    eps1: float = 1e-5
    eps2: float = 1e-5
    max_outer: int = 500

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if not (0.0 < self.sigma_min <= self.sigma0):
            raise ValueError("need 0 < sigma_min <= sigma0")
        if not (0.0 < self.eta1 <= self.eta2 < 1.0):
            raise ValueError("need 0 < eta1 <= eta2 < 1")
        if not (0.0 < self.gamma1 < 1.0 < self.gamma2 < self.gamma3):
            raise ValueError("need 0 < gamma1 < 1 < gamma2 < gamma3")
        if not (self.theta1 > 1.0 and self.theta2 > 1.0):
            raise ValueError("need theta1 > 1 and theta2 > 1")
        if not (0.0 < self.eps1 <= 1.0 and 0.0 < self.eps2 <= 1.0):
            raise ValueError("need eps1 and eps2 in (0, 1]")
        if int(self.max_outer) < 1:
            raise ValueError("max_outer must be positive")
        self.max_outer = int(self.max_outer)


def taylor_value(f_x: float, g, s, H=None, p: int = 2) -> float:
    """Degree-p Taylor value f + <g,s> (+ 0.5 <Hs,s> for p = 2)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    val = f_x + float(g @ s)
    if p == 2:
        if H is None:
            raise ValueError("p = 2 requires a Hessian")
        val += 0.5 * float(s @ (np.asarray(H, dtype=float) @ s))
    return val


def taylor_eval(problem: Problem, x, s, p: int = 2) -> float:
    """Taylor value at x along s using the problem's (cached) derivatives."""
    f = problem.eval_f(x)
    g = problem.eval_grad(x)
    H = problem.eval_hess(x) if p == 2 else None
    return taylor_value(f, g, s, H=H, p=p)


def taylor_decrease(g, s, H=None, p: int = 2) -> float:
    """Taylor decrease T(0) - T(s) = -<g,s> - 0.5 <Hs,s> (quadratic term for p = 2)."""
    return -(taylor_value(0.0, g, s, H=H, p=p))


def model_value(f_x: float, g, s, sigma: float, norm: GeneralNorm, H=None, p: int = 2) -> float:
    """Regularized model value: Taylor value plus sigma/(p+1)! * ||s||^(p+1)."""
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    t = norm.value(s)
    return taylor_value(f_x, g, s, H=H, p=p) + sigma / math.factorial(p + 1) * t ** (p + 1)


def acceptance_ratio(f_x: float, f_trial: float, taylor_decr: float) -> float:
    """Ratio of achieved to Taylor-predicted decrease.

    Raises for a non-positive predicted decrease, which signals a degenerate
    zero step upstream.
    """
    if not taylor_decr > _TINY_DECREASE:
        raise ValueError("degenerate step: Taylor decrease is not positive")
    return (f_x - f_trial) / taylor_decr


def update_sigma(sigma: float, rho: float, cfg: ARConfig) -> float:
    """Deterministic regularization-weight update from the acceptance ratio."""
    if rho >= cfg.eta2:
        return max(cfg.sigma_min, cfg.gamma1 * sigma)
    if rho >= cfg.eta1:
        return sigma
    return cfg.gamma2 * sigma


class RegularizedQuadratic:
    """Cubic-regularized quadratic  m(s) = f0 + <g,s> + 0.5<Hs,s> + sigma/6 ||s||^3.

    The eigendecomposition of H is computed lazily, at most once, and is the
    only linear-algebra factorization the subproblem solver relies on.
    """

    def __init__(self, f0: float, g, H, sigma: float, norm: GeneralNorm,
                 eig: Optional[EigenPair] = None, hnorm2: Optional[float] = None):
        if not (isinstance(sigma, (int, float)) and sigma > 0.0 and math.isfinite(sigma)):
            raise ValueError("sigma must be a positive finite scalar")
        self.f0 = float(f0)
        self.g = _checked_vector(g, "gradient")
        self.H = check_symmetric(H, "Hessian")
        if self.H.shape[0] != self.g.shape[0]:
            raise ValueError("gradient and Hessian dimensions disagree")
        self.sigma = float(sigma)
        self.norm = norm
        self._eig = eig
        self._hnorm2 = hnorm2

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def _decompose(self):
        w, V = eigh_jacobi(self.H)
        if self._eig is None:
            u = V[:, 0].copy()
            for x in u:
                if x != 0.0:
                    if x < 0.0:
                        u = -u
                    break
            self._eig = EigenPair(float(w[0]), u)
        if self._hnorm2 is None:
            self._hnorm2 = max(abs(float(w[0])), abs(float(w[-1])))

    @property
    def eig(self) -> EigenPair:
        if self._eig is None:
            self._decompose()
        return self._eig

    @property
    def lambda_min(self) -> float:
        return self.eig.lambda_min

    @property
    def hnorm2(self) -> float:
        """Spectral norm of H."""
        if self._hnorm2 is None:
            self._decompose()
        return self._hnorm2

    def hnorm_upper(self) -> float:
        """Upper bound on the quadratic-form norm of H in the regularizer norm."""
        if self.norm.kind == "linf":
            return self.dim * self.hnorm2
        return self.hnorm2

    def kappa_upper(self) -> float:
        """A-priori radius: every s with m(s) <= m(0) has ||s|| below this."""
        hu = self.hnorm_upper()
        gd = self.norm.dual_value(self.g)
        return (0.5 * hu + math.sqrt(hu * hu + (2.0 / 3.0) * self.sigma * gd)) / (self.sigma / 3.0)

    def grad(self, s) -> np.ndarray:
        """Gradient g + Hs of the quadratic part."""
        return self.g + self.H @ np.asarray(s, dtype=float)

    def quadratic_value(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return self.f0 + float(self.g @ s) + 0.5 * float(s @ (self.H @ s))

    def value(self, s) -> float:
        return self.quadratic_value(s) + self.sigma / 6.0 * self.norm.value(s) ** 3

    def taylor_decrease(self, s) -> float:
        # Difference form: subtracting quadratic_value from f0 would cancel.
        s = np.asarray(s, dtype=float)
        return -(float(self.g @ s) + 0.5 * float(s @ (self.H @ s)))

    def omega(self, s) -> float:
        """Curvature correction omega(s), with the eigenvector sign resolved internally."""
        t = self.norm.value(s)
        if t == 0.0:
            return 1.0
        inner = -abs(float(self.grad(s) @ self.eig.u))
        psi = max(0.0, 1.0 + 2.0 * inner / (self.sigma * t * t))
        return 1.0 + 2.0 * math.sqrt(psi) / math.sqrt(3.0)


@dataclass(frozen=True)
class OmegaPsi:
    """Curvature-correction pair: psi >= 0 and omega in [1, KAPPA_OMEGA]."""

    psi: float
    omega: float


def psi_omega(q: RegularizedQuadratic, s, u_signed) -> OmegaPsi:
    """Curvature correction at s for an eigenvector whose sign satisfies <g+Hs, u> <= 0.

    At s = 0 the pair is (0, 1) by convention.  A sign-convention violation
    (positive inner product beyond rounding) raises.
    """
    s = np.asarray(s, dtype=float)
    t = q.norm.value(s)
    if t == 0.0:
        return OmegaPsi(0.0, 1.0)
    u = _checked_vector(u_signed, "eigenvector")
    nu = float(np.linalg.norm(u))
    if abs(nu - 1.0) > 1e-6:
        raise ValueError("u_signed must have unit l2 norm")
    gs = q.grad(s)
    inner = float(gs @ u)
    if inner > 1e-12 * (1.0 + float(np.linalg.norm(gs))):
        raise ValueError("sign convention violated: <g+Hs, u> must be <= 0")
    psi = max(0.0, 1.0 + 2.0 * inner / (q.sigma * t * t))
    omega = 1.0 + 2.0 * math.sqrt(psi) / math.sqrt(3.0)
    return OmegaPsi(psi, omega)


@dataclass(frozen=True)
class StepCertificate:
    """Measured residuals of the step conditions for a candidate step.

    descent_ok asserts the model did not increase.  grad_residual is the
    dual norm of the model-quadratic gradient minus theta1 * sigma/p! * ||s||^p
    (admissible when <= 0).  curvature_residual, when present, is
    lambda_min[H] + theta2 * omega(s) * sigma * ||s|| (admissible when >= 0).
    """

    descent_ok: bool
    grad_residual: float
    curvature_residual: Optional[float] = None

    @property
    def admissible_first_order(self) -> bool:
        return self.descent_ok and self.grad_residual <= 0.0

    @property
    def admissible_second_order(self) -> bool:
        return (
            self.admissible_first_order
            and self.curvature_residual is not None
            and self.curvature_residual >= 0.0
        )


def certify_step(q: RegularizedQuadratic, s, theta1: float,
                 theta2: Optional[float] = None) -> StepCertificate:
    """Certificate of a degree-2 candidate step; curvature part only if theta2 given.

    Uses only cached quantities of ``q`` (never re-evaluates the objective).
    """
    s = np.asarray(s, dtype=float)
    t = q.norm.value(s)
    # Difference form: quadratic part relative to f0 plus the cubic term.
    model_change = (float(q.g @ s) + 0.5 * float(s @ (q.H @ s))
                    + q.sigma / 6.0 * t ** 3)
    descent_ok = model_change <= 1e-12 * (1.0 + abs(q.f0))
    grad_residual = q.norm.dual_value(q.grad(s)) - 0.5 * theta1 * q.sigma * t * t
    curvature_residual = None
    if theta2 is not None:
        curvature_residual = q.lambda_min + theta2 * q.omega(s) * q.sigma * t
    return StepCertificate(descent_ok, grad_residual, curvature_residual)


def certify_first_order_step(f_x: float, g, s, sigma: float, norm: GeneralNorm,
                             theta1: float) -> StepCertificate:
    """Certificate for the degree-1 model f + <g,s> + sigma/2 ||s||^2."""
    s = np.asarray(s, dtype=float)
    t = norm.value(s)
    descent_ok = float(np.asarray(g, dtype=float) @ s) + 0.5 * sigma * t * t <= 0.0
    grad_residual = norm.dual_value(g) - theta1 * sigma * t
    return StepCertificate(descent_ok, grad_residual, None)
