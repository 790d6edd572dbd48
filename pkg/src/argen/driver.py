"""Outer adaptive-regularization loops (first- and second-order variants).

``ar1pgn_solve`` drives the degree-p model (p = 1 closed form, p = 2 via the
relaxed subproblem solver) to a point whose dual gradient norm is at most
eps1.  ``ar2gn_solve`` additionally drives the smallest Hessian eigenvalue
above -eps2.  Both log a full per-iteration trace with step certificates and
assert the bookkeeping inequalities of the method on every iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .linalg import EigenPair, eigh_jacobi
from .model import (
    ARConfig,
    Problem,
    RegularizedQuadratic,
    StepCertificate,
    acceptance_ratio,
    certify_first_order_step,
    certify_step,
    update_sigma,
)
from .norms import GeneralNorm
from .rqmin import SubproblemBudgetError, rqmin_solve


class IterationBudgetError(RuntimeError):
    """Outer iteration budget exhausted (or the inner solver failed).

    Carries the current iterate in ``x`` and the trace so far in ``trace``.
    """

    def __init__(self, message: str, x: np.ndarray, trace: "ARTrace"):
        super().__init__(message)
        self.x = x
        self.trace = trace


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    f: float
    dual_grad_norm: float
    lambda_min: Optional[float]
    sigma: float
    rho: float
    step_norm: float
    accepted: bool
    inner_iterations: int
    certificate: StepCertificate


@dataclass
class ARTrace:
    algo: str
    problem: str
    norm_kind: str
    p: int
    records: List[IterationRecord] = field(default_factory=list)
    n_f: int = 0
    n_g: int = 0
    n_H: int = 0
    successful: int = 0
    sigma_max_observed: float = 0.0
    final_x: Optional[np.ndarray] = None
    final_f: Optional[float] = None
    final_dual_grad_norm: Optional[float] = None
    final_lambda_min: Optional[float] = None
    terminated: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)


def _assert_iteration_invariants(k: int, successful: int, sigma_hist_max: float,
                                 cfg: ARConfig, sigma: float, problem: Problem):
    # Success-vs-total iteration bound, with the observed sigma maximum.
    bound = successful * (1.0 + abs(math.log(cfg.gamma1)) / math.log(cfg.gamma2))
    bound += math.log(sigma_hist_max / cfg.sigma0) / math.log(cfg.gamma2)
    assert k <= bound + 1e-9, f"iteration bound violated at k={k}: {k} > {bound}"
    assert sigma >= cfg.sigma_min - 1e-300, "sigma fell below sigma_min"
    lips = problem.known_lipschitz
    if lips is not None and cfg.p == 2 and max(lips) == 0.0:
        # Zero-curvature-variation regime: the weight never rises above its start.
        assert sigma <= cfg.sigma0 * (1.0 + 1e-12), "sigma grew on a zero-Lipschitz problem"


def _solve(problem: Problem, x0, cfg: ARConfig, norm: GeneralNorm, second_order: bool,
           inner_mode: str, inner_max_iter: int, newton_first: bool) -> tuple:
    algo = "ar2gn" if second_order else "ar1pgn"
    trace = ARTrace(algo=algo, problem=problem.name, norm_kind=norm.kind, p=cfg.p)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (problem.dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.dim},)")
    f = problem.eval_f(x)
    sigma = cfg.sigma0
    sigma_hist_max = sigma
    successful = 0

    def _finish(gd, lam):
        trace.n_f, trace.n_g, trace.n_H = problem.n_f, problem.n_g, problem.n_H
        trace.successful = successful
        trace.sigma_max_observed = sigma_hist_max
        trace.final_x = x.copy()
        trace.final_f = f
        trace.final_dual_grad_norm = gd
        trace.final_lambda_min = lam
        return trace

    for k in range(cfg.max_outer):
        g = problem.eval_grad(x)
        gd = norm.dual_value(g)
        need_hessian = cfg.p == 2
        H = problem.eval_hess(x) if need_hessian else None
        eig: Optional[EigenPair] = None
        hnorm2: Optional[float] = None
        lam: Optional[float] = None
        if second_order:
            w, V = eigh_jacobi(H)
            u = V[:, 0].copy()
            for comp in u:
                if comp != 0.0:
                    if comp < 0.0:
                        u = -u
                    break
            eig = EigenPair(float(w[0]), u)
            hnorm2 = max(abs(float(w[0])), abs(float(w[-1])))
            lam = eig.lambda_min
            if gd <= cfg.eps1 and lam >= -cfg.eps2:
                trace.terminated = True
                return x, _finish(gd, lam)
        else:
            if gd <= cfg.eps1:
                trace.terminated = True
                return x, _finish(gd, lam)

        inner_iterations = 0
        if cfg.p == 1:
            d = norm.descent_direction(g)
            s = (gd / sigma) * d
            cert = certify_first_order_step(f, g, s, sigma, norm, cfg.theta1)
            delta_t = -float(g @ s)
        else:
            q = RegularizedQuadratic(f, g, H, sigma, norm, eig=eig, hnorm2=hnorm2)
            s = None
            if newton_first and second_order and q.lambda_min > 0.0:
                s_n, cert_n = _newton_candidate(q, cfg.theta1, cfg.theta2)
                if cert_n.admissible_second_order:
                    s, cert = s_n, cert_n
            if s is None:
                try:
                    res = rqmin_solve(
                        q,
                        mode=inner_mode,
                        eps1=cfg.eps1,
                        theta1=cfg.theta1,
                        theta2=cfg.theta2,
                        max_iter=inner_max_iter,
                        adaptive_grad_tol=(inner_mode == "full"),
                    )
                except SubproblemBudgetError as exc:
                    raise IterationBudgetError(
                        f"inner solve failed at outer iteration {k}: {exc}", x, _finish(gd, lam)
                    ) from exc
                s, cert, inner_iterations = res.s, res.certificate, res.iterations
            delta_t = q.taylor_decrease(s)

        assert cert.admissible_first_order, "inner solve returned an inadmissible step"
        if second_order:
            assert cert.curvature_residual is not None and cert.curvature_residual >= 0.0, (
                "inner solve returned a step violating the curvature condition"
            )
        step_norm = norm.value(s)
        # The model did not increase, so the Taylor decrease covers the
        # regularization term.
        assert delta_t >= sigma / math.factorial(cfg.p + 1) * step_norm ** (cfg.p + 1) \
            - 1e-10 * (1.0 + abs(delta_t)), "Taylor decrease fell below the regularization term"

        f_trial = problem.eval_f(x + s)
        rho = acceptance_ratio(f, f_trial, delta_t)
        accepted = rho >= cfg.eta1
        trace.records.append(IterationRecord(
            k=k, x=x.copy(), f=f, dual_grad_norm=gd, lambda_min=lam, sigma=sigma,
            rho=rho, step_norm=step_norm, accepted=accepted,
            inner_iterations=inner_iterations, certificate=cert,
        ))
        if accepted:
            x = x + s
            f = f_trial
            successful += 1
        sigma = update_sigma(sigma, rho, cfg)
        sigma_hist_max = max(sigma_hist_max, sigma)
        _assert_iteration_invariants(k + 1, successful, sigma_hist_max, cfg, sigma, problem)

    g = problem.eval_grad(x)
    gd = norm.dual_value(g)
    raise IterationBudgetError(
        f"outer iteration budget ({cfg.max_outer}) exhausted", x, _finish(gd, None)
    )


def _newton_candidate(q: RegularizedQuadratic, theta1: float, theta2: float):
    """Newton step of the quadratic part, via the eigendecomposition."""
    w, V = eigh_jacobi(q.H)
    if w[0] <= 0.0:
        raise ValueError("Newton step requires a positive definite Hessian")
    s_n = -V @ ((V.T @ q.g) / w)
    return s_n, certify_step(q, s_n, theta1, theta2)


def ar1pgn_solve(problem: Problem, x0, cfg: ARConfig, norm: GeneralNorm,
                 inner_mode: str = "relaxed2", inner_max_iter: int = 100000):
    """First-order adaptive regularization with a general norm.

    Stops when the dual norm of the gradient is at most cfg.eps1.  For p = 1
    the model minimizer is closed form along the steepest-descent direction;
    for p = 2 the subproblem solver runs in the given mode (one-sided test by
    default).  Returns (x_final, trace).
    """
    return _solve(problem, x0, cfg, norm, second_order=False,
                  inner_mode=inner_mode, inner_max_iter=inner_max_iter,
                  newton_first=False)


def ar2gn_solve(problem: Problem, x0, cfg: ARConfig, norm: GeneralNorm,
                inner_mode: str = "relaxed1", inner_max_iter: int = 100000,
                newton_first: bool = False):
    """Second-order adaptive regularization with a general norm.

    Requires cfg.p == 2.  Stops when the dual gradient norm is at most
    cfg.eps1 and the smallest Hessian eigenvalue is at least -cfg.eps2.
    ``newton_first`` optionally probes the Newton step when the Hessian is
    positive definite and uses it whenever its certificate passes.
    Returns (x_final, trace).
    """
    if cfg.p != 2:
        raise ValueError("the second-order solver requires p = 2")
    return _solve(problem, x0, cfg, norm, second_order=True,
                  inner_mode=inner_mode, inner_max_iter=inner_max_iter,
                  newton_first=newton_first)


def newton_step_probe(problem: Problem, x, sigma: float, cfg: ARConfig, norm: GeneralNorm):
    """Certificate of the pure Newton step of the degree-2 model at x.

    The gradient residual is exactly -theta1 * sigma/2 * ||s_N||^2 because the
    quadratic-part gradient vanishes at s_N; admissibility therefore reduces
    to the model-descent condition.  Raises if the Hessian is not positive
    definite.  Returns (s_newton, certificate).
    """
    x = np.asarray(x, dtype=float)
    f = problem.eval_f(x)
    g = problem.eval_grad(x)
    H = problem.eval_hess(x)
    q = RegularizedQuadratic(f, g, H, sigma, norm)
    w, V = eigh_jacobi(H)
    if w[0] <= 0.0:
        raise ValueError("Newton step requires a positive definite Hessian")
    s_n = -V @ ((V.T @ g) / w)
    return s_n, certify_step(q, s_n, cfg.theta1, cfg.theta2)
