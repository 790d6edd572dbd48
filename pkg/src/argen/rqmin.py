"""Iterative minimizer for cubic-regularized quadratics in a general norm.

The solver walks a monotone sequence of one-dimensional minimizations:
a steepest-descent ("cauchy") step of the quadratic part in the chosen
norm, a retraction back toward the origin when the iterate has grown too
long, and an eigenvalue step along the most negative curvature direction.
Three termination modes are offered:

  full      two-sided gradient test |dual(g+Hs) - sigma/2 ||s||^2| <= eps1
            plus the curvature test,
  relaxed1  one-sided gradient test (threshold (theta1-1) sigma/2 ||s||^2)
            plus the curvature test; retraction disabled,
  relaxed2  one-sided gradient test only; retraction and eigen disabled.

Model decreases are computed in difference form along each search ray, never
as differences of absolute model values: near a flat minimizer the per-step
decrease is far below the floating-point resolution of m itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .model import RegularizedQuadratic, StepCertificate, certify_step

MODES = ("full", "relaxed1", "relaxed2")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class SubproblemBudgetError(RuntimeError):
    """Raised when the subproblem iteration budget is exhausted or progress stalls.

    Carries the best iterate found so far in ``result``.
    """

    def __init__(self, message: str, result: "RqminResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class StepRecord:
    kind: str  # "cauchy" | "retraction" | "eigen"
    decrease: float
    guaranteed: float
    m_after: float


@dataclass
class RqminResult:
    s: np.ndarray
    iterations: int
    step_log: List[StepRecord]
    certificate: StepCertificate
    m_final: float
    terminated: bool


def safeguard_alpha(a: float, b: float, c: float, nu: float) -> float:
    """Safe positive step for a quadratic a t^2 + b t + c with c > 0, a != 0.

    Returns t* = min[c / (nu + 3|b|), sqrt(c/|a|) / 3], at which the quadratic
    provably still exceeds c/2.  nu > 0 guards the first branch against b = 0.
    """
    if a == 0.0:
        raise ValueError("quadratic coefficient a must be nonzero")
    if not c > 0.0:
        raise ValueError("constant term c must be positive")
    if not nu > 0.0:
        raise ValueError("safeguard nu must be positive")
    return min(c / (nu + 3.0 * abs(b)), math.sqrt(c / abs(a)) / 3.0)


class _Ray:
    """m(s + t d) - m(s) along a fixed ray, in cancellation-safe difference form."""

    def __init__(self, q: RegularizedQuadratic, s: np.ndarray, d: np.ndarray,
                 g_s: Optional[np.ndarray] = None):
        if g_s is None:
            g_s = q.grad(s)
        Hd = q.H @ d
        self.c1 = float(g_s @ d)
        self.c2 = 0.5 * float(d @ Hd)
        self.sigma6 = q.sigma / 6.0
        self.kind = q.norm.kind
        self.s = s
        self.d = d
        self.n0 = q.norm.value(s)
        if self.kind == "l2":
            self.ss = float(s @ s)
            self.sd = float(s @ d)
            self.dd = float(d @ d)

    def norm_at(self, t: float) -> float:
        if self.kind == "l2":
            return math.sqrt(max(self.ss + 2.0 * t * self.sd + t * t * self.dd, 0.0))
        v = self.s + t * self.d
        if self.kind == "l1":
            return float(np.sum(np.abs(v)))
        return float(np.max(np.abs(v)))

    def norm_diff(self, t: float) -> float:
        """N(t) - N(0), avoiding cancellation where the norm allows it."""
        if self.kind == "l2":
            inc = 2.0 * t * self.sd + t * t * self.dd
            den = self.norm_at(t) + self.n0
            return inc / den if den > 0.0 else 0.0
        if self.kind == "l1":
            return float(np.sum(np.abs(self.s + t * self.d) - np.abs(self.s)))
        return self.norm_at(t) - self.n0

    def cube_diff(self, t: float) -> float:
        """N(t)^3 - N(0)^3."""
        n = self.norm_at(t)
        return self.norm_diff(t) * (n * n + n * self.n0 + self.n0 * self.n0)

    def delta(self, t: float) -> float:
        """m(s + t d) - m(s)."""
        return t * (self.c1 + t * self.c2) + self.sigma6 * self.cube_diff(t)


def _segment_min(ray: _Ray, a: float, b: float, best):
    """Exact minimum of the ray delta on [a, b] where the norm is affine there."""
    na = ray.norm_at(a)
    nb = ray.norm_at(b)
    v = (nb - na) / (b - a)
    base = ray.delta(a)
    s6 = ray.sigma6
    # delta(a + tau) = base + C tau + B tau^2 + A tau^3 on the segment.
    C = ray.c1 + 2.0 * ray.c2 * a + 3.0 * s6 * na * na * v
    B = ray.c2 + 3.0 * s6 * na * v * v
    A = s6 * v * v * v
    taus = [b - a]
    three_a = 3.0 * A
    if three_a != 0.0:
        disc = B * B - three_a * C
        if disc >= 0.0:
            root = math.sqrt(disc)
            for tau in ((-B - root) / three_a, (-B + root) / three_a):
                if 0.0 < tau < b - a:
                    taus.append(tau)
    elif B != 0.0:
        tau = -C / (2.0 * B)
        if 0.0 < tau < b - a:
            taus.append(tau)
    for tau in taus:
        val = base + tau * (C + tau * (B + tau * A))
        t = a + tau
        if t > 0.0 and val < best[1]:
            best = (t, val)
    return best


def _piecewise_breakpoints(ray: _Ray, t_max: float) -> list:
    """Points in (0, t_max) where the ray norm may change slope."""
    s, d = ray.s, ray.d
    pts = []
    for si, di in zip(s.tolist(), d.tolist()):
        if di != 0.0:
            t = -si / di
            if 0.0 < t < t_max:
                pts.append(t)
    if ray.kind == "linf":
        n = len(s)
        for i in range(n):
            for j in range(i + 1, n):
                for num, den in ((s[j] - s[i], d[i] - d[j]), (-(s[i] + s[j]), d[i] + d[j])):
                    if den != 0.0:
                        t = num / den
                        if 0.0 < t < t_max:
                            pts.append(float(t))
    return sorted(set(pts))


def _exact_line_min(ray: _Ray, t_max: float):
    """Global minimum over (0, t_max] when the ray norm is piecewise affine."""
    pts = [0.0] + _piecewise_breakpoints(ray, t_max) + [t_max]
    best = (t_max, ray.delta(t_max))
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            best = _segment_min(ray, a, b, best)
    return best


def _golden_line_min(ray: _Ray, t_max: float, t_seed: float):
    """Bracketed golden-section minimum for rays with a smooth norm term."""
    probes = [t_seed * m for m in (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0)]
    ts = sorted({min(max(p, 0.0), t_max) for p in probes} | {t_max})
    vals = [ray.delta(t) for t in ts]
    for v in vals:
        if not math.isfinite(v):
            raise ValueError("non-finite model value along the search ray")
    i = min(range(len(ts)), key=lambda j: vals[j])
    best_t, best_v = ts[i], vals[i]
    a = ts[i - 1] if i > 0 else 0.0
    b = ts[i + 1] if i + 1 < len(ts) else ts[i]
    if b <= a:
        return best_t, best_v
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = ray.delta(x1)
    f2 = ray.delta(x2)
    while b - a > 1e-11 * (abs(a) + abs(b) + 1e-14):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = ray.delta(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = ray.delta(x2)
    for t, v in ((x1, f1), (x2, f2)):
        if t > 0.0 and v < best_v:
            best_t, best_v = t, v
    return best_t, best_v


def _line_search(q: RegularizedQuadratic, s, d, t_max: float, t_fallback: float,
                 g_s=None, affine_norm: bool = False):
    """Minimize the ray delta over (0, t_max]; never worse than the fallback.

    Exact piecewise-cubic minimization whenever the norm is affine along the
    ray (all of l1/linf, plus rays from the origin and retraction rays);
    golden-section search seeded at the fallback otherwise.
    Returns (t, delta).
    """
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    if not (t_max > 0.0 and math.isfinite(t_max)):
        raise ValueError("alpha_max must be positive and finite")
    ray = _Ray(q, s, d, g_s)
    fb = min(max(t_fallback, 1e-300), t_max)
    if ray.kind != "l2" or ray.n0 == 0.0 or affine_norm:
        t, val = _exact_line_min(ray, t_max)
    else:
        t, val = _golden_line_min(ray, t_max, fb)
    fb_val = ray.delta(fb)
    if not (math.isfinite(val) and math.isfinite(fb_val)):
        raise ValueError("non-finite model value along the search ray")
    if fb_val < val:
        return fb, fb_val
    return t, val


def line_min(q: RegularizedQuadratic, s, d, alpha_max: float, alpha_fallback: float):
    """Approximate argmin of m(s + alpha d) over (0, alpha_max].

    The returned point is never worse than the fallback step, so any decrease
    proved at the fallback transfers to the result.  Returns (alpha, m_new).
    """
    t, delta = _line_search(q, s, d, alpha_max, alpha_fallback)
    return t, q.value(np.asarray(s, dtype=float)) + delta


def cauchy_step(q: RegularizedQuadratic, s_k, g_k):
    """Steepest-descent step of the quadratic part in the regularizer norm.

    Requires dual(g_k) >= sigma/2 ||s_k||^2 and g_k != 0.  Returns
    (s_next, decrease, guaranteed) where ``guaranteed`` is the proof-level
    lower bound on the decrease obtained at the analytic fallback step.
    """
    s_k = np.asarray(s_k, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    norm = q.norm
    sigma = q.sigma
    t = norm.value(s_k)
    gd = norm.dual_value(g_k)
    if not np.any(g_k):
        raise ValueError("cauchy step undefined for a zero quadratic gradient")
    if gd < 0.5 * sigma * t * t:
        raise ValueError("cauchy step requires dual(g) >= sigma/2 ||s||^2")
    d = norm.descent_direction(g_k)
    hdd = float(d @ (q.H @ d))
    if t == 0.0:
        c = gd
        alpha_fb = safeguard_alpha(-sigma / 6.0, -0.5 * hdd, c, 1.0)
        guaranteed = 0.5 * c * alpha_fb
        step_fb = alpha_fb
    else:
        beta = 0.5 * sigma * t ** 3
        c = gd * t - beta
        if c <= 0.0:
            # Exact boundary dual(g) = sigma/2 ||s||^2: only a vacuous bound.
            guaranteed = 0.0
            step_fb = 1e-8 * (1.0 + t)
        else:
            hvv = t * t * hdd
            alpha_fb = safeguard_alpha(-beta / 3.0, -(0.5 * hvv + beta), c, 0.5 * t * t)
            guaranteed = 0.5 * c * alpha_fb
            step_fb = alpha_fb * t
    alpha, delta = _line_search(q, s_k, d, 2.0 * q.kappa_upper(), step_fb, g_s=g_k)
    if delta >= 0.0:
        return s_k, 0.0, guaranteed
    return s_k + alpha * d, -delta, guaranteed


def retraction_step(q: RegularizedQuadratic, s_k, g_k):
    """Move back toward the origin along -s_k when the iterate is too long.

    Requires dual(g_k) < sigma/2 ||s_k||^2 (which forces s_k != 0).  Returns
    (s_next, decrease, guaranteed) with the step (1 - alpha) s_k, alpha in (0, 1].
    """
    s_k = np.asarray(s_k, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    sigma = q.sigma
    t = q.norm.value(s_k)
    gd = q.norm.dual_value(g_k)
    if not gd < 0.5 * sigma * t * t:
        raise ValueError("retraction requires dual(g) < sigma/2 ||s||^2")
    beta = 0.5 * sigma * t ** 3
    gs = float(g_k @ s_k)
    c = gs + beta
    if not c > 0.0:
        # Only possible through rounding at the boundary of the precondition.
        raise ValueError("retraction safeguard lost positivity")
    hss = float(s_k @ (q.H @ s_k))
    alpha_fb = safeguard_alpha(beta / 3.0, -(0.5 * hss + beta), c, 0.5 * t * t)
    if alpha_fb > 1.0:
        # Happens only when m(s_k) > m(0); retract fully and report the
        # directly evaluated decrease as the guarantee.
        alpha_fb = 1.0
        guaranteed = max(0.0, -_Ray(q, s_k, -s_k, g_k).delta(1.0))
    else:
        guaranteed = 0.5 * c * alpha_fb
    alpha, delta = _line_search(q, s_k, -s_k, 1.0, alpha_fb, g_s=g_k, affine_norm=True)
    if delta >= 0.0:
        return s_k, 0.0, guaranteed
    return (1.0 - alpha) * s_k, -delta, guaranteed


def eigen_step(q: RegularizedQuadratic, s_k, g_k):
    """Step along the smallest-eigenvalue direction to exploit negative curvature.

    The eigenvector sign is chosen so <g_k, u> <= 0 (sign(0) taken as +1).
    The guaranteed decrease is the proof-level bound expressed for the
    direction rescaled to unit regularizer norm, which keeps it valid for
    every supported norm; for l2 it coincides with the Euclidean bound
    9 |lambda_min|^3 / (16 sigma^2) at s = 0.
    """
    s_k = np.asarray(s_k, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    lam = q.lambda_min
    if lam >= 0.0:
        raise ValueError("eigen step requires negative curvature")
    sigma = q.sigma
    u = q.eig.u
    gu = float(g_k @ u)
    u_dir = -u if gu >= 0.0 else u
    w = q.norm.value(u_dir)
    ubar = u_dir / w
    lam_eff = lam / (w * w)
    t = q.norm.value(s_k)
    if t == 0.0:
        viol = lam_eff
        step_fb = -1.5 * lam_eff / sigma
    else:
        gse = -abs(gu) / w
        psi_eff = max(0.0, 1.0 + 2.0 * gse / (sigma * t * t))
        omega_eff = 1.0 + 2.0 * math.sqrt(psi_eff) / math.sqrt(3.0)
        viol = lam_eff + sigma * omega_eff * t
        if lam_eff + sigma * t < 0.0:
            step_fb = -1.5 * (lam_eff + sigma * t) / sigma
        else:
            step_fb = -lam_eff / sigma
    guaranteed = 9.0 / (16.0 * sigma * sigma) * max(0.0, -viol) ** 3
    alpha_max = 2.0 * q.kappa_upper()
    alpha, delta = _line_search(q, s_k, ubar, alpha_max, step_fb, g_s=g_k)
    if delta >= -1e-15 * (1.0 + abs(q.f0)):
        # The favored half-line is already minimized; probe the opposite one.
        alpha2, delta2 = _line_search(q, s_k, -ubar, alpha_max, step_fb, g_s=g_k)
        if delta2 < delta:
            alpha, delta, ubar = alpha2, delta2, -ubar
    if delta >= 0.0:
        return s_k, 0.0, guaranteed
    return s_k + alpha * ubar, -delta, guaranteed


def step_radius_bounds(q: RegularizedQuadratic, beta: float):
    """Radii bracketing any iterate with model decrease at least beta >= 0.

    The upper radius holds for every point with m(s) <= m(0).  The lower
    radius uses the Euclidean smallest eigenvalue as the curvature proxy.
    """
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    gd = q.norm.dual_value(q.g)
    hu = q.hnorm_upper()
    upper = (0.5 * hu + math.sqrt(hu * hu + (2.0 / 3.0) * q.sigma * gd)) / (q.sigma / 3.0)
    if beta == 0.0:
        return 0.0, upper
    lam = q.lambda_min
    if lam < 0.0:
        lower = (math.sqrt(gd * gd + 2.0 * beta * abs(lam)) - gd) / abs(lam)
    elif gd > 0.0:
        lower = beta / gd
    else:
        lower = math.inf
    return lower, upper


def rqmin_solve(q: RegularizedQuadratic, mode: str = "full", eps1: float = 1e-8,
                theta1: float = 2.0, theta2: float = 2.0, max_iter: int = 10000,
                adaptive_grad_tol: bool = False) -> RqminResult:
    """Minimize a cubic-regularized quadratic until its step conditions hold.

    Parameters
    ----------
    q : RegularizedQuadratic
        The model to minimize; iterations start from s = 0.
    mode : str
        "full", "relaxed1" or "relaxed2" (see module docstring).
    eps1 : float
        Absolute gradient tolerance of the two-sided test (full mode only).
    theta1, theta2 : float
        Slack factors (> 1) of the one-sided gradient test and curvature test.
    max_iter : int
        One-dimensional minimization budget.
    adaptive_grad_tol : bool
        In full mode, replace eps1 by the step-scaled threshold
        (theta1 - 1) sigma/2 * ||s||^2, which makes the returned step satisfy
        the one-sided certificate by construction.

    Raises
    ------
    SubproblemBudgetError
        When the budget runs out or no candidate step makes progress; the
        best iterate and its log travel with the exception.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not eps1 > 0.0:
        raise ValueError("eps1 must be positive")
    if not (theta1 > 1.0 and theta2 > 1.0):
        raise ValueError("theta1 and theta2 must exceed 1")
    sigma = q.sigma
    norm = q.norm
    s = np.zeros(q.dim)
    g_s = q.g.copy()
    m_cur = q.f0
    log: List[StepRecord] = []

    def _result(terminated: bool) -> RqminResult:
        cert = certify_step(q, s, theta1, None if mode == "relaxed2" else theta2)
        return RqminResult(s, len(log), log, cert, m_cur, terminated)

    for _ in range(max_iter + 1):
        t = norm.value(s)
        gd = norm.dual_value(g_s)
        resid = gd - 0.5 * sigma * t * t
        one_sided = gd - 0.5 * theta1 * sigma * t * t
        if mode == "full":
            if adaptive_grad_tol:
                grad_ok = one_sided <= 0.0 and gd - 0.5 * (2.0 - theta1) * sigma * t * t >= 0.0
            else:
                grad_ok = abs(resid) <= eps1
        else:
            grad_ok = one_sided <= 0.0
        if mode == "relaxed2":
            curv_ok = True
        else:
            curv_ok = q.lambda_min + theta2 * q.omega(s) * sigma * t >= 0.0
        if grad_ok and curv_ok:
            return _result(True)

        candidates = []
        if resid > 0.0:
            candidates.append(("cauchy",) + cauchy_step(q, s, g_s))
        elif resid < 0.0 and mode == "full":
            candidates.append(("retraction",) + retraction_step(q, s, g_s))
        if mode != "relaxed2" and not curv_ok:
            candidates.append(("eigen",) + eigen_step(q, s, g_s))
        if not candidates:
            raise SubproblemBudgetError("no admissible step is available", _result(False))

        # Gradient-type step wins ties against the eigen step.
        kind, s_next, decrease, guaranteed = candidates[0]
        if len(candidates) == 2 and candidates[1][2] > decrease:
            kind, s_next, decrease, guaranteed = candidates[1]
        if decrease <= 0.0:
            raise SubproblemBudgetError("subproblem stalled without progress", _result(False))
        s = s_next
        m_cur -= decrease
        g_s = q.grad(s)
        log.append(StepRecord(kind, decrease, guaranteed, m_cur))
    raise SubproblemBudgetError("subproblem iteration budget exhausted", _result(False))
