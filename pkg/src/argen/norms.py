"""Norm primitives for the l1, l2 and linf regularizers.

Every norm-dependent quantity the solvers touch comes through this module:
the norm value, its dual norm, a unit-norm steepest-descent direction for a
linear form, and a subgradient witness.  All four are exact (closed form)
for the three supported kinds.  Supporting another norm means supplying the
same four primitives; only these three kinds ship.
"""

from __future__ import annotations

import itertools

import numpy as np

from .linalg import check_symmetric, spectral_norm

_DUAL_KIND = {"l1": "linf", "l2": "l2", "linf": "l1"}


def _checked_vector(v, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{what} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} contains non-finite entries")
    return v


class GeneralNorm:
    """One of the norms ``l1``, ``l2``, ``linf`` with its dual-norm machinery."""

    kinds = ("l1", "l2", "linf")

    def __init__(self, kind: str):
        kind = str(kind).lower()
        if kind not in self.kinds:
            raise ValueError(f"unknown norm kind {kind!r}, expected one of {self.kinds}")
        self.kind = kind
        self.dual_kind = _DUAL_KIND[kind]

    def __repr__(self):
        return f"GeneralNorm({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, GeneralNorm) and other.kind == self.kind

    def __hash__(self):
        return hash(("GeneralNorm", self.kind))

    def dual(self) -> "GeneralNorm":
        """The dual norm: l1 <-> linf, l2 <-> l2."""
        return GeneralNorm(self.dual_kind)

    # Unvalidated fast paths for the solver hot loops.
    def _value(self, s: np.ndarray) -> float:
        if self.kind == "l1":
            return float(np.sum(np.abs(s)))
        if self.kind == "l2":
            return float(np.linalg.norm(s))
        return float(np.max(np.abs(s), initial=0.0))

    def _dual_value(self, g: np.ndarray) -> float:
        if self.dual_kind == "l1":
            return float(np.sum(np.abs(g)))
        if self.dual_kind == "l2":
            return float(np.linalg.norm(g))
        return float(np.max(np.abs(g), initial=0.0))

    def value(self, s) -> float:
        return self._value(_checked_vector(s))

    def dual_value(self, g) -> float:
        """Value of the dual norm, i.e. max of <g, v> over the unit ball."""
        return self._dual_value(_checked_vector(g))

    def descent_direction(self, g) -> np.ndarray:
        """Unit-norm direction d minimizing <g, d>, so <g, d> = -dual_value(g).

        Ties for the l1 vertex go to the lowest index; l∞ components where
        g_i = 0 are left at zero.  Raises for g = 0.
        """
        g = _checked_vector(g, "gradient")
        if not np.any(g):
            raise ValueError("descent direction is undefined for a zero vector")
        if self.kind == "l2":
            return -g / np.linalg.norm(g)
        if self.kind == "l1":
            i = int(np.argmax(np.abs(g)))
            d = np.zeros_like(g)
            d[i] = -np.sign(g[i])
            return d
        return -np.sign(g)

    def subgradient_witness(self, s) -> np.ndarray:
        """A vector v with <v, s> = value(s) and dual_value(v) = 1 (s != 0)."""
        s = _checked_vector(s)
        if not np.any(s):
            raise ValueError("subgradient witness is undefined at the origin")
        if self.kind == "l2":
            return s / np.linalg.norm(s)
        if self.kind == "l1":
            return np.sign(s)
        i = int(np.argmax(np.abs(s)))
        v = np.zeros_like(s)
        v[i] = np.sign(s[i])
        return v


def norm_by_name(kind: str) -> GeneralNorm:
    return GeneralNorm(kind)


def _unit_ball_probes(norm: GeneralNorm, n: int, samples: int, rng) -> np.ndarray:
    """Deterministic extreme points plus random points on the unit sphere."""
    rows = []
    eye = np.eye(n)
    if norm.kind == "l1":
        rows.append(eye)
        # Face midpoints (e_i +/- e_j) / 2 still have unit l1 norm.
        for i in range(n):
            for j in range(i + 1, n):
                rows.append((eye[i] + eye[j])[None, :] / 2.0)
                rows.append((eye[i] - eye[j])[None, :] / 2.0)
    elif norm.kind == "linf":
        if n <= 12:
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
            rows.append(signs)
        else:
            rows.append(rng.choice((-1.0, 1.0), size=(4 * samples, n)))
        rows.append(eye)
    else:
        rows.append(eye)
    X = rng.standard_normal((samples, n))
    scale = np.array([norm.value(x) for x in X])
    rows.append(X / scale[:, None])
    return np.vstack(rows)


def induced_norm_bounds(norm: GeneralNorm, H, samples: int = 512, seed: int = 0):
    """Sandwich estimate (lower, upper) for the quadratic-form norm of H.

    The target is max of \\|v^T H v\\| over the unit ball of ``norm``.  The lower
    bound samples the unit sphere (including its extreme points); the upper
    bound comes from norm equivalence with the spectral norm (exact for l2).
    Intended as a test/diagnostic oracle only: the solvers never call it, and
    an exact value for l1/linf would require global nonconvex optimization.
    """
    H = check_symmetric(H)
    n = H.shape[0]
    spec = spectral_norm(H)
    if norm.kind == "l2":
        return spec, spec
    rng = np.random.default_rng(seed)
    V = _unit_ball_probes(norm, n, samples, rng)
    lower = float(np.max(np.abs(np.einsum("ij,jk,ik->i", V, H, V)), initial=0.0))
    upper = spec if norm.kind == "l1" else n * spec
    return lower, float(upper)
