"""Signature-aware dense tensors, bilinear forms, linear maps, and profile
functions with exact derivative oracles.

Everything in this module is immutable after construction (component arrays
are marked read-only), so values can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "COV",
    "CON",
    "Signature",
    "Tensor",
    "BilinearForm",
    "LinearMap",
    "ScalarProfile",
    "MultiProfile",
    "contract",
    "pullback",
    "eval_profile",
    "signature_of",
    "profile_from_json",
]

COV = "cov"
CON = "con"

#: Deepest derivative order any profile has to supply.  The rank-6 curvature
#: data of the third metric family needs four derivatives of its profile;
#: nothing in the package asks for more.
MAX_DERIVATIVE_ORDER = 4

_DET_TOL = 1e-12


class ProfileOrderError(ValueError):
    """Raised when a derivative beyond MAX_DERIVATIVE_ORDER is requested."""


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Signature:
    """Counts of negative and positive directions of an orthonormalized
    nondegenerate inner product; ``(p, q)`` is stored as ``neg=p, pos=q``."""

    neg: int
    pos: int

    def __post_init__(self):
        if self.neg < 0 or self.pos < 0:
            raise ValueError("signature counts must be nonnegative")

    @property
    def dim(self) -> int:
        return self.neg + self.pos


def signature_of(form: "BilinearForm", tol: float = 1e-10) -> Signature:
    """Signature of a symmetric bilinear form via its eigenvalues.

    Raises ValueError if any eigenvalue is within ``tol`` of zero (degenerate).
    """
    ev = np.linalg.eigvalsh(form.matrix)
    scale = max(1.0, float(np.max(np.abs(ev))) if ev.size else 1.0)
    if np.any(np.abs(ev) <= tol * scale):
        raise ValueError("degenerate bilinear form has no signature")
    return Signature(neg=int(np.sum(ev < 0)), pos=int(np.sum(ev > 0)))


@dataclass(frozen=True)
class Tensor:
    """Dense real tensor with one variance flag per slot.

    ``components`` is indexed by one index per slot, each in ``[0, dim)``.
    Rank-0 tensors (scalars) are allowed and arise from full contractions.
    """

    dim: int
    variances: tuple
    components: np.ndarray

    def __post_init__(self):
        comp = _frozen(self.components)
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "variances", tuple(self.variances))
        if any(v not in (COV, CON) for v in self.variances):
            raise ValueError(f"bad variance flags {self.variances!r}")
        expected = (self.dim,) * len(self.variances)
        if comp.shape != expected:
            raise ValueError(
                f"component shape {comp.shape} does not match {expected}"
            )

    @property
    def rank(self) -> int:
        return len(self.variances)

    def allclose(self, other: "Tensor", tol: float = 1e-12) -> bool:
        """Componentwise equality within an absolute tolerance."""
        if self.dim != other.dim or self.variances != other.variances:
            return False
        return bool(np.max(np.abs(self.components - other.components), initial=0.0) <= tol)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components), initial=0.0))


def covariant_tensor(components: np.ndarray) -> Tensor:
    """Tensor with every slot covariant, dim inferred from the array."""
    comp = np.asarray(components, dtype=float)
    dim = comp.shape[0] if comp.ndim else 0
    return Tensor(dim=dim, variances=(COV,) * comp.ndim, components=comp)


@dataclass(frozen=True)
class BilinearForm:
    """Symmetric bilinear form stored as a dense matrix.

    Symmetry is required exactly at construction; nondegeneracy is only
    checked where the form is used as a metric (inverse, contraction).
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("bilinear form needs a square matrix")
        if not np.array_equal(m, m.T):
            raise ValueError("bilinear form matrix must be exactly symmetric")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> np.ndarray:
        if abs(self.det()) <= _DET_TOL:
            raise np.linalg.LinAlgError("singular metric")
        return np.linalg.inv(self.matrix)

    def apply(self, v, w) -> float:
        return float(np.asarray(v) @ self.matrix @ np.asarray(w))


@dataclass(frozen=True)
class LinearMap:
    """Linear map stored as a (target_dim x source_dim) matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def inverse(self) -> "LinearMap":
        if self.source_dim != self.target_dim:
            raise ValueError("only square maps can be inverted")
        if abs(np.linalg.det(self.matrix)) <= _DET_TOL:
            raise np.linalg.LinAlgError("singular linear map")
        return LinearMap(np.linalg.inv(self.matrix))


def contract(t: Tensor, slot_a: int, slot_b: int, metric: BilinearForm) -> Tensor:
    """Trace a pair of slots against the metric.

    Two covariant slots are traced with the metric inverse, two contravariant
    slots with the metric itself, and a mixed pair with the Kronecker delta.
    The result has rank reduced by two.
    """
    rank = t.rank
    if slot_a == slot_b:
        raise ValueError("contraction slots must differ")
    if not (0 <= slot_a < rank and 0 <= slot_b < rank):
        raise ValueError(f"slots ({slot_a}, {slot_b}) out of range for rank {rank}")
    if metric.dim != t.dim:
        raise ValueError("metric dimension does not match tensor")
    va, vb = t.variances[slot_a], t.variances[slot_b]
    if va == COV and vb == COV:
        pairing = metric.inverse()
    elif va == CON and vb == CON:
        pairing = metric.matrix
    else:
        pairing = np.eye(t.dim)
    moved = np.moveaxis(t.components, (slot_a, slot_b), (-2, -1))
    comp = np.einsum("...ab,ab->...", moved, pairing)
    keep = [v for k, v in enumerate(t.variances) if k not in (slot_a, slot_b)]
    return Tensor(dim=t.dim, variances=tuple(keep), components=comp)


def pullback(t: Tensor, m: LinearMap) -> Tensor:
    """Pull a fully covariant tensor back along a linear map.

    ``pullback(t, m)(v1, ..., vk) = t(m v1, ..., m vk)``.
    """
    if any(v != COV for v in t.variances):
        raise ValueError("pullback requires all slots covariant")
    if m.target_dim != t.dim:
        raise ValueError("map target dimension does not match tensor")
    comp = t.components
    for slot in range(t.rank):
        # contract slot's index j with M[j, i], leaving the new index last
        comp = np.moveaxis(np.tensordot(m.matrix, comp, axes=([0], [slot])), 0, slot)
    return Tensor(dim=m.source_dim, variances=t.variances, components=comp)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _poly_derivative_coeffs(coeffs: np.ndarray, order: int) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    for _ in range(order):
        c = c[1:] * np.arange(1, len(c)) if len(c) > 1 else np.zeros(1)
    return c if len(c) else np.zeros(1)


class ScalarProfile:
    """Function of one real variable queried through a derivative oracle.

    Polynomial profiles return exact derivative values; wrapped callables are
    trusted as supplied.  Derivative orders above MAX_DERIVATIVE_ORDER raise.
    """

    def __init__(self, evaluator: Callable[[float, int], float], kind: str,
                 coeffs: Sequence[float] | None = None):
        self._eval = evaluator
        self.kind = kind
        self.coeffs = None if coeffs is None else tuple(float(c) for c in coeffs)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "ScalarProfile":
        coeffs = tuple(float(c) for c in coeffs) or (0.0,)
        derivs = [_poly_derivative_coeffs(coeffs, k)
                  for k in range(MAX_DERIVATIVE_ORDER + 1)]

        def ev(u, order):
            return np.polynomial.polynomial.polyval(u, derivs[order])

        return cls(ev, "polynomial", coeffs=coeffs)

    @classmethod
    def zero(cls) -> "ScalarProfile":
        return cls.polynomial([0.0])

    @classmethod
    def from_callable(cls, fn: Callable[[float, int], float]) -> "ScalarProfile":
        return cls(fn, "oracle")

    def __call__(self, u: float, order: int = 0) -> float:
        self._check_order(order)
        return float(self._eval(float(u), order))

    def batch(self, u: np.ndarray, order: int = 0) -> np.ndarray:
        """Vectorized evaluation over an array of arguments."""
        self._check_order(order)
        u = np.asarray(u, dtype=float)
        if self.kind == "polynomial":
            return np.asarray(self._eval(u, order), dtype=float)
        return np.array([self._eval(x, order) for x in u.ravel()]).reshape(u.shape)

    def _check_order(self, order: int):
        if not 0 <= order <= MAX_DERIVATIVE_ORDER:
            raise ProfileOrderError(
                f"derivative order {order} outside [0, {MAX_DERIVATIVE_ORDER}]"
            )

    def to_json(self) -> dict:
        if self.kind != "polynomial":
            raise ValueError("only polynomial profiles serialize to JSON")
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}


class MultiProfile:
    """Function of several real variables with mixed-partial oracle.

    Partial derivatives are requested through a per-variable multi-degree
    ``alpha`` (a tuple with one entry per variable), which makes symmetry
    under index permutation automatic.  Total order is capped at
    MAX_DERIVATIVE_ORDER.
    """

    def __init__(self, nvars: int,
                 evaluator: Callable[[np.ndarray, tuple], float],
                 kind: str, terms=None):
        self.nvars = int(nvars)
        self._eval = evaluator
        self.kind = kind
        self.terms = terms

    @classmethod
    def polynomial(cls, nvars: int, terms: Sequence[tuple]) -> "MultiProfile":
        """Polynomial from ``terms = [(exponents, coeff), ...]``."""
        canon = []
        for exponents, coeff in terms:
            e = tuple(int(k) for k in exponents)
            if len(e) != nvars or any(k < 0 for k in e):
                raise ValueError(f"bad exponent tuple {e} for {nvars} variables")
            canon.append((e, float(coeff)))

        def ev(x, alpha):
            total = 0.0
            for e, c in canon:
                term = c
                for xi, ei, ai in zip(x, e, alpha):
                    if ai > ei:
                        term = 0.0
                        break
                    term *= math.perm(ei, ai) * xi ** (ei - ai)
                total += term
            return total

        return cls(nvars, ev, "polynomial", terms=tuple(canon))

    @classmethod
    def from_callable(cls, nvars: int, fn) -> "MultiProfile":
        return cls(nvars, fn, "oracle")

    def partial(self, x, alpha) -> float:
        x = np.asarray(x, dtype=float)
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.nvars or any(a < 0 for a in alpha):
            raise ValueError(f"bad multi-degree {alpha}")
        if sum(alpha) > MAX_DERIVATIVE_ORDER:
            raise ProfileOrderError(
                f"total derivative order {sum(alpha)} exceeds {MAX_DERIVATIVE_ORDER}"
            )
        return float(self._eval(x, alpha))

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        """Symmetric tensor of all order-``order`` partials at ``x``."""
        p = self.nvars
        out = np.zeros((p,) * order) if order else np.array(self.partial(x, (0,) * p))
        for combo in combinations_with_replacement(range(p), order):
            alpha = [0] * p
            for i in combo:
                alpha[i] += 1
            val = self.partial(x, alpha)
            for perm in set(permutations(combo)):
                out[perm] = val
        return out

    def derivative_tensor_batch(self, X: np.ndarray, order: int) -> np.ndarray:
        """Derivative tensors at each row of ``X``; shape (N, p, ..., p)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, p = X.shape
        out = np.zeros((n,) + (p,) * order)
        for combo in combinations_with_replacement(range(p), order):
            alpha = [0] * p
            for i in combo:
                alpha[i] += 1
            if self.kind == "polynomial":
                vals = self._poly_partial_batch(X, alpha)
            else:
                vals = np.array([self._eval(row, tuple(alpha)) for row in X])
            for perm in set(permutations(combo)):
                out[(slice(None),) + perm] = vals
        return out

    def _poly_partial_batch(self, X: np.ndarray, alpha) -> np.ndarray:
        total = np.zeros(X.shape[0])
        for e, c in self.terms:
            if any(a > k for a, k in zip(alpha, e)):
                continue
            term = np.full(X.shape[0], c)
            for i, (ei, ai) in enumerate(zip(e, alpha)):
                term = term * math.perm(ei, ai) * X[:, i] ** (ei - ai)
            total += term
        return total

    def check_oracle(self, points, h: float = 1e-4, rtol: float = 1e-5) -> float:
        """Cross-check an oracle's first and second partials against central
        differences of its order-0 values; returns the worst relative error."""
        worst = 0.0
        for x in points:
            x = np.asarray(x, dtype=float)
            for i in range(self.nvars):
                ei = np.zeros(self.nvars)
                ei[i] = 1.0
                fd = (self.partial(x + h * ei, (0,) * self.nvars)
                      - self.partial(x - h * ei, (0,) * self.nvars)) / (2 * h)
                a = [0] * self.nvars
                a[i] = 1
                exact = self.partial(x, a)
                worst = max(worst, abs(fd - exact) / max(1.0, abs(exact)))
        if worst > rtol:
            raise ValueError(f"oracle failed finite-difference check ({worst:.3e})")
        return worst


def eval_profile(p, point, order):
    """Evaluate a profile derivative: scalar profiles take an integer order,
    multivariate profiles a per-variable multi-degree."""
    if isinstance(p, ScalarProfile):
        return p(point, order)
    if isinstance(p, MultiProfile):
        return p.partial(point, order)
    raise TypeError(f"not a profile: {type(p).__name__}")


def profile_from_json(obj: dict, nvars: int | None = None):
    """Build a profile from its JSON form.

    Scalar: ``{"kind": "polynomial", "coeffs": [c0, c1, ...]}``.
    Multivariate: ``{"kind": "polynomial",
    "terms": [{"exponents": [...], "coeff": ...}, ...]}``.
    """
    if obj.get("kind") != "polynomial":
        raise ValueError(f"unsupported profile kind {obj.get('kind')!r}")
    if "coeffs" in obj:
        return ScalarProfile.polynomial(obj["coeffs"])
    if "terms" in obj:
        terms = [(t["exponents"], t["coeff"]) for t in obj["terms"]]
        if nvars is None:
            if not terms:
                raise ValueError("cannot infer variable count from empty terms")
            nvars = len(terms[0][0])
        return MultiProfile.polynomial(nvars, terms)
    raise ValueError("polynomial profile needs 'coeffs' or 'terms'")
