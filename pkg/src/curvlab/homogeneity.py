"""Scalar invariants built from the derivative of curvature, the
second-derivative support classifier for the third family, and constancy
scans over point sets.

Non-constancy verdicts are evidence, not proof: reports state what the
sampled points showed and carry the witness values.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .families import Family1, Family2, Family3, FamilySpec, check_point, curvature_oracle

__all__ = [
    "KPClass",
    "KPLabel",
    "ScanReport",
    "alpha1",
    "alpha1_brute",
    "alpha2",
    "kp_classify",
    "kp_scan",
    "constancy_scan",
]

KP_ZERO_TOL = 1e-10


def _family1_block(spec: Family1, P) -> tuple:
    P = check_point(spec, P)
    p = spec.p
    H = spec.f.derivative_tensor(P[:p], 2)
    _, T5 = curvature_oracle(spec, P)
    return H, T5.components[:p, :p, :p, :p, :p]


def alpha1(spec: Family1, P) -> float:
    """First-derivative curvature invariant of family 1: the squared norm of
    the derivative tensor in a frame orthonormalizing the profile Hessian.

    Mathematically identical to the literal double contraction against five
    inverse-Hessian factors (see ``alpha1_brute``) at O(p^5) instead of
    O(p^10).  Requires a positive definite Hessian.
    """
    H, block = _family1_block(spec, P)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError("profile Hessian is not positive definite") from exc
    W = np.linalg.inv(L)
    for slot in range(5):
        block = np.moveaxis(np.tensordot(W, block, axes=([1], [slot])), 0, slot)
    return float(np.sum(block * block))


def alpha1_brute(spec: Family1, P) -> float:
    """Independent oracle for ``alpha1``: the literal 10-index contraction of
    the derivative tensor with itself against five inverse-Hessian factors,
    summed without factorization."""
    H, block = _family1_block(spec, P)
    if abs(np.linalg.det(H)) <= 1e-12:
        raise ValueError("singular profile Hessian")
    Hinv = np.linalg.inv(H)
    return float(np.einsum("as,bt,cu,dv,ew,abcde,stuvw->",
                           Hinv, Hinv, Hinv, Hinv, Hinv, block, block,
                           optimize=False))


def alpha2(spec: Family2, P) -> float:
    """First-derivative curvature invariant of family 2: the full sum of
    squared derivative-tensor components over all quintuples of u-directions.

    The index multiplicities are never hand-counted; the full 5-index sum is
    the definition and the implementation.
    """
    P = check_point(spec, P)
    s = spec.s
    _, T5 = curvature_oracle(spec, P)
    block = T5.components[:s, :s, :s, :s, :s]
    return float(np.sum(block * block))


# ---------------------------------------------------------------------------
# second-derivative support classifier (family 3)
# ---------------------------------------------------------------------------

class KPLabel(str, Enum):
    BOTH_NONZERO = "BothNonzero"
    ONLY_QUARTIC = "OnlyQuartic"
    ONLY_MIXED = "OnlyMixed"
    EMPTY = "Empty"


@dataclass(frozen=True)
class KPClass:
    """Which of the four support cases the second derivative of curvature
    falls into at a point, from the two scalar indicators."""

    label: KPLabel
    quartic_nonzero: bool
    mixed_nonzero: bool
    quartic_value: float
    mixed_value: float
    marginal: bool

    def to_json(self) -> dict:
        return {"label": self.label.value,
                "quartic_nonzero": self.quartic_nonzero,
                "mixed_nonzero": self.mixed_nonzero,
                "quartic_value": self.quartic_value,
                "mixed_value": self.mixed_value,
                "marginal": self.marginal}


def _kp_label(quartic: bool, mixed: bool) -> KPLabel:
    if quartic and mixed:
        return KPLabel.BOTH_NONZERO
    if quartic:
        return KPLabel.ONLY_QUARTIC
    if mixed:
        return KPLabel.ONLY_MIXED
    return KPLabel.EMPTY


def kp_classify(spec: Family3, P, zero_tol: float = KP_ZERO_TOL) -> KPClass:
    """Classify a point by the fourth profile derivative and the next-to-last
    u-coordinate.

    Values within a decade of ``zero_tol`` are flagged marginal instead of
    being silently binned.
    """
    P = check_point(spec, P)
    r = spec.r
    quartic_value = spec.psi(P[r - 1], 4)
    mixed_value = float(P[r - 2])
    quartic = abs(quartic_value) > zero_tol
    mixed = abs(mixed_value) > zero_tol
    marginal = any(zero_tol / 10 < abs(v) < zero_tol * 10
                   for v in (quartic_value, mixed_value))
    return KPClass(label=_kp_label(quartic, mixed),
                   quartic_nonzero=quartic, mixed_nonzero=mixed,
                   quartic_value=float(quartic_value), mixed_value=mixed_value,
                   marginal=marginal)


@dataclass(frozen=True)
class KPComparison:
    class_p: KPClass
    class_q: KPClass
    differ: bool

    def to_json(self) -> dict:
        return {"P": self.class_p.to_json(), "Q": self.class_q.to_json(),
                "differ": self.differ}


def kp_scan(spec: Family3, P, Q, zero_tol: float = KP_ZERO_TOL) -> KPComparison:
    """Compare the support classes at two points; differing labels obstruct
    any isomorphism of the order-2 curvature data between the points."""
    cp = kp_classify(spec, P, zero_tol)
    cq = kp_classify(spec, Q, zero_tol)
    return KPComparison(class_p=cp, class_q=cq, differ=cp.label != cq.label)


# ---------------------------------------------------------------------------
# constancy scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanReport:
    invariant: str
    points: tuple
    values: tuple
    spread: float
    constant: bool
    tol: float

    def to_json(self) -> dict:
        return {"invariant": self.invariant,
                "points": [[float(x) for x in p] for p in self.points],
                "values": [float(v) for v in self.values],
                "spread": self.spread, "constant": self.constant,
                "tol": self.tol}


def constancy_scan(invariant: str, spec: FamilySpec, points,
                   tol: float = 1e-8) -> ScanReport:
    """Evaluate an invariant over a point list and report whether its spread
    exceeds ``tol * (1 + max|value|)``."""
    if invariant == "alpha1":
        if spec.family != 1:
            raise ValueError("alpha1 needs a family-1 spec")
        fn = alpha1
    elif invariant == "alpha2":
        if spec.family != 2:
            raise ValueError("alpha2 needs a family-2 spec")
        fn = alpha2
    else:
        raise ValueError(f"unknown invariant {invariant!r}")
    if len(points) < 2:
        raise ValueError("constancy scan needs at least 2 points")
    pts = [check_point(spec, P) for P in points]
    values = [fn(spec, P) for P in pts]
    spread = float(max(values) - min(values))
    constant = spread <= tol * (1.0 + max(abs(v) for v in values))
    return ScanReport(invariant=invariant, points=tuple(map(tuple, pts)),
                      values=tuple(values), spread=spread, constant=constant,
                      tol=tol)
