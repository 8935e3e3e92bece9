"""Jacobi and skew-symmetric curvature operators, nilpotency and rank
analysis, seeded unit-vector/2-plane sampling, and the constancy probes for
operator Jordan type over causal classes.

Jordan type is compared through rank sequences of operator powers plus
characteristic polynomial coefficients: for nilpotent operators the rank
sequence determines the Jordan form exactly, and the coefficients catch any
eigenvalue drift without an explicit (numerically fragile) Jordan
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BilinearForm, Tensor
from .curvature import curvature_package
from .families import FamilySpec, check_point

__all__ = [
    "Endomorphism",
    "RankSequence",
    "SamplerConfig",
    "ProbeVerdict",
    "jacobi",
    "ricci",
    "skew_curvature_operator",
    "orthonormalize_plane",
    "nilpotency_index",
    "rank_sequence",
    "sample_unit_vectors",
    "sample_planes",
    "jordan_probe",
    "ip_probe",
]

RANK_TOL = 1e-8
OPERATOR_TOL = 1e-9


@dataclass(frozen=True)
class Endomorphism:
    """Operator on the tangent space; ``matrix[i, j]`` is component i of the
    image of basis vector j."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class RankSequence:
    """``ranks[k-1] = rank(A^k)`` for k = 1..dim; non-increasing."""

    ranks: tuple

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if any(a < b for a, b in zip(self.ranks, self.ranks[1:])):
            raise ValueError("rank sequence must be non-increasing")


@dataclass(frozen=True)
class SamplerConfig:
    """Deterministic sampling parameters; every probe embeds its seed."""

    seed: int = 0
    count: int = 100
    rejection_cap: int = 100_000
    box: float = 2.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])


def _raise_operator(g: BilinearForm, pairing: np.ndarray) -> np.ndarray:
    # solve g(O e_b, e_z) = pairing[b, z] for the operator matrix
    return g.inverse() @ pairing.T


def jacobi(R: Tensor, g: BilinearForm, x) -> Endomorphism:
    """Jacobi operator of a direction: the g-self-adjoint operator J with
    g(J(x) y, z) = R(y, x, x, z).  Satisfies J(x) x = 0."""
    x = np.asarray(x, dtype=float)
    M = np.einsum("yabz,a,b->yz", R.components, x, x)
    return Endomorphism(_raise_operator(g, M))


def ricci(R: Tensor, g: BilinearForm, x) -> float:
    """Ricci quadratic form rho(x, x), the trace of the Jacobi operator."""
    return float(np.trace(jacobi(R, g, x).matrix))


def orthonormalize_plane(g: BilinearForm, v1, v2, orientation: int = +1):
    """Orthonormal basis of the definite 2-plane spanned by (v1, v2).

    The induced inner product must be definite (checked through the 2x2 Gram
    matrix); Gram-Schmidt runs in it, preserving the (v1, v2) orientation, and
    ``orientation=-1`` flips the second vector.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    a, b, c = g.apply(v1, v1), g.apply(v1, v2), g.apply(v2, v2)
    gram_det = a * c - b * b
    if gram_det <= 1e-12 * max(1.0, a * a + b * b + c * c):
        raise ValueError("degenerate plane")
    sign = 1.0 if a > 0 else -1.0
    # work in the positive-definite product sign * g
    e1 = v1 / np.sqrt(sign * a)
    w = v2 - (sign * g.apply(v2, e1)) * e1
    ww = sign * g.apply(w, w)
    if ww <= 0:
        raise ValueError("degenerate plane")
    e2 = w / np.sqrt(ww)
    if orientation < 0:
        e2 = -e2
    return e1, e2


def skew_curvature_operator(R: Tensor, g: BilinearForm, e1, e2,
                            tol: float = 1e-10) -> Endomorphism:
    """Skew-symmetric curvature operator of an oriented orthonormal 2-plane:
    g(op y, z) = R(e1, e2, y, z)."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    n1, n2, cross = g.apply(e1, e1), g.apply(e2, e2), g.apply(e1, e2)
    if abs(abs(n1) - 1) > tol or abs(abs(n2) - 1) > tol or abs(cross) > tol:
        raise ValueError("plane basis is not orthonormal")
    N = np.einsum("abyz,a,b->yz", R.components, e1, e2)
    return Endomorphism(_raise_operator(g, N))


# ---------------------------------------------------------------------------
# nilpotency / Jordan data
# ---------------------------------------------------------------------------

def nilpotency_index(A: Endomorphism, tol: float = RANK_TOL):
    """Smallest n with ||A^n|| below the scale-consistent threshold
    ``tol * ||A||^n * dim`` (and ||A^(n-1)|| above it); None if no n <= dim
    qualifies, i.e. the operator is not numerically nilpotent."""
    m = A.matrix
    dim = A.dim
    norm = float(np.linalg.norm(m, 2))
    if norm == 0.0:
        return 1
    power = np.eye(dim)
    norms = [1.0]  # ||A^0||
    for _ in range(dim):
        power = power @ m
        norms.append(float(np.linalg.norm(power, 2)))
    for n in range(1, dim + 1):
        if norms[n] < tol * norm ** n * dim and norms[n - 1] >= tol * norm ** (n - 1) * dim:
            return n
    return None


def matrix_rank(m: np.ndarray, tol: float = RANK_TOL, scale: float | None = None) -> int:
    """Rank by singular-value thresholding: values below
    ``tol * scale * dim`` count as zero; scale defaults to the largest
    singular value of ``m``."""
    sv = np.linalg.svd(m, compute_uv=False)
    if scale is None:
        scale = float(sv[0]) if sv.size else 0.0
    return int(np.sum(sv > tol * scale * m.shape[0]))


def rank_sequence(A: Endomorphism, tol: float = RANK_TOL) -> RankSequence:
    """Ranks of A^k for k = 1..dim; the singular-value threshold for the k-th
    power scales as ||A||^k so products of small entries do not fake rank."""
    m = A.matrix
    dim = A.dim
    norm = float(np.linalg.norm(m, 2))
    ranks = []
    power = np.eye(dim)
    for k in range(1, dim + 1):
        power = power @ m
        ranks.append(matrix_rank(power, tol=tol, scale=norm ** k if norm else 0.0))
    return RankSequence(tuple(ranks))


def charpoly_coefficients(A: Endomorphism) -> np.ndarray:
    """Characteristic polynomial coefficients (c_1..c_dim, monic leading 1
    omitted) by the Faddeev-LeVerrier recursion; polynomial in the entries,
    so robust for defective matrices."""
    m = A.matrix
    dim = A.dim
    M = np.zeros_like(m)
    coeffs = []
    c = 1.0
    for k in range(1, dim + 1):
        M = m @ M + c * np.eye(dim)
        c = -np.trace(m @ M) / k
        coeffs.append(c)
    return np.array(coeffs)


def jordan_signature(A: Endomorphism, tol: float = RANK_TOL):
    """(rank sequence, scale-normalized charpoly coefficients) pair used for
    Jordan-type comparisons."""
    seq = rank_sequence(A, tol=tol)
    norm = float(np.linalg.norm(A.matrix, 2))
    coeffs = charpoly_coefficients(A)
    if norm > 0:
        coeffs = coeffs / norm ** np.arange(1, A.dim + 1)
    return seq, coeffs


def _same_signature(sig_a, sig_b, tol: float) -> bool:
    if sig_a[0] != sig_b[0] or sig_a[1].shape != sig_b[1].shape:
        return False
    return bool(np.max(np.abs(sig_a[1] - sig_b[1]), initial=0.0) <= tol)


# ---------------------------------------------------------------------------
# seeded sampling
# ---------------------------------------------------------------------------

def sample_unit_vectors(g: BilinearForm, sign: int, cfg: SamplerConfig,
                        stream: int = 0, sparse: bool = False) -> list:
    """Rejection-sample unit vectors with g(v, v) = sign in {+1, -1}.

    Raw draws are uniform in a box and normalized by |g(v, v)|^(1/2);
    deterministic for a fixed (seed, stream).  With ``sparse`` each draw
    zeroes a random coordinate subset first, so degenerate directions that a
    continuous distribution never hits get sampled too.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    rng = cfg.rng(stream)
    out = []
    draws = 0
    while len(out) < cfg.count:
        draws += 1
        if draws > cfg.rejection_cap:
            raise RuntimeError(
                f"rejection cap {cfg.rejection_cap} exceeded sampling "
                f"sign={sign} unit vectors")
        v = rng.uniform(-cfg.box, cfg.box, g.dim)
        if sparse and rng.random() < 0.5:
            v *= rng.random(g.dim) < 0.5
        q = g.apply(v, v)
        if sign * q > 1e-6:
            out.append(v / np.sqrt(abs(q)))
    return out


def sample_planes(g: BilinearForm, sign: int, cfg: SamplerConfig,
                  stream: int = 0, sparse: bool = False) -> list:
    """Oriented orthonormal bases of definite 2-planes of the given sign.

    Raw draws live in the metric's whitened eigenframe so the acceptance rate
    stays bounded away from zero however skewed the metric is at the point.
    ``sparse`` restricts each draw to a random eigen-subspace (shared by both
    spanning vectors), reaching degenerate plane families."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    rng = cfg.rng(stream)
    lam, frame = np.linalg.eigh(g.matrix)
    if np.any(np.abs(lam) < 1e-12):
        raise np.linalg.LinAlgError("singular metric")
    whitened = frame / np.sqrt(np.abs(lam))[None, :]
    out = []
    draws = 0
    while len(out) < cfg.count:
        draws += 1
        if draws > cfg.rejection_cap:
            raise RuntimeError(
                f"rejection cap {cfg.rejection_cap} exceeded sampling "
                f"sign={sign} planes")
        w1 = rng.uniform(-cfg.box, cfg.box, g.dim)
        w2 = rng.uniform(-cfg.box, cfg.box, g.dim)
        if sparse and rng.random() < 0.5:
            mask = rng.random(g.dim) < 0.5
            w1 *= mask
            w2 *= mask
        v1 = whitened @ w1
        v2 = whitened @ w2
        a, b, c = g.apply(v1, v1), g.apply(v1, v2), g.apply(v2, v2)
        if a * c - b * b <= 1e-6 or sign * a <= 0:
            continue
        out.append(orthonormalize_plane(g, v1, v2))
    return out


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeVerdict:
    constant: bool
    samples_used: int
    escalated: bool
    witness: dict | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def plain(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v]
            if isinstance(v, (tuple, list)):
                return [plain(x) for x in v]
            return v

        out = {"constant": self.constant, "samples_used": self.samples_used,
               "escalated": self.escalated, "detail": dict(self.detail)}
        if self.witness is not None:
            out["witness"] = {k: plain(v) for k, v in self.witness.items()}
        return out


def _probe(points_data, sampler, operator, cfg: SamplerConfig, tol: float):
    """Shared probe driver: compare Jordan signatures of operators built from
    seeded samples, escalating the sample count up to 10x before accepting
    constancy.

    The escalation phase draws from random coordinate subspaces as well; the
    degenerate operators that witness non-constancy often sit on measure-zero
    sets a continuous sampler cannot reach.
    """
    reference = None
    ref_info = None
    used = 0
    escalated = False
    for phase, count in enumerate([cfg.count, 9 * cfg.count]):
        if phase == 1:
            escalated = True
        if count == 0:
            continue
        phase_cfg = SamplerConfig(seed=cfg.seed, count=count,
                                  rejection_cap=cfg.rejection_cap, box=cfg.box)
        for p_idx, (point, R, g) in enumerate(points_data):
            samples = sampler(g, phase_cfg, stream=2 * p_idx + phase,
                              sparse=phase == 1)
            for s_idx, sample in enumerate(samples):
                op = operator(R, g, sample)
                sig = jordan_signature(op)
                used += 1
                if reference is None:
                    reference = sig
                    ref_info = {"point": point, "sample": sample}
                elif not _same_signature(reference, sig, tol):
                    witness = {
                        "point_a": ref_info["point"], "sample_a": ref_info["sample"],
                        "point_b": point, "sample_b": sample,
                    }
                    detail = {
                        "rank_sequence_a": list(reference[0].ranks),
                        "rank_sequence_b": list(sig[0].ranks),
                        "seed": cfg.seed,
                    }
                    return ProbeVerdict(constant=False, samples_used=used,
                                        escalated=escalated, witness=witness,
                                        detail=detail)
    detail = {"rank_sequence": list(reference[0].ranks) if reference else [],
              "seed": cfg.seed}
    return ProbeVerdict(constant=True, samples_used=used, escalated=escalated,
                        detail=detail)


def _points_data(spec: FamilySpec, points):
    out = []
    for P in points:
        pkg = curvature_package(spec, check_point(spec, P))
        out.append((np.asarray(P, float), pkg.R, pkg.g))
    return out


def jordan_probe(spec: FamilySpec, points, sign: int, cfg: SamplerConfig,
                 tol: float = 1e-7) -> ProbeVerdict:
    """Constancy probe for the Jordan type of the Jacobi operator over unit
    vectors of one causal sign, across all given points.

    Returns a concrete witness pair when non-constant; a constant verdict
    means constant on the sampled evidence (count escalates 10x first).
    """
    def sampler(g, c, stream, sparse=False):
        return sample_unit_vectors(g, sign, c, stream, sparse=sparse)

    def operator(R, g, x):
        return jacobi(R, g, x)

    return _probe(_points_data(spec, points), sampler, operator, cfg, tol)


def ip_probe(spec: FamilySpec, points, sign: int, cfg: SamplerConfig,
             tol: float = 1e-7) -> ProbeVerdict:
    """Constancy probe for rank and Jordan data of the skew-symmetric
    curvature operator over oriented definite 2-planes of one sign."""
    def sampler(g, c, stream, sparse=False):
        return sample_planes(g, sign, c, stream, sparse=sparse)

    def operator(R, g, plane):
        return skew_curvature_operator(R, g, plane[0], plane[1])

    verdict = _probe(_points_data(spec, points), sampler, operator, cfg, tol)
    if verdict.constant and verdict.detail.get("rank_sequence"):
        verdict.detail["rank"] = verdict.detail["rank_sequence"][0]
    return verdict
