"""The three metric families: metric evaluators, exact metric partials, and
closed-form Christoffel/curvature tables.

Coordinate order per family:

* family 1 on R^(2p): ``(x_1..x_p, y_1..y_p)``
* family 2 on R^(3s): ``(u_1..u_s, t_1..t_s, v_1..v_s)``
* family 3 on R^(2r+2): ``(u_1..u_r, v_1..v_r, x, y)``

All functions are pure in ``(spec, point)`` and safe to evaluate in parallel
over point grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    COV,
    BilinearForm,
    MultiProfile,
    ScalarProfile,
    Tensor,
    profile_from_json,
)

__all__ = [
    "Family1",
    "Family2",
    "Family3",
    "FamilySpec",
    "MetricJet",
    "metric_at",
    "metric_partials",
    "christoffel_oracle",
    "curvature_oracle",
    "spec_from_json",
    "spec_to_json",
]


@dataclass(frozen=True)
class Family1:
    """Signature (p, p) family on R^(2p) driven by a function of x alone."""

    p: int
    f: MultiProfile

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("family 1 needs p >= 2")
        if self.f.nvars != self.p:
            raise ValueError("profile variable count must equal p")

    @property
    def dim(self) -> int:
        return 2 * self.p

    family = 1

    def x_slice(self):
        return slice(0, self.p)

    def x_index(self, i: int) -> int:
        return i

    def y_index(self, i: int) -> int:
        return self.p + i


@dataclass(frozen=True)
class Family2:
    """Signature (2s, s) family on R^(3s) driven by one profile per u_i."""

    s: int
    profiles: tuple

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if self.s < 2:
            raise ValueError("family 2 needs s >= 2")
        if len(self.profiles) != self.s:
            raise ValueError("need exactly s scalar profiles")

    @property
    def dim(self) -> int:
        return 3 * self.s

    family = 2

    def u_index(self, i: int) -> int:
        return i

    def t_index(self, i: int) -> int:
        return self.s + i

    def v_index(self, i: int) -> int:
        return 2 * self.s + i


@dataclass(frozen=True)
class Family3:
    """Signature (r+1, r+1) family on R^(2r+2) driven by a single profile."""

    r: int
    psi: ScalarProfile

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("family 3 needs r >= 2")

    @property
    def dim(self) -> int:
        return 2 * self.r + 2

    family = 3

    def u_index(self, i: int) -> int:
        return i

    def v_index(self, i: int) -> int:
        return self.r + i

    @property
    def x_index(self) -> int:
        return 2 * self.r

    @property
    def y_index(self) -> int:
        return 2 * self.r + 1


FamilySpec = Union[Family1, Family2, Family3]


def check_point(spec: FamilySpec, P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (spec.dim,):
        raise ValueError(f"point must have shape ({spec.dim},), got {P.shape}")
    return P


# ---------------------------------------------------------------------------
# metric and exact partials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricJet:
    """Metric components and their exact coordinate partials at one point.

    ``d[k]`` (k >= 1) has shape ``(n,)*k + (n, n)`` with the derivative
    indices first: ``d[1][k, i, j]`` is the k-partial of ``g_ij``.
    """

    g: np.ndarray
    d: tuple

    @property
    def order(self) -> int:
        return len(self.d)

    def partial(self, k: int) -> np.ndarray:
        if k == 0:
            return self.g
        return self.d[k - 1]


def metric_at(spec: FamilySpec, P) -> BilinearForm:
    """Full symmetric metric matrix at a point; unlisted entries are zero."""
    P = check_point(spec, P)
    n = spec.dim
    G = np.zeros((n, n))
    if spec.family == 1:
        p = spec.p
        grad = spec.f.derivative_tensor(P[:p], 1)
        G[:p, :p] = np.outer(grad, grad)
        for i in range(p):
            G[i, p + i] = G[p + i, i] = 1.0
    elif spec.family == 2:
        s = spec.s
        u, t = P[:s], P[s:2 * s]
        phi = -2.0 * (sum(f(u[i]) for i, f in enumerate(spec.profiles))
                      + float(u @ t))
        G[:s, :s] = phi * np.eye(s)
        for i in range(s):
            G[i, 2 * s + i] = G[2 * s + i, i] = 1.0
            G[s + i, s + i] = -1.0
    else:
        r = spec.r
        u, v = P[:r], P[r:2 * r]
        x, y = 2 * r, 2 * r + 1
        G[x, y] = G[y, x] = 1.0
        for i in range(r):
            G[i, r + i] = G[r + i, i] = 1.0
        G[x, x] = -2.0 * float(u[:r - 1] @ v[1:]) - 2.0 * spec.psi(u[r - 1])
    return BilinearForm(G)


def metric_partials(spec: FamilySpec, P, order: int) -> MetricJet:
    """Exact mixed partials of every metric component up to ``order``.

    Computed by chain rule from the profile derivative oracles; raises the
    profile's order error if the requested depth is not available.
    """
    P = check_point(spec, P)
    if order < 0:
        raise ValueError("order must be nonnegative")
    n = spec.dim
    G = metric_at(spec, P).matrix
    d = []
    if spec.family == 1:
        p = spec.p
        x = P[:p]
        # metric entries are products of first partials, so order-k metric
        # partials need profile derivatives up to k+1
        fd = [None] + [spec.f.derivative_tensor(x, m) for m in range(1, order + 2)]
        if order >= 1:
            blk = (np.einsum("ik,j->kij", fd[2], fd[1])
                   + np.einsum("i,jk->kij", fd[1], fd[2]))
            d.append(_embed_f1(blk, p, 1))
        if order >= 2:
            blk = (np.einsum("i,jkl->klij", fd[1], fd[3])
                   + np.einsum("ik,jl->klij", fd[2], fd[2])
                   + np.einsum("il,jk->klij", fd[2], fd[2])
                   + np.einsum("ikl,j->klij", fd[3], fd[1]))
            d.append(_embed_f1(blk, p, 2))
        if order >= 3:
            blk = (np.einsum("i,jklm->klmij", fd[1], fd[4])
                   + np.einsum("ik,jlm->klmij", fd[2], fd[3])
                   + np.einsum("il,jkm->klmij", fd[2], fd[3])
                   + np.einsum("im,jkl->klmij", fd[2], fd[3])
                   + np.einsum("ikl,jm->klmij", fd[3], fd[2])
                   + np.einsum("ikm,jl->klmij", fd[3], fd[2])
                   + np.einsum("ilm,jk->klmij", fd[3], fd[2])
                   + np.einsum("iklm,j->klmij", fd[4], fd[1]))
            d.append(_embed_f1(blk, p, 3))
    elif spec.family == 2:
        s = spec.s
        u = P[:s]
        fder = [np.array([f(u[i], m) for i, f in enumerate(spec.profiles)])
                for m in range(order + 1)]
        eye = np.eye(s)
        for m in range(1, order + 1):
            D = np.zeros((n,) * m + (n, n))
            if m == 1:
                for k in range(s):
                    D[k, :s, :s] = -2.0 * (fder[1][k] + P[s + k]) * eye
                    D[s + k, :s, :s] = -2.0 * u[k] * eye
            else:
                # only pure-u derivatives and the (u_k, t_k) mix survive
                for k in range(s):
                    idx = (k,) * m
                    D[idx + (slice(0, s), slice(0, s))] = -2.0 * fder[m][k] * eye
                if m == 2:
                    for k in range(s):
                        D[(k, s + k) + (slice(0, s), slice(0, s))] = -2.0 * eye
                        D[(s + k, k) + (slice(0, s), slice(0, s))] = -2.0 * eye
            d.append(D)
    else:
        r = spec.r
        u, v = P[:r], P[r:2 * r]
        x = 2 * r
        psider = [spec.psi(u[r - 1], m) for m in range(order + 1)]
        for m in range(1, order + 1):
            D = np.zeros((n,) * m + (n, n))
            if m == 1:
                for i in range(r - 1):
                    D[i, x, x] = -2.0 * v[i + 1]
                    D[r + i + 1, x, x] = -2.0 * u[i]
                D[r - 1, x, x] = -2.0 * psider[1]
            elif m == 2:
                for i in range(r - 1):
                    D[i, r + i + 1, x, x] = -2.0
                    D[r + i + 1, i, x, x] = -2.0
                D[r - 1, r - 1, x, x] = -2.0 * psider[2]
            else:
                D[(r - 1,) * m + (x, x)] = -2.0 * psider[m]
            d.append(D)
    return MetricJet(g=G, d=tuple(d))


def _embed_f1(block: np.ndarray, p: int, m: int) -> np.ndarray:
    n = 2 * p
    D = np.zeros((n,) * m + (n, n))
    D[(slice(0, p),) * (m + 2)] = block
    return D


# ---------------------------------------------------------------------------
# batched metric data (order <= 1), used by the fixed-step geodesic solver
# ---------------------------------------------------------------------------

def metric_batch(spec: FamilySpec, Z: np.ndarray) -> np.ndarray:
    """Metric matrices at each row of ``Z``; shape (N, n, n)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    N, n = Z.shape[0], spec.dim
    G = np.zeros((N, n, n))
    if spec.family == 1:
        p = spec.p
        grad = spec.f.derivative_tensor_batch(Z[:, :p], 1)
        G[:, :p, :p] = grad[:, :, None] * grad[:, None, :]
        for i in range(p):
            G[:, i, p + i] = G[:, p + i, i] = 1.0
    elif spec.family == 2:
        s = spec.s
        fsum = sum(f.batch(Z[:, i]) for i, f in enumerate(spec.profiles))
        phi = -2.0 * (fsum + np.sum(Z[:, :s] * Z[:, s:2 * s], axis=1))
        for i in range(s):
            G[:, i, i] = phi
            G[:, i, 2 * s + i] = G[:, 2 * s + i, i] = 1.0
            G[:, s + i, s + i] = -1.0
    else:
        r = spec.r
        x, y = 2 * r, 2 * r + 1
        G[:, x, y] = G[:, y, x] = 1.0
        for i in range(r):
            G[:, i, r + i] = G[:, r + i, i] = 1.0
        G[:, x, x] = (-2.0 * np.sum(Z[:, :r - 1] * Z[:, r + 1:2 * r], axis=1)
                      - 2.0 * spec.psi.batch(Z[:, r - 1]))
    return G


def metric_d1_batch(spec: FamilySpec, Z: np.ndarray) -> np.ndarray:
    """First metric partials at each row of ``Z``; shape (N, n, n, n) with
    the derivative index second: ``out[t, k, i, j] = d_k g_ij``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    N, n = Z.shape[0], spec.dim
    D = np.zeros((N, n, n, n))
    if spec.family == 1:
        p = spec.p
        grad = spec.f.derivative_tensor_batch(Z[:, :p], 1)
        hess = spec.f.derivative_tensor_batch(Z[:, :p], 2)
        blk = (np.einsum("tik,tj->tkij", hess, grad)
               + np.einsum("ti,tjk->tkij", grad, hess))
        D[:, :p, :p, :p] = blk
    elif spec.family == 2:
        s = spec.s
        fp = np.stack([f.batch(Z[:, i], 1) for i, f in enumerate(spec.profiles)],
                      axis=1)
        eye = np.eye(s)
        for k in range(s):
            D[:, k, :s, :s] = (-2.0 * (fp[:, k] + Z[:, s + k]))[:, None, None] * eye
            D[:, s + k, :s, :s] = (-2.0 * Z[:, k])[:, None, None] * eye
    else:
        r = spec.r
        x = 2 * r
        for i in range(r - 1):
            D[:, i, x, x] = -2.0 * Z[:, r + i + 1]
            D[:, r + i + 1, x, x] = -2.0 * Z[:, i]
        D[:, r - 1, x, x] = -2.0 * spec.psi.batch(Z[:, r - 1], 1)
    return D


# ---------------------------------------------------------------------------
# closed-form Christoffel table
# ---------------------------------------------------------------------------

def christoffel_oracle(spec: FamilySpec, P) -> np.ndarray:
    """Second-kind connection coefficients ``out[a, b, c] = Gamma_ab^c`` from
    the closed-form tables; untabulated components are zero."""
    P = check_point(spec, P)
    n = spec.dim
    out = np.zeros((n, n, n))
    if spec.family == 1:
        p = spec.p
        grad = spec.f.derivative_tensor(P[:p], 1)
        hess = spec.f.derivative_tensor(P[:p], 2)
        out[:p, :p, p:] = hess[:, :, None] * grad[None, None, :]
    elif spec.family == 2:
        s = spec.s
        u, t = P[:s], P[s:2 * s]
        w = np.array([f(u[i], 1) for i, f in enumerate(spec.profiles)]) + t
        for i in range(s):
            for j in range(s):
                for k in range(s):
                    out[i, j, 2 * s + k] = (-w[j] * (i == k) - w[i] * (j == k)
                                            + w[k] * (i == j))
                if i == j:
                    out[i, i, s:2 * s] = -u
                out[i, s + j, 2 * s + i] = -u[j]
                out[s + j, i, 2 * s + i] = -u[j]
    else:
        r = spec.r
        u, v = P[:r], P[r:2 * r]
        x, y = 2 * r, 2 * r + 1
        psi1 = spec.psi(u[r - 1], 1)
        for i in range(r - 1):
            out[x, x, i + 1] = u[i]
            out[x, x, r + i] = v[i + 1]
            out[x, i, y] = out[i, x, y] = -v[i + 1]
            out[x, r + i + 1, y] = out[r + i + 1, x, y] = -u[i]
        out[x, x, 2 * r - 1] = psi1
        out[x, r - 1, y] = out[r - 1, x, y] = -psi1
    return out


# ---------------------------------------------------------------------------
# closed-form curvature tables
# ---------------------------------------------------------------------------

# the eight index symmetries of a curvature-type tensor: antisymmetry in each
# pair and exchange of the pairs, acting on the first four slots
_Z2_GROUP = None


def _z2_group():
    global _Z2_GROUP
    if _Z2_GROUP is None:
        gens = [((1, 0, 2, 3), -1.0), ((0, 1, 3, 2), -1.0), ((2, 3, 0, 1), 1.0)]
        group = {(0, 1, 2, 3): 1.0}
        changed = True
        while changed:
            changed = False
            for perm, sign in list(group.items()):
                for gp, gs in gens:
                    comp = tuple(perm[gp[k]] for k in range(4))
                    if comp not in group:
                        group[comp] = sign * gs
                        changed = True
        _Z2_GROUP = tuple(group.items())
    return _Z2_GROUP


def expand_curvature_seeds(dim: int, seeds: dict, extra_slots: int = 0) -> np.ndarray:
    """Fill a dense rank-(4+extra_slots) array from seed components and their
    index-symmetry images; inconsistent seed tables raise."""
    out = np.zeros((dim,) * (4 + extra_slots))
    filled = np.zeros(out.shape, dtype=bool)
    for idx, val in seeds.items():
        head, tail = idx[:4], idx[4:]
        for perm, sign in _z2_group():
            image = tuple(head[perm[k]] for k in range(4)) + tail
            v = sign * val
            if filled[image] and abs(out[image] - v) > 1e-12 * max(1.0, abs(v)):
                raise ValueError(f"inconsistent seed table at {image}")
            out[image] = v
            filled[image] = True
    return out


def curvature_oracle(spec: FamilySpec, P):
    """Closed-form curvature tensor and its covariant derivative at a point.

    Returns ``(R, nablaR)`` as fully covariant rank-4 and rank-5 tensors with
    all symmetry images expanded.
    """
    P = check_point(spec, P)
    n = spec.dim
    if spec.family == 1:
        p = spec.p
        x = P[:p]
        H = spec.f.derivative_tensor(x, 2)
        T3 = spec.f.derivative_tensor(x, 3)
        R = np.zeros((n,) * 4)
        R[:p, :p, :p, :p] = (np.einsum("il,jk->ijkl", H, H)
                             - np.einsum("ik,jl->ijkl", H, H))
        T = np.zeros((n,) * 5)
        T[:p, :p, :p, :p, :p] = (
            np.einsum("iln,jk->ijkln", T3, H)
            + np.einsum("il,jkn->ijkln", H, T3)
            - np.einsum("ikn,jl->ijkln", T3, H)
            - np.einsum("ik,jln->ijkln", H, T3))
    elif spec.family == 2:
        s = spec.s
        u = P[:s]
        f2 = np.array([f(u[i], 2) for i, f in enumerate(spec.profiles)])
        f3 = np.array([f(u[i], 3) for i, f in enumerate(spec.profiles)])
        usq = float(u @ u)
        r_seeds, t_seeds = {}, {}
        for i in range(s):
            for j in range(s):
                if i == j:
                    continue
                ui, uj, ti = i, j, s + i
                r_seeds[(ui, uj, uj, ui)] = f2[i] + f2[j] + usq
                r_seeds[(ui, uj, uj, ti)] = 1.0
                t_seeds[(ui, uj, uj, ui, ui)] = f3[i] + 4.0 * u[i]
                # for s >= 3 the squared-norm term in the quartic block feeds
                # two further profile-independent derivative patterns (they
                # cancel pairwise in the cyclic identity; checked against the
                # generic engine and by automatic differentiation)
                for m in range(s):
                    if m in (i, j):
                        continue
                    t_seeds[(ui, uj, uj, ui, m)] = 2.0 * u[m]
                    t_seeds[(ui, uj, uj, m, m)] = u[i]
        R = expand_curvature_seeds(n, r_seeds)
        T = expand_curvature_seeds(n, t_seeds, extra_slots=1)
    else:
        r = spec.r
        ur = P[r - 1]
        x = 2 * r
        r_seeds = {(x, r - 1, r - 1, x): spec.psi(ur, 2)}
        for i in range(r - 1):
            r_seeds[(x, i, r + i + 1, x)] = 1.0
        t_seeds = {(x, r - 1, r - 1, x, r - 1): spec.psi(ur, 3)}
        R = expand_curvature_seeds(n, r_seeds)
        T = expand_curvature_seeds(n, t_seeds, extra_slots=1)
    return (Tensor(n, (COV,) * 4, R), Tensor(n, (COV,) * 5, T))


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------

def spec_from_json(obj: dict) -> FamilySpec:
    """Build a family spec from ``{"family": 1|2|3, "p"|"s"|"r": ...,
    "profiles": [...]}``."""
    fam = obj.get("family")
    profiles = obj.get("profiles", [])
    if fam == 1:
        p = int(obj["p"])
        return Family1(p=p, f=profile_from_json(profiles[0], nvars=p))
    if fam == 2:
        s = int(obj["s"])
        if len(profiles) == 1:
            profiles = profiles * s
        return Family2(s=s, profiles=tuple(profile_from_json(o) for o in profiles))
    if fam == 3:
        return Family3(r=int(obj["r"]), psi=profile_from_json(profiles[0]))
    raise ValueError(f"unknown family {fam!r}")


def spec_to_json(spec: FamilySpec) -> dict:
    if spec.family == 1:
        terms = [{"exponents": list(e), "coeff": c} for e, c in spec.f.terms]
        return {"family": 1, "p": spec.p,
                "profiles": [{"kind": "polynomial", "terms": terms}]}
    if spec.family == 2:
        return {"family": 2, "s": spec.s,
                "profiles": [f.to_json() for f in spec.profiles]}
    return {"family": 3, "r": spec.r, "profiles": [spec.psi.to_json()]}
