"""Generic coordinate-formula curvature engine.

Builds connection coefficients from exact metric partials, then the curvature
tensor and its first and second covariant derivatives, all by explicit chain
rule (no finite differences anywhere on the shipped path).  Sign convention:

    R(x, y, z, w) = g((nabla_x nabla_y - nabla_y nabla_x - nabla_[x,y]) z, w)

and the derivative slots trail: ``nablaR[a,b,c,d,e] = (nabla_e R)(a,b,c,d)``,
``nabla2R[a,b,c,d,e,n] = (nabla_n nabla R)(a,b,c,d,e)``.  Flipping the
convention negates R; the closed-form family tables pin the sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import COV, BilinearForm, Tensor
from .families import FamilySpec, MetricJet, check_point, metric_partials

__all__ = [
    "CurvaturePackage",
    "SymmetryReport",
    "christoffels",
    "riemann",
    "covariant_derivative_R",
    "second_covariant_derivative_R",
    "curvature_package",
    "check_curvature_symmetries",
    "check_nabla_symmetries",
]

IDENTITY_TOL = 1e-10


def _as_matrix(g) -> np.ndarray:
    return g.matrix if isinstance(g, BilinearForm) else np.asarray(g, dtype=float)


def christoffels(g, dg):
    """First- and second-kind connection coefficients from g and its first
    partials ``dg[k, i, j]``.

    Returns ``(gamma1, gamma2)`` with ``gamma1[i, j, k]`` fully covariant and
    ``gamma2[i, j, c]`` carrying the raised slot last; both symmetric in the
    first two slots.
    """
    G = _as_matrix(g)
    dg = np.asarray(dg, dtype=float)
    gamma1 = 0.5 * (dg + np.einsum("jik->ijk", dg) - np.einsum("kij->ijk", dg))
    if abs(np.linalg.det(G)) <= 1e-12:
        raise np.linalg.LinAlgError("singular metric")
    ginv = np.linalg.inv(G)
    gamma2 = np.einsum("ck,ijk->ijc", ginv, gamma1)
    return gamma1, gamma2


class _Jet:
    """Connection and curvature data with coordinate derivatives to the depth
    needed by the requested covariant derivative order."""

    def __init__(self, jet: MetricJet, depth: int):
        G = jet.g
        self.G = G
        self.ginv = np.linalg.inv(G)
        dg = jet.partial(1)
        self.dg = dg
        self.dginv = -np.einsum("ik,akl,lj->aij", self.ginv, dg, self.ginv)
        gamma1 = 0.5 * (dg + np.einsum("jik->ijk", dg) - np.einsum("kij->ijk", dg))
        self.gamma2 = np.einsum("ck,ijk->ijc", self.ginv, gamma1)
        self._gamma1 = gamma1

        d2g = jet.partial(2)
        self.d2g = d2g
        dgamma1 = 0.5 * (d2g + np.einsum("ajik->aijk", d2g)
                         - np.einsum("akij->aijk", d2g))
        self.dgamma2 = (np.einsum("ack,ijk->aijc", self.dginv, gamma1)
                        + np.einsum("ck,aijk->aijc", self.ginv, dgamma1))
        self._dgamma1 = dgamma1

        if depth >= 1:
            d3g = jet.partial(3)
            self.d3g = d3g
            self.d2ginv = -(np.einsum("aik,bkl,lj->abij", self.dginv, dg, self.ginv)
                            + np.einsum("ik,abkl,lj->abij", self.ginv, d2g, self.ginv)
                            + np.einsum("ik,bkl,alj->abij", self.ginv, dg, self.dginv))
            d2gamma1 = 0.5 * (d3g + np.einsum("abjik->abijk", d3g)
                              - np.einsum("abkij->abijk", d3g))
            self.d2gamma2 = (np.einsum("abck,ijk->abijc", self.d2ginv, gamma1)
                             + np.einsum("ack,bijk->abijc", self.dginv, dgamma1)
                             + np.einsum("bck,aijk->abijc", self.dginv, dgamma1)
                             + np.einsum("ck,abijk->abijc", self.ginv, d2gamma1))
            self._d2gamma1 = d2gamma1

        if depth >= 2:
            d4g = jet.partial(4)
            gi, dgi, d2gi = self.ginv, self.dginv, self.d2ginv
            self.d3ginv = -(
                np.einsum("abik,ckl,lj->abcij", d2gi, dg, gi)
                + np.einsum("bik,ackl,lj->abcij", dgi, d2g, gi)
                + np.einsum("bik,ckl,alj->abcij", dgi, dg, dgi)
                + np.einsum("aik,bckl,lj->abcij", dgi, d2g, gi)
                + np.einsum("ik,abckl,lj->abcij", gi, self.d3g, gi)
                + np.einsum("ik,bckl,alj->abcij", gi, d2g, dgi)
                + np.einsum("aik,ckl,blj->abcij", dgi, dg, dgi)
                + np.einsum("ik,ackl,blj->abcij", gi, d2g, dgi)
                + np.einsum("ik,ckl,ablj->abcij", gi, dg, d2gi))
            d3gamma1 = 0.5 * (d4g + np.einsum("abcjik->abcijk", d4g)
                              - np.einsum("abckij->abcijk", d4g))
            self.d3gamma2 = (
                np.einsum("abcmk,ijk->abcijm", self.d3ginv, gamma1)
                + np.einsum("abmk,cijk->abcijm", d2gi, dgamma1)
                + np.einsum("acmk,bijk->abcijm", d2gi, dgamma1)
                + np.einsum("bcmk,aijk->abcijm", d2gi, dgamma1)
                + np.einsum("amk,bcijk->abcijm", dgi, self._d2gamma1)
                + np.einsum("bmk,acijk->abcijm", dgi, self._d2gamma1)
                + np.einsum("cmk,abijk->abcijm", dgi, self._d2gamma1)
                + np.einsum("mk,abcijk->abcijm", gi, d3gamma1))

    # -- curvature ---------------------------------------------------------

    def K(self):
        g2 = self.gamma2
        K = self.dgamma2 - self.dgamma2.transpose(1, 0, 2, 3)
        K += np.einsum("afe,bcf->abce", g2, g2)
        K -= np.einsum("bfe,acf->abce", g2, g2)
        return K

    def riemann(self):
        return _kernels.riemann_assemble(self.G, self.gamma2, self.dgamma2)

    def dK(self):
        g2, dg2, d2g2 = self.gamma2, self.dgamma2, self.d2gamma2
        out = d2g2 - d2g2.transpose(0, 2, 1, 3, 4)
        out += np.einsum("nafe,bcf->nabce", dg2, g2)
        out += np.einsum("afe,nbcf->nabce", g2, dg2)
        out -= np.einsum("nbfe,acf->nabce", dg2, g2)
        out -= np.einsum("bfe,nacf->nabce", g2, dg2)
        return out

    def dR(self, K, dK):
        return (np.einsum("nabce,ed->nabcd", dK, self.G)
                + np.einsum("abce,ned->nabcd", K, self.dg))

    def d2K(self):
        g2, dg2 = self.gamma2, self.dgamma2
        d2g2, d3g2 = self.d2gamma2, self.d3gamma2
        out = d3g2 - d3g2.transpose(0, 1, 3, 2, 4, 5)
        for sgn, x, y in ((1.0, "a", "b"), (-1.0, "b", "a")):
            out += sgn * np.einsum(f"mn{x}fe,{y}cf->mnabce", d2g2, g2)
            out += sgn * np.einsum(f"n{x}fe,m{y}cf->mnabce", dg2, dg2)
            out += sgn * np.einsum(f"m{x}fe,n{y}cf->mnabce", dg2, dg2)
            out += sgn * np.einsum(f"{x}fe,mn{y}cf->mnabce", g2, d2g2)
        return out

    def d2R(self, K, dK, d2K):
        return (np.einsum("mnabce,ed->mnabcd", d2K, self.G)
                + np.einsum("nabce,med->mnabcd", dK, self.dg)
                + np.einsum("mabce,ned->mnabcd", dK, self.dg)
                + np.einsum("abce,mned->mnabcd", K, self.d2g))


def riemann(g, dg, d2g) -> Tensor:
    """Fully covariant curvature tensor from g and its partials at a point."""
    jet = MetricJet(g=_as_matrix(g), d=(np.asarray(dg, float), np.asarray(d2g, float)))
    if abs(np.linalg.det(jet.g)) <= 1e-12:
        raise np.linalg.LinAlgError("singular metric")
    J = _Jet(jet, depth=0)
    return Tensor(jet.g.shape[0], (COV,) * 4, J.riemann())


def covariant_derivative_R(g, gamma2, R, dR) -> Tensor:
    """Covariant derivative of a curvature tensor; direction slot last.

    ``dR[n, a, b, c, d]`` holds the coordinate partials of the components.
    """
    Rc = R.components if isinstance(R, Tensor) else np.asarray(R, float)
    out = _kernels.covariant_derivative4(np.asarray(dR, float),
                                         np.asarray(gamma2, float), Rc)
    return Tensor(Rc.shape[0], (COV,) * 5, out)


def second_covariant_derivative_R(g, gamma2, nablaR, dnablaR) -> Tensor:
    """Covariant derivative of a rank-5 derivative-curvature tensor."""
    Tc = nablaR.components if isinstance(nablaR, Tensor) else np.asarray(nablaR, float)
    out = _kernels.covariant_derivative5(np.asarray(dnablaR, float),
                                         np.asarray(gamma2, float), Tc)
    return Tensor(Tc.shape[0], (COV,) * 6, out)


@dataclass(frozen=True)
class CurvaturePackage:
    """All curvature data of one family evaluated at one point."""

    point: np.ndarray
    g: BilinearForm
    gamma: np.ndarray
    R: Tensor
    nablaR: Tensor
    nabla2R: Tensor | None = None

    def verify(self, tol: float = IDENTITY_TOL):
        """Symmetry reports for R and nablaR."""
        return (check_curvature_symmetries(self.R, tol),
                check_nabla_symmetries(self.nablaR, tol))

    def to_json(self, zero_tol: float = 1e-14) -> dict:
        def comps(t: Tensor):
            arr = t.components
            idx = np.argwhere(np.abs(arr) > zero_tol)
            return [{"idx": [int(i) for i in row], "value": float(arr[tuple(row)])}
                    for row in idx]

        out = {
            "point": [float(x) for x in self.point],
            "metric": comps(Tensor(self.g.dim, (COV, COV), self.g.matrix)),
            "christoffel": comps(Tensor(self.g.dim, (COV, COV, COV), self.gamma)),
            "R": comps(self.R),
            "nablaR": comps(self.nablaR),
        }
        if self.nabla2R is not None:
            out["nabla2R"] = comps(self.nabla2R)
        return out


def curvature_package(spec: FamilySpec, P, with_second: bool = False) -> CurvaturePackage:
    """Evaluate the full engine chain at a point.

    ``with_second`` also builds the rank-6 second covariant derivative, which
    needs fourth metric partials (and therefore a profile of depth 4).
    """
    P = check_point(spec, P)
    depth = 2 if with_second else 1
    jet = metric_partials(spec, P, order=depth + 2)
    J = _Jet(jet, depth=depth)
    K = J.K()
    R = J.riemann()
    dK = J.dK()
    dR = J.dR(K, dK)
    nablaR = _kernels.covariant_derivative4(dR, J.gamma2, R)
    nabla2R = None
    if with_second:
        d2R = J.d2R(K, dK, J.d2K())
        g2, dg2 = J.gamma2, J.dgamma2
        dnablaR = np.einsum("neabcd->nabcde", d2R)
        dnablaR = dnablaR - np.einsum("neaf,fbcd->nabcde", dg2, R)
        dnablaR -= np.einsum("eaf,nfbcd->nabcde", g2, dR)
        dnablaR -= np.einsum("nebf,afcd->nabcde", dg2, R)
        dnablaR -= np.einsum("ebf,nafcd->nabcde", g2, dR)
        dnablaR -= np.einsum("necf,abfd->nabcde", dg2, R)
        dnablaR -= np.einsum("ecf,nabfd->nabcde", g2, dR)
        dnablaR -= np.einsum("nedf,abcf->nabcde", dg2, R)
        dnablaR -= np.einsum("edf,nabcf->nabcde", g2, dR)
        nabla2R = Tensor(spec.dim, (COV,) * 6,
                         _kernels.covariant_derivative5(dnablaR, J.gamma2, nablaR))
    return CurvaturePackage(
        point=P,
        g=BilinearForm(jet.g),
        gamma=J.gamma2,
        R=Tensor(spec.dim, (COV,) * 4, R),
        nablaR=Tensor(spec.dim, (COV,) * 5, nablaR),
        nabla2R=nabla2R,
    )


# ---------------------------------------------------------------------------
# symmetry validators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    """Max violation per identity, with the scale used for the threshold."""

    violations: dict
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol * self.scale for v in self.violations.values())

    def worst(self) -> float:
        return max(self.violations.values())

    def to_json(self) -> dict:
        return {"violations": {k: float(v) for k, v in self.violations.items()},
                "scale": self.scale, "tol": self.tol, "passed": self.passed}


def _tensor_array(A, rank: int) -> np.ndarray:
    arr = A.components if isinstance(A, Tensor) else np.asarray(A, dtype=float)
    if arr.ndim != rank:
        raise ValueError(f"expected a rank-{rank} tensor, got rank {arr.ndim}")
    return arr


def check_curvature_symmetries(A, tol: float = IDENTITY_TOL) -> SymmetryReport:
    """Check the curvature-tensor identities: antisymmetry in each index pair,
    symmetry under pair exchange, and the first cyclic identity."""
    arr = _tensor_array(A, 4)
    scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
    v = {
        "antisym_12": float(np.max(np.abs(arr + np.einsum("yxzw->xyzw", arr)))),
        "antisym_34": float(np.max(np.abs(arr + np.einsum("xywz->xyzw", arr)))),
        "pair_exchange": float(np.max(np.abs(arr - np.einsum("zwxy->xyzw", arr)))),
        "cyclic_first": float(np.max(np.abs(
            arr + np.einsum("yzxw->xyzw", arr) + np.einsum("zxyw->xyzw", arr)))),
    }
    return SymmetryReport(violations=v, scale=scale, tol=tol)


def check_nabla_symmetries(A1, tol: float = IDENTITY_TOL) -> SymmetryReport:
    """Check the derivative-curvature identities: the rank-4 symmetries in the
    first four slots and the cyclic identity over the last three."""
    arr = _tensor_array(A1, 5)
    scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
    v = {
        "antisym_12": float(np.max(np.abs(arr + np.einsum("yxzwv->xyzwv", arr)))),
        "pair_exchange": float(np.max(np.abs(arr - np.einsum("zwxyv->xyzwv", arr)))),
        "cyclic_first": float(np.max(np.abs(
            arr + np.einsum("yzxwv->xyzwv", arr) + np.einsum("zxywv->xyzwv", arr)))),
        "cyclic_last": float(np.max(np.abs(
            arr + np.einsum("xywvz->xyzwv", arr) + np.einsum("xyvzw->xyzwv", arr)))),
    }
    return SymmetryReport(violations=v, scale=scale, tol=tol)
