"""Hot numeric kernels, each with a numba-jitted and a pure-numpy lane.

The jitted lane is used when numba imports cleanly and the environment
variable ``CURVLAB_NO_NUMBA`` is unset/empty; otherwise the numpy lane is
selected.  Both lanes compute identical values (tested), so the flag only
trades compile time against per-call speed.  ``benchmarks/bench_kernels.py``
times the two lanes side by side.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = bool(os.environ.get("CURVLAB_NO_NUMBA", ""))

try:
    if _DISABLE:
        raise ImportError("numba disabled via CURVLAB_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# cumulative Simpson integration on a uniform grid (even interval count)
# ---------------------------------------------------------------------------

def _cumulative_simpson_np(y: np.ndarray, dx: float) -> np.ndarray:
    n = y.shape[0] - 1
    out = np.zeros_like(y)
    if n == 0:
        return out
    # parabola through each (2k, 2k+1, 2k+2) triple; left/full sub-areas
    f0, f1, f2 = y[0:n:2], y[1:n + 1:2], y[2:n + 2:2]
    half = dx / 12.0 * (5.0 * f0 + 8.0 * f1 - f2)
    full = dx / 3.0 * (f0 + 4.0 * f1 + f2)
    base = np.concatenate([np.zeros_like(y[:1]), np.cumsum(full, axis=0)])
    out[1:n + 1:2] = base[:-1] + half
    out[2:n + 2:2] = base[1:]
    return out


def _cs_impl(y, dx):  # shared scalar-loop body for the jitted lane
    n = y.shape[0] - 1
    out = np.zeros_like(y)
    acc = 0.0
    for k in range(0, n, 2):
        f0, f1, f2 = y[k], y[k + 1], y[k + 2]
        out[k + 1] = acc + dx / 12.0 * (5.0 * f0 + 8.0 * f1 - f2)
        acc += dx / 3.0 * (f0 + 4.0 * f1 + f2)
        out[k + 2] = acc
    return out


# ---------------------------------------------------------------------------
# curvature assembly
# ---------------------------------------------------------------------------

def _riemann_assemble_np(G, gamma2, dgamma2):
    # K[a,b,c,e] = d_a G2[b,c,e] - d_b G2[a,c,e] + G2[a,f,e]G2[b,c,f] - G2[b,f,e]G2[a,c,f]
    K = dgamma2 - dgamma2.transpose(1, 0, 2, 3)
    K = K + np.einsum("afe,bcf->abce", gamma2, gamma2)
    K = K - np.einsum("bfe,acf->abce", gamma2, gamma2)
    return np.einsum("abce,ed->abcd", K, G)


def _riemann_assemble_impl(G, gamma2, dgamma2):
    n = G.shape[0]
    R = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for e in range(n):
                    k = dgamma2[a, b, c, e] - dgamma2[b, a, c, e]
                    for f in range(n):
                        k += (gamma2[a, f, e] * gamma2[b, c, f]
                              - gamma2[b, f, e] * gamma2[a, c, f])
                    for d in range(n):
                        R[a, b, c, d] += k * G[e, d]
    return R


def _covariant_derivative4_np(dT, gamma2, T):
    out = dT.transpose(1, 2, 3, 4, 0).copy()
    out -= np.einsum("eaf,fbcd->abcde", gamma2, T)
    out -= np.einsum("ebf,afcd->abcde", gamma2, T)
    out -= np.einsum("ecf,abfd->abcde", gamma2, T)
    out -= np.einsum("edf,abcf->abcde", gamma2, T)
    return out


def _covariant_derivative4_impl(dT, gamma2, T):
    n = T.shape[0]
    out = np.empty((n, n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    for e in range(n):
                        v = dT[e, a, b, c, d]
                        for f in range(n):
                            v -= gamma2[e, a, f] * T[f, b, c, d]
                            v -= gamma2[e, b, f] * T[a, f, c, d]
                            v -= gamma2[e, c, f] * T[a, b, f, d]
                            v -= gamma2[e, d, f] * T[a, b, c, f]
                        out[a, b, c, d, e] = v
    return out


def _covariant_derivative5_np(dT, gamma2, T):
    out = dT.transpose(1, 2, 3, 4, 5, 0).copy()
    out -= np.einsum("naf,fbcde->abcden", gamma2, T)
    out -= np.einsum("nbf,afcde->abcden", gamma2, T)
    out -= np.einsum("ncf,abfde->abcden", gamma2, T)
    out -= np.einsum("ndf,abcfe->abcden", gamma2, T)
    out -= np.einsum("nef,abcdf->abcden", gamma2, T)
    return out


def _covariant_derivative5_impl(dT, gamma2, T):
    n = T.shape[0]
    out = np.empty((n, n, n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    for e in range(n):
                        for m in range(n):
                            v = dT[m, a, b, c, d, e]
                            for f in range(n):
                                v -= gamma2[m, a, f] * T[f, b, c, d, e]
                                v -= gamma2[m, b, f] * T[a, f, c, d, e]
                                v -= gamma2[m, c, f] * T[a, b, f, d, e]
                                v -= gamma2[m, d, f] * T[a, b, c, f, e]
                                v -= gamma2[m, e, f] * T[a, b, c, d, f]
                            out[a, b, c, d, e, m] = v
    return out


# ---------------------------------------------------------------------------
# geodesic integrand columns: I[:, c] = sum_ab zdot_a zdot_b Gamma_ab^c
# ---------------------------------------------------------------------------

def _integrand_family1_np(vx, hess, grad):
    n, p = vx.shape
    out = np.zeros((n, 2 * p))
    q = np.einsum("ni,nij,nj->n", vx, hess, vx)
    out[:, p:] = q[:, None] * grad
    return out


def _integrand_family1_impl(vx, hess, grad):
    n, p = vx.shape
    out = np.zeros((n, 2 * p))
    for t in range(n):
        q = 0.0
        for i in range(p):
            for j in range(p):
                q += vx[t, i] * hess[t, i, j] * vx[t, j]
        for k in range(p):
            out[t, p + k] = q * grad[t, k]
    return out


def _integrand_family2_np(u, tv, udot, tdot, fprime):
    n, s = u.shape
    out = np.zeros((n, 3 * s))
    w = fprime + tv
    speed2 = np.sum(udot * udot, axis=1)
    wdot = np.sum(w * udot, axis=1)
    utdot = np.sum(u * tdot, axis=1)
    out[:, s:2 * s] = -u * speed2[:, None]
    out[:, 2 * s:] = (w * speed2[:, None]
                      - 2.0 * udot * (wdot + utdot)[:, None])
    return out


def _integrand_family2_impl(u, tv, udot, tdot, fprime):
    n, s = u.shape
    out = np.zeros((n, 3 * s))
    for t in range(n):
        speed2 = 0.0
        wdot = 0.0
        utdot = 0.0
        for i in range(s):
            w = fprime[t, i] + tv[t, i]
            speed2 += udot[t, i] * udot[t, i]
            wdot += w * udot[t, i]
            utdot += u[t, i] * tdot[t, i]
        for k in range(s):
            wk = fprime[t, k] + tv[t, k]
            out[t, s + k] = -u[t, k] * speed2
            out[t, 2 * s + k] = wk * speed2 - 2.0 * udot[t, k] * (wdot + utdot)
    return out


def _integrand_family3_np(u, v, udot, vdot, xdot, psip):
    n, r = u.shape
    out = np.zeros((n, 2 * r + 2))
    x2 = xdot * xdot
    out[:, 1:r] = x2[:, None] * u[:, :r - 1]
    out[:, r:2 * r - 1] = x2[:, None] * v[:, 1:]
    out[:, 2 * r - 1] = x2 * psip
    mixed = (np.sum(udot[:, :r - 1] * v[:, 1:], axis=1)
             + udot[:, r - 1] * psip
             + np.sum(vdot[:, 1:] * u[:, :r - 1], axis=1))
    out[:, 2 * r + 1] = -2.0 * xdot * mixed
    return out


def _integrand_family3_impl(u, v, udot, vdot, xdot, psip):
    n, r = u.shape
    out = np.zeros((n, 2 * r + 2))
    for t in range(n):
        x2 = xdot[t] * xdot[t]
        mixed = udot[t, r - 1] * psip[t]
        for i in range(r - 1):
            out[t, 1 + i] = x2 * u[t, i]
            out[t, r + i] = x2 * v[t, i + 1]
            mixed += udot[t, i] * v[t, i + 1] + vdot[t, i + 1] * u[t, i]
        out[t, 2 * r - 1] = x2 * psip[t]
        out[t, 2 * r + 1] = -2.0 * xdot[t] * mixed
    return out


# ---------------------------------------------------------------------------
# lane selection
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _cumulative_simpson_nb = njit(cache=True)(_cs_impl)
    _riemann_assemble_nb = njit(cache=True)(_riemann_assemble_impl)
    _covariant_derivative4_nb = njit(cache=True)(_covariant_derivative4_impl)
    _covariant_derivative5_nb = njit(cache=True)(_covariant_derivative5_impl)
    _integrand_family1_nb = njit(cache=True)(_integrand_family1_impl)
    _integrand_family2_nb = njit(cache=True)(_integrand_family2_impl)
    _integrand_family3_nb = njit(cache=True)(_integrand_family3_impl)

    def cumulative_simpson(y, dx):
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.ndim == 1:
            return _cumulative_simpson_nb(y, float(dx))
        return _cumulative_simpson_np(y, float(dx))

    def riemann_assemble(G, gamma2, dgamma2):
        return _riemann_assemble_nb(np.ascontiguousarray(G),
                                    np.ascontiguousarray(gamma2),
                                    np.ascontiguousarray(dgamma2))

    def covariant_derivative4(dT, gamma2, T):
        return _covariant_derivative4_nb(np.ascontiguousarray(dT),
                                         np.ascontiguousarray(gamma2),
                                         np.ascontiguousarray(T))

    def covariant_derivative5(dT, gamma2, T):
        return _covariant_derivative5_nb(np.ascontiguousarray(dT),
                                         np.ascontiguousarray(gamma2),
                                         np.ascontiguousarray(T))

    def integrand_family1(vx, hess, grad):
        return _integrand_family1_nb(np.ascontiguousarray(vx),
                                     np.ascontiguousarray(hess),
                                     np.ascontiguousarray(grad))

    def integrand_family2(u, tv, udot, tdot, fprime):
        return _integrand_family2_nb(*(np.ascontiguousarray(a) for a in
                                       (u, tv, udot, tdot, fprime)))

    def integrand_family3(u, v, udot, vdot, xdot, psip):
        return _integrand_family3_nb(*(np.ascontiguousarray(a) for a in
                                       (u, v, udot, vdot, xdot, psip)))
else:
    cumulative_simpson = _cumulative_simpson_np
    riemann_assemble = _riemann_assemble_np
    covariant_derivative4 = _covariant_derivative4_np
    covariant_derivative5 = _covariant_derivative5_np
    integrand_family1 = _integrand_family1_np
    integrand_family2 = _integrand_family2_np
    integrand_family3 = _integrand_family3_np


#: (numpy_fn, loop_impl) pairs for tests and benchmarks.  The loop impl is the
#: function numba jits; calling it raw gives the same values, slowly.
KERNEL_PAIRS = {
    "cumulative_simpson": (_cumulative_simpson_np, _cs_impl),
    "riemann_assemble": (_riemann_assemble_np, _riemann_assemble_impl),
    "covariant_derivative4": (_covariant_derivative4_np, _covariant_derivative4_impl),
    "covariant_derivative5": (_covariant_derivative5_np, _covariant_derivative5_impl),
    "integrand_family1": (_integrand_family1_np, _integrand_family1_impl),
    "integrand_family2": (_integrand_family2_np, _integrand_family2_impl),
    "integrand_family3": (_integrand_family3_np, _integrand_family3_impl),
}
