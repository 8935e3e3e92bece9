"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line.  Tolerances are pinned here, not configurable.

Sizes run at 2 and 3 per family unless a criterion's underlying statement
needs a specific size (noted inline).
"""

from contextlib import contextmanager

import numpy as np
import pytest

from curvlab.core import MultiProfile, ScalarProfile, BilinearForm
from curvlab.curvature import (
    check_curvature_symmetries,
    check_nabla_symmetries,
    curvature_package,
)
from curvlab.families import (
    Family1,
    Family2,
    curvature_oracle,
    metric_at,
    metric_partials,
)
from curvlab.geodesics import (
    energy_along,
    exp_map,
    geodesic_symmetry,
    integrate_recursive,
    integrate_rk4_batch,
    isometry_check,
    log_map,
)
from curvlab.homogeneity import (
    KPLabel,
    alpha1,
    alpha1_brute,
    alpha2,
    constancy_scan,
    kp_classify,
)
from curvlab.models import build_model, curvature_from_bilinear, match_at_point
from curvlab.operators import (
    SamplerConfig,
    ip_probe,
    jacobi,
    jordan_probe,
    sample_unit_vectors,
)

from conftest import bumpy_multi, family1, family2, family3


@contextmanager
def criterion(num: int, label: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {num:02d} [{label}]: FAIL")
        raise
    print(f"\nACCEPTANCE {num:02d} [{label}]: PASS")


def seeded_points(spec, count, seed, box=1.5):
    rng = np.random.default_rng([seed, spec.family, spec.dim])
    return [rng.uniform(-box, box, spec.dim) for _ in range(count)]


def specs_at(sizes=(2, 3)):
    return [fam for n in sizes
            for fam in (family1(p=n), family2(s=n), family3(r=n))]


def test_criterion_01_oracle_equivalence():
    with criterion(1, "engine matches closed-form curvature tables"):
        for spec in specs_at():
            worst = 0.0
            for P in seeded_points(spec, 20, seed=101):
                pkg = curvature_package(spec, P)
                R_o, T_o = curvature_oracle(spec, P)
                worst = max(worst,
                            float(np.max(np.abs(pkg.R.components - R_o.components))),
                            float(np.max(np.abs(pkg.nablaR.components - T_o.components))))
            assert worst < 1e-9, (spec.family, spec.dim, worst)


def test_criterion_02_finite_difference_independence():
    h = 1e-3
    with criterion(2, "metric partials match 4th-order finite differences"):
        for spec in specs_at():
            for P in seeded_points(spec, 10, seed=102):
                jet = metric_partials(spec, P, 1)
                for k in range(spec.dim):
                    e = np.zeros(spec.dim)
                    e[k] = 1.0
                    fd = (-metric_at(spec, P + 2 * h * e).matrix
                          + 8 * metric_at(spec, P + h * e).matrix
                          - 8 * metric_at(spec, P - h * e).matrix
                          + metric_at(spec, P - 2 * h * e).matrix) / (12 * h)
                    exact = jet.partial(1)[k]
                    scale = max(1.0, float(np.max(np.abs(exact))))
                    assert np.max(np.abs(fd - exact)) / scale < 1e-5


def test_criterion_03_symmetric_space_profiles():
    # the middle family's parallel member exists at its minimal size only
    # (larger sizes pick up profile-independent derivative components; see
    # the decisions ledger) so it is pinned at s = 2 here
    specs = [family1(p=2, kind="symmetric"), family1(p=3, kind="symmetric"),
             family2(s=2, kind="symmetric"),
             family3(r=2, kind="symmetric"), family3(r=3, kind="symmetric")]
    with criterion(3, "symmetric-space profiles have parallel curvature"):
        for spec in specs:
            count = 20 if spec.family == 2 else 10
            for P in seeded_points(spec, count, seed=103, box=2.0):
                assert curvature_package(spec, P).nablaR.max_abs() < 1e-9


def test_criterion_04_model_matching():
    with criterion(4, "pointwise normalization matches the constant models"):
        for spec in specs_at():
            for P in seeded_points(spec, 20, seed=104, box=1.2):
                _, report = match_at_point(spec, P, tol=1e-10)
                assert report.passed, (spec.family, report.to_json())
        # order-1 match including the derivative tensor, third derivative
        # nonvanishing everywhere
        for r in (2, 3):
            spec = family3(r=r, kind="exp")
            for P in seeded_points(spec, 20, seed=104, box=1.2):
                _, report = match_at_point(spec, P, order=1, tol=1e-10)
                assert report.deviation_A1 is not None
                assert report.passed


def test_criterion_05_nilpotency():
    with criterion(5, "order-2r nilpotent Jacobi operators"):
        for r in (2, 3):
            spec = family3(r=r)
            n2r = 2 * r
            checked = 0
            for p_idx, P in enumerate(seeded_points(spec, 10, seed=105)):
                pkg = curvature_package(spec, P)
                cfg = SamplerConfig(seed=105, count=20)
                for xi in sample_unit_vectors(pkg.g, +1, cfg, stream=p_idx):
                    J = jacobi(pkg.R, pkg.g, xi).matrix
                    norm = np.linalg.norm(J, 2)
                    if norm == 0.0:
                        continue
                    power = np.linalg.matrix_power(J, n2r)
                    assert np.linalg.norm(power, 2) < 1e-8 * norm ** n2r * spec.dim
                    checked += 1
            assert checked >= 200
            # exact chain on the model
            model = build_model("u3r", r)
            X = np.zeros(model.dim)
            X[2 * r] = 1.0
            J = jacobi(model.A, model.g, X)
            vec = np.zeros(model.dim)
            vec[0] = 1.0
            for _ in range(n2r - 1):
                vec = J(vec)
            expected = np.zeros(model.dim)
            expected[r] = 1.0
            assert np.array_equal(vec, expected)


def test_criterion_06_osserman_probes():
    with criterion(6, "operator Jordan type over causal classes"):
        spec1 = family1(p=3)
        pts1 = seeded_points(spec1, 2, seed=106)
        cfg = SamplerConfig(seed=106, count=100)
        for sign in (+1, -1):
            verdict = jordan_probe(spec1, pts1, sign, cfg)
            assert verdict.constant and verdict.samples_used >= 100
        spec2 = family2(s=2)
        pts2 = seeded_points(spec2, 2, seed=106)
        assert jordan_probe(spec2, pts2, +1, cfg).constant
        verdict = jordan_probe(spec2, pts2, -1, cfg)
        assert not verdict.constant
        assert verdict.witness is not None
        assert verdict.samples_used <= 1000
        assert (verdict.detail["rank_sequence_a"]
                != verdict.detail["rank_sequence_b"])


def test_criterion_07_ip_probes():
    with criterion(7, "skew curvature operator ranks over definite planes"):
        cfg = SamplerConfig(seed=107, count=100)
        spec1 = family1(p=2)
        pts1 = seeded_points(spec1, 1, seed=107)
        for sign in (+1, -1):
            verdict = ip_probe(spec1, pts1, sign, cfg)
            assert verdict.constant and verdict.detail["rank"] == 2
        spec2 = family2(s=2)
        pts2 = seeded_points(spec2, 1, seed=107)
        verdict = ip_probe(spec2, pts2, +1, cfg)
        assert verdict.constant and verdict.detail["rank"] == 4


def test_criterion_08_invariant_scans():
    with criterion(8, "derivative-curvature invariants"):
        # zero on the parallel members
        sym1 = family1(p=3, kind="symmetric")
        for P in seeded_points(sym1, 50, seed=108, box=2.0):
            assert abs(alpha1(sym1, P)) < 1e-12
        sym2 = family2(s=2, kind="symmetric")
        for P in seeded_points(sym2, 50, seed=108, box=2.0):
            assert abs(alpha2(sym2, P)) < 1e-12
        # non-constancy witnesses
        p = 3
        f = MultiProfile.polynomial(p, [((2, 0, 0), 1.0), ((0, 2, 0), 1.0),
                                        ((0, 0, 2), 1.0), ((4, 0, 0), 1.0)])
        quart = Family1(p=p, f=f)
        pts = [np.zeros(quart.dim)]
        for k in range(9):
            P = np.zeros(quart.dim)
            P[0] = 0.15 * (k + 1)
            pts.append(P)
        report = constancy_scan("alpha1", quart, pts)
        assert not report.constant and report.spread > 1e-3
        quint = family2(s=3, kind="quintic")
        pts = [np.zeros(quint.dim)]
        for k in range(9):
            P = np.zeros(quint.dim)
            P[0] = 0.15 * (k + 1)
            pts.append(P)
        report = constancy_scan("alpha2", quint, pts)
        assert not report.constant and report.spread > 1e-3
        # fast path against the literal contraction
        rng = np.random.default_rng(108)
        for p in (2, 3):
            for _ in range(5):
                spec = Family1(p=p, f=bumpy_multi(p, rng))
                P = rng.uniform(-1.2, 1.2, spec.dim)
                fast, brute = alpha1(spec, P), alpha1_brute(spec, P)
                assert abs(fast - brute) <= 1e-9 * max(1.0, abs(brute))


def test_criterion_09_kp_classification():
    with criterion(9, "second-derivative support classes"):
        for r in (2, 3):
            quartic = family3(r=r, kind="quartic")
            cubic = family3(r=r, kind="cubic")
            on = np.zeros(quartic.dim)
            on[r - 2] = 1.0
            off = np.zeros(quartic.dim)
            assert kp_classify(quartic, on).label == KPLabel.BOTH_NONZERO
            assert kp_classify(quartic, off).label == KPLabel.ONLY_QUARTIC
            assert kp_classify(cubic, on).label == KPLabel.ONLY_MIXED
            assert kp_classify(cubic, off).label == KPLabel.EMPTY


def test_criterion_10_geodesics():
    with criterion(10, "geodesic integrators, exp/log, energy"):
        for size in (2, 3):
            for spec in (family1(p=size), family2(s=size), family3(r=size)):
                rng = np.random.default_rng([110, spec.family, size])
                Ps = [rng.uniform(-0.5, 0.5, spec.dim) for _ in range(10)]
                vs = [rng.uniform(-0.15, 0.15, spec.dim) for _ in range(10)]
                rk4 = integrate_rk4_batch(spec, Ps, vs, 10.0, 0.005)
                for P, v, g_rk4 in zip(Ps, vs, rk4):
                    g_rec = integrate_recursive(spec, P, v, 10.0, tol=1e-10)
                    dev = max(np.max(np.abs(g_rec.at(t)[0] - g_rk4.at(t)[0]))
                              for t in np.linspace(0.0, 10.0, 21))
                    assert dev < 1e-6, (spec.family, size, dev)
                    energy = energy_along(g_rec, np.linspace(0.0, 10.0, 11))
                    assert energy.max() - energy.min() < 1e-8
                if spec.family == 1:
                    geo = integrate_recursive(spec, Ps[0], vs[0], 10.0)
                    p = spec.p
                    expected = Ps[0][None, :p] + geo.ts[:, None] * vs[0][None, :p]
                    assert np.array_equal(geo.Z[:, :p], expected)
                # global round trips with separations up to coordinate size 5
                for _ in range(10):
                    P = rng.uniform(-2.5, 2.5, spec.dim)
                    Q = rng.uniform(-2.5, 2.5, spec.dim)
                    w = log_map(spec, P, Q, tol=1e-10)
                    assert np.max(np.abs(exp_map(spec, P, w, tol=1e-10) - Q)) < 1e-8


def test_criterion_11_geodesic_symmetry_isometry():
    specs = [family1(p=2, kind="symmetric"), family2(s=2, kind="symmetric"),
             family3(r=2, kind="symmetric")]
    with criterion(11, "point reflection is an isometry on parallel members"):
        for spec in specs:
            rng = np.random.default_rng([111, spec.family])
            base = rng.uniform(-0.5, 0.5, spec.dim)
            samples = [rng.uniform(-1.0, 1.0, spec.dim) for _ in range(10)]
            report = isometry_check(
                spec, lambda Q: geodesic_symmetry(spec, base, Q), samples)
            assert report.max_deviation < 1e-5, (spec.family, report.max_deviation)


def test_criterion_12_identity_suites():
    with criterion(12, "curvature identities and form-to-curvature injectivity"):
        for spec in specs_at():
            for P in seeded_points(spec, 5, seed=112):
                pkg = curvature_package(spec, P)
                rep_R = check_curvature_symmetries(pkg.R, tol=1e-10)
                rep_T = check_nabla_symmetries(pkg.nablaR, tol=1e-10)
                assert rep_R.passed, rep_R.violations
                assert rep_T.passed, rep_T.violations
        rng = np.random.default_rng(112)
        tried = 0
        while tried < 50:
            dim = int(rng.integers(3, 6))
            a = rng.normal(size=(dim, dim))
            b = rng.normal(size=(dim, dim))
            phi1 = a @ a.T + 0.5 * np.eye(dim)
            phi2 = b @ b.T + 0.5 * np.eye(dim)
            if np.linalg.norm(phi1 - phi2) <= 1e-3:
                continue
            tried += 1
            r1 = curvature_from_bilinear(BilinearForm(phi1))
            r2 = curvature_from_bilinear(BilinearForm(phi2))
            assert np.linalg.norm(r1.components - r2.components) > 1e-6
