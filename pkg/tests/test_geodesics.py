import numpy as np
import pytest

from curvlab.families import christoffel_oracle, metric_at
from curvlab.geodesics import (
    QuadratureError,
    energy_along,
    exp_map,
    geodesic_symmetry,
    integrate_recursive,
    integrate_rk4,
    integrate_rk4_batch,
    isometry_check,
    log_map,
    triangular_order,
)

from conftest import family1, family2, family3, random_points, rng_for


def mild_initial_data(spec, rng, count=1):
    Ps = [rng.uniform(-0.5, 0.5, spec.dim) for _ in range(count)]
    vs = [rng.uniform(-0.15, 0.15, spec.dim) for _ in range(count)]
    return Ps, vs


MILD_SPECS = [family1(p=2, kind="symmetric"), family2(s=2, kind="zero"),
              family3(r=2, kind="symmetric")]
GENERIC_SPECS = [family1(p=2), family2(s=2), family3(r=2)]


class TestTriangularOrder:
    def test_family_orders(self):
        assert triangular_order(family1(p=3)).perm == tuple(range(6))
        assert triangular_order(family2(s=2)).perm == tuple(range(6))
        # last family: base point coordinate first, then the chain variables
        # ascending, their duals descending, the fully fed coordinate last
        assert triangular_order(family3(r=3)).perm == (6, 0, 1, 2, 5, 4, 3, 7)

    @pytest.mark.parametrize("spec", GENERIC_SPECS, ids=lambda s: f"f{s.family}")
    def test_heavy_verification_scan(self, spec):
        # raises on any violation of the feed/dependence structure
        triangular_order(spec, verify_points=50, seed=7)

    def test_fed_mask(self):
        order = triangular_order(family3(r=2))
        # the base and first chain coordinates receive no feed
        assert order.fed[2 * 2] is False
        assert order.fed[0] is False
        assert order.fed[2 * 2 + 1] is True


class TestRecursiveIntegrator:
    def test_zero_velocity_constant_curve(self):
        spec = family2(s=2)
        P = np.full(spec.dim, 0.3)
        geo = integrate_recursive(spec, P, np.zeros(spec.dim), 4.0)
        pos, vel = geo.at(3.14)
        np.testing.assert_array_equal(pos, P)
        np.testing.assert_array_equal(vel, np.zeros(spec.dim))

    def test_initial_conditions_exact(self, rng):
        spec = family3(r=2)
        P, v = rng.uniform(-1, 1, spec.dim), rng.uniform(-1, 1, spec.dim)
        geo = integrate_recursive(spec, P, v, 2.0)
        pos, vel = geo.at(0.0)
        np.testing.assert_allclose(pos, P, atol=1e-12)
        np.testing.assert_allclose(vel, v, atol=1e-12)

    def test_family1_base_block_exactly_affine(self, rng):
        spec = family1(p=2)
        P, v = rng.uniform(-1, 1, spec.dim), rng.uniform(-0.5, 0.5, spec.dim)
        geo = integrate_recursive(spec, P, v, 10.0)
        p = spec.p
        expected = P[None, :p] + geo.ts[:, None] * v[None, :p]
        assert np.array_equal(geo.Z[:, :p], expected)

    def test_flat_fixture_straight_lines(self, rng):
        spec = family1(p=2, kind="flat")
        P, v = rng.uniform(-2, 2, spec.dim), rng.uniform(-1, 1, spec.dim)
        geo = integrate_recursive(spec, P, v, 5.0)
        for t in (0.5, 2.5, 5.0):
            np.testing.assert_allclose(geo.at(t)[0], P + t * v, atol=1e-12)

    def test_rejects_bad_horizon(self):
        spec = family2(s=2)
        with pytest.raises(ValueError):
            integrate_recursive(spec, np.zeros(6), np.ones(6), 0.0)


class TestCrossSolverAgreement:
    @pytest.mark.parametrize("spec", GENERIC_SPECS, ids=lambda s: f"f{s.family}")
    def test_recursive_vs_rk4(self, spec):
        rng = rng_for("cross", spec.family)
        Ps, vs = mild_initial_data(spec, rng, count=3)
        rk4 = integrate_rk4_batch(spec, Ps, vs, 10.0, 0.005)
        for P, v, g_rk4 in zip(Ps, vs, rk4):
            g_rec = integrate_recursive(spec, P, v, 10.0)
            dev = max(np.max(np.abs(g_rec.at(t)[0] - g_rk4.at(t)[0]))
                      for t in np.linspace(0, 10, 41))
            assert dev < 1e-6

    def test_rk4_fourth_order_convergence(self):
        spec = family2(s=2)
        rng = rng_for("conv")
        P = rng.uniform(-0.5, 0.5, spec.dim)
        v = rng.uniform(-0.6, 0.6, spec.dim)
        truth = integrate_recursive(spec, P, v, 6.0, tol=1e-13).at(6.0)[0]
        errs = []
        for step in (0.1, 0.05):
            end = integrate_rk4(spec, P, v, 6.0, step).at(6.0)[0]
            errs.append(np.max(np.abs(end - truth)))
        assert errs[0] > 1e-9  # far above the reference solution's floor
        ratio = errs[0] / errs[1]
        assert 10 < ratio < 24  # halving the step cuts the error ~16x


class TestExpLog:
    def test_exp_zero_velocity(self):
        spec = family2(s=2)
        P = np.full(spec.dim, 0.4)
        np.testing.assert_array_equal(exp_map(spec, P, np.zeros(spec.dim)), P)

    def test_exp_homogeneity_in_time(self, rng):
        spec = family3(r=2)
        P = rng.uniform(-1, 1, spec.dim)
        v = rng.uniform(-0.5, 0.5, spec.dim)
        geo = integrate_recursive(spec, P, v, 2.0)
        for t in (0.5, 2.0):
            np.testing.assert_allclose(exp_map(spec, P, t * v), geo.at(t)[0],
                                       atol=1e-8)

    def test_family1_base_part_translates(self, rng):
        spec = family1(p=3, kind="symmetric")
        P = rng.uniform(-1, 1, spec.dim)
        v = rng.uniform(-1, 1, spec.dim)
        out = exp_map(spec, P, v)
        np.testing.assert_array_equal(out[:3], P[:3] + v[:3])

    def test_log_identity(self):
        spec = family3(r=2)
        P = np.full(spec.dim, 0.2)
        np.testing.assert_allclose(log_map(spec, P, P), np.zeros(spec.dim),
                                   atol=1e-12)

    @pytest.mark.parametrize("spec", GENERIC_SPECS, ids=lambda s: f"f{s.family}")
    def test_round_trip(self, spec):
        rng = rng_for("roundtrip", spec.family)
        for _ in range(20):
            P = rng.uniform(-2, 2, spec.dim)
            Q = rng.uniform(-2, 2, spec.dim)
            w = log_map(spec, P, Q)
            np.testing.assert_allclose(exp_map(spec, P, w), Q, atol=1e-8)

    def test_log_family1_base_difference(self, rng):
        spec = family1(p=2)
        P, Q = rng.uniform(-2, 2, spec.dim), rng.uniform(-2, 2, spec.dim)
        w = log_map(spec, P, Q)
        np.testing.assert_array_equal(w[:2], Q[:2] - P[:2])


class TestGeodesicSymmetry:
    def test_fixed_point(self):
        spec = family3(r=2)
        P = np.full(spec.dim, 0.3)
        np.testing.assert_allclose(geodesic_symmetry(spec, P, P), P, atol=1e-10)

    def test_flat_fixture_reflection(self, rng):
        spec = family1(p=2, kind="flat")
        P, Q = rng.uniform(-1, 1, spec.dim), rng.uniform(-1, 1, spec.dim)
        np.testing.assert_allclose(geodesic_symmetry(spec, P, Q), 2 * P - Q,
                                   atol=1e-12)

    @pytest.mark.parametrize("spec", MILD_SPECS, ids=lambda s: f"f{s.family}")
    def test_involution(self, spec):
        rng = rng_for("invol", spec.family)
        P = rng.uniform(-1, 1, spec.dim)
        for _ in range(5):
            Q = rng.uniform(-1.5, 1.5, spec.dim)
            S = geodesic_symmetry(spec, P, Q)
            SS = geodesic_symmetry(spec, P, S)
            np.testing.assert_allclose(SS, Q, atol=1e-7)


class TestIsometryCheck:
    def test_identity_map(self, rng):
        spec = family2(s=2)
        report = isometry_check(spec, lambda P: P,
                                random_points(spec, 3, rng))
        assert report.max_deviation < 1e-12

    def test_symmetry_is_isometry_on_parallel_spaces(self):
        # flat-derivative members: the point reflection preserves the metric
        for spec in (family1(p=2, kind="symmetric"),
                     family2(s=2, kind="symmetric"),
                     family3(r=2, kind="symmetric")):
            rng = rng_for("isom", spec.family)
            base = rng.uniform(-0.5, 0.5, spec.dim)
            samples = [rng.uniform(-1, 1, spec.dim) for _ in range(3)]
            report = isometry_check(
                spec, lambda Q: geodesic_symmetry(spec, base, Q), samples)
            assert report.max_deviation < 1e-5, (spec.family, report)

    def test_symmetry_fails_off_parallel_locus(self):
        # witness search: members with nonvanishing derivative curvature
        # admit sample points where the reflection breaks the metric
        spec = family3(r=2, kind="exp")
        rng = np.random.default_rng(1)
        base = rng.uniform(-1, 1, spec.dim)
        samples = [rng.uniform(-2, 2, spec.dim) for _ in range(4)]
        report = isometry_check(
            spec, lambda Q: geodesic_symmetry(spec, base, Q), samples)
        assert report.max_deviation > 1e-3

        spec2 = family2(s=2, kind="zero")
        rng = rng_for("isomz")
        base = rng.uniform(-0.5, 0.5, spec2.dim)
        report = isometry_check(
            spec2, lambda Q: geodesic_symmetry(spec2, base, Q),
            [rng.uniform(-1, 1, spec2.dim) for _ in range(2)])
        assert report.max_deviation > 1e-3

    def test_obvious_non_isometry(self, rng):
        spec = family2(s=2)
        report = isometry_check(spec, lambda P: 2.0 * P,
                                random_points(spec, 2, rng))
        assert report.max_deviation > 1e-2


class TestEnergy:
    @pytest.mark.parametrize("spec", GENERIC_SPECS, ids=lambda s: f"f{s.family}")
    def test_conserved_along_recursive(self, spec):
        rng = rng_for("energy", spec.family)
        (P,), (v,) = mild_initial_data(spec, rng)
        geo = integrate_recursive(spec, P, v, 10.0, tol=1e-10)
        e = energy_along(geo, np.linspace(0, 10, 33))
        assert e.max() - e.min() < 1e-8

    def test_conserved_along_rk4(self):
        spec = family2(s=2)
        rng = rng_for("energy-rk4")
        (P,), (v,) = mild_initial_data(spec, rng)
        geo = integrate_rk4(spec, P, v, 10.0, 0.005)
        e = energy_along(geo, np.linspace(0, 10, 33))
        assert e.max() - e.min() < 1e-8

    def test_zero_velocity_zero_energy(self):
        spec = family3(r=2)
        geo = integrate_recursive(spec, np.zeros(spec.dim),
                                  np.zeros(spec.dim), 1.0)
        assert np.max(np.abs(energy_along(geo, [0.0, 0.5, 1.0]))) == 0.0

    def test_unit_spacelike_start_stays_unit(self, rng):
        spec = family2(s=2)
        P = rng.uniform(-0.5, 0.5, spec.dim)
        v = rng.uniform(-0.5, 0.5, spec.dim)
        q = metric_at(spec, P).apply(v, v)
        assert q != 0
        v = v / np.sqrt(abs(q))
        geo = integrate_recursive(spec, P, v, 5.0, tol=1e-10)
        e = energy_along(geo, np.linspace(0, 5, 11))
        np.testing.assert_allclose(e, np.sign(q), atol=1e-8)
