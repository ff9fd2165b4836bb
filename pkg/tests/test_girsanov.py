"""Change-of-probability machinery: shift construction, density identities,
transfer, integration by parts, and the inequality suite."""

import math

import numpy as np
import pytest

from carnot_coupling.catalog import CATALOG
from carnot_coupling.girsanov import (
    bismut_gradient,
    build_shift,
    default_support_count,
    density_R,
    entropy_bound_constant,
    finite_diff_gradient,
    girsanov_normalization_check,
    gradient_sup_spotcheck,
    horizontal_direction,
    inequality_suite,
    semigroup_transfer_check,
    vertical_direction,
    _shift_arrays,
)
from carnot_coupling.groups import CarnotElement, HeisenbergPoint, SkewMatrix, heis_to_carnot
from carnot_coupling.legendre import CoefficientStream, carnot_endpoint, sample_stream
from carnot_coupling.mc import derive_rng


def hpair(a, b):
    return heis_to_carnot(HeisenbergPoint(*a)), heis_to_carnot(HeisenbergPoint(*b))


class TestBuildShift:
    def test_zero_for_equal_points(self):
        g, gt = hpair((0.5, -1, 0.2), (0.5, -1, 0.2))
        stream = sample_stream(2, 4.0, 16, derive_rng(0))
        u = build_shift(g, gt, 4.0, 5, stream)
        assert u.norm_sq == 0.0

    def test_support_layout(self):
        g, gt = hpair((0, 0, 0), (1, 0, 1))
        stream = sample_stream(2, 4.0, 16, derive_rng(1))
        u = build_shift(g, gt, 4.0, 5, stream)
        assert u.support == [0, 3, 6, 9, 12, 15]
        assert np.array_equal(u.component(1), np.zeros(2))
        assert np.array_equal(u.component(3), u.blocks[0])

    def test_norm_decomposition(self):
        g, gt = hpair((0, 0, 0), (0.7, -0.2, 0.4))
        T = 9.0
        stream = sample_stream(2, T, 16, derive_rng(2))
        u = build_shift(g, gt, T, 5, stream)
        dx2 = (0.7 ** 2 + 0.2 ** 2)
        explicit = dx2 / T + sum(float(b @ b) for b in u.blocks)
        assert u.norm_sq == pytest.approx(explicit, rel=1e-12)

    def test_index0_collinear_with_displacement(self):
        g, gt = hpair((0, 0, 0), (0.6, 0.8, 0.0))
        stream = sample_stream(2, 1.0, 16, derive_rng(3))
        u = build_shift(g, gt, 1.0, 5, stream)
        d = np.array([-0.6, -0.8])
        cross = u.u0[0] * d[1] - u.u0[1] * d[0]
        assert abs(cross) <= 1e-14

    def test_small_support_rejected(self):
        g, gt = hpair((0, 0, 0), (1, 0, 0))
        stream = sample_stream(2, 1.0, 16, derive_rng(4))
        with pytest.raises(ValueError):
            build_shift(g, gt, 1.0, 3, stream)

    def test_short_stream_rejected(self):
        g, gt = hpair((0, 0, 0), (1, 0, 0))
        stream = sample_stream(2, 1.0, 8, derive_rng(5))
        with pytest.raises(ValueError):
            build_shift(g, gt, 1.0, 5, stream)

    def test_shift_reads_only_allowed_coordinates(self):
        # changing the modified coordinates or the displacement component of
        # xi_0 must not change the shift
        g, gt = hpair((0, 0, 0), (1, 0, 0.5))
        T, K = 4.0, 5
        rng = derive_rng(6)
        xi = rng.standard_normal((3 * K + 2, 2))
        u0a, blocksa, _ = _shift_arrays(g, gt, T, K, xi[None])
        xi2 = xi.copy()
        xi2[0, 0] += 3.0  # displacement direction is e1 here
        for k in range(1, K + 1):
            xi2[3 * k] = rng.standard_normal(2)
        u0b, blocksb, _ = _shift_arrays(g, gt, T, K, xi2[None])
        assert np.allclose(blocksa, blocksb, atol=1e-12)
        assert np.array_equal(u0a, u0b)

    def test_pathwise_endpoint_identity(self):
        # the shifted stream drives the process from gt onto the endpoint from g:
        # endpoint(gt, xi + u) equals endpoint(g, xi) surely, not just on average
        rng = derive_rng(7)
        g, gt = hpair((0.2, -0.4, 0.1), (0.6, 0.3, -0.2))
        T, K = 4.0, 6
        for _ in range(20):
            stream = sample_stream(2, T, 3 * K + 1, rng)
            u = build_shift(g, gt, T, K, stream)
            shifted = stream.xi.copy()
            shifted[0] += u.u0
            for k in range(1, K + 1):
                shifted[3 * k] += u.blocks[k - 1]
            ep_gt = carnot_endpoint(gt, CoefficientStream(2, T, shifted))
            ep_g = carnot_endpoint(g, stream)
            assert np.max(np.abs(ep_gt.x - ep_g.x)) <= 1e-12
            assert np.max(np.abs(ep_gt.z.upper - ep_g.z.upper)) <= 1e-10

    def test_pathwise_endpoint_identity_rank3(self):
        rng = derive_rng(8)
        g = CarnotElement(np.array([0.1, 0.0, -0.3]), SkewMatrix(3, np.array([0.1, 0.0, 0.2])))
        gt = CarnotElement(np.array([0.5, -0.2, 0.0]), SkewMatrix(3, np.array([0.0, 0.3, -0.1])))
        T, K = 9.0, 7
        for _ in range(10):
            stream = sample_stream(3, T, 3 * K + 1, rng)
            u = build_shift(g, gt, T, K, stream)
            shifted = stream.xi.copy()
            shifted[0] += u.u0
            for k in range(1, K + 1):
                shifted[3 * k] += u.blocks[k - 1]
            ep_gt = carnot_endpoint(gt, CoefficientStream(3, T, shifted))
            ep_g = carnot_endpoint(g, stream)
            assert np.max(np.abs(ep_gt.x - ep_g.x)) <= 1e-12
            assert np.max(np.abs(ep_gt.z.upper - ep_g.z.upper)) <= 1e-10


class TestDensity:
    def test_unit_weight_for_zero_shift(self):
        g, gt = hpair((1, 1, 1), (1, 1, 1))
        stream = sample_stream(2, 1.0, 16, derive_rng(9))
        u = build_shift(g, gt, 1.0, 5, stream)
        assert density_R(u, stream) == 1.0

    def test_positive(self):
        g, gt = hpair((0, 0, 0), (0.5, 0, 0.2))
        stream = sample_stream(2, 4.0, 16, derive_rng(10))
        u = build_shift(g, gt, 4.0, 5, stream)
        assert density_R(u, stream) > 0.0

    def test_normalization_and_entropy_identity(self):
        g, gt = hpair((0, 0, 0), (0, 0, 1))
        rep = girsanov_normalization_check(g, gt, 100.0, 5, 200_000, seed=11)
        assert rep.normalization.passed
        assert rep.entropy_identity.passed
        assert rep.entropy_bounded

    def test_entropy_identity_mixed_point(self):
        g, gt = hpair((0, 0, 0), (0.3, 0.2, 0.05))
        rep = girsanov_normalization_check(g, gt, 16.0, 8, 200_000, seed=12)
        assert rep.normalization.passed
        assert rep.entropy_identity.passed

    def test_entropy_bound_constant_value(self):
        g, gt = hpair((0, 0, 0), (1, 0, 1))
        T = 4.0
        expect = 1.0 / (2 * T) + (6 * math.sqrt(2) + 4 / math.sqrt(2)) ** 2 * (
            2.0 / T ** 2 + 2.0 / (3 * T)
        )
        assert entropy_bound_constant(g, gt, T) == pytest.approx(expect, rel=1e-13)


class TestTransfer:
    def test_constant_function(self):
        g, gt = hpair((0, 0, 0), (0, 0, 1))
        rep = semigroup_transfer_check(CATALOG["constant"], g, gt, 100.0, 5, 100_000, seed=13)
        assert rep.direct.mean == 1.0
        assert rep.comparison.passed

    def test_same_start(self):
        g, gt = hpair((0.5, 0, 0.1), (0.5, 0, 0.1))
        rep = semigroup_transfer_check(CATALOG["gaussian-bump"], g, gt, 1.0, 5, 50_000, seed=14)
        assert rep.comparison.passed

    def test_gaussian_bump_moderate_pair(self):
        g, gt = hpair((0, 0, 0), (0.5, 0, 0.2))
        rep = semigroup_transfer_check(CATALOG["gaussian-bump"], g, gt, 4.0, 5, 200_000, seed=15)
        assert rep.comparison.passed


class TestBismut:
    def test_zero_direction_exactly_zero(self):
        g = heis_to_carnot(HeisenbergPoint(0.3, -0.2, 0.1))
        h = CarnotElement.identity(2)
        est = bismut_gradient(CATALOG["sin-perturbation"], g, h, 1.0, 5, 2000, seed=16)
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_constant_function_zero_mean(self):
        g = heis_to_carnot(HeisenbergPoint(0, 0, 0))
        h = horizontal_direction(g, 0)
        est = bismut_gradient(CATALOG["constant"], g, h, 1.0, 5, 100_000, seed=17)
        assert abs(est.mean) <= 3 * est.stderr

    def test_weight_linear_in_direction(self):
        g = heis_to_carnot(HeisenbergPoint(0.2, 0.1, 0.0))
        h = CarnotElement(np.array([1.0, -0.5]), SkewMatrix(2, np.array([0.3])))
        T, K = 4.0, 5
        xi = derive_rng(18).standard_normal((1, 3 * K + 2, 2))
        u0a, blka, _ = _shift_arrays(g, CarnotElement(g.x + h.x, g.z + h.z), T, K, xi)
        h2 = CarnotElement(2 * h.x, h.z.scaled(2.0))
        u0b, blkb, _ = _shift_arrays(g, CarnotElement(g.x + h2.x, g.z + h2.z), T, K, xi)
        assert np.allclose(2 * u0a, u0b, rtol=1e-12)
        assert np.allclose(2 * blka, blkb, rtol=1e-10)

    def test_agrees_with_finite_difference(self):
        g = heis_to_carnot(HeisenbergPoint(0.3, -0.2, 0.1))
        h = horizontal_direction(g, 0)
        f = CATALOG["gaussian-bump"]
        bg = bismut_gradient(f, g, h, 1.0, 8, 300_000, seed=19)
        fd = finite_diff_gradient(f, g, h, 1.0, 1e-3, 300_000, seed=20, K=8)
        se = math.hypot(bg.stderr, fd.stderr)
        assert abs(bg.mean - fd.mean) <= 3 * se + 1e-3 * (1 + abs(fd.mean))
        assert abs(bg.mean) > 5 * bg.stderr  # the gradient is genuinely nonzero here


class TestFiniteDifference:
    def test_constant_function_exactly_zero(self):
        g = heis_to_carnot(HeisenbergPoint(0, 0, 0))
        h = horizontal_direction(g, 0)
        est = finite_diff_gradient(CATALOG["constant"], g, h, 1.0, 1e-3, 2000, seed=21)
        assert est.mean == 0.0

    def test_horizontal_function_blind_to_vertical_direction(self):
        # shared streams make the difference vanish pathwise, not just on average
        g = heis_to_carnot(HeisenbergPoint(0.5, 0.5, 0.0))
        h = vertical_direction(2, 0)
        est = finite_diff_gradient(CATALOG["coordinate-bump"], g, h, 1.0, 1e-3, 2000, seed=22)
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_invalid_step(self):
        g = heis_to_carnot(HeisenbergPoint(0, 0, 0))
        with pytest.raises(ValueError):
            finite_diff_gradient(CATALOG["constant"], g, horizontal_direction(g, 0),
                                 1.0, 0.0, 100, seed=23)


class TestInequalities:
    def test_suite_passes_sin_perturbation(self):
        g, gt = hpair((0.3, -0.2, 0.1), (0.5, 0.0, 0.2))
        h = horizontal_direction(g, 0)
        rep = inequality_suite(CATALOG["sin-perturbation"], g, gt, h, 4.0, 100_000, seed=24)
        assert rep.all_passed
        names = {c.name for c in rep.checks}
        assert names == {"log-harnack", "reverse-poincare", "weak-log-sobolev"}

    def test_constant_function_saturates_log_harnack(self):
        # lhs = ln c and rhs = ln c + additive constant: slack is the constant
        g, gt = hpair((0, 0, 0), (0.4, 0.1, 0.1))
        h = horizontal_direction(g, 0)
        T = 4.0
        rep = inequality_suite(CATALOG["constant"], g, gt, h, T, 20_000, seed=25)
        lh = next(c for c in rep.checks if c.name == "log-harnack")
        slack = lh.rhs - lh.lhs
        assert slack == pytest.approx(entropy_bound_constant(g, gt, T), abs=1e-7)
        rp = next(c for c in rep.checks if c.name == "reverse-poincare")
        assert rp.lhs <= 1e-3  # gradient of a constant is zero up to noise

    def test_suite_positive_function_required_for_log_checks(self):
        g, gt = hpair((0, 0, 0), (0.4, 0.1, 0.1))
        h = horizontal_direction(g, 0)
        rep = inequality_suite(CATALOG["gaussian-bump"], g, gt, h, 4.0, 20_000, seed=26)
        names = {c.name for c in rep.checks}
        assert names == {"reverse-poincare"}

    def test_general_p_holder_variants(self):
        g, gt = hpair((0.3, -0.2, 0.1), (0.5, 0.0, 0.2))
        h = horizontal_direction(g, 0)
        rep = inequality_suite(CATALOG["sin-perturbation"], g, gt, h, 4.0, 60_000,
                               seed=30, K=10, p_values=(1.5, 4.0))
        names = {c.name for c in rep.checks}
        assert {"reverse-poincare-p1.5", "reverse-poincare-p4"} <= names
        assert rep.all_passed

    def test_weighted_sample_invariants(self):
        from carnot_coupling.girsanov import weighted_sample
        from carnot_coupling.legendre import carnot_endpoint, sample_stream

        g, gt = hpair((0, 0, 0), (0.5, 0, 0.2))
        stream = sample_stream(2, 4.0, 16, derive_rng(31))
        ws = weighted_sample(g, gt, 4.0, 5, stream)
        assert ws.weight > 0
        assert ws.weight == pytest.approx(math.exp(ws.logweight), rel=1e-15)
        ep = carnot_endpoint(g, stream)
        assert np.array_equal(ws.endpoint.x, ep.x)

    def test_gradient_spotcheck_passes(self):
        g = heis_to_carnot(HeisenbergPoint(0.3, -0.2, 0.1))
        checks = gradient_sup_spotcheck(CATALOG["coordinate-bump"], [g], 1.0, 30_000, seed=27)
        assert all(c.passed for c in checks)
        assert checks[0].horizontal_bound == pytest.approx(
            2 * (1 + 5 * math.sqrt(28) / (math.pi * math.sqrt(math.pi)))
            / math.sqrt(2 * math.pi), rel=1e-12
        )


class TestDefaults:
    def test_default_support_count(self):
        assert default_support_count(2) == 5
        assert default_support_count(3) == 7
