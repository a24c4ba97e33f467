import json

import numpy as np
import pytest

from isoconvex.energy_core import (SplitEnergy, W_magic_minus, W_magic_plus, W_smooth, catalog, det_energy,
                                   frobenius_sq, get_energy, hencky, random_glplus)
from isoconvex.errors import DomainError, NonPositiveDeterminant
from isoconvex.expression import make_split_energy
from isoconvex.report import Verdict
from isoconvex.rank_one import (GridSpec, aggregate_verdict, check_knowles_sternberg, check_split, infimum_f0,
                                infimum_h0, legendre_hadamard, rank_one_midpoint_defect,
                                reduce_to_log_volumetric, split_margins)
from isoconvex.scalar import ScalarFunction

SMALL = GridSpec(n_t=400, n_z=400)


def split(h, f, name="e"):
    return make_split_energy(h, f, name, check_symmetry=False)


class TestGridSpec:
    @pytest.mark.parametrize("kw", [{"t_min": 1.0}, {"z_min": 0.0}, {"n_t": 1}, {"t_max": 1.0 + 1e-7}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            GridSpec(**kw)

    def test_grids_are_log_spaced(self):
        g = GridSpec(n_t=5, t_min=10.0, t_max=1e5)
        assert np.allclose(g.t_grid(), [10, 100, 1e3, 1e4, 1e5])
        assert g.t_tail()[0] == pytest.approx(1e6)


class TestInfima:
    def test_h0_magic_plus(self):
        assert infimum_h0(W_magic_plus()).value == pytest.approx(1.0, abs=1e-12)

    def test_h0_magic_minus(self):
        assert infimum_h0(W_magic_minus()).value == pytest.approx(-1.0, abs=1e-12)

    def test_h0_smooth(self):
        # t^2 h'' = 8/(3t) - 1 decreases to -1 as t -> inf (see decisions ledger)
        res = infimum_h0(W_smooth())
        assert res.value == pytest.approx(-1.0, abs=1e-6)
        assert res.attained_in_limit

    def test_f0_log(self):
        assert infimum_f0(W_magic_plus()).value == pytest.approx(-1.0, abs=1e-12)
        assert infimum_f0(W_magic_minus()).value == pytest.approx(1.0, abs=1e-12)

    def test_f0_quadratic_flagged(self):
        res = infimum_f0(split("t", "z^2/2"))
        assert 0 <= res.value <= GridSpec().z_min**2
        assert res.attained_in_limit

    def test_unreliable_tail(self):
        # z^2 f'' = -z^3 keeps decreasing without settling
        res = infimum_f0(split("t", "-(z^5)/20"))
        assert not res.reliable


class TestCheckSplit:
    def test_magic_plus(self):
        rep = check_split(W_magic_plus())
        assert rep.verdict == Verdict.CONSISTENT
        assert 1.0 in rep.condition("C2").equality_points
        t = rep.points["t"]
        assert np.allclose(rep.margins["C4a"], 4 * t / (t + 1), atol=1e-9)

    def test_smooth_pattern(self):
        rep = check_split(W_smooth())
        assert rep.verdict == Verdict.CONSISTENT
        assert float("inf") in rep.condition("C1").equality_points
        assert 1.0 in rep.condition("C2").equality_points

    def test_magic_minus_consistent(self):
        rep = check_split(W_magic_minus())
        assert rep.verdict == Verdict.CONSISTENT
        assert float("inf") not in rep.condition("C2").equality_points

    def test_synthetic_violates_c1(self):
        rep = check_split(split("-(t + 1/t)", "-(z^2)"))
        assert rep.verdict == Verdict.VIOLATED
        assert rep.witness["condition"] == "C1"

    def test_decreasing_h_violates_c2(self):
        rep = check_split(split("1/t + t^-2", "log(z)^2"), SMALL)
        assert rep.verdict == Verdict.VIOLATED
        assert not rep.condition("C2").satisfied

    def test_f0_override(self):
        a = check_split(W_magic_plus(), SMALL)
        b = check_split(W_magic_plus(), SMALL, f0=-1.0)
        assert np.array_equal(a.margins["C3a"], b.margins["C3a"])

    def test_serializes(self):
        doc = json.loads(check_split(W_magic_plus(), SMALL).to_json())
        assert doc["verdict"] == "ConsistentOnGrid"
        assert [c["id"] for c in doc["conditions"]] == ["C1", "C2", "C3a", "C3b", "C4a", "C4b"]

    def test_domain_error_propagates(self):
        with pytest.raises(DomainError):
            check_split(split("t + sqrt(t - 2)^2", "log(z)"), SMALL)


class TestDisjunction:
    def test_margin_formulas_at_magic_plus(self):
        t = np.array([2.0, 5.0])
        m = split_margins(1 - 1 / t, 1 / t**2, t, -1.0)
        assert np.allclose(m["C1"][0], 0)
        assert np.allclose(m["C3a"][0], 0)
        assert np.allclose(m["C4a"][0], 4 * t / (t + 1))

    def test_mixed_disjunction_is_consistent(self):
        # 3a holds only at the first point and 3b only at the second
        norm = {"C1": np.array([1.0, 1.0]), "C2": np.array([1.0, 1.0]),
                "C3a": np.array([1.0, -1.0]), "C3b": np.array([-1.0, 1.0]),
                "C4a": np.array([1.0, 1.0]), "C4b": np.array([-1.0, -1.0])}
        ok, parts = aggregate_verdict(norm, 1e-9)
        assert ok
        norm["C3b"] = np.array([-1.0, -1.0])
        ok, parts = aggregate_verdict(norm, 1e-9)
        assert not ok and list(parts["C3"]) == [True, False]


class TestReduction:
    def test_fixed_point(self):
        W = reduce_to_log_volumetric(W_magic_plus())
        z = np.geomspace(0.1, 10, 5)
        assert np.allclose(W.f(z), np.log(z))

    def test_linear_volumetric(self):
        W = reduce_to_log_volumetric(split("t", "z"))
        assert np.all(W.f(np.geomspace(0.1, 10, 5)) == 0)

    def test_margins_agree(self):
        W = split("t + log(t)", "-log(z) + (z - 1)^2")
        R = reduce_to_log_volumetric(W)
        a, b = check_split(W, SMALL), check_split(R, SMALL)
        for k in a.margins:
            assert np.allclose(a.margins[k], b.margins[k], atol=1e-8, equal_nan=True), k
        assert a.verdict == b.verdict


class TestKnowlesSternberg:
    def test_det_null_lagrangian(self):
        rep = check_knowles_sternberg(det_energy(), SMALL, n=60)
        assert rep.verdict == Verdict.CONSISTENT
        assert abs(rep.condition("KS-iv").min_margin) <= 1e-9
        assert abs(rep.condition("KS-v").min_margin) <= 1e-9

    def test_frobenius(self):
        rep = check_knowles_sternberg(frobenius_sq(), SMALL, n=60)
        assert rep.verdict == Verdict.CONSISTENT
        assert rep.condition("SepConv").min_margin > 0

    def test_hencky_smoke(self):
        rep = check_knowles_sternberg(hencky(), SMALL, n=60)
        assert rep.verdict in tuple(Verdict)
        assert len(rep.conditions) == 5

    def test_negative_second_derivative(self):
        rep = check_knowles_sternberg(split("-(t + 1/t)", "-(z^2)"), SMALL, n=60)
        assert rep.verdict == Verdict.VIOLATED

    @pytest.mark.parametrize("W", [W for W in catalog() if isinstance(W, SplitEnergy)], ids=lambda W: W.name)
    def test_agrees_with_split_criterion(self, W):
        assert check_split(W).consistent == check_knowles_sternberg(W).consistent


class TestLegendreHadamard:
    @pytest.mark.parametrize("F", [np.eye(2), np.diag([2.0, 0.5]), np.array([[1.0, 0.5], [0.0, 1.0]])])
    def test_det_is_rank_one_affine(self, F):
        # a power-of-two step keeps the stencil points exact; at step 1e-4 one
        # ulp of W = 1 alone contributes 2.2e-8
        for xi, eta in [([1, 0], [0, 1]), ([0, 1], [1, 0]), ([1, 0], [1, 0]), ([0.5, 0], [0, 2])]:
            assert abs(legendre_hadamard(det_energy(), F, xi, eta, step=2.0**-13)) <= 1e-8

    def test_det_random_probes(self, rng):
        # rounding of det at |F| ~ e limits the step-1e-4 stencil to about 1e-7
        F = random_glplus(rng, 50)
        xi, eta = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
        assert np.max(np.abs(legendre_hadamard(det_energy(), F, xi, eta))) <= 1e-6

    def test_frobenius_quadratic(self, rng):
        F = random_glplus(rng, 50)
        xi, eta = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
        assert np.allclose(legendre_hadamard(frobenius_sq(), F, xi, eta), 2.0, atol=1e-6)

    def test_magic_plus_at_identity(self):
        assert legendre_hadamard(W_magic_plus(), np.eye(2), [1, 0], [1, 0]) >= -1e-8

    def test_leaves_glplus(self):
        with pytest.raises(NonPositiveDeterminant):
            legendre_hadamard(W_magic_plus(), np.diag([1.0, 1e-5]), [0, 1], [0, 1], step=1e-4)

    @pytest.mark.parametrize("name", ["W_magic_plus", "W_magic_minus", "W_smooth", "W_3b", "K_distortion"])
    def test_midpoint_convexity_along_rank_one_lines(self, name, rng):
        W = get_energy(name)
        assert check_split(W).consistent
        worst = np.inf
        for _ in range(200):
            F = random_glplus(rng, 1)[0]
            xi, eta = rng.normal(size=2), rng.normal(size=2)
            s = 0.05 / (np.linalg.norm(xi) * np.linalg.norm(eta))
            D = np.outer(xi, eta)
            if np.linalg.det(F + s * D) <= 0 or np.linalg.det(F - s * D) <= 0:
                continue
            worst = min(worst, rank_one_midpoint_defect(W, F, xi, eta, s))
        assert worst >= -1e-8

    def test_midpoint_detects_nonconvexity(self):
        W = split("-(t + 1/t)", "-(z^2)")
        assert rank_one_midpoint_defect(W, np.eye(2), [1, 0], [1, 0], 0.1) < 0


def test_scalar_function_constant():
    c = ScalarFunction.constant(2.0, "2")
    v, d1, d2 = c.jet(np.array([1.0, 3.0]))
    assert list(v) == [2.0, 2.0] and not d1.any() and not d2.any()
