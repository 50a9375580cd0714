import math

import numpy as np
import pytest

from baskakov.basis import psi
from baskakov.calculus import REGISTRY, get_function, smooth_functions
from baskakov.errors import DomainError
from baskakov.operators import OperatorImage
from baskakov.experiments import (
    C_CONST,
    C_TILDE,
    COMMUTATIONS,
    L_CONST,
    InequalityReport,
    bernstein_basis_sum,
    bernstein_check,
    bernstein_decomposition,
    commutation_check,
    convergence_study,
    converse_check,
    decomposition_checks,
    fit_slope,
    jackson_check,
    min_ell,
    norm_check,
    run_cases,
    telescoping_check,
    voronovskaya_check,
)

NONLINEAR = [f for f in smooth_functions() if f.name not in ("one", "affine")]


class TestConstants:
    def test_values(self):
        assert C_TILDE == pytest.approx(12.92820323, rel=1e-9)
        assert L_CONST == pytest.approx(22.98347241, rel=1e-9)
        assert C_CONST == pytest.approx(174.1384387, rel=1e-9)
        assert min_ell(2) == 46 and min_ell(3) == 69


class TestReports:
    def test_verdict_uses_slack(self):
        r = InequalityReport("x", "f", 4, 1.0 + 1e-9, 1.0, 1e-8, "pass")
        assert r.passed
        assert not InequalityReport("x", "f", 4, 2.0, 1.0, 0.0, "fail").passed
        assert InequalityReport("x", "f", 4, 2.0, 1.0, 0.0, "fail", asserted=False).passed

    def test_slope(self):
        ns = [4, 8, 16, 32]
        assert fit_slope(ns, [3.0 / n**2 for n in ns]) == pytest.approx(-2.0)
        assert math.isnan(fit_slope(ns, [1.0, 0.0, 1.0, 1.0]))

    def test_run_cases_order(self):
        cases = [(i,) for i in range(20)]
        assert run_cases(lambda i: i * i, cases, workers=4) == [i * i for i in range(20)]


class TestConvergence:
    NS = [4, 8, 16, 32, 64]

    def test_t2_closed_forms(self):
        t2 = get_function("t2")
        ns = np.array(self.NS, dtype=float)
        gs = convergence_study(t2, "gs", self.NS)
        mod = convergence_study(t2, "modified", self.NS)
        np.testing.assert_allclose([r.error for r in gs.rows], 2 * psi(8.0) / (ns - 1), rtol=1e-8)
        np.testing.assert_allclose([r.error for r in mod.rows], 2 * psi(8.0) / (ns * (ns - 1)), rtol=1e-8)
        assert gs.slope == pytest.approx(-1.0, abs=0.1)
        assert mod.slope == pytest.approx(-2.0, abs=0.1)

    def test_t2_slopes_at_large_n(self):
        t2 = get_function("t2")
        ns = [16, 32, 64, 128]
        assert convergence_study(t2, "gs", ns).slope == pytest.approx(-1.0, abs=0.05)
        assert convergence_study(t2, "modified", ns).slope == pytest.approx(-2.0, abs=0.05)

    def test_exp_decay(self):
        rep = convergence_study(get_function("exp-decay"), "modified", [8, 16, 32, 64])
        assert rep.slope <= -1.7
        for row in rep.rows:
            assert row.error <= row.bound

    def test_report_dict(self):
        d = convergence_study(get_function("inv-1px"), "gs", [4, 8, 16, 32]).to_dict()
        assert d["operator"] == "gs" and d["window"] == {"x_min": 0.0, "x_max": 8.0, "grid_points": 801}
        assert [r["n"] for r in d["rows"]] == [4, 8, 16, 32]

    def test_validation(self):
        with pytest.raises(ValueError):
            convergence_study(get_function("t2"), "gs", [4, 8, 16])
        with pytest.raises(ValueError):
            convergence_study(get_function("t2"), "gs", [2, 4, 8, 16])
        with pytest.raises(ValueError):
            convergence_study(get_function("t2"), "nope", [4, 8, 16, 32])

    @pytest.mark.parametrize("n", [8, 16, 32])
    def test_higher_order_separation(self, n):
        x = np.linspace(0, 8, 801)
        for f in NONLINEAR:
            fx = f(x)
            mod = np.max(np.abs(OperatorImage("modified", n, f)(x) - fx))
            gs = np.max(np.abs(OperatorImage("gs", n, f)(x) - fx))
            assert mod < gs, f.name


class TestJackson:
    def test_examples(self):
        r = jackson_check(get_function("affine"), 4)
        assert r.verdict == "pass" and r.left == pytest.approx(0.0, abs=1e-9)
        r = jackson_check(get_function("t2"), 4, strict=False)
        assert r.left == pytest.approx(12.0, rel=1e-8) and r.right == pytest.approx(18.0, rel=1e-12)
        assert r.verdict == "pass"
        r = jackson_check(get_function("inv-1px"), 8)
        assert r.verdict == "pass" and 0 < r.extra["ratio"] < 1

    def test_skips(self):
        assert jackson_check(get_function("hat"), 4).verdict == "skip"
        assert jackson_check(get_function("t2"), 4).verdict == "skip"


class TestNorm:
    def test_examples(self):
        r = norm_check(get_function("one"), 5)
        assert r.left == pytest.approx(1.0) and r.right == 2.0 and r.verdict == "pass"
        r = norm_check(get_function("damped-sine"), 4)
        assert r.verdict == "pass"

    def test_sharp_ratio_all_bounded(self):
        for f in REGISTRY.values():
            if f.growth:
                assert norm_check(f, 4).verdict == "skip"
                continue
            r = norm_check(f, 4)
            assert r.extra["ratio"] <= math.sqrt(3.5) + 1e-6, f.name


class TestVoronovskaya:
    def test_examples(self):
        assert voronovskaya_check(get_function("affine"), 8).left == pytest.approx(0.0, abs=1e-9)
        assert voronovskaya_check(get_function("inv-1px"), 8).verdict == "pass"

    def test_residual_slope(self):
        f = get_function("inv-1px")
        ns = [8, 16, 32]
        lefts = [voronovskaya_check(f, n).left for n in ns]
        assert fit_slope(ns, lefts) <= -2.5


class TestBernstein:
    def test_examples(self):
        r = bernstein_check(get_function("one"), 17)
        assert r.left == pytest.approx(0.0, abs=1e-9) and r.verdict == "pass"
        r = bernstein_check(get_function("exp-decay"), 17)
        assert r.verdict == "pass" and r.asserted
        assert not bernstein_check(get_function("exp-decay"), 8).asserted

    @pytest.mark.parametrize("n", [17, 32])
    def test_basis_sum(self, n):
        r = bernstein_basis_sum(n, grid_points=161)
        assert r.verdict == "pass" and r.right == pytest.approx(C_TILDE * n)

    def test_decomposition_sums(self):
        a, b, c = bernstein_decomposition(17, 0.5)
        # the three pieces bound the basis sum from above
        r = bernstein_basis_sum(17, window=(0.5, 0.5 + 1e-9), grid_points=2)
        assert r.left <= a + b + c
        for x in (0.01, 1 / 17, 0.5, 2.0):
            assert bernstein_decomposition(17, x)[0] <= 6 * 17

    def test_decomposition_c_bound(self):
        for n in (4, 17, 32):
            assert bernstein_decomposition(n, 1.0)[2] <= 2 * math.sqrt(3) * n

    def test_decomposition_b_exceeds_stated_bound(self):
        # the second piece grows like ~3.9 n, above 2 sqrt(3) n ~ 3.46 n
        b = bernstein_decomposition(4, 1.0)[1]
        assert b == pytest.approx(20.46, abs=0.01)
        checks = {r.check: r for r in decomposition_checks(4, 1.0)}
        assert checks["decomposition-b"].verdict == "fail"
        assert checks["decomposition-c"].verdict == "pass"
        assert not checks["decomposition-a"].asserted


class TestConverse:
    def test_linear(self):
        r = converse_check(get_function("affine"), 2, candidate_params=())
        assert r.left == 0.0 and r.verdict == "pass" and r.ell == 46

    def test_ell_too_small(self):
        with pytest.raises(DomainError):
            converse_check(get_function("exp-decay"), 2, ell=45)

    @pytest.mark.slow
    def test_exp_decay(self):
        r = converse_check(get_function("exp-decay"), 2, 46)
        assert r.verdict == "pass" and r.extra["margin"] > 1
        assert r.extra["C"] == pytest.approx(174.14, abs=0.01)


class TestTelescopeAndCommutation:
    def test_linear(self):
        assert telescoping_check(get_function("affine"), 4, 6).verdict == "pass"

    def test_t2_step(self):
        # V~_4 t^2 - V~_5 t^2 = -2 psi (1/12 - 1/20) = -psi/15, and V_4(4 psi)/100 = psi/15
        r = telescoping_check(get_function("t2"), 4, 5)
        assert r.left < 1e-9 and r.verdict == "pass"

    def test_exp_decay(self):
        r = telescoping_check(get_function("exp-decay"), 8, 9)
        assert r.left <= 1e-6

    def test_bad_range(self):
        with pytest.raises(ValueError):
            telescoping_check(get_function("t2"), 4, 13)

    @pytest.mark.parametrize("relation", COMMUTATIONS)
    def test_relations(self, relation):
        r = commutation_check(get_function("inv-1px"), 4, relation, m=8)
        assert r.verdict == "pass" and r.left <= 1e-7 * (1 + r.extra.get("scale", 1))

    def test_skip_hat(self):
        assert commutation_check(get_function("hat"), 4, "split").verdict == "skip"
        with pytest.raises(ValueError):
            commutation_check(get_function("inv-1px"), 4, "nope")
