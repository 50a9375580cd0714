import random
from fractions import Fraction

import mpmath
import pytest

from baskakov.errors import ConvergenceError
from baskakov.oracle import (
    FINITE_IDENTITIES,
    XPoly,
    basis_exact,
    basis_poly,
    certificate_csv,
    identity_sweep,
    random_rationals,
    sum_identity_cases,
    t_poly,
    t_second_form_exact,
    verify_identity,
    verify_sum_identity,
)


class TestExactBasis:
    def test_examples(self):
        assert basis_exact(2, 1, 1) == Fraction(1, 4)
        assert basis_exact(3, 2, Fraction(1, 2)) == Fraction(16, 81)
        for n in (1, 5, 40):
            assert basis_exact(n, 0, 0) == 1
        assert basis_exact(3, -1, Fraction(2)) == 0

    def test_symbolic_form_agrees(self):
        for n, k, x in [(2, 0, Fraction(3)), (5, 7, Fraction(2, 9)), (11, 3, Fraction(13, 4))]:
            assert basis_poly(n, k)(x) == basis_exact(n, k, x)

    def test_reduced(self):
        v = basis_exact(6, 4, Fraction(6, 4))
        assert v.denominator > 0 and v == Fraction(v.numerator, v.denominator)


class TestXPoly:
    def test_product_rule(self):
        # d/dx [x^2 (1+x)^-1] = 2x/(1+x) - x^2/(1+x)^2
        g = XPoly.mono(1, 2, -1)
        x = Fraction(3, 5)
        assert g.diff()(x) == 2 * x / (1 + x) - x**2 / (1 + x) ** 2

    def test_t_forms(self):
        for n, k, x in [(2, 0, Fraction(1)), (2, 1, Fraction(1)), (7, 5, Fraction(3, 11))]:
            assert t_poly(n, k)(x) == t_second_form_exact(n, k, x)
        assert t_poly(2, 0)(Fraction(1)) == 3
        assert t_poly(2, 1)(Fraction(1)) == 0


class TestFiniteIdentities:
    def test_examples(self):
        c = verify_identity("lower-shift", 3, 2, Fraction(3, 7))
        assert c.outcome == "pass"
        assert c.lhs == c.rhs == 2 * basis_exact(3, 2, Fraction(3, 7))
        assert verify_identity("psi-shift", 4, 3, Fraction(1, 2)).outcome == "pass"
        assert verify_identity("t-curvature", 5, 2, Fraction(2, 3)).outcome == "pass"

    def test_pole_is_flagged_not_failed(self):
        c = verify_identity("ratio-down", 4, 0, Fraction(1, 2))
        assert c.outcome == "pole" and c.passed
        c = verify_identity("t-first-derivative", 4, 3, Fraction(0))
        assert c.outcome == "pole"

    @pytest.mark.parametrize("identity", sorted(FINITE_IDENTITIES))
    def test_identity_random_points(self, identity):
        rng = random.Random(11)
        for x in random_rationals(3, rng):
            for n in (2, 3, 9):
                for k in (0, 1, 2, 5, 13):
                    assert verify_identity(identity, n, k, x).passed

    def test_corrupted_identity_fails(self):
        # a deliberately wrong right-hand side must be detected exactly
        n, k, x = 4, 3, Fraction(2, 5)
        lhs, rhs = FINITE_IDENTITIES["lower-shift"](n, k, x)
        assert lhs == rhs and lhs != rhs + Fraction(1, 10**30)

    def test_sweep_is_seeded(self):
        a = identity_sweep(range(2, 4), range(0, 3), points_per_case=2, seed=3)
        b = identity_sweep(range(2, 4), range(0, 3), points_per_case=2, seed=3)
        assert certificate_csv(a) == certificate_csv(b)
        assert all(c.passed for c in a)
        lines = certificate_csv(a).splitlines()
        assert lines[0] == "identity,n,k,x,outcome"
        assert len(lines) == 1 + len(a)


class TestSumIdentities:
    def test_examples(self):
        term, closed = sum_identity_cases()["phi(0)"]
        assert closed(4, mpmath.mpf(1)) == mpmath.mpf("2.5")
        assert sum_identity_cases()["phi(1)"][1](4, mpmath.mpf(1)) == mpmath.mpf("3.5")
        assert sum_identity_cases()["fourth-mixed"][1](4, mpmath.mpf(1)) == 3360

    @pytest.mark.parametrize("identity", sorted(sum_identity_cases()))
    def test_thirty_digits(self, identity):
        r = verify_sum_identity(identity, 4, Fraction(1), precision=30)
        assert r.passed, r
        assert r.tail_bound < 1e-30

    def test_wrong_closed_form_is_caught(self):
        cases = sum_identity_cases()
        term, closed = cases["moment-2"]
        with mpmath.workdps(50):
            x = mpmath.mpf(1)
            total = mpmath.nsum(lambda k: term(4, x, int(k), mpmath.binomial(4 + k - 1, k) * x**k * (1 + x) ** (-4 - k)),
                                [0, mpmath.inf])
            assert abs(total - closed(4, x)) < mpmath.mpf(10) ** -30
            assert abs(total - closed(4, x) * (1 + mpmath.mpf(10) ** -20)) > mpmath.mpf(10) ** -30

    def test_tail_not_certifiable(self):
        with pytest.raises(ConvergenceError):
            verify_sum_identity("moment-4", 2, Fraction(3), precision=30, cap=20)
