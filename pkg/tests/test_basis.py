import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from baskakov.basis import (
    CENTRED_FROM,
    basis_derivatives,
    basis_row,
    basis_value,
    dtilde_basis,
    dtilde_modified_basis,
    dtilde_modified_row,
    dtilde_row,
    modified_basis,
    modified_row,
    psi,
    t_value_second_form,
    t_values,
)
from baskakov.errors import DomainError, PoleError
from baskakov.oracle import basis_exact, basis_poly, dtilde_poly, modified_basis_poly, t_poly


def _mp_modified(n, k, x, dps=60):
    """psi * (P~)'' and P~ at x with mpmath (independent of the closed forms)."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)

        def p(y):
            return mpmath.binomial(n + k - 1, k) * y**k * (1 + y) ** (-n - k)

        def pt(y):
            return p(y) - y * (1 + y) * mpmath.diff(p, y, 2) / n

        return float(pt(x)), float(x * (1 + x) * mpmath.diff(pt, x, 2))


class TestBasisValue:
    def test_examples(self):
        assert basis_value(2, 0, 0.0) == 1.0
        assert basis_value(2, 1, 1.0) == pytest.approx(0.25, rel=1e-15)
        assert basis_value(3, 2, 0.5) == pytest.approx(16 / 81, rel=1e-14)

    def test_negative_k_is_zero(self):
        assert basis_value(4, -1, 0.3) == 0.0

    @pytest.mark.parametrize("n,k,x", [(2, 3, Fraction(1, 3)), (7, 11, Fraction(5, 2)), (30, 0, Fraction(1, 7)),
                                       (64, 200, Fraction(3))])
    def test_matches_exact(self, n, k, x):
        assert basis_value(n, k, float(x)) == pytest.approx(float(basis_exact(n, k, x)), rel=1e-12)

    def test_large_indices_do_not_overflow(self):
        v = basis_value(500, 2000, 4.0)
        assert np.isfinite(v) and v > 0

    def test_domain(self):
        with pytest.raises(DomainError):
            basis_value(0, 1, 1.0)
        with pytest.raises(DomainError):
            basis_value(3, 1, -0.5)


class TestDerivatives:
    def test_boundary_examples(self):
        d1, _ = basis_derivatives(2, 0, 0.0)
        assert d1 == -2.0
        assert basis_derivatives(2, 5, 0.0) == (0.0, 0.0)

    @pytest.mark.parametrize("n,k,x", [(3, 1, Fraction(2, 5)), (5, 4, Fraction(7, 3)), (12, 0, Fraction(1, 9))])
    def test_against_symbolic(self, n, k, x):
        p = basis_poly(n, k)
        d1, d2 = basis_derivatives(n, k, float(x))
        assert d1 == pytest.approx(float(p.diff()(x)), rel=1e-12, abs=1e-14)
        assert d2 == pytest.approx(float(p.diff().diff()(x)), rel=1e-12, abs=1e-14)


class TestT:
    def test_examples(self):
        assert t_values(2, 0, 1.0)[0] == pytest.approx(3.0)
        assert t_values(2, 1, 1.0)[0] == pytest.approx(0.0, abs=1e-14)

    def test_pole_at_zero(self):
        with pytest.raises(PoleError):
            t_values(4, 2, 0.0)
        assert t_values(4, 1, 0.0)[0] == -10.0

    @pytest.mark.parametrize("n,k,x", [(4, 3, Fraction(1, 2)), (9, 0, Fraction(3)), (6, 10, Fraction(5, 4))])
    def test_two_forms_and_derivatives(self, n, k, x):
        t, t1, t2 = t_values(n, k, float(x), check=True)
        tp = t_poly(n, k)
        assert t == pytest.approx(float(tp(x)), rel=1e-12, abs=1e-12)
        assert t1 == pytest.approx(float(tp.diff()(x)), rel=1e-12, abs=1e-12)
        assert t2 == pytest.approx(float(tp.diff().diff()(x)), rel=1e-12, abs=1e-12)
        assert t_value_second_form(n, k, float(x)) == pytest.approx(t, rel=1e-10, abs=1e-10)


class TestDtildeBasis:
    def test_examples(self):
        assert dtilde_basis(2, 0, 1.0) == pytest.approx(0.75, rel=1e-14)
        for k in range(6):
            assert dtilde_basis(5, k, 0.0) == 0.0
        t = t_values(5, 3, 0.7)[0]
        assert dtilde_basis(5, 3, 0.7) == pytest.approx(t * basis_value(5, 3, 0.7), rel=1e-12)

    @pytest.mark.parametrize("n", [2, 17, 64])
    def test_product_form_consistency(self, n):
        for x in (0.05, 1.0, 9.5):
            for k in range(0, 200, 7):
                t = t_values(n, k, x)[0]
                p = basis_value(n, k, x)
                scale = max(abs(k * (k - 1) * (1 + x) / x) + 2 * k * (n + k) + (n + k) * (n + k + 1), 1.0) * p
                assert abs(dtilde_basis(n, k, x) - t * p) <= 1e-12 * scale + 1e-300


class TestModifiedBasis:
    def test_examples(self):
        # P_{2,0}(1) = 1/4 and Dt P_{2,0}(1) = 3/4, so P~ = 1/4 - 3/8 < 0
        assert modified_basis(2, 0, 1.0) == pytest.approx(-0.125, rel=1e-14)
        assert modified_basis(6, 0, 0.0) == 1.0
        assert modified_basis(6, 3, 0.0) == 0.0
        assert dtilde_modified_basis(6, 0, 0.0) == 0.0
        assert dtilde_modified_basis(6, 4, 0.0) == 0.0

    @pytest.mark.parametrize("n,k,x", [(5, 2, Fraction(1)), (3, 0, Fraction(1, 3)), (8, 9, Fraction(9, 4))])
    def test_against_symbolic(self, n, k, x):
        assert modified_basis(n, k, float(x)) == pytest.approx(float(modified_basis_poly(n, k)(x)), rel=1e-11)
        exact = float(dtilde_poly(modified_basis_poly(n, k))(x))
        assert dtilde_modified_basis(n, k, float(x)) == pytest.approx(exact, rel=1e-10, abs=1e-13)

    def test_basis_sum_bound_at_17(self):
        x = 0.5
        s = sum(abs(dtilde_modified_basis(17, k, x)) for k in range(200))
        assert s <= (6 + 4 * math.sqrt(3)) * 17


class TestRows:
    @pytest.mark.parametrize("n", [2, 5, 16, 64])
    @pytest.mark.parametrize("x", [0.0, 0.01, 0.3, 2.0, 9.0])
    def test_partition_of_unity(self, n, x):
        K = math.ceil(n * x + 12 * math.sqrt(n * psi(x)) + 60)
        while basis_row(n, x, K)[-1] > 1e-18:
            K *= 2
        row = basis_row(n, x, K)
        assert np.all(row >= 0)
        assert abs(row.sum() - 1.0) < 1e-13

    @pytest.mark.parametrize("n,x", [(3, 0.0), (3, 0.05), (8, 0.7), (40, 3.0)])
    def test_rows_match_scalars(self, n, x):
        K = 60
        np.testing.assert_allclose(basis_row(n, x, K), [basis_value(n, k, x) for k in range(K + 1)], rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(dtilde_row(n, x, K), [dtilde_basis(n, k, x) for k in range(K + 1)],
                                   rtol=1e-10, atol=1e-13 * n * n)
        np.testing.assert_allclose(modified_row(n, x, K), [modified_basis(n, k, x) for k in range(K + 1)],
                                   rtol=1e-10, atol=1e-13 * n)
        np.testing.assert_allclose(dtilde_modified_row(n, x, K), [dtilde_modified_basis(n, k, x) for k in range(K + 1)],
                                   rtol=1e-9, atol=1e-12 * n**3)

    def test_zero_mean_of_t(self):
        for n, x in [(4, 1.0), (16, 0.2), (32, 5.0)]:
            K = 4000
            tp = dtilde_row(n, x, K)
            assert abs(tp.sum()) < 1e-11 * n * n

    @pytest.mark.parametrize("n,x", [(4, 999.0), (4, CENTRED_FROM), (17, 250.0), (32, 0.5)])
    def test_centred_rows_against_mpmath(self, n, x):
        K = int(n * x + 40 * math.sqrt(n * psi(x)) + 100)
        row_pt = modified_row(n, x, K)
        row_dpt = dtilde_modified_row(n, x, K)
        mass = np.abs(basis_row(n, x, K)).sum() * n * n
        ks = np.linspace(0, K, 9).astype(int)
        ks = np.unique(np.append(ks, int(n * x)))
        for k in ks:
            pt, dpt = _mp_modified(n, int(k), x)
            assert abs(row_pt[k] - pt) <= 1e-13 * mass
            assert abs(row_dpt[k] - dpt) <= 1e-13 * mass
