import math

import numpy as np
import pytest

from baskakov.basis import psi
from baskakov.calculus import get_function
from baskakov.errors import DomainError
from baskakov.operators import (
    OperatorImage,
    TruncationConfig,
    baskakov_apply,
    dtilde_image,
    dtilde_squared_of_triple,
    gs_apply,
    iterate_modified,
    modified_gs_apply,
)

XS = np.array([0.0, 0.05, 0.5, 1.0, 3.0, 8.0])

# 40-digit mpmath values of V_n, V~_n and Dt V~_n applied to e^-t
FROZEN_EXP = {
    (4, 1.0): (0.51409240317878017553, 0.39320179848326643789, 0.66489826091201248874),
    (8, 0.5): (0.65866706274506838788, 0.61083255840037703652, 0.45241354225980063239),
}


def linear(t):
    return 1.5 - 0.25 * np.asarray(t)


def square(t):
    return np.asarray(t) ** 2


class TestTruncationConfig:
    def test_invalid(self):
        with pytest.raises(ValueError):
            TruncationConfig(tol=0.0)
        with pytest.raises(ValueError):
            TruncationConfig(safety_cap=0)

    def test_cap_check(self):
        TruncationConfig().check(32, 8.0)
        with pytest.raises(ValueError):
            TruncationConfig(safety_cap=100).check(32, 8.0)


class TestBaskakov:
    def test_examples(self):
        assert baskakov_apply(lambda t: np.ones_like(t), 8, 2.0) == pytest.approx(1.0, abs=1e-12)
        assert baskakov_apply(lambda t: t, 8, 2.0) == pytest.approx(2.0, abs=1e-10)
        assert baskakov_apply(square, 4, 1.0) == pytest.approx(1.5, rel=1e-10)

    def test_n_one_allowed(self):
        assert baskakov_apply(lambda t: t, 1, 0.5) == pytest.approx(0.5, rel=1e-10)

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    def test_second_moment_on_grid(self, n):
        vals = baskakov_apply(square, n, XS)
        np.testing.assert_allclose(vals, XS**2 + psi(XS) / n, rtol=1e-10, atol=1e-14)


class TestGoodmanSharma:
    def test_examples(self):
        np.testing.assert_allclose(gs_apply(linear, 6, XS), linear(XS), atol=1e-9)
        assert gs_apply(square, 4, 1.0) == pytest.approx(7 / 3, abs=1e-8)
        f = get_function("damped-sine")
        assert gs_apply(f, 5, 0.0) == f(0.0)

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    def test_closed_form(self, n):
        np.testing.assert_allclose(gs_apply(square, n, XS), XS**2 + 2 * psi(XS) / (n - 1), rtol=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            gs_apply(square, 1, 0.5)


class TestModified:
    def test_examples(self):
        np.testing.assert_allclose(modified_gs_apply(linear, 6, XS), linear(XS), atol=1e-9)
        assert modified_gs_apply(square, 4, 1.0) == pytest.approx(2 / 3, abs=1e-8)
        f = get_function("exp-decay")
        assert modified_gs_apply(f, 16, 0.0) == 1.0

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    def test_closed_form(self, n):
        exact = XS**2 - 2 * psi(XS) / (n * (n - 1))
        got = modified_gs_apply(square, n, XS)
        np.testing.assert_allclose(got, exact, rtol=1e-8, atol=1e-12)

    @pytest.mark.parametrize("key", sorted(FROZEN_EXP))
    def test_frozen(self, key):
        n, x = key
        f = get_function("exp-decay")
        v, vt, dvt = FROZEN_EXP[key]
        assert gs_apply(f, n, x) == pytest.approx(v, rel=1e-11)
        assert modified_gs_apply(f, n, x) == pytest.approx(vt, rel=1e-11)
        assert dtilde_image(f, n, x) == pytest.approx(dvt, rel=1e-10)

    def test_error_channel(self):
        val, err = modified_gs_apply(get_function("inv-1px"), 8, XS, with_error=True)
        assert val.shape == err.shape == XS.shape
        assert np.all(err >= 0) and np.all(err < 1e-9)

    def test_norm_contraction(self):
        for name in ("exp-decay", "damped-sine", "hat", "inv-1px-sq"):
            f = get_function(name)
            for n in (4, 8, 16, 32):
                vals = modified_gs_apply(f, n, np.linspace(0, 8, 81))
                assert np.max(np.abs(vals)) <= math.sqrt(3 + 2 / n) * f.sup + 1e-9


class TestDtildeImage:
    def test_linear_and_origin(self):
        np.testing.assert_allclose(dtilde_image(linear, 7, XS), 0.0, atol=1e-9)
        assert dtilde_image(get_function("exp-decay"), 9, 0.0) == 0.0

    def test_against_finite_differences(self):
        f = get_function("exp-decay")
        h = 1e-3
        x = 1.0
        v = modified_gs_apply(f, 20, np.array([x - h, x, x + h]))
        fd = psi(x) * (v[0] - 2 * v[1] + v[2]) / h**2
        assert dtilde_image(f, 20, x) == pytest.approx(fd, abs=1e-6)

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_square_closed_form(self, n):
        # Dt (x^2 - c psi) = 2 psi (1 - c)
        c = 2 / (n * (n - 1))
        np.testing.assert_allclose(dtilde_image(square, n, XS), 2 * psi(XS) * (1 - c), rtol=1e-8, atol=1e-12)


class TestIterates:
    def test_examples(self):
        np.testing.assert_allclose(iterate_modified(linear, 5, 3, np.array([0.0, 0.7, 2.5])),
                                   linear(np.array([0.0, 0.7, 2.5])), atol=1e-8)
        assert iterate_modified(lambda t: np.ones_like(t), 4, 2, 0.7) == pytest.approx(1.0, abs=1e-9)
        # V~_4 t^2 = t^2 - psi/6 and V~_4 psi = (5/6) psi, so V~_4^2 t^2 (1) = 1 - 2 (1 + 5/6)/6
        assert iterate_modified(square, 4, 2, 1.0) == pytest.approx(7 / 18, abs=1e-7)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            iterate_modified(square, 4, 4, 1.0)

    def test_image_repr_and_kind(self):
        with pytest.raises(ValueError):
            OperatorImage("nope", 4, square)
        assert "modified" in repr(OperatorImage("modified", 4, get_function("t2")))

    def test_dtilde_squared(self):
        # Dt^2 V~_n^3 t^2 = 4 psi (1 - c)^3 with c = 2/(n(n-1))
        assert dtilde_squared_of_triple(square, 4, 1.0) == pytest.approx(8 * (5 / 6) ** 3, abs=1e-6)
        assert dtilde_squared_of_triple(linear, 4, 1.3) == pytest.approx(0.0, abs=1e-7)
        assert dtilde_squared_of_triple(get_function("exp-decay"), 17, 0.0) == 0.0
