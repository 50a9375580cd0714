"""Exact verification of the basis identities.

Finite identities are checked pointwise in rational arithmetic.  Every
quantity involved (P_{n,k}, T_{n,k}, psi and their derivatives) is a finite
sum of terms ``c * x^a * (1+x)^b`` with integer exponents, a class closed
under d/dx and products, so the left-hand sides can be differentiated
symbolically with the product rule and then evaluated exactly.

Infinite-sum identities (moments, Phi(alpha), the fourth-order sums) are
summed with mpmath at 50+ digits with a geometric tail bound.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import mpmath

from .errors import ConvergenceError, PoleError

Rational = Fraction


class XPoly:
    """Finite sum of ``c * x^a * (1+x)^b`` with rational c, integer a, b."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int], Fraction] | None = None):
        self.terms = {key: Fraction(c) for key, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, c) -> XPoly:
        return cls({(0, 0): Fraction(c)})

    @classmethod
    def mono(cls, c, a: int, b: int) -> XPoly:
        return cls({(a, b): Fraction(c)})

    def __add__(self, other: XPoly) -> XPoly:
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0) + c
        return XPoly(out)

    def __neg__(self) -> XPoly:
        return XPoly({key: -c for key, c in self.terms.items()})

    def __sub__(self, other: XPoly) -> XPoly:
        return self + (-other)

    def __mul__(self, other) -> XPoly:
        if not isinstance(other, XPoly):
            return XPoly({key: c * Fraction(other) for key, c in self.terms.items()})
        out: dict[tuple[int, int], Fraction] = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                key = (a1 + a2, b1 + b2)
                out[key] = out.get(key, 0) + c1 * c2
        return XPoly(out)

    __rmul__ = __mul__

    def diff(self) -> XPoly:
        out: dict[tuple[int, int], Fraction] = {}
        for (a, b), c in self.terms.items():
            if a:
                out[(a - 1, b)] = out.get((a - 1, b), 0) + c * a
            if b:
                out[(a, b - 1)] = out.get((a, b - 1), 0) + c * b
        return XPoly(out)

    def __call__(self, x: Fraction) -> Fraction:
        x = Fraction(x)
        total = Fraction(0)
        for (a, b), c in self.terms.items():
            if x == 0 and a < 0:
                raise PoleError("negative power of x at x = 0")
            total += c * x**a * (1 + x) ** b
        return total


PSI = XPoly.mono(1, 1, 1)


def basis_poly(n: int, k: int) -> XPoly:
    if k < 0:
        return XPoly()
    return XPoly.mono(math.comb(n + k - 1, k), k, -n - k)


def t_poly(n: int, k: int) -> XPoly:
    # first printed form of T_{n,k}
    return (
        XPoly.mono(k * (k - 1), -1, 1)
        + XPoly.const(-2 * k * (n + k))
        + XPoly.mono((n + k) * (n + k + 1), 1, -1)
    )


def dtilde_poly(g: XPoly) -> XPoly:
    return PSI * g.diff().diff()


def modified_basis_poly(n: int, k: int) -> XPoly:
    p = basis_poly(n, k)
    return p - dtilde_poly(p) * Fraction(1, n)


def basis_exact(n: int, k: int, x) -> Fraction:
    """Exact P_{n,k}(x) for rational x >= 0."""
    x = Fraction(x)
    if k < 0:
        return Fraction(0)
    return math.comb(n + k - 1, k) * x**k / (1 + x) ** (n + k)


def t_second_form_exact(n: int, k: int, x) -> Fraction:
    x = Fraction(x)
    p = x * (1 + x)
    d = Fraction(k, n) - x
    return n * (-1 - (1 + 2 * x) / p * d + n / p * d * d)


# ---------------------------------------------------------------------------
# finite identities: each returns (lhs, rhs) as exact rationals

def _P(n, k, x):
    return basis_exact(n, k, x)


def _id_lower_shift(n, k, x):
    return k * _P(n, k, x), n * x * _P(n + 1, k - 1, x)


def _id_upper_shift(n, k, x):
    return (n + k) * _P(n, k, x), n * (1 + x) * _P(n + 1, k, x)


def _id_lower_shift2(n, k, x):
    return k * (k - 1) * _P(n, k, x), n * (n + 1) * x**2 * _P(n + 2, k - 2, x)


def _id_upper_shift2(n, k, x):
    return (n + k) * (n + k + 1) * _P(n, k, x), n * (n + 1) * (1 + x) ** 2 * _P(n + 2, k, x)


def _id_ratio_up(n, k, x):
    return x / (1 + x) * _P(n, k, x), Fraction(k + 1, n + k) * _P(n, k + 1, x)


def _id_ratio_down(n, k, x):
    if k == 0:
        raise PoleError("(n+k-1)/k is undefined for k = 0")
    return (1 + x) / x * _P(n, k, x), Fraction(n + k - 1, k) * _P(n, k - 1, x)


def _id_first_derivative(n, k, x):
    lhs = basis_poly(n, k).diff()(x)
    return lhs, n * (_P(n + 1, k - 1, x) - _P(n + 1, k, x))


def _id_second_derivative(n, k, x):
    lhs = basis_poly(n, k).diff().diff()(x)
    rhs = n * (n + 1) * (_P(n + 2, k - 2, x) - 2 * _P(n + 2, k - 1, x) + _P(n + 2, k, x))
    return lhs, rhs


def _id_t_two_forms(n, k, x):
    return t_poly(n, k)(x), t_second_form_exact(n, k, x)


def _id_t_first_derivative(n, k, x):
    x = Fraction(x)
    rhs = Fraction(-k * (k - 1)) / x**2 + Fraction((n + k) * (n + k + 1)) / (1 + x) ** 2
    return t_poly(n, k).diff()(x), rhs


def _id_t_second_derivative(n, k, x):
    x = Fraction(x)
    rhs = Fraction(2 * k * (k - 1)) / x**3 - Fraction(2 * (n + k) * (n + k + 1)) / (1 + x) ** 3
    return t_poly(n, k).diff().diff()(x), rhs


def _id_dtilde_basis(n, k, x):
    return dtilde_poly(basis_poly(n, k))(x), t_poly(n, k)(x) * _P(n, k, x)


def _id_dtilde_basis_three_term(n, k, x):
    rhs = (
        (k - 1) * (n + k - 1) * _P(n, k - 1, x)
        - 2 * k * (n + k) * _P(n, k, x)
        + (k + 1) * (n + k + 1) * _P(n, k + 1, x)
    )
    return dtilde_poly(basis_poly(n, k))(x), rhs


def _id_psi_shift(n, k, x):
    x = Fraction(x)
    return x * (1 + x) * _P(n + 2, k - 1, x), Fraction(k * (n + k), n * (n + 1)) * _P(n, k, x)


def _tp(n, k, x):
    return t_poly(n, k)(x) * _P(n, k, x) if k >= 0 else Fraction(0)


def _id_t_pair_sum(n, k, x):
    lhs = _tp(n + 1, k - 1, x) + _tp(n + 1, k, x)
    m = n + 1
    rhs = (
        (k - 2) * (n + k - 1) * _P(m, k - 2, x)
        - (k - 1) * (n + k) * _P(m, k - 1, x)
        - k * (n + k + 1) * _P(m, k, x)
        + (k + 1) * (n + k + 2) * _P(m, k + 1, x)
    )
    return lhs, rhs


def _id_t_derivative_product(n, k, x):
    x = Fraction(x)
    lhs = -x * (1 + x) / n * t_poly(n, k).diff()(x) * basis_poly(n, k).diff()(x)
    m = n + 1
    rhs = (
        k * (n + k - 1) * _P(m, k - 2, x)
        - (k - 1) * (n + k) * _P(m, k - 1, x)
        - k * (n + k + 1) * _P(m, k, x)
        + (k + 1) * (n + k) * _P(m, k + 1, x)
    )
    return lhs, rhs


def _id_t_curvature(n, k, x):
    x = Fraction(x)
    lhs = x * (1 + x) / n * t_poly(n, k).diff().diff()(x) * _P(n, k, x)
    rhs = 2 * (n + k - 1) * _P(n + 1, k - 2, x) - 2 * (k + 1) * _P(n + 1, k + 1, x)
    return lhs, rhs


def _id_dtilde_modified(n, k, x):
    # symbolic psi * (P~)'' against the three-group expansion
    lhs = dtilde_poly(modified_basis_poly(n, k))(x)
    curv = _id_t_curvature(n, k, x)[1]
    pair = _id_t_pair_sum(n, k, x)[1]
    t = t_poly(n, k)(x) if k >= 0 else Fraction(0)
    rest = (1 - t / n) * t * _P(n, k, x)
    return lhs, curv + 2 * pair + rest


FINITE_IDENTITIES: dict[str, Callable[[int, int, Fraction], tuple[Fraction, Fraction]]] = {
    "lower-shift": _id_lower_shift,
    "upper-shift": _id_upper_shift,
    "lower-shift2": _id_lower_shift2,
    "upper-shift2": _id_upper_shift2,
    "ratio-up": _id_ratio_up,
    "ratio-down": _id_ratio_down,
    "first-derivative": _id_first_derivative,
    "second-derivative": _id_second_derivative,
    "t-two-forms": _id_t_two_forms,
    "t-first-derivative": _id_t_first_derivative,
    "t-second-derivative": _id_t_second_derivative,
    "dtilde-basis": _id_dtilde_basis,
    "dtilde-basis-three-term": _id_dtilde_basis_three_term,
    "psi-shift": _id_psi_shift,
    "t-pair-sum": _id_t_pair_sum,
    "t-derivative-product": _id_t_derivative_product,
    "t-curvature": _id_t_curvature,
    "dtilde-modified": _id_dtilde_modified,
}
# "t-pair-sum", "t-derivative-product" and "t-curvature" are the three
# relations between T and neighbouring basis functions.


@dataclass(frozen=True)
class IdentityCase:
    identity: str
    n: int
    k: int
    x: Fraction
    outcome: str  # "pass", "fail" or "pole"
    lhs: Fraction | None = None
    rhs: Fraction | None = None

    @property
    def passed(self) -> bool:
        return self.outcome != "fail"


def verify_identity(identity: str, n: int, k: int, x) -> IdentityCase:
    """Evaluate both sides of a finite identity exactly.

    Poles (x = 0 in a 1/x identity, k = 0 in the (n+k-1)/k identity) are
    reported with outcome ``"pole"`` and do not count as failures.
    """
    fn = FINITE_IDENTITIES[identity]
    x = Fraction(x)
    try:
        lhs, rhs = fn(n, k, x)
    except (PoleError, ZeroDivisionError):
        return IdentityCase(identity, n, k, x, "pole")
    return IdentityCase(identity, n, k, x, "pass" if lhs == rhs else "fail", lhs, rhs)


def random_rationals(count: int, rng: random.Random, upper: int = 4) -> list[Fraction]:
    """``count`` distinct rationals in (0, upper] with small denominators."""
    out: list[Fraction] = []
    while len(out) < count:
        q = rng.randint(1, 12)
        p = rng.randint(1, upper * q)
        x = Fraction(p, q)
        if x not in out:
            out.append(x)
    return out


def identity_sweep(
    n_range: Iterable[int],
    k_range: Iterable[int],
    points_per_case: int = 5,
    seed: int = 7,
    identities: Iterable[str] | None = None,
) -> list[IdentityCase]:
    """Run every finite identity over the (n, k) grid at seeded rational points."""
    rng = random.Random(seed)
    ids = list(identities or FINITE_IDENTITIES)
    k_values = list(k_range)
    cases = []
    for n in n_range:
        for k in k_values:
            for x in random_rationals(points_per_case, rng):
                cases.extend(verify_identity(name, n, k, x) for name in ids)
    return cases


def certificate_csv(cases: Iterable[IdentityCase]) -> str:
    """One line per case: identity, n, k, x, outcome."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["identity", "n", "k", "x", "outcome"])
    for c in cases:
        writer.writerow([c.identity, c.n, c.k, str(c.x), c.outcome])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# infinite sums at high precision

@dataclass
class SumReport:
    identity: str
    n: int
    x: str
    series: str
    closed_form: str
    difference: float
    tail_bound: float
    terms: int
    precision: int
    passed: bool
    extra: dict = field(default_factory=dict)


def _certified_sum(term: Callable[[int, mpmath.mpf], mpmath.mpf], n: int, x, eps, cap: int):
    """Sum ``term(k, P_{n,k}(x))`` for k >= 0 with a geometric tail bound.

    Stops once the term ratio has been below one and non-increasing for
    ten consecutive steps and the geometric bound t_k * r/(1-r) is below
    ``eps``.  For polynomial-in-k times basis terms the ratio tends to
    x/(1+x) monotonically from above once k is past the polynomial's
    roots, which is what the ten-step check guards.
    """
    q = x / (1 + x)
    p = (1 + x) ** (-n)
    total = mpmath.mpf(0)
    prev = None
    prev_ratio = None
    steady = 0
    for k in range(cap):
        t = term(k, p)
        total += t
        if prev is not None and prev != 0:
            ratio = abs(t / prev)
            if ratio < 1 and (prev_ratio is None or ratio <= prev_ratio):
                steady += 1
            else:
                steady = 0
            prev_ratio = ratio
            if steady >= 10 and t != 0:
                bound = abs(t) * ratio / (1 - ratio)
                if bound < eps:
                    return total, bound, k + 1
        prev = t
        p = p * (n + k) / (k + 1) * q
    raise ConvergenceError(f"series tail not certifiable within {cap} terms")


def _moment_closed(n, j, x):
    ps = x * (1 + x)
    return [
        mpmath.mpf(1),
        mpmath.mpf(0),
        ps / n,
        (1 + 2 * x) * ps / n**2,
        3 * (n + 2) * ps**2 / n**3 + ps / n**3,
    ][j]


def _t_mp(n, k, x):
    return k * (k - 1) * (1 + x) / x - 2 * k * (n + k) + (n + k) * (n + k + 1) * x / (1 + x)


def sum_identity_cases() -> dict[str, tuple[Callable, Callable]]:
    """Map identity id -> (term(n, x, k, P), closed_form(n, x))."""
    cases: dict[str, tuple[Callable, Callable]] = {}
    for j in range(5):
        cases[f"moment-{j}"] = (
            lambda n, x, k, p, j=j: (mpmath.mpf(k) / n - x) ** j * p,
            lambda n, x, j=j: _moment_closed(n, j, x),
        )
    for alpha in (-1, 0, 1, 2):
        cases[f"phi({alpha})"] = (
            lambda n, x, k, p, a=alpha: (a - _t_mp(n, k, x) / n) ** 2 * p,
            lambda n, x, a=alpha: mpmath.mpf(a) ** 2 + 2 + mpmath.mpf(2) / n,
        )
    cases["fourth-lower"] = (
        lambda n, x, k, p: mpmath.mpf(k) ** 2 * (k - 1) ** 2 * p,
        lambda n, x: n * (n + 1) * (n + 2) * ((n + 3) * x**4 + 4 * x**3 + 2 * x**2 / (n + 2)),
    )
    cases["fourth-mixed"] = (
        lambda n, x, k, p: mpmath.mpf(k) * (k - 1) * (n + k) * (n + k + 1) * p,
        lambda n, x: n * (n + 1) * (n + 2) * (n + 3) * x**2 * (1 + x) ** 2,
    )
    cases["fourth-upper"] = (
        lambda n, x, k, p: mpmath.mpf(n + k) ** 2 * (n + k + 1) ** 2 * p,
        lambda n, x: n * (n + 1) * (n + 2) * (1 + x) ** 2
        * ((n + 3) * (1 + x) ** 2 - 4 * (1 + x) + mpmath.mpf(2) / (n + 2)),
    )
    cases["t-mean"] = (
        lambda n, x, k, p: _t_mp(n, k, x) * p,
        lambda n, x: mpmath.mpf(0),
    )
    return cases


def verify_sum_identity(identity: str, n: int, x, precision: int = 30, cap: int = 200000) -> SumReport:
    """Compare a series identity with its closed form to 10^-precision."""
    term, closed = sum_identity_cases()[identity]
    with mpmath.workdps(precision + 25):
        xm = mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator
        eps = mpmath.mpf(10) ** (-(precision + 5))
        total, tail, count = _certified_sum(lambda k, p: term(n, xm, k, p), n, xm, eps, cap)
        target = closed(n, xm)
        diff = abs(total - target)
        ok = diff + tail <= mpmath.mpf(10) ** (-precision)
        return SumReport(
            identity=identity,
            n=n,
            x=str(Fraction(x)),
            series=mpmath.nstr(total, precision + 5),
            closed_form=mpmath.nstr(target, precision + 5),
            difference=float(diff),
            tail_bound=float(tail),
            terms=count,
            precision=precision,
            passed=bool(ok),
        )
