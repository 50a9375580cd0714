"""Jets, test functions, sup-norms, the lambda/theta sums and K-functional estimates.

A jet of order m at x is the vector (g(x), g'(x), ..., g^(m)(x)); sums and
products follow the truncated Leibniz rule, so Dt g = psi g'' can be
applied exactly: psi lifts to the jet (x(1+x), 1+2x, 2, 0, ...), the
second derivative of an order-m jet is an order-(m-2) jet, and Dt^r needs
order 2r.  Jets here are vectorised over x: coefficient arrays have shape
(order+1, *x.shape).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .basis import psi
from .errors import DomainError

__all__ = [
    "MAX_ORDER",
    "Jet",
    "TestFunction",
    "REGISTRY",
    "get_function",
    "smooth_functions",
    "dtilde_pow",
    "dtilde_function",
    "SupNorm",
    "sup_norm",
    "SummationValue",
    "lambda_theta",
    "central_moment",
    "KFunctionalValue",
    "k_functional_upper",
]

MAX_ORDER = 6


class Jet:
    """Truncated Taylor data (g, g', ..., g^(order)) at one or many points."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.shape[0] - 1 > MAX_ORDER:
            raise ValueError(f"jet order {c.shape[0] - 1} exceeds {MAX_ORDER}")
        self.c = c

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    @classmethod
    def constant(cls, a, x, order: int) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = a
        return cls(c)

    @classmethod
    def variable(cls, x, order: int) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def psi(cls, x, order: int) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x * (1.0 + x)
        if order >= 1:
            c[1] = 1.0 + 2.0 * x
        if order >= 2:
            c[2] = 2.0
        return cls(c)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise DomainError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.c[: order + 1])

    def _match(self, other):
        if isinstance(other, Jet):
            m = min(self.order, other.order)
            return self.c[: m + 1], other.c[: m + 1]
        o = np.zeros_like(self.c)
        o[0] = other
        return self.c, o

    def __add__(self, other):
        a, b = self._match(other)
        return Jet(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._match(other)
        return Jet(a - b)

    def __rsub__(self, other):
        a, b = self._match(other)
        return Jet(b - a)

    def __neg__(self):
        return Jet(-self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self._match(other)
        out = np.zeros_like(a)
        for j in range(a.shape[0]):
            for i in range(j + 1):
                out[j] += math.comb(j, i) * a[i] * b[j - i]
        return Jet(out)

    __rmul__ = __mul__

    def derivative(self, times: int = 1) -> "Jet":
        if times > self.order:
            raise DomainError(f"jet of order {self.order} has no derivative of order {times}")
        return Jet(self.c[times:])

    def compose_poly(self, coeffs) -> "Jet":
        """p(g) for the polynomial p(y) = sum_i coeffs[i] y^i (Horner)."""
        out = Jet(np.zeros_like(self.c))
        for a in reversed(list(coeffs)):
            out = out * self + a
        return out

    def dtilde(self, x) -> "Jet":
        """Dt g = psi g'' as a jet of order (order - 2); x is the base point."""
        g2 = self.derivative(2)
        return Jet.psi(x, g2.order) * g2


# ---------------------------------------------------------------------------
# test functions


def _rising(p: float, j: int) -> float:
    return math.prod(p + i for i in range(j))


def _inv_power_jet(p: float):
    # derivatives of (1+x)^-p: (-1)^j (p)_j (1+x)^(-p-j)
    def jet(x, order):
        y = 1.0 + np.asarray(x, dtype=float)
        return np.stack([(-1) ** j * _rising(p, j) * y ** (-p - j) for j in range(order + 1)])

    return jet


def _poly_jet(coeffs):
    P = np.polynomial.Polynomial(coeffs)

    def jet(x, order):
        x = np.asarray(x, dtype=float)
        return np.stack([P.deriv(j)(x) if j else P(x) for j in range(order + 1)])

    return jet


def _exp_jet(x, order):
    e = np.exp(-np.asarray(x, dtype=float))
    return np.stack([(-1) ** j * e for j in range(order + 1)])


def _x_exp_jet(x, order):
    x = np.asarray(x, dtype=float)
    e = np.exp(-x)
    return np.stack([(-1) ** j * (x - j) * e for j in range(order + 1)])


def _damped_sine_jet(x, order):
    # e^{-x} sin 2x = Im e^{(-1+2i) x}
    x = np.asarray(x, dtype=float)
    z = -1.0 + 2.0j
    e = np.exp(z * x)
    return np.stack([np.imag(z**j * e) for j in range(order + 1)])


def _x_over_jet(x, order):
    c = -_inv_power_jet(1.0)(x, order)
    c[0] += 1.0
    return c


def _hat(t):
    t = np.asarray(t, dtype=float)
    return np.maximum(0.0, 1.0 - np.abs(t - 1.0))


@dataclass(frozen=True)
class TestFunction:
    """A source function with jets and the metadata the experiments need.

    ``growth`` is 0 for bounded functions, otherwise the polynomial degree.
    ``in_w2`` means Dt f is bounded on [0, inf); ``in_w2_0`` adds
    Dt f(0+) = 0.  ``dtilde_bounded[r-1]`` records whether Dt^r f is
    bounded, worked out by hand from the closed forms.
    """

    __test__ = False  # keep pytest from collecting it

    name: str
    jet_fn: Callable | None
    value_fn: Callable | None = None
    growth: int = 0
    sup: float | None = None
    in_w2: bool = False
    in_w2_0: bool = False
    dtilde_bounded: tuple[bool, bool, bool] = (False, False, False)
    description: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def key(self):
        return ("fn", self.name)

    @property
    def smooth(self) -> bool:
        return self.jet_fn is not None

    @property
    def breakpoints(self) -> tuple:
        """Points of non-smoothness (the quadrature splits there)."""
        return tuple(self.meta.get("breakpoints", ()))

    @property
    def magnitude(self):
        return self.sup

    def __call__(self, t):
        if self.value_fn is not None:
            return self.value_fn(t)
        out = self.jet_fn(t, 0)[0]
        return float(out) if np.ndim(out) == 0 else out

    def jet(self, x, order: int) -> Jet:
        if self.jet_fn is None:
            raise DomainError(f"{self.name} is not smooth; no jets available")
        if order > MAX_ORDER:
            raise DomainError(f"jet order {order} exceeds {MAX_ORDER}")
        return Jet(self.jet_fn(x, order))


_DS_ARGMAX = math.atan(2.0) / 2.0
_DS_SUP = math.exp(-_DS_ARGMAX) * math.sin(2.0 * _DS_ARGMAX)

_ALL_BOUNDED = (True, True, True)

REGISTRY: dict[str, TestFunction] = {
    f.name: f
    for f in [
        TestFunction("one", _poly_jet([1.0]), growth=0, sup=1.0, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="1"),
        TestFunction("affine", _poly_jet([1.0, 2.0]), growth=1, sup=None, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="1 + 2t"),
        # Dt t^2 = 2 psi, Dt^2 = 4 psi, Dt^3 = 8 psi: all unbounded
        TestFunction("t2", _poly_jet([0.0, 0.0, 1.0]), growth=2, sup=None,
                     dtilde_bounded=(False, False, False), description="t^2"),
        # Dt = -2x/(1+x)^2 etc.; every Dt^r decays like 1/x
        TestFunction("x-over-1px", _x_over_jet, growth=0, sup=1.0, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="t/(1+t)"),
        TestFunction("inv-1px", _inv_power_jet(1.0), growth=0, sup=1.0, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="1/(1+t)"),
        TestFunction("inv-1px-sq", _inv_power_jet(2.0), growth=0, sup=1.0, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="1/(1+t)^2"),
        TestFunction("exp-decay", _exp_jet, growth=0, sup=1.0, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="e^-t"),
        TestFunction("x-exp-decay", _x_exp_jet, growth=0, sup=math.exp(-1.0), in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="t e^-t"),
        TestFunction("damped-sine", _damped_sine_jet, growth=0, sup=_DS_SUP, in_w2=True, in_w2_0=True,
                     dtilde_bounded=_ALL_BOUNDED, description="e^-t sin 2t",
                     meta={"argmax": _DS_ARGMAX}),
        # kinks at 0, 1, 2: continuous, not in W^2
        TestFunction("hat", None, value_fn=_hat, growth=0, sup=1.0, description="max(0, 1 - |t - 1|)",
                     meta={"breakpoints": (1.0, 2.0)}),
    ]
}


def get_function(name: str) -> TestFunction:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; known: {sorted(REGISTRY)}") from None


def smooth_functions(bounded_only: bool = False) -> list[TestFunction]:
    return [f for f in REGISTRY.values() if f.smooth and (f.growth == 0 or not bounded_only)]


# ---------------------------------------------------------------------------
# Dt powers


def dtilde_pow(f: TestFunction, r: int, x):
    """Dt^r f(x) by jet arithmetic (exact up to rounding)."""
    if r not in (0, 1, 2, 3):
        raise ValueError(f"r must be in 0..3, got {r}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("Dt is applied on x >= 0")
    j = f.jet(x_arr, 2 * r)
    for _ in range(r):
        j = j.dtilde(x_arr)
    out = j.value
    return float(out) if np.ndim(out) == 0 else out


def dtilde_function(f: TestFunction, r: int = 1) -> TestFunction:
    """Dt^r f as a TestFunction (jets of order up to MAX_ORDER - 2r)."""
    if r < 1 or 2 * r > MAX_ORDER:
        raise ValueError(f"r must be in 1..{MAX_ORDER // 2}")

    def jet_fn(x, order):
        if order + 2 * r > MAX_ORDER:
            raise DomainError(f"Dt^{r} {f.name} has jets only up to order {MAX_ORDER - 2 * r}")
        x = np.asarray(x, dtype=float)
        j = f.jet(x, order + 2 * r)
        for _ in range(r):
            j = j.dtilde(x)
        return j.c

    bounded = f.dtilde_bounded[r - 1] if r <= 3 else False
    rest = tuple(f.dtilde_bounded[r:]) + (False,) * r
    return TestFunction(
        f"dtilde{r}({f.name})",
        jet_fn,
        growth=f.growth,
        sup=None,
        in_w2=rest[0] and bounded,
        in_w2_0=rest[0] and bounded,
        dtilde_bounded=rest[:3],
        description=f"Dt^{r} of {f.description}",
    )


# ---------------------------------------------------------------------------
# sup norms


@dataclass
class SupNorm:
    value: float
    argmax: float
    resolution: float  # grid spacing before refinement
    window: tuple[float, float]
    error: float = 0.0  # largest error estimate reported by the evaluator


def _evaluate(g, x):
    if hasattr(g, "evaluate"):
        v, e = g.evaluate(x)
        return np.asarray(v, dtype=float), np.asarray(e, dtype=float)
    v = np.asarray(g(x), dtype=float)
    if v.shape != np.shape(x):
        v = np.broadcast_to(v, np.shape(x)).copy()
    return v, np.zeros_like(v)


def sup_norm(g, window: tuple[float, float] = (0.0, 8.0), grid_points: int = 801, refine: bool = True) -> SupNorm:
    """Grid sup of |g| over ``window`` plus a golden-section refinement.

    The refinement searches the two grid cells around the grid argmax and
    can only raise the estimate.
    """
    lo, hi = map(float, window)
    if grid_points < 2 or not hi > lo:
        raise ValueError("need grid_points >= 2 and a non-empty window")
    x = np.linspace(lo, hi, grid_points)
    v, e = _evaluate(g, x)
    a = np.abs(v)
    i = int(np.argmax(a))
    best, arg, err = float(a[i]), float(x[i]), float(np.max(e))
    h = (hi - lo) / (grid_points - 1)
    if refine:
        left, right = max(lo, x[i] - h), min(hi, x[i] + h)

        def neg(t):
            return -abs(float(np.asarray(_evaluate(g, np.array([t]))[0])[0]))

        res = minimize_scalar(neg, bounds=(left, right), method="bounded", options={"xatol": 1e-10 * max(1.0, hi)})
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    return SupNorm(best, arg, h, (lo, hi), err)


# ---------------------------------------------------------------------------
# lambda(n), theta(n)


@dataclass(frozen=True)
class SummationValue:
    value: float
    tail_bound: float


def _inverse_square_tail(m: int, direct: int = 64) -> tuple[float, float]:
    """sum_{k >= m} 1/k^2 and a bound on its error.

    Direct summation up to M = m + direct, then the Euler-Maclaurin tail
    1/M + 1/(2M^2) + 1/(6M^3) - 1/(30M^5) + 1/(42M^7), whose remainder is
    bounded by the next Bernoulli term 1/(30 M^9).
    """
    M = m + direct
    head = math.fsum(1.0 / (k * k) for k in range(m, M))
    tail = 1.0 / M + 1.0 / (2 * M**2) + 1.0 / (6 * M**3) - 1.0 / (30 * M**5) + 1.0 / (42 * M**7)
    return head + tail, 1.0 / (30.0 * M**9)


def lambda_theta(n: int) -> tuple[SummationValue, SummationValue]:
    """lambda(n) = 1/n - sum_{k>n} 1/k^2 and theta(n) = S(n) + S(n+1) - 2/n.

    Here S(m) = sum_{k>=m} 1/k^2.  These are the telescoped forms of
    sum_{k>=n} 1/(k(k+1)^2) and sum_{k>=n} 1/(k(k+1))^2.  The tail bound
    covers the Euler-Maclaurin remainder and the rounding of the final
    subtraction.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    s_n, e_n = _inverse_square_tail(n)
    s_n1, e_n1 = _inverse_square_tail(n + 1)
    eps = float(np.finfo(float).eps)
    lam = 1.0 / n - s_n1
    theta = s_n + s_n1 - 2.0 / n
    lam_err = e_n1 + 4 * eps * (1.0 / n)
    theta_err = e_n + e_n1 + 8 * eps * (2.0 / n)
    return SummationValue(lam, lam_err), SummationValue(theta, theta_err)


# ---------------------------------------------------------------------------
# central moments of B_n


def central_moment(n: int, j: int, x):
    """mu_{n,j}(x) = B_n((t - x)^j, x) for j = 0..4 (closed forms)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    x = np.asarray(x, dtype=float)
    p = psi(x)
    if j == 0:
        out = np.ones_like(x)
    elif j == 1:
        out = np.zeros_like(x)
    elif j == 2:
        out = p / n
    elif j == 3:
        out = (1.0 + 2.0 * x) * p / n**2
    elif j == 4:
        out = 3.0 * (n + 2) * p * p / n**3 + p / n**3
    else:
        raise ValueError(f"moment order must be in 0..4, got {j}")
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# K-functional upper estimate


@dataclass
class KFunctionalValue:
    value: float
    best: str
    candidates: dict  # candidate label -> (distance, Dt^2 sup, total)
    window: tuple[float, float]
    error: float = 0.0


class _Difference:
    """x -> f(x) - g(x) carrying g's error channel."""

    def __init__(self, f, g):
        self.f, self.g = f, g

    def evaluate(self, x):
        v, e = _evaluate(self.g, x)
        return np.asarray(self.f(x), dtype=float) - v, e


def k_functional_upper(f, t: float, candidate_params=(), window=(0.0, 8.0), grid_points: int = 801,
                       include_f: bool = True, trunc=None, quad=None) -> KFunctionalValue:
    """Upper estimate of K(f, t) = inf ||f - g|| + t ||Dt^2 g||.

    Candidates: g = f itself when f is smooth with bounded Dt^2 f (distance
    0, Dt^2 f by jets), and g = V~_m^3 f for each m in ``candidate_params``
    (Dt^2 g from the nested analytic images).  Norms are grid sups over
    ``window``, so this bounds the windowed K-functional.
    """
    from .operators import dtilde_squared_image, modified_power

    if not t > 0:
        raise ValueError("t must be positive")
    cands = {}
    err = 0.0
    if include_f and isinstance(f, TestFunction) and f.smooth and f.dtilde_bounded[1]:
        d2 = sup_norm(lambda x: dtilde_pow(f, 2, x), window, grid_points)
        cands["f"] = (0.0, d2.value, t * d2.value)
    for m in candidate_params:
        g = modified_power(f, int(m), 3, trunc, quad)
        dist = sup_norm(_Difference(f, g), window, grid_points)
        d2 = sup_norm(dtilde_squared_image(f, int(m), trunc, quad), window, grid_points)
        cands[f"V~_{m}^3 f"] = (dist.value, d2.value, dist.value + t * d2.value)
        err = max(err, dist.error + t * d2.error)
    if not cands:
        raise ValueError("no admissible candidate for the K-functional estimate")
    best = min(cands, key=lambda k: cands[k][2])
    return KFunctionalValue(cands[best][2], best, cands, tuple(window), err)
