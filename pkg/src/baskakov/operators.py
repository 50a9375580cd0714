"""Pointwise evaluation of the Baskakov-type operators.

    B_n f  = sum_k f(k/n)    P_{n,k}        (Baskakov)
    V_n f  = sum_k v_{n,k}(f) P_{n,k}       (Goodman-Sharma / Durrmeyer type)
    V~_n f = sum_k v_{n,k}(f) P~_{n,k}      (modified, P~ = P - Dt P / n)
    Dt V~_n f = sum_k v_{n,k}(f) Dt P~_{n,k}

Series are truncated per x.  The basis is the negative-binomial mass
NB(n, 1/(1+x)), concentrated at k ~ nx with spread sqrt(n psi(x)), so the
first cut is K = ceil(nx + 8 sqrt(n psi) + 20).  K grows by half while the
geometric tail bound built from the last terms exceeds tol times the
running absolute sum; for small n the mass has a gamma-like tail and the
extension matters.

Every evaluation carries an error estimate: truncation tail bound plus
the quadrature disagreement of the coefficients plus any error inherited
from a nested source.

Nesting.  An image used as the source of another operator must be
integrated against Beta-prime weights with polynomial tails ~ t^-(m+2),
which for small m reach t ~ 1e5.  Summing the inner series out there is
hopeless, so an inner image is replaced by a Chebyshev interpolant
(ChebyshevProxy) of G(s) = s^d g(1/s - 1), s = 1/(1+t), d the growth
order, built on s in [s_c, 1] and extrapolated by a low-degree polynomial below s_c.
The cut s_c is chosen per consumer so that only a negligible fraction of
its weight mass falls in the extrapolated region.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.fft import dct
from scipy.special import betainc, betaincinv, betaln

from .basis import basis_row, dtilde_modified_row, modified_row, psi
from .coefficients import DEFAULT_CACHE, CoefficientCache, QuadratureConfig, coefficient_table
from .errors import DomainError, TruncationError

__all__ = [
    "TruncationConfig",
    "OperatorImage",
    "ChebyshevProxy",
    "KINDS",
    "baskakov_apply",
    "gs_apply",
    "modified_gs_apply",
    "dtilde_image",
    "iterate_modified",
    "dtilde_squared_of_triple",
]

KINDS = ("baskakov", "gs", "modified", "dtilde-modified")

# polynomial degree of |row_k| / P_{n,k} in k, used to damp the tail ratio
_ROW_DEGREE = {"baskakov": 0, "gs": 0, "modified": 2, "dtilde-modified": 4}

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TruncationConfig:
    tol: float = 1e-14
    safety_cap: int = 4_000_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("truncation tol must be positive")
        if self.safety_cap < 1:
            raise ValueError("safety_cap must be a positive integer")

    def first_cut(self, n: int, x: float) -> int:
        return math.ceil(n * x + 8.0 * math.sqrt(n * psi(x)) + 20.0)

    def check(self, n: int, x: float) -> None:
        need = math.ceil(n * x) + 10.0 * math.sqrt(n * psi(x)) + 50.0
        if self.safety_cap < need:
            raise ValueError(f"safety_cap {self.safety_cap} below {need:.0f} required at n={n}, x={x}")


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _tail_estimate(terms: np.ndarray, n: int, x: float, degree: int) -> float:
    """Bound on sum_{k>K} |term_k| from the last few terms.

    Beyond the mode P_{n,k+1}/P_{n,k} = (n+k)/(k+1) * x/(1+x) decreases to
    x/(1+x); polynomial prefactors of degree ``degree`` inflate it by at
    most ((K+1)/K)^degree.
    """
    K = len(terms) - 1
    if x == 0.0:
        return 0.0
    r = (n + K) / (K + 1.0) * x / (1.0 + x) * ((K + 1.0) / K) ** degree
    last = float(np.max(np.abs(terms[-8:])))
    if last == 0.0:
        return 0.0
    if r >= 1.0:
        return math.inf
    return last * r / (1.0 - r)


def _infer_growth(f) -> int:
    """Polynomial growth order of a plain callable, read off far-field samples.

    Only the nesting proxy needs it (it divides out t^d); an overestimate
    costs a little accuracy, an underestimate would be wrong.
    """
    t = np.array([1e4, 1e5])
    with np.errstate(all="ignore"):
        v = np.abs(np.asarray(f(t), dtype=float))
    if not np.all(np.isfinite(v)) or v[0] == 0.0 or v[1] <= v[0]:
        return 0
    return max(0, math.ceil(math.log10(v[1] / v[0]) - 0.05))


def _consumer_cut(m: int, x_max: float, mass: float = 1e-16) -> float:
    """t beyond which a degree-m consumer on [0, x_max] puts < ``mass`` weight."""
    k = math.ceil(m * x_max + 8.0 * math.sqrt(m * psi(x_max)) + 20.0)
    u = 1.0 - betaincinv(m + 1.0, float(k), mass)  # upper quantile of Beta(k, m+1)
    if u >= 1.0:
        return math.inf
    return u / (1.0 - u)


class ChebyshevProxy:
    """Smooth stand-in for an evaluable function g on [0, inf).

    G(s) = s^d g(1/s - 1) is interpolated at Chebyshev-Lobatto points of
    [s_c, 1] with s_c = 1/(1 + t_cut); the degree doubles (64 -> 2048,
    reusing the previous points) until the trailing coefficients fall
    below ``tol`` times the largest, or below the error of the sampled
    values themselves.  For s < s_c a polynomial through G(j s_c),
    j = 1..d+1, of degree d <= 3 is used, d chosen where successive degrees
    agree best at s = 0; that disagreement is the extrapolation error.
    """

    def __init__(self, g, growth: int = 0, t_cut: float = 1000.0, tol: float = 1e-14,
                 min_degree: int = 64, max_degree: int = 2048):
        self.g = g
        self.growth = int(growth)
        self.t_cut = float(t_cut)
        self.s_c = 1.0 / (1.0 + self.t_cut)
        gkey = getattr(g, "key", None)
        self.key = None if gkey is None else ("proxy", gkey, round(self.t_cut, 6))
        self._build(tol, min_degree, max_degree)

    def _values(self, s: np.ndarray) -> tuple[np.ndarray, float]:
        t = 1.0 / s - 1.0
        t[s == 1.0] = 0.0
        if hasattr(self.g, "evaluate"):
            v, e = self.g.evaluate(t)
            err = float(np.max(np.asarray(e) * s ** self.growth))
        else:
            v, err = self.g(t), 0.0
        return np.asarray(v, dtype=float) * s ** self.growth, err

    def _build(self, tol, nmin, nmax):
        N = nmin
        y = np.cos(np.pi * np.arange(N + 1) / N)
        vals, err = self._values(self._s_of(y))
        while True:
            c = dct(vals, type=1) / N
            c[0] /= 2.0
            c[-1] /= 2.0
            big = float(np.max(np.abs(c)))
            tail = float(np.max(np.abs(c[-8:])))
            # trailing coefficients at the level of the sampled values' own
            # error are noise, not unresolved structure
            floor = max(tol * big, 4.0 * err)
            if tail <= floor or N >= nmax:
                break
            N *= 2
            y = np.cos(np.pi * np.arange(N + 1) / N)
            fresh, e2 = self._values(self._s_of(y[1::2]))
            merged = np.empty(N + 1)
            merged[0::2] = vals
            merged[1::2] = fresh
            vals, err = merged, max(err, e2)
        # drop the negligible tail for cheaper evaluation
        keep = np.nonzero(np.abs(c) > max(1e-3 * tol * big, 0.01 * err, 1e-300))[0]
        self.coef = c[: (keep[-1] + 1 if len(keep) else 1)]
        self.magnitude = float(np.max(np.abs(vals)))
        self.degree = N
        self.interp_error = float(np.sum(np.abs(c[len(self.coef):]))) + 2.0 * tail
        self.eval_error = err
        sc = self.s_c
        g = self._G_inside(sc * np.arange(1.0, 5.0))
        # extrapolants of degree 0..3 through (j sc, g_j), j = 1..d+1, in
        # u = s/sc; keep the degree whose value at s = 0 agrees best with
        # the next one up (decaying images behave like high powers of s and
        # the cubic is then the worst choice, polynomial images the best)
        fits = [np.polyfit(np.arange(1.0, d + 2.0), g[: d + 1], d) for d in range(4)]
        at0 = [np.polyval(c, 0.0) for c in fits]
        gaps = [abs(at0[d + 1] - at0[d]) for d in range(3)]
        d = int(np.argmin(gaps))
        self._extrap = fits[d + 1] if gaps[d] == 0.0 else fits[d]
        self.extrap_error = gaps[d]
        self.error = self.interp_error + self.eval_error + self.extrap_error

    def _s_of(self, y):
        return self.s_c + (1.0 - self.s_c) * (y + 1.0) / 2.0

    def _G_inside(self, s):
        y = 2.0 * (s - self.s_c) / (1.0 - self.s_c) - 1.0
        return cheb.chebval(y, self.coef)

    def G(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        inside = s >= self.s_c
        out[inside] = self._G_inside(s[inside])
        out[~inside] = np.polyval(self._extrap, s[~inside] / self.s_c)
        return out

    def __call__(self, t):
        t, scalar = _as_array(t)
        s = 1.0 / (1.0 + t)
        out = self.G(s) / s ** self.growth
        return float(out) if scalar else out

    def coefficient_error(self, n: int, ks: np.ndarray) -> np.ndarray:
        """Bound on |v_{n,k}(g) - v_{n,k}(proxy)|.

        The interpolation/evaluation error is carried with weight
        E[(1+t)^d]; the extrapolation error only with the part of that
        weight beyond t_cut.  With u ~ Beta(k, n+1) and 1+t = 1/(1-u),
        E[(1+t)^d; t > t_cut] = B(k, n+1-d)/B(k, n+1) * P(Beta(k, n+1-d) > u_c).
        """
        ks = np.asarray(ks, dtype=float)
        d = self.growth
        b = n + 1.0 - d
        moment = np.exp(betaln(ks, b) - betaln(ks, n + 1.0)) if d else np.ones_like(ks)
        beyond = betainc(b, ks, self.s_c)  # P(1 - u < s_c) for u ~ Beta(k, b)
        return (self.interp_error + self.eval_error) * moment + self.extrap_error * moment * beyond

    @property
    def noise(self) -> float:
        """Quadrature agreement below this level is meaningless for this source."""
        return self.error


class OperatorImage:
    """The function x -> (Op_n f)(x) for one of the four operator kinds.

    Coefficients are computed lazily and extended as larger x demand more
    terms.  Images are themselves valid sources (they carry ``growth`` and,
    when the source has one, ``key``); as a quadrature source they are
    replaced by a ChebyshevProxy tuned to the consuming operator.
    """

    def __init__(self, kind: str, n: int, source, trunc: TruncationConfig | None = None,
                 quad: QuadratureConfig | None = None, cache: CoefficientCache | None = DEFAULT_CACHE,
                 x_max: float = 10.0):
        if kind not in KINDS:
            raise ValueError(f"unknown operator kind {kind!r}")
        if kind == "baskakov" and n < 1:
            raise DomainError(f"Baskakov operator needs n >= 1, got {n}")
        if kind != "baskakov" and n < 2:
            raise DomainError(f"Goodman-Sharma type operators need n >= 2, got {n}")
        self.kind = kind
        self.n = int(n)
        self.source = source
        self.trunc = trunc or TruncationConfig()
        self.quad = quad or QuadratureConfig()
        self.x_max = float(x_max)
        g = getattr(source, "growth", None)
        self.growth = int(g) if g is not None else _infer_growth(source)
        skey = getattr(source, "key", None)
        self.key = None if skey is None else (kind, self.n, skey, self.trunc, self.quad)
        self._cache = cache if skey is not None else CoefficientCache()
        self._qsource = None
        self._coef = np.zeros(0)
        self._cerr = np.zeros(0)
        self._lock = threading.Lock()
        self._proxies: dict = {}

    def __repr__(self):
        return f"OperatorImage({self.kind!r}, n={self.n}, source={getattr(self.source, 'key', self.source)!r})"

    # -- coefficients -----------------------------------------------------

    def _quadrature_source(self):
        if self._qsource is None:
            src = self.source
            if isinstance(src, OperatorImage):
                src = src.proxy_for(self.n, self.x_max)
            self._qsource = src
        return self._qsource

    def coefficients(self, kmax: int) -> tuple[np.ndarray, np.ndarray]:
        """(c_k, error_k) for k = 0..kmax; c_k = f(k/n) or v_{n,k}(f)."""
        if len(self._coef) <= kmax:
            with self._lock:
                if len(self._coef) <= kmax:
                    self._extend(kmax)
        return self._coef[: kmax + 1], self._cerr[: kmax + 1]

    def _extend(self, kmax: int) -> None:
        kmax = max(kmax, 2 * len(self._coef) - 1)
        if self.kind == "baskakov":
            k = np.arange(kmax + 1, dtype=float)
            vals = np.asarray(self.source(k / self.n), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise DomainError("source is not finite on the lattice k/n")
            self._coef, self._cerr = vals, np.zeros(kmax + 1)
            return
        src = self._quadrature_source()
        skey = getattr(src, "key", None)
        if skey is None:
            skey = ("anon", id(self))
        table = coefficient_table(src, self.n, kmax, self.quad, self._cache, source_key=skey)
        errs = table.errors.copy()
        if isinstance(src, ChebyshevProxy):
            errs[1:] += src.coefficient_error(self.n, np.arange(1, kmax + 1))
        self._coef, self._cerr = table.values, errs

    # -- evaluation -------------------------------------------------------

    def _row(self, x: float, kmax: int) -> np.ndarray:
        if self.kind in ("baskakov", "gs"):
            return basis_row(self.n, x, kmax)
        if self.kind == "modified":
            return modified_row(self.n, x, kmax)
        return dtilde_modified_row(self.n, x, kmax)

    def _evaluate_one(self, x: float) -> tuple[float, float]:
        if not (x >= 0.0 and math.isfinite(x)):
            raise DomainError(f"operators are evaluated on x >= 0, got {x}")
        n = self.n
        self.trunc.check(n, x)
        K = self.trunc.first_cut(n, x)
        degree = _ROW_DEGREE[self.kind] + self.growth
        while True:
            if K > self.trunc.safety_cap:
                raise TruncationError(f"{self.kind} series at n={n}, x={x} needs more than {self.trunc.safety_cap} terms")
            c, ce = self.coefficients(K)
            w = self._row(x, K)
            terms = c * w
            scale = float(np.sum(np.abs(terms)))
            tail = _tail_estimate(terms, n, x, degree)
            if tail <= self.trunc.tol * max(scale, 1e-300):
                break
            K = math.ceil(1.5 * K)
        value = float(np.sum(terms))
        err = tail + float(np.sum(np.abs(w) * ce)) + 8.0 * _EPS * K ** 0.5 * scale
        return value, err

    def evaluate(self, x):
        """(values, error estimates) at x (scalar or array)."""
        arr, scalar = _as_array(x)
        flat = arr.ravel()
        vals = np.empty(flat.shape)
        errs = np.empty(flat.shape)
        for i, xi in enumerate(flat):
            vals[i], errs[i] = self._evaluate_one(float(xi))
        if scalar:
            return float(vals[0]), float(errs[0])
        return vals.reshape(arr.shape), errs.reshape(arr.shape)

    def __call__(self, x):
        return self.evaluate(x)[0]

    # -- nesting ----------------------------------------------------------

    def proxy_for(self, m: int, x_max: float) -> ChebyshevProxy:
        """Chebyshev stand-in adequate for a degree-m consumer on [0, x_max]."""
        t_cut = min(1000.0, max(50.0, _consumer_cut(m, x_max)))
        key = round(t_cut, 6)
        with self._lock:
            hit = self._proxies.get(key)
        if hit is None:
            hit = ChebyshevProxy(self, self.growth, t_cut)
            with self._lock:
                hit = self._proxies.setdefault(key, hit)
        return hit


def _image(kind, f, n, trunc, quad, cache=DEFAULT_CACHE):
    return OperatorImage(kind, n, f, trunc, quad, cache)


def _finish(image: OperatorImage, x, with_error: bool):
    vals, errs = image.evaluate(x)
    return (vals, errs) if with_error else vals


def baskakov_apply(f, n: int, x, trunc: TruncationConfig | None = None, with_error: bool = False):
    """B_n(f, x) = sum_k f(k/n) P_{n,k}(x)."""
    return _finish(_image("baskakov", f, n, trunc, None), x, with_error)


def gs_apply(f, n: int, x, trunc=None, quad=None, with_error: bool = False):
    """V_n(f, x) = sum_k v_{n,k}(f) P_{n,k}(x)."""
    return _finish(_image("gs", f, n, trunc, quad), x, with_error)


def modified_gs_apply(f, n: int, x, trunc=None, quad=None, with_error: bool = False):
    """V~_n(f, x) = sum_k v_{n,k}(f) P~_{n,k}(x); reproduces linear functions."""
    return _finish(_image("modified", f, n, trunc, quad), x, with_error)


def dtilde_image(f, n: int, x, trunc=None, quad=None, with_error: bool = False):
    """Dt V~_n(f, x) = psi(x) (V~_n f)''(x), from the analytic Dt P~_{n,k}."""
    return _finish(_image("dtilde-modified", f, n, trunc, quad), x, with_error)


def modified_power(f, n: int, r: int, trunc=None, quad=None, cache=DEFAULT_CACHE) -> OperatorImage:
    """The image V~_n^r f as an evaluable object (r in 1..3)."""
    if r not in (1, 2, 3):
        raise ValueError(f"iterate order must be 1, 2 or 3, got {r}")
    g = f
    for _ in range(r):
        g = OperatorImage("modified", n, g, trunc, quad, cache)
    return g


def iterate_modified(f, n: int, r: int, x, trunc=None, quad=None, with_error: bool = False):
    """V~_n^r(f, x) by nesting images."""
    return _finish(modified_power(f, n, r, trunc, quad), x, with_error)


def dtilde_squared_image(f, n: int, trunc=None, quad=None, cache=DEFAULT_CACHE) -> OperatorImage:
    """Dt^2 V~_n^3 f, built as Dt V~_n (Dt V~_n (V~_n f)).

    Dt commutes with V~_n on smooth images, so Dt^2 V~_n^3 = (Dt V~_n)(Dt V~_n) V~_n
    and only analytic basis derivatives are ever used.
    """
    inner = OperatorImage("modified", n, f, trunc, quad, cache)
    middle = OperatorImage("dtilde-modified", n, inner, trunc, quad, cache)
    return OperatorImage("dtilde-modified", n, middle, trunc, quad, cache)


def dtilde_squared_of_triple(f, n: int, x, trunc=None, quad=None, with_error: bool = False):
    """Dt^2 (V~_n^3 f)(x)."""
    return _finish(dtilde_squared_image(f, n, trunc, quad), x, with_error)
