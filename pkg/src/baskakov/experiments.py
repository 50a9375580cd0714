"""Numerical experiments: convergence rates and inequality checks.

Every check returns an InequalityReport whose verdict is ``pass`` iff
left <= right + slack, where the slack is assembled from the numeric error
channels of the quantities involved:

    slack = max(1e-7 * scale, 10 * reported error)

Norms are grid sups over a window [0, X_max] (default [0, 8] with 801
points) followed by a local refinement, so every check is a statement
about the windowed norm.

The K-functional side of the converse check uses an *upper* estimate of
K(f, t); a pass there supports the converse inequality but does not prove
it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import basis_row, dtilde_modified_row, dtilde_row, psi
from .calculus import (
    TestFunction,
    _Difference,
    dtilde_function,
    dtilde_pow,
    k_functional_upper,
    lambda_theta,
    sup_norm,
)
from .errors import DomainError, TruncationError
from .operators import OperatorImage, TruncationConfig, _tail_estimate

__all__ = [
    "C_TILDE",
    "L_CONST",
    "C_CONST",
    "ConvergenceRow",
    "ConvergenceReport",
    "InequalityReport",
    "fit_slope",
    "convergence_study",
    "jackson_check",
    "norm_check",
    "voronovskaya_check",
    "bernstein_check",
    "bernstein_basis_sum",
    "bernstein_decomposition",
    "decomposition_checks",
    "converse_check",
    "min_ell",
    "telescoping_check",
    "COMMUTATIONS",
    "commutation_check",
    "run_cases",
]

C_TILDE = 6.0 + 4.0 * math.sqrt(3.0)
L_CONST = 16.0 * C_TILDE / 9.0
C_CONST = 7.0 + C_TILDE**2

DEFAULT_WINDOW = (0.0, 8.0)
DEFAULT_POINTS = 801
REL_SLACK = 1e-7
ERR_FACTOR = 10.0


# ---------------------------------------------------------------------------
# report types


@dataclass
class ConvergenceRow:
    n: int
    error: float  # windowed sup |Op_n f - f|
    bound: float | None  # a priori bound when the smoothness flags allow one
    error_estimate: float  # numeric error channel of ``error``


@dataclass
class ConvergenceReport:
    function: str
    operator: str
    rows: list[ConvergenceRow]
    slope: float
    window: dict

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class InequalityReport:
    check: str
    function: str
    n: int
    left: float
    right: float
    slack: float
    verdict: str  # "pass", "fail" or "skip"
    ell: int | None = None
    asserted: bool = True  # False: report-only (outside the proven range)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True unless an asserted check failed."""
        return self.verdict != "fail" or not self.asserted

    def to_dict(self) -> dict:
        return asdict(self)


def _slack(scale: float, err: float) -> float:
    return max(REL_SLACK * abs(scale), ERR_FACTOR * err)


def _report(check, f, n, left, right, err, scale=None, ell=None, asserted=True, **extra) -> InequalityReport:
    if scale is None:
        scale = max(abs(left), abs(right))
    slack = _slack(scale, err)
    verdict = "pass" if left <= right + slack else "fail"
    return InequalityReport(check, _name(f), int(n), float(left), float(right), float(slack), verdict,
                            ell, asserted, {"error": float(err), **extra})


def _skip(check, f, n, reason, ell=None) -> InequalityReport:
    return InequalityReport(check, _name(f), int(n), math.nan, math.nan, math.nan, "skip", ell, True,
                            {"reason": reason})


def _name(f) -> str:
    return getattr(f, "name", None) or getattr(f, "__name__", None) or repr(f)


def _window_dict(window, grid_points) -> dict:
    return {"x_min": float(window[0]), "x_max": float(window[1]), "grid_points": int(grid_points)}


def fit_slope(ns, errors) -> float:
    """Least-squares slope of log(error) against log(n)."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(ns) < 2 or np.any(errors <= 0):
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(errors), 1)[0])


def _image(kind, f, n, trunc=None, quad=None):
    return OperatorImage(kind, n, f, trunc, quad)


def _dtilde_sup(f, r, window, grid_points):
    return sup_norm(lambda x: dtilde_pow(f, r, x), window, grid_points)


class _Combination:
    """x -> sum_i c_i g_i(x) for evaluable g_i, with summed error channels."""

    def __init__(self, *terms):
        self.terms = terms

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        val = np.zeros_like(x)
        err = np.zeros_like(x)
        for c, g in self.terms:
            if hasattr(g, "evaluate"):
                v, e = g.evaluate(x)
            else:
                v, e = np.asarray(g(x), dtype=float), 0.0
            val = val + c * np.asarray(v, dtype=float)
            err = err + abs(c) * np.asarray(e, dtype=float)
        return val, err

    def __call__(self, x):
        return self.evaluate(x)[0]


def _split_source(f: TestFunction, n: int) -> TestFunction:
    """f - Dt f / n as a TestFunction (jets one Dt order shorter)."""

    def jet_fn(x, order):
        x = np.asarray(x, dtype=float)
        j = f.jet(x, order + 2)
        d = j.dtilde(x)
        return j.c[: order + 1] - d.c / n

    return TestFunction(f"{f.name}-dt/{n}", jet_fn, growth=f.growth, sup=None,
                        description=f"{f.description} - Dt/{n}")


# ---------------------------------------------------------------------------
# convergence


def convergence_study(f, kind: str, n_list, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
                      trunc=None, quad=None) -> ConvergenceReport:
    """Windowed sup error of Op_n f - f for each n, and the fitted log-log slope.

    ``kind`` is "gs" (V_n), "modified" (V~_n) or "baskakov" (B_n).  The
    bound column holds ||Dt f||/n for V_n and ||Dt^2 f||/n^2 for V~_n
    when the registry flags make these finite.
    """
    n_list = sorted({int(n) for n in n_list})
    if len(n_list) < 4 or n_list[0] < 4 or n_list[-1] > 128:
        raise ValueError("n_list must hold at least 4 values in [4, 128]")
    if kind not in ("gs", "modified", "baskakov"):
        raise ValueError(f"convergence study needs kind gs, modified or baskakov, got {kind!r}")
    d1 = d2 = None
    if isinstance(f, TestFunction) and f.smooth:
        if f.in_w2 and f.dtilde_bounded[0]:
            d1 = _dtilde_sup(f, 1, window, grid_points).value
        if f.in_w2_0 and f.dtilde_bounded[1]:
            d2 = _dtilde_sup(f, 2, window, grid_points).value
    rows = []
    for n in n_list:
        s = sup_norm(_Difference(f, _image(kind, f, n, trunc, quad)), window, grid_points)
        bound = None
        if kind == "gs" and d1 is not None:
            bound = d1 / n
        elif kind == "modified" and d2 is not None:
            bound = d2 / n**2
        rows.append(ConvergenceRow(n, s.value, bound, s.error))
    slope = fit_slope([r.n for r in rows], [r.error for r in rows])
    return ConvergenceReport(_name(f), kind, rows, slope, _window_dict(window, grid_points))


# ---------------------------------------------------------------------------
# direct inequalities


def jackson_check(f, n: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS, strict: bool = True,
                  trunc=None, quad=None) -> InequalityReport:
    """sup |V~_n f - f| <= sup |Dt^2 f| / n^2.

    With ``strict`` the check is skipped unless f is flagged W^2_0 with
    bounded Dt^2 f; ``strict=False`` runs the windowed version for any
    smooth f (e.g. t^2, whose Dt^2 is unbounded on the half-line).
    """
    if not (isinstance(f, TestFunction) and f.smooth):
        return _skip("jackson", f, n, "not smooth")
    if strict and not (f.in_w2_0 and f.dtilde_bounded[1]):
        return _skip("jackson", f, n, "needs W2_0 with bounded Dt^2 f")
    left = sup_norm(_Difference(f, _image("modified", f, n, trunc, quad)), window, grid_points)
    d2 = _dtilde_sup(f, 2, window, grid_points)
    right = d2.value / n**2
    ratio = left.value / right if right > 0 else math.nan
    return _report("jackson", f, n, left.value, right, left.error, ratio=ratio)


def norm_check(f, n: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
               trunc=None, quad=None) -> InequalityReport:
    """sup |V~_n f| <= 2 ||f||; also reports the ratio against sqrt(3 + 2/n).

    ||f|| is the declared sup when there is one, else the windowed sup.
    Unbounded sources are skipped.
    """
    if getattr(f, "growth", 0):
        return _skip("norm", f, n, "unbounded source")
    left = sup_norm(_image("modified", f, n, trunc, quad), window, grid_points)
    fsup = getattr(f, "sup", None)
    if fsup is None:
        fsup = sup_norm(f, window, grid_points).value
    ratio = left.value / fsup if fsup > 0 else math.nan
    return _report("norm", f, n, left.value, 2.0 * fsup, left.error,
                   ratio=ratio, sharp_ratio=math.sqrt(3.0 + 2.0 / n))


def voronovskaya_check(f, n: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
                       trunc=None, quad=None) -> InequalityReport:
    """sup |V~_n f - f + lambda(n) Dt^2 f| <= theta(n) sup |Dt^3 f|."""
    if not (isinstance(f, TestFunction) and f.smooth):
        return _skip("voronovskaya", f, n, "not smooth")
    if not (f.in_w2_0 and f.dtilde_bounded[2]):
        return _skip("voronovskaya", f, n, "needs bounded Dt^3 f")
    lam, theta = lambda_theta(n)
    img = _image("modified", f, n, trunc, quad)

    def resid(x):
        v, e = img.evaluate(x)
        d2 = dtilde_pow(f, 2, x)
        return v - f(x) + lam.value * d2, e + lam.tail_bound * np.abs(d2)

    class _R:
        evaluate = staticmethod(resid)

    left = sup_norm(_R(), window, grid_points)
    d3 = _dtilde_sup(f, 3, window, grid_points)
    right = theta.value * d3.value
    err = left.error + theta.tail_bound * d3.value
    return _report("voronovskaya", f, n, left.value, right, err, scale=max(left.value, right, 1e-300),
                   **{"lambda": lam.value, "theta": theta.value})


# ---------------------------------------------------------------------------
# Bernstein-type inequality


def bernstein_check(f, n: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
                    trunc=None, quad=None) -> InequalityReport:
    """sup |Dt V~_n f| <= C~ n ||f||; asserted for n >= 17, reported below."""
    if getattr(f, "growth", 0):
        return _skip("bernstein", f, n, "unbounded source")
    left = sup_norm(_image("dtilde-modified", f, n, trunc, quad), window, grid_points)
    fsup = getattr(f, "sup", None)
    if fsup is None:
        fsup = sup_norm(f, window, grid_points).value
    right = C_TILDE * n * fsup
    return _report("bernstein", f, n, left.value, right, left.error, asserted=n >= 17,
                   ratio=left.value / (n * fsup) if fsup > 0 else math.nan)


def _truncated_row_sum(n: int, x: float, row_fn, degree: int, tol: float = 1e-14,
                       cap: int = 4_000_000) -> tuple[float, float]:
    """sum_k |row_k| with the geometric tail estimate used by the operators."""
    trunc = TruncationConfig()
    K = trunc.first_cut(n, x)
    while True:
        if K > cap:
            raise TruncationError(f"row sum at n={n}, x={x} needs more than {cap} terms")
        terms = np.abs(row_fn(K))
        total = float(np.sum(terms))
        tail = _tail_estimate(terms, n, x, degree)
        if tail <= tol * max(total, 1e-300):
            return total, tail
        K = math.ceil(1.5 * K)


def bernstein_basis_sum(n: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS) -> InequalityReport:
    """max over the grid of sum_k |Dt P~_{n,k}(x)| <= C~ n."""
    xs = np.linspace(window[0], window[1], grid_points)
    vals = np.empty_like(xs)
    errs = np.empty_like(xs)
    for i, x in enumerate(xs):
        vals[i], errs[i] = _truncated_row_sum(n, float(x), lambda K, x=x: dtilde_modified_row(n, float(x), K), 4)
    i = int(np.argmax(vals))
    left = float(vals[i])
    err = float(errs[i]) + 1e-13 * left
    return _report("bernstein-basis-sum", "basis", n, left, C_TILDE * n, err, asserted=n >= 17,
                   argmax=float(xs[i]), ratio=left / n)


def bernstein_decomposition(n: int, x: float) -> tuple[float, float, float]:
    """(a_n(x), b_n(x), c_n(x)) bounding sum_k |Dt P~_{n,k}(x)| from above.

        a_n = psi/n     sum |T''_{n,k}| P_{n,k}
        b_n = 2 sum |T_{n+1,k-1}| P_{n+1,k-1} + 2 sum |T_{n+1,k}| P_{n+1,k}
        c_n =           sum |(1 - T_{n,k}/n) T_{n,k}| P_{n,k}

    The two sums in b_n run over the same terms, so b_n = 4 sum |Dt P_{n+1,k}|.
    Poles at x = 0 are avoided: psi T'' P / n is expanded with
    k(k-1) P_{n,k} = n(n+1) x^2 P_{n+2,k-2}, and T P = Dt P comes from the
    pole-free basis row.
    """
    if n < 2:
        raise DomainError(f"decomposition needs n >= 2, got {n}")
    x = float(x)
    if not (x >= 0.0 and math.isfinite(x)):
        raise DomainError(f"x must be finite and >= 0, got {x}")

    def a_row(K):
        k = np.arange(K + 1, dtype=float)
        p = basis_row(n, x, K)
        lower = np.zeros(K + 1)
        if K >= 2:
            lower[2:] = basis_row(n + 2, x, K - 2)
        return (2.0 / n) * (n * (n + 1) * (1.0 + x) * lower - (n + k) * (n + k + 1) * x / (1.0 + x) ** 2 * p)

    def c_row(K):
        p = basis_row(n, x, K)
        tp = dtilde_row(n, x, K)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p > 0, tp / np.where(p > 0, p, 1.0), 0.0)
        return tp - t * tp / n

    a, _ = _truncated_row_sum(n + 2, x, a_row, 2)
    b, _ = _truncated_row_sum(n + 1, x, lambda K: 4.0 * dtilde_row(n + 1, x, K), 2)
    c, _ = _truncated_row_sum(n, x, c_row, 4)
    return a, b, c


def decomposition_checks(n: int, x: float) -> list[InequalityReport]:
    """The three bounds a_n <= 6n (asserted n >= 17), b_n, c_n <= 2 sqrt(3) n."""
    a, b, c = bernstein_decomposition(n, x)
    err = 1e-13
    return [
        _report("decomposition-a", "basis", n, a, 6.0 * n, err * a, asserted=n >= 17, x=float(x)),
        _report("decomposition-b", "basis", n, b, 2.0 * math.sqrt(3.0) * n, err * b, x=float(x)),
        _report("decomposition-c", "basis", n, c, 2.0 * math.sqrt(3.0) * n, err * c, x=float(x)),
    ]


# ---------------------------------------------------------------------------
# converse inequality


def min_ell(n: int) -> int:
    """Smallest admissible partner degree ceil(L n)."""
    return math.ceil(L_CONST * n)


def converse_check(f, n: int, ell: int | None = None, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
                   candidate_params=None, trunc=None, quad=None) -> InequalityReport:
    """K(f, 1/n^2) <= C (ell^2/n^2) (||V~_n f - f|| + ||V~_ell f - f||).

    The left side is an upper estimate of K, so a pass is supporting
    evidence only.  ``ell`` defaults to ceil(L n).
    """
    if ell is None:
        ell = min_ell(n)
    if ell < min_ell(n):
        raise DomainError(f"ell must be >= ceil(L n) = {min_ell(n)}, got {ell}")
    if candidate_params is None:
        candidate_params = (n, 2 * n, 4 * n)
    kf = k_functional_upper(f, 1.0 / n**2, candidate_params, window, grid_points, trunc=trunc, quad=quad)
    en = sup_norm(_Difference(f, _image("modified", f, n, trunc, quad)), window, grid_points)
    el = sup_norm(_Difference(f, _image("modified", f, ell, trunc, quad)), window, grid_points)
    factor = C_CONST * ell**2 / n**2
    right = factor * (en.value + el.value)
    err = kf.error + factor * (en.error + el.error)
    margin = right / kf.value if kf.value > 0 else math.inf
    return _report("converse", f, n, kf.value, right, err, ell=ell, best=kf.best, margin=margin,
                   error_n=en.value, error_ell=el.value, C=C_CONST, L=L_CONST)


# ---------------------------------------------------------------------------
# telescoping step and commutation relations


def telescoping_check(f, n: int, s: int, window=DEFAULT_WINDOW, grid_points: int = DEFAULT_POINTS,
                      trunc=None, quad=None) -> InequalityReport:
    """sup |V~_k f - V~_{k+1} f + V_k(Dt^2 f)/(k(k+1)^2)| ~ 0 for n <= k < s.

    The reported left side is the largest residual over k; right = 0.
    """
    if not (isinstance(f, TestFunction) and f.smooth):
        return _skip("telescope", f, n, "not smooth")
    if not n < s <= n + 8:
        raise ValueError(f"need n < s <= n + 8, got n={n}, s={s}")
    d2f = dtilde_function(f, 2)
    worst, err, scale = 0.0, 0.0, 0.0
    per_k = {}
    for k in range(n, s):
        a = _image("modified", f, k, trunc, quad)
        b = _image("modified", f, k + 1, trunc, quad)
        c = _image("gs", d2f, k, trunc, quad)
        w = 1.0 / (k * (k + 1) ** 2)
        r = sup_norm(_Combination((1.0, a), (-1.0, b), (w, c)), window, grid_points)
        sc = sup_norm(_Combination((w, c)), window, grid_points).value
        per_k[str(k)] = r.value
        worst = max(worst, r.value)
        err = max(err, r.error)
        scale = max(scale, sc)
    return _report("telescope", f, n, worst, 0.0, err, scale=scale, s=s, residuals=per_k)


COMMUTATIONS = ("split", "dtilde", "pair")


def commutation_check(f, n: int, relation: str, m: int | None = None, window=DEFAULT_WINDOW,
                      grid_points: int = DEFAULT_POINTS, trunc=None, quad=None) -> InequalityReport:
    """Residual of one commutation relation for f in W^2_0:

        split:  V~_n f = V_n(f - Dt f / n)
        dtilde: Dt V~_n f = V~_n Dt f
        pair:   V~_m V~_n f = V~_n V~_m f
    """
    if relation not in COMMUTATIONS:
        raise ValueError(f"relation must be one of {COMMUTATIONS}")
    check = f"commute-{relation}"
    if not (isinstance(f, TestFunction) and f.smooth and f.in_w2_0):
        return _skip(check, f, n, "needs smooth f in W2_0")
    if relation == "split":
        lhs = _image("modified", f, n, trunc, quad)
        rhs = _image("gs", _split_source(f, n), n, trunc, quad)
    elif relation == "dtilde":
        lhs = _image("dtilde-modified", f, n, trunc, quad)
        rhs = _image("modified", dtilde_function(f, 1), n, trunc, quad)
    else:
        if m is None:
            m = 2 * n
        lhs = OperatorImage("modified", m, _image("modified", f, n, trunc, quad), trunc, quad)
        rhs = OperatorImage("modified", n, _image("modified", f, m, trunc, quad), trunc, quad)
    r = sup_norm(_Combination((1.0, lhs), (-1.0, rhs)), window, grid_points)
    scale = sup_norm(lhs, window, grid_points).value
    extra = {"m": m} if relation == "pair" else {}
    return _report(check, f, n, r.value, 0.0, r.error, scale=scale, **extra)


# ---------------------------------------------------------------------------
# batch driver


def run_cases(fn, cases, workers: int = 1) -> list:
    """Apply ``fn(*case)`` to every case; results come back in case order."""
    cases = list(cases)
    if workers <= 1:
        return [fn(*c) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), cases))
