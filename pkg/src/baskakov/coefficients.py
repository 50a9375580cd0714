"""Goodman-Sharma coefficients v_{n,k}(f).

    v_{n,0}(f) = f(0),    v_{n,k}(f) = (n+1) * int_0^inf P_{n+2,k-1}(t) f(t) dt.

With u = t/(1+t) the integral becomes

    v_{n,k}(f) = (n+1) C(n+k, k-1) int_0^1 u^(k-1) (1-u)^n f(u/(1-u)) du,

and since (n+1) C(n+k, k-1) B(k, n+1) = 1 this is the mean of
f(u/(1-u)) for u ~ Beta(k, n+1).  The finite integral has a polynomial
weight, and a plain (weight 1) Gauss-Legendre rule applied to the whole
integrand converges quickly once it resolves the Beta peak.  For large k
the peak is narrow (width ~ sqrt(n)/k near u = 1), so each k integrates
only over a window [a_k, b_k] holding all but 1e-18 of the Beta mass; the
shared reference rule is mapped onto it and node counts are doubled
until two estimates agree.

Coefficients are computed in fixed blocks of k (powers of two up to 256,
then chunks of 256), each block settling on one node count.  Agreement
is relative to E|f| for the row, floored at 1% of the source magnitude
(``f.magnitude`` or a probe maximum): deep tails of decaying sources are
otherwise pure rounding noise and never "converge" relatively.  A source
that knows its own error (``f.noise``, e.g. a proxy for a nested image)
is not integrated more accurately than that.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaincinv, roots_legendre

from .errors import ConvergenceError, DomainError

__all__ = [
    "QuadratureConfig",
    "CoefficientCache",
    "gs_coefficient",
    "gs_coefficient_batch",
    "block_of",
    "coefficient_table",
    "CoefficientBatch",
    "DEFAULT_CACHE",
]

_EPS = np.finfo(float).eps
_SMALL_BLOCKS = 8  # blocks [1,2), [2,4), ..., [128,256)
_CHUNK = 256


@dataclass(frozen=True)
class QuadratureConfig:
    base_nodes: int = 16
    tol: float = 1e-13
    max_doublings: int = 6

    def __post_init__(self):
        if self.tol < 1e-14:
            raise ValueError("quadrature tol must be >= 1e-14")
        if self.base_nodes < 16:
            raise ValueError("base_nodes must be >= 16")
        if not 1 <= self.max_doublings <= 8:
            raise ValueError("max_doublings must be in [1, 8]")


# Beta mass left outside the integration window of each row
_WINDOW_MASS = 1e-18


@lru_cache(maxsize=64)
def _gauss_01(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes xi, 1 - xi and weights of the m-point Gauss-Legendre rule on [0, 1].

    The rule is symmetric, so 1 - xi is the reversed node array; taking it
    from there avoids cancellation near xi = 1.
    """
    x, w = roots_legendre(m)
    xi = 0.5 * (x + 1.0)
    xi = 0.5 * (xi + (1.0 - xi[::-1]))
    return xi, xi[::-1].copy(), 0.5 * w


def _windows(n: int, ks: np.ndarray, growth) -> tuple[np.ndarray, np.ndarray]:
    """Per-row windows [a, 1 - e] outside which the integrand is negligible.

    The left cut a is a tiny quantile of Beta(k, n+1).  On the right, a
    source of growth order g multiplies the weight by at most ~(u/(1-u))^g,
    which turns the tail into that of Beta(k+g, n+1-g).  Without declared
    growth the window runs to u = 1 (e = 0).  The right edge is returned as
    its distance e to 1 so that 1 - u stays accurate near u = 1.
    """
    a = betaincinv(ks, n + 1.0, _WINDOW_MASS)
    if growth is None:
        return a, np.zeros_like(ks)
    g = float(max(growth, 0))
    return a, betaincinv(n + 1.0 - g, ks + g, _WINDOW_MASS)


def _log_pair(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log p, log q) for p + q = 1, each taken from the smaller of the two."""
    lp = np.where(p < 0.5, np.log(p), np.log1p(-q))
    lq = np.where(q < 0.5, np.log(q), np.log1p(-p))
    return lp, lq


def block_of(k: int) -> int:
    """Index of the fixed k-block holding k >= 1."""
    if k < 256:
        return k.bit_length() - 1
    return _SMALL_BLOCKS + (k - 256) // _CHUNK


def _block_range(b: int) -> tuple[int, int]:
    # half-open [lo, hi)
    if b < _SMALL_BLOCKS:
        return 1 << b, 1 << (b + 1)
    lo = 256 + (b - _SMALL_BLOCKS) * _CHUNK
    return lo, lo + _CHUNK


def _log_normalizer(n: int, ks: np.ndarray) -> np.ndarray:
    """log((n+1) C(n+k, k-1)) = -log B(k, n+1).

    Computed from exact integers and checked against the product form
    B(k, n+1) = n! / (k (k+1) ... (k+n)): their product must be 1 to 1e-13
    (plus the rounding of the log-sum itself when it is large).
    """
    out = np.array([math.log((n + 1) * math.comb(n + int(k), n + 1)) for k in ks])
    log_beta = math.lgamma(n + 1.0) - np.log(ks[:, None] + np.arange(n + 1.0)[None, :]).sum(axis=1)
    if np.any(np.abs(out + log_beta) > 1e-13 + 8 * _EPS * np.abs(out)):
        raise AssertionError(f"Beta normalisation mismatch at n={n}")
    return out


def _growth_of(f) -> int | None:
    return getattr(f, "growth", None)


def _source_values(f, t: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(t), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError("source function is not finite at quadrature nodes")
    return vals


def _estimate(f, n: int, ks: np.ndarray, m: int, lognorm: np.ndarray, win):
    """Quadrature of E[f(u/(1-u))], u ~ Beta(k, n+1), with m nodes per row.

    Each row k integrates over its own window [a_k, b_k], onto which the
    shared reference rule is mapped.  The log-weight is centred at the Beta
    mean c = k/(k+n+1), so the large node-independent part is a single
    constant whose rounding is common to every node count.  Returns
    (estimates, E|f| scales).  A single-k call goes through exactly the
    same arithmetic as its row in a block.
    """
    xi, eta, w = _gauss_01(m)
    cbar = (n + 1.0) / (ks + n + 1.0)  # 1 - c
    log_c, log_cbar = _log_pair(1.0 - cbar, cbar)
    const = lognorm + (ks - 1.0) * log_c + n * log_cbar
    total = np.zeros(len(ks))
    absolute = np.zeros(len(ks))
    for (u_lo, _), (u_hi, v_hi) in _pieces(win, getattr(f, "breakpoints", ())):
        h = (u_hi - u_lo)[:, None]
        u = u_lo[:, None] + h * xi[None, :]
        v = v_hi[:, None] + h * eta[None, :]
        with np.errstate(divide="ignore"):
            log_u, log_v = _log_pair(u, v)
        logw = (ks[:, None] - 1.0) * (log_u - log_c[:, None]) + n * (log_v - log_cbar[:, None])
        weights = np.exp(logw) * (h * w[None, :])
        fv = _source_values(f, u / v)
        total += (weights * fv).sum(axis=1)
        absolute += (weights * np.abs(fv)).sum(axis=1)
    scale = np.exp(const)
    return scale * total, scale * absolute


def _pieces(win, breakpoints):
    """Consecutive (u, 1 - u) edge pairs splitting each window at the
    images u = b/(1+b) of the source's breakpoints (kinks)."""
    a, e = win
    edges = [(a, 1.0 - a)]
    for b in sorted(float(b) for b in breakpoints if b > 0):
        bu, bv = b / (1.0 + b), 1.0 / (1.0 + b)
        u = np.clip(bu, a, 1.0 - e)
        v = np.where(bu < a, 1.0 - a, np.where(bu > 1.0 - e, e, bv))
        edges.append((u, v))
    edges.append((1.0 - e, e))
    return list(zip(edges[:-1], edges[1:]))


_PROBE = 1.0 / np.linspace(0.02, 1.0, 50) - 1.0  # t in [0, 49], uniform in 1/(1+t)


def _magnitude(f) -> float:
    """Overall size of the source: ``f.magnitude`` or a max over a probe grid.

    Coefficients far below it are only needed to absolute accuracy; for a
    decaying f and large k the Beta expectation sits in the far tail where
    relative agreement is meaningless.
    """
    mag = getattr(f, "magnitude", None)
    if mag is None:
        mag = float(np.max(np.abs(_source_values(f, _PROBE))))
    return float(mag)


def _converged_rows(f, n: int, ks: np.ndarray, cfg: QuadratureConfig):
    lognorm = _log_normalizer(n, ks)
    win = _windows(n, ks, _growth_of(f))
    floor = 1e-2 * _magnitude(f)
    noise = float(getattr(f, "noise", 0.0) or 0.0)
    m = cfg.base_nodes
    prev, _ = _estimate(f, n, ks, m, lognorm, win)
    for _ in range(cfg.max_doublings):
        m *= 2
        cur, scale = _estimate(f, n, ks, m, lognorm, win)
        diff = np.abs(cur - prev)
        ok = diff <= np.maximum(cfg.tol * np.maximum(scale, max(floor, 1e-300)), noise)
        if np.all(ok):
            return cur, diff, m
        prev = cur
    bad = ks[~ok]
    raise ConvergenceError(
        f"v_{{{n},k}} quadrature did not converge for k = {bad[:5].astype(int).tolist()} "
        f"after {cfg.max_doublings} doublings (last m = {m})"
    )


def _check_growth(f, n: int) -> None:
    g = _growth_of(f)
    if g is not None and g >= n + 1:
        raise DomainError(f"growth order {g} too large for n = {n}: the integral diverges")


class CoefficientCache:
    """Coefficient blocks keyed by (source key, n, config, block).

    Readers never block; insertions are serialised by a lock.  Sources
    without a ``key`` attribute are never cached.
    """

    def __init__(self):
        self._data: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            self._data.setdefault(key, value)
            return self._data[key]

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


DEFAULT_CACHE = CoefficientCache()


def _block(f, n: int, b: int, cfg: QuadratureConfig, cache: CoefficientCache | None, skey=None):
    if skey is None:
        skey = getattr(f, "key", None)
    ckey = None if skey is None or cache is None else (skey, n, cfg, b)
    if ckey is not None:
        hit = cache.get(ckey)
        if hit is not None:
            return hit
    lo, hi = _block_range(b)
    ks = np.arange(lo, hi, dtype=float)
    vals, errs, m = _converged_rows(f, n, ks, cfg)
    result = (vals, errs, m)
    if ckey is not None:
        result = cache.put(ckey, result)
    return result


@dataclass
class CoefficientBatch:
    values: np.ndarray
    errors: np.ndarray
    nodes: np.ndarray  # final Gauss node count per entry (0 for k = 0)


def coefficient_table(
    f,
    n: int,
    kmax: int,
    cfg: QuadratureConfig | None = None,
    cache: CoefficientCache | None = DEFAULT_CACHE,
    source_key=None,
) -> CoefficientBatch:
    """v_{n,k}(f) for k = 0..kmax with per-entry error estimates.

    ``source_key`` overrides ``f.key`` for caching (useful with a private
    cache for anonymous sources).
    """
    cfg = cfg or QuadratureConfig()
    if n < 2:
        raise DomainError(f"Goodman-Sharma coefficients need n >= 2, got {n}")
    _check_growth(f, n)
    vals = np.empty(kmax + 1)
    errs = np.zeros(kmax + 1)
    nodes = np.zeros(kmax + 1, dtype=int)
    vals[0] = float(_source_values(f, np.array([0.0]))[0])
    if kmax >= 1:
        for b in range(block_of(kmax) + 1):
            lo, hi = _block_range(b)
            bv, be, m = _block(f, n, b, cfg, cache, source_key)
            stop = min(hi, kmax + 1)
            vals[lo:stop] = bv[: stop - lo]
            errs[lo:stop] = be[: stop - lo]
            nodes[lo:stop] = m
    return CoefficientBatch(vals, errs, nodes)


def gs_coefficient(f, n: int, k: int, cfg: QuadratureConfig | None = None, nodes: int | None = None) -> float:
    """v_{n,k}(f).

    k = 0 returns f(0) exactly.  Otherwise the Beta(k, n+1) expectation of
    f(u/(1-u)) is integrated, doubling the node count until two successive
    estimates agree to ``cfg.tol`` relative to E|f|.  Passing ``nodes``
    skips the doubling and uses exactly that many Gauss nodes.
    """
    cfg = cfg or QuadratureConfig()
    if n < 2:
        raise DomainError(f"Goodman-Sharma coefficients need n >= 2, got {n}")
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    _check_growth(f, n)
    if k == 0:
        return float(_source_values(f, np.array([0.0]))[0])
    ks = np.array([float(k)])
    if nodes is not None:
        win = _windows(n, ks, _growth_of(f))
        return float(_estimate(f, n, ks, nodes, _log_normalizer(n, ks), win)[0][0])
    vals, _, _ = _converged_rows(f, n, ks, cfg)
    return float(vals[0])


def gs_coefficient_batch(
    f, n: int, k_range, cfg: QuadratureConfig | None = None, cache: CoefficientCache | None = DEFAULT_CACHE
) -> list[float]:
    """v_{n,k}(f) for every k in ``k_range``.

    Nodes are shared within each fixed k-block.  A failure is re-raised
    naming the offending k.
    """
    ks = list(k_range)
    if not ks:
        return []
    if min(ks) < 0:
        raise DomainError("k must be >= 0")
    try:
        table = coefficient_table(f, n, max(ks), cfg, cache)
    except ConvergenceError as exc:
        raise ConvergenceError(f"batch n={n}, k in [{min(ks)}, {max(ks)}]: {exc}") from exc
    return [float(table.values[k]) for k in ks]


def final_nodes(f, n: int, k: int, cfg: QuadratureConfig | None = None,
                cache: CoefficientCache | None = DEFAULT_CACHE) -> int:
    """Node count the batch settled on for entry k (0 for k = 0)."""
    return int(coefficient_table(f, n, k, cfg, cache).nodes[k])
