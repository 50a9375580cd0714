"""Baskakov basis functions and their weighted second-order images.

The basis is

    P_{n,k}(x) = C(n+k-1, k) x^k (1+x)^(-n-k),     k = 0, 1, ...

which, for fixed x, is the negative-binomial mass with n successes and
success probability 1/(1+x).  ``psi(x) = x(1+x)`` and the weighted operator
``Dt g = psi * g''`` are used throughout.

Two evaluation surfaces are provided:

* scalar functions (``basis_value``, ``dtilde_basis``, ...) taking a single
  ``(n, k, x)``;
* row functions (``basis_row``, ``dtilde_row``, ...) returning the whole
  vector ``k = 0..kmax`` for one x, which is what the operators sum over.

Everything at x = 0 is handled by exact limits; P_{n,k} with k < 0 is 0.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import nbinom

from .errors import DomainError, PoleError

__all__ = [
    "psi",
    "basis_value",
    "basis_derivatives",
    "t_values",
    "t_value_second_form",
    "dtilde_basis",
    "modified_basis",
    "dtilde_modified_basis",
    "basis_row",
    "dtilde_row",
    "modified_row",
    "dtilde_modified_row",
]


def psi(x):
    return x * (1.0 + x)


def _check(n: int, x: float) -> None:
    if n < 1:
        raise DomainError(f"degree n must be >= 1, got {n}")
    if not x >= 0.0:
        raise DomainError(f"x must be >= 0, got {x}")


def _pmf(n: int, k: int, x: float) -> float:
    # Boost's negative-binomial mass: a few ulp, where exp of a log-gamma
    # sum loses ~1e-13 to cancellation between terms of size (n+k) log(1+x).
    # Rounding 1/(1+x) costs at most ~k n eps relative, and k >= 1 at the
    # mode only once x >~ 1/n.
    return float(nbinom.pmf(k, n, 1.0 / (1.0 + x)))


def basis_value(n: int, k: int, x: float) -> float:
    """P_{n,k}(x) as the negative-binomial mass NB(k; n, 1/(1+x)).

    Nothing overflows for n, k in the millions (the mass underflows to 0
    far in the tails).  Returns exactly 0 for k < 0 and for k > 0 at x = 0.
    """
    _check(n, x)
    if k < 0:
        return 0.0
    if x == 0.0:
        return 1.0 if k == 0 else 0.0
    return _pmf(n, k, x)


def basis_derivatives(n: int, k: int, x: float) -> tuple[float, float]:
    """(P'_{n,k}(x), P''_{n,k}(x)) from the shifted-index identities.

    P'  = n [P_{n+1,k-1} - P_{n+1,k}]
    P'' = n(n+1) [P_{n+2,k-2} - 2 P_{n+2,k-1} + P_{n+2,k}]
    """
    _check(n, x)
    d1 = n * (basis_value(n + 1, k - 1, x) - basis_value(n + 1, k, x))
    d2 = n * (n + 1) * (
        basis_value(n + 2, k - 2, x)
        - 2.0 * basis_value(n + 2, k - 1, x)
        + basis_value(n + 2, k, x)
    )
    return d1, d2


def t_value_second_form(n: int, k: int, x: float) -> float:
    """T_{n,k}(x) written through the centred variable k/n - x.

    Loses relative accuracy for large n (the bracket cancels); used only
    as a cross-check of the production form.
    """
    p = psi(x)
    d = k / n - x
    return n * (-1.0 - (1.0 + 2.0 * x) / p * d + n / p * d * d)


def t_values(n: int, k: int, x: float, check: bool = False) -> tuple[float, float, float]:
    """(T_{n,k}(x), T'_{n,k}(x), T''_{n,k}(x)).

    T_{n,k} is the rational function with Dt P_{n,k} = T_{n,k} P_{n,k}:

        T   = k(k-1)(1+x)/x - 2k(n+k) + (n+k)(n+k+1) x/(1+x)
        T'  = -k(k-1)/x^2 + (n+k)(n+k+1)/(1+x)^2
        T'' = 2k(k-1)/x^3 - 2(n+k)(n+k+1)/(1+x)^3

    At x = 0 only k <= 1 is finite; k >= 2 raises ``PoleError``.  Callers
    that need the product T*P at 0 should use :func:`dtilde_basis`.

    With ``check=True`` the centred form is evaluated too and the two must
    agree to 1e-12 relative to the size of the cancelling terms.
    """
    _check(n, x)
    a = k * (k - 1)
    c = (n + k) * (n + k + 1)
    if x == 0.0:
        if a != 0:
            raise PoleError(f"T_{{{n},{k}}} has a pole at x = 0")
        return -2.0 * k * (n + k), float(c), -2.0 * c
    t = a * (1.0 + x) / x - 2.0 * k * (n + k) + c * x / (1.0 + x)
    t1 = -a / x**2 + c / (1.0 + x) ** 2
    t2 = 2.0 * a / x**3 - 2.0 * c / (1.0 + x) ** 3
    if check:
        scale = a * (1.0 + x) / x + 2.0 * k * (n + k) + c * x / (1.0 + x)
        alt = t_value_second_form(n, k, x)
        # the centred form carries an n^2/psi amplification of rounding
        slack = 1e-12 * scale * max(1.0, n * n * max(1.0, 1.0 / psi(x)) * 1e-3)
        if abs(alt - t) > slack:
            raise AssertionError(f"T forms disagree at n={n}, k={k}, x={x}: {t} vs {alt}")
    return t, t1, t2


def dtilde_basis(n: int, k: int, x: float) -> float:
    """Dt P_{n,k}(x) = psi P''_{n,k} via the pole-free three-term form.

    (k-1)(n+k-1) P_{n,k-1} - 2k(n+k) P_{n,k} + (k+1)(n+k+1) P_{n,k+1}
    """
    _check(n, x)
    if k < 0:
        return 0.0
    return (
        (k - 1) * (n + k - 1) * basis_value(n, k - 1, x)
        - 2.0 * k * (n + k) * basis_value(n, k, x)
        + (k + 1) * (n + k + 1) * basis_value(n, k + 1, x)
    )


def modified_basis(n: int, k: int, x: float) -> float:
    """P~_{n,k}(x) = P_{n,k}(x) - Dt P_{n,k}(x) / n.  Can be negative."""
    return basis_value(n, k, x) - dtilde_basis(n, k, x) / n


def _t_squared_p(n: int, k: int, x: float) -> float:
    # T_{n,k}^2 P_{n,k}: expanding (a Y - b + c X)^2 with
    # Y P_j = (n+j-1)/j P_{j-1} and X P_j = (j+1)/(n+j) P_{j+1}
    return (
        k * (k - 1) * (n + k - 1) * (n + k - 2) * basis_value(n, k - 2, x)
        - 4.0 * k * (k - 1) * (n + k) * (n + k - 1) * basis_value(n, k - 1, x)
        + (4.0 * k * k * (n + k) ** 2 + 2.0 * k * (k - 1) * (n + k) * (n + k + 1))
        * basis_value(n, k, x)
        - 4.0 * k * (k + 1) * (n + k) * (n + k + 1) * basis_value(n, k + 1, x)
        + (k + 1) * (k + 2) * (n + k) * (n + k + 1) * basis_value(n, k + 2, x)
    )


def dtilde_modified_basis(n: int, k: int, x: float) -> float:
    """Dt P~_{n,k}(x) without any division by x.

    Dt P~ = (psi/n) T'' P + 2 [T_{n+1,k-1} P_{n+1,k-1} + T_{n+1,k} P_{n+1,k}]
            + (1 - T/n) T P,

    with the first group 2(n+k-1) P_{n+1,k-2} - 2(k+1) P_{n+1,k+1}, the
    second a four-term combination of P_{n+1,.}, and T P, T^2 P reduced to
    three and five neighbouring P_{n,.} values.
    """
    _check(n, x)
    if k < 0:
        return 0.0
    q = lambda j: basis_value(n + 1, j, x)  # noqa: E731
    curv = 2.0 * (n + k - 1) * q(k - 2) - 2.0 * (k + 1) * q(k + 1)
    pair = (
        (k - 2) * (n + k - 1) * q(k - 2)
        - (k - 1) * (n + k) * q(k - 1)
        - k * (n + k + 1) * q(k)
        + (k + 1) * (n + k + 2) * q(k + 1)
    )
    tp = dtilde_basis(n, k, x)
    return curv + 2.0 * pair + tp - _t_squared_p(n, k, x) / n


# ---------------------------------------------------------------------------
# whole rows k = 0..kmax at one point


def basis_row(n: int, x: float, kmax: int) -> np.ndarray:
    """P_{n,k}(x) for k = 0..kmax.

    The value at the mode comes from the negative-binomial mass; the rest of the row is
    filled by the exact ratio P_{k+1}/P_k = (n+k)/(k+1) * x/(1+x) moving
    outwards, so neighbouring entries carry consistent rounding.  That
    matters for the cancelling three- and five-term forms built on top.
    """
    _check(n, x)
    out = np.zeros(kmax + 1)
    if kmax < 0:
        return out
    if x == 0.0:
        out[0] = 1.0
        return out
    q = x / (1.0 + x)
    m = min(int((n - 1) * x), kmax)
    out[m] = _pmf(n, m, x)
    if m < kmax:
        j = np.arange(m, kmax, dtype=float)
        out[m + 1 :] = out[m] * np.cumprod((n + j) / (j + 1.0) * q)
    if m > 0:
        j = np.arange(m, 0, -1, dtype=float)
        out[m - 1 :: -1] = out[m] * np.cumprod(j / ((n + j - 1.0) * q))
    return out


def _padded(row: np.ndarray, lo: int, hi: int) -> np.ndarray:
    # row[k] for k in [-lo, len-1+hi], zeros outside the computed range
    return np.concatenate([np.zeros(lo), row, np.zeros(hi)])


# Below this x the rows use the pole-free neighbour forms; above it the
# centred forms.  The neighbour forms cancel terms of size (nx)^2 (and
# (nx)^4/n for Dt P~) down to O(n) and lose ~log10(n x^2) digits for
# large x, while the centred forms carry 1/psi factors that hurt only
# near x = 0.  Both are accurate to ~1e-15 of the row mass at the switch.
CENTRED_FROM = 0.1


def _centred_t(n: int, x: float, kmax: int):
    """(j, T, T', T'') along k = 0..kmax with j = k - n x.

    With N = T psi = j^2 - (1+2x) j - n psi one has N' = -2(n+1) j and
    N'' = 2n(n+1), so every quantity is O(n) for j ~ sqrt(n psi).
    """
    p = x * (1.0 + x)
    j = np.arange(kmax + 1, dtype=float) - n * x
    t = (j * j - (1.0 + 2.0 * x) * j - n * p) / p
    t1 = (-2.0 * (n + 1) * j - t * (1.0 + 2.0 * x)) / p
    t2 = (2.0 * n * (n + 1) - 2.0 * t1 * (1.0 + 2.0 * x) - 2.0 * t) / p
    return j, t, t1, t2


def dtilde_row(n: int, x: float, kmax: int) -> np.ndarray:
    """Dt P_{n,k}(x), k = 0..kmax."""
    if x >= CENTRED_FROM:
        return _centred_t(n, x, kmax)[1] * basis_row(n, x, kmax)
    p = _padded(basis_row(n, x, kmax + 1), 1, 0)  # p[k+1] = P_{n,k}
    k = np.arange(kmax + 1, dtype=float)
    return (
        (k - 1) * (n + k - 1) * p[0 : kmax + 1]
        - 2.0 * k * (n + k) * p[1 : kmax + 2]
        + (k + 1) * (n + k + 1) * p[2 : kmax + 3]
    )


def modified_row(n: int, x: float, kmax: int) -> np.ndarray:
    """P~_{n,k}(x), k = 0..kmax."""
    if x >= CENTRED_FROM:
        return (1.0 - _centred_t(n, x, kmax)[1] / n) * basis_row(n, x, kmax)
    return basis_row(n, x, kmax) - dtilde_row(n, x, kmax) / n


def dtilde_modified_row(n: int, x: float, kmax: int) -> np.ndarray:
    """Dt P~_{n,k}(x), k = 0..kmax.

    Near 0 the same reduction as the scalar form; otherwise
    Dt P~ = P [T - (psi T'' + 2 j T' + T^2)/n], since P'/P = j/psi.
    """
    if x >= CENTRED_FROM:
        j, t, t1, t2 = _centred_t(n, x, kmax)
        return (t - (psi(x) * t2 + 2.0 * j * t1 + t * t) / n) * basis_row(n, x, kmax)
    k = np.arange(kmax + 1, dtype=float)
    q = _padded(basis_row(n + 1, x, kmax + 1), 2, 0)  # q[k+2] = P_{n+1,k}
    p = _padded(basis_row(n, x, kmax + 2), 2, 0)  # p[k+2] = P_{n,k}
    q_m2, q_m1, q_0, q_p1 = q[0 : kmax + 1], q[1 : kmax + 2], q[2 : kmax + 3], q[3 : kmax + 4]
    p_m2, p_m1, p_0 = p[0 : kmax + 1], p[1 : kmax + 2], p[2 : kmax + 3]
    p_p1, p_p2 = p[3 : kmax + 4], p[4 : kmax + 5]

    curv = 2.0 * (n + k - 1) * q_m2 - 2.0 * (k + 1) * q_p1
    pair = (
        (k - 2) * (n + k - 1) * q_m2
        - (k - 1) * (n + k) * q_m1
        - k * (n + k + 1) * q_0
        + (k + 1) * (n + k + 2) * q_p1
    )
    tp = (k - 1) * (n + k - 1) * p_m1 - 2.0 * k * (n + k) * p_0 + (k + 1) * (n + k + 1) * p_p1
    t2p = (
        k * (k - 1) * (n + k - 1) * (n + k - 2) * p_m2
        - 4.0 * k * (k - 1) * (n + k) * (n + k - 1) * p_m1
        + (4.0 * k * k * (n + k) ** 2 + 2.0 * k * (k - 1) * (n + k) * (n + k + 1)) * p_0
        - 4.0 * k * (k + 1) * (n + k) * (n + k + 1) * p_p1
        + (k + 1) * (k + 2) * (n + k) * (n + k + 1) * p_p2
    )
    return curv + 2.0 * pair + tp - t2p / n
