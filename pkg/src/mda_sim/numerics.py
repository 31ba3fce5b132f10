"""Special functions and quadrature used by the planner objectives.

Everything here is pure; arrays are accepted where noted so the quadrature
can evaluate integrands on a whole batch of abscissae at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "RicianParams",
    "bessel_j0",
    "first_j0_zero",
    "marcum_q1",
    "laguerre_half",
    "rician_mean",
    "adaptive_simpson",
    "tail_product",
    "truncated_product_integral",
    "truncation_point",
    "expected_min_rician",
]

# series/Gauss-Hermite switch for Marcum Q1
_SERIES_LIMIT = 50.0
_SERIES_CHUNK = 64
_SERIES_RTOL = 1e-16
_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(96)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)

_TRUNCATION_MULTIPLES = (6.0, 8.0, 10.0, 12.0)
_DEFAULT_TRUNCATION_EPS = 1e-10


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""


@dataclass(frozen=True)
class RicianParams:
    """Rician amplitude law: ``|nu + sigma * (X + iY)|`` with X, Y ~ N(0, 1)."""

    nu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.nu) and math.isfinite(self.sigma)):
            raise DomainError(f"non-finite Rician parameters {self}")
        if self.nu < 0.0:
            raise DomainError(f"nu must be >= 0, got {self.nu}")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j0 needs finite input")
    out = special.j0(arr)
    return float(out) if out.ndim == 0 else out


def first_j0_zero(tol: float = 1e-15) -> float:
    """First positive root of J0, bisected on ``[2, 3]``."""
    lo, hi = 2.0, 3.0
    f_lo = bessel_j0(lo)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        f_mid = bessel_j0(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _marcum_series(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Both forms sum r**k * I_k(ab) * exp(-(a^2+b^2)/2) with r <= 1, written
    # with exponentially scaled Bessel functions so nothing overflows.
    upper = b > a
    r = np.where(upper, a, b) / np.where(upper, b, a)
    ab = a * b
    scale = np.exp(-0.5 * (a - b) ** 2)
    total = np.zeros_like(a)
    k0 = np.where(upper, 0, 1)
    active = np.ones(a.shape, dtype=bool)
    start = 0
    while np.any(active):
        idx = np.flatnonzero(active)
        ks = np.arange(start, start + _SERIES_CHUNK, dtype=float)
        terms = r[idx, None] ** ks * special.ive(ks, ab[idx, None])
        terms[ks[None, :] < k0[idx, None]] = 0.0
        total[idx] += terms.sum(axis=1)
        last = terms[:, -1]
        done = (last <= _SERIES_RTOL * total[idx]) | (last == 0.0)
        active[idx[done]] = False
        start += _SERIES_CHUNK
    total *= scale
    return np.where(upper, total, 1.0 - total)


def _marcum_hermite(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Q1(a,b) = E_Y[P(|a + X| > sqrt(b^2 - Y^2))], X, Y iid N(0,1).
    y2 = _GH_NODES[None, :] ** 2
    c2 = b[:, None] ** 2 - y2
    c = np.sqrt(np.maximum(c2, 0.0))
    g = special.ndtr(a[:, None] - c) + special.ndtr(-a[:, None] - c)
    g = np.where(c2 <= 0.0, 1.0, g)
    return g @ _GH_WEIGHTS


def marcum_q1(a, b):
    """First-order Marcum Q function.

    ``Q1(a, b) = P(R > b)`` for ``R = |a + X + iY|`` with X, Y iid N(0, 1).
    Broadcasts over array arguments; scalars in, float out.

    Parameters
    ----------
    a, b : float or array_like
        Non-negative, finite.

    Notes
    -----
    While ``min(a, b) <= 50`` a series of scaled modified Bessel terms is
    used, summing the Q-series when ``b > a`` and the complementary series
    otherwise so no cancellation occurs. When
    both arguments exceed 50 the series converges slowly and a 96-node
    Gauss-Hermite rule over the quadrature component is used instead.
    """
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise DomainError("marcum_q1 needs finite arguments")
    if np.any(a_arr < 0.0) or np.any(b_arr < 0.0):
        raise DomainError("marcum_q1 needs non-negative arguments")
    shape = a_arr.shape
    af = a_arr.ravel().copy()
    bf = b_arr.ravel().copy()
    out = np.empty_like(af)

    zero_b = bf == 0.0
    zero_a = (af == 0.0) & ~zero_b
    out[zero_b] = 1.0
    out[zero_a] = np.exp(-0.5 * bf[zero_a] ** 2)
    rest = ~(zero_a | zero_b)
    hermite = rest & (np.minimum(af, bf) > _SERIES_LIMIT)
    series = rest & ~hermite
    if np.any(series):
        out[series] = _marcum_series(af[series], bf[series])
    if np.any(hermite):
        out[hermite] = _marcum_hermite(af[hermite], bf[hermite])
    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return float(out) if out.ndim == 0 else out


def laguerre_half(x):
    """Laguerre function of degree 1/2 for ``x <= 0``.

    Uses ``L_{1/2}(x) = e^{x/2}[(1 - x) I0(-x/2) - x I1(-x/2)]`` with
    exponentially scaled Bessel functions.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("laguerre_half needs finite input")
    if np.any(arr > 0.0):
        raise DomainError("laguerre_half is only defined here for x <= 0")
    y = -0.5 * arr
    out = (1.0 + 2.0 * y) * special.i0e(y) + 2.0 * y * special.i1e(y)
    return float(out) if out.ndim == 0 else out


def rician_mean(p: RicianParams) -> float:
    """Mean of a Rician(nu, sigma) amplitude."""
    return p.sigma * math.sqrt(math.pi / 2.0) * laguerre_half(-p.nu**2 / (2.0 * p.sigma**2))


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rtol: float = 1e-6,
    atol: float = 0.0,
    initial: int = 16,
    max_depth: int = 40,
) -> float:
    """Adaptive composite Simpson rule with interval bisection.

    ``f`` must be vectorised: it receives a 1-D array of abscissae. All
    pending intervals are refined together, and each one has to meet its
    width-proportional share of ``max(rtol * |I|, atol)``.
    """
    if hi < lo:
        return -adaptive_simpson(f, hi, lo, rtol, atol, initial, max_depth)
    if hi == lo:
        return 0.0
    span = hi - lo
    edges = np.linspace(lo, hi, initial + 1)
    a, b = edges[:-1], edges[1:]
    m = 0.5 * (a + b)
    vals = f(np.concatenate([a, m, b[-1:]]))
    fa = vals[:initial]
    fm = vals[initial : 2 * initial]
    fb = np.append(fa[1:], vals[-1])
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    accepted = 0.0
    for depth in range(max_depth + 1):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        fl, fr = np.split(f(np.concatenate([lm, rm])), 2)
        left = (m - a) / 6.0 * (fa + 4.0 * fl + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * fr + fb)
        refined = left + right
        err = refined - whole
        estimate = accepted + refined.sum()
        budget = max(rtol * abs(estimate), atol)
        ok = np.abs(err) <= 15.0 * budget * (b - a) / span
        if depth == max_depth:
            ok[:] = True
        accepted += float(np.sum(refined[ok] + err[ok] / 15.0))
        todo = ~ok
        if not np.any(todo):
            break
        a, m, b = a[todo], m[todo], b[todo]
        fa, fm, fb, fl, fr = fa[todo], fm[todo], fb[todo], fl[todo], fr[todo]
        left, right = left[todo], right[todo]
        # children: [a, m] with midpoint lm, [m, b] with midpoint rm
        a, m, b = np.concatenate([a, m]), np.concatenate([0.5 * (a + m), 0.5 * (m + b)]), np.concatenate([m, b])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([fl, fr]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
    return accepted


def _normalised(links: Sequence[RicianParams]) -> tuple[np.ndarray, np.ndarray]:
    if len(links) == 0:
        raise DomainError("need at least one link")
    nu = np.array([p.nu for p in links], dtype=float)
    sigma = np.array([p.sigma for p in links], dtype=float)
    return nu, sigma


def tail_product(links: Sequence[RicianParams], x):
    """``prod_j Q1(nu_j / sigma_j, x / sigma_j)``: P(min_j R_j > x)."""
    nu, sigma = _normalised(links)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    q = marcum_q1((nu / sigma)[:, None], xs[None, :] / sigma[:, None])
    out = np.prod(q, axis=0)
    return float(out[0]) if np.ndim(x) == 0 else out


def truncated_product_integral(links: Sequence[RicianParams], upper: float, rtol: float = 1e-6) -> float:
    """``int_0^upper prod_j Q1(nu_j / sigma_j, x / sigma_j) dx``."""
    nu, sigma = _normalised(links)
    a = (nu / sigma)[:, None]
    inv = (1.0 / sigma)[:, None]

    def integrand(xs: np.ndarray) -> np.ndarray:
        return np.prod(marcum_q1(a, xs[None, :] * inv), axis=0)

    return adaptive_simpson(integrand, 0.0, upper, rtol=rtol)


def truncation_point(links: Sequence[RicianParams], eps: float = _DEFAULT_TRUNCATION_EPS) -> float:
    """Upper limit beyond which the product of Rician tails is negligible.

    Returns ``min_j(nu_j + c * sigma_j)`` for the smallest ``c`` in
    ``(6, 8, 10, 12)`` whose integrand value there is below ``eps``; 12 if
    none qualifies.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    nu, sigma = _normalised(links)
    x0 = float(np.min(nu + _TRUNCATION_MULTIPLES[-1] * sigma))
    for c in _TRUNCATION_MULTIPLES:
        x0 = float(np.min(nu + c * sigma))
        if tail_product(links, x0) < eps:
            break
    return x0


def expected_min_rician(links: Sequence[RicianParams], rtol: float = 1e-6) -> float:
    """Expected minimum of independent Rician amplitudes.

    Integrates the product of their Marcum-Q tails over ``[0, X0]`` with
    ``X0`` from :func:`truncation_point`.
    """
    x0 = truncation_point(links)
    return truncated_product_integral(links, x0, rtol=rtol)
