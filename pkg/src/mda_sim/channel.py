"""Link-level channel model: Jakes-correlated fading fields, lognormal
shadowing, pathloss amplitude and power control."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.linalg.blas import dtrsv

from .numerics import DomainError, bessel_j0

__all__ = [
    "Position",
    "LinkFieldSampler",
    "ShadowingDraw",
    "draw_shadowing",
    "complex_normal",
    "link_gain",
    "transmit_power",
    "COV_JITTER",
]

COV_JITTER = 1e-10
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Position:
    """A point in the plane, metres."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite position ({self.x}, {self.y})")

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def moved(self, length: float, angle: float) -> "Position":
        return Position(self.x + length * math.cos(angle), self.y + length * math.sin(angle))

    def __iter__(self):
        yield self.x
        yield self.y


def complex_normal(rng: np.random.Generator, size=None):
    """CN(0, 1) draws: each quadrature component has variance 1/2."""
    re, im = rng.standard_normal((2,) if size is None else (2, size))
    out = (re + 1j * im) / math.sqrt(2.0)
    return complex(out) if size is None else out


class LinkFieldSampler:
    """Small-scale fading of one link as a field over receiver positions.

    The field is circular complex Gaussian with unit power and covariance
    ``J0(2*pi*|p - q| / wavelength)``. Points are drawn one at a time,
    each conditioned on every point already visited, so the joint law of
    the visited set does not depend on the order of the queries.

    The covariance Cholesky factor is grown by one row per new point. The
    stored innovations ``z`` satisfy ``h = L z``, hence the conditional mean
    at a new point is ``w . z`` with ``L w = k``.
    """

    def __init__(self, endpoint: Position, wavelength: float, rng: np.random.Generator, capacity: int = 16):
        if not wavelength > 0.0:
            raise DomainError(f"wavelength must be > 0, got {wavelength}")
        self.endpoint = endpoint
        self.wavelength = wavelength
        self.rng = rng
        self.visited: list[tuple[Position, complex]] = []
        self._index: dict[Position, int] = {}
        self._wavenumber = 2.0 * math.pi / wavelength
        self._alloc(max(capacity, 1))

    def _alloc(self, capacity: int) -> None:
        n = len(self.visited)
        xy = np.zeros((2, capacity))
        chol = np.zeros((capacity, capacity), order="F")
        innov = np.zeros(capacity, dtype=complex)
        if n:
            xy[:, :n] = self._xy[:, :n]
            chol[:n, :n] = self._chol[:n, :n]
            innov[:n] = self._innov[:n]
        self._xy, self._chol, self._innov = xy, chol, innov

    def __len__(self) -> int:
        return len(self.visited)

    def correlation(self, p: Position, q: Position) -> float:
        return bessel_j0(self._wavenumber * p.distance(q))

    def sample_at(self, p: Position) -> complex:
        """Draw (or recall) the fading gain at ``p``."""
        hit = self._index.get(p)
        if hit is not None:
            return self.visited[hit][1]
        n = len(self.visited)
        if n == self._chol.shape[0]:
            self._alloc(2 * n)
        re, im = self.rng.standard_normal(2)
        xi = complex(re, im) * _INV_SQRT2
        if n == 0:
            mean = 0j
            diag = math.sqrt(1.0 + COV_JITTER)
        else:
            d = np.hypot(self._xy[0, :n] - p.x, self._xy[1, :n] - p.y)
            k = special.j0(self._wavenumber * d)
            w = dtrsv(self._chol[:n, :n], k, lower=1)
            mean = complex(w @ self._innov[:n])
            diag = math.sqrt(max(1.0 + COV_JITTER - float(w @ w), COV_JITTER))
            self._chol[n, :n] = w
        h = mean + diag * xi
        self._chol[n, n] = diag
        self._innov[n] = xi
        self._xy[0, n] = p.x
        self._xy[1, n] = p.y
        self._index[p] = n
        self.visited.append((p, h))
        return h


@dataclass(frozen=True)
class ShadowingDraw:
    """Linear-scale lognormal shadowing amplitude."""

    s: float

    @property
    def db(self) -> float:
        return 10.0 * math.log10(self.s)


def draw_shadowing(var_db: float, rng: np.random.Generator) -> ShadowingDraw:
    """``s = 10**(g/10)`` with ``g ~ N(0, var_db)`` in dB."""
    if not var_db > 0.0:
        raise DomainError(f"shadowing variance must be > 0, got {var_db}")
    g = rng.normal(0.0, math.sqrt(var_db))
    return ShadowingDraw(10.0 ** (g / 10.0))


def link_gain(s, h: complex, dist: float, alpha: float) -> float:
    """Amplitude gain ``s |h| / dist**(alpha/2)``; ``s`` may be a ShadowingDraw."""
    if not dist > 0.0:
        raise DomainError(f"link distance must be > 0, got {dist}")
    s_val = s.s if isinstance(s, ShadowingDraw) else float(s)
    return s_val * abs(h) / dist ** (alpha / 2.0)


def transmit_power(gain: float, p_ref: float) -> float:
    """Power that delivers ``p_ref`` through amplitude ``gain``.

    A zero gain is an outage: ``inf`` is returned and the caller counts it.
    """
    if gain < 0.0 or not math.isfinite(gain):
        raise DomainError(f"invalid gain {gain}")
    if gain == 0.0:
        return math.inf
    return p_ref / (gain * gain)
