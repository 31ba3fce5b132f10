"""Multiple-link mobility diversity algorithm.

The robot explores K stopping points along a fixed heading. At each point
it predicts, for the two candidate step lengths, the Rician law of every
link's next amplitude and steps to the candidate whose objective is larger.
Afterwards it settles on the visited point with the best worst-link gain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

from .channel import LinkFieldSampler, Position, complex_normal, link_gain
from .numerics import DomainError, RicianParams, bessel_j0, expected_min_rician, first_j0_zero, rician_mean

__all__ = [
    "Objective",
    "PlannerConfig",
    "LinkState",
    "StoppingRecord",
    "decorrelation_distance",
    "candidate_positions",
    "predictor_params",
    "g1_value",
    "g2_value",
    "plan_step",
    "measure",
    "run_exploration",
    "select_position",
]

_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_RAYLEIGH_MEAN = math.sqrt(math.pi) / 2.0  # E|h| for h ~ CN(0, 1)


class Objective(str, enum.Enum):
    G1 = "G1"  # expected worst-link amplitude
    G2 = "G2"  # product of per-link expected amplitudes


def decorrelation_distance(wavelength: float) -> float:
    """Shortest displacement at which Jakes fading decorrelates."""
    return wavelength * first_j0_zero() / (2.0 * math.pi)


@dataclass(frozen=True)
class PlannerConfig:
    k_points: int
    l_links: int
    wavelength: float
    alpha: float = 2.0
    phi: float = 0.0
    ell_d: float | None = None
    ell_u: float | None = None
    objective: Objective = Objective.G2

    def __post_init__(self):
        if self.ell_u is None:
            object.__setattr__(self, "ell_u", decorrelation_distance(self.wavelength))
        if self.ell_d is None:
            object.__setattr__(self, "ell_d", 0.1 * self.wavelength)
        object.__setattr__(self, "objective", Objective(self.objective))
        problems = self.violations()
        if problems:
            raise DomainError("; ".join(problems))

    def violations(self, n_chs: int | None = None) -> list[str]:
        out = []
        if self.k_points < 1:
            out.append(f"k_points must be >= 1 (got {self.k_points})")
        if self.l_links < 1:
            out.append(f"l_links must be >= 1 (got {self.l_links})")
        if n_chs is not None and self.l_links > n_chs:
            out.append(f"l_links ({self.l_links}) exceeds the number of CHs ({n_chs})")
        if not self.wavelength > 0.0:
            out.append(f"wavelength must be > 0 (got {self.wavelength})")
        if not self.alpha > 0.0:
            out.append(f"alpha must be > 0 (got {self.alpha})")
        if not 0.0 < self.ell_d < self.ell_u:
            out.append(f"need 0 < ell_d < ell_u (got ell_d={self.ell_d}, ell_u={self.ell_u})")
        if self.wavelength > 0.0 and not math.isclose(
            self.ell_u, decorrelation_distance(self.wavelength), rel_tol=1e-9
        ):
            out.append(
                f"ell_u must equal the first J0 zero distance {decorrelation_distance(self.wavelength)!r} "
                f"(got {self.ell_u})"
            )
        return out


@dataclass
class LinkState:
    """What the planner knows about one link. ``id`` 0 is the FC."""

    id: int
    s: float
    dist: float
    h_hat: complex = 0j

    def __post_init__(self):
        if not self.s > 0.0:
            raise DomainError(f"link {self.id}: shadowing must be > 0")
        if not self.dist > 0.0:
            raise DomainError(f"link {self.id}: distance must be > 0")


@dataclass
class StoppingRecord:
    index: int
    position: Position
    gains: dict[int, float] = field(default_factory=dict)

    @property
    def min_gain(self) -> float:
        return min(self.gains.values())


def candidate_positions(p_now: Position, cfg: PlannerConfig) -> tuple[Position, Position]:
    """Short-step and decorrelating-step candidates along ``cfg.phi``."""
    return p_now.moved(cfg.ell_d, cfg.phi), p_now.moved(cfg.ell_u, cfg.phi)


def _correlation(step: float, cfg: PlannerConfig) -> float:
    if not 0.0 < step <= cfg.ell_u * (1.0 + 1e-12):
        raise DomainError(f"step {step} outside (0, ell_u={cfg.ell_u}]")
    if step >= cfg.ell_u:
        return 0.0
    return max(bessel_j0(2.0 * math.pi * step / cfg.wavelength), 0.0)


def predictor_params(link: LinkState, step: float, cfg: PlannerConfig) -> RicianParams:
    """Rician law of the link amplitude one step of length ``step`` ahead."""
    rho = _correlation(step, cfg)
    scale = link.s / link.dist ** (cfg.alpha / 2.0)
    # CN(0, 1) innovation: each quadrature component has variance (1 - rho^2) / 2
    sigma = scale * math.sqrt(0.5 * (1.0 - rho * rho))
    nu = scale * rho * abs(link.h_hat)
    # rho -> 1 is excluded by step > 0; keep sigma strictly positive anyway
    return RicianParams(nu=nu, sigma=max(sigma, 1e-300))


def g2_value(links: Sequence[LinkState], step: float, cfg: PlannerConfig) -> float:
    """Product over links of the predicted mean amplitude."""
    if not links:
        raise DomainError("need at least one link")
    out = 1.0
    for link in links:
        out *= rician_mean(predictor_params(link, step, cfg))
    return out


def g1_value(links: Sequence[LinkState], step: float, cfg: PlannerConfig) -> float:
    """Predicted expected worst-link amplitude."""
    if not links:
        raise DomainError("need at least one link")
    return expected_min_rician([predictor_params(link, step, cfg) for link in links])


def _g2_pair(links: Sequence[LinkState], cfg: PlannerConfig) -> tuple[float, float]:
    # Vectorised g2_value at (ell_d, ell_u); ell_u gives rho = 0 (Rayleigh).
    rho = max(bessel_j0(2.0 * math.pi * cfg.ell_d / cfg.wavelength), 0.0)
    scale = np.array([l.s / l.dist ** (cfg.alpha / 2.0) for l in links])
    mag = np.array([abs(l.h_hat) for l in links])
    sigma = scale * math.sqrt(0.5 * (1.0 - rho * rho))
    y = (rho * mag) ** 2 / (2.0 * (1.0 - rho * rho))
    lag = (1.0 + 2.0 * y) * special.i0e(y) + 2.0 * y * special.i1e(y)
    short = float(np.prod(sigma * _SQRT_HALF_PI * lag))
    long = float(np.prod(scale * _RAYLEIGH_MEAN))
    return short, long


def plan_step(links: Sequence[LinkState], cfg: PlannerConfig) -> float:
    """Step length in ``{ell_d, ell_u}`` maximising the objective; ties go to ``ell_u``."""
    if not links:
        raise DomainError("need at least one link")
    if cfg.objective is Objective.G2:
        short, long = _g2_pair(links, cfg)
    else:
        short, long = g1_value(links, cfg.ell_d, cfg), g1_value(links, cfg.ell_u, cfg)
    return cfg.ell_d if short > long else cfg.ell_u


def measure(
    links: Sequence[LinkState],
    fields: Mapping[int, LinkFieldSampler],
    p: Position,
    alpha: float,
    rng: np.random.Generator | None = None,
    noise_var: float = 0.0,
) -> dict[int, float]:
    """Sample every link at ``p``, refresh ``h_hat`` and return measured gains.

    With ``noise_var > 0`` the estimate is the true gain plus CN(0, noise_var).
    """
    gains = {}
    for link in links:
        h = fields[link.id].sample_at(p)
        if noise_var > 0.0:
            h = h + math.sqrt(noise_var) * complex_normal(rng)
        link.h_hat = h
        gains[link.id] = link_gain(link.s, h, link.dist, alpha)
    return gains


def run_exploration(
    start: Position,
    links: Sequence[LinkState],
    fields: Mapping[int, LinkFieldSampler],
    cfg: PlannerConfig,
    rng: np.random.Generator | None = None,
    noise_var: float = 0.0,
) -> list[StoppingRecord]:
    """Visit ``cfg.k_points`` stopping points starting at ``start``.

    ``links`` is updated in place: on return each ``h_hat`` holds the
    estimate at the last stopping point. Distances stay frozen at their
    values from the start point, the excursion being a few wavelengths.
    """
    missing = {l.id for l in links} - set(fields)
    if missing:
        raise DomainError(f"no fading field for links {sorted(missing)}")
    if noise_var > 0.0 and rng is None:
        raise DomainError("estimation noise needs an rng")
    p = start
    records = [StoppingRecord(1, p, measure(links, fields, p, cfg.alpha, rng, noise_var))]
    for n in range(2, cfg.k_points + 1):
        p = p.moved(plan_step(links, cfg), cfg.phi)
        records.append(StoppingRecord(n, p, measure(links, fields, p, cfg.alpha, rng, noise_var)))
    return records


def select_position(records: Sequence[StoppingRecord]) -> StoppingRecord:
    """Record with the largest worst-link gain; earliest wins ties."""
    if not records:
        raise DomainError("no stopping points to select from")
    best = records[0]
    for rec in records[1:]:
        if rec.min_gain > best.min_gain:
            best = rec
    return best
