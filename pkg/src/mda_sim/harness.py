"""Monte-Carlo sweeps over (K, L) and their summary statistics."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import ChannelConfig, NonFadingBaseline, Topology, default_topology, non_fading_baseline, run_block
from .numerics import DomainError
from .planner import Objective, PlannerConfig

__all__ = [
    "ExperimentConfig",
    "PowerStats",
    "MetricsReport",
    "TrendCheck",
    "trial_rng",
    "run_trials",
    "run_experiment",
    "power_stats",
    "check_k_trend",
    "check_l_trend",
    "check_selection_trend",
    "summarize_trend",
    "baseline_crossover",
    "worker_count",
]

TRIM_QUANTILE = 0.999
Z95 = 1.959963984540054
MIN_TREND_TRIALS = 1000
SELECTED = "selected"


@dataclass(frozen=True)
class ExperimentConfig:
    topology: Topology = field(default_factory=default_topology)
    wavelength: float = 0.125
    alpha: float = 2.0
    p_ref: float = 1e-6
    shadow_var_db: float = 1.0
    k_sweep: tuple[int, ...] = (1, 2, 4, 8, 16)
    l_sweep: tuple[int, ...] = (1, 2, 3)
    trials: int = 10_000
    seed: int = 20240521
    objective: Objective = Objective.G2
    ell_d: float | None = None
    ell_u: float | None = None
    phi: float = 0.0
    estimation_noise_var: float = 0.0

    def planner(self, k: int, l: int) -> PlannerConfig:
        return PlannerConfig(
            k_points=k,
            l_links=l,
            wavelength=self.wavelength,
            alpha=self.alpha,
            phi=self.phi,
            ell_d=self.ell_d,
            ell_u=self.ell_u,
            objective=self.objective,
        )

    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.p_ref, self.shadow_var_db, self.estimation_noise_var)

    def violations(self) -> list[str]:
        out = []
        if self.trials < 1:
            out.append(f"trials must be >= 1 (got {self.trials})")
        if not self.k_sweep:
            out.append("k_sweep is empty")
        if not self.l_sweep:
            out.append("l_sweep is empty")
        if not 0 <= self.seed < 2**64:
            out.append(f"seed must be a non-negative 64-bit integer (got {self.seed})")
        if not self.p_ref > 0.0:
            out.append(f"p_ref must be > 0 (got {self.p_ref})")
        if not self.shadow_var_db > 0.0:
            out.append(f"shadow_var_db must be > 0 (got {self.shadow_var_db})")
        if self.estimation_noise_var < 0.0:
            out.append(f"estimation_noise_var must be >= 0 (got {self.estimation_noise_var})")
        out += self.topology.violations(self.wavelength if self.wavelength > 0 else None)
        seen = set()
        for k in self.k_sweep or (1,):
            for l in self.l_sweep or (1,):
                try:
                    msgs = self.planner(k, l).violations(self.topology.n_chs)
                except DomainError as exc:
                    msgs = str(exc).split("; ")
                for m in msgs:
                    if m not in seen:
                        seen.add(m)
                        out.append(m)
        return out


@dataclass(frozen=True)
class PowerStats:
    """Untrimmed mean plus trimmed mean with a normal-approximation 95% CI."""

    n: int
    mean: float
    trimmed_mean: float
    ci_lo: float
    ci_hi: float

    def overlaps(self, other: "PowerStats") -> bool:
        return self.ci_lo <= other.ci_hi and other.ci_lo <= self.ci_hi


@dataclass
class MetricsReport:
    config: ExperimentConfig
    node_names: tuple[str, ...]
    powers: dict[tuple[int, int, str], PowerStats]
    selection: dict[int, dict[int, float]]
    mean_direct_gain: dict[int, dict[int, float]]
    baseline: NonFadingBaseline
    outage_count: int

    def power(self, k: int, l: int, node: str) -> PowerStats:
        return self.powers[(k, l, node)]

    def baseline_for(self, node: str) -> float:
        if node == "MR":
            return self.baseline.mr
        if node.startswith("CH"):
            return self.baseline.ch_direct[int(node[2:])]
        return math.nan


@dataclass(frozen=True)
class TrendCheck:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def worker_count() -> int:
    env = os.environ.get("MDA_SIM_THREADS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def trial_rng(seed: int, k: int, l: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k, l, trial]))


def run_trials(cfg: ExperimentConfig, k: int, l: int, start: int, stop: int) -> dict[str, np.ndarray]:
    """Trials ``start..stop-1`` of cell (k, l) as per-trial arrays."""
    pcfg = cfg.planner(k, l)
    chan = cfg.channel()
    n_ch = cfg.topology.n_chs
    size = stop - start
    ch_power = np.empty((size, n_ch))
    selected = np.zeros((size, n_ch), dtype=bool)
    direct = np.empty((size, n_ch))
    mr_power = np.empty(size)
    min_gain = np.empty(size)
    for i, t in enumerate(range(start, stop)):
        out = run_block(cfg.topology, pcfg, chan, trial_rng(cfg.seed, k, l, t))
        for j in range(1, n_ch + 1):
            ch_power[i, j - 1] = out.ch_power[j]
            direct[i, j - 1] = out.direct_gains[j]
            selected[i, j - 1] = j in out.selected_chs
        mr_power[i] = out.mr_power
        min_gain[i] = out.min_gain_selected
    return {"ch_power": ch_power, "selected": selected, "direct": direct, "mr_power": mr_power, "min_gain": min_gain}


def _run_chunk(args):
    return run_trials(*args)


def power_stats(values: np.ndarray) -> PowerStats:
    """Statistics over finite values, trimming the top 0.1%.

    The CI half-width uses the winsorized standard deviation,
    ``sd(min(x, cut)) / (q * sqrt(n))`` with ``q`` the kept fraction. The
    plain standard deviation of the kept values ignores the randomness of
    the cut and is too narrow for heavy upper tails.
    """
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return PowerStats(0, math.nan, math.nan, math.nan, math.nan)
    cut = np.quantile(x, TRIM_QUANTILE)
    tm = float(np.mean(x[x <= cut]))
    if x.size > 1:
        winsorized = np.minimum(x, cut)
        half = Z95 * float(np.std(winsorized, ddof=1)) / (TRIM_QUANTILE * math.sqrt(x.size))
    else:
        half = math.nan
    return PowerStats(int(x.size), float(np.mean(x)), tm, tm - half, tm + half)


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    n = min(trials, 4 * workers) if workers > 1 else 1
    edges = np.linspace(0, trials, n + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> MetricsReport:
    """Run every (K, L) cell of the sweep.

    Trial ``t`` of cell (K, L) always draws from the stream seeded by
    ``(seed, K, L, t)``, so results do not depend on ``workers``.
    """
    problems = cfg.violations()
    if problems:
        raise DomainError("; ".join(problems))
    workers = worker_count() if workers is None else max(1, workers)
    cells = [(k, l) for l in cfg.l_sweep for k in cfg.k_sweep]
    jobs = [(cfg, k, l, a, b) for k, l in cells for a, b in _chunks(cfg.trials, workers)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]

    per_cell: dict[tuple[int, int], list[dict[str, np.ndarray]]] = {c: [] for c in cells}
    for job, part in zip(jobs, parts):
        per_cell[(job[1], job[2])].append(part)

    n_ch = cfg.topology.n_chs
    names = tuple(f"CH{j}" for j in range(1, n_ch + 1)) + ("MR", SELECTED)
    powers = {}
    sel_counts = {l: np.zeros(n_ch, dtype=np.int64) for l in cfg.l_sweep}
    sel_totals = {l: 0 for l in cfg.l_sweep}
    direct_sums = {l: [] for l in cfg.l_sweep}
    outages = 0
    for (k, l), chunk in per_cell.items():
        data = {key: np.concatenate([c[key] for c in chunk]) for key in chunk[0]}
        for j in range(n_ch):
            powers[(k, l, names[j])] = power_stats(data["ch_power"][:, j])
        powers[(k, l, "MR")] = power_stats(data["mr_power"])
        powers[(k, l, SELECTED)] = power_stats(data["ch_power"][data["selected"]])
        sel_counts[l] += data["selected"].sum(axis=0)
        sel_totals[l] += data["selected"].shape[0]
        direct_sums[l].append(data["direct"])
        bad = ~np.isfinite(data["mr_power"]) | ~np.all(np.isfinite(data["ch_power"]), axis=1)
        outages += int(bad.sum())

    selection = {l: {j + 1: float(sel_counts[l][j] / sel_totals[l]) for j in range(n_ch)} for l in cfg.l_sweep}
    mean_direct = {}
    for l in cfg.l_sweep:
        d = np.concatenate(direct_sums[l])
        mean_direct[l] = {j + 1: float(np.mean(d[:, j])) for j in range(n_ch)}
    return MetricsReport(
        config=cfg,
        node_names=names,
        powers=powers,
        selection=selection,
        mean_direct_gain=mean_direct,
        baseline=non_fading_baseline(cfg.topology, cfg.p_ref, cfg.alpha),
        outage_count=outages,
    )


def _require_trials(report: MetricsReport) -> None:
    if report.config.trials < MIN_TREND_TRIALS:
        raise DomainError(f"trend checks need >= {MIN_TREND_TRIALS} trials, got {report.config.trials}")


def check_k_trend(report: MetricsReport) -> TrendCheck:
    """Mean selected-CH power does not rise with K beyond CI overlap."""
    ks = sorted(report.config.k_sweep)
    if len(ks) < 2:
        raise DomainError("K trend needs at least two K values")
    _require_trials(report)
    bad = []
    for l in report.config.l_sweep:
        for k0, k1 in zip(ks, ks[1:]):
            a, b = report.power(k0, l, SELECTED), report.power(k1, l, SELECTED)
            if b.trimmed_mean > a.trimmed_mean and not a.overlaps(b):
                bad.append(f"L={l}: K={k0}->{k1} rose {a.trimmed_mean:.3e}->{b.trimmed_mean:.3e}")
    detail = "; ".join(bad) if bad else f"non-increasing over K={ks} for L={list(report.config.l_sweep)}"
    return TrendCheck("selected-CH power vs K", not bad, detail)


def check_l_trend(report: MetricsReport) -> TrendCheck:
    """Mean MR power does not fall with L beyond CI overlap, at every K."""
    ls = sorted(report.config.l_sweep)
    if len(ls) < 2:
        raise DomainError("L trend needs at least two L values")
    _require_trials(report)
    bad = []
    for k in report.config.k_sweep:
        for l0, l1 in zip(ls, ls[1:]):
            a, b = report.power(k, l0, "MR"), report.power(k, l1, "MR")
            if b.trimmed_mean < a.trimmed_mean and not a.overlaps(b):
                bad.append(f"K={k}: L={l0}->{l1} fell {a.trimmed_mean:.3e}->{b.trimmed_mean:.3e}")
    detail = "; ".join(bad) if bad else f"non-decreasing over L={ls} for K={list(report.config.k_sweep)}"
    return TrendCheck("MR power vs L", not bad, detail)


def check_selection_trend(report: MetricsReport) -> TrendCheck:
    """The CH with the weakest mean direct gain is the most often selected."""
    _require_trials(report)
    n_ch = report.config.topology.n_chs
    bad, notes = [], []
    for l in sorted(report.config.l_sweep):
        probs = report.selection[l]
        if l >= n_ch:
            notes.append(f"L={l}: all CHs selected (vacuous)")
            continue
        gains = report.mean_direct_gain[l]
        worst = min(gains, key=lambda j: (gains[j], j))
        others = [probs[j] for j in probs if j != worst]
        if probs[worst] > max(others):
            notes.append(f"L={l}: CH{worst} highest at {probs[worst]:.4f}")
        else:
            bad.append(f"L={l}: CH{worst} at {probs[worst]:.4f} not strictly highest")
    return TrendCheck("weakest CH selected most", not bad, "; ".join(bad or notes))


def summarize_trend(report: MetricsReport) -> list[TrendCheck]:
    """Trend checks for power vs K, MR power vs L and selection frequency."""
    if len(report.config.k_sweep) < 2 or len(report.config.l_sweep) < 2:
        raise DomainError("trend summary needs at least two K values and two L values")
    return [check_k_trend(report), check_l_trend(report), check_selection_trend(report)]


def baseline_crossover(report: MetricsReport, ch_id: int, l: int) -> int | None:
    """Smallest K in the sweep from which CH ``ch_id``'s trimmed-mean CI upper
    bound stays below its non-fading direct baseline, or None."""
    base = report.baseline.ch_direct[ch_id]
    k_star = None
    for k in sorted(report.config.k_sweep, reverse=True):
        if report.power(k, l, f"CH{ch_id}").ci_hi < base:
            k_star = k
        else:
            break
    return k_star

