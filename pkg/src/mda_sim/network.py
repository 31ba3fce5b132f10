"""WSN topology and one coherence block of the relaying protocol."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .channel import LinkFieldSampler, Position, complex_normal, draw_shadowing, link_gain, transmit_power
from .numerics import DomainError
from .planner import LinkState, PlannerConfig, run_exploration, select_position

__all__ = [
    "Topology",
    "ChannelConfig",
    "TrialOutcome",
    "NonFadingBaseline",
    "default_topology",
    "fc_select_chs",
    "run_block",
    "non_fading_baseline",
    "FC_ID",
]

FC_ID = 0
# "far apart compared to the wavelength", as a multiple of it
MIN_SPACING_WAVELENGTHS = 10.0


@dataclass(frozen=True)
class Topology:
    fc: Position
    chs: tuple[Position, ...]
    mr_start: Position
    roi: tuple[float, float] = (120.0, 120.0)
    n_sensors: int = 0  # documentation only; sensors are not simulated

    @property
    def n_chs(self) -> int:
        return len(self.chs)

    def ch(self, ch_id: int) -> Position:
        return self.chs[ch_id - 1]

    def node(self, node_id: int) -> Position:
        return self.fc if node_id == FC_ID else self.ch(node_id)

    def violations(self, wavelength: float | None = None) -> list[str]:
        out = []
        width, height = self.roi
        if self.n_chs < 1:
            out.append("topology needs at least one CH")
        if not (0.0 <= self.mr_start.x <= width and 0.0 <= self.mr_start.y <= height):
            out.append(f"mr_start {tuple(self.mr_start)} lies outside the {width}x{height} ROI")
        if wavelength is not None:
            nodes = [(FC_ID, self.fc)] + [(j + 1, q) for j, q in enumerate(self.chs)]
            floor = MIN_SPACING_WAVELENGTHS * wavelength
            for i, (id_a, a) in enumerate(nodes):
                for id_b, b in nodes[i + 1 :]:
                    if a.distance(b) < floor:
                        out.append(
                            f"nodes {id_a} and {id_b} are {a.distance(b):.4g} m apart, "
                            f"need >= {MIN_SPACING_WAVELENGTHS:g} wavelengths ({floor:.4g} m)"
                        )
            for id_b, b in nodes:
                if b.distance(self.mr_start) <= 0.0:
                    out.append(f"mr_start coincides with node {id_b}")
        return out


def default_topology() -> Topology:
    return Topology(
        fc=Position(60.0, 115.0),
        chs=(Position(10.0, 10.0), Position(60.0, 15.0), Position(110.0, 40.0)),
        mr_start=Position(60.0, 60.0),
        roi=(120.0, 120.0),
        n_sensors=300,
    )


@dataclass(frozen=True)
class ChannelConfig:
    p_ref: float = 1e-6
    shadow_var_db: float = 1.0
    estimation_noise_var: float = 0.0


@dataclass
class TrialOutcome:
    selected_chs: frozenset[int]
    mr_position: Position
    ch_power: dict[int, float]
    mr_power: float
    min_gain_selected: float
    # gain of the link each CH actually used, and the MR->FC gain
    ch_gain: dict[int, float] = field(default_factory=dict)
    mr_gain: float = 0.0
    direct_gains: dict[int, float] = field(default_factory=dict)
    stop_index: int = 1

    @property
    def outage(self) -> bool:
        return not (math.isfinite(self.mr_power) and all(math.isfinite(v) for v in self.ch_power.values()))


@dataclass(frozen=True)
class NonFadingBaseline:
    """Pathloss-only powers with the MR parked at its start point."""

    ch_direct: dict[int, float]
    ch_relay: dict[int, float]
    mr: float

    def as_dict(self) -> dict[str, float]:
        out = {f"CH{j}_fc": p for j, p in self.ch_direct.items()}
        out.update({f"CH{j}_mr": p for j, p in self.ch_relay.items()})
        out["MR"] = self.mr
        return out


def fc_select_chs(direct_gains: Mapping[int, float], l_links: int) -> frozenset[int]:
    """Ids of the ``l_links`` weakest direct links; lower id wins ties."""
    if l_links > len(direct_gains):
        raise DomainError(f"cannot select {l_links} of {len(direct_gains)} CHs")
    if l_links < 1:
        raise DomainError(f"l_links must be >= 1, got {l_links}")
    ranked = sorted(direct_gains, key=lambda j: (direct_gains[j], j))
    return frozenset(ranked[:l_links])


def run_block(topo: Topology, cfg: PlannerConfig, chan: ChannelConfig, rng: np.random.Generator) -> TrialOutcome:
    """Simulate one coherence block.

    Random draws happen in a fixed order (direct links, relay shadowing,
    one child stream per relay fading field) so an outcome depends only on
    the state of ``rng``.
    """
    if cfg.l_links > topo.n_chs:
        raise DomainError(f"l_links ({cfg.l_links}) exceeds the number of CHs ({topo.n_chs})")
    ch_ids = range(1, topo.n_chs + 1)

    direct = {}
    for j in ch_ids:
        s = draw_shadowing(chan.shadow_var_db, rng)
        h = complex_normal(rng)
        direct[j] = link_gain(s, h, topo.ch(j).distance(topo.fc), cfg.alpha)
    selected = fc_select_chs(direct, cfg.l_links)

    link_ids = [FC_ID] + sorted(selected)
    links = [
        LinkState(id=j, s=draw_shadowing(chan.shadow_var_db, rng).s, dist=topo.node(j).distance(topo.mr_start))
        for j in link_ids
    ]
    streams = rng.spawn(len(link_ids))
    fields = {
        j: LinkFieldSampler(topo.node(j), cfg.wavelength, stream, capacity=cfg.k_points)
        for j, stream in zip(link_ids, streams)
    }
    records = run_exploration(topo.mr_start, links, fields, cfg, rng, chan.estimation_noise_var)
    chosen = select_position(records)

    # powers follow the true channel at the chosen point
    true_gain = {
        link.id: link_gain(link.s, fields[link.id].sample_at(chosen.position), link.dist, cfg.alpha) for link in links
    }
    ch_gain = {j: (true_gain[j] if j in selected else direct[j]) for j in ch_ids}
    return TrialOutcome(
        selected_chs=selected,
        mr_position=chosen.position,
        ch_power={j: transmit_power(g, chan.p_ref) for j, g in ch_gain.items()},
        mr_power=transmit_power(true_gain[FC_ID], chan.p_ref),
        min_gain_selected=min(true_gain.values()),
        ch_gain=ch_gain,
        mr_gain=true_gain[FC_ID],
        direct_gains=direct,
        stop_index=chosen.index,
    )


def non_fading_baseline(topo: Topology, p_ref: float, alpha: float) -> NonFadingBaseline:
    """Transmit powers with unit shadowing and fading."""
    ch_direct = {}
    ch_relay = {}
    for j in range(1, topo.n_chs + 1):
        q = topo.ch(j)
        ch_direct[j] = transmit_power(link_gain(1.0, 1.0, q.distance(topo.fc), alpha), p_ref)
        ch_relay[j] = transmit_power(link_gain(1.0, 1.0, q.distance(topo.mr_start), alpha), p_ref)
    mr = transmit_power(link_gain(1.0, 1.0, topo.mr_start.distance(topo.fc), alpha), p_ref)
    return NonFadingBaseline(ch_direct, ch_relay, mr)
