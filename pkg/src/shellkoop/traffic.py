"""Coverage-driven queue dynamics and dataset generation.

Arrivals follow a smooth field: a base rate plus Gaussian bumps centered
on ground hotspots, evaluated at each satellite's sub-satellite point.
Drain is proportional to the total spectral efficiency of a node's active
ISLs, so congestion and link state stay correlated. Mean arrivals are
deterministic with optional additive Gaussian noise, keeping the queue
trajectories quasi-periodic and the whole generator reproducible per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .orbits import ShellConfig
from .topology import F_COS_LON, F_SIN_LAT, F_SIN_LON, GraphSnapshot, LinkBudget, snapshot

__all__ = [
    "Hotspot",
    "TrafficConfig",
    "Dataset",
    "DESK_HOTSPOTS",
    "great_circle_deg",
    "arrival_rate",
    "step_queues",
    "generate_dataset",
]


@dataclass(frozen=True)
class Hotspot:
    """Gaussian traffic bump fixed to the rotating Earth."""

    lat_deg: float
    lon_deg: float
    rate: float  # peak extra arrivals, pkts/step
    width_deg: float  # Gaussian sigma in great-circle degrees

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("hotspot rate must be >= 0")
        if self.width_deg <= 0:
            raise ValueError("hotspot width_deg must be > 0")


# Four large metro areas: New York, London, Tokyo, Sao Paulo.
DESK_HOTSPOTS: Tuple[Hotspot, ...] = (
    Hotspot(40.7, -74.0, 30.0, 12.0),
    Hotspot(51.5, -0.1, 30.0, 12.0),
    Hotspot(35.7, 139.7, 30.0, 12.0),
    Hotspot(-23.5, -46.6, 30.0, 12.0),
)


@dataclass(frozen=True)
class TrafficConfig:
    """Arrival/service process parameters for one shell."""

    dt_s: float = 60.0
    hotspots: Tuple[Hotspot, ...] = DESK_HOTSPOTS
    base_rate: float = 2.0
    drain_coeff: float = 0.14  # pkts per (bit/s/Hz of active SE) per step
    buffer_pkts: float = 1000.0
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dt_s <= 0:
            raise ValueError("dt_s must be > 0")
        if self.base_rate < 0 or self.drain_coeff < 0 or self.noise_std < 0:
            raise ValueError("rates must be >= 0")
        if self.buffer_pkts <= 0:
            raise ValueError("buffer_pkts must be > 0")


@dataclass(frozen=True)
class Dataset:
    """Ordered snapshot sequence with a train/validation split."""

    snapshots: Tuple[GraphSnapshot, ...]
    split: int  # train prefix length
    dt_s: float
    buffer_pkts: float
    se_max: float
    shell: ShellConfig = None
    budget: LinkBudget = None

    def __post_init__(self) -> None:
        if not 0 < self.split < len(self.snapshots):
            raise ValueError(
                f"split {self.split} must lie strictly inside (0, {len(self.snapshots)})"
            )

    @property
    def train(self) -> Tuple[GraphSnapshot, ...]:
        return self.snapshots[: self.split]

    @property
    def validation(self) -> Tuple[GraphSnapshot, ...]:
        return self.snapshots[self.split :]


def great_circle_deg(lat1, lon1, lat2, lon2):
    """Central angle between two geodetic points, in degrees (haversine)."""
    p1, l1 = np.radians(lat1), np.radians(lon1)
    p2, l2 = np.radians(lat2), np.radians(lon2)
    s = np.sqrt(
        np.sin((p2 - p1) / 2.0) ** 2
        + np.cos(p1) * np.cos(p2) * np.sin((l2 - l1) / 2.0) ** 2
    )
    return np.degrees(2.0 * np.arcsin(np.clip(s, 0.0, 1.0)))


def arrival_rate(lat_deg, lon_deg, cfg: TrafficConfig):
    """Mean packet arrivals per step at the given sub-satellite point(s)."""
    rate = np.full_like(np.asarray(lat_deg, dtype=float), cfg.base_rate)
    for h in cfg.hotspots:
        delta = great_circle_deg(lat_deg, lon_deg, h.lat_deg, h.lon_deg)
        rate = rate + h.rate * np.exp(-(delta**2) / (2.0 * h.width_deg**2))
    return rate


def _node_latlon(snap: GraphSnapshot):
    """Recover geodetic lat/lon (deg) from the encoded feature columns."""
    lat = np.degrees(np.arcsin(np.clip(snap.x[:, F_SIN_LAT], -1.0, 1.0)))
    lon = np.degrees(np.arctan2(snap.x[:, F_SIN_LON], snap.x[:, F_COS_LON]))
    return lat, lon


def _active_se_sum(snap: GraphSnapshot) -> np.ndarray:
    """Total spectral efficiency of each node's active incident links."""
    total = np.zeros(snap.num_nodes)
    for e in snap.edges:
        if e.active:
            total[e.u] += e.spectral_efficiency
            total[e.v] += e.spectral_efficiency
    return total


def step_queues(
    queues: np.ndarray,
    snap: GraphSnapshot,
    cfg: TrafficConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """One discrete step: add arrivals, subtract drain, clamp to [0, B].

    Pass a persistent ``rng`` to draw a deterministic noise sequence over
    a whole trajectory; by default a fresh generator is seeded from the
    config, which makes a single call reproducible on its own.
    """
    queues = np.asarray(queues, dtype=float)
    if np.any(queues < 0) or np.any(queues > cfg.buffer_pkts):
        raise ValueError("queues out of [0, buffer_pkts]")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lat, lon = _node_latlon(snap)
    arrivals = arrival_rate(lat, lon, cfg)
    if cfg.noise_std > 0:
        arrivals = arrivals + rng.normal(0.0, cfg.noise_std, size=queues.shape)
    drain = cfg.drain_coeff * _active_se_sum(snap)
    return np.clip(queues + arrivals - drain, 0.0, cfg.buffer_pkts)


def generate_dataset(
    shell: ShellConfig,
    cfg: TrafficConfig,
    budget: LinkBudget,
    t_total: int,
    split_frac: float,
) -> Dataset:
    """Simulate ``t_total`` steps and split into train prefix / validation suffix.

    Queues start at B/10; each snapshot stores the pre-step queue state.
    The whole run is a pure function of (shell, cfg, budget, t_total).
    """
    if t_total < 10:
        raise ValueError(f"t_total must be >= 10, got {t_total}")
    if not 0.0 < split_frac < 1.0:
        raise ValueError(f"split_frac must lie in (0, 1), got {split_frac}")
    from .topology import SE_MAX

    rng = np.random.default_rng(cfg.seed)
    queues = np.full(shell.num_sats, cfg.buffer_pkts / 10.0)
    snaps = []
    for k in range(t_total):
        snap = snapshot(shell, k * cfg.dt_s, queues, budget, cfg.buffer_pkts)
        snaps.append(snap)
        queues = step_queues(queues, snap, cfg, rng)
    split = round(split_frac * t_total)
    return Dataset(tuple(snaps), split, cfg.dt_s, cfg.buffer_pkts, SE_MAX, shell, budget)
