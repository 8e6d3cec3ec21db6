"""+Grid ISL topology, link budgets, and timestamped graph snapshots.

Each satellite carries exactly four ISL terminals in a fixed channel
order: intra-plane successor, intra-plane predecessor, inter-plane east
(next plane), inter-plane west (previous plane). Edge activity follows a
pure line-of-sight rule against a grazing-altitude margin; active links
get a Shannon spectral efficiency from a free-space link budget.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .constants import BOLTZMANN_J_PER_K, LIGHT_SPEED_KM_S
from .orbits import ShellConfig, shell_positions

__all__ = [
    "CH_INTRA_SUCC",
    "CH_INTRA_PRED",
    "CH_INTER_EAST",
    "CH_INTER_WEST",
    "SE_MAX",
    "NUM_FEATURES",
    "DYNAMIC_CHANNELS",
    "IslEdge",
    "LinkBudget",
    "GraphSnapshot",
    "build_plus_grid",
    "edge_geometry",
    "max_isl_range_km",
    "line_of_sight",
    "free_space_path_loss_db",
    "spectral_efficiency",
    "snapshot",
    "normalized_adjacency",
    "mask_features",
]

# Per-node ISL channel slots.
CH_INTRA_SUCC = 0
CH_INTRA_PRED = 1
CH_INTER_EAST = 2
CH_INTER_WEST = 3

SE_MAX = 15.0
"""Normalization ceiling for spectral-efficiency feature channels, bits/s/Hz."""

# Node feature layout (columns of X):
#   0 sin(lat), 1 sin(lon), 2 cos(lon), 3 alt/1000 km, 4 queue/B,
#   5..8 per-channel SE / SE_MAX, 9 mask indicator.
F_SIN_LAT = 0
F_SIN_LON = 1
F_COS_LON = 2
F_ALT = 3
F_QUEUE = 4
F_SE0 = 5
F_MASK = 9
NUM_FEATURES = 10
DYNAMIC_CHANNELS = (F_QUEUE, F_SE0, F_SE0 + 1, F_SE0 + 2, F_SE0 + 3)
"""Columns a forecaster predicts: queue plus the four SE channels."""


@dataclass(frozen=True)
class IslEdge:
    """One ISL between flat ids ``u < v``.

    ``channel_u``/``channel_v`` give the edge's slot in each endpoint's
    channel order; geometry fields are zero until filled for a concrete
    time by :func:`edge_geometry`.
    """

    u: int
    v: int
    kind: str  # "intra" | "inter"
    channel_u: int
    channel_v: int
    distance_km: float = 0.0
    spectral_efficiency: float = 0.0
    active: bool = False


@dataclass(frozen=True)
class LinkBudget:
    """Free-space RF link budget for ISLs."""

    carrier_freq_ghz: float = 23.0
    bandwidth_hz: float = 1e9
    eirp_dbw: float = 75.0
    rx_gain_dbi: float = 40.0
    system_temp_k: float = 500.0
    atmosphere_margin_km: float = 80.0

    def __post_init__(self) -> None:
        for name in ("carrier_freq_ghz", "bandwidth_hz", "system_temp_k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.atmosphere_margin_km < 0:
            raise ValueError("atmosphere_margin_km must be >= 0")

    def fingerprint(self) -> dict:
        return {
            "carrier_freq_ghz": self.carrier_freq_ghz,
            "bandwidth_hz": self.bandwidth_hz,
            "eirp_dbw": self.eirp_dbw,
            "rx_gain_dbi": self.rx_gain_dbi,
            "system_temp_k": self.system_temp_k,
            "atmosphere_margin_km": self.atmosphere_margin_km,
        }


@dataclass(frozen=True)
class GraphSnapshot:
    """One timestamped graph of the shell.

    ``x`` is the N x 10 node feature matrix in canonical flat-id order;
    ``edges`` stays in canonical order (intra sorted by (plane, slot),
    then inter sorted likewise). ``mask`` marks nodes whose features were
    hidden; masked rows of ``x`` are zero except the indicator column.
    """

    t: float
    shell: ShellConfig
    x: np.ndarray
    edges: Tuple[IslEdge, ...]
    mask: np.ndarray

    def __post_init__(self) -> None:
        n = self.shell.num_sats
        if self.x.shape != (n, NUM_FEATURES):
            raise ValueError(f"feature matrix must be {(n, NUM_FEATURES)}, got {self.x.shape}")
        if not np.isfinite(self.x).all():
            raise ValueError("node features must be finite")
        self.x.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.shell.num_sats

    def dynamic_targets(self) -> np.ndarray:
        """N x 5 matrix of the dynamic channels (queue + four SEs)."""
        return np.ascontiguousarray(self.x[:, list(DYNAMIC_CHANNELS)])

    def queues(self, buffer_pkts: float) -> np.ndarray:
        """Recover raw queue lengths from the normalized feature column."""
        return self.x[:, F_QUEUE] * buffer_pkts


@functools.lru_cache(maxsize=32)
def build_plus_grid(shell: ShellConfig) -> Tuple[IslEdge, ...]:
    """Geometry-free +Grid skeleton in canonical edge order.

    Intra-plane ring edges (p, s)-(p, s+1 mod Q) for every plane, then
    inter-plane edges (p, s)-(p+1 mod P, s); the seam wrap P-1 -> 0 is
    dropped when the shell has ``seam_links=False``.
    """
    p_count, q_count = shell.num_planes, shell.sats_per_plane
    edges = []
    for p in range(p_count):
        for s in range(q_count):
            a = shell.flat_id(p, s)
            b = shell.flat_id(p, (s + 1) % q_count)
            ch_a, ch_b = CH_INTRA_SUCC, CH_INTRA_PRED
            if a > b:
                a, b, ch_a, ch_b = b, a, ch_b, ch_a
            edges.append(IslEdge(a, b, "intra", ch_a, ch_b))
    for p in range(p_count):
        if p == p_count - 1 and not shell.seam_links:
            continue
        for s in range(q_count):
            a = shell.flat_id(p, s)
            b = shell.flat_id((p + 1) % p_count, s)
            ch_a, ch_b = CH_INTER_EAST, CH_INTER_WEST
            if a > b:
                a, b, ch_a, ch_b = b, a, ch_b, ch_a
            edges.append(IslEdge(a, b, "inter", ch_a, ch_b))
    return tuple(edges)


def edge_geometry(edges: Sequence[IslEdge], positions: np.ndarray) -> Tuple[IslEdge, ...]:
    """Fill Euclidean ECI distances from an (N, 3) position array."""
    out = []
    for e in edges:
        d = float(np.linalg.norm(positions[e.u] - positions[e.v]))
        out.append(replace(e, distance_km=d))
    return tuple(out)


def max_isl_range_km(shell: ShellConfig, budget: LinkBudget) -> float:
    """Longest line-of-sight chord clearing the grazing-altitude shell."""
    a = shell.semi_major_axis_km
    from .constants import EARTH_RADIUS_KM

    r_min = EARTH_RADIUS_KM + budget.atmosphere_margin_km
    if r_min >= a:
        return 0.0
    return 2.0 * math.sqrt(a * a - r_min * r_min)


def line_of_sight(distance_km: float, shell: ShellConfig, budget: LinkBudget) -> bool:
    """Whether a chord of this length clears the atmosphere margin."""
    if distance_km <= 0:
        raise ValueError(f"distance_km must be > 0, got {distance_km}")
    return distance_km <= max_isl_range_km(shell, budget)


def free_space_path_loss_db(distance_km: float, carrier_freq_ghz: float) -> float:
    """FSPL = 20 log10(4 pi d f / c), everything in SI units."""
    d_m = distance_km * 1e3
    f_hz = carrier_freq_ghz * 1e9
    c_m = LIGHT_SPEED_KM_S * 1e3
    return 20.0 * math.log10(4.0 * math.pi * d_m * f_hz / c_m)


def spectral_efficiency(distance_km: float, budget: LinkBudget) -> float:
    """Shannon spectral efficiency log2(1 + SNR) of an active link."""
    if distance_km <= 0:
        raise ValueError(f"distance_km must be > 0, got {distance_km}")
    fspl = free_space_path_loss_db(distance_km, budget.carrier_freq_ghz)
    noise_dbw = 10.0 * math.log10(
        BOLTZMANN_J_PER_K * budget.system_temp_k * budget.bandwidth_hz
    )
    snr_db = budget.eirp_dbw + budget.rx_gain_dbi - fspl - noise_dbw
    return math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def snapshot(
    shell: ShellConfig,
    t: float,
    queues: np.ndarray,
    budget: LinkBudget,
    buffer_pkts: float,
) -> GraphSnapshot:
    """Assemble the graph at time ``t`` from current queue lengths.

    ``buffer_pkts`` is the queue capacity used both for validation and
    for normalizing the queue feature column.
    """
    n = shell.num_sats
    queues = np.asarray(queues, dtype=float)
    if queues.shape != (n,):
        raise ValueError(f"queues must have shape ({n},), got {queues.shape}")
    if np.any(queues < 0) or np.any(queues > buffer_pkts):
        raise ValueError("queue values must lie in [0, buffer_pkts]")

    eci, geo = shell_positions(shell, t)
    edges = edge_geometry(build_plus_grid(shell), eci)
    d_max = max_isl_range_km(shell, budget)
    filled = []
    for e in edges:
        active = e.distance_km <= d_max
        se = spectral_efficiency(e.distance_km, budget) if active else 0.0
        filled.append(replace(e, spectral_efficiency=se, active=active))

    lat = np.radians(geo[:, 0])
    lon = np.radians(geo[:, 1])
    x = np.zeros((n, NUM_FEATURES))
    x[:, F_SIN_LAT] = np.sin(lat)
    x[:, F_SIN_LON] = np.sin(lon)
    x[:, F_COS_LON] = np.cos(lon)
    x[:, F_ALT] = geo[:, 2] / 1000.0
    x[:, F_QUEUE] = queues / buffer_pkts
    for e in filled:
        se_norm = e.spectral_efficiency / SE_MAX
        x[e.u, F_SE0 + e.channel_u] = se_norm
        x[e.v, F_SE0 + e.channel_v] = se_norm
    return GraphSnapshot(t, shell, x, tuple(filled), np.zeros(n, dtype=bool))


def normalized_adjacency(snap: GraphSnapshot) -> np.ndarray:
    """Self-loop renormalized adjacency D^-1/2 (A + I) D^-1/2.

    A uses only active edges; degrees are taken from A + I, so isolated
    nodes keep their own features with unit weight.
    """
    n = snap.num_nodes
    a = np.zeros((n, n))
    for e in snap.edges:
        if e.active:
            a[e.u, e.v] = 1.0
            a[e.v, e.u] = 1.0
    a += np.eye(n)
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def mask_features(snap: GraphSnapshot, rate: float, seed: int) -> GraphSnapshot:
    """Hide a random node subset: zero their rows, raise the indicator.

    Exactly ``round(rate * N)`` nodes are drawn without replacement by a
    generator seeded with ``seed``, so the selection is reproducible per
    (seed, rate, N).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"mask rate must lie in [0, 1), got {rate}")
    n = snap.num_nodes
    k = round(rate * n)
    if k == 0:
        return snap
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    x = snap.x.copy()
    x[mask, :] = 0.0
    x[mask, F_MASK] = 1.0
    return GraphSnapshot(snap.t, snap.shell, x, snap.edges, mask)
