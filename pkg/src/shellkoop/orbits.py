"""Walker-Delta shell geometry and circular-orbit propagation.

A shell is ``P`` evenly spaced orbital planes (RAAN spread over 360 deg)
with ``Q`` satellites per plane and an inter-plane phasing factor ``F``.
Orbits are circular at a single altitude; Earth is spherical. Under those
assumptions every position is an exact closed form of time, which keeps
the geometry strictly periodic and the tests exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import EARTH_RADIUS_KM, EARTH_ROTATION_RAD_S, MU_EARTH

__all__ = [
    "ShellConfig",
    "SatelliteIndex",
    "EciState",
    "GeodeticPosition",
    "mean_motion",
    "orbital_period",
    "satellite_position",
    "eci_to_geodetic",
    "shell_positions",
    "propagate_shell",
]


@dataclass(frozen=True)
class ShellConfig:
    """Static geometry of one orbital shell.

    ``phasing`` is the Walker F factor: satellite slots in adjacent planes
    are offset by ``2*pi*F/(P*Q)`` in argument of latitude. ``seam_links``
    controls whether inter-plane ISLs wrap from plane P-1 back to plane 0.
    """

    altitude_km: float
    inclination_deg: float
    num_planes: int
    sats_per_plane: int
    phasing: int = 0
    seam_links: bool = True

    def __post_init__(self) -> None:
        if self.altitude_km <= 0:
            raise ValueError(f"altitude_km must be > 0, got {self.altitude_km}")
        if self.num_planes < 3:
            raise ValueError(f"num_planes must be >= 3, got {self.num_planes}")
        if self.sats_per_plane < 3:
            raise ValueError(f"sats_per_plane must be >= 3, got {self.sats_per_plane}")
        if not 0 <= self.phasing < self.num_planes:
            raise ValueError(
                f"phasing must lie in [0, {self.num_planes - 1}], got {self.phasing}"
            )

    @property
    def num_sats(self) -> int:
        return self.num_planes * self.sats_per_plane

    @property
    def semi_major_axis_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    def flat_id(self, plane: int, slot: int) -> int:
        """Canonical node id: plane-major ordering."""
        return plane * self.sats_per_plane + slot

    def sat_index(self, flat_id: int) -> "SatelliteIndex":
        plane, slot = divmod(flat_id, self.sats_per_plane)
        if not 0 <= plane < self.num_planes:
            raise ValueError(f"flat id {flat_id} outside shell of {self.num_sats} sats")
        return SatelliteIndex(plane, slot)

    def satellites(self):
        """All satellite indices in canonical flat-id order."""
        for p in range(self.num_planes):
            for s in range(self.sats_per_plane):
                yield SatelliteIndex(p, s)

    def fingerprint(self) -> dict:
        """JSON-ready identity used to match models to shells."""
        return {
            "altitude_km": self.altitude_km,
            "inclination_deg": self.inclination_deg,
            "num_planes": self.num_planes,
            "sats_per_plane": self.sats_per_plane,
            "phasing": self.phasing,
            "seam_links": self.seam_links,
        }


class SatelliteIndex(NamedTuple):
    """(plane, slot) identity of one satellite."""

    plane: int
    slot: int


class EciState(NamedTuple):
    """Earth-centered inertial position, km."""

    x: float
    y: float
    z: float


class GeodeticPosition(NamedTuple):
    """Spherical-Earth geodetic coordinates: deg, deg, km."""

    lat_deg: float
    lon_deg: float
    alt_km: float


def mean_motion(shell: ShellConfig) -> float:
    """Angular rate ``n = sqrt(mu / a^3)`` in rad/s."""
    a = shell.semi_major_axis_km
    return math.sqrt(MU_EARTH / a**3)


def orbital_period(shell: ShellConfig) -> float:
    """Orbital period ``2*pi/n`` in seconds."""
    return 2.0 * math.pi / mean_motion(shell)


def _angles(shell: ShellConfig, plane: np.ndarray, slot: np.ndarray, t: float):
    """RAAN and argument-of-latitude for the given (plane, slot) arrays."""
    p_count = shell.num_planes
    q_count = shell.sats_per_plane
    raan = 2.0 * math.pi * plane / p_count
    arg_lat = (
        2.0 * math.pi * slot / q_count
        + 2.0 * math.pi * shell.phasing * plane / (p_count * q_count)
        + mean_motion(shell) * t
    )
    return raan, arg_lat


def satellite_position(shell: ShellConfig, sat: SatelliteIndex, t: float) -> EciState:
    """ECI position of one satellite at time ``t`` seconds."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    raan, u = _angles(shell, np.asarray(sat.plane), np.asarray(sat.slot), t)
    a = shell.semi_major_axis_km
    inc = math.radians(shell.inclination_deg)
    cu, su = math.cos(float(u)), math.sin(float(u))
    co, so = math.cos(float(raan)), math.sin(float(raan))
    ci = math.cos(inc)
    return EciState(
        a * (cu * co - su * so * ci),
        a * (cu * so + su * co * ci),
        a * su * math.sin(inc),
    )


def _wrap_lon_deg(lon: np.ndarray) -> np.ndarray:
    """Wrap longitudes into [-180, 180)."""
    return (lon + 180.0) % 360.0 - 180.0


def eci_to_geodetic(state: EciState, t: float) -> GeodeticPosition:
    """Rotate ECI into ECEF by the accumulated Earth angle, then convert.

    Spherical latitude (not ellipsoidal): lat = asin(z/r).
    """
    x, y, z = state
    r = math.sqrt(x * x + y * y + z * z)
    if r <= EARTH_RADIUS_KM:
        raise ValueError(f"position norm {r} km is below the Earth surface")
    theta = EARTH_ROTATION_RAD_S * t
    ct, st = math.cos(theta), math.sin(theta)
    # ECEF = Rz(-theta) @ ECI
    xe = ct * x + st * y
    ye = -st * x + ct * y
    lat = math.degrees(math.asin(z / r))
    lon = float(_wrap_lon_deg(np.asarray(math.degrees(math.atan2(ye, xe)))))
    return GeodeticPosition(lat, lon, r - EARTH_RADIUS_KM)


def shell_positions(shell: ShellConfig, t: float):
    """Vectorized propagation of the whole shell.

    Returns ``(eci, geodetic)``: an (N, 3) ECI array in km and an (N, 3)
    array of (lat_deg, lon_deg, alt_km), both in canonical flat-id order.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    q_count = shell.sats_per_plane
    ids = np.arange(shell.num_sats)
    plane, slot = np.divmod(ids, q_count)
    raan, u = _angles(shell, plane, slot, t)
    a = shell.semi_major_axis_km
    inc = math.radians(shell.inclination_deg)
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(raan), np.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    eci = np.empty((shell.num_sats, 3))
    eci[:, 0] = a * (cu * co - su * so * ci)
    eci[:, 1] = a * (cu * so + su * co * ci)
    eci[:, 2] = a * su * si

    theta = EARTH_ROTATION_RAD_S * t
    ct, st = math.cos(theta), math.sin(theta)
    xe = ct * eci[:, 0] + st * eci[:, 1]
    ye = -st * eci[:, 0] + ct * eci[:, 1]
    r = np.linalg.norm(eci, axis=1)
    geo = np.empty((shell.num_sats, 3))
    geo[:, 0] = np.degrees(np.arcsin(eci[:, 2] / r))
    geo[:, 1] = _wrap_lon_deg(np.degrees(np.arctan2(ye, xe)))
    geo[:, 2] = r - EARTH_RADIUS_KM
    return eci, geo


def propagate_shell(shell: ShellConfig, t: float):
    """Per-satellite states at time ``t`` in canonical flat-id order.

    Returns a list of ``(SatelliteIndex, EciState, GeodeticPosition)``.
    """
    eci, geo = shell_positions(shell, t)
    out = []
    for fid, sat in enumerate(shell.satellites()):
        out.append(
            (
                sat,
                EciState(*(float(v) for v in eci[fid])),
                GeodeticPosition(*(float(v) for v in geo[fid])),
            )
        )
    return out
