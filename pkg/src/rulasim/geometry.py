"""Device placement, positioning error, and AP-relative geometry.

Positions are (..., 2) arrays of x/y coordinates in meters. Azimuths are
measured in the horizontal plane from the AP's reference x-axis; the
effective azimuth subtracts the array rotation and is wrapped to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GeometryError


def wrap_angle(angle):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


@dataclass
class Placement:
    """True and estimated device coordinates plus AP location and heights."""

    true_xy: np.ndarray          # (K, 2)
    est_xy: np.ndarray           # (K, 2)
    ap_xy: np.ndarray            # (2,)
    ap_height: float
    device_height: float

    def __post_init__(self):
        self.true_xy = np.atleast_2d(np.asarray(self.true_xy, dtype=float))
        self.est_xy = np.atleast_2d(np.asarray(self.est_xy, dtype=float))
        self.ap_xy = np.asarray(self.ap_xy, dtype=float)
        if self.true_xy.shape != self.est_xy.shape or self.true_xy.shape[1] != 2:
            raise ConfigurationError("true/estimated positions must both be (K, 2)")
        if self.true_xy.shape[0] < 1:
            raise ConfigurationError("placement needs at least one device")
        if self.ap_height <= 0 or self.device_height <= 0:
            raise ConfigurationError("heights must be positive")

    @property
    def k_users(self) -> int:
        return self.true_xy.shape[0]


@dataclass
class Geometry:
    """Distances and azimuths of each device relative to the (rotated) array."""

    distances_3d: np.ndarray       # (K,)
    global_azimuths: np.ndarray    # (K,), radians in (-pi, pi]
    effective_azimuths: np.ndarray  # (K,), radians in (-pi, pi]


def place_devices(count: int, side: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` device positions uniformly over the [0, side]^2 area."""
    if count < 1:
        raise ConfigurationError("device count must be >= 1")
    if side <= 0:
        raise ConfigurationError("area side must be positive")
    return rng.uniform(0.0, side, size=(count, 2))


def apply_positioning_error(true_pos: np.ndarray, sigma_e_sq: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Corrupt positions with i.i.d. zero-mean Gaussian error of variance
    ``sigma_e_sq`` per coordinate; the estimate is true minus the error draw."""
    if sigma_e_sq < 0:
        raise ConfigurationError("positioning error variance must be >= 0")
    true_pos = np.asarray(true_pos, dtype=float)
    err = math.sqrt(sigma_e_sq) * rng.standard_normal(true_pos.shape)
    return true_pos - err


def compute_geometry(placement: Placement, use_estimates: bool = False,
                     theta: float = 0.0) -> Geometry:
    """3D distances and azimuths of all devices, relative to a rotation ``theta``."""
    if not (0.0 <= theta <= math.pi):
        raise ConfigurationError("rotation must lie in [0, pi]")
    xy = placement.est_xy if use_estimates else placement.true_xy
    delta = xy - placement.ap_xy[None, :]
    horizontal = np.hypot(delta[:, 0], delta[:, 1])
    height_gap = placement.ap_height - placement.device_height
    dist = np.sqrt(horizontal ** 2 + height_gap ** 2)
    if np.any(dist == 0.0):
        raise GeometryError("device coincides with the AP")
    # atan2(0, 0) = 0 covers the zero-horizontal-offset convention
    alphas = np.arctan2(delta[:, 1], delta[:, 0])
    return Geometry(
        distances_3d=dist,
        global_azimuths=wrap_angle(alphas),
        effective_azimuths=wrap_angle(alphas - theta),
    )
