"""Experiment configuration: dataclasses, derived link budget, JSON loading."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299792458.0

SCHEMES = ("MRC", "ZF", "MMSE")
ARRAY_MODES = ("rotary", "static")
SWEEP_AXES = ("M", "K", "kappa_db", "sigma_e_sq_db")


def db_to_linear(db: float) -> float:
    """10^(dB/10); -inf maps to 0."""
    return 10.0 ** (db / 10.0)


@dataclass
class ScatteringConfig:
    """Local-scattering layout: cluster count, nominal-angle window, angular spread.

    ``frame`` selects how cluster angles behave under array rotation:
    "global" draws them once around the device's global azimuth (scatterers
    stay put when the array turns), "array" redraws them around the effective
    azimuth for each rotation in force.
    """

    num_clusters: int = 6
    cluster_spread_deg: float = 40.0
    asd_deg: float = 5.0
    frame: str = "global"

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ConfigurationError("num_clusters must be >= 1")
        if self.cluster_spread_deg < 0 or self.asd_deg < 0:
            raise ConfigurationError("angular spreads must be nonnegative")
        if self.frame not in ("global", "array"):
            raise ConfigurationError(f"unknown scattering frame {self.frame!r}")

    @property
    def cluster_spread(self) -> float:
        return math.radians(self.cluster_spread_deg)

    @property
    def asd(self) -> float:
        return math.radians(self.asd_deg)


@dataclass
class RotationGrid:
    """Evenly spaced inclusive search grid over the rotation range."""

    start: float = 0.0
    end: float = math.pi
    num_points: int = 1801

    def __post_init__(self):
        if self.num_points < 2:
            raise ConfigurationError("rotation grid needs at least 2 points")
        if not (0.0 <= self.start < self.end <= math.pi + 1e-12):
            raise ConfigurationError("rotation grid must satisfy 0 <= start < end <= pi")

    def thetas(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.num_points)


@dataclass
class LinkBudget:
    """Transmit power, noise power and their ratio."""

    tx_power: float
    noise_power: float

    def __post_init__(self):
        if self.tx_power <= 0 or self.noise_power <= 0:
            raise ConfigurationError("powers must be positive")

    @property
    def snr(self) -> float:
        return self.tx_power / self.noise_power


@dataclass
class SimParams:
    """Full experiment configuration.

    Angles are radians, powers Watts, distances meters; ``kappa_db`` and
    ``sigma_e_sq_db`` are converted with 10^(dB/10) (sigma_e_sq_db may be
    -inf for error-free positioning).
    """

    m_antennas: int = 16
    k_users: int = 10
    side: float = 100.0
    tx_power: float = 0.1
    noise_psd: float = 4e-21
    bandwidth: float = 20e6
    noise_figure_db: float = 9.0
    ap_height: float = 12.0
    device_height: float = 1.5
    carrier_freq: float = 3.5e9
    kappa_db: float = 10.0
    sigma_e_sq_db: float = -10.0
    path_loss_exponent: float = 2.5
    ref_distance: float = 1.0
    ap_position: tuple[float, float] | None = None  # None -> area center
    csi_error: bool = True
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)
    grid: RotationGrid = field(default_factory=RotationGrid)
    static_theta: float = math.pi / 2
    n_network_realizations: int = 200
    n_channel_realizations: int = 200
    master_seed: int = 0

    def __post_init__(self):
        if self.m_antennas < 1 or self.k_users < 1:
            raise ConfigurationError("antenna and user counts must be >= 1")
        if self.side <= 0:
            raise ConfigurationError("side must be positive")
        for name in ("tx_power", "noise_psd", "bandwidth", "carrier_freq",
                     "ap_height", "device_height", "ref_distance"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not (0.0 <= self.static_theta <= math.pi):
            raise ConfigurationError("static_theta must lie in [0, pi]")
        if self.n_network_realizations < 1 or self.n_channel_realizations < 1:
            raise ConfigurationError("realization counts must be >= 1")
        if math.isnan(self.sigma_e_sq_db) or math.isnan(self.kappa_db):
            raise ConfigurationError("kappa_db and sigma_e_sq_db must not be NaN")
        if self.master_seed < 0:
            raise ConfigurationError("master_seed must be nonnegative")

    @property
    def kappa(self) -> float:
        return db_to_linear(self.kappa_db)

    @property
    def sigma_e_sq(self) -> float:
        return db_to_linear(self.sigma_e_sq_db)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    def ap_xy(self) -> np.ndarray:
        if self.ap_position is None:
            return np.array([self.side / 2.0, self.side / 2.0])
        return np.asarray(self.ap_position, dtype=float)

    def noise_power(self) -> float:
        """sigma_n^2 = N0 * B * NF (noise figure applied in linear units)."""
        return self.noise_psd * self.bandwidth * db_to_linear(self.noise_figure_db)

    def link_budget(self) -> LinkBudget:
        return LinkBudget(tx_power=self.tx_power, noise_power=self.noise_power())

    def csi_error_variance(self) -> float:
        """Per-entry channel-estimate error variance 1/(K*rho); 0 when disabled."""
        if not self.csi_error:
            return 0.0
        return 1.0 / (self.k_users * self.link_budget().snr)


def noise_power(params: SimParams) -> float:
    return params.noise_power()


def desk_preset(**overrides) -> SimParams:
    """Reduced realization counts for quick desk-scale runs."""
    base = dict(n_network_realizations=50, n_channel_realizations=50)
    base.update(overrides)
    return SimParams(**base)


_NESTED = {"scattering": ScatteringConfig, "grid": RotationGrid}


def params_from_dict(raw: dict) -> SimParams:
    """Build SimParams from a JSON-style dict keyed by field names."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    known = {f.name for f in SimParams.__dataclass_fields__.values()}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {key!r}")
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{key} must be an object")
            try:
                value = _NESTED[key](**value)
            except TypeError as exc:
                raise ConfigurationError(f"bad {key} section: {exc}") from None
        elif key == "ap_position" and value is not None:
            value = tuple(value)
        kwargs[key] = value
    return SimParams(**kwargs)


def load_params(path: str) -> SimParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path}: {exc}") from None
    return params_from_dict(raw)


def params_to_dict(params: SimParams) -> dict:
    out = asdict(params)
    if out["ap_position"] is not None:
        out["ap_position"] = list(out["ap_position"])
    return out


def with_axis_value(params: SimParams, axis: str, value) -> SimParams:
    """Return a copy of ``params`` with one sweep axis overridden."""
    if axis == "M":
        return replace(params, m_antennas=int(value))
    if axis == "K":
        return replace(params, k_users=int(value))
    if axis == "kappa_db":
        return replace(params, kappa_db=float(value))
    if axis == "sigma_e_sq_db":
        return replace(params, sigma_e_sq_db=float(value))
    raise ConfigurationError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
