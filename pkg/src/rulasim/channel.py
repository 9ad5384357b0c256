"""Large-scale fading, steering vectors, scattering covariance, Rician sampling.

Complex Gaussians are circularly symmetric: a per-entry variance sigma^2
splits evenly between real and imaginary parts.
"""

from __future__ import annotations

import math

import numpy as np

from .config import SPEED_OF_LIGHT
from .errors import ConfigurationError, GeometryError, NumericalError

HALF_WAVELENGTH = 0.5

# eigenvalue clamp policy for the (approximate) scattering covariance
_PSD_REJECT_FRACTION = 1e-6


class PathLossParams:
    """Log-distance path loss anchored by the free-space gain at d0."""

    def __init__(self, carrier_freq: float, ref_distance: float = 1.0,
                 path_loss_exponent: float = 2.5):
        if carrier_freq <= 0 or ref_distance <= 0 or path_loss_exponent <= 0:
            raise ConfigurationError("path loss parameters must be positive")
        self.carrier_freq = carrier_freq
        self.ref_distance = ref_distance
        self.path_loss_exponent = path_loss_exponent

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def ref_loss_db(self) -> float:
        """Free-space attenuation at the reference distance, in dB."""
        return 20.0 * math.log10(4.0 * math.pi * self.ref_distance / self.wavelength)


def path_loss_db(distance, params: PathLossParams):
    """Power gain in dB at ``distance`` (negative)."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise GeometryError("path loss needs a positive distance")
    return -params.ref_loss_db - 10.0 * params.path_loss_exponent * np.log10(
        distance / params.ref_distance)


def path_loss_linear(distance, params: PathLossParams):
    """Power gain beta as a linear factor."""
    return 10.0 ** (path_loss_db(distance, params) / 10.0)


def los_steering(beta: float, phi: float, m_antennas: int,
                 delta: float = HALF_WAVELENGTH) -> np.ndarray:
    """Line-of-sight array response sqrt(beta)*[1, e^{-j2*pi*delta*sin(phi)}, ...]."""
    if m_antennas < 1:
        raise ConfigurationError("antenna count must be >= 1")
    if delta <= 0:
        raise ConfigurationError("antenna spacing must be positive")
    m = np.arange(m_antennas)
    return math.sqrt(beta) * np.exp(-2j * np.pi * delta * m * math.sin(phi))


def steering_matrix(betas, phis, m_antennas: int,
                    delta: float = HALF_WAVELENGTH) -> np.ndarray:
    """Stack of steering vectors, one column per device.

    ``phis`` may carry leading batch axes; the result has shape
    (..., m_antennas, K).
    """
    betas = np.asarray(betas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    m = np.arange(m_antennas)
    phase = np.exp(-2j * np.pi * delta
                   * m[..., :, None] * np.sin(phis)[..., None, :])
    return np.sqrt(betas)[..., None, :] * phase


def sample_cluster_angles(alpha_k: float, config, rng: np.random.Generator) -> np.ndarray:
    """Nominal cluster angles of arrival, uniform in a window around ``alpha_k``."""
    spread = config.cluster_spread
    return rng.uniform(alpha_k - spread, alpha_k + spread, size=config.num_clusters)


def local_scattering_covariance(beta: float, cluster_angles_effective,
                                asd: float, m_antennas: int) -> np.ndarray:
    """Spatial covariance of the scattered component under the Gaussian
    local-scattering approximation, summed over clusters.

    Entry (s, m) is beta/N * sum_n e^{j*pi*(s-m)*sin(psi_n)}
    * e^{-asd^2/2 * (pi*(s-m)*cos(psi_n))^2}; the diagonal equals beta.
    """
    angles = np.asarray(cluster_angles_effective, dtype=float)
    if angles.size < 1:
        raise ConfigurationError("need at least one cluster angle")
    if asd < 0:
        raise ConfigurationError("angular standard deviation must be >= 0")
    diff = np.pi * (np.arange(m_antennas)[:, None] - np.arange(m_antennas)[None, :])
    phase = np.exp(1j * diff[None, :, :] * np.sin(angles)[:, None, None])
    damping = np.exp(-0.5 * asd ** 2 * (diff[None, :, :] * np.cos(angles)[:, None, None]) ** 2)
    return beta / angles.size * np.sum(phase * damping, axis=0)


def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Factor L with L @ L^H equal to ``cov`` after clamping slightly negative
    eigenvalues to zero. Rejects matrices that are indefinite beyond tolerance."""
    eigvals, eigvecs = np.linalg.eigh(cov)
    trace = float(np.trace(cov).real)
    if eigvals[0] < -_PSD_REJECT_FRACTION * max(trace, np.finfo(float).tiny):
        raise NumericalError(
            f"covariance indefinite: min eigenvalue {eigvals[0]:.3e} vs trace {trace:.3e}")
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))[None, :]


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian draws (unit variance)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def rician_from_noise(h_los: np.ndarray, factor: np.ndarray, kappa: float,
                      z: np.ndarray) -> np.ndarray:
    """Mix the deterministic and scattered parts given pre-drawn noise ``z``."""
    w_los = math.sqrt(kappa / (1.0 + kappa))
    w_nlos = math.sqrt(1.0 / (1.0 + kappa))
    return w_los * h_los + w_nlos * (factor @ z)


def sample_rician(h_los: np.ndarray, cov: np.ndarray, kappa: float,
                  rng: np.random.Generator) -> np.ndarray:
    """One correlated Rician channel draw."""
    if kappa < 0:
        raise ConfigurationError("Rician factor must be >= 0")
    factor = covariance_factor(cov)
    z = crandn(rng, h_los.shape[0])
    return rician_from_noise(h_los, factor, kappa, z)


def corrupt_csi(true_channels: np.ndarray, k_users: int, rho: float,
                rng: np.random.Generator) -> np.ndarray:
    """Channel estimates: truth plus white complex noise of variance 1/(K*rho)."""
    if rho <= 0:
        raise ConfigurationError("transmit SNR must be positive")
    if k_users < 1:
        raise ConfigurationError("user count must be >= 1")
    sigma = math.sqrt(1.0 / (k_users * rho))
    return true_channels + sigma * crandn(rng, true_channels.shape)
