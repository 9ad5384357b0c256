"""Position-driven rotation search.

The array rotation is chosen from position estimates alone: hypothetical
full-LoS channels are built for each candidate rotation and scored by the
per-user mean spectral efficiency they would yield under the chosen
combiner. The search is an exhaustive sweep of an even grid; the predicted
curve typically has many narrow local maxima, so no local method is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import PathLossParams, path_loss_linear, steering_matrix
from .combining import combine_batch, sinr_all
from .config import RotationGrid, SimParams
from .errors import ConfigurationError, OptimizationError
from .geometry import wrap_angle

_CHUNK = 2048


@dataclass
class RotationDecision:
    """Chosen rotation, its predicted score, and the full objective curve.

    ``objective_curve`` is a (num_points, 2) array of (theta, predicted SE)
    rows; failed grid points carry NaN. Ties go to the smallest theta.
    """

    theta_star: float
    predicted_mean_se: float
    objective_curve: np.ndarray


def estimated_link_state(est_positions: np.ndarray, params: SimParams):
    """Estimated large-scale gains and global azimuths for all devices."""
    est = np.atleast_2d(np.asarray(est_positions, dtype=float))
    delta = est - params.ap_xy()[None, :]
    height_gap = params.ap_height - params.device_height
    dist = np.sqrt(delta[:, 0] ** 2 + delta[:, 1] ** 2 + height_gap ** 2)
    pl = PathLossParams(params.carrier_freq, params.ref_distance,
                        params.path_loss_exponent)
    betas = path_loss_linear(dist, pl)
    alphas = np.arctan2(delta[:, 1], delta[:, 0])
    return betas, alphas


def pseudo_channels(est_positions: np.ndarray, theta: float,
                    params: SimParams) -> np.ndarray:
    """Full-LoS channel matrix hypothesized from estimated positions."""
    if not (0.0 <= theta <= math.pi):
        raise ConfigurationError("rotation must lie in [0, pi]")
    betas, alphas = estimated_link_state(est_positions, params)
    phis = wrap_angle(alphas - theta)
    return steering_matrix(betas, phis, params.m_antennas)


def objective_curve(thetas: np.ndarray, est_positions: np.ndarray, scheme: str,
                    params: SimParams) -> np.ndarray:
    """Predicted per-user mean SE at each rotation; NaN where combining failed."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ConfigurationError("need at least one rotation to evaluate")
    if np.any(thetas < 0.0) or np.any(thetas > math.pi):
        raise ConfigurationError("rotations must lie in [0, pi]")
    betas, alphas = estimated_link_state(est_positions, params)
    budget = params.link_budget()
    values = np.empty(thetas.shape, dtype=float)
    for lo in range(0, thetas.size, _CHUNK):
        chunk = thetas[lo:lo + _CHUNK]
        phis = wrap_angle(alphas[None, :] - chunk[:, None])
        pseudo = steering_matrix(np.broadcast_to(betas, phis.shape), phis,
                                 params.m_antennas)
        v, ok = combine_batch(pseudo, scheme, budget, cond_limit=None)
        gammas = sinr_all(v, pseudo, budget)
        se = np.log2(1.0 + gammas).mean(axis=-1)
        se[~ok] = np.nan
        values[lo:lo + _CHUNK] = se
    return values


def objective(theta: float, est_positions: np.ndarray, scheme: str,
              params: SimParams) -> float:
    """Predicted per-user mean SE of one rotation (deterministic)."""
    value = objective_curve(np.array([theta]), est_positions, scheme, params)[0]
    if not np.isfinite(value):
        raise OptimizationError(f"objective failed at theta={theta!r}")
    return float(value)


def optimize_rotation(est_positions: np.ndarray, scheme: str, params: SimParams,
                      grid: RotationGrid | None = None) -> RotationDecision:
    """Exhaustive search of the rotation grid; argmax with smallest-theta ties."""
    grid = grid if grid is not None else params.grid
    thetas = grid.thetas()
    values = objective_curve(thetas, est_positions, scheme, params)
    finite = np.isfinite(values)
    if not finite.any():
        raise OptimizationError("every rotation grid point failed")
    best = int(np.nanargmax(values))
    return RotationDecision(
        theta_star=float(thetas[best]),
        predicted_mean_se=float(values[best]),
        objective_curve=np.column_stack([thetas, values]),
    )


def write_objective_curve(path: str, thetas: np.ndarray, values: np.ndarray) -> None:
    """Two-column tabular text: rotation in degrees, predicted mean SE."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta_degrees,predicted_se\n")
        for theta, value in zip(np.degrees(thetas), values):
            fh.write(f"{float(theta)!r},{float(value)!r}\n")
