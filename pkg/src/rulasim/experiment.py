"""Monte Carlo orchestration: network/channel realizations, sweeps, output.

Each network realization draws placements, positioning errors and cluster
angles, optimizes the rotation per combining scheme from the estimated
positions, then averages spectral efficiency over channel realizations for
the chosen rotations and for the static baseline. Realizations use
non-overlapping substreams derived from (master_seed, counter), so results
are bit-reproducible at any worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import (PathLossParams, covariance_factor, crandn,
                      local_scattering_covariance, path_loss_linear,
                      steering_matrix)
from .combining import combine_batch, sinr_all
from .config import (ARRAY_MODES, SCHEMES, SimParams, noise_power,
                     with_axis_value)
from .errors import ConfigurationError, NumericalError
from .geometry import (Placement, apply_positioning_error, compute_geometry,
                       place_devices, wrap_angle)
from .rotation import optimize_rotation

__all__ = [
    "SweepRecord", "RealizationResult", "noise_power", "sample_network",
    "run_network_realization", "run_sweep", "run_sweep_detailed",
    "emit_results", "parse_results",
]

# a run aborts when more than this fraction of realizations fail
FAILURE_ABORT_FRACTION = 1e-3

_AXIS_SEED_STRIDE = 2 ** 32


@dataclass
class SweepRecord:
    """One aggregated output row of a sweep."""

    axis_name: str
    axis_value: float
    scheme: str
    array_mode: str
    mean_se: float
    ci95_halfwidth: float
    n_failed_realizations: int


@dataclass
class RealizationResult:
    """Per-(scheme, array mode) outcome of a single network realization."""

    mean_se: dict = field(default_factory=dict)        # (scheme, mode) -> float
    failed: dict = field(default_factory=dict)         # (scheme, mode) -> bool
    theta_star: dict = field(default_factory=dict)     # scheme -> radians
    predicted_se: dict = field(default_factory=dict)   # scheme -> float

    @property
    def any_failed(self) -> bool:
        return any(self.failed.values())


def realization_rng(params: SimParams, realization_seed: int) -> np.random.Generator:
    """Substream for one realization, derived by counter from the master seed."""
    if realization_seed < 0:
        raise ConfigurationError("realization seed must be nonnegative")
    return np.random.default_rng(
        np.random.SeedSequence([params.master_seed, realization_seed]))


def sample_network(params: SimParams, rng: np.random.Generator) -> Placement:
    """Draw one placement with its position estimates."""
    true_xy = place_devices(params.k_users, params.side, rng)
    est_xy = apply_positioning_error(true_xy, params.sigma_e_sq, rng)
    return Placement(true_xy=true_xy, est_xy=est_xy, ap_xy=params.ap_xy(),
                     ap_height=params.ap_height, device_height=params.device_height)


def _channels_for_theta(theta, betas, alphas, psi_global, factor_cache,
                        params, z, csi_noise):
    """True and estimated channel stacks (J, M, K) at one rotation."""
    if theta not in factor_cache:
        if psi_global is None:
            raise KeyError("array-frame cluster angles missing for this rotation")
        psi_eff = psi_global - theta
        factors = np.empty((params.k_users, params.m_antennas, params.m_antennas),
                           dtype=complex)
        for k in range(params.k_users):
            cov = local_scattering_covariance(betas[k], psi_eff[k],
                                              params.scattering.asd,
                                              params.m_antennas)
            factors[k] = covariance_factor(cov)
        factor_cache[theta] = factors
    factors = factor_cache[theta]

    h_los = steering_matrix(betas, wrap_angle(alphas - theta), params.m_antennas)
    kappa = params.kappa
    w_los = math.sqrt(kappa / (1.0 + kappa))
    w_nlos = math.sqrt(1.0 / (1.0 + kappa))
    h_nlos = np.einsum("kme,jek->jmk", factors, z)
    h_true = w_los * h_los[None, :, :] + w_nlos * h_nlos
    if csi_noise is None:
        return h_true, h_true
    return h_true, h_true + csi_noise


def run_network_realization(params: SimParams,
                            realization_seed: int) -> RealizationResult:
    """One placement: optimize rotations, then average SE over channel draws.

    The same standard-normal draws feed every rotation in force (rotary per
    scheme and the static baseline), so mode comparisons are paired and a
    rotation equal to the static one reproduces the baseline exactly.
    """
    rng = realization_rng(params, realization_seed)
    placement = sample_network(params, rng)
    geom = compute_geometry(placement, use_estimates=False, theta=0.0)
    pl = PathLossParams(params.carrier_freq, params.ref_distance,
                        params.path_loss_exponent)
    betas = path_loss_linear(geom.distances_3d, pl)
    alphas = geom.global_azimuths

    scat = params.scattering
    psi_global = None
    if scat.frame == "global":
        psi_global = rng.uniform(alphas[:, None] - scat.cluster_spread,
                                 alphas[:, None] + scat.cluster_spread,
                                 size=(params.k_users, scat.num_clusters))

    result = RealizationResult()
    for scheme in SCHEMES:
        decision = optimize_rotation(placement.est_xy, scheme, params)
        result.theta_star[scheme] = decision.theta_star
        result.predicted_se[scheme] = decision.predicted_mean_se

    theta_by_cell = {}
    for scheme in SCHEMES:
        theta_by_cell[(scheme, "rotary")] = result.theta_star[scheme]
        theta_by_cell[(scheme, "static")] = params.static_theta
    distinct_thetas = sorted(set(theta_by_cell.values()))

    factor_cache = {}
    if scat.frame == "array":
        # scatterers are redrawn around each rotation's effective azimuths
        for theta in distinct_thetas:
            phis = wrap_angle(alphas - theta)
            psi_eff = rng.uniform(phis[:, None] - scat.cluster_spread,
                                  phis[:, None] + scat.cluster_spread,
                                  size=(params.k_users, scat.num_clusters))
            factors = np.empty((params.k_users, params.m_antennas,
                                params.m_antennas), dtype=complex)
            for k in range(params.k_users):
                cov = local_scattering_covariance(betas[k], psi_eff[k],
                                                  scat.asd, params.m_antennas)
                factors[k] = covariance_factor(cov)
            factor_cache[theta] = factors

    j = params.n_channel_realizations
    shape = (j, params.m_antennas, params.k_users)
    z = crandn(rng, shape)
    csi_noise = None
    if params.csi_error:
        csi_noise = math.sqrt(params.csi_error_variance()) * crandn(rng, shape)

    budget = params.link_budget()
    channels = {
        theta: _channels_for_theta(theta, betas, alphas, psi_global,
                                   factor_cache, params, z, csi_noise)
        for theta in distinct_thetas
    }

    for cell, theta in theta_by_cell.items():
        scheme = cell[0]
        h_true, h_est = channels[theta]
        v, ok = combine_batch(h_est, scheme, budget)
        if not ok.all():
            result.mean_se[cell] = float("nan")
            result.failed[cell] = True
            continue
        gammas = sinr_all(v, h_true, budget)
        per_draw = np.log2(1.0 + gammas).mean(axis=-1)
        result.mean_se[cell] = float(per_draw.mean())
        result.failed[cell] = False
    return result


def _run_one(job):
    params, seed = job
    return run_network_realization(params, seed)


def _normalize_axis_value(axis: str, value):
    if axis in ("M", "K"):
        if float(value) != int(value):
            raise ConfigurationError(f"axis {axis} takes integer values, got {value!r}")
        return int(value)
    return float(value)


def run_sweep_detailed(params: SimParams, axis: str, values, n_jobs: int = 1):
    """Run a sweep and keep the per-realization means alongside the records.

    Returns (records, details) where details maps (axis_value, scheme, mode)
    to the array of per-realization mean SEs (NaN for failed realizations).
    """
    values = [_normalize_axis_value(axis, v) for v in values]
    if not values:
        raise ConfigurationError("sweep needs at least one axis value")
    if n_jobs < 1:
        raise ConfigurationError("n_jobs must be >= 1")
    sweep_params = []
    for value in values:
        p = with_axis_value(params, axis, value)
        if p.k_users > p.m_antennas:
            raise ConfigurationError(
                f"K={p.k_users} exceeds M={p.m_antennas}; ZF needs M >= K")
        sweep_params.append(p)

    jobs = []
    for a, p in enumerate(sweep_params):
        base = a * _AXIS_SEED_STRIDE
        jobs.extend((p, base + r) for r in range(params.n_network_realizations))
    if n_jobs == 1:
        outcomes = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=8))

    n = params.n_network_realizations
    records, details = [], {}
    n_failed_total = 0
    for a, value in enumerate(values):
        results = outcomes[a * n:(a + 1) * n]
        n_failed_total += sum(r.any_failed for r in results)
        for scheme in SCHEMES:
            for mode in ARRAY_MODES:
                cell = (scheme, mode)
                means = np.array([r.mean_se[cell] for r in results])
                details[(value, scheme, mode)] = means
                valid = means[np.isfinite(means)]
                n_failed = int(means.size - valid.size)
                if valid.size == 0:
                    mean, ci = float("nan"), float("nan")
                elif valid.size == 1:
                    mean, ci = float(valid[0]), 0.0
                else:
                    mean = float(valid.mean())
                    ci = float(1.96 * valid.std(ddof=1) / math.sqrt(valid.size))
                records.append(SweepRecord(
                    axis_name=axis, axis_value=value, scheme=scheme,
                    array_mode=mode, mean_se=mean, ci95_halfwidth=ci,
                    n_failed_realizations=n_failed))

    total = len(values) * n
    if n_failed_total > FAILURE_ABORT_FRACTION * total:
        raise NumericalError(
            f"{n_failed_total} of {total} realizations hit combining failures "
            f"(> {FAILURE_ABORT_FRACTION:.1%})")
    return records, details


def run_sweep(params: SimParams, axis: str, values, n_jobs: int = 1):
    """Sweep one axis; returns records for all schemes and array modes."""
    records, _ = run_sweep_detailed(params, axis, values, n_jobs=n_jobs)
    return records


def _format_field(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    return repr(float(value))


def emit_results(records, path: str) -> None:
    """Comma-separated table, one record per line; floats keep full precision."""
    fields = ("axis_name", "axis_value", "scheme", "array_mode", "mean_se",
              "ci95_halfwidth", "n_failed_realizations")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(fields) + "\n")
        for rec in records:
            fh.write(",".join(_format_field(getattr(rec, f)) for f in fields) + "\n")


def _parse_number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_results(path: str):
    """Read back a file written by emit_results."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["axis_name", "axis_value", "scheme", "array_mode", "mean_se",
                    "ci95_halfwidth", "n_failed_realizations"]
        if header != expected:
            raise ConfigurationError(f"unexpected results header: {header}")
        for row in reader:
            records.append(SweepRecord(
                axis_name=row[0], axis_value=_parse_number(row[1]), scheme=row[2],
                array_mode=row[3], mean_se=float(row[4]),
                ci95_halfwidth=float(row[5]), n_failed_realizations=int(row[6])))
    return records
