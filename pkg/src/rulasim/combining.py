"""Linear receive combining (MRC/ZF/MMSE), per-user SINR, spectral efficiency.

All routines accept leading batch axes on the channel matrices; the math is
per-slice. ZF solves against the K x K Gram matrix and MMSE against the
M x M regularized Gram matrix instead of forming explicit inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SCHEMES, LinkBudget
from .errors import CombiningError, ConfigurationError

COND_LIMIT = 1e12


@dataclass
class SeReport:
    """Per-user SINRs and spectral efficiencies plus their user average."""

    per_user_sinr: np.ndarray
    per_user_se: np.ndarray
    mean_se: float


def _hermitian(matrices: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(matrices, -1, -2))


def combine_batch(estimated: np.ndarray, scheme: str, budget: LinkBudget,
                  cond_limit: float | None = COND_LIMIT):
    """Combining matrices for a (..., M, K) stack of channel estimates.

    Returns (V, ok) where ok flags slices whose solve was acceptable; failed
    slices hold unusable values and must be discarded by the caller. Passing
    ``cond_limit=None`` skips the conditioning estimate and only guards
    against outright singular or non-finite solves (cheap path for the
    rotation search, where near-singular points score ~zero anyway).
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown combining scheme {scheme!r}")
    estimated = np.asarray(estimated)
    batch_shape = estimated.shape[:-2]
    ok = np.ones(batch_shape, dtype=bool)

    if scheme == "MRC":
        return estimated.copy(), ok

    if scheme == "ZF":
        gram = _hermitian(estimated) @ estimated
        if cond_limit is not None:
            with np.errstate(all="ignore"):
                cond = np.linalg.cond(gram)
            ok &= np.isfinite(cond) & (cond <= cond_limit)
        safe = np.where(ok[..., None, None], gram,
                        np.eye(gram.shape[-1], dtype=gram.dtype))
        try:
            inv = np.linalg.inv(safe)
        except np.linalg.LinAlgError:
            inv, singular = _inv_with_mask(safe)
            ok &= ~singular
        v = estimated @ inv
    else:  # MMSE
        m = estimated.shape[-2]
        reg = budget.noise_power / budget.tx_power
        gram = estimated @ _hermitian(estimated) + reg * np.eye(m, dtype=estimated.dtype)
        if cond_limit is not None:
            # regularization floors the spectrum at reg, so bound the
            # condition number from the Frobenius norm instead of an SVD
            lam_max = np.einsum("...ij,...ij->...", np.abs(gram), np.abs(gram)) ** 0.5
            ok &= np.isfinite(lam_max) & (lam_max / reg <= cond_limit)
        try:
            v = np.linalg.solve(gram, estimated)
        except np.linalg.LinAlgError:
            inv, singular = _inv_with_mask(gram)
            ok &= ~singular
            v = inv @ estimated

    ok &= np.isfinite(v).all(axis=(-1, -2))
    return v, ok


def _inv_with_mask(matrices: np.ndarray):
    """Elementwise inverse that flags singular slices instead of raising."""
    flat = matrices.reshape((-1,) + matrices.shape[-2:])
    out = np.empty_like(flat)
    singular = np.zeros(flat.shape[0], dtype=bool)
    eye = np.eye(flat.shape[-1], dtype=flat.dtype)
    for i, mat in enumerate(flat):
        try:
            out[i] = np.linalg.inv(mat)
        except np.linalg.LinAlgError:
            out[i] = eye
            singular[i] = True
    return (out.reshape(matrices.shape),
            singular.reshape(matrices.shape[:-2]))


def compute_combiner(estimated: np.ndarray, scheme: str, budget: LinkBudget) -> np.ndarray:
    """Combining matrix for a single M x K channel estimate; raises on a
    singular or ill-conditioned (cond > 1e12) Gram matrix."""
    estimated = np.asarray(estimated)
    if estimated.ndim != 2:
        raise ConfigurationError("expected a single M x K matrix")
    if scheme == "ZF" and estimated.shape[0] < estimated.shape[1]:
        raise CombiningError("ZF needs at least as many antennas as users")
    v, ok = combine_batch(estimated, scheme, budget)
    if not bool(ok):
        raise CombiningError(f"{scheme} Gram matrix singular or ill-conditioned")
    return v


def sinr_all(combiner: np.ndarray, true_channels: np.ndarray,
             budget: LinkBudget) -> np.ndarray:
    """Per-user SINR for (..., M, K) combiner/channel stacks -> (..., K)."""
    combiner = np.asarray(combiner)
    true_channels = np.asarray(true_channels)
    cross = _hermitian(combiner) @ true_channels          # (..., K, K), v_k^H h_j
    power = np.abs(cross) ** 2
    desired = np.einsum("...kk->...k", power)
    interference = power.sum(axis=-1) - desired
    norms = np.einsum("...mk,...mk->...k", np.conj(combiner), combiner).real
    if np.any(norms == 0.0):
        raise CombiningError("combiner has a zero column")
    p = budget.tx_power
    return (p * desired) / (p * interference + budget.noise_power * norms)


def sinr(combiner: np.ndarray, true_channels: np.ndarray, user: int,
         budget: LinkBudget) -> float:
    """SINR of one user for a single M x K combiner/channel pair."""
    k = true_channels.shape[-1]
    if not 0 <= user < k:
        raise ConfigurationError(f"user index {user} out of range for K={k}")
    return float(sinr_all(combiner, true_channels, budget)[..., user])


def se_from_sinr(sinrs) -> SeReport:
    """Per-user spectral efficiency log2(1+sinr) and the user average."""
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise ConfigurationError("SINRs must be nonnegative")
    per_user = np.log2(1.0 + sinrs)
    return SeReport(per_user_sinr=sinrs, per_user_se=per_user,
                    mean_se=float(per_user.mean()))
