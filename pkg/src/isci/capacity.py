"""Ergodic capacity with imperfect CSI and its Jensen / worst-case bounds.

The communication receiver estimates the channel from the pilots only,
cancels the pilot contribution and treats the residual ``A e + n`` as
Gaussian noise with covariance ``K_z``. For the simplified models the part
of the error that is linearly predictable from the direct-coefficient
estimate is removed from ``K_z`` (best case); the worst case keeps the
unconditional error covariance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .channel_sim import TransmissionBatch
from .estimators import EstimatorContext, SIMPLIFIED, _herm
from .layout import FrameLayout, KronRowOperator
from .linops import T_compress, direct_positions, hermitian_factor

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass
class CapacityContext:
    model: str
    K_z: np.ndarray = field(repr=False)
    K_z_worst: np.ndarray | None = field(repr=False)
    upper_signal: np.ndarray = field(repr=False)
    estimator: EstimatorContext = field(repr=False)
    data_indices: np.ndarray = field(repr=False)
    sigma_d2: float = 1.0

    @property
    def L_d(self) -> int:
        return len(self.data_indices)


def _effective_noise(C_e, x_p, mask, sigma_d2, noise_variance):
    """``E[A C_e A^H] + C_n`` over the data symbols."""
    K = KronRowOperator(x_p).sandwich(C_e) + sigma_d2 * T_compress(C_e, mask)
    K = K + noise_variance * np.eye(K.shape[0])
    return (K + _herm(K)) / 2


def conditional_error_cov(ctx: EstimatorContext) -> np.ndarray:
    """Error covariance of a simplified model after conditioning on ``g_hat``.

    With ``C_y = L L^H`` (true statistics) and ``U = G L`` the estimate is
    ``g_hat = U w`` for white ``w``; the error-estimate cross covariance is
    ``Q U^H`` with ``Q = C_hy L^{-H} - E U``. The correction
    ``Q U^H C_ghat^+ U Q^H`` is then ``Q P Q^H`` with ``P`` the projector onto
    the row space of ``U``, which avoids inverting the ill-conditioned
    ``C_ghat`` of a nearly rank-deficient direct channel.
    """
    C_e = ctx.error_cov
    if ctx.model == "fm":
        return C_e
    MN = ctx.MN
    L = hermitian_factor(ctx.true_obs_cov)
    U = ctx.direct_gain @ L
    C_hy = _herm(ctx.moments.A_C_h)
    Q = linalg.solve_triangular(L, _herm(C_hy), lower=True, check_finite=False)
    Q = _herm(Q)
    Q[direct_positions(MN)] -= U
    _, s, Vh = np.linalg.svd(U)
    rank = int(np.sum(s > s[0] * MN * np.finfo(float).eps)) if s.size and s[0] > 0 else 0
    if rank == 0:
        log.info("direct estimate is identically zero; no conditional correction applied")
        return C_e
    QV = Q @ _herm(Vh[:rank])
    C = C_e - QV @ _herm(QV)
    return (C + _herm(C)) / 2


def build_capacity_context(ctx: EstimatorContext, layout: FrameLayout) -> CapacityContext:
    """Effective-noise covariances and the Jensen signal term for one model."""
    if ctx.knowledge != "partial":
        raise ValueError("capacity is defined for pilot-based (partial knowledge) estimation")
    mask = layout.mask
    sigma_d2 = layout.data_variance
    x_p = layout.x_p
    n2 = ctx.noise_variance
    if ctx.model == "fm":
        K_z = _effective_noise(ctx.error_cov, x_p, mask, sigma_d2, n2)
        K_worst = None
        upper = T_compress(ctx.est_cov, mask)
    else:
        K_z = _effective_noise(conditional_error_cov(ctx), x_p, mask, sigma_d2, n2)
        K_worst = _effective_noise(ctx.error_cov, x_p, mask, sigma_d2, n2)
        upper = np.diag(mask.c_d * np.real(np.diag(ctx.direct_est_cov)))
    return CapacityContext(ctx.model, K_z, K_worst, (upper + _herm(upper)) / 2, ctx,
                           layout.data_indices, sigma_d2)


def _logdet_ratio_bits(K, S):
    """``log2 det(S K^{-1} + I) = log2 det(K + S) - log2 det K`` for stacked ``S``."""
    L_K = np.linalg.cholesky(K)
    base = 2.0 * np.sum(np.log(np.real(np.diagonal(L_K, axis1=-2, axis2=-1))), axis=-1)
    try:
        L = np.linalg.cholesky(K + S)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError("log-determinant argument is not positive definite") from exc
    top = 2.0 * np.sum(np.log(np.real(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)
    out = (top - base) / LN2
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite log-determinant")
    return out


def _estimated_channels(cap: CapacityContext, y):
    """Stacked ``H_hat`` restricted to the data columns, shape ``(draws, MN, L_d)``."""
    ctx = cap.estimator
    MN = ctx.MN
    est = y @ ctx.gain.T
    if ctx.model == "fm":
        H = est.reshape(est.shape[:-1] + (MN, MN))
        return H[..., cap.data_indices]
    H = np.zeros(est.shape[:-1] + (MN, cap.L_d), dtype=complex)
    H[..., cap.data_indices, np.arange(cap.L_d)] = est[..., cap.data_indices]
    return H


def capacity_samples(cap: CapacityContext, y, worst: bool = False) -> np.ndarray:
    """Per-draw ``log2 det(sigma_d2 H A_cd H^H K^{-1} + I)`` in bits per frame."""
    y = np.atleast_2d(y)
    if cap.L_d == 0:
        return np.zeros(y.shape[0])
    if worst:
        if cap.K_z_worst is None:
            raise ValueError("the worst-case bound is defined for simplified models only")
        K = cap.K_z_worst
    else:
        K = cap.K_z
    Hd = _estimated_channels(cap, y)
    S = cap.sigma_d2 * Hd @ np.conj(np.swapaxes(Hd, -1, -2))
    return _logdet_ratio_bits(K, S)


def mean_and_se(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = float(np.sum(samples) / n) if n else float("nan")
    se = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _frames(cap, batch):
    if batch.draws < 2:
        raise ValueError("at least two draws are required")
    return batch.received(cap.estimator.noise_variance)


def ergodic_capacity_mc(cap: CapacityContext, batch: TransmissionBatch) -> tuple[float, float]:
    """Monte-Carlo mean and standard error (bits per frame) over ``batch``."""
    return mean_and_se(capacity_samples(cap, _frames(cap, batch)))


def capacity_upper(cap: CapacityContext) -> float:
    """Jensen bound ``log2 det(sigma_d2 E[H A_cd H^H] K_z^{-1} + I)``."""
    if cap.L_d == 0:
        return 0.0
    return float(_logdet_ratio_bits(cap.K_z, cap.sigma_d2 * cap.upper_signal))


def capacity_lower(cap: CapacityContext, batch: TransmissionBatch) -> tuple[float, float]:
    """Worst-case bound: the error is treated as independent of the estimate."""
    if cap.model not in SIMPLIFIED:
        raise ValueError("the worst-case lower bound applies to simplified models only")
    return mean_and_se(capacity_samples(cap, _frames(cap, batch), worst=True))
