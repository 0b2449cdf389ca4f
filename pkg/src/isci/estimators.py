"""LMMSE channel estimation under the four interference models.

Every estimator is linear in the received frame ``y`` of the true (full)
model. The full model estimates all ``(MN)^2`` coefficients; the simplified
models (``fr``, ``iN``, ``dN``) estimate the ``MN`` direct coefficients with
their own, possibly mismatched, second-order statistics and are then
zero-padded. Error covariances are always taken against the true statistics
of ``y``.

With partial knowledge only the pilots are known and the data enter the
covariances through their variance. With full knowledge the covariances are
conditioned on the realized symbol vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel_stats import ChannelSecondOrder
from .layout import DataMask, FrameLayout, KronRowOperator
from .linops import (R_reduce, T_compress, direct_positions, embed_covariances, embed_direct,
                     hermitian_solve)

MODELS = ("fm", "fr", "iN", "dN")
SIMPLIFIED = ("fr", "iN", "dN")
KNOWLEDGE = ("partial", "full")


def _herm(X):
    return X.conj().T


class SymbolMoments:
    """Noise-free covariance pieces for one symbol configuration.

    ``known`` is the symbol vector the receiver conditions on (the pilots
    for partial knowledge, the whole frame for full knowledge). ``sigma_d2``
    is the variance of the symbols it does not know, masked by ``mask``.
    """

    def __init__(self, stats: ChannelSecondOrder, known, mask: DataMask, sigma_d2: float):
        self.stats = stats
        self.known = np.asarray(known, dtype=complex)
        self.mask = mask
        self.sigma_d2 = float(sigma_d2)
        MN = stats.MN
        if self.known.shape != (MN,):
            raise ValueError(f"symbol vector must have length {MN}")
        self.MN = MN
        self._A = KronRowOperator(self.known)
        self._random = self.sigma_d2 > 0 and mask.L_d > 0

    @cached_property
    def A_C_h(self):
        """``E[y h^H]`` given the known symbols, ``MN x (MN)^2``."""
        return self._A @ self.stats.C_h

    @cached_property
    def yy_fm(self):
        S = self._A.sandwich(self.stats.C_h)
        if self._random:
            S = S + self.sigma_d2 * T_compress(self.stats.C_h, self.mask)
        return S

    @cached_property
    def B(self):
        return np.diag(self.known)

    @cached_property
    def C_gy_direct(self):
        return self.stats.C_g @ self.B.conj()

    @cached_property
    def yy_fr(self):
        C_g = self.stats.C_g
        S = self.B @ C_g @ self.B.conj()
        if self._random:
            S = S + self.sigma_d2 * np.diag(self.mask.c_d * np.diag(C_g))
        return S

    @cached_property
    def C_delta(self):
        Ct = self.stats.C_htilde
        S = self._A.sandwich(Ct)
        if self._random:
            S = S + self.sigma_d2 * T_compress(Ct, self.mask)
        return S

    @cached_property
    def A_C_htilde_g(self):
        return self._A @ self.stats.C_htilde_g

    @cached_property
    def dN_cross(self):
        X = self.A_C_htilde_g @ self.B.conj()
        if self._random:
            X = X + self.sigma_d2 * R_reduce(self.stats.C_htilde_g, self.mask)
        return X + _herm(X)

    def cross_cov(self, model):
        if model == "fm":
            return _herm(self.A_C_h)
        if model in ("fr", "iN"):
            return self.C_gy_direct
        if model == "dN":
            return self.C_gy_direct + _herm(self.A_C_htilde_g)
        raise ValueError(f"unknown model {model!r}")

    def obs_cov_noisefree(self, model):
        if model == "fm":
            return self.yy_fm
        if model == "fr":
            return self.yy_fr
        if model == "iN":
            return self.yy_fr + self.C_delta
        if model == "dN":
            return self.yy_fr + self.dN_cross + self.C_delta
        raise ValueError(f"unknown model {model!r}")

    def true_y_g(self):
        """``E[y g^H]`` under the true statistics."""
        return self.A_C_h[:, direct_positions(self.MN)]


def partial_moments(stats, layout: FrameLayout, mask: DataMask | None = None) -> SymbolMoments:
    mask = mask or layout.mask
    return SymbolMoments(stats, layout.x_p, mask, layout.data_variance)


def full_moments(stats, layout: FrameLayout, x) -> SymbolMoments:
    return SymbolMoments(stats, x, layout.mask, 0.0)


@dataclass
class EstimatorContext:
    model: str
    knowledge: str
    cross_cov: np.ndarray = field(repr=False)
    obs_cov: np.ndarray = field(repr=False)
    gain: np.ndarray = field(repr=False)
    noise_variance: float
    moments: SymbolMoments = field(repr=False)
    true_obs_cov: np.ndarray = field(repr=False)

    @property
    def stats(self) -> ChannelSecondOrder:
        return self.moments.stats

    @property
    def MN(self) -> int:
        return self.moments.MN

    @property
    def is_full_model(self) -> bool:
        return self.model == "fm"

    @cached_property
    def embedded_gain(self) -> np.ndarray:
        """Linear map from ``y`` to the ``(MN)^2`` coefficient estimate."""
        if self.is_full_model:
            return self.gain
        G = np.zeros((self.MN ** 2, self.MN), dtype=complex)
        G[direct_positions(self.MN)] = self.gain
        return G

    @cached_property
    def direct_gain(self) -> np.ndarray:
        if self.is_full_model:
            return self.gain[direct_positions(self.MN)]
        return self.gain

    @cached_property
    def cross_est_cov(self) -> np.ndarray:
        """``C_hhat_h = E[hhat h^H]``."""
        if self.is_full_model:
            return self.est_cov
        _, C = embed_covariances(self.direct_est_cov, self.gain @ self.moments.A_C_h)
        return C

    @cached_property
    def est_cov(self) -> np.ndarray:
        """``C_hhat = E[hhat hhat^H]``."""
        if self.is_full_model:
            C = self.gain @ _herm(self.cross_cov)
            return (C + _herm(C)) / 2
        C, _ = embed_covariances(self.direct_est_cov, np.zeros((self.MN, self.MN ** 2)))
        return C

    @cached_property
    def direct_est_cov(self) -> np.ndarray:
        """``C_ghat`` under the true statistics of ``y``."""
        G = self.direct_gain
        C = G @ self.true_obs_cov @ _herm(G)
        return (C + _herm(C)) / 2

    @cached_property
    def error_cov(self) -> np.ndarray:
        C_h = self.stats.C_h
        if self.is_full_model:
            C = C_h - self.est_cov
        else:
            X = self.cross_est_cov
            C = C_h - _herm(X) - X + self.est_cov
        return (C + _herm(C)) / 2

    @cached_property
    def direct_error_cov(self) -> np.ndarray:
        """Direct-coefficient block of the error covariance, ``MN x MN``."""
        G = self.direct_gain
        X = G @ self.moments.true_y_g()
        C = self.stats.C_g - X - _herm(X) + self.direct_est_cov
        return (C + _herm(C)) / 2


@dataclass
class EstimationResult:
    h_hat: np.ndarray
    g_hat: np.ndarray
    error_cov: np.ndarray = field(repr=False)
    est_cov: np.ndarray = field(repr=False)
    cross_est_cov: np.ndarray = field(repr=False)


def _make_context(model, knowledge, moments: SymbolMoments, noise_variance):
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if not noise_variance > 0:
        raise ValueError("noise variance must be positive")
    eye = np.eye(moments.MN)
    cross = moments.cross_cov(model)
    obs = moments.obs_cov_noisefree(model) + noise_variance * eye
    obs = (obs + _herm(obs)) / 2
    gain = _herm(hermitian_solve(obs, _herm(cross)))
    true = moments.yy_fm + noise_variance * eye
    return EstimatorContext(model, knowledge, cross, obs, gain, float(noise_variance), moments, (true + _herm(true)) / 2)


def build_context_partial(model, stats, layout: FrameLayout, mask: DataMask | None = None,
                          noise_variance: float = 1.0, moments: SymbolMoments | None = None):
    """Pilot-only LMMSE context. ``moments`` may be shared across noise levels."""
    moments = moments or partial_moments(stats, layout, mask)
    return _make_context(model, "partial", moments, noise_variance)


def build_context_full(model, stats, layout: FrameLayout, x, noise_variance: float = 1.0,
                       moments: SymbolMoments | None = None):
    """Known-symbol LMMSE context for the realized frame ``x``."""
    moments = moments or full_moments(stats, layout, x)
    return _make_context(model, "full", moments, noise_variance)


def estimate(ctx: EstimatorContext, y) -> EstimationResult:
    """Apply the context's filter to ``y`` (shape ``(MN,)`` or ``(batch, MN)``)."""
    y = np.asarray(y)
    if y.shape[-1] != ctx.MN:
        raise ValueError(f"received vector must have length {ctx.MN}, got {y.shape[-1]}")
    est = y @ ctx.gain.T
    if ctx.is_full_model:
        h_hat = est
        g_hat = est[..., direct_positions(ctx.MN)]
    else:
        g_hat = est
        h_hat = embed_direct(est)
    return EstimationResult(h_hat, g_hat, ctx.error_cov, ctx.est_cov, ctx.cross_est_cov)


def error_covariance(ctx: EstimatorContext) -> np.ndarray:
    return ctx.error_cov
