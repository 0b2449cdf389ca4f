"""Scalar sensing errors: summed error variance of the direct coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_sim import DATA_STREAM, draw_rng
from .estimators import MODELS, build_context_full, full_moments
from .layout import complex_normal
from .linops import direct_positions

DEFAULT_DATA_DRAWS = 500


class SensingError(ValueError):
    pass


def sensing_error(C_e) -> float:
    """Sum of the error variances at the ``MN`` direct positions of ``C_e``.

    Also accepts the ``MN x MN`` direct block itself.
    """
    C_e = np.asarray(C_e)
    dim = C_e.shape[0]
    MN = int(round(np.sqrt(dim)))
    diag = np.real(np.diagonal(C_e))
    if MN * MN == dim and dim > 1:
        sel = diag[direct_positions(MN)]
    else:
        sel = diag
    floor = -1e-9 * max(float(np.sum(diag)), 0.0) / dim
    if np.min(sel) < floor:
        raise SensingError(f"negative error variance {np.min(sel):.3e}; upstream covariance is corrupt")
    return float(np.sum(np.clip(sel, 0.0, None)))


@dataclass
class KnownSymbolErrors:
    """Per-draw known-symbol sensing errors, shape ``(draws, len(noise), len(models))``."""

    samples: np.ndarray
    noise_variances: np.ndarray
    models: tuple

    def mean(self):
        return self.samples.mean(axis=0)

    def se(self):
        n = self.samples.shape[0]
        if n < 2:
            return np.zeros(self.samples.shape[1:])
        return self.samples.std(axis=0, ddof=1) / np.sqrt(n)

    def ratio(self, model, reference="fm"):
        """Ratio of means with its delta-method standard error."""
        a = self.samples[:, :, self.models.index(model)]
        b = self.samples[:, :, self.models.index(reference)]
        r = a.mean(axis=0) / b.mean(axis=0)
        n = a.shape[0]
        if n < 2:
            return r, np.zeros_like(r)
        resid = a - r * b
        se = resid.std(axis=0, ddof=1) / (np.sqrt(n) * b.mean(axis=0))
        return r, se


def known_symbol_errors(stats, layout, noise_variances, data_draws=DEFAULT_DATA_DRAWS, seed=0,
                        models=MODELS) -> KnownSymbolErrors:
    """Known-symbol sensing errors for each data draw, noise level and model.

    Draw ``i`` uses the data stream ``(seed, DATA_STREAM, i)``; the same
    symbol vectors are reused for every noise level.
    """
    if data_draws < 1:
        raise ValueError("data_draws must be >= 1")
    noise = np.atleast_1d(np.asarray(noise_variances, dtype=float))
    models = tuple(models)
    if layout.L_d == 0:
        data_draws = 1
    out = np.empty((data_draws, noise.size, len(models)))
    for i in range(data_draws):
        d = complex_normal(draw_rng(seed, DATA_STREAM, i), layout.L_d, layout.data_variance)
        x = layout.x_p + layout.embed_data(d)
        moments = full_moments(stats, layout, x)
        for j, s2 in enumerate(noise):
            for k, model in enumerate(models):
                ctx = build_context_full(model, stats, layout, x, s2, moments=moments)
                out[i, j, k] = sensing_error(ctx.direct_error_cov)
    return KnownSymbolErrors(out, noise, models)


def sensing_error_known(model, stats, layout, noise_variance, data_draws=DEFAULT_DATA_DRAWS, seed=0):
    """Mean and standard error of the known-symbol sensing error of one model."""
    res = known_symbol_errors(stats, layout, [noise_variance], data_draws, seed, (model,))
    return float(res.mean()[0, 0]), float(res.se()[0, 0])
