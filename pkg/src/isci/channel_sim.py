"""Random channel realizations from a discrete-path WSSUS surrogate.

Each realization is a sum of ``P`` scatterers placed uniformly on the
scattering support with i.i.d. complex Gaussian gains of variance
``total_power / P``, so the coefficient covariance matches the analytic one
for every ``P``.

Random streams are split by counter: draw ``i`` of stream ``s`` under master
seed ``seed`` uses ``numpy.random.default_rng([seed, s, i])``, so results do
not depend on batching or on the order in which workers run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel_stats import ScatteringFunction, coupling_kernel
from .grid import GridConfig, PrototypePair, grid_index_maps
from .layout import complex_normal

DEFAULT_PATHS = 64

# stream ids for counter-based seeding
CHANNEL_STREAM = 1
DATA_STREAM = 2
NOISE_STREAM = 3


def draw_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), int(index)])


@dataclass(frozen=True)
class ChannelRealization:
    tau: np.ndarray
    nu: np.ndarray
    gain: np.ndarray

    @property
    def path_count(self) -> int:
        return self.gain.size


@dataclass(frozen=True)
class RealizedChannel:
    H_fm: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    @property
    def htilde(self) -> np.ndarray:
        MN = self.g.size
        ht = self.h.copy()
        ht[np.arange(MN) * (MN + 1)] = 0
        return ht


def sample_paths(scattering: ScatteringFunction, path_count: int = DEFAULT_PATHS, seed=None) -> ChannelRealization:
    if path_count < 1:
        raise ValueError("path_count must be >= 1")
    rng = np.random.default_rng(seed)
    if scattering.tau_spread == 0 and scattering.doppler_spread == 0:
        return ChannelRealization(np.zeros(1), np.zeros(1), complex_normal(rng, 1, scattering.total_power))
    tau = (rng.random(path_count) - 0.5) * scattering.tau_spread
    nu = (rng.random(path_count) - 0.5) * scattering.doppler_spread
    gain = complex_normal(rng, path_count, scattering.total_power / path_count)
    return ChannelRealization(tau, nu, gain)


def realize_channel(grid: GridConfig, pair: PrototypePair, realization: ChannelRealization) -> RealizedChannel:
    h = coupling_kernel(grid, pair, realization.tau, realization.nu) @ realization.gain
    return _wrap(grid, h)


def _wrap(grid, h):
    MN = grid.MN
    return RealizedChannel(H_fm=h.reshape(MN, MN), h=h, g=h[grid_index_maps(grid).direct_positions])


def sample_channels(
    grid: GridConfig,
    pair: PrototypePair,
    scattering: ScatteringFunction,
    draws,
    path_count: int = DEFAULT_PATHS,
    seed: int = 0,
    stream: int = CHANNEL_STREAM,
) -> np.ndarray:
    """Coefficient vectors ``h`` for the given draw indices, shape ``(len(draws), (MN)**2)``.

    ``draws`` is an int (meaning ``range(draws)``) or an iterable of indices.
    """
    if isinstance(draws, (int, np.integer)):
        draws = range(int(draws))
    reals = [sample_paths(scattering, path_count, draw_rng(seed, stream, i)) for i in draws]
    if not reals:
        return np.zeros((0, grid.MN ** 2), dtype=complex)
    tau = np.concatenate([r.tau for r in reals])
    nu = np.concatenate([r.nu for r in reals])
    gains = np.concatenate([r.gain for r in reals])
    P = reals[0].path_count
    K = coupling_kernel(grid, pair, tau, nu) * gains
    return K.reshape(K.shape[0], len(reals), P).sum(axis=2).T


def sample_covariance(
    grid: GridConfig,
    pair: PrototypePair,
    scattering: ScatteringFunction,
    draws: int,
    path_count: int = DEFAULT_PATHS,
    seed: int = 0,
    batch: int = 256,
) -> np.ndarray:
    """Known-zero-mean sample covariance ``sum h h^H / draws``."""
    if draws < 2:
        raise ValueError("draws must be >= 2")
    dim = grid.MN ** 2
    acc = np.zeros((dim, dim), dtype=complex)
    for start in range(0, draws, batch):
        H = sample_channels(grid, pair, scattering, range(start, min(start + batch, draws)), path_count, seed)
        acc += H.T @ H.conj()
    return acc / draws


@dataclass(frozen=True)
class TransmissionBatch:
    """Channel, frame and unit-variance noise draws for one Monte-Carlo run.

    The same draws serve every noise level: ``received(s2)`` scales the
    stored noise by ``sqrt(s2)``.
    """

    h: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @property
    def draws(self) -> int:
        return self.h.shape[0]

    def clean(self) -> np.ndarray:
        MN = self.x.shape[1]
        H = self.h.reshape(-1, MN, MN)
        return np.einsum("bij,bj->bi", H, self.x)

    def received(self, noise_variance: float) -> np.ndarray:
        return self.clean() + np.sqrt(noise_variance) * self.w


def sample_transmissions(
    grid: GridConfig,
    pair: PrototypePair,
    scattering: ScatteringFunction,
    layout,
    draws: int,
    path_count: int = DEFAULT_PATHS,
    seed: int = 0,
    batch: int = 64,
) -> TransmissionBatch:
    """Draw ``draws`` independent (channel, data, noise) triples.

    Draw ``i`` uses the counter-split streams ``(seed, CHANNEL_STREAM, i)``,
    ``(seed, DATA_STREAM, i)`` and ``(seed, NOISE_STREAM, i)``.
    """
    MN = grid.MN
    h = np.concatenate(
        [sample_channels(grid, pair, scattering, range(s, min(s + batch, draws)), path_count, seed)
         for s in range(0, draws, batch)]
    ) if draws else np.zeros((0, MN * MN), dtype=complex)
    x = np.empty((draws, MN), dtype=complex)
    w = np.empty((draws, MN), dtype=complex)
    for i in range(draws):
        d = complex_normal(draw_rng(seed, DATA_STREAM, i), layout.L_d, layout.data_variance)
        x[i] = layout.x_p + layout.embed_data(d)
        w[i] = complex_normal(draw_rng(seed, NOISE_STREAM, i), MN)
    return TransmissionBatch(h, x, w)
