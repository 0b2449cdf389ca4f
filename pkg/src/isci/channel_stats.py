"""Second-order statistics of the doubly dispersive channel coefficients.

Under WSSUS the coefficient covariance is a delay-Doppler integral of
``P_D(tau, nu) f_i(tau, nu) f_j(tau, nu)^*``, where ``f_i`` is the coupling of
one scatterer to coefficient ``i``. With a quadrature rule of nodes
``(tau_q, nu_q)`` and weights ``w_q`` this is ``K diag(w) K^H`` for the
kernel matrix ``K[i, q] = f_i(tau_q, nu_q)``, which is Hermitian PSD up to
rounding.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridConfig, PrototypePair, cross_ambiguity, grid_index_maps

log = logging.getLogger(__name__)

CACHE_ENV = "ISCI_CACHE_DIR"
NO_CACHE_ENV = "ISCI_NO_CACHE"


class QuadratureError(RuntimeError):
    """Node doubling changed the probed covariance entries beyond tolerance."""


class CovarianceError(RuntimeError):
    """A constructed covariance is not positive semidefinite."""


@dataclass(frozen=True)
class ScatteringFunction:
    """Constant scattering density on ``[-tau/2, tau/2] x [-nu/2, nu/2]``.

    ``level`` defaults to ``1 / (tau_spread * doppler_spread)`` (unit total
    scatter power). A zero spread in either axis collapses that axis to the
    origin; the total power stays ``level * area`` when both spreads are
    positive and is 1 otherwise.
    """

    tau_spread: float
    doppler_spread: float
    level: float | None = None

    def __post_init__(self):
        if self.tau_spread < 0 or self.doppler_spread < 0:
            raise ValueError("spreads must be nonnegative")
        if self.level is None:
            lvl = 1.0 / self.spread_factor if self.spread_factor > 0 else float("inf")
            object.__setattr__(self, "level", lvl)

    @classmethod
    def from_spread_factor(cls, delta: float, grid: GridConfig) -> "ScatteringFunction":
        """Split ``delta`` so that ``tau/T == nu/F`` (equal normalized spreads)."""
        if delta < 0:
            raise ValueError("spread factor must be nonnegative")
        r = np.sqrt(delta / grid.TF)
        return cls(tau_spread=float(grid.T * r), doppler_spread=float(grid.F * r))

    @property
    def spread_factor(self) -> float:
        return self.tau_spread * self.doppler_spread

    @property
    def total_power(self) -> float:
        if self.spread_factor > 0:
            return float(self.level * self.spread_factor)
        return 1.0

    def contains(self, tau, nu):
        return (np.abs(tau) <= self.tau_spread / 2) & (np.abs(nu) <= self.doppler_spread / 2)


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_axis: int = 24
    rule: str = "gauss-legendre"
    convergence_tol: float = 1e-6
    probe_count: int = 32

    def __post_init__(self):
        if self.nodes_per_axis < 1:
            raise ValueError("nodes_per_axis must be >= 1")
        if self.rule != "gauss-legendre":
            raise ValueError(f"unsupported quadrature rule {self.rule!r}")


def coupling_kernel(grid: GridConfig, pair: PrototypePair, tau, nu) -> np.ndarray:
    """Coupling of unit-gain scatterers at ``(tau, nu)`` to every coefficient.

    Returns an array of shape ``((MN)**2, len(tau))`` whose row
    ``i = kl + MN*k`` is ``H_{m,n}[mu, nl]`` for a single path.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    m, n, mu, nl = (a[:, None] for a in grid_index_maps(grid).coefficient_table())
    T, F = grid.T, grid.F
    phase = np.exp(-2j * np.pi * (mu * nl * grid.TF + (nu + mu * F) * (tau - n * T)))
    return phase * cross_ambiguity(pair, tau + (nl - n) * T, nu + (mu - m) * F)


def _gauss_legendre(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    half = (hi - lo) / 2
    return lo + half * (x + 1), half * w


def quadrature_nodes(scattering: ScatteringFunction, n: int):
    """Tensor Gauss-Legendre nodes and density-weighted weights.

    The delay axis is split at 0 into two panels because the rectangular
    cross-ambiguity has a kink in delay there.
    """
    tD, vD = scattering.tau_spread, scattering.doppler_spread
    if tD > 0:
        half = max(1, (n + 1) // 2)
        t1, w1 = _gauss_legendre(-tD / 2, 0.0, half)
        t2, w2 = _gauss_legendre(0.0, tD / 2, half)
        taus, wt = np.concatenate([t1, t2]), np.concatenate([w1, w2]) / tD
    else:
        taus, wt = np.zeros(1), np.ones(1)
    if vD > 0:
        nus, wv = _gauss_legendre(-vD / 2, vD / 2, n)
        wv = wv / vD
    else:
        nus, wv = np.zeros(1), np.ones(1)
    T, V = np.meshgrid(taus, nus, indexing="ij")
    W = np.outer(wt, wv) * scattering.total_power
    return T.ravel(), V.ravel(), W.ravel()


def coeff_cross_covariance(grid, pair, scattering, idx1, idx2, quad: QuadratureSpec | None = None):
    """``E[H_{m,n}[mu,nl] H*_{m',n'}[mu',nl']]`` for two coefficients.

    ``idx1`` and ``idx2`` are ``((m, n), (mu, nl))`` tuples.
    """
    quad = quad or QuadratureSpec()
    maps = grid_index_maps(grid)
    i = int(maps.pair_to_linear(*idx1))
    j = int(maps.pair_to_linear(*idx2))

    def entry(nodes):
        tau, nu, w = quadrature_nodes(scattering, nodes)
        K = coupling_kernel(grid, pair, tau, nu)
        ki, kj = K[i], K[j]
        bound = np.sqrt(np.sum(w * np.abs(ki) ** 2) * np.sum(w * np.abs(kj) ** 2))
        return np.sum(w * ki * kj.conj()), bound

    value, _ = entry(quad.nodes_per_axis)
    if scattering.tau_spread > 0 or scattering.doppler_spread > 0:
        finer, bound = entry(2 * quad.nodes_per_axis)
        # Cauchy-Schwarz bound as the scale: entries can vanish exactly
        if abs(finer - value) > quad.convergence_tol * bound:
            raise QuadratureError(
                f"entry {idx1} x {idx2} did not converge: {value} vs {finer} after node doubling"
            )
    return complex(value)


@dataclass(frozen=True)
class ChannelSecondOrder:
    """Covariance of ``h = vec(H_fm^T)`` and its direct/interference partitions."""

    MN: int
    C_h: np.ndarray = field(repr=False)
    key: str = ""

    @property
    def direct_positions(self) -> np.ndarray:
        k = np.arange(self.MN)
        return k + self.MN * k

    @property
    def C_g(self) -> np.ndarray:
        dp = self.direct_positions
        return self.C_h[np.ix_(dp, dp)]

    @property
    def C_htilde(self) -> np.ndarray:
        dp = self.direct_positions
        C = self.C_h.copy()
        C[dp, :] = 0
        C[:, dp] = 0
        return C

    @property
    def C_htilde_g(self) -> np.ndarray:
        dp = self.direct_positions
        C = self.C_h[:, dp].copy()
        C[dp, :] = 0
        return C

    @property
    def C_g_htilde(self) -> np.ndarray:
        return self.C_htilde_g.conj().T

    def trace_summary(self) -> dict:
        tr_h = float(np.real(np.trace(self.C_h)))
        tr_g = float(np.real(np.trace(self.C_g)))
        return {"trace_C_h": tr_h, "trace_C_g": tr_g, "trace_C_htilde": tr_h - tr_g}


def _repair_psd(C: np.ndarray, what: str) -> np.ndarray:
    C = (C + C.conj().T) / 2
    evals, evecs = np.linalg.eigh(C)
    floor = -1e-9 * max(np.real(np.trace(C)), 0.0) / C.shape[0]
    if evals[0] < floor:
        raise CovarianceError(f"{what} has eigenvalue {evals[0]:.3e} below floor {floor:.3e}")
    if evals[0] < 0:
        C = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
        C = (C + C.conj().T) / 2
    return C


def stats_key(grid: GridConfig, pair: PrototypePair, scattering: ScatteringFunction, quad: QuadratureSpec) -> str:
    payload = {
        "grid": [repr(grid.M), repr(grid.N), repr(float(grid.T)), repr(float(grid.F))],
        "pulse": [pair.kind, repr(float(pair.duration)), repr(complex(pair.normalization))],
        "scattering": [repr(float(scattering.tau_spread)), repr(float(scattering.doppler_spread)),
                       repr(float(scattering.level))],
        "quad": {k: repr(v) for k, v in asdict(quad).items()},
        "version": 1,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _check_convergence(grid, pair, scattering, quad, C_h, seed=0):
    if scattering.tau_spread == 0 and scattering.doppler_spread == 0:
        return
    dim = C_h.shape[0]
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, dim, quad.probe_count)
    cols = rng.integers(0, dim, quad.probe_count)
    tau, nu, w = quadrature_nodes(scattering, 2 * quad.nodes_per_axis)
    K = coupling_kernel(grid, pair, tau, nu)
    finer = np.sum(w * K[rows] * K[cols].conj(), axis=1)
    coarse = C_h[rows, cols]
    scale = np.max(np.abs(finer))
    change = np.abs(finer - coarse)
    if scale > 0 and np.max(change) > quad.convergence_tol * scale:
        worst = int(np.argmax(change))
        maps = grid_index_maps(grid)
        raise QuadratureError(
            "covariance quadrature did not converge at entry "
            f"{maps.linear_to_pair(rows[worst])} x {maps.linear_to_pair(cols[worst])}: "
            f"relative change {change[worst] / scale:.2e} > {quad.convergence_tol:.1e}"
        )


def build_second_order(
    grid: GridConfig,
    pair: PrototypePair,
    scattering: ScatteringFunction,
    quad: QuadratureSpec | None = None,
    cache_dir=None,
) -> ChannelSecondOrder:
    """Assemble ``C_h`` by quadrature, with an optional on-disk cache.

    ``cache_dir`` defaults to ``$ISCI_CACHE_DIR``. Caching is skipped when
    neither is set or when ``$ISCI_NO_CACHE`` is set.
    """
    quad = quad or QuadratureSpec()
    key = stats_key(grid, pair, scattering, quad)
    path = _cache_path(key, cache_dir)
    if path is not None and path.exists():
        try:
            return load_second_order(path, expected_key=key)
        except (ValueError, OSError) as exc:
            warnings.warn(f"ignoring stats cache {path}: {exc}")

    tau, nu, w = quadrature_nodes(scattering, quad.nodes_per_axis)
    K = coupling_kernel(grid, pair, tau, nu)
    C_h = (K * w) @ K.conj().T
    _check_convergence(grid, pair, scattering, quad, C_h)
    C_h = _repair_psd(C_h, "C_h")
    stats = ChannelSecondOrder(MN=grid.MN, C_h=C_h, key=key)

    if path is not None:
        save_second_order(stats, path)
    return stats


def _cache_path(key, cache_dir):
    if os.environ.get(NO_CACHE_ENV):
        return None
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if not cache_dir:
        return None
    return Path(cache_dir) / f"stats-{key[:32]}.npz"


def save_second_order(stats: ChannelSecondOrder, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, C_h=stats.C_h, MN=np.int64(stats.MN), key=np.array(stats.key))
    os.replace(tmp, path)


def load_second_order(path, expected_key: str | None = None) -> ChannelSecondOrder:
    with np.load(path, allow_pickle=False) as f:
        key = str(f["key"])
        if expected_key is not None and key != expected_key:
            raise ValueError(f"cache hash mismatch: file has {key[:12]}, expected {expected_key[:12]}")
        return ChannelSecondOrder(MN=int(f["MN"]), C_h=f["C_h"].copy(), key=key)
