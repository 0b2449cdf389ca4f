"""Time-frequency lattice and prototype pulses of a Weyl-Heisenberg system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    """Time-frequency grid with ``M`` subcarriers and ``N`` symbols.

    ``T`` is the symbol duration in seconds and ``F`` the subcarrier
    spacing in Hz.
    """

    M: int = 6
    N: int = 4
    T: float = 1.0 / 30e3
    F: float = 30e3

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.T > 0 or not self.F > 0:
            raise ValueError(f"T and F must be positive, got T={self.T!r}, F={self.F!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def TF(self) -> float:
        return self.T * self.F

    @property
    def MN(self) -> int:
        return self.M * self.N


@dataclass(frozen=True)
class PrototypePair:
    """Transmit/receive pulse pair.

    Only ``kind="rect"`` is implemented: both pulses are ``1/sqrt(T)`` on
    ``[0, T)``, which gives a closed-form cross-ambiguity.
    """

    kind: str = "rect"
    duration: float = 1.0 / 30e3
    normalization: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.kind != "rect":
            raise ValueError(f"unsupported pulse kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")

    @classmethod
    def for_grid(cls, grid: GridConfig, kind: str = "rect") -> "PrototypePair":
        return cls(kind=kind, duration=grid.T)

    def pulses(self, t):
        """Evaluate ``(g_t(t), g_r(t))`` pointwise."""
        t = np.asarray(t, dtype=float)
        T = self.duration
        g = np.where((t >= 0.0) & (t < T), 1.0 / np.sqrt(T), 0.0)
        return g * self.normalization, g

    def support(self):
        return 0.0, self.duration


def cross_ambiguity(pair: PrototypePair, tau, nu):
    r"""Cross-ambiguity :math:`\int g_t(t) g_r^*(t+\tau) e^{j2\pi\nu(t+\tau)} dt`.

    For rectangular pulses on ``[0, T)`` the substitution ``s = t + tau``
    leaves ``(1/T) \int_a^b e^{j2\pi\nu s} ds`` with ``a = max(tau, 0)`` and
    ``b = T + min(tau, 0)``, which is evaluated exactly. Broadcasts over
    ``tau`` and ``nu``.
    """
    tau = np.asarray(tau, dtype=float)
    nu = np.asarray(nu, dtype=float)
    T = pair.duration
    a = np.maximum(tau, 0.0)
    b = T + np.minimum(tau, 0.0)
    width = np.clip(b - a, 0.0, None)
    value = (width / T) * np.sinc(nu * width) * np.exp(1j * np.pi * nu * (a + b))
    return pair.normalization * value


@dataclass(frozen=True)
class IndexMaps:
    """Bijections between grid cells and linear indices.

    A cell ``(m, n)`` maps to ``k = m + M*n`` (column-major ``vec``). A
    coefficient ``H_{m,n}[mu, nl]`` from transmit cell ``kl`` to receive cell
    ``k`` sits at ``i = kl + MN*k`` of ``h = vec(H_fm^T)``.
    """

    M: int
    N: int
    cell_m: np.ndarray = field(repr=False)
    cell_n: np.ndarray = field(repr=False)

    @property
    def MN(self) -> int:
        return self.M * self.N

    def cell_to_linear(self, m, n):
        return np.asarray(m) + self.M * np.asarray(n)

    def linear_to_cell(self, k):
        k = np.asarray(k)
        return k % self.M, k // self.M

    def pair_to_linear(self, rx, tx):
        """``((m, n), (mu, nl)) -> i``; receive cell first, then transmit."""
        k = self.cell_to_linear(*rx)
        kl = self.cell_to_linear(*tx)
        return kl + self.MN * k

    def linear_to_pair(self, i):
        i = np.asarray(i)
        k, kl = i // self.MN, i % self.MN
        return self.linear_to_cell(k), self.linear_to_cell(kl)

    @property
    def direct_positions(self) -> np.ndarray:
        k = np.arange(self.MN)
        return k + self.MN * k

    def coefficient_table(self):
        """Per-coefficient ``(m, n, mu, nl)`` arrays of length ``(MN)**2``."""
        i = np.arange(self.MN ** 2)
        (m, n), (mu, nl) = self.linear_to_pair(i)
        return m, n, mu, nl


def grid_index_maps(grid: GridConfig) -> IndexMaps:
    k = np.arange(grid.MN)
    return IndexMaps(grid.M, grid.N, k % grid.M, k // grid.M)
