"""Pilot/data placement on the grid and the symbol-dependent matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse

from .grid import GridConfig


@dataclass(frozen=True)
class FrameLayout:
    """Pilot/data partition of the ``MN`` grid cells.

    ``pilot_values`` are ordered like ``pilot_indices`` and all have
    modulus ``pilot_amplitude``.
    """

    MN: int
    pilot_indices: np.ndarray = field(repr=False)
    data_indices: np.ndarray = field(repr=False)
    pilot_amplitude: float
    data_variance: float
    pilot_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.pilot_indices, dtype=int)
        d = np.asarray(self.data_indices, dtype=int)
        if len(np.intersect1d(p, d)) or not np.array_equal(
            np.union1d(p, d), np.arange(self.MN)
        ):
            raise ValueError("pilot and data indices must partition the grid")
        vals = np.asarray(self.pilot_values, dtype=complex)
        if vals.shape != p.shape:
            raise ValueError("one pilot value per pilot index is required")
        if vals.size and not np.allclose(np.abs(vals), self.pilot_amplitude, rtol=0, atol=1e-12):
            raise ValueError("pilot values must have constant modulus sigma_p")
        if len(d) and not self.data_variance > 0:
            raise ValueError("data variance must be positive when data cells exist")
        object.__setattr__(self, "pilot_indices", np.sort(p))
        object.__setattr__(self, "data_indices", np.sort(d))
        object.__setattr__(self, "pilot_values", vals[np.argsort(p)])

    @property
    def L_d(self) -> int:
        return len(self.data_indices)

    @property
    def x_p(self) -> np.ndarray:
        x = np.zeros(self.MN, dtype=complex)
        x[self.pilot_indices] = self.pilot_values
        return x

    @property
    def mask(self) -> "DataMask":
        return DataMask.from_layout(self)

    def embed_data(self, d) -> np.ndarray:
        """Zero-padded data vector ``x_d`` (``D @ d``); stacks over leading axes."""
        d = np.asarray(d)
        x = np.zeros(d.shape[:-1] + (self.MN,), dtype=complex)
        x[..., self.data_indices] = d
        return x


@dataclass(frozen=True)
class DataMask:
    c_d: np.ndarray

    @classmethod
    def from_layout(cls, layout: FrameLayout) -> "DataMask":
        c = np.zeros(layout.MN)
        c[layout.data_indices] = 1.0
        return cls(c)

    @property
    def A_cd(self) -> np.ndarray:
        return np.diag(self.c_d)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.c_d)

    @property
    def L_d(self) -> int:
        return int(self.c_d.sum())


def _strides_for_density(grid: GridConfig, density):
    target = Fraction(density).limit_denominator(grid.MN)
    if target == 0:
        return None
    candidates = []
    for sm in range(1, grid.M + 1):
        for sn in range(1, grid.N + 1):
            if grid.M % sm or grid.N % sn:
                continue
            if Fraction(1, sm * sn) == target:
                candidates.append((abs(sm - sn), sm * sn, sm, sn))
    if not candidates:
        raise ValueError(
            f"pilot density {density} does not give a regular sublattice on a {grid.M}x{grid.N} grid"
        )
    _, _, sm, sn = min(candidates)
    return sm, sn


def build_equally_spaced_layout(
    grid: GridConfig,
    pilot_density: float = 0.25,
    sigma_p: float = 1.0,
    sigma_d2: float = 1.0,
    strides=None,
) -> FrameLayout:
    """Pilots on the sublattice ``m % sm == 0 and n % sn == 0``.

    The strides are derived from ``pilot_density`` (square-most lattice
    that divides the grid) unless given explicitly as ``(sm, sn)``.
    """
    if strides is None:
        if not 0.0 <= pilot_density <= 1.0:
            raise ValueError(f"pilot density must lie in [0, 1], got {pilot_density}")
        strides = _strides_for_density(grid, pilot_density)
    k = np.arange(grid.MN)
    m, n = k % grid.M, k // grid.M
    if strides is None:
        is_pilot = np.zeros(grid.MN, dtype=bool)
    else:
        sm, sn = strides
        if sm < 1 or sn < 1:
            raise ValueError(f"pilot strides must be positive, got {strides}")
        is_pilot = (m % sm == 0) & (n % sn == 0)
    pilots = k[is_pilot]
    return FrameLayout(
        MN=grid.MN,
        pilot_indices=pilots,
        data_indices=k[~is_pilot],
        pilot_amplitude=float(sigma_p),
        data_variance=float(sigma_d2),
        pilot_values=np.full(len(pilots), float(sigma_p), dtype=complex),
    )


class KronRowOperator:
    """Structured ``I_MN kron x^T``: row ``k`` holds ``x`` at columns ``k*MN:(k+1)*MN``."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=complex)
        if self.x.ndim != 1:
            raise ValueError("x must be a vector")
        self.MN = self.x.size
        self.shape = (self.MN, self.MN ** 2)

    def __matmul__(self, h):
        h = np.asarray(h)
        if h.shape[0] != self.MN ** 2:
            raise ValueError(f"dimension mismatch: expected {self.MN ** 2} rows, got {h.shape[0]}")
        return np.tensordot(self.x, h.reshape((self.MN, self.MN) + h.shape[1:]), axes=([0], [1]))

    def sandwich(self, C, y=None):
        """``A(x) C A(y)^H`` for a ``(MN)^2 x (MN)^2`` matrix, without forming ``A``."""
        y = self.x if y is None else np.asarray(y)
        MN = self.MN
        C4 = np.asarray(C).reshape(MN, MN, MN, MN)
        return np.einsum("iajb,a,b->ij", C4, self.x, y.conj(), optimize=True)

    def toarray(self) -> np.ndarray:
        return np.kron(np.eye(self.MN), self.x[None, :])

    def tosparse(self):
        return sparse.kron(sparse.identity(self.MN), sparse.csr_matrix(self.x[None, :]), format="csr")


def assemble_A(x, dense: bool = True):
    """``I_MN kron x^T``; pass ``dense=False`` for the structured operator."""
    op = KronRowOperator(x)
    return op.toarray() if dense else op


def assemble_B(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    return np.diag(x)


def selection_D(mask: DataMask) -> np.ndarray:
    """Identity columns at the data positions, so that ``D @ d = x_d``."""
    idx = mask.indices
    if idx.size == 0:
        raise ValueError("selection matrix is undefined for an empty data set")
    return np.eye(mask.c_d.size)[:, idx]


def sample_frame(layout: FrameLayout, seed):
    """Draw ``(x, d)``; ``seed`` is anything ``numpy.random.default_rng`` accepts."""
    rng = np.random.default_rng(seed)
    d = complex_normal(rng, layout.L_d, layout.data_variance)
    return layout.x_p + layout.embed_data(d), d


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
