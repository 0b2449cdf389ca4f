"""Structured operators on block-partitioned covariances and a Hermitian solver."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .layout import DataMask


class NotPSDError(np.linalg.LinAlgError):
    pass


def _block_size(C, cols_per_block):
    rows = C.shape[0]
    MN = int(round(np.sqrt(rows)))
    if MN * MN != rows or C.shape[1] != cols_per_block(MN):
        raise ValueError(f"expected a block matrix with (MN)^2 rows, got shape {C.shape}")
    return MN


def T_compress(C, mask: DataMask) -> np.ndarray:
    """``[tr(C_ij A_cd)]_ij`` for ``C = [C_ij]`` with ``MN x MN`` blocks."""
    C = np.asarray(C)
    MN = _block_size(C, lambda n: n * n)
    c = np.asarray(mask.c_d)
    if c.size != MN:
        raise ValueError(f"mask length {c.size} does not match block size {MN}")
    C4 = C.reshape(MN, MN, MN, MN)
    return np.einsum("iaja,a->ij", C4, c)


def R_reduce(C, mask: DataMask) -> np.ndarray:
    """``[c_ij[j] c_d[j]]_ij`` where ``c_ij = C[i*MN:(i+1)*MN, j]``."""
    C = np.asarray(C)
    MN = _block_size(C, lambda n: n)
    c = np.asarray(mask.c_d)
    if c.size != MN:
        raise ValueError(f"mask length {c.size} does not match block size {MN}")
    C3 = C.reshape(MN, MN, MN)
    j = np.arange(MN)
    return C3[:, j, j] * c[None, :]


def direct_positions(MN: int) -> np.ndarray:
    k = np.arange(MN)
    return k + MN * k


def embed_direct(g) -> np.ndarray:
    """Zero-pad ``g`` (length ``MN``) into a length-``(MN)^2`` coefficient vector."""
    g = np.asarray(g)
    MN = g.shape[-1]
    out = np.zeros(g.shape[:-1] + (MN * MN,), dtype=np.result_type(g, complex))
    out[..., direct_positions(MN)] = g
    return out


def extract_direct(h) -> np.ndarray:
    h = np.asarray(h)
    MN = int(round(np.sqrt(h.shape[-1])))
    return h[..., direct_positions(MN)]


def embed_covariances(C_gh_hat, C_gh_cross):
    """Scatter ``C_ghat`` (``MN x MN``) and ``C_ghat_h`` (``MN x (MN)^2``).

    Returns ``(C_hhat, C_hhat_h)`` as ``(MN)^2 x (MN)^2`` matrices with rows
    (and for ``C_hhat`` also columns) placed at the direct positions.
    """
    C_g = np.asarray(C_gh_hat)
    C_x = np.asarray(C_gh_cross)
    MN = C_g.shape[0]
    if C_g.shape != (MN, MN) or C_x.shape != (MN, MN * MN):
        raise ValueError("shapes must be (MN, MN) and (MN, MN^2)")
    dp = direct_positions(MN)
    C_hat = np.zeros((MN * MN, MN * MN), dtype=np.result_type(C_g, complex))
    C_hat[np.ix_(dp, dp)] = C_g
    C_cross = np.zeros((MN * MN, MN * MN), dtype=np.result_type(C_x, complex))
    C_cross[dp, :] = C_x
    return C_hat, C_cross


def hermitian_factor(K):
    """Lower Cholesky factor, retrying once with a small diagonal jitter."""
    K = np.asarray(K)
    scale = np.max(np.abs(K))
    if scale > 0 and np.max(np.abs(K - K.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    try:
        return linalg.cholesky(K, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    dim = K.shape[0]
    jitter = 1e-12 * np.real(np.trace(K)) / dim
    try:
        return linalg.cholesky(K + jitter * np.eye(dim), lower=True, check_finite=False)
    except linalg.LinAlgError:
        floor = np.linalg.eigvalsh((K + K.conj().T) / 2)[0]
        raise NotPSDError(f"matrix is not positive definite (smallest eigenvalue {floor:.3e})") from None


def hermitian_solve(K, Y):
    """``K^{-1} Y`` for Hermitian positive definite ``K``."""
    L = hermitian_factor(K)
    return linalg.cho_solve((L, True), Y, check_finite=False)


def logdet_hpd(K) -> float:
    """Natural log-determinant of a Hermitian positive definite matrix."""
    L = hermitian_factor(K)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
