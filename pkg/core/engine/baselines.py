# =============================================================================
# baselines.py — Predictores de comparación: SVD truncada y NMF
# =============================================================================
# Ambos trabajan sobre la matriz con ceros en las entradas no observadas
# (zero-fill), igual que el pipeline SVD clásico de caché proactiva.
# -----------------------------------------------------------------------------
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from core.engine.errors import ConfigError, DataError
from core.engine.tensor import Matrix, RngStream, matmul

logger = logging.getLogger(__name__)

NMF_EPS = 1e-12     # evita divisiones por cero en las actualizaciones multiplicativas
DEFAULT_RANK = 16


@dataclass(frozen=True, eq=False)
class FactorPair:
    basis: Matrix            # U·Σ (SVD) o W (NMF)
    coefficients: Matrix     # Vᵀ (SVD) o H (NMF)
    rank: int
    objective: tuple[float, ...] = field(default=())   # ‖X − WH‖²_F por iteración (NMF)

    def reconstruct(self) -> Matrix:
        return matmul(self.basis, self.coefficients)


def _zero_filled(x) -> Matrix:
    return x.dense() if hasattr(x, "dense") else np.asarray(x, dtype=np.float64)


# =============================================================================
# SVD
# =============================================================================
def svd_factors(x, k: int) -> FactorPair:
    dense = _zero_filled(x)
    max_rank = min(dense.shape)
    if not 1 <= k <= max_rank:
        raise ConfigError(f"rango SVD k={k} fuera de [1, {max_rank}]")
    u, s, vt = np.linalg.svd(dense, full_matrices=False)
    return FactorPair(u[:, :k] * s[:k], vt[:k, :], k)


def svd_predict(x, k: int = DEFAULT_RANK) -> Matrix:
    """Reconstrucción de rango k; puede contener negativos (se conservan)."""
    return svd_factors(x, k).reconstruct()


# =============================================================================
# NMF (actualizaciones multiplicativas, pérdida de Frobenius)
# =============================================================================
def nmf_factors(x, k: int = DEFAULT_RANK, iters: int = 200, seed: int = 0) -> FactorPair:
    v = _zero_filled(x)
    if k < 1:
        raise ConfigError(f"rango NMF k={k} debe ser ≥ 1")
    if (v < 0).any():
        raise DataError("NMF requiere entradas observadas ≥ 0")

    rng = RngStream(seed)
    rows, cols = v.shape
    w = rng.random((rows, k))
    h = rng.random((k, cols))
    objective = [float(np.sum((v - w @ h) ** 2))]
    for _ in range(iters):
        h = h * (w.T @ v) / (w.T @ w @ h + NMF_EPS)
        w = w * (v @ h.T) / (w @ (h @ h.T) + NMF_EPS)
        objective.append(float(np.sum((v - w @ h) ** 2)))
    logger.debug("NMF k=%d: objetivo %.6g → %.6g en %d iteraciones",
                 k, objective[0], objective[-1], iters)
    return FactorPair(w, h, k, tuple(objective))


def nmf_predict(x, k: int = DEFAULT_RANK, iters: int = 200, seed: int = 0) -> Matrix:
    """W×H, elemento a elemento ≥ 0."""
    return nmf_factors(x, k, iters, seed).reconstruct()
