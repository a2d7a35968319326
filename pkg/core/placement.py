# =============================================================================
# placement.py — Ubicación de contenidos: agregación por MEN + top-R
# =============================================================================
# f̂_n^i = Σ_{u ∈ 𝓤_n} f̂_u^i ; R = floor(S_n / tamaño) ; desempate por id.
# Para DL/DDL, f̂_u^i puede ser la demanda esperada (rating × propensión).
# -----------------------------------------------------------------------------
from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.engine.errors import ConfigError, ContractError
from core.engine.tensor import Matrix

MB = 1_000_000
DEFAULT_CONTENT_SIZE = 200 * MB


@dataclass(frozen=True)
class ContentCatalog:
    content_ids: tuple[int, ...]
    content_size: int = DEFAULT_CONTENT_SIZE   # bytes, igual para todos

    def __post_init__(self) -> None:
        if self.content_size <= 0:
            raise ConfigError(f"tamaño de contenido debe ser > 0: {self.content_size}")
        object.__setattr__(self, "content_ids", tuple(int(c) for c in self.content_ids))

    def __contains__(self, content_id: int) -> bool:
        return content_id in set(self.content_ids)

    @property
    def size_bits(self) -> int:
        return self.content_size * 8


@dataclass(frozen=True)
class MenPlacement:
    capacity_bytes: int
    contents: tuple[int, ...]


@dataclass(frozen=True)
class PlacementPlan:
    """men_id → contenidos cacheados (orden descendente de puntaje)."""

    entries: Mapping[int, MenPlacement]
    content_size: int = DEFAULT_CONTENT_SIZE

    def __post_init__(self) -> None:
        for men_id, entry in self.entries.items():
            if len(set(entry.contents)) != len(entry.contents):
                raise ContractError(f"MEN-{men_id}: contenidos duplicados en caché")
            if len(entry.contents) * self.content_size > entry.capacity_bytes:
                raise ContractError(f"MEN-{men_id}: se excede la capacidad {entry.capacity_bytes}")

    def cached(self, men_id: int) -> frozenset[int]:
        entry = self.entries.get(men_id)
        return frozenset(entry.contents) if entry else frozenset()

    def to_dict(self) -> dict:
        return {
            str(m): {"capacity_bytes": e.capacity_bytes, "contents": list(e.contents)}
            for m, e in sorted(self.entries.items())
        }

    def write_json(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


# =============================================================================
# OPERACIONES
# =============================================================================
def aggregate_popularity(pred: Matrix, users_of_men: Iterable[int],
                         user_index: Mapping[int, int],
                         content_ids: Sequence[int]) -> dict[int, float]:
    """Suma por contenido de los factores predichos sobre exactamente los usuarios del MEN."""
    users = list(users_of_men)
    if not users:
        raise ContractError("agregación sin usuarios")
    if pred.shape[1] != len(content_ids):
        raise ContractError(f"predicción con {pred.shape[1]} columnas, catálogo de {len(content_ids)}")
    rows = []
    for u in users:
        r = user_index.get(u)
        if r is None or not 0 <= r < pred.shape[0]:
            raise ContractError(f"usuario desconocido: {u}")
        rows.append(r)
    sums = pred[np.array(rows)].sum(axis=0)
    return {int(c): float(s) for c, s in zip(content_ids, sums)}


def place_top_r(scores: Mapping[int, float], capacity: int,
                content_size: int = DEFAULT_CONTENT_SIZE) -> MenPlacement:
    """R = floor(S_n / tamaño) contenidos de mayor puntaje; empate → id menor."""
    if content_size <= 0:
        raise ConfigError("tamaño de contenido debe ser > 0")
    r = max(0, int(capacity) // int(content_size))
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return MenPlacement(int(capacity), tuple(c for c, _ in ranked[:r]))


def build_plan(pred: Matrix, user_index: Mapping[int, int], manifest: Mapping[int, Sequence[int]],
               catalog: ContentCatalog, capacity: int, *, global_aggregation: bool = False) -> PlacementPlan:
    """
    Plan para todos los MENs con la misma capacidad S_n. Con global_aggregation
    cada MEN suma sobre todos los usuarios 𝓤 (lectura literal del modo DL: cachés idénticas).
    """
    all_users = [u for m in sorted(manifest) for u in manifest[m]]
    global_scores = (aggregate_popularity(pred, all_users, user_index, catalog.content_ids)
                     if global_aggregation else None)
    entries = {}
    for men_id in sorted(manifest):
        scores = global_scores if global_scores is not None else aggregate_popularity(
            pred, manifest[men_id], user_index, catalog.content_ids)
        entries[men_id] = place_top_r(scores, capacity, catalog.content_size)
    return PlacementPlan(entries, catalog.content_size)


# =============================================================================
# DEMANDA ESPERADA (modelos que predicen ratings)
# =============================================================================
def demand_weights(counts, n_users: int, split_ratio: float) -> np.ndarray:
    """
    Probabilidad de que un usuario que aún no consumió el contenido i lo pida
    en la ventana de evaluación: φ(1−s)/(1−φs), con φ = c_i/(U·s) la fracción
    de usuarios que lo consumen en total (acotada a 1) y s la fracción observada.
    Sólo usa conteos por contenido: en DDL cada MEN aporta los suyos.
    """
    if n_users < 1:
        raise ContractError("pesos de demanda sin usuarios")
    if not 0.0 < split_ratio < 1.0:
        raise ConfigError(f"fracción observada fuera de (0,1): {split_ratio}")
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ContractError("conteos negativos")
    phi = np.minimum(counts / (n_users * split_ratio), 1.0)
    return phi * (1.0 - split_ratio) / (1.0 - phi * split_ratio)


def expected_demand(pred: Matrix, consumed: np.ndarray, weights) -> Matrix:
    """f̂_u^i = r̂_ui · w_i si u aún no consumió i; 0 si ya lo consumió."""
    weights = np.asarray(weights, dtype=np.float64)
    if consumed.shape != pred.shape:
        raise ContractError(f"máscara {consumed.shape} ≠ predicción {pred.shape}")
    if weights.shape != (pred.shape[1],):
        raise ContractError(f"{weights.size} pesos para {pred.shape[1]} contenidos")
    return np.where(consumed, 0.0, np.clip(pred, 0.0, None) * weights[None, :])
