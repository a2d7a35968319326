# =============================================================================
# evaluation.py — Métricas: RMSE sobre el test y simulación de peticiones
# =============================================================================
# Modelo de retardo: solo transmisión (tamaño/ancho de banda por salto).
#   local   : size/bw_user            (o 0 con zero_local_delay)
#   vecino  : size/bw_men + size/bw_user
#   CS      : size/bw_cs  + size/bw_user
# -----------------------------------------------------------------------------
from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from core.engine.errors import ConfigError, ContractError, DegenerateInputError
from core.engine.tensor import Matrix
from core.placement import ContentCatalog, MenPlacement, PlacementPlan

logger = logging.getLogger(__name__)

MBPS = 1_000_000

Request = tuple[int, int]   # (usuario, contenido)


@dataclass(frozen=True)
class NetworkTopology:
    n_mens: int = 6
    bw_cs: float = 60 * MBPS       # MEN ↔ CS (backhaul)
    bw_men: float = 100 * MBPS     # MEN ↔ MEN
    bw_user: float = 100 * MBPS    # MEN ↔ usuario
    adjacency: frozenset[tuple[int, int]] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.n_mens < 1:
            raise ConfigError("la topología necesita ≥ 1 MEN")
        if min(self.bw_cs, self.bw_men, self.bw_user) <= 0:
            raise ConfigError("los anchos de banda deben ser > 0")
        if self.adjacency is None:
            mesh = frozenset(combinations(range(1, self.n_mens + 1), 2))
            object.__setattr__(self, "adjacency", mesh)
        else:
            # simétrica por construcción: se guardan pares (menor, mayor)
            pairs = frozenset((min(a, b), max(a, b)) for a, b in self.adjacency if a != b)
            object.__setattr__(self, "adjacency", pairs)

    def neighbors(self, men_id: int) -> list[int]:
        out = [b for a, b in self.adjacency if a == men_id]
        out += [a for a, b in self.adjacency if b == men_id]
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "n_mens": self.n_mens, "bw_cs": self.bw_cs, "bw_men": self.bw_men,
            "bw_user": self.bw_user, "adjacency": sorted(list(p) for p in self.adjacency),
        }


@dataclass(frozen=True)
class ReplayResult:
    requests: int
    local: int
    neighbor: int
    cs: int
    hit_rate: float
    avg_delay_s: float

    def __post_init__(self) -> None:
        if self.local + self.neighbor + self.cs != self.requests:
            raise ContractError("local + vecino + CS ≠ peticiones")


# =============================================================================
# RMSE
# =============================================================================
def rmse(pred: Matrix, truth) -> float:
    """
    sqrt(media de (pred − real)²) sobre las entradas observadas del test.
    `pred` está alineada a los ejes (usuarios, contenidos) de `truth` y en
    unidades de rating.
    """
    if truth.n_observed == 0:
        raise DegenerateInputError("conjunto de test vacío")
    if pred.shape != truth.shape:
        raise ContractError(f"predicción {pred.shape} no calza con test {truth.shape}")
    residual = pred[truth.rows, truth.cols] - truth.values
    return float(math.sqrt(np.mean(residual ** 2)))


# =============================================================================
# TRAZA DE PETICIONES
# =============================================================================
def build_request_trace(test) -> list[Request]:
    """Una petición por entrada observada del test, ordenadas por (usuario, contenido)."""
    return sorted((u, c) for u, c, _ in test.entries())


# =============================================================================
# REPLAY
# =============================================================================
def replay(plan: PlacementPlan, topo: NetworkTopology, requests: Iterable[Request],
           catalog: ContentCatalog, home_of: Mapping[int, int], *,
           count_neighbor_hits: bool = False, zero_local_delay: bool = False) -> ReplayResult:
    """Pliegue puro sobre la traza; las cachés son estáticas (sin desalojo)."""
    known = set(catalog.content_ids)
    bits = catalog.size_bits
    user_leg = bits / topo.bw_user
    local_delay = 0.0 if zero_local_delay else user_leg
    neighbor_delay = bits / topo.bw_men + user_leg
    cs_delay = bits / topo.bw_cs + user_leg

    neighbors = {m: topo.neighbors(m) for m in range(1, topo.n_mens + 1)}
    local = neighbor = cs = 0
    for user, content in requests:
        if content not in known:
            raise ContractError(f"contenido desconocido: {content}")
        home = home_of.get(user)
        if home is None:
            raise ContractError(f"usuario {user} sin MEN de origen")
        if content in plan.cached(home):
            local += 1
        elif any(content in plan.cached(nb) for nb in neighbors.get(home, ())):
            neighbor += 1
        else:
            cs += 1

    n = local + neighbor + cs
    total_delay = local * local_delay + neighbor * neighbor_delay + cs * cs_delay
    hits = local + neighbor if count_neighbor_hits else local
    return ReplayResult(
        requests=n, local=local, neighbor=neighbor, cs=cs,
        hit_rate=hits / n if n else 0.0,
        avg_delay_s=total_delay / n if n else 0.0,
    )


def oracle_plan(requests: Sequence[Request], home_of: Mapping[int, int],
                catalog: ContentCatalog, n_mens: int) -> PlacementPlan:
    """Cota superior: cada MEN cachea todo lo que sus usuarios piden."""
    wanted: dict[int, set[int]] = {m: set() for m in range(1, n_mens + 1)}
    for user, content in requests:
        wanted[home_of[user]].add(content)
    entries = {
        m: MenPlacement(len(cs) * catalog.content_size, tuple(sorted(cs)))
        for m, cs in wanted.items()
    }
    return PlacementPlan(entries, catalog.content_size)
