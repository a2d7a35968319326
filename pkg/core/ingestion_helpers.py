# core/ingestion_helpers.py
# =============================================================================
# Ingesta de ratings, matriz de popularidad, split 80/20, shards por MEN y
# generador sintético Zipf.
# =============================================================================
from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from core.engine.errors import ConfigError, DataError, DataParseError
from core.engine.tensor import Matrix, RngStream

logger = logging.getLogger(__name__)

FORMATS = ("movielens-dat", "csv")
CSV_HEADER = ("user_id", "content_id", "rating", "timestamp")


# -----------------------------
# utils
# -----------------------------
def to_int(v, *, line_no: int, field_name: str) -> int:
    try:
        return int(str(v).strip())
    except (TypeError, ValueError):
        raise DataParseError(line_no, f"{field_name} no es entero: {v!r}") from None


def to_float(v, *, line_no: int, field_name: str) -> float:
    try:
        return float(str(v).strip().replace(",", "."))
    except (TypeError, ValueError):
        raise DataParseError(line_no, f"{field_name} no es numérico: {v!r}") from None


def normalize_headers(headers: list[str]) -> list[str]:
    if not headers:
        return []
    h0 = headers[0].lstrip("﻿")
    return [h0.strip().lower()] + [h.strip().lower() for h in headers[1:]]


# -----------------------------
# tipos
# -----------------------------
@dataclass(frozen=True)
class RatingEvent:
    """Factor de popularidad f_u^i del usuario u sobre el contenido i."""

    user_id: int
    content_id: int
    rating: float
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.user_id < 1 or self.content_id < 1:
            raise DataError(f"ids deben ser ≥ 1: {self.user_id}, {self.content_id}")
        if not self.rating >= 0:
            raise DataError(f"factor de popularidad negativo: {self.rating}")


@dataclass(frozen=True)
class RatingScale:
    """Reescalado lineal [lo, hi] → [0, 1] para entrenar; inverso para el RMSE."""

    lo: float = 1.0
    hi: float = 5.0

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise ConfigError(f"escala inválida [{self.lo}, {self.hi}]")

    def normalize(self, values):
        return (np.asarray(values, dtype=np.float64) - self.lo) / (self.hi - self.lo)

    def denormalize(self, values):
        return np.asarray(values, dtype=np.float64) * (self.hi - self.lo) + self.lo


class RatingMatrix:
    """
    Matriz dispersa usuarios×contenidos (X_n, X_cs) con máscara de observados.
    Filas en el orden de `users`, columnas en el orden de `contents` (catálogo 𝓘).
    """

    __slots__ = ("users", "contents", "rows", "cols", "values", "_user_index", "_content_index")

    def __init__(self, users: Sequence[int], contents: Sequence[int],
                 rows: np.ndarray, cols: np.ndarray, values: np.ndarray):
        self.users = tuple(int(u) for u in users)
        self.contents = tuple(int(c) for c in contents)
        if len(set(self.users)) != len(self.users) or len(set(self.contents)) != len(self.contents):
            raise DataError("índices de usuarios/contenidos duplicados")
        order = np.lexsort((cols, rows))
        self.rows = np.asarray(rows, dtype=np.int64)[order]
        self.cols = np.asarray(cols, dtype=np.int64)[order]
        self.values = np.asarray(values, dtype=np.float64)[order]
        for arr in (self.rows, self.cols, self.values):
            arr.setflags(write=False)
        if self.rows.size:
            if self.rows.max() >= len(self.users) or self.cols.max() >= len(self.contents):
                raise DataError("tripletas fuera de las dimensiones de la matriz")
            keys = self.rows * len(self.contents) + self.cols
            if np.unique(keys).size != keys.size:
                raise DataError("par (usuario, contenido) duplicado")
        self._user_index = {u: i for i, u in enumerate(self.users)}
        self._content_index = {c: j for j, c in enumerate(self.contents)}

    # ---- construcción ----
    @classmethod
    def from_events(cls, events: Iterable[RatingEvent], users: Sequence[int] | None = None,
                    contents: Sequence[int] | None = None) -> "RatingMatrix":
        events = deduplicate(events)
        users = sorted({e.user_id for e in events}) if users is None else users
        contents = sorted({e.content_id for e in events}) if contents is None else contents
        u_idx = {u: i for i, u in enumerate(users)}
        c_idx = {c: j for j, c in enumerate(contents)}
        try:
            rows = np.array([u_idx[e.user_id] for e in events], dtype=np.int64)
            cols = np.array([c_idx[e.content_id] for e in events], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"id fuera de los índices de la matriz: {exc}") from None
        vals = np.array([e.rating for e in events], dtype=np.float64)
        return cls(users, contents, rows, cols, vals)

    @classmethod
    def vstack(cls, parts: Sequence["RatingMatrix"]) -> "RatingMatrix":
        """Concatenación vertical (orden de men_id): X_cs a partir de los X_n."""
        if not parts:
            raise DataError("vstack sin partes")
        contents = parts[0].contents
        users: list[int] = []
        rows, cols, vals = [], [], []
        for p in parts:
            if p.contents != contents:
                raise DataError("los shards deben compartir el catálogo de contenidos")
            rows.append(p.rows + len(users))
            cols.append(p.cols)
            vals.append(p.values)
            users.extend(p.users)
        return cls(users, contents, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))

    # ---- vistas ----
    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_contents(self) -> int:
        return len(self.contents)

    @property
    def n_observed(self) -> int:
        return int(self.values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_users, self.n_contents

    @property
    def user_index(self) -> dict[int, int]:
        return self._user_index

    @property
    def content_index(self) -> dict[int, int]:
        return self._content_index

    def dense(self, fill: float = 0.0) -> Matrix:
        out = np.full(self.shape, fill, dtype=np.float64)
        out[self.rows, self.cols] = self.values
        return out

    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def entries(self) -> Iterator[tuple[int, int, float]]:
        for r, c, v in zip(self.rows, self.cols, self.values):
            yield self.users[r], self.contents[c], float(v)

    def with_values(self, values: np.ndarray) -> "RatingMatrix":
        return RatingMatrix(self.users, self.contents, self.rows, self.cols, values)

    def scaled(self, scale: RatingScale) -> "RatingMatrix":
        return self.with_values(scale.normalize(self.values))

    def subset_users(self, user_ids: Sequence[int]) -> "RatingMatrix":
        """Filas de `user_ids` (en ese orden); conserva el eje completo de contenidos."""
        try:
            old = np.array([self._user_index[u] for u in user_ids], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"usuario desconocido: {exc}") from None
        remap = np.full(self.n_users, -1, dtype=np.int64)
        remap[old] = np.arange(old.size)
        keep = remap[self.rows] >= 0
        return RatingMatrix(user_ids, self.contents, remap[self.rows[keep]],
                            self.cols[keep], self.values[keep])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RatingMatrix):
            return NotImplemented
        return (self.users == other.users and self.contents == other.contents
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self) -> str:
        return f"RatingMatrix({self.n_users}×{self.n_contents}, {self.n_observed} observados)"


def deduplicate(events: Iterable[RatingEvent]) -> list[RatingEvent]:
    """Un evento por (usuario, contenido): gana el timestamp más reciente (empate: el último)."""
    latest: dict[tuple[int, int], RatingEvent] = {}
    for e in events:
        key = (e.user_id, e.content_id)
        prev = latest.get(key)
        if prev is None or e.timestamp >= prev.timestamp:
            latest[key] = e
    return list(latest.values())


# -----------------------------
# INGESTA
# -----------------------------
def parse_movielens(lines: Iterable[str]) -> list[RatingEvent]:
    """Líneas `UserID::MovieID::Rating::Timestamp`."""
    events = []
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("::")
        if len(parts) != 4:
            raise DataParseError(i, f"se esperaban 4 campos separados por '::', hay {len(parts)}")
        try:
            events.append(RatingEvent(
                to_int(parts[0], line_no=i, field_name="UserID"),
                to_int(parts[1], line_no=i, field_name="MovieID"),
                to_float(parts[2], line_no=i, field_name="Rating"),
                to_int(parts[3], line_no=i, field_name="Timestamp"),
            ))
        except DataParseError:
            raise
        except DataError as exc:
            raise DataParseError(i, str(exc)) from None
    return events


def parse_csv(io_text) -> list[RatingEvent]:
    """CSV con cabecera `user_id,content_id,rating,timestamp` (delimitador detectado)."""
    sample = io_text.read(4096)
    io_text.seek(0)
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=[",", ";", "\t"])
    except csv.Error:
        dialect = csv.excel

    reader = csv.DictReader(io_text, dialect=dialect)
    headers = normalize_headers(reader.fieldnames or [])
    missing = [h for h in CSV_HEADER[:3] if h not in headers]
    if missing:
        raise DataParseError(1, f"faltan columnas {missing} en la cabecera")
    reader.fieldnames = headers

    events = []
    for row in reader:
        i = reader.line_num
        if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
            continue
        try:
            events.append(RatingEvent(
                to_int(row.get("user_id"), line_no=i, field_name="user_id"),
                to_int(row.get("content_id"), line_no=i, field_name="content_id"),
                to_float(row.get("rating"), line_no=i, field_name="rating"),
                to_int(row.get("timestamp") or 0, line_no=i, field_name="timestamp"),
            ))
        except DataParseError:
            raise
        except DataError as exc:
            raise DataParseError(i, str(exc)) from None
    return events


def ingest(path: Path | str, fmt: str = "movielens-dat") -> list[RatingEvent]:
    if fmt not in FORMATS:
        raise ConfigError(f"formato desconocido {fmt!r}; opciones: {', '.join(FORMATS)}")
    path = Path(path)
    # MovieLens 1M viene en latin-1; los ids y ratings son ASCII igual
    encoding = "latin-1" if fmt == "movielens-dat" else "utf-8"
    with path.open(encoding=encoding, newline="") as fh:
        events = parse_movielens(fh) if fmt == "movielens-dat" else parse_csv(fh)
    if not events:
        raise DataError(f"{path}: archivo sin eventos")
    logger.info("ingesta %s: %d eventos, %d usuarios, %d contenidos", path.name, len(events),
                len({e.user_id for e in events}), len({e.content_id for e in events}))
    return events


def write_events_csv(events: Iterable[RatingEvent], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for e in events:
            writer.writerow((e.user_id, e.content_id, repr(float(e.rating)), e.timestamp))


# -----------------------------
# SPLIT 80/20 (estratificado por usuario)
# -----------------------------
@dataclass(frozen=True, eq=False)
class SplitPair:
    train: RatingMatrix
    test: RatingMatrix
    seed: int


def _test_quota(counts: dict[int, int], target: int) -> dict[int, int]:
    """Reparte `target` entradas de test entre usuarios elegibles (≥ 2 ratings, ≥ 1 en train)."""
    eligible = {u: n for u, n in counts.items() if n >= 2}
    total = sum(eligible.values())
    quota, frac = {}, {}
    for u, n in eligible.items():
        ideal = Fraction(n * target, total) if total else Fraction(0)
        quota[u] = min(int(ideal), n - 1)
        frac[u] = ideal - int(ideal)
    remaining = target - sum(quota.values())
    order = sorted(eligible, key=lambda u: (-frac[u], u))
    while remaining > 0:
        progressed = False
        for u in order:
            if remaining == 0:
                break
            if quota[u] < eligible[u] - 1:
                quota[u] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            logger.warning("split: no se alcanzó la cuota de test (faltan %d entradas)", remaining)
            break
    return quota


def split(events: Iterable[RatingEvent], ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Split aleatorio por usuario: todo usuario conserva ≥ 1 rating en train."""
    events = deduplicate(events)
    if len(events) < 5:
        raise DataError(f"split requiere ≥ 5 eventos (hay {len(events)})")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"ratio debe estar en (0,1): {ratio}")

    by_user: dict[int, list[RatingEvent]] = defaultdict(list)
    for e in events:
        by_user[e.user_id].append(e)
    singles = [u for u, evs in by_user.items() if len(evs) < 2]
    if singles:
        logger.info("split: %d usuarios con < 2 ratings quedan completos en train", len(singles))

    total = len(events)
    target_test = total - int(Fraction(total) * Fraction(ratio).limit_denominator(10**6) + Fraction(1, 2))
    quota = _test_quota({u: len(v) for u, v in by_user.items()}, target_test)

    rng = RngStream(seed)
    train, test = [], []
    for u in sorted(by_user):
        evs = sorted(by_user[u], key=lambda e: e.content_id)
        k = quota.get(u, 0)
        chosen = set(rng.permutation(len(evs))[:k].tolist()) if k else set()
        for j, e in enumerate(evs):
            (test if j in chosen else train).append(e)

    users = sorted(by_user)
    contents = sorted({e.content_id for e in events})
    return SplitPair(RatingMatrix.from_events(train, users, contents),
                     RatingMatrix.from_events(test, users, contents), seed)


# -----------------------------
# SHARDS POR MEN
# -----------------------------
ShardManifest = dict[int, list[int]]


def shard_manifest(x: RatingMatrix, n: int, seed: int = 0) -> ShardManifest:
    """Barajado con semilla + round-robin: tamaños difieren en ≤ 1."""
    if n <= 0:
        raise ConfigError(f"número de MENs debe ser ≥ 1 (llegó {n})")
    if x.n_users < n:
        raise ConfigError(f"{x.n_users} usuarios no alcanzan para {n} MENs")
    perm = RngStream(seed).permutation(x.n_users)
    groups: ShardManifest = {m: [] for m in range(1, n + 1)}
    for pos, row in enumerate(perm):
        groups[pos % n + 1].append(x.users[row])
    return {m: sorted(users) for m, users in groups.items()}


def shard(x: RatingMatrix, n: int, seed: int = 0) -> list[RatingMatrix]:
    manifest = shard_manifest(x, n, seed)
    return shards_from_manifest(x, manifest)


def shards_from_manifest(x: RatingMatrix, manifest: ShardManifest) -> list[RatingMatrix]:
    return [x.subset_users(manifest[m]) for m in sorted(manifest)]


def home_men(manifest: ShardManifest) -> dict[int, int]:
    """usuario → MEN de origen."""
    return {u: m for m, users in manifest.items() for u in users}


def write_manifest(manifest: ShardManifest, path: Path | str) -> None:
    payload = {str(m): users for m, users in sorted(manifest.items())}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: Path | str) -> ShardManifest:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {int(m): [int(u) for u in users] for m, users in raw.items()}


# -----------------------------
# GENERADOR SINTÉTICO ZIPF
# -----------------------------
def zipf_weights(contents: int, s: float) -> np.ndarray:
    """Popularidad ∝ rank^(−s), normalizada."""
    ranks = np.arange(1, contents + 1, dtype=np.float64)
    w = ranks ** (-float(s))
    return w / w.sum()


def draw_zipf_requests(n: int, contents: int, s: float, seed: int = 0) -> list[int]:
    """n peticiones (con reemplazo) de ids de contenido 1..contents."""
    idx = RngStream(seed).choice(contents, n, replace=True, p=zipf_weights(contents, s))
    return [int(i) + 1 for i in idx]


def _zipf_rater_counts(users: int, contents: int, total: int, p: np.ndarray) -> np.ndarray:
    """
    Reparte `total` ratings entre contenidos ∝ p con tope `users` por contenido:
    los que llegan al tope quedan fijos y el resto se reparte de nuevo.
    Redondeo por mayor resto (empate → id menor), así la suma es exacta.
    """
    share = np.zeros(contents, dtype=np.float64)
    free = np.ones(contents, dtype=bool)
    while free.any():
        remaining = total - users * int((~free).sum())
        share[free] = remaining * p[free] / p[free].sum()
        over = free & (share >= users)
        if not over.any():
            break
        share[over] = users
        free &= ~over

    counts = np.floor(share + 1e-9).astype(np.int64)
    short = int(total - counts.sum())
    if short > 0:
        frac = share - counts
        frac[counts >= users] = -1.0
        order = np.lexsort((np.arange(contents), -frac))
        counts[order[:short]] += 1
    return counts


def synth_zipf(users: int, contents: int, density: float = 0.2, s: float = 1.0,
               seed: int = 0, latent_rank: int = 3) -> list[RatingEvent]:
    """
    round(density·users·contents) ratings repartidos con popularidad ∝ rank^(−s)
    (cada contenido topa en `users`); los usuarios de cada contenido se eligen
    al azar. Un usuario sin ratings no aparece en los eventos. El rating (1..5) mezcla popularidad, un término latente de bajo
    rango y ruido.
    """
    if not 0.0 < density <= 1.0:
        raise ConfigError(f"densidad fuera de (0,1]: {density}")
    if s < 0:
        raise ConfigError(f"exponente Zipf negativo: {s}")
    if users < 1 or contents < 1:
        raise ConfigError("users y contents deben ser ≥ 1")

    rng = RngStream(seed)
    p = zipf_weights(contents, s)
    total = max(1, int(round(density * users * contents)))
    counts = _zipf_rater_counts(users, contents, total, p)

    rated = np.zeros((users, contents), dtype=bool)
    for i, n in enumerate(counts):
        if n:
            rated[rng.choice(users, int(n), replace=False), i] = True

    popularity = p / p.max()                          # 1.0 para el más popular
    u_lat = rng.normal(0.0, 1.0, (users, latent_rank))
    c_lat = rng.normal(0.0, 1.0, (contents, latent_rank))
    bias = rng.normal(0.0, 0.3, users)

    events = []
    for u in range(users):
        chosen = np.flatnonzero(rated[u])
        taste = c_lat[chosen] @ u_lat[u] / np.sqrt(latent_rank)
        noise = rng.normal(0.0, 0.3, chosen.size)
        raw = 2.5 + 1.5 * popularity[chosen] + 0.8 * taste + bias[u] + noise
        ratings = np.clip(np.rint(raw), 1, 5)
        for c, r in zip(chosen, ratings):
            events.append(RatingEvent(u + 1, int(c) + 1, float(r), 0))
    return events
