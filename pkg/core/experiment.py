# =============================================================================
# experiment.py — Orquestación de experimentos (SVD, NMF, DL, DDL)
# =============================================================================
# Contiene:
# 1) ExperimentConfig + resolución (defaults ← JSON con claves con punto ← CLI)
# 2) Preparación de datos: ingesta o sintético → split 80/20 → shards por MEN
# 3) Ajuste de cada método y predicción de la matriz completa
# 4) run_experiment: RMSE + placement por capacidad + replay → results.csv
# 5) Artefactos: curvas de aprendizaje, metadata, manifest, placements
# 6) Sweep de tiempos de aprendizaje según N (timing.csv)
# 7) Registro de la corrida en BD (TblExperimentRun / TblMethodResult)
# -----------------------------------------------------------------------------
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.files.base import ContentFile
from django.core.files.storage import default_storage
from django.db import transaction

from core.engine.baselines import nmf_factors, svd_predict
from core.engine.dist import Topology, TrainConfig, TrainLog, run_centralized, run_distributed
from core.engine.errors import ConfigError, ContractError, DataError, DivergedError
from core.engine.network import DropoutSpec, predict_matrix
from core.engine.optim import AdamConfig, AdamMode
from core.engine.params import ModelParams
from core.engine.tensor import Matrix
from core.evaluation import (
    MBPS, NetworkTopology, build_request_trace, replay, rmse,
)
from core.forms import DEFAULTS, SECTION_OF, ExperimentConfigForm, dotted_key
from core.ingestion_helpers import (
    RatingEvent, RatingMatrix, RatingScale, ShardManifest, SplitPair, home_men, ingest,
    shard_manifest, shards_from_manifest, split, synth_zipf, write_manifest,
)
from core.models import TblExperimentRun, TblMethodResult
from core.placement import (
    MB, ContentCatalog, PlacementPlan, build_plan, demand_weights, expected_demand,
)

logger = logging.getLogger(__name__)

RESULTS_HEADER = ("method", "capacity_bytes", "rmse", "hit_rate", "avg_delay_s", "local", "neighbor", "cs")
TIMING_HEADER = ("method", "mens", "epochs", "wall_ms", "final_loss")

# Índices fijos para derivar semillas disjuntas por método
SEED_LABELS = {"svd": 1, "nmf": 2, "dl": 3, "ddl": 4}


# =============================================================================
# CONFIGURACIÓN
# =============================================================================
@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path | None
    fmt: str
    synth_users: int | None
    synth_contents: int
    synth_density: float
    synth_zipf: float
    split_ratio: float
    scale: RatingScale
    methods: tuple[str, ...]
    train: TrainConfig
    svd_rank: int
    nmf_rank: int
    nmf_iters: int
    network: NetworkTopology
    content_size: int                     # bytes
    capacities: tuple[int, ...]           # bytes por MEN
    out: Path
    seed: int
    dl_global_agg: bool = True
    placement_score: str = "demand"
    count_neighbor_hits: bool = False
    zero_local_delay: bool = False
    parallel: bool = False
    resolved: Mapping = field(default_factory=dict, compare=False)   # claves con punto

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: Mapping) -> str:
    canonical = json.dumps(dict(resolved), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _as_form_value(value):
    """Listas del JSON → texto separado por comas (lo que espera el formulario)."""
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return value


def load_config_file(path: Path | str) -> dict:
    """
    Lee un JSON de claves con punto (`train.epochs`). Acepta también el
    metadata.json de una corrida previa (usa su objeto "config").
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no existe el archivo de configuración: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON inválido ({exc.msg}, línea {exc.lineno})") from None
    if isinstance(raw, dict) and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: se esperaba un objeto JSON")

    out = {}
    for key, value in raw.items():
        section, _, dest = str(key).rpartition(".")
        if SECTION_OF.get(dest) != section or not section:
            raise ConfigError(f"clave desconocida en {path.name}: {key!r}")
        out[dest] = value
    return out


def _form_errors(form: ExperimentConfigForm) -> str:
    parts = []
    for name, errors in form.errors.items():
        label = "config" if name == "__all__" else dotted_key(name)
        parts.append(f"{label}: {' '.join(str(e) for e in errors)}")
    return "; ".join(parts)


def resolve_config(path: Path | str | None = None, overrides: Mapping | None = None) -> ExperimentConfig:
    merged = dict(DEFAULTS)
    if path:
        merged.update(load_config_file(path))
    for dest, value in (overrides or {}).items():
        if value is None:
            continue
        if dest not in DEFAULTS:
            raise ConfigError(f"opción desconocida: {dest}")
        merged[dest] = value

    form = ExperimentConfigForm(data={k: _as_form_value(v) for k, v in merged.items()})
    if not form.is_valid():
        raise ConfigError(_form_errors(form))
    return build_config(form.cleaned_data)


def _canonical(cleaned: Mapping) -> dict:
    resolved = {}
    for dest in DEFAULTS:
        v = cleaned.get(dest)
        resolved[dotted_key(dest)] = list(v) if isinstance(v, tuple) else v
    return resolved


def _resolve_dataset(raw: str) -> Path | None:
    raw = (raw or "").strip()
    if not raw:
        return None
    path = Path(raw)
    if not path.is_absolute() and not path.exists():
        path = Path(settings.EDGECACHE_DATA_DIR) / path
    return path


def build_config(cleaned: Mapping) -> ExperimentConfig:
    resolved = _canonical(cleaned)
    content_size = int(round(cleaned["content_size_mb"] * MB))
    out = (cleaned.get("out") or "").strip()
    out_dir = Path(out) if out else Path(settings.EDGECACHE_OUTPUT_DIR) / f"run_{config_hash(resolved)[:12]}"

    train = TrainConfig(
        topology=Topology(cleaned["topology"]),
        mens=cleaned["mens"],
        batch_size=cleaned["batch"],
        epochs=cleaned["epochs"],
        tol=cleaned.get("tol"),
        patience=cleaned["patience"],
        dropout=DropoutSpec.from_flag(cleaned["dropout"], keep=cleaned["dropout_keep"]),
        hidden=cleaned["hidden"],
        output_activation=cleaned["output_activation"],
        adam=AdamConfig(
            step=cleaned["adam_step"],
            decay_eta=cleaned["adam_decay_eta"],
            decay_delta=cleaned["adam_decay_delta"],
            eps=cleaned["adam_eps"],
            mode=AdamMode(cleaned["adam_mode"]),
        ),
        seed=cleaned["seed"],
        zero_fill=cleaned["zero_fill"],
        weighted_mean=cleaned["weighted_mean"],
        parallel=cleaned["parallel_workers"],
        eval_every=cleaned["eval_every"],
    )
    network = NetworkTopology(
        n_mens=cleaned["mens"],
        bw_cs=cleaned["bw_cs_mbps"] * MBPS,
        bw_men=cleaned["bw_men_mbps"] * MBPS,
        bw_user=cleaned["bw_user_mbps"] * MBPS,
    )
    return ExperimentConfig(
        dataset=_resolve_dataset(cleaned.get("dataset")),
        fmt=cleaned["format"],
        synth_users=cleaned.get("synth_users"),
        synth_contents=cleaned["synth_contents"],
        synth_density=cleaned["synth_density"],
        synth_zipf=cleaned["synth_zipf"],
        split_ratio=cleaned["split_ratio"],
        scale=RatingScale(cleaned["rating_min"], cleaned["rating_max"]),
        methods=tuple(cleaned["methods"]),
        train=train,
        svd_rank=cleaned["svd_rank"],
        nmf_rank=cleaned["nmf_rank"],
        nmf_iters=cleaned["nmf_iters"],
        network=network,
        content_size=content_size,
        capacities=tuple(int(round(c * MB)) for c in cleaned["capacities"]),
        out=out_dir,
        seed=cleaned["seed"],
        dl_global_agg=cleaned["dl_global_agg"],
        placement_score=cleaned["placement_score"],
        count_neighbor_hits=cleaned["count_neighbor_hits"],
        zero_local_delay=cleaned["zero_local_delay"],
        parallel=cleaned["parallel"],
        resolved=resolved,
    )


def derive_seed(seed: int, method: str) -> int:
    """Semilla por método, disjunta y estable (no depende del orden de ejecución)."""
    state = np.random.SeedSequence([int(seed), SEED_LABELS[method]]).generate_state(1, dtype=np.uint32)
    return int(state[0])


# =============================================================================
# DATOS
# =============================================================================
@dataclass(frozen=True, eq=False)
class ExperimentData:
    pair: SplitPair
    manifest: ShardManifest
    shards: list[RatingMatrix]            # en bruto, orden de men_id
    scale: RatingScale

    @property
    def home_of(self) -> dict[int, int]:
        return home_men(self.manifest)

    @property
    def catalog_ids(self) -> tuple[int, ...]:
        return self.pair.train.contents

    def scaled_shards(self) -> list[RatingMatrix]:
        return [s.scaled(self.scale) for s in self.shards]

    def scaled_x_cs(self) -> RatingMatrix:
        """X_cs = unión de los X_n recibidos por el CS."""
        return RatingMatrix.vstack(self.scaled_shards())

    def content_counts(self) -> np.ndarray:
        """Usuarios de train por contenido: suma de los conteos que reporta cada MEN."""
        return sum(s.mask().sum(axis=0) for s in self.shards)


def training_scale(cfg: ExperimentConfig) -> RatingScale:
    """Con zero_fill la escala parte de 0: un faltante se entrena como rating 0, igual que en SVD/NMF."""
    if cfg.train.zero_fill:
        return RatingScale(0.0, cfg.scale.hi)
    return cfg.scale


def load_events(cfg: ExperimentConfig) -> list[RatingEvent]:
    if cfg.dataset is not None:
        if not cfg.dataset.exists():
            raise DataError(f"no existe el dataset: {cfg.dataset}")
        return ingest(cfg.dataset, cfg.fmt)
    if cfg.synth_users:
        return synth_zipf(cfg.synth_users, cfg.synth_contents, cfg.synth_density,
                          cfg.synth_zipf, seed=cfg.seed)
    raise ConfigError("falta el dataset: indica --dataset o --synth-users")


def prepare_data(cfg: ExperimentConfig, mens: int | None = None) -> ExperimentData:
    events = load_events(cfg)
    pair = split(events, cfg.split_ratio, seed=cfg.seed)
    manifest = shard_manifest(pair.train, mens or cfg.train.mens, seed=cfg.seed)
    shards = shards_from_manifest(pair.train, manifest)
    logger.info("datos: %s train, %s test, %d MENs",
                pair.train, pair.test, len(manifest))
    return ExperimentData(pair, manifest, shards, training_scale(cfg))


# =============================================================================
# AJUSTE POR MÉTODO
# =============================================================================
@dataclass(frozen=True, eq=False)
class MethodFit:
    method: str
    seed: int
    prediction: Matrix            # ejes de pair.train, en unidades de rating
    wall_ms: float
    log: TrainLog | None = None
    params: ModelParams | None = None
    extra: dict = field(default_factory=dict)


def _autoencoder_prediction(params: ModelParams, data: ExperimentData, method: str) -> Matrix:
    train = data.pair.train
    if method == "dl":
        return data.scale.denormalize(predict_matrix(params, train.scaled(data.scale).dense()))
    # DDL: cada MEN predice las filas de su propio shard con el modelo global
    pred = np.zeros(train.shape, dtype=np.float64)
    for shard in data.scaled_shards():
        rows = [train.user_index[u] for u in shard.users]
        pred[rows] = data.scale.denormalize(predict_matrix(params, shard.dense()))
    return pred


def fit_method(method: str, cfg: ExperimentConfig, data: ExperimentData) -> MethodFit:
    seed = derive_seed(cfg.seed, method)
    t0 = time.perf_counter()
    logger.info("ajustando %s (seed=%d)", method.upper(), seed)

    if method == "svd":
        pred = svd_predict(data.pair.train, cfg.svd_rank)
        return MethodFit(method, seed, pred, (time.perf_counter() - t0) * 1000.0)

    if method == "nmf":
        factors = nmf_factors(data.pair.train, cfg.nmf_rank, cfg.nmf_iters, seed)
        return MethodFit(method, seed, factors.reconstruct(), (time.perf_counter() - t0) * 1000.0,
                         extra={"objective_final": factors.objective[-1]})

    train_scaled = data.pair.train.scaled(data.scale).dense()

    def eval_hook(params: ModelParams) -> float:
        pred = data.scale.denormalize(predict_matrix(params, train_scaled))
        return rmse(pred, data.pair.test)

    try:
        if method == "dl":
            tc = replace(cfg.train, topology=Topology.DL, seed=seed)
            params, log = run_centralized(data.scaled_x_cs(), tc, eval_hook)
        else:
            tc = replace(cfg.train, topology=Topology.DDL, seed=seed)
            params, log = run_distributed(data.scaled_shards(), tc, eval_hook)
    except DivergedError as exc:
        raise DivergedError(exc.epoch, method) from exc

    pred = _autoencoder_prediction(params, data, method)
    return MethodFit(method, seed, pred, (time.perf_counter() - t0) * 1000.0, log, params)


def fit_all(cfg: ExperimentConfig, data: ExperimentData) -> dict[str, MethodFit]:
    if cfg.parallel and len(cfg.methods) > 1:
        with ThreadPoolExecutor(max_workers=len(cfg.methods)) as pool:
            futures = {m: pool.submit(fit_method, m, cfg, data) for m in cfg.methods}
            return {m: futures[m].result() for m in cfg.methods}
    return {m: fit_method(m, cfg, data) for m in cfg.methods}


# =============================================================================
# EVALUACIÓN
# =============================================================================
@dataclass(frozen=True)
class ResultRow:
    method: str
    capacity_bytes: int
    rmse: float
    hit_rate: float
    avg_delay_s: float
    local: int
    neighbor: int
    cs: int

    def as_csv(self) -> list[str]:
        return [self.method, str(self.capacity_bytes), repr(self.rmse), repr(self.hit_rate),
                repr(self.avg_delay_s), str(self.local), str(self.neighbor), str(self.cs)]


@dataclass(frozen=True, eq=False)
class ExperimentOutcome:
    config: ExperimentConfig
    rows: list[ResultRow]
    fits: dict[str, MethodFit]
    plans: dict[str, dict[int, PlacementPlan]]
    manifest: ShardManifest
    wall_ms: float
    results_path: Path
    metadata_path: Path


def placement_scores(cfg: ExperimentConfig, data: ExperimentData, fit: MethodFit) -> Matrix:
    """
    f̂_u^i que entra al top-R. SVD/NMF (y DL/DDL con zero_fill) reconstruyen
    rating × observado, que ya es una señal de demanda. DL/DDL entrenados sólo
    sobre observados predicen ratings: con placement_score="demand" se pasan a
    demanda esperada.
    """
    if (fit.method not in ("dl", "ddl") or cfg.placement_score != "demand"
            or cfg.train.zero_fill):
        return fit.prediction
    train = data.pair.train
    weights = demand_weights(data.content_counts(), train.n_users, cfg.split_ratio)
    return expected_demand(fit.prediction, train.mask(), weights)


def evaluate_fits(cfg: ExperimentConfig, data: ExperimentData,
                  fits: Mapping[str, MethodFit]) -> tuple[list[ResultRow], dict]:
    catalog = ContentCatalog(data.catalog_ids, cfg.content_size)
    trace = build_request_trace(data.pair.test)
    home_of = data.home_of
    user_index = data.pair.train.user_index
    rows: list[ResultRow] = []
    plans: dict[str, dict[int, PlacementPlan]] = {}
    for method in cfg.methods:
        fit = fits[method]
        err = rmse(fit.prediction, data.pair.test)
        scores = placement_scores(cfg, data, fit)
        plans[method] = {}
        for capacity in cfg.capacities:
            plan = build_plan(scores, user_index, data.manifest, catalog, capacity,
                              global_aggregation=(method == "dl" and cfg.dl_global_agg))
            res = replay(plan, cfg.network, trace, catalog, home_of,
                         count_neighbor_hits=cfg.count_neighbor_hits,
                         zero_local_delay=cfg.zero_local_delay)
            plans[method][capacity] = plan
            rows.append(ResultRow(method, capacity, err, res.hit_rate, res.avg_delay_s,
                                  res.local, res.neighbor, res.cs))
            logger.info("%s S_n=%d: rmse=%.4f hit=%.4f delay=%.3fs",
                        method, capacity, err, res.hit_rate, res.avg_delay_s)
    return rows, plans


# =============================================================================
# ARTEFACTOS
# =============================================================================
def write_results_csv(rows: Sequence[ResultRow], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def emit_learning_curve(log: TrainLog | Sequence, path: Path | str) -> Path:
    """CSV `epoch,loss,wall_ms` para graficar fuera del proyecto."""
    records = log.records if isinstance(log, TrainLog) else list(log)
    if not records:
        raise ContractError("bitácora de entrenamiento vacía")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("epoch", "loss", "wall_ms"))
        for r in records:
            writer.writerow((r.epoch, repr(r.loss), f"{r.wall_ms:.3f}"))
    return path


def _metadata(cfg: ExperimentConfig, fits: Mapping[str, MethodFit], wall_ms: float,
              data: ExperimentData) -> dict:
    return {
        "config": dict(cfg.resolved),
        "config_hash": cfg.config_hash,
        "seeds": {"base": cfg.seed, **{m: f.seed for m, f in fits.items()}},
        "flags": {
            "adam_mode": cfg.train.adam.mode.value,
            "dropout_rate": cfg.train.dropout.rate,
            "dl_global_agg": cfg.dl_global_agg,
            "placement_score": cfg.placement_score,
            "count_neighbor_hits": cfg.count_neighbor_hits,
            "zero_local_delay": cfg.zero_local_delay,
            "zero_fill": cfg.train.zero_fill,
            "weighted_mean": cfg.train.weighted_mean,
            "parallel": cfg.parallel,
        },
        "data": {
            "users": data.pair.train.n_users,
            "contents": data.pair.train.n_contents,
            "train_observed": data.pair.train.n_observed,
            "test_observed": data.pair.test.n_observed,
        },
        "network": cfg.network.to_dict(),
        "timings_ms": {"total": wall_ms, **{m: f.wall_ms for m, f in fits.items()}},
        "training": {m: f.log.summary() for m, f in fits.items() if f.log is not None},
        "extra": {m: f.extra for m, f in fits.items() if f.extra},
    }


def write_artifacts(cfg: ExperimentConfig, data: ExperimentData, fits: Mapping[str, MethodFit],
                    plans: Mapping[str, Mapping[int, PlacementPlan]], wall_ms: float) -> Path:
    out = cfg.out
    write_manifest(data.manifest, out / "manifest.json")
    payload = {m: {str(c): p.to_dict() for c, p in by_cap.items()} for m, by_cap in plans.items()}
    (out / "placements.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for method, fit in fits.items():
        if fit.log is not None and len(fit.log):
            emit_learning_curve(fit.log, out / f"learning_curve_{method}.csv")
            fit.log.to_csv(out / f"train_log_{method}.csv")
    meta_path = out / "metadata.json"
    meta_path.write_text(json.dumps(_metadata(cfg, fits, wall_ms, data), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    return meta_path


# =============================================================================
# RUN
# =============================================================================
def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Comparación de los métodos: una fila por (método, capacidad) en results.csv."""
    t0 = time.perf_counter()
    cfg.out.mkdir(parents=True, exist_ok=True)
    data = prepare_data(cfg)
    fits = fit_all(cfg, data)
    rows, plans = evaluate_fits(cfg, data, fits)

    results_path = cfg.out / "results.csv"
    write_results_csv(rows, results_path)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    meta_path = write_artifacts(cfg, data, fits, plans, wall_ms)
    logger.info("experimento listo en %.0f ms → %s", wall_ms, results_path)
    return ExperimentOutcome(cfg, rows, fits, plans, data.manifest, wall_ms, results_path, meta_path)


def run_training(cfg: ExperimentConfig) -> tuple[ModelParams, TrainLog, Path]:
    """Entrena solo el autoencoder de `cfg.train.topology` (comando `train`)."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    data = prepare_data(cfg)
    method = cfg.train.topology.value
    fit = fit_method(method, cfg, data)
    fit.params.to_npz(cfg.out / f"model_{method}.npz")
    write_manifest(data.manifest, cfg.out / "manifest.json")
    if len(fit.log):
        emit_learning_curve(fit.log, cfg.out / f"learning_curve_{method}.csv")
    fit.log.to_csv(cfg.out / f"train_log_{method}.csv")
    meta = _metadata(cfg, {method: fit}, fit.wall_ms, data)
    meta["test_rmse_final"] = rmse(fit.prediction, data.pair.test)
    meta_path = cfg.out / "metadata.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return fit.params, fit.log, meta_path


# =============================================================================
# SWEEP DE TIEMPOS POR NÚMERO DE MENs
# =============================================================================
@dataclass(frozen=True)
class TimingRow:
    method: str
    mens: int
    epochs: int
    wall_ms: float
    final_loss: float | None


def run_mens_sweep(cfg: ExperimentConfig, mens_list: Sequence[int]) -> tuple[list[TimingRow], Path]:
    """DL como referencia y DDL para cada N; escribe timing.csv."""
    if not mens_list:
        raise ConfigError("--mens-list vacío")
    bad = [n for n in mens_list if n < 1 or cfg.train.batch_size % n]
    if bad:
        raise ConfigError(f"β={cfg.train.batch_size} no es divisible por N={bad}")
    cfg.out.mkdir(parents=True, exist_ok=True)

    rows: list[TimingRow] = []
    base = prepare_data(cfg, mens=1)
    dl_fit = fit_method("dl", cfg, base)
    rows.append(_timing_row("dl", 1, dl_fit))
    for n in mens_list:
        data = prepare_data(cfg, mens=n)
        cfg_n = replace(cfg, train=replace(cfg.train, mens=n))
        fit = fit_method("ddl", cfg_n, data)
        rows.append(_timing_row("ddl", n, fit))
        if len(fit.log):
            emit_learning_curve(fit.log, cfg.out / f"learning_curve_ddl_n{n}.csv")

    path = cfg.out / "timing.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMING_HEADER)
        for r in rows:
            writer.writerow((r.method, r.mens, r.epochs, f"{r.wall_ms:.3f}",
                             "" if r.final_loss is None else repr(r.final_loss)))
    return rows, path


def _timing_row(method: str, mens: int, fit: MethodFit) -> TimingRow:
    summary = fit.log.summary()
    return TimingRow(method, mens, summary["epochs"], summary["wall_ms"], summary["final_loss"])


# =============================================================================
# REGISTRO EN BD
# =============================================================================
def record_run(outcome: ExperimentOutcome, comando: str = "evaluate"):
    """Guarda la corrida y sus filas; results.csv se copia al almacenamiento por defecto."""
    cfg = outcome.config
    content = outcome.results_path.read_bytes()
    digest = cfg.config_hash
    previous = TblExperimentRun.objects.filter(hash_config=digest).order_by("-fecha_inicio").first()
    if previous is not None:
        logger.info("configuración idéntica a la corrida #%d", previous.run_id)

    key = default_storage.save(f"runs/{digest[:12]}/results.csv", ContentFile(content))
    try:
        url = default_storage.url(key)
    except Exception:
        url = key

    with transaction.atomic():
        run = TblExperimentRun.objects.create(
            comando=comando,
            config=dict(cfg.resolved),
            hash_config=digest,
            seed=cfg.seed,
            metodos=",".join(cfg.methods),
            duracion_ms=outcome.wall_ms,
            directorio_salida=str(cfg.out),
            ruta_resultados=url,
            tamanio_bytes=len(content),
        )
        TblMethodResult.objects.bulk_create([
            TblMethodResult(
                run=run, method=r.method, capacity_bytes=r.capacity_bytes, rmse=r.rmse,
                hit_rate=r.hit_rate, avg_delay_s=r.avg_delay_s,
                local=r.local, neighbor=r.neighbor, cs=r.cs,
            )
            for r in outcome.rows
        ])
    return run
