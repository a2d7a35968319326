# =============================================================================
# dist.py — Entrenamiento DL (centralizado en el CS) y DDL (servidor de
#           parámetros síncrono entre N MENs)
# =============================================================================
# Contiene:
# 1) TrainConfig / TrainLog
# 2) Protocolo MEN↔CS: GradientMsg, ModelMsg, Transport en proceso
# 3) MenWorker (aprendiz local) y ParameterServer (promedio + Adam)
# 4) run_centralized / run_distributed / convergence_check
#
# Flujo DDL por ronda τ:
#   CS → broadcast ModelMsg(τ) → cada MEN calcula g_n^τ con β/N usuarios
#   → barrera espera N GradientMsg(τ) → promedio en orden de men_id → Adam
# -----------------------------------------------------------------------------
from __future__ import annotations

import logging
import math
import queue
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol

import numpy as np

from core.engine.errors import (
    ConfigError, ContractError, DivergedError, NumericError, StalenessError, WorkerFailure,
)
from core.engine.network import DropoutSpec, loss_and_gradient
from core.engine.optim import AdamConfig, AdamState, adam_step, average_gradients
from core.engine.params import Activation, Gradient, ModelParams, autoencoder_specs
from core.engine.tensor import Matrix, RngStream

logger = logging.getLogger(__name__)

# Claves de sub-stream (ver SeedSequence.spawn_key)
INIT_STREAM = 0
CS_STREAM = 1     # el CS en modo DL se comporta como un único MEN-1


class Topology(str, Enum):
    DL = "dl"
    DDL = "ddl"


# =============================================================================
# CONFIGURACIÓN
# =============================================================================
@dataclass(frozen=True)
class TrainConfig:
    topology: Topology = Topology.DL
    mens: int = 6                            # N
    batch_size: int = 60                     # β global
    epochs: int = 2000                       # T
    tol: float | None = 1e-5
    patience: int = 50
    dropout: DropoutSpec = field(default_factory=lambda: DropoutSpec(0.8))
    hidden: tuple[int, ...] = (64, 64)
    output_activation: Activation = Activation.RELU
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 2020
    zero_fill: bool = False
    weighted_mean: bool = False
    parallel: bool = False
    eval_every: int = 0
    log_every: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "output_activation", Activation(self.output_activation))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.mens < 1:
            raise ConfigError(f"N debe ser ≥ 1 (llegó {self.mens})")
        if self.batch_size < 1:
            raise ConfigError(f"β debe ser ≥ 1 (llegó {self.batch_size})")
        if self.epochs < 0:
            raise ConfigError("T debe ser ≥ 0")
        if self.patience < 1:
            raise ConfigError("patience debe ser ≥ 1")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("las capas ocultas deben tener ≥ 1 neurona")
        if self.topology is Topology.DDL and self.batch_size % self.mens:
            raise ConfigError(f"β={self.batch_size} no es divisible por N={self.mens}")

    @property
    def local_batch(self) -> int:
        """β/N en DDL; β en DL."""
        return self.batch_size // self.mens if self.topology is Topology.DDL else self.batch_size


# =============================================================================
# BITÁCORA DE ENTRENAMIENTO
# =============================================================================
@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    wall_ms: float       # acumulado desde el inicio
    round_count: int     # rondas acumuladas


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    test_rmse: dict[int, float] = field(default_factory=dict)
    bytes_up: int = 0
    bytes_down: int = 0
    raw_upload_bytes: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def to_csv(self, path: Path | str) -> None:
        """Formato `epoch,loss,wall_ms,round_count`."""
        lines = ["epoch,loss,wall_ms,round_count"]
        lines += [f"{r.epoch},{r.loss!r},{r.wall_ms:.3f},{r.round_count}" for r in self.records]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "epochs": len(self.records),
            "final_loss": last.loss if last else None,
            "wall_ms": last.wall_ms if last else 0.0,
            "rounds": last.round_count if last else 0,
            "bytes_up": self.bytes_up,
            "bytes_down": self.bytes_down,
            "raw_upload_bytes": self.raw_upload_bytes,
            "test_rmse": {str(k): v for k, v in self.test_rmse.items()},
        }


def convergence_check(log: TrainLog | Sequence[float], tol: float, patience: int) -> bool:
    """True si la mejora relativa por época fue < tol durante `patience` épocas seguidas."""
    losses = log.losses if isinstance(log, TrainLog) else list(log)
    if not losses:
        raise ContractError("convergence_check: bitácora vacía")
    if len(losses) < patience + 1:
        return False
    window = losses[-(patience + 1):]
    for prev, cur in zip(window, window[1:]):
        improvement = (prev - cur) / abs(prev) if prev != 0 else 0.0
        if improvement >= tol:
            return False
    return True


# =============================================================================
# PROTOCOLO MEN ↔ CS
# =============================================================================
MSG_HEADER_BYTES = 32


@dataclass(frozen=True, eq=False)
class GradientMsg:
    """Lo único que un MEN envía al CS: nunca contiene ratings."""

    men_id: int
    round: int
    gradient: Gradient
    sample_count: int
    loss: float

    @property
    def nbytes(self) -> int:
        return MSG_HEADER_BYTES + self.gradient.nbytes


@dataclass(frozen=True, eq=False)
class ModelMsg:
    round: int
    params: ModelParams

    @property
    def nbytes(self) -> int:
        return MSG_HEADER_BYTES + self.params.nbytes


class Transport(Protocol):
    def broadcast(self, msg: ModelMsg) -> None: ...
    def receive_model(self, men_id: int) -> ModelMsg: ...
    def send_gradient(self, msg: GradientMsg) -> None: ...
    def collect(self, n: int) -> list[GradientMsg]: ...


class InProcessTransport:
    """Canales en memoria (queue.Queue). Un transporte por sockets implementaría la misma interfaz."""

    def __init__(self, men_ids: Sequence[int]):
        self._down = {m: queue.Queue() for m in men_ids}
        self._up: queue.Queue[GradientMsg] = queue.Queue()
        self.bytes_up = 0
        self.bytes_down = 0

    def broadcast(self, msg: ModelMsg) -> None:
        for q in self._down.values():
            q.put(msg)
            self.bytes_down += msg.nbytes

    def receive_model(self, men_id: int) -> ModelMsg:
        return self._down[men_id].get_nowait()

    def send_gradient(self, msg: GradientMsg) -> None:
        self.bytes_up += msg.nbytes
        self._up.put(msg)

    def collect(self, n: int) -> list[GradientMsg]:
        return [self._up.get() for _ in range(n)]


# =============================================================================
# APRENDIZ LOCAL (MEN o CS en modo DL)
# =============================================================================
class LocalLearner:
    """Recorre su matriz local en mini-batches, barajando una vez por época."""

    def __init__(self, values: Matrix, mask: np.ndarray, batch_size: int,
                 dropout: DropoutSpec, rng: RngStream):
        if values.shape[0] < 1:
            raise ContractError("aprendiz sin usuarios")
        self._x = np.ascontiguousarray(values.T)    # (I, usuarios)
        self._mask = np.ascontiguousarray(mask.T)
        self.batch_size = batch_size
        self.dropout = dropout
        self.rng = rng
        self._perm = np.arange(values.shape[0])

    @property
    def n_samples(self) -> int:
        return self._x.shape[1]

    @property
    def rounds_per_epoch(self) -> int:
        return math.ceil(self.n_samples / self.batch_size)

    def start_epoch(self) -> None:
        self._perm = self.rng.permutation(self.n_samples)

    def batch_indices(self, k: int) -> np.ndarray:
        idx = self._perm[k * self.batch_size:(k + 1) * self.batch_size]
        if idx.size == 0:
            # shard un usuario más corto que el mayor: reutiliza la cabeza
            idx = self._perm[:self.batch_size]
        return idx

    def step(self, params: ModelParams, k: int) -> tuple[float, Gradient, int]:
        idx = self.batch_indices(k)
        loss, grad = loss_and_gradient(params, self._x[:, idx], self._mask[:, idx],
                                       self.dropout, self.rng)
        return loss, grad, int(idx.size)


class MenWorker:
    """MEN-n: recibe el modelo de la ronda τ, calcula g_n^τ y lo envía al CS."""

    def __init__(self, men_id: int, learner: LocalLearner, transport: Transport):
        self.men_id = men_id
        self.learner = learner
        self.transport = transport
        self.current_model: ModelParams | None = None

    def run_round(self, k: int) -> None:
        msg = self.transport.receive_model(self.men_id)
        self.current_model = msg.params
        loss, grad, count = self.learner.step(msg.params, k)
        self.transport.send_gradient(GradientMsg(
            men_id=self.men_id, round=msg.params.version, gradient=grad,
            sample_count=count, loss=loss,
        ))


class ParameterServer:
    """CS: barrera síncrona sobre exactamente N mensajes, promedio y Adam."""

    def __init__(self, params: ModelParams, adam: AdamConfig, n_workers: int,
                 weighted_mean: bool = False):
        self.params = params
        self.state = AdamState.fresh(params)
        self.adam = adam
        self.n_workers = n_workers
        self.weighted_mean = weighted_mean

    @property
    def round(self) -> int:
        return self.params.version

    def model_msg(self) -> ModelMsg:
        return ModelMsg(round=self.round, params=self.params)

    def average(self, msgs: Sequence[GradientMsg]) -> Gradient:
        if len(msgs) != self.n_workers:
            raise ContractError(f"barrera: {len(msgs)} mensajes, se esperaban {self.n_workers}")
        for m in msgs:
            if m.round != self.round:
                raise StalenessError(
                    f"gradiente de MEN-{m.men_id} de la ronda {m.round}, modelo en ronda {self.round}"
                )
        ordered = sorted(msgs, key=lambda m: m.men_id)
        weights = [m.sample_count for m in ordered] if self.weighted_mean else None
        return average_gradients([m.gradient for m in ordered], weights)

    def aggregate(self, msgs: Sequence[GradientMsg]) -> ModelMsg:
        g = self.average(msgs)
        self.params, self.state = adam_step(self.params, self.state, g, self.adam)
        return self.model_msg()


# =============================================================================
# ENTRENAMIENTO
# =============================================================================
EvalHook = Callable[[ModelParams], float]


def _training_arrays(x, zero_fill: bool) -> tuple[Matrix, np.ndarray]:
    values = x.dense()
    mask = np.ones(values.shape, dtype=bool) if zero_fill else x.mask()
    return values, mask


def _initial_params(n_features: int, cfg: TrainConfig) -> ModelParams:
    specs = autoencoder_specs(n_features, cfg.hidden, cfg.output_activation)
    return ModelParams.initialize(specs, RngStream(cfg.seed).child(INIT_STREAM))


def _epoch_loop(cfg: TrainConfig, server: ParameterServer, rounds_per_epoch: int,
                run_round: Callable[[int], list[GradientMsg]], log: TrainLog,
                eval_hook: EvalHook | None, start_epoch: Callable[[], None]) -> None:
    t0 = time.perf_counter()
    rounds = 0
    for epoch in range(1, cfg.epochs + 1):
        start_epoch()
        losses = []
        for k in range(rounds_per_epoch):
            try:
                msgs = run_round(k)
            except NumericError as exc:
                raise DivergedError(epoch) from exc
            round_loss = float(np.mean([m.loss for m in sorted(msgs, key=lambda m: m.men_id)]))
            if not math.isfinite(round_loss):
                raise DivergedError(epoch)
            try:
                server.aggregate(msgs)
            except NumericError as exc:
                raise DivergedError(epoch) from exc
            losses.append(round_loss)
            rounds += 1
        epoch_loss = float(np.mean(losses))
        wall_ms = (time.perf_counter() - t0) * 1000.0
        log.records.append(EpochRecord(epoch, epoch_loss, wall_ms, rounds))

        if cfg.log_every and epoch % cfg.log_every == 0:
            logger.info("%s época %d/%d loss=%.6f (%.0f ms)",
                        cfg.topology.value.upper(), epoch, cfg.epochs, epoch_loss, wall_ms)
        if eval_hook is not None and cfg.eval_every and epoch % cfg.eval_every == 0:
            log.test_rmse[epoch] = float(eval_hook(server.params))
        if cfg.tol is not None and convergence_check(log, cfg.tol, cfg.patience):
            logger.info("convergencia en la época %d (loss=%.6f)", epoch, epoch_loss)
            break


def run_centralized(data, cfg: TrainConfig,
                    eval_hook: EvalHook | None = None) -> tuple[ModelParams, TrainLog]:
    """DL: el CS aprende X_cs completo (recibido en bruto desde los MENs)."""
    if cfg.topology is not Topology.DL:
        raise ConfigError("run_centralized requiere topology=dl")
    values, mask = _training_arrays(data, cfg.zero_fill)
    params = _initial_params(values.shape[1], cfg)
    log = TrainLog(raw_upload_bytes=int(values.nbytes))
    if cfg.epochs == 0:
        return params, log

    learner = LocalLearner(values, mask, cfg.batch_size, cfg.dropout,
                           RngStream(cfg.seed).child(CS_STREAM))
    server = ParameterServer(params, cfg.adam, n_workers=1)

    def run_round(k: int) -> list[GradientMsg]:
        loss, grad, count = learner.step(server.params, k)
        return [GradientMsg(CS_STREAM, server.round, grad, count, loss)]

    _epoch_loop(cfg, server, learner.rounds_per_epoch, run_round, log, eval_hook,
                learner.start_epoch)
    return server.params, log


def _check_shards(shards: Sequence, cfg: TrainConfig) -> None:
    if len(shards) != cfg.mens:
        raise ConfigError(f"se esperaban {cfg.mens} shards, llegaron {len(shards)}")
    sizes = [s.n_users for s in shards]
    if min(sizes) < 1 or max(sizes) - min(sizes) > 1:
        raise ConfigError(f"shards desiguales: tamaños {sizes}")
    seen: set[int] = set()
    for s in shards:
        users = set(s.users)
        if seen & users:
            raise ConfigError("un usuario aparece en más de un shard")
        seen |= users


def run_distributed(shards: Sequence, cfg: TrainConfig,
                    eval_hook: EvalHook | None = None) -> tuple[ModelParams, TrainLog]:
    """DDL: N MENs calculan gradientes locales; el CS promedia y aplica Adam."""
    if cfg.topology is not Topology.DDL:
        raise ConfigError("run_distributed requiere topology=ddl")
    _check_shards(shards, cfg)
    arrays = [_training_arrays(s, cfg.zero_fill) for s in shards]
    params = _initial_params(arrays[0][0].shape[1], cfg)
    log = TrainLog()
    if cfg.epochs == 0:
        return params, log

    men_ids = list(range(1, cfg.mens + 1))
    root = RngStream(cfg.seed)
    transport = InProcessTransport(men_ids)
    workers = [
        MenWorker(m, LocalLearner(v, mk, cfg.local_batch, cfg.dropout, root.child(m)), transport)
        for m, (v, mk) in zip(men_ids, arrays)
    ]
    server = ParameterServer(params, cfg.adam, cfg.mens, cfg.weighted_mean)
    rounds_per_epoch = max(w.learner.rounds_per_epoch for w in workers)
    pool = ThreadPoolExecutor(max_workers=cfg.mens) if cfg.parallel and cfg.mens > 1 else None

    def run_round(k: int) -> list[GradientMsg]:
        transport.broadcast(server.model_msg())
        if pool is None:
            for w in workers:
                _guarded(w, k, server.round)
        else:
            futures = [pool.submit(_guarded, w, k, server.round) for w in workers]
            for f in futures:
                f.result()
        return transport.collect(cfg.mens)

    def start_epoch() -> None:
        for w in workers:
            w.learner.start_epoch()

    try:
        _epoch_loop(cfg, server, rounds_per_epoch, run_round, log, eval_hook, start_epoch)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    log.bytes_up, log.bytes_down = transport.bytes_up, transport.bytes_down
    return server.params, log


def _guarded(worker: MenWorker, k: int, round_index: int) -> None:
    try:
        worker.run_round(k)
    except NumericError:
        raise
    except Exception as exc:
        raise WorkerFailure(round_index, worker.men_id, exc) from exc
