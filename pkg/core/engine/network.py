# =============================================================================
# network.py — Autoencoder (DNN) para reconstruir la matriz de popularidad
# =============================================================================
# Convención fija: features (contenidos) en filas, muestras (usuarios) en
# columnas. Un mini-batch de β usuarios es una matriz (I, β); quien tenga la
# matriz usuarios×contenidos la transpone antes de llamar a forward().
# -----------------------------------------------------------------------------
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.engine.errors import ContractError, DegenerateInputError, ShapeError
from core.engine.params import Activation, Gradient, Layer, ModelParams
from core.engine.tensor import Matrix, RngStream, Vector, ensure_finite, matmul, transpose


class Mode(str, Enum):
    TRAIN = "train"
    INFER = "infer"


# =============================================================================
# DROPOUT
# =============================================================================
@dataclass(frozen=True)
class DropoutSpec:
    """
    rate = fracción que se DESCARTA (r). Los sobrevivientes se escalan 1/(1−r).
    after_layer: índice (0-based) de la capa cuya salida se descarta; None =
    justo después de la última capa oculta.
    """

    rate: float = 0.0
    after_layer: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ShapeError(f"dropout rate fuera de [0,1): {self.rate}")

    @classmethod
    def from_flag(cls, value: float, *, keep: bool = False) -> "DropoutSpec":
        """Con keep=True el valor se interpreta como probabilidad de conservar."""
        return cls(rate=round(1.0 - value, 12) if keep else value)

    def resolve(self, n_layers: int) -> int | None:
        if self.after_layer is not None:
            if not 0 <= self.after_layer < n_layers - 1:
                raise ShapeError(f"dropout after_layer={self.after_layer} fuera de rango")
            return self.after_layer
        return n_layers - 2 if n_layers >= 2 else None


NO_DROPOUT = DropoutSpec(0.0)


def apply_dropout(a: Matrix, keep_mask: np.ndarray, rate: float) -> Matrix:
    """Anula los descartados y escala los sobrevivientes por exactamente 1/(1−r)."""
    return np.where(keep_mask, a / (1.0 - rate), 0.0)


# =============================================================================
# TRAZA (para backpropagation)
# =============================================================================
@dataclass(frozen=True, eq=False)
class ForwardTrace:
    mode: Mode
    version: int
    shapes: list
    inputs: list[Matrix]          # entrada efectiva de cada capa (post-dropout)
    pre_activations: list[Matrix]
    post_activations: list[Matrix]
    drop_at: int | None = None
    rate: float = 0.0
    mask: np.ndarray | None = field(default=None)

    @property
    def layer_count(self) -> int:
        return len(self.pre_activations)


# =============================================================================
# FORWARD
# =============================================================================
def forward_layer(x: Matrix, w: Matrix, v: Vector, activation: Activation | str) -> Matrix:
    """activation(W x + v), con v sumado a cada columna del batch."""
    if v.shape != (w.shape[0],):
        raise ShapeError(f"forward_layer: sesgo {v.shape} no calza con W {w.shape}")
    z = matmul(w, x) + v[:, None]
    return _activate(z, Activation(activation))


def _activate(z: Matrix, activation: Activation) -> Matrix:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def forward(params: ModelParams, x: Matrix, dropout: DropoutSpec = NO_DROPOUT,
            mode: Mode | str = Mode.INFER, rng: RngStream | None = None) -> tuple[Matrix, ForwardTrace]:
    mode = Mode(mode)
    if x.ndim != 2 or x.shape[0] != params.in_dim:
        raise ShapeError(f"forward: entrada {x.shape}, se esperaban {params.in_dim} filas")

    n_layers = len(params.layers)
    drop_at = dropout.resolve(n_layers)
    use_dropout = mode is Mode.TRAIN and drop_at is not None and dropout.rate > 0.0
    if use_dropout and rng is None:
        raise ContractError("forward en modo train con dropout requiere un RngStream")

    inputs, pre, post = [], [], []
    mask = None
    a = x
    for i, (layer, act) in enumerate(zip(params.layers, params.activations)):
        inputs.append(a)
        z = matmul(layer.weight, a) + layer.bias[:, None]
        out = _activate(z, act)
        pre.append(z)
        post.append(out)
        if use_dropout and i == drop_at:
            mask = rng.random(out.shape) >= dropout.rate
            out = apply_dropout(out, mask, dropout.rate)
        a = out

    ensure_finite(a, name="forward")
    trace = ForwardTrace(
        mode=mode, version=params.version, shapes=params.shapes(),
        inputs=inputs, pre_activations=pre, post_activations=post,
        drop_at=drop_at if use_dropout else None,
        rate=dropout.rate if use_dropout else 0.0, mask=mask,
    )
    return a, trace


def predict_matrix(params: ModelParams, values: Matrix) -> Matrix:
    """Reconstruye una matriz usuarios×contenidos completa (modo infer)."""
    y, _ = forward(params, transpose(values), mode=Mode.INFER)
    return transpose(y)


# =============================================================================
# PÉRDIDA
# =============================================================================
def _check_loss_inputs(y: Matrix, x: Matrix, mask: np.ndarray) -> np.ndarray:
    if y.shape != x.shape or mask.shape != x.shape:
        raise ShapeError(f"pérdida: y {y.shape}, x {x.shape}, máscara {mask.shape}")
    mask = mask.astype(bool, copy=False)
    if not mask.any():
        raise DegenerateInputError("máscara de entradas observadas vacía")
    return mask


def masked_mse(y: Matrix, x: Matrix, mask: np.ndarray) -> float:
    """
    Media sobre el batch (columnas) del error cuadrático medio por muestra,
    restringido a las entradas observadas. Una muestra sin observadas aporta 0
    pero sigue contando en el denominador β.
    """
    mask = _check_loss_inputs(y, x, mask)
    sq = np.where(mask, (y - x) ** 2, 0.0)
    n_obs = mask.sum(axis=0)
    per_sample = np.divide(sq.sum(axis=0), n_obs, out=np.zeros(n_obs.shape), where=n_obs > 0)
    return float(per_sample.mean())


def _loss_output_grad(y: Matrix, x: Matrix, mask: np.ndarray) -> Matrix:
    mask = _check_loss_inputs(y, x, mask)
    n_obs = mask.sum(axis=0).astype(np.float64)
    scale = np.divide(2.0, n_obs * y.shape[1], out=np.zeros(n_obs.shape), where=n_obs > 0)
    return np.where(mask, (y - x), 0.0) * scale[None, :]


# =============================================================================
# BACKWARD
# =============================================================================
def backward(params: ModelParams, trace: ForwardTrace, y: Matrix, x: Matrix,
             mask: np.ndarray) -> Gradient:
    """∂ masked_mse / ∂ω reutilizando la máscara de dropout de la traza."""
    if trace.mode is not Mode.TRAIN:
        raise ContractError("backward requiere una traza de modo train")
    if trace.version != params.version or trace.shapes != params.shapes():
        raise ContractError(
            f"traza de la versión {trace.version} no corresponde al modelo versión {params.version}"
        )
    if trace.layer_count != len(params.layers):
        raise ContractError("la traza no tiene una entrada por capa")

    d = _loss_output_grad(y, x, mask)
    grads: list[Layer] = []
    for i in range(len(params.layers) - 1, -1, -1):
        layer, act = params.layers[i], params.activations[i]
        if act is Activation.RELU:
            d = d * (trace.pre_activations[i] > 0.0)
        grads.append(Layer(d @ trace.inputs[i].T, d.sum(axis=1)))
        if i > 0:
            d = layer.weight.T @ d
            if trace.mask is not None and trace.drop_at == i - 1:
                d = apply_dropout(d, trace.mask, trace.rate)
    grads.reverse()
    return Gradient(tuple(grads))


def loss_and_gradient(params: ModelParams, x: Matrix, mask: np.ndarray,
                      dropout: DropoutSpec, rng: RngStream | None) -> tuple[float, Gradient]:
    """Un paso de aprendizaje local: forward (train) + pérdida + backward."""
    y, trace = forward(params, x, dropout, Mode.TRAIN, rng)
    return masked_mse(y, x, mask), backward(params, trace, y, x, mask)
