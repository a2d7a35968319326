# =============================================================================
# optim.py — Adam del servidor de parámetros y promedio de gradientes
# =============================================================================
# Modo "paper": coeficientes de los momentos decaen como potencias γ^τ.
# Modo "standard": Adam clásico con coeficientes constantes γ.
# En ambos, el paso corregido es λ·sqrt(1−γ_δ^(τ+1)) / (1−γ_η^(τ+1)).
# -----------------------------------------------------------------------------
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.engine.errors import ConfigError, ContractError, NumericError
from core.engine.params import Gradient, Layer, ModelParams


class AdamMode(str, Enum):
    PAPER = "paper"
    STANDARD = "standard"


@dataclass(frozen=True)
class AdamConfig:
    step: float = 0.001          # λ
    decay_eta: float = 0.9       # γ_η
    decay_delta: float = 0.999   # γ_δ
    eps: float = 1e-8            # ε
    mode: AdamMode = AdamMode.PAPER

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ConfigError(f"λ debe ser > 0 (llegó {self.step})")
        if not (0 <= self.decay_eta < 1 and 0 <= self.decay_delta < 1):
            raise ConfigError("γ_η y γ_δ deben estar en [0,1)")
        if not self.eps > 0:
            raise ConfigError("ε debe ser > 0")
        object.__setattr__(self, "mode", AdamMode(self.mode))


@dataclass(frozen=True, eq=False)
class AdamState:
    eta: Gradient     # η: media móvil de G
    delta: Gradient   # δ: media móvil de G², siempre ≥ 0
    tau: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "AdamState":
        zeros = Gradient.zeros_like(params)
        return cls(zeros, zeros, 0)


# =============================================================================
# PROMEDIO DE GRADIENTES (barrera del CS)
# =============================================================================
def average_gradients(grads: Sequence[Gradient],
                      weights: Sequence[float] | None = None) -> Gradient:
    """
    Media elemento a elemento en orden fijo de índice (determinista).
    Con `weights` (p.ej. sample_count) calcula la media ponderada.
    """
    if not grads:
        raise ContractError("average_gradients: lista vacía")
    first = grads[0]
    for g in grads[1:]:
        first.check_mirrors(g)
    if weights is not None and len(weights) != len(grads):
        raise ContractError("average_gradients: un peso por gradiente")

    layers = []
    for li in range(len(first.layers)):
        if weights is None:
            w_acc = grads[0].layers[li].weight.copy()
            b_acc = grads[0].layers[li].bias.copy()
            for g in grads[1:]:
                w_acc += g.layers[li].weight
                b_acc += g.layers[li].bias
            w_acc /= len(grads)
            b_acc /= len(grads)
        else:
            total = float(sum(weights))
            w_acc = np.zeros_like(first.layers[li].weight)
            b_acc = np.zeros_like(first.layers[li].bias)
            for g, wt in zip(grads, weights):
                w_acc += (wt / total) * g.layers[li].weight
                b_acc += (wt / total) * g.layers[li].bias
        layers.append(Layer(w_acc, b_acc))
    return Gradient(tuple(layers))


# =============================================================================
# PASO ADAM
# =============================================================================
def adam_step(params: ModelParams, state: AdamState, g: Gradient,
              cfg: AdamConfig) -> tuple[ModelParams, AdamState]:
    params.check_mirrors(g)
    params.check_mirrors(state.eta)
    if state.tau < 0:
        raise ContractError("τ debe ser ≥ 0")
    for i, layer in enumerate(g.layers):
        if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
            raise NumericError(f"gradiente no finito en la capa {i}")

    tau = state.tau
    if cfg.mode is AdamMode.PAPER:
        c_eta, c_delta = cfg.decay_eta ** tau, cfg.decay_delta ** tau
    else:
        c_eta, c_delta = cfg.decay_eta, cfg.decay_delta
    step = cfg.step * math.sqrt(1.0 - cfg.decay_delta ** (tau + 1)) / (1.0 - cfg.decay_eta ** (tau + 1))

    new_layers, etas, deltas = [], [], []
    for p, e, d, gl in zip(params.layers, state.eta.layers, state.delta.layers, g.layers):
        e_w = c_eta * e.weight + (1.0 - c_eta) * gl.weight
        e_b = c_eta * e.bias + (1.0 - c_eta) * gl.bias
        d_w = c_delta * d.weight + (1.0 - c_delta) * gl.weight * gl.weight
        d_b = c_delta * d.bias + (1.0 - c_delta) * gl.bias * gl.bias
        new_layers.append(Layer(
            p.weight - step * e_w / (np.sqrt(d_w) + cfg.eps),
            p.bias - step * e_b / (np.sqrt(d_b) + cfg.eps),
        ))
        etas.append(Layer(e_w, e_b))
        deltas.append(Layer(d_w, d_b))

    new_params = params.replace_layers(new_layers, params.version + 1)
    return new_params, AdamState(Gradient(tuple(etas)), Gradient(tuple(deltas)), tau + 1)
