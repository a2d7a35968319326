# =============================================================================
# params.py — Estructuras de parámetros y gradientes (ω = (W_ℓ, v_ℓ))
# =============================================================================
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.engine.errors import ContractError, ShapeError
from core.engine.tensor import RngStream, Vector, frozen


class Activation(str, Enum):
    RELU = "relu"
    LINEAR = "linear"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"capa inválida: {self.in_dim}→{self.out_dim}")


def autoencoder_specs(n_features: int, hidden: Sequence[int],
                      output_activation: Activation = Activation.RELU) -> list[LayerSpec]:
    """n_features → hidden... → n_features; ReLU en ocultas, configurable en la salida."""
    dims = [n_features, *hidden, n_features]
    specs = [LayerSpec(dims[i], dims[i + 1], Activation.RELU) for i in range(len(dims) - 2)]
    specs.append(LayerSpec(dims[-2], dims[-1], Activation(output_activation)))
    return specs


@dataclass(frozen=True, eq=False)
class Layer:
    """Par (W, v): W de forma (out, in), v de largo out. Solo lectura."""

    weight: np.ndarray
    bias: Vector

    def __post_init__(self) -> None:
        w = frozen(self.weight)
        v = frozen(np.ravel(self.bias))
        if w.ndim != 2 or v.shape != (w.shape[0],):
            raise ShapeError(f"capa: W {w.shape} incompatible con v {v.shape}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", v)

    @property
    def shape(self) -> tuple[tuple[int, int], int]:
        return self.weight.shape, self.bias.shape[0]


class _LayerStack:
    """Comportamiento común de ModelParams y Gradient."""

    layers: tuple[Layer, ...]

    def shapes(self) -> list[tuple[tuple[int, int], int]]:
        return [layer.shape for layer in self.layers]

    def flat(self) -> np.ndarray:
        parts = []
        for layer in self.layers:
            parts.append(layer.weight.ravel())
            parts.append(layer.bias)
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def size(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    @property
    def nbytes(self) -> int:
        return sum(l.weight.nbytes + l.bias.nbytes for l in self.layers)

    def check_mirrors(self, other: "_LayerStack") -> None:
        if self.shapes() != other.shapes():
            raise ContractError(f"formas no coinciden: {self.shapes()} vs {other.shapes()}")


def _unflatten(vec: np.ndarray, shapes) -> tuple[Layer, ...]:
    layers, pos = [], 0
    for (rows, cols), out in shapes:
        w = vec[pos:pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        v = vec[pos:pos + out]
        pos += out
        layers.append(Layer(w, v))
    if pos != vec.size:
        raise ShapeError(f"vector de largo {vec.size}, se esperaban {pos}")
    return tuple(layers)


@dataclass(frozen=True, eq=False)
class ModelParams(_LayerStack):
    """Modelo global ω. `version` = ronda τ en que se produjo (staleness)."""

    layers: tuple[Layer, ...]
    activations: tuple[Activation, ...]
    version: int = 0

    def __post_init__(self) -> None:
        if len(self.layers) != len(self.activations) or not self.layers:
            raise ShapeError("ModelParams: capas y activaciones deben coincidir")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[0] != nxt.weight.shape[1]:
                raise ShapeError(
                    f"capas consecutivas incompatibles: {prev.weight.shape} → {nxt.weight.shape}"
                )

    @classmethod
    def initialize(cls, specs: Sequence[LayerSpec], rng: RngStream) -> "ModelParams":
        """Uniforme escalada ±sqrt(6/(in+out)); sesgos en cero."""
        layers = []
        for spec in specs:
            bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
            w = rng.uniform(-bound, bound, (spec.out_dim, spec.in_dim))
            layers.append(Layer(w, np.zeros(spec.out_dim)))
        return cls(tuple(layers), tuple(Activation(s.activation) for s in specs))

    @classmethod
    def from_arrays(cls, pairs: Iterable[tuple[np.ndarray, np.ndarray]],
                    activations: Iterable[Activation | str], version: int = 0) -> "ModelParams":
        return cls(
            tuple(Layer(np.atleast_2d(w), b) for w, b in pairs),
            tuple(Activation(a) for a in activations),
            version,
        )

    def with_flat(self, vec: np.ndarray) -> "ModelParams":
        return ModelParams(_unflatten(np.asarray(vec, dtype=np.float64), self.shapes()),
                           self.activations, self.version)

    def replace_layers(self, layers: Sequence[Layer], version: int) -> "ModelParams":
        return ModelParams(tuple(layers), self.activations, version)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    def to_npz(self, path) -> None:
        arrays = {}
        for i, layer in enumerate(self.layers):
            arrays[f"W{i}"] = layer.weight
            arrays[f"v{i}"] = layer.bias
        np.savez(path, activations=np.array([a.value for a in self.activations]),
                 version=np.array(self.version), **arrays)

    @classmethod
    def from_npz(cls, path) -> "ModelParams":
        with np.load(path) as data:
            acts = [str(a) for a in data["activations"]]
            pairs = [(data[f"W{i}"], data[f"v{i}"]) for i in range(len(acts))]
            return cls.from_arrays(pairs, acts, int(data["version"]))


@dataclass(frozen=True, eq=False)
class Gradient(_LayerStack):
    """G_τ / g_n^τ: espeja las formas del modelo del que se calculó."""

    layers: tuple[Layer, ...]

    @classmethod
    def zeros_like(cls, params: _LayerStack) -> "Gradient":
        return cls(tuple(Layer(np.zeros_like(l.weight), np.zeros_like(l.bias))
                         for l in params.layers))

    @classmethod
    def from_flat(cls, vec: np.ndarray, like: _LayerStack) -> "Gradient":
        return cls(_unflatten(np.asarray(vec, dtype=np.float64), like.shapes()))
