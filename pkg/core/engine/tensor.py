# =============================================================================
# tensor.py — Aritmética de matrices densas y aleatoriedad con semilla
# =============================================================================
# Contiene:
# 1) Matrix: alias de ndarray float64 2-D (row-major, valores finitos)
# 2) matmul / elementwise / transpose con validación de forma y finitud
# 3) RngStream: generador determinista (PCG64) con sub-streams derivados
# -----------------------------------------------------------------------------
from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from core.engine.errors import NumericError, ShapeError

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

RNG_ALGORITHM = "PCG64"


# =============================================================================
# CONSTRUCCIÓN / VALIDACIÓN
# =============================================================================
def as_matrix(data, *, name: str = "matrix") -> Matrix:
    """Convierte a ndarray float64 2-D (C-order) y exige valores finitos."""
    arr = np.array(data, dtype=np.float64, order="C", ndmin=2)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: se esperaba 2-D, llegó forma {arr.shape}")
    ensure_finite(arr, name=name)
    return arr


def ensure_finite(arr: np.ndarray, *, name: str = "matrix") -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name}: contiene NaN/Inf")


def frozen(arr: np.ndarray) -> np.ndarray:
    """Copia float64 de solo lectura (valores inmutables una vez construidos)."""
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


# =============================================================================
# OPERACIONES
# =============================================================================
def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Producto matricial estándar; (a.rows, b.cols)."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: formas incompatibles {a.shape} x {b.shape}")
    out = a @ b
    ensure_finite(out, name="matmul")
    return out


def elementwise(a: Matrix, f: Callable[[float], float]) -> Matrix:
    """Aplica f a cada elemento; conserva la forma."""
    out = np.vectorize(f, otypes=[np.float64])(a) if a.size else np.empty_like(a)
    out = out.reshape(a.shape)
    ensure_finite(out, name="elementwise")
    return out


def transpose(a: Matrix) -> Matrix:
    return np.ascontiguousarray(a.T)


def chain(matrices: Iterable[Matrix]) -> Matrix:
    """Producto de izquierda a derecha de una cadena de matrices."""
    it = iter(matrices)
    acc = next(it)
    for m in it:
        acc = matmul(acc, m)
    return acc


# =============================================================================
# ALEATORIEDAD
# =============================================================================
@dataclass
class RngStream:
    """
    Stream determinista: misma semilla (y misma clave) ⇒ misma secuencia.
    Pertenece a un solo contexto de ejecución; no se comparte entre hilos.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    algorithm: str = RNG_ALGORITHM
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.algorithm != RNG_ALGORITHM:
            raise ValueError(f"algoritmo no soportado: {self.algorithm}")
        seq = np.random.SeedSequence(int(self.seed), spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, key: int) -> "RngStream":
        """Sub-stream independiente derivado de (seed, spawn_key + key)."""
        return RngStream(self.seed, self.spawn_key + (int(key),), self.algorithm)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self, shape) -> np.ndarray:
        return self._gen.random(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def normal(self, loc: float, scale: float, shape) -> np.ndarray:
        return self._gen.normal(loc, scale, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, shape)

    def choice(self, n: int, size: int, *, replace: bool = True, p=None) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace, p=p)
