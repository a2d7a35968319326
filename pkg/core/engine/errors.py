# =============================================================================
# errors.py — Jerarquía de errores del dominio
# =============================================================================
# Los comandos de manage.py traducen estos errores a CommandError con el
# código de salida correspondiente (divergencia → 3, el resto → 2).
# -----------------------------------------------------------------------------
from __future__ import annotations


class EdgeCacheError(Exception):
    """Base de todos los errores del proyecto."""


class ShapeError(EdgeCacheError, ValueError):
    """Dimensiones incompatibles entre matrices."""


class NumericError(EdgeCacheError, ArithmeticError):
    """Aparece un NaN / Inf donde no debe."""


class DegenerateInputError(EdgeCacheError, ValueError):
    """Entrada vacía o sin información (máscara vacía, test vacío...)."""


class ContractError(EdgeCacheError):
    """Se violó una precondición de una operación."""


class StalenessError(ContractError):
    """Un gradiente llegó calculado sobre un modelo de otra ronda."""


class ConfigError(EdgeCacheError, ValueError):
    """Configuración inválida."""


class DataError(EdgeCacheError, ValueError):
    """Datos de entrada inválidos (archivo vacío, ratings negativos...)."""


class DataParseError(DataError):
    """Línea mal formada en un archivo de ratings."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"línea {line_no}: {detail}")


class DivergedError(EdgeCacheError):
    """La pérdida dejó de ser finita durante el entrenamiento."""

    def __init__(self, epoch: int, method: str | None = None):
        self.epoch = epoch
        self.method = method
        where = f" ({method})" if method else ""
        super().__init__(f"entrenamiento divergió en la época {epoch}{where}")


class WorkerFailure(EdgeCacheError):
    """Un MEN falló en una ronda síncrona; la corrida se aborta."""

    def __init__(self, round_index: int, men_id: int, cause: BaseException):
        self.round_index = round_index
        self.men_id = men_id
        super().__init__(f"MEN-{men_id} falló en la ronda {round_index}: {cause}")
