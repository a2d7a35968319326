# =============================================================================
# models.py — Registro de corridas de experimentos
# =============================================================================
# Contiene:
# 1) TblExperimentRun: una fila por `evaluate` (config resuelta + hash + archivo)
# 2) TblMethodResult: una fila por (método, capacidad) del results.csv
# -----------------------------------------------------------------------------

# =============================================================================
# IMPORTS
# =============================================================================
from django.core.validators import MaxValueValidator, MinValueValidator
from django.db import models


# =============================================================================
# CORRIDAS
# =============================================================================
class TblExperimentRun(models.Model):
    """Evidencia de una corrida: configuración, semilla, duración y resultados."""

    run_id = models.AutoField(primary_key=True)
    comando = models.CharField(max_length=20, default="evaluate", verbose_name="Comando")
    fecha_inicio = models.DateTimeField(auto_now_add=True, verbose_name="Fecha de inicio")
    config = models.JSONField(verbose_name="Configuración resuelta")

    # SHA256 de la configuración canónica (claves ordenadas)
    hash_config = models.CharField(
        max_length=64, db_index=True, verbose_name="Hash de la configuración",
    )
    seed = models.BigIntegerField(verbose_name="Semilla")
    metodos = models.CharField(max_length=40, verbose_name="Métodos")
    duracion_ms = models.FloatField(default=0.0, verbose_name="Duración (ms)")
    directorio_salida = models.CharField(max_length=500, blank=True, verbose_name="Directorio de salida")

    # Copia de results.csv en el almacenamiento por defecto (S3 o disco)
    ruta_resultados = models.CharField(max_length=500, blank=True, verbose_name="Ruta de resultados")
    tamanio_bytes = models.BigIntegerField(default=0, verbose_name="Tamaño (bytes)")

    class Meta:
        db_table = "TBL_EXPERIMENT_RUN"
        verbose_name = "Corrida de experimento"
        verbose_name_plural = "Corridas de experimentos"
        ordering = ["-fecha_inicio"]

    def __str__(self) -> str:
        return f"#{self.run_id} {self.metodos} (seed={self.seed})"


class TblMethodResult(models.Model):
    """Una fila de results.csv."""

    result_id = models.AutoField(primary_key=True)
    run = models.ForeignKey(
        TblExperimentRun, on_delete=models.CASCADE, related_name="resultados",
    )
    method = models.CharField(max_length=10, verbose_name="Método")
    capacity_bytes = models.BigIntegerField(validators=[MinValueValidator(0)])
    rmse = models.FloatField()
    hit_rate = models.FloatField(validators=[MinValueValidator(0.0), MaxValueValidator(1.0)])
    avg_delay_s = models.FloatField(validators=[MinValueValidator(0.0)])
    local = models.IntegerField(default=0)
    neighbor = models.IntegerField(default=0)
    cs = models.IntegerField(default=0)

    class Meta:
        db_table = "TBL_METHOD_RESULT"
        verbose_name = "Resultado por método"
        verbose_name_plural = "Resultados por método"
        ordering = ["run", "method", "capacity_bytes"]
        constraints = [
            models.UniqueConstraint(
                fields=["run", "method", "capacity_bytes"], name="uniq_run_method_capacity",
            ),
        ]

    def __str__(self) -> str:
        return f"{self.method} @ {self.capacity_bytes} B: hit={self.hit_rate:.3f}"
