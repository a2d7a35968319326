# core/admin.py
from django.contrib import admin
from .models import TblExperimentRun, TblMethodResult


# =============================================================================
# Resultados (inline dentro de la corrida)
# =============================================================================
class MethodResultInline(admin.TabularInline):
    model = TblMethodResult
    extra = 0
    fields = ("method", "capacity_bytes", "rmse", "hit_rate", "avg_delay_s", "local", "neighbor", "cs")
    readonly_fields = fields
    can_delete = False


# =============================================================================
# Corridas
# =============================================================================
@admin.register(TblExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display    = ("run_id", "comando", "fecha_inicio", "metodos", "seed", "duracion_ms")
    list_filter     = ("comando", "metodos")
    search_fields   = ("hash_config",)
    readonly_fields = ("hash_config", "fecha_inicio", "ruta_resultados", "tamanio_bytes")
    inlines         = [MethodResultInline]


# =============================================================================
# Resultados
# =============================================================================
@admin.register(TblMethodResult)
class MethodResultAdmin(admin.ModelAdmin):
    list_display = ("run", "method", "capacity_bytes", "rmse", "hit_rate", "avg_delay_s")
    list_filter  = ("method",)
    ordering     = ("-run", "method", "capacity_bytes")
