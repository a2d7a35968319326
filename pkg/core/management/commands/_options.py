# =============================================================================
# _options.py — Flags compartidos por train / evaluate / sweep
# =============================================================================
# Cada flag tiene dest = último segmento de la clave con punto del JSON
# (--mens → train.mens). Los flags no indicados quedan en None y no pisan
# el archivo de configuración.
# -----------------------------------------------------------------------------
import argparse
from contextlib import contextmanager

from django.core.management.base import CommandError

from core.engine.errors import (
    ConfigError, DataError, DegenerateInputError, DivergedError, EdgeCacheError,
)
from core.forms import DEFAULTS

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

FLAG = argparse.BooleanOptionalAction


def add_experiment_arguments(parser) -> None:
    parser.add_argument("--config", help="JSON con claves con punto (o metadata.json de otra corrida)")

    g = parser.add_argument_group("datos")
    g.add_argument("--dataset", help="ratings.dat / csv (relativo a EDGECACHE_DATA_DIR)")
    g.add_argument("--format", choices=["movielens-dat", "csv"])
    g.add_argument("--synth-users", type=int)
    g.add_argument("--synth-contents", type=int)
    g.add_argument("--synth-density", type=float)
    g.add_argument("--synth-zipf", type=float)
    g.add_argument("--split-ratio", type=float)
    g.add_argument("--rating-min", type=float)
    g.add_argument("--rating-max", type=float)

    g = parser.add_argument_group("entrenamiento")
    g.add_argument("--topology", choices=["dl", "ddl"])
    g.add_argument("--mens", type=int, help="N (MENs)")
    g.add_argument("--batch", type=int, help="β global")
    g.add_argument("--epochs", type=int, help="T")
    g.add_argument("--dropout", type=float, help="r: fracción descartada")
    g.add_argument("--dropout-keep", action=FLAG, help="interpreta --dropout como probabilidad de conservar")
    g.add_argument("--hidden", help="neuronas por capa oculta, ej: 64,64")
    g.add_argument("--output-activation", choices=["relu", "linear"])
    g.add_argument("--adam-mode", choices=["paper", "standard"])
    g.add_argument("--adam-step", type=float, help="λ")
    g.add_argument("--adam-decay-eta", type=float)
    g.add_argument("--adam-decay-delta", type=float)
    g.add_argument("--adam-eps", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--patience", type=int)
    g.add_argument("--zero-fill", action=FLAG)
    g.add_argument("--weighted-mean", action=FLAG)
    g.add_argument("--parallel-workers", action=FLAG, help="rondas locales DDL en un pool de hilos")
    g.add_argument("--eval-every", type=int, help="RMSE de test cada k épocas (0 = nunca)")

    g = parser.add_argument_group("baselines")
    g.add_argument("--svd-rank", type=int)
    g.add_argument("--nmf-rank", type=int)
    g.add_argument("--nmf-iters", type=int)

    g = parser.add_argument_group("red y caché")
    g.add_argument("--content-size-mb", type=float)
    g.add_argument("--bw-cs-mbps", type=float)
    g.add_argument("--bw-men-mbps", type=float)
    g.add_argument("--bw-user-mbps", type=float)
    g.add_argument("--capacities", help="capacidades por MEN en MB, ej: 400,800,1600")
    g.add_argument("--dl-global-agg", action=FLAG)
    g.add_argument("--placement-score", choices=["demand", "rating"],
                   help="DL/DDL: demanda esperada (rating × propensión) o rating predicho")
    g.add_argument("--count-neighbor-hits", action=FLAG)
    g.add_argument("--zero-local-delay", action=FLAG)

    g = parser.add_argument_group("corrida")
    g.add_argument("--methods", help="subconjunto de svd,nmf,dl,ddl")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="directorio de salida (default: EDGECACHE_OUTPUT_DIR/run_<hash>)")
    g.add_argument("--parallel", action=FLAG, help="métodos en paralelo (semillas disjuntas)")


def collect_overrides(options: dict) -> dict:
    return {dest: options.get(dest) for dest in DEFAULTS if options.get(dest) is not None}


@contextmanager
def domain_errors():
    """Traduce errores del dominio a CommandError con su código de salida."""
    try:
        yield
    except (ConfigError, DataError) as exc:
        raise CommandError(f"Configuración inválida: {exc}", returncode=EXIT_CONFIG) from exc
    except DivergedError as exc:
        raise CommandError(f"Divergencia: {exc}", returncode=EXIT_DIVERGED) from exc
    except DegenerateInputError as exc:
        raise CommandError(f"Datos insuficientes: {exc}", returncode=EXIT_CONFIG) from exc
    except EdgeCacheError as exc:
        raise CommandError(f"{type(exc).__name__}: {exc}", returncode=EXIT_CONFIG) from exc
    except OSError as exc:
        raise CommandError(f"Error de E/S: {exc}", returncode=EXIT_IO) from exc
