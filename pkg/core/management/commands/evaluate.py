from django.core.management.base import BaseCommand

from core.experiment import record_run, resolve_config, run_experiment

from ._options import add_experiment_arguments, collect_overrides, domain_errors


class Command(BaseCommand):
    help = "Compara SVD, NMF, DL y DDL: RMSE, tasa de aciertos y retardo por capacidad"

    def add_arguments(self, parser):
        add_experiment_arguments(parser)
        parser.add_argument("--no-record", action="store_true",
                            help="no registra la corrida en la base de datos")

    def handle(self, *args, **options):
        with domain_errors():
            cfg = resolve_config(options.get("config"), collect_overrides(options))
            outcome = run_experiment(cfg)

        self.stdout.write(f"{len(outcome.rows)} filas → {outcome.results_path}")
        for row in outcome.rows:
            self.stdout.write(
                f"  {row.method:<4} S_n={row.capacity_bytes:>12d}  rmse={row.rmse:.4f}  "
                f"hit={row.hit_rate:.4f}  delay={row.avg_delay_s:.3f}s"
            )

        if not options.get("no_record"):
            run = record_run(outcome)
            self.stdout.write(f"Corrida registrada (#{run.run_id}).")
        self.stdout.write(self.style.SUCCESS(f"Metadata: {outcome.metadata_path}"))
