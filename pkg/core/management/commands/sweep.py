from django.core.management.base import BaseCommand, CommandError

from core.experiment import resolve_config, run_mens_sweep

from ._options import EXIT_CONFIG, add_experiment_arguments, collect_overrides, domain_errors


class Command(BaseCommand):
    help = "Tiempo de aprendizaje de DDL según el número de MENs (DL como referencia)"

    def add_arguments(self, parser):
        add_experiment_arguments(parser)
        parser.add_argument("--mens-list", default="1,2,3,6", help="valores de N, ej: 1,2,3,6")

    def handle(self, *args, **options):
        try:
            mens_list = [int(p) for p in options["mens_list"].split(",") if p.strip()]
        except ValueError:
            raise CommandError("--mens-list debe ser una lista de enteros", returncode=EXIT_CONFIG)

        with domain_errors():
            cfg = resolve_config(options.get("config"), collect_overrides(options))
            rows, path = run_mens_sweep(cfg, mens_list)

        for r in rows:
            self.stdout.write(f"  {r.method:<4} N={r.mens:<3d} épocas={r.epochs:<5d} {r.wall_ms:10.1f} ms")
        self.stdout.write(self.style.SUCCESS(f"Tiempos en {path}"))
