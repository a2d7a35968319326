from django.core.management.base import BaseCommand

from core.experiment import resolve_config, run_training

from ._options import add_experiment_arguments, collect_overrides, domain_errors


class Command(BaseCommand):
    help = "Entrena el autoencoder en modo DL (centralizado) o DDL (por MENs)"

    def add_arguments(self, parser):
        add_experiment_arguments(parser)

    def handle(self, *args, **options):
        with domain_errors():
            cfg = resolve_config(options.get("config"), collect_overrides(options))
            params, log, meta_path = run_training(cfg)

        summary = log.summary()
        self.stdout.write(
            f"{cfg.train.topology.value.upper()}: {summary['epochs']} épocas, "
            f"{summary['rounds']} rondas, loss final={summary['final_loss']}, "
            f"{params.size} parámetros"
        )
        if summary["bytes_up"]:
            self.stdout.write(f"Tráfico MEN→CS: {summary['bytes_up']} B, CS→MEN: {summary['bytes_down']} B")
        self.stdout.write(self.style.SUCCESS(f"Modelo y curvas en {cfg.out} ({meta_path.name})"))
