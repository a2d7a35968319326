from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from core.ingestion_helpers import draw_zipf_requests, synth_zipf, write_events_csv

from ._options import domain_errors


class Command(BaseCommand):
    help = "Genera un dataset sintético de ratings con popularidad Zipf (CSV)"

    def add_arguments(self, parser):
        parser.add_argument("--users", type=int, default=50)
        parser.add_argument("--contents", type=int, default=40)
        parser.add_argument("--density", type=float, default=0.3)
        parser.add_argument("--zipf", type=float, default=1.0, help="exponente s")
        parser.add_argument("--seed", type=int, default=2020)
        parser.add_argument("--out", help="archivo CSV (default: EDGECACHE_DATA_DIR/synth.csv)")
        parser.add_argument("--requests", type=int, default=0,
                            help="además escribe N peticiones Zipf (un content_id por línea)")

    def handle(self, *args, **options):
        out = Path(options.get("out") or Path(settings.EDGECACHE_DATA_DIR) / "synth.csv")
        with domain_errors():
            events = synth_zipf(options["users"], options["contents"], options["density"],
                                options["zipf"], seed=options["seed"])
            out.parent.mkdir(parents=True, exist_ok=True)
            write_events_csv(events, out)
            if options["requests"]:
                reqs = draw_zipf_requests(options["requests"], options["contents"],
                                          options["zipf"], seed=options["seed"])
                req_path = out.with_name(out.stem + "_requests.txt")
                req_path.write_text("\n".join(str(c) for c in reqs) + "\n", encoding="utf-8")
                self.stdout.write(f"{len(reqs)} peticiones → {req_path}")

        self.stdout.write(self.style.SUCCESS(f"{len(events)} ratings → {out}"))
