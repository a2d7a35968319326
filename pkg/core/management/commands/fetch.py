import logging
import shutil
import zipfile
from pathlib import Path

import urllib3
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ._options import EXIT_IO

logger = logging.getLogger(__name__)

MEMBER = "ml-1m/ratings.dat"
CHUNK = 1 << 16


class Command(BaseCommand):
    help = "Descarga MovieLens 1M y deja ml-1m/ratings.dat en EDGECACHE_DATA_DIR"

    def add_arguments(self, parser):
        parser.add_argument("--url", default=None, help="default: settings.MOVIELENS_URL")
        parser.add_argument("--dest", default=None, help="default: EDGECACHE_DATA_DIR")
        parser.add_argument("--force", action="store_true", help="descarga aunque ya exista")

    def handle(self, *args, **options):
        url = options.get("url") or settings.MOVIELENS_URL
        dest = Path(options.get("dest") or settings.EDGECACHE_DATA_DIR)
        target = dest / MEMBER
        if target.exists() and not options["force"]:
            self.stdout.write(f"Ya existe {target}; usa --force para volver a descargar.")
            return

        dest.mkdir(parents=True, exist_ok=True)
        archive = dest / Path(url).name
        try:
            self._download(url, archive)
            with zipfile.ZipFile(archive) as zf:
                if MEMBER not in zf.namelist():
                    raise CommandError(f"{archive.name} no contiene {MEMBER}", returncode=EXIT_IO)
                zf.extract(MEMBER, dest)
        except (OSError, zipfile.BadZipFile, urllib3.exceptions.HTTPError) as exc:
            raise CommandError(f"No se pudo obtener MovieLens: {exc}", returncode=EXIT_IO) from exc

        self.stdout.write(self.style.SUCCESS(f"Dataset listo: {target}"))

    def _download(self, url: str, archive: Path) -> None:
        http = urllib3.PoolManager(retries=urllib3.Retry(total=3, backoff_factor=0.5))
        resp = http.request("GET", url, preload_content=False)
        try:
            if resp.status != 200:
                raise CommandError(f"HTTP {resp.status} al descargar {url}", returncode=EXIT_IO)
            with archive.open("wb") as fh:
                shutil.copyfileobj(resp, fh, CHUNK)
        finally:
            resp.release_conn()
        logger.info("descargado %s (%d bytes)", archive.name, archive.stat().st_size)
