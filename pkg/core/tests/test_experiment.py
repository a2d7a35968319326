import csv
import json
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.engine.dist import EpochRecord, TrainLog
from core.engine.errors import (
    ConfigError, ContractError, DegenerateInputError, DivergedError, WorkerFailure,
)
from core.experiment import (
    MethodFit, derive_seed, emit_learning_curve, load_config_file, placement_scores, prepare_data,
    resolve_config, run_experiment,
)
from core.forms import DEFAULTS, ExperimentConfigForm
from core.ingestion_helpers import RatingScale
from core.management.commands._options import domain_errors

# configuración de humo: sintético 50×40, red diminuta
SMOKE = {
    "synth_users": 50, "synth_contents": 40, "synth_density": 0.3,
    "epochs": 3, "hidden": "8", "mens": 2, "batch": 10,
    "svd_rank": 4, "nmf_rank": 4, "nmf_iters": 20,
    "capacities": "400,800,1600", "seed": 7,
}


class ConfigResolutionTests(SimpleTestCase):
    def test_defaults_match_reference_setup(self):
        cfg = resolve_config(overrides={"synth_users": 10})
        self.assertEqual(cfg.train.mens, 6)
        self.assertEqual(cfg.train.hidden, (64, 64))
        self.assertEqual(cfg.train.dropout.rate, 0.8)
        self.assertEqual(cfg.train.adam.step, 0.001)
        self.assertEqual(cfg.train.epochs, 2000)
        self.assertEqual(cfg.content_size, 200_000_000)
        self.assertEqual(cfg.network.bw_cs, 60_000_000)
        self.assertEqual(cfg.split_ratio, 0.8)
        self.assertEqual(cfg.methods, ("svd", "nmf", "dl", "ddl"))

    def test_cli_overrides_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps({"train.epochs": 5, "data.synth_users": 12, "cache.capacities": [200, 400]}))
            cfg = resolve_config(path, {"epochs": 9})
        self.assertEqual(cfg.train.epochs, 9)
        self.assertEqual(cfg.synth_users, 12)
        self.assertEqual(cfg.capacities, (200_000_000, 400_000_000))

    def test_unknown_key_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps({"train.learning_rate": 0.1}))
            with self.assertRaises(ConfigError):
                load_config_file(path)
            path.write_text(json.dumps({"cache.epochs": 3}))
            with self.assertRaises(ConfigError):
                load_config_file(path)

    def test_missing_dataset(self):
        with self.assertRaises(ConfigError):
            resolve_config()

    def test_batch_must_divide_mens_for_ddl(self):
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(overrides={"synth_users": 10, "mens": 4, "batch": 10})
        self.assertIn("train.batch", str(ctx.exception))
        cfg = resolve_config(overrides={"synth_users": 10, "mens": 4, "batch": 10,
                                        "methods": "svd,dl", "topology": "dl"})
        self.assertEqual(cfg.train.batch_size, 10)

    def test_dropout_keep_flag(self):
        cfg = resolve_config(overrides={"synth_users": 10, "dropout": 0.8, "dropout_keep": True})
        self.assertAlmostEqual(cfg.train.dropout.rate, 0.2)

    def test_form_rejects_bad_lists(self):
        data = dict(DEFAULTS, synth_users=5, methods="svd,foo", hidden="64,x")
        form = ExperimentConfigForm(data=data)
        self.assertFalse(form.is_valid())
        self.assertIn("methods", form.errors)
        self.assertIn("hidden", form.errors)

    def test_method_seeds_are_disjoint_and_stable(self):
        seeds = {m: derive_seed(2020, m) for m in ("svd", "nmf", "dl", "ddl")}
        self.assertEqual(len(set(seeds.values())), 4)
        self.assertEqual(seeds["dl"], derive_seed(2020, "dl"))


class LearningCurveTests(SimpleTestCase):
    def test_three_epochs(self):
        log = TrainLog([EpochRecord(i, 1.0 / i, 10.0 * i, i) for i in (1, 2, 3)])
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_learning_curve(log, Path(tmp) / "curve.csv")
            rows = list(csv.reader(path.read_text().splitlines()))
        self.assertEqual(rows[0], ["epoch", "loss", "wall_ms"])
        self.assertEqual(len(rows), 4)
        wall = [float(r[2]) for r in rows[1:]]
        self.assertEqual(wall, sorted(wall))

    def test_empty_log(self):
        with tempfile.TemporaryDirectory() as tmp, self.assertRaises(ContractError):
            emit_learning_curve(TrainLog(), Path(tmp) / "curve.csv")

    def test_unwritable_path(self):
        log = TrainLog([EpochRecord(1, 1.0, 1.0, 1)])
        with tempfile.TemporaryDirectory() as tmp, self.assertRaises(OSError):
            emit_learning_curve(log, Path(tmp) / "missing" / "curve.csv")


class RunExperimentTests(SimpleTestCase):
    def _run(self, out, **extra):
        cfg = resolve_config(overrides={**SMOKE, "out": str(out), **extra})
        return run_experiment(cfg)

    def test_rows_per_method_and_capacity(self):
        with tempfile.TemporaryDirectory() as tmp:
            outcome = self._run(Path(tmp))
            lines = outcome.results_path.read_text().splitlines()
            self.assertEqual(lines[0], "method,capacity_bytes,rmse,hit_rate,avg_delay_s,local,neighbor,cs")
            self.assertEqual(len(lines) - 1, 4 * 3)
            for name in ("metadata.json", "manifest.json", "placements.json",
                         "learning_curve_dl.csv", "learning_curve_ddl.csv", "train_log_ddl.csv"):
                self.assertTrue((Path(tmp) / name).exists(), name)

            meta = json.loads(outcome.metadata_path.read_text())
            self.assertEqual(meta["config"]["run.seed"], 7)
            self.assertIn("ddl", meta["seeds"])
            self.assertGreater(meta["training"]["ddl"]["bytes_up"], 0)
            self.assertGreater(meta["training"]["dl"]["raw_upload_bytes"], 0)

        for row in outcome.rows:
            self.assertEqual(row.local + row.neighbor + row.cs, outcome.rows[0].local
                             + outcome.rows[0].neighbor + outcome.rows[0].cs)

    def test_same_seed_byte_identical_csv(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = self._run(Path(a)).results_path.read_bytes()
            second = self._run(Path(b)).results_path.read_bytes()
        self.assertEqual(first, second)

    def test_parallel_methods_same_csv(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            seq = self._run(Path(a)).results_path.read_bytes()
            par = self._run(Path(b), parallel=True, parallel_workers=True).results_path.read_bytes()
        self.assertEqual(seq, par)

    def test_metadata_alone_reproduces_run(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = self._run(Path(a))
            cfg = resolve_config(first.metadata_path, {"out": b})
            again = run_experiment(cfg)
            self.assertEqual(first.results_path.read_bytes(), again.results_path.read_bytes())

    def test_eval_every_records_test_rmse(self):
        with tempfile.TemporaryDirectory() as tmp:
            outcome = self._run(Path(tmp), methods="ddl", eval_every=1)
        self.assertEqual(sorted(outcome.fits["ddl"].log.test_rmse), [1, 2, 3])


class PlacementScoreTests(SimpleTestCase):
    def _data(self, **extra):
        cfg = resolve_config(overrides={**SMOKE, "out": "unused", **extra})
        return cfg, prepare_data(cfg)

    def test_zero_fill_trains_missing_as_rating_zero(self):
        cfg, data = self._data(zero_fill=True)
        self.assertEqual(data.scale, RatingScale(0.0, 5.0))
        for raw, scaled in zip(data.shards, data.scaled_shards()):
            np.testing.assert_allclose(scaled.values, raw.values / 5.0)
        _, plain = self._data()
        self.assertEqual(plain.scale, RatingScale(1.0, 5.0))

    def test_baselines_rank_by_reconstruction(self):
        cfg, data = self._data()
        pred = np.ones(data.pair.train.shape)
        fit = MethodFit("svd", 0, pred, 0.0)
        self.assertIs(placement_scores(cfg, data, fit), pred)

    def test_autoencoder_scores_expected_demand(self):
        cfg, data = self._data()
        train = data.pair.train
        fit = MethodFit("ddl", 0, np.full(train.shape, 3.0), 0.0)
        scores = placement_scores(cfg, data, fit)
        self.assertTrue(np.all(scores[train.mask()] == 0.0))
        self.assertTrue(np.all(scores >= 0.0))
        self.assertTrue(np.all(scores <= 3.0))
        self.assertGreater(float(scores.sum()), 0.0)

    def test_rating_mode_and_zero_fill_keep_prediction(self):
        for extra in ({"placement_score": "rating"}, {"zero_fill": True}):
            with self.subTest(**extra):
                cfg, data = self._data(**extra)
                fit = MethodFit("ddl", 0, np.full(data.pair.train.shape, 3.0), 0.0)
                self.assertIs(placement_scores(cfg, data, fit), fit.prediction)


class EvaluateCommandTests(SimpleTestCase):
    def test_missing_dataset_exits_2(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("evaluate", no_record=True)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_invalid_value_exits_2(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("evaluate", synth_users=10, batch=7, mens=3, no_record=True)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_divergence_exits_3_naming_method(self):
        with tempfile.TemporaryDirectory() as tmp, self.assertRaises(CommandError) as ctx:
            call_command("evaluate", **{**SMOKE, "methods": "dl", "adam_mode": "standard",
                                        "adam_step": 1e200, "dropout": 0.0, "out": tmp},
                         no_record=True)
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn("dl", str(ctx.exception))

    def test_smoke_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            call_command("evaluate", **SMOKE, out=tmp, no_record=True)
            rows = (Path(tmp) / "results.csv").read_text().splitlines()
        self.assertEqual(len(rows), 1 + 12)

    def test_empty_test_split_exits_2(self):
        # un rating por usuario: todos quedan en train y el test sale vacío
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ratings.csv"
            path.write_text("user_id,content_id,rating,timestamp\n"
                            + "".join(f"{u},{u},4,0\n" for u in range(1, 8)))
            with self.assertRaises(CommandError) as ctx:
                call_command("evaluate", dataset=str(path), format="csv", methods="svd",
                             svd_rank=1, mens=1, batch=1, out=tmp, no_record=True)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("Datos insuficientes", str(ctx.exception))


class DomainErrorsTests(SimpleTestCase):
    def test_exit_codes(self):
        cases = [
            (ConfigError("x"), 2),
            (DegenerateInputError("test vacío"), 2),
            (ContractError("x"), 2),
            (WorkerFailure(3, 2, RuntimeError("caído")), 2),
            (DivergedError(4, "ddl"), 3),
            (OSError("disco lleno"), 1),
        ]
        for exc, code in cases:
            with self.subTest(exc=type(exc).__name__):
                with self.assertRaises(CommandError) as ctx, domain_errors():
                    raise exc
                self.assertEqual(ctx.exception.returncode, code)

    def test_worker_failure_names_men(self):
        with self.assertRaises(CommandError) as ctx, domain_errors():
            raise WorkerFailure(3, 2, RuntimeError("caído"))
        self.assertIn("WorkerFailure", str(ctx.exception))
        self.assertIn("MEN-2", str(ctx.exception))
