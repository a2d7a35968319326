import io
import tempfile
from pathlib import Path
from unittest import skipUnless

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from core.engine.errors import ConfigError, DataError, DataParseError
from core.ingestion_helpers import (
    RatingEvent, RatingMatrix, RatingScale, deduplicate, draw_zipf_requests, home_men, ingest,
    parse_csv, parse_movielens, read_manifest, shard, shard_manifest, split, synth_zipf,
    write_events_csv, write_manifest,
)


def matrix_of_users(n, contents=3):
    events = [RatingEvent(u, c, float((u + c) % 5 + 1)) for u in range(1, n + 1) for c in range(1, contents + 1)]
    return RatingMatrix.from_events(events)


class ParseTests(SimpleTestCase):
    def test_movielens_line(self):
        (e,) = parse_movielens(["1::1193::5::978300760\n"])
        self.assertEqual((e.user_id, e.content_id, e.rating, e.timestamp), (1, 1193, 5.0, 978300760))

    def test_movielens_bad_id_reports_line(self):
        with self.assertRaises(DataParseError) as ctx:
            parse_movielens(["1::abc::5::0"])
        self.assertEqual(ctx.exception.line_no, 1)

    def test_movielens_wrong_field_count(self):
        with self.assertRaises(DataParseError) as ctx:
            parse_movielens(["1::2::5::0", "", "3::4::5"])
        self.assertEqual(ctx.exception.line_no, 3)

    def test_csv_with_semicolons(self):
        events = parse_csv(io.StringIO("user_id;content_id;rating;timestamp\n1;2;4;10\n2;2;3;11\n"))
        self.assertEqual([(e.user_id, e.content_id, e.rating) for e in events], [(1, 2, 4.0), (2, 2, 3.0)])

    def test_csv_missing_header(self):
        with self.assertRaises(DataParseError):
            parse_csv(io.StringIO("a,b,c\n1,2,3\n"))

    def test_negative_rating_rejected(self):
        with self.assertRaises(DataParseError):
            parse_movielens(["1::2::-1::0"])

    def test_ingest_roundtrip_and_empty_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "r.csv"
            write_events_csv([RatingEvent(1, 2, 3.0, 4)], path)
            (e,) = ingest(path, "csv")
            self.assertEqual((e.user_id, e.content_id, e.rating, e.timestamp), (1, 2, 3.0, 4))

            empty = Path(tmp) / "ratings.dat"
            empty.write_text("", encoding="latin-1")
            with self.assertRaises(DataError):
                ingest(empty, "movielens-dat")

    def test_unknown_format(self):
        with self.assertRaises(ConfigError):
            ingest("x.json", "json")


class MatrixTests(SimpleTestCase):
    def test_last_timestamp_wins(self):
        events = [RatingEvent(1, 1, 2.0, 5), RatingEvent(1, 1, 4.0, 9), RatingEvent(1, 1, 1.0, 7)]
        (kept,) = deduplicate(events)
        self.assertEqual(kept.rating, 4.0)
        x = RatingMatrix.from_events(events)
        self.assertEqual(x.n_observed, 1)
        self.assertEqual(x.dense()[0, 0], 4.0)

    def test_dense_and_mask_align(self):
        x = RatingMatrix.from_events([RatingEvent(3, 7, 5.0), RatingEvent(1, 2, 1.0)])
        self.assertEqual(x.users, (1, 3))
        self.assertEqual(x.contents, (2, 7))
        np.testing.assert_array_equal(x.dense(), [[1.0, 0.0], [0.0, 5.0]])
        np.testing.assert_array_equal(x.mask(), [[True, False], [False, True]])

    def test_scale_roundtrip(self):
        scale = RatingScale(1, 5)
        np.testing.assert_allclose(scale.normalize([1, 3, 5]), [0.0, 0.5, 1.0])
        np.testing.assert_allclose(scale.denormalize(scale.normalize([2.0, 4.0])), [2.0, 4.0])

    def test_vstack_of_shards_keeps_every_rating(self):
        x = matrix_of_users(7)
        parts = shard(x, 3, seed=2)
        stacked = RatingMatrix.vstack(parts)
        self.assertEqual(stacked.n_observed, x.n_observed)
        self.assertEqual(sorted(stacked.users), list(x.users))


class SplitTests(SimpleTestCase):
    def test_single_user_eighty_twenty(self):
        events = [RatingEvent(1, c, 3.0) for c in range(1, 11)]
        pair = split(events, 0.8, seed=1)
        self.assertEqual((pair.train.n_observed, pair.test.n_observed), (8, 2))

    def test_same_seed_same_split(self):
        events = synth_zipf(30, 20, density=0.4, seed=3)
        a, b = split(events, seed=9), split(events, seed=9)
        self.assertEqual(a.train, b.train)
        self.assertEqual(a.test, b.test)

    def test_partition(self):
        events = synth_zipf(30, 20, density=0.4, seed=3)
        pair = split(events, seed=9)
        train, test = set(pair.train.entries()), set(pair.test.entries())
        self.assertFalse(train & test)
        original = {(e.user_id, e.content_id, e.rating) for e in events}
        self.assertEqual(train | test, original)
        self.assertLessEqual(abs(len(train) - 0.8 * len(events)), 1)

    def test_single_rating_user_stays_in_train(self):
        events = [RatingEvent(1, c, 3.0) for c in range(1, 11)] + [RatingEvent(2, 1, 5.0)]
        pair = split(events, seed=0)
        self.assertIn((2, 1, 5.0), set(pair.train.entries()))

    def test_every_user_keeps_a_training_rating(self):
        pair = split(synth_zipf(40, 10, density=0.3, seed=1), seed=4)
        users_in_train = {u for u, _, _ in pair.train.entries()}
        self.assertEqual(users_in_train, set(pair.train.users))

    def test_too_few_events(self):
        with self.assertRaises(DataError):
            split([RatingEvent(1, 1, 1.0)] * 4)


class ShardTests(SimpleTestCase):
    def test_equal_sizes(self):
        self.assertEqual([s.n_users for s in shard(matrix_of_users(6), 3)], [2, 2, 2])

    def test_remainder(self):
        self.assertEqual(sorted((s.n_users for s in shard(matrix_of_users(7), 3)), reverse=True), [3, 2, 2])

    def test_each_user_in_one_shard(self):
        x = matrix_of_users(13)
        manifest = shard_manifest(x, 4, seed=3)
        all_users = [u for users in manifest.values() for u in users]
        self.assertEqual(sorted(all_users), list(x.users))
        self.assertEqual(set(home_men(manifest)), set(x.users))

    def test_invalid_count(self):
        with self.assertRaises(ConfigError):
            shard(matrix_of_users(3), 0)

    def test_manifest_file(self):
        manifest = shard_manifest(matrix_of_users(9), 3, seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "manifest.json"
            write_manifest(manifest, path)
            self.assertEqual(read_manifest(path), manifest)


def rater_counts(events, contents: int) -> np.ndarray:
    return np.bincount([e.content_id for e in events], minlength=contents + 1)[1:]


class SynthTests(SimpleTestCase):
    def test_full_density(self):
        self.assertEqual(len(synth_zipf(7, 5, density=1.0, seed=0)), 35)

    def test_ratings_in_scale(self):
        events = synth_zipf(20, 15, density=0.5, seed=1)
        self.assertTrue(all(1.0 <= e.rating <= 5.0 for e in events))

    def test_total_follows_density(self):
        self.assertEqual(len(synth_zipf(8, 10, density=0.5, seed=2)), 40)

    def test_no_duplicate_pairs(self):
        events = synth_zipf(50, 30, density=0.4, seed=5)
        self.assertEqual(len({(e.user_id, e.content_id) for e in events}), len(events))

    def test_every_user_present_when_top_content_saturates(self):
        # 1500 ratings: el contenido 1 pide 333 > 300 y lo califican todos
        events = synth_zipf(300, 50, density=0.1, seed=4)
        self.assertEqual({e.user_id for e in events}, set(range(1, 301)))

    def test_uniform_when_exponent_zero(self):
        users, contents = 2000, 10
        counts = rater_counts(synth_zipf(users, contents, density=0.05, s=0.0, seed=3), contents)
        n = counts.sum()
        expected = n / contents
        sigma = np.sqrt(n * (1 / contents) * (1 - 1 / contents))
        self.assertTrue((np.abs(counts - expected) <= 3 * sigma).all())

    def test_rank_ratio_for_unit_exponent(self):
        # 1000 ratings sobre 10 contenidos
        counts = rater_counts(synth_zipf(2000, 10, density=0.05, s=1.0, seed=7), 10)
        self.assertEqual(counts.sum(), 1000)
        self.assertAlmostEqual(counts[0] / counts[1], 2.0, delta=0.3)

    def test_counts_stay_zipfian_at_default_density(self):
        counts = rater_counts(synth_zipf(2000, 10, density=0.3, s=1.0, seed=7), 10)
        self.assertLessEqual(counts.max(), 2000)
        self.assertAlmostEqual(counts[0] / counts[1], 2.0, delta=0.3)
        self.assertTrue((np.diff(counts) <= 0).all())

    def test_popular_contents_rated_higher(self):
        events = synth_zipf(200, 20, density=0.3, s=1.0, seed=1)
        by_content = {c: [e.rating for e in events if e.content_id == c] for c in (1, 20)}
        self.assertGreater(np.mean(by_content[1]), np.mean(by_content[20]))

    def test_request_draws_follow_weights(self):
        counts = np.bincount(draw_zipf_requests(20_000, 10, 1.0, seed=7), minlength=11)[1:]
        self.assertAlmostEqual(counts[0] / counts[1], 2.0, delta=0.3)


MOVIELENS = Path(settings.EDGECACHE_DATA_DIR) / "ml-1m" / "ratings.dat"


@skipUnless(MOVIELENS.exists(), f"sin {MOVIELENS}")
class MovieLensTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.events = ingest(MOVIELENS, "movielens-dat")

    def test_counts(self):
        self.assertEqual(len(self.events), 1_000_209)
        self.assertEqual(len({e.user_id for e in self.events}), 6040)
        self.assertEqual(len({e.content_id for e in self.events}), 3706)

    def test_ratings_are_whole_stars(self):
        ratings = {e.rating for e in self.events}
        self.assertEqual(ratings, {1.0, 2.0, 3.0, 4.0, 5.0})

    def test_split_keeps_every_user_in_train(self):
        pair = split(self.events, seed=2020)
        self.assertEqual(pair.train.n_observed + pair.test.n_observed, 1_000_209)
        self.assertLessEqual(abs(pair.test.n_observed - 0.2 * 1_000_209), 1)
        self.assertEqual(len({u for u, _, _ in pair.train.entries()}), 6040)
