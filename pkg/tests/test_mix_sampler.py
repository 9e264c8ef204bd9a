import numpy as np
import pytest

from regenforge.errors import ContractError
from regenforge.manifest import DatasetManifest, SampleRecord, Source
from regenforge.mix_sampler import (
    MixConfig,
    Strategy,
    make_sampler,
    seen_pixel_report,
)
from regenforge.taxonomy import SemanticMask


def build_manifest(n_synthetic=20, n_labelled=30):
    records = []
    for i in range(n_synthetic):
        records.append(
            SampleRecord(
                id=f"syn{i:03d}",
                source=Source.SYNTHETIC,
                image_path=f"syn{i}.png",
                mask_path=f"syn{i}_mask.png",
            )
        )
    for i in range(n_labelled):
        records.append(
            SampleRecord(
                id=f"lab{i:03d}",
                source=Source.HAND_LABELLED,
                image_path=f"lab{i}.png",
                mask_path=f"lab{i}_mask.png",
            )
        )
    return DatasetManifest(records=records)


class TestMakeSampler:
    def test_missing_synthetic_with_nonzero_ratio_rejected(self):
        manifest = build_manifest(n_synthetic=0)
        with pytest.raises(ContractError, match="synthetic"):
            make_sampler(manifest, MixConfig(ratio_synthetic=0.4))

    def test_all_synthetic_degenerate(self):
        manifest = build_manifest(n_labelled=0)
        sampler = make_sampler(manifest, MixConfig(ratio_synthetic=1.0, batch_size=8))
        for _ in range(10):
            batch = sampler.next_batch()
            assert batch.n_synthetic() == 8

    def test_bad_ratio_rejected(self):
        with pytest.raises(ContractError, match="ratio"):
            MixConfig(ratio_synthetic=1.2)


class TestStrategies:
    def test_balanced_exact_counts_every_batch(self):
        sampler = make_sampler(
            build_manifest(),
            MixConfig(
                ratio_synthetic=0.4,
                strategy=Strategy.BALANCED_HETEROGENEOUS,
                batch_size=10,
            ),
        )
        for _ in range(200):
            batch = sampler.next_batch()
            assert batch.n_synthetic() == 4
            assert len(batch) == 10

    def test_balanced_alternating_rounding_keeps_ratio_exact(self):
        # 0.45 * 8 = 3.6 synthetic per batch: counts must alternate 3/4
        # so that 10 batches hold exactly 36 synthetic samples.
        sampler = make_sampler(
            build_manifest(50, 50),
            MixConfig(
                ratio_synthetic=0.45,
                strategy=Strategy.BALANCED_HETEROGENEOUS,
                batch_size=8,
            ),
        )
        counts = [sampler.next_batch().n_synthetic() for _ in range(10)]
        assert set(counts) <= {3, 4}
        assert sum(counts) == 36

    def test_homogeneous_batches_are_pure(self):
        sampler = make_sampler(
            build_manifest(),
            MixConfig(ratio_synthetic=0.4, strategy=Strategy.HOMOGENEOUS, batch_size=6),
        )
        fractions = []
        for _ in range(2000):
            batch = sampler.next_batch()
            n = batch.n_synthetic()
            assert n in (0, 6)
            fractions.append(n / 6)
        assert abs(np.mean(fractions) - 0.4) < 0.03

    def test_weighted_random_long_run_ratio(self):
        sampler = make_sampler(
            build_manifest(),
            MixConfig(ratio_synthetic=0.4, strategy=Strategy.WEIGHTED_RANDOM, batch_size=16),
        )
        synthetic = total = 0
        for _ in range(10_000):
            batch = sampler.next_batch()
            synthetic += batch.n_synthetic()
            total += len(batch)
        assert 0.39 <= synthetic / total <= 0.41


class TestDeterminism:
    def test_same_seed_identical_streams(self):
        manifest = build_manifest()
        config = MixConfig(ratio_synthetic=0.4, seed=7, batch_size=8)
        a = make_sampler(manifest, config)
        b = make_sampler(manifest, config)
        for _ in range(100):
            assert a.next_batch() == b.next_batch()

    def test_manifest_order_does_not_matter(self):
        manifest = build_manifest()
        shuffled = DatasetManifest(records=list(reversed(manifest.records)))
        config = MixConfig(ratio_synthetic=0.4, seed=3, batch_size=8)
        a = make_sampler(manifest, config)
        b = make_sampler(shuffled, config)
        for _ in range(50):
            assert a.next_batch() == b.next_batch()

    def test_different_seeds_differ(self):
        manifest = build_manifest(500, 500)
        a = make_sampler(manifest, MixConfig(seed=0, batch_size=16))
        b = make_sampler(manifest, MixConfig(seed=1, batch_size=16))
        streams_equal = all(a.next_batch() == b.next_batch() for _ in range(10))
        assert not streams_equal

    def test_epoch_without_replacement(self):
        manifest = build_manifest(n_synthetic=12, n_labelled=1)
        sampler = make_sampler(
            manifest, MixConfig(ratio_synthetic=1.0, batch_size=4, seed=5)
        )
        drawn = []
        for _ in range(3):  # exactly one epoch of the 12 synthetic samples
            drawn.extend(sid for sid, _ in sampler.next_batch().entries)
        assert sorted(drawn) == sorted(r.id for r in manifest.by_source(Source.SYNTHETIC))


class TestSeenPixelReport:
    def _write_masks(self, tmp_path, per_record_class):
        records = []
        for rid, (source, cid) in per_record_class.items():
            data = np.full((8, 8), cid, dtype=np.uint8)
            path = tmp_path / f"{rid}.png"
            SemanticMask(data).save_png(path)
            records.append(
                SampleRecord(
                    id=rid, source=source, image_path="x.png", mask_path=str(path)
                )
            )
        return DatasetManifest(records=records)

    def test_ratio_zero_equals_labelled_distribution(self, tmp_path):
        manifest = self._write_masks(
            tmp_path,
            {
                "lab0": (Source.HAND_LABELLED, 1),
                "lab1": (Source.HAND_LABELLED, 2),
                "syn0": (Source.SYNTHETIC, 0),
            },
        )
        report = seen_pixel_report(
            manifest, MixConfig(ratio_synthetic=0.0, batch_size=4, seed=0), n_batches=50
        )
        assert report.analytic[1] == pytest.approx(0.5)
        assert report.analytic[2] == pytest.approx(0.5)
        assert report.analytic.get(0, 0.0) == 0.0
        assert report.empirical[1] == pytest.approx(0.5, abs=0.05)

    def test_convex_combination_toy(self, tmp_path):
        # Class 0 is 100% of synthetic and 0% of labelled; ratio 0.4.
        manifest = self._write_masks(
            tmp_path,
            {
                "syn0": (Source.SYNTHETIC, 0),
                "lab0": (Source.HAND_LABELLED, 1),
            },
        )
        report = seen_pixel_report(
            manifest, MixConfig(ratio_synthetic=0.4, batch_size=10, seed=0), n_batches=10
        )
        assert report.analytic[0] == pytest.approx(0.4)
        assert report.analytic[1] == pytest.approx(0.6)

    def test_empirical_converges_to_analytic(self, tmp_path):
        manifest = self._write_masks(
            tmp_path,
            {
                "syn0": (Source.SYNTHETIC, 0),
                "syn1": (Source.SYNTHETIC, 2),
                "lab0": (Source.HAND_LABELLED, 1),
                "lab1": (Source.HAND_LABELLED, 2),
            },
        )
        config = MixConfig(ratio_synthetic=0.4, batch_size=16, seed=1)
        report = seen_pixel_report(manifest, config, n_batches=3200)  # ~51k samples
        for cid, expected in report.analytic.items():
            assert report.empirical[cid] == pytest.approx(expected, abs=0.01)
