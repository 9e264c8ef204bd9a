import numpy as np
import pytest

from regenforge.errors import ConfigError, ContractError
from regenforge.manifest import (
    DatasetManifest,
    ReviewStatus,
    SampleRecord,
    Source,
    read_manifest,
    write_manifest,
)
from regenforge.taxonomy import (
    ClassDef,
    ClassTaxonomy,
    Rank,
    SemanticMask,
    decode_mask,
    default_taxonomy,
    encode_mask,
    load_taxonomy,
)


def small_taxonomy():
    return ClassTaxonomy(
        classes=(
            ClassDef(0, "Red", Rank.SPECIES, (255, 0, 0)),
            ClassDef(1, "Green", Rank.SPECIES, (0, 255, 0)),
            ClassDef(2, "Blue", Rank.NON_PLANT, (0, 0, 255)),
        ),
        ignore_index=255,
    )


class TestDefaultTaxonomy:
    def test_has_23_classes_20_plant_3_non_plant(self):
        t = default_taxonomy()
        assert t.n_classes == 23
        plants = [c for c in t.classes if c.rank.is_plant]
        assert len(plants) == 20
        assert {c.name for c in t.classes if not c.rank.is_plant} == {
            "Wood",
            "Boulder",
            "Other",
        }

    def test_ranks_match_published_hierarchy(self):
        t = default_taxonomy()
        assert t.by_name("Moss").rank is Rank.DIVISION
        assert t.by_name("Fern").rank is Rank.CLASS
        assert t.by_name("Sedge").rank is Rank.FAMILY
        for genus in ("Fir", "Serviceberry", "Willowherb", "Spruce", "Pine"):
            assert t.by_name(genus).rank is Rank.GENUS
        species = [c for c in t.classes if c.rank is Rank.SPECIES]
        assert len(species) == 12

    def test_ignore_index_outside_id_range(self):
        t = default_taxonomy()
        assert t.ignore_index == 255
        assert all(c.id != t.ignore_index for c in t.classes)

    def test_palette_counts_shades(self):
        t = default_taxonomy()
        # 23 primaries + 2 blueberry shades
        assert t.palette_size == 25


class TestLoadTaxonomy:
    def test_duplicate_colour_names_both_classes(self, tmp_path):
        cfg = tmp_path / "tax.yaml"
        cfg.write_text(
            "classes:\n"
            "  - {name: A, rank: species, colour: [255, 0, 0]}\n"
            "  - {name: B, rank: species, colour: [255, 0, 0]}\n"
        )
        with pytest.raises(ConfigError, match="'A'.*'B'|duplicate colour"):
            load_taxonomy(cfg)

    def test_duplicate_shade_vs_primary_rejected(self, tmp_path):
        cfg = tmp_path / "tax.yaml"
        cfg.write_text(
            "classes:\n"
            "  - {name: A, rank: species, colour: [255, 0, 0]}\n"
            "  - name: B\n"
            "    rank: species\n"
            "    colour: [0, 255, 0]\n"
            "    gradient_shades:\n"
            "      - {label: B2, colour: [255, 0, 0]}\n"
        )
        with pytest.raises(ConfigError, match="duplicate colour"):
            load_taxonomy(cfg)

    def test_missing_field_reports_line(self, tmp_path):
        cfg = tmp_path / "tax.yaml"
        cfg.write_text(
            "classes:\n"
            "  - {name: A, rank: species, colour: [255, 0, 0]}\n"
            "  - {name: B, rank: species}\n"
        )
        with pytest.raises(ConfigError, match=r"line 3.*'colour'|'colour'.*line 3"):
            load_taxonomy(cfg)

    def test_four_classes_two_shades_palette_size(self, tmp_path):
        cfg = tmp_path / "tax.yaml"
        cfg.write_text(
            "classes:\n"
            "  - {name: A, rank: species, colour: [10, 0, 0]}\n"
            "  - {name: B, rank: species, colour: [0, 10, 0]}\n"
            "  - {name: C, rank: species, colour: [0, 0, 10]}\n"
            "  - name: D\n"
            "    rank: genus\n"
            "    colour: [10, 10, 0]\n"
            "    gradient_shades:\n"
            "      - {label: D1, colour: [20, 20, 0]}\n"
            "      - {label: D2, colour: [30, 30, 0]}\n"
        )
        t = load_taxonomy(cfg)
        assert t.n_classes == 4
        assert t.palette_size == 6

    def test_non_contiguous_ids_rejected(self):
        with pytest.raises(ConfigError, match="contiguous"):
            ClassTaxonomy(
                classes=(
                    ClassDef(0, "A", Rank.SPECIES, (1, 0, 0)),
                    ClassDef(2, "B", Rank.SPECIES, (2, 0, 0)),
                )
            )


class TestDecodeMask:
    def test_exact_palette_zero_tolerance(self):
        t = small_taxonomy()
        img = np.zeros((4, 6, 3), dtype=np.uint8)
        img[:, :2] = (255, 0, 0)
        img[:, 2:4] = (0, 255, 0)
        img[:, 4:] = (0, 0, 255)
        mask, report = decode_mask(img, t, tolerance=0)
        assert report.fraction == 0.0
        assert set(np.unique(mask.data)) == {0, 1, 2}

    def test_gradient_shades_merge_into_one_class(self):
        t = ClassTaxonomy(
            classes=(
                ClassDef(0, "Back", Rank.NON_PLANT, (0, 0, 0)),
                ClassDef(
                    1,
                    "Blueberry",
                    Rank.SPECIES,
                    (0, 0, 200),
                    gradient_shades=((60, 60, 255), (0, 0, 120)),
                    shade_labels=("S1", "S2"),
                ),
            )
        )
        img = np.zeros((10, 10, 3), dtype=np.uint8)
        img[:1, :] = (60, 60, 255)  # shade 1: 10% of pixels
        img[1:2, :] = (0, 0, 120)  # shade 2: 10% of pixels
        mask, report = decode_mask(img, t, tolerance=0)
        assert report.fraction == 0.0
        assert np.count_nonzero(mask.data == 1) == 20  # both shades merged

    def test_chebyshev_tolerance_boundary(self):
        t = small_taxonomy()
        img = np.full((2, 2, 3), (250, 2, 3), dtype=np.uint8)  # distance 5 from (255,0,0)
        mask, report = decode_mask(img, t, tolerance=8)
        assert np.all(mask.data == 0)
        assert report.fraction == 0.0
        mask, report = decode_mask(img, t, tolerance=2)
        assert np.all(mask.data == t.ignore_index)
        assert report.fraction == 1.0
        assert report.top_colours[0] == ((250, 2, 3), 4)

    def test_equidistant_tie_goes_to_lowest_class_id(self):
        t = ClassTaxonomy(
            classes=(
                ClassDef(0, "A", Rank.SPECIES, (10, 0, 0)),
                ClassDef(1, "B", Rank.SPECIES, (0, 0, 0)),
            )
        )
        img = np.full((1, 1, 3), (5, 0, 0), dtype=np.uint8)  # distance 5 to both
        mask, _ = decode_mask(img, t, tolerance=10)
        assert mask.data[0, 0] == 0

    def test_total_on_arbitrary_raster(self):
        t = small_taxonomy()
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(17, 13, 3), dtype=np.uint8)
        mask, report = decode_mask(img, t, tolerance=3)
        mask.validate(t)
        assert 0.0 <= report.fraction <= 1.0


class TestEncodeMask:
    def test_round_trip_identity(self):
        t = small_taxonomy()
        rng = np.random.default_rng(1)
        for _ in range(50):
            data = rng.integers(0, 3, size=(9, 11)).astype(np.uint8)
            data[rng.random(data.shape) < 0.1] = t.ignore_index
            mask = SemanticMask(data=data, ignore_index=t.ignore_index)
            decoded, _ = decode_mask(encode_mask(mask, t), t, tolerance=0)
            assert decoded == mask

    def test_all_ignore_encodes_sentinel(self):
        t = small_taxonomy()
        mask = SemanticMask(np.full((3, 3), 255, dtype=np.uint8))
        raster = encode_mask(mask, t)
        assert np.all(raster == np.array(t.sentinel_colour, dtype=np.uint8))

    def test_checkerboard(self):
        t = small_taxonomy()
        mask = SemanticMask(np.array([[0, 1], [1, 0]], dtype=np.uint8))
        raster = encode_mask(mask, t)
        assert tuple(raster[0, 0]) == (255, 0, 0)
        assert tuple(raster[0, 1]) == (0, 255, 0)
        assert tuple(raster[1, 0]) == (0, 255, 0)
        assert tuple(raster[1, 1]) == (255, 0, 0)

    def test_unknown_id_rejected(self):
        t = small_taxonomy()
        mask = SemanticMask(np.full((2, 2), 7, dtype=np.uint8))
        with pytest.raises(ContractError, match="ids \\[7\\]"):
            encode_mask(mask, t)


class TestMaskPngRoundTrip:
    def test_save_load(self, tmp_path):
        data = np.random.default_rng(2).integers(0, 23, size=(32, 48)).astype(np.uint8)
        mask = SemanticMask(data)
        path = tmp_path / "m.png"
        mask.save_png(path)
        assert SemanticMask.load_png(path) == mask


class TestManifest:
    def _record(self, i=0, **kw):
        defaults = dict(
            id=f"s{i}",
            source=Source.HAND_LABELLED,
            image_path="img.png",
            mask_path="mask.png",
            location=(46.8, -71.2),
            site_name="site-a",
            gsd_cm=0.3,
        )
        defaults.update(kw)
        return SampleRecord(**defaults)

    def test_round_trip(self, tmp_path):
        t = default_taxonomy()
        manifest = DatasetManifest(
            records=[self._record(0), self._record(1, review_status=ReviewStatus.ACCEPTED)],
            taxonomy_hash=t.taxonomy_hash(),
        )
        path = tmp_path / "manifest.jsonl"
        write_manifest(manifest, path)
        loaded = read_manifest(path, t)
        assert [r.id for r in loaded.records] == ["s0", "s1"]
        assert loaded.records[1].review_status is ReviewStatus.ACCEPTED

    def test_stale_hash_fails_loudly(self, tmp_path):
        manifest = DatasetManifest(records=[self._record()], taxonomy_hash="deadbeef")
        path = tmp_path / "manifest.jsonl"
        write_manifest(manifest, path)
        with pytest.raises(ConfigError, match="different taxonomy"):
            read_manifest(path, default_taxonomy())

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ContractError, match="duplicate"):
            DatasetManifest(records=[self._record(0), self._record(0)])

    def test_synthetic_with_location_rejected(self):
        with pytest.raises(ContractError, match="no location"):
            self._record(source=Source.SYNTHETIC)

    def test_nonpositive_gsd_rejected(self):
        with pytest.raises(ContractError, match="gsd"):
            self._record(gsd_cm=0.0)
