import numpy as np
import pytest

from regenforge.errors import ContractError
from regenforge.promptgen import (
    ABUNDANCE_PHRASES,
    AttributeAssignment,
    assignment_palette,
    build_zero_shot_prompt,
    classes_in_mask,
    default_attribute_space,
    plan_generation,
    render_prompt,
    sample_assignment,
)
from regenforge.taxonomy import SemanticMask, decode_mask, default_taxonomy

TAX = default_taxonomy()
SPACE = default_attribute_space()
PLANTS = [c for c in TAX.classes if c.rank.is_plant]


def fig_c1_assignment():
    values = {
        "disturbance_event": "Harvested",
        "disturbance_years": "3 years ago",
        "global_density": "Very dense overlapping vegetation with almost no visible ground",
        "other_classes": "Moss covers parts of the ground with green to yellow-green tones",
        "ground_textures": "Uneven terrain with micro-relief variations",
        "plant_stress": "Slightly wilted leaves",
        "leaf_variation": "Some noticeably larger leaves among smaller ones",
        "flower_details": "A few small flowers are visible among the vegetation.",
        "season": "Mid-summer",
        "dryness": "Very dry",
        "recent_rain": "No recent rain",
        "light": "Very sunny morning light.",
    }
    subset = (
        (TAX.by_name("Fir"), "distributed patches of"),
        (TAX.by_name("Red Maple"), "small patches of"),
        (TAX.by_name("Willowherb"), "small patches of"),
        (TAX.by_name("Sheep Laurel"), "several"),
    )
    return AttributeAssignment(values=values, species_subset=subset, rng_seed=0)


class TestSampleAssignment:
    def test_deterministic(self):
        a = sample_assignment(SPACE, PLANTS, seed=42)
        b = sample_assignment(SPACE, PLANTS, seed=42)
        assert a == b

    def test_pool_caps_subset_size(self):
        pool = PLANTS[:3]
        for seed in range(50):
            a = sample_assignment(SPACE, pool, seed)
            assert 1 <= len(a.species_subset) <= 3

    def test_never_more_than_five_species(self):
        for seed in range(200):
            a = sample_assignment(SPACE, PLANTS, seed)
            assert len(a.species_subset) <= 5

    def test_variable_frequencies_uniform(self):
        # disturbance_years has 4 values; check each lands within 3 sigma.
        n = 10_000
        counts: dict[str, int] = {}
        for seed in range(n):
            a = sample_assignment(SPACE, PLANTS, seed)
            v = a.values["disturbance_years"]
            counts[v] = counts.get(v, 0) + 1
        p = 1 / 4
        sigma = (n * p * (1 - p)) ** 0.5
        for value in SPACE.values["disturbance_years"]:
            assert abs(counts.get(value, 0) - n * p) <= 3 * sigma

    def test_empty_pool_rejected(self):
        with pytest.raises(ContractError):
            sample_assignment(SPACE, [], 0)


class TestRenderPrompt:
    def test_worked_example_values_verbatim(self):
        prompt = render_prompt(fig_c1_assignment(), TAX)
        expected = [
            "Harvested",
            "3 years ago",
            "Distributed patches of Abies, small patches of Acer rubrum, "
            "small patches of Epilobium, and several Kalmia angustifolia",
            "Very dense overlapping vegetation with almost no visible ground",
            "Moss covers parts of the ground with green to yellow-green tones.",
            "Uneven terrain with micro-relief variations",
            "Slightly wilted leaves",
            "Some noticeably larger leaves among smaller ones",
            "A few small flowers are visible among the vegetation.",
            "Mid-summer",
            "Very dry",
            "No recent rain",
            "Very sunny morning light.",
            "Abies : red, Acer rubrum : cyan, Epilobium : blue, Kalmia angustifolia : yellow",
            "Moss : green",
        ]
        for fragment in expected:
            assert fragment in prompt.text, fragment
        assert "<" not in prompt.text

    def test_zero_other_classes_lists_only_plants(self):
        a = fig_c1_assignment()
        values = dict(a.values)
        values["other_classes"] = "Bare soil shows between the plants"
        prompt = render_prompt(
            AttributeAssignment(values=values, species_subset=a.species_subset, rng_seed=0),
            TAX,
        )
        assert "Kalmia angustifolia : yellow." in prompt.text
        assert "green" not in prompt.text.split("### SEGMENTATION MASK ###")[1]
        assert len(prompt.palette_fragment) == 4

    def test_three_shade_group_renders_three_lines(self):
        blueberry = TAX.by_name("Lowbush Blueberry")
        a = fig_c1_assignment()
        values = dict(a.values)
        values["other_classes"] = "Bare soil shows between the plants"
        prompt = render_prompt(
            AttributeAssignment(
                values=values, species_subset=((blueberry, "several"),), rng_seed=0
            ),
            TAX,
        )
        mask_section = prompt.text.split("### SEGMENTATION MASK ###")[1]
        assert "Vaccinium angustifolium : red" in mask_section
        assert "Vaccinium myrtilloides : light red" in mask_section
        assert "Vaccinium boreale : dark red" in mask_section
        assert len(prompt.palette_fragment) == 3
        assert {c.class_id for c in prompt.palette_fragment} == {blueberry.id}

    def test_shade_colours_decode_to_one_class(self):
        blueberry = TAX.by_name("Lowbush Blueberry")
        values = dict(fig_c1_assignment().values)
        values["other_classes"] = "Bare soil shows between the plants"
        a = AttributeAssignment(
            values=values,
            species_subset=((blueberry, "several"),),
            rng_seed=0,
        )
        prompt = render_prompt(a, TAX)
        batch_tax, remap = assignment_palette(prompt, TAX)
        raster = np.zeros((3, len(prompt.palette_fragment), 3), dtype=np.uint8)
        for i, colour in enumerate(prompt.palette_fragment):
            raster[:, i] = colour.rgb
        mask, report = decode_mask(raster, batch_tax, tolerance=0)
        assert report.fraction == 0.0
        canonical = {remap[int(b)] for b in np.unique(mask.data)}
        assert canonical == {blueberry.id}

    def test_rendering_is_pure(self):
        a = fig_c1_assignment()
        assert render_prompt(a, TAX).text == render_prompt(a, TAX).text

    def test_unknown_species_rejected(self):
        from regenforge.taxonomy import ClassDef, Rank

        rogue = ClassDef(99, "Rogue", Rank.SPECIES, (9, 9, 9))
        a = fig_c1_assignment()
        with pytest.raises(ContractError, match="not part of the taxonomy"):
            render_prompt(
                AttributeAssignment(
                    values=a.values, species_subset=((rogue, "some"),), rng_seed=0
                ),
                TAX,
            )

    def test_every_colour_in_batch_palette(self):
        for seed in range(30):
            a = sample_assignment(SPACE, PLANTS, seed)
            prompt = render_prompt(a, TAX)
            batch_tax, _ = assignment_palette(prompt, TAX)
            palette = {col for col, _ in batch_tax.palette_entries()}
            for colour in prompt.palette_fragment:
                assert colour.rgb in palette


class TestPlanGeneration:
    def test_zero_quotas_empty_plan(self):
        plan = plan_generation({"Fir": 0, "Pine": 0}, TAX, SPACE)
        assert plan.batches == ()
        assert plan.total_images() == 0

    def test_single_class_quota_sixty(self):
        plan = plan_generation({"Pine": 60}, TAX, SPACE, seed=1)
        assert len(plan.batches) == 1
        batch = plan.batches[0]
        assert batch.batch_size == 60
        assert [c.name for c in batch.species_subset] == ["Pine"]
        for a in batch.assignments:
            assert [c.name for c, _ in a.species_subset] == ["Pine"]

    def test_six_classes_force_multiple_batches(self):
        quotas = {c.name: 50 for c in PLANTS[:6]}
        plan = plan_generation(quotas, TAX, SPACE)
        assert len(plan.batches) >= 2
        for batch in plan.batches:
            assert len(batch.species_subset) <= 5

    def test_batch_sizes_within_bounds(self):
        quotas = {"Fir": 230, "Pine": 17, "Moss": 0}
        # Moss is a division (plant), quota 0 so it never forces a batch.
        plan = plan_generation(quotas, TAX, SPACE)
        for batch in plan.batches:
            assert 50 <= batch.batch_size <= 100
        appearances: dict[str, int] = {}
        for batch in plan.batches:
            for cls in batch.species_subset:
                appearances[cls.name] = appearances.get(cls.name, 0) + batch.batch_size
        assert appearances["Fir"] >= 230
        assert appearances["Pine"] >= 17

    def test_unknown_class_rejected(self):
        with pytest.raises(ContractError, match="unknown class"):
            plan_generation({"Dragonfruit": 10}, TAX, SPACE)

    def test_non_plant_quota_rejected(self):
        with pytest.raises(ContractError, match="non-plant"):
            plan_generation({"Boulder": 10}, TAX, SPACE)

    def test_planner_never_exceeds_five_species(self):
        import random

        rng = random.Random(0)
        names = [c.name for c in PLANTS]
        total_assignments = 0
        while total_assignments < 10_000:
            quotas = {name: rng.randint(0, 120) for name in rng.sample(names, rng.randint(1, 12))}
            plan = plan_generation(quotas, TAX, SPACE, seed=rng.randint(0, 999))
            for batch in plan.batches:
                assert len(batch.species_subset) <= 5
                for a in batch.assignments:
                    assert len(a.species_subset) <= 5
                total_assignments += len(batch.assignments)

    def test_deterministic_given_seed(self):
        quotas = {"Fir": 70, "Pine": 55}
        a = plan_generation(quotas, TAX, SPACE, seed=9)
        b = plan_generation(quotas, TAX, SPACE, seed=9)
        assert a == b


class TestZeroShotPrompt:
    def test_full_listing_matches_published_palette(self):
        prompt = build_zero_shot_prompt(TAX)
        lines = [l for l in prompt.text.splitlines() if ": (" in l]
        assert len(lines) == 23
        assert lines[0] == "American Mountain-Ash: (255, 0, 0)"
        assert "Canada Yew: (255, 255, 0)" in lines
        assert lines[-1] == "Yellow Birch: (128, 255, 255)"

    def test_single_listed_class(self):
        prompt = build_zero_shot_prompt(TAX, [TAX.by_name("Fern")])
        lines = [l for l in prompt.text.splitlines() if ": (" in l]
        assert lines == ["Fern: (255, 0, 255)"]

    def test_classes_from_mask(self):
        data = np.zeros((6, 6), dtype=np.uint8)
        data[:2] = 5
        data[2:4] = 12
        data[4:] = 21
        mask = SemanticMask(data)
        classes = classes_in_mask(mask, TAX)
        prompt = build_zero_shot_prompt(TAX, classes)
        lines = [l for l in prompt.text.splitlines() if ": (" in l]
        assert len(lines) == 3

    def test_attach_pseudo_label_flag(self):
        prompt = build_zero_shot_prompt(TAX, attach_pseudo_label=True)
        assert prompt.attach_mask
        assert "Attached is also" in prompt.text

    def test_empty_listed_set_rejected(self):
        with pytest.raises(ContractError, match="empty"):
            build_zero_shot_prompt(TAX, [])


class TestAttributeSpace:
    def test_default_space_has_all_variables(self):
        from regenforge.promptgen import VARIABLES

        assert set(SPACE.values) == set(VARIABLES)

    def test_abundance_phrases_cover_worked_examples(self):
        for phrase in ("distributed patches of", "several", "a large number of"):
            assert phrase in ABUNDANCE_PHRASES
