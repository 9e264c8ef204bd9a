"""Generation-prompt rendering, batch planning, and zero-shot prompts.

Split-screen prompts are rendered from a fixed template with stochastic
attribute sampling. Each prompt asks for at most five plant species;
species get simple named mask colours assigned by position within the
batch, and subspecies of a gradient-shade class get light/dark variants of
the same base colour. The plan index records the resulting batch palette
so generated masks can be decoded back to canonical class ids.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ContractError
from .taxonomy import RGB, ClassDef, ClassTaxonomy, SemanticMask

MAX_SPECIES_PER_PROMPT = 5

TEMPLATE = """### SCENE DESCRIPTION ###
Split-screen image of 4K resolution, 2:1 aspect ratio.
Left side is a photorealistic high-resolution nadir drone photography flying at a very low altitude of 2 meters of a forest regeneration zone taken with a camera with a focal length of 50 mm. The view is strictly top-down, not oblique. The ground cover is typical of a Quebec forest that was <DISTURBANCE_EVENTS>, <DISTURBANCE_YEARS>.
It contains <PLANT_CLASSES>. <GLOBAL_DENSITY_DESCRIPTION>.
Fine details such as leaf shapes, veins and small branches are clearly visible. The drone flies low enough to resolve individual leaves with high spatial precision.
<OTHER_CLASSES>. <GROUND_TEXTURES>. <PLANT_STRESS>. <LEAF_VARIATION>. <FLOWER_DETAILS>
<SEASON_DESCRIPTION>, <DRYNESS_DESCRIPTION>, <RECENT_RAIN_TIMING>. <LIGHT_DESCRIPTION>

### VISUAL CONSTRAINTS ###
Photorealistic rendering. Natural colors. No artificial patterns. No repetition artifacts. High-frequency details consistent with real vegetation. No stylization.

### SEGMENTATION MASK ###
The right side shows the exact pixel-aligned semantic segmentation mask of the left image. Each pixel belongs to exactly one class. All objects visible in the left image must appear in the mask with no omissions. The mask uses flat solid colours only, with no shading, gradients, transparency or texture. Boundaries between classes are sharp and perfectly defined. This mask is to be used to train a deep neural network for semantic segmentation with <PLANT_CLASSES_MASK_COLORS>, <OTHER_CLASSES_MASK_COLORS>.
"""

ZERO_SHOT_HEADER = (
    "Attached is a top view 1024x1024 pixels image taken in a forest regeneration "
    "zones in the Quebec province.\n"
    "Create a semantic segmentation mask of the image, with the following classes. "
    "Next to each class is the color of the corresponding mask. Make sure the mask "
    "is a square, the same size as the image.\n"
)

ZERO_SHOT_MASK_HINT = (
    "\nAttached is also a preliminary segmentation mask of the same image produced "
    "by an automated labeller. Use it as a hint for which classes are present and "
    "their rough layout; the final mask must follow the image, not the hint.\n"
)

# Mapping from attribute variable to template placeholder.
VARIABLE_PLACEHOLDERS = {
    "disturbance_event": "<DISTURBANCE_EVENTS>",
    "disturbance_years": "<DISTURBANCE_YEARS>",
    "global_density": "<GLOBAL_DENSITY_DESCRIPTION>",
    "other_classes": "<OTHER_CLASSES>",
    "ground_textures": "<GROUND_TEXTURES>",
    "plant_stress": "<PLANT_STRESS>",
    "leaf_variation": "<LEAF_VARIATION>",
    "flower_details": "<FLOWER_DETAILS>",
    "season": "<SEASON_DESCRIPTION>",
    "dryness": "<DRYNESS_DESCRIPTION>",
    "recent_rain": "<RECENT_RAIN_TIMING>",
    "light": "<LIGHT_DESCRIPTION>",
}
VARIABLES = tuple(VARIABLE_PLACEHOLDERS)

# Abundance wording observed in the worked examples; one is sampled per species.
ABUNDANCE_PHRASES = (
    "distributed patches of",
    "small patches of",
    "noticeable patches of",
    "mixed clusters of",
    "several",
    "some",
    "a few",
    "a large number of",
)

# Named mask colours handed to species by position within the batch.
PROMPT_COLOURS: tuple[tuple[str, RGB], ...] = (
    ("red", (255, 0, 0)),
    ("cyan", (0, 255, 255)),
    ("blue", (0, 0, 255)),
    ("yellow", (255, 255, 0)),
    ("magenta", (255, 0, 255)),
)

# Fixed colours for the non-plant extras mentioned by the other_classes text.
# Listing order is fixed; the display name is what the prompt prints.
OTHER_CLASS_COLOURS: tuple[tuple[str, str, str, RGB], ...] = (
    # (taxonomy name, display name, colour name, rgb)
    ("Moss", "Moss", "green", (0, 255, 0)),
    ("Wood", "Wood", "purple", (128, 0, 128)),
    ("Boulder", "Boulders", "grey", (128, 128, 128)),
)

_SHADE_PREFIXES = ("light", "dark", "pale", "deep")


def shade_rgb(base: RGB, prefix: str) -> RGB:
    """Deterministic light/dark variants of a base colour for subspecies lines."""
    r, g, b = base
    mixes = {"light": (255, 0.5), "pale": (255, 0.75), "dark": (0, 0.5), "deep": (0, 0.75)}
    target, weight = mixes[prefix]
    return tuple(int(round(c + (target - c) * weight)) for c in (r, g, b))


@dataclass(frozen=True)
class AttributeSpace:
    """Value lists for every prompt variable."""

    values: dict[str, tuple[str, ...]]

    def __post_init__(self):
        missing = [v for v in VARIABLES if v not in self.values]
        if missing:
            raise ConfigError(f"attribute space missing variables: {missing}")
        for var, vals in self.values.items():
            if var not in VARIABLES:
                raise ConfigError(f"unknown attribute variable {var!r}")
            if not vals or any(not str(v).strip() for v in vals):
                raise ConfigError(f"attribute variable {var!r} needs non-empty values")


def load_attribute_space(path: str | Path) -> AttributeSpace:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"attribute space config not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping of variable -> value list")
    return AttributeSpace(
        values={str(k): tuple(str(v) for v in vals) for k, vals in doc.items()}
    )


def default_attribute_space() -> AttributeSpace:
    with resources.as_file(
        resources.files("regenforge.data") / "attribute_space_default.yaml"
    ) as p:
        return load_attribute_space(p)


@dataclass(frozen=True)
class AttributeAssignment:
    values: dict[str, str]
    species_subset: tuple[tuple[ClassDef, str], ...]  # (class, abundance phrase)
    rng_seed: int

    def __post_init__(self):
        if not 1 <= len(self.species_subset) <= MAX_SPECIES_PER_PROMPT:
            raise ContractError(
                f"species subset must hold 1..{MAX_SPECIES_PER_PROMPT} species, "
                f"got {len(self.species_subset)}"
            )
        missing = [v for v in VARIABLES if v not in self.values]
        if missing:
            raise ContractError(f"assignment missing variables: {missing}")


@dataclass(frozen=True)
class PromptColour:
    label: str
    colour_name: str | None
    rgb: RGB
    class_id: int


@dataclass(frozen=True)
class PromptText:
    text: str
    assignment: AttributeAssignment | None
    palette_fragment: tuple[PromptColour, ...]
    attach_mask: bool = False


@dataclass(frozen=True)
class PlanBatch:
    species_subset: tuple[ClassDef, ...]
    batch_size: int
    assignments: tuple[AttributeAssignment, ...]

    def __post_init__(self):
        if not 1 <= len(self.species_subset) <= MAX_SPECIES_PER_PROMPT:
            raise ContractError("batch species subset out of the 1..5 range")


@dataclass(frozen=True)
class GenerationPlan:
    batches: tuple[PlanBatch, ...]
    batch_bounds: tuple[int, int] = (50, 100)

    def total_images(self) -> int:
        return sum(b.batch_size for b in self.batches)


def sample_assignment(
    space: AttributeSpace, species_pool: list[ClassDef], seed: int
) -> AttributeAssignment:
    """Deterministic assignment draw: subset size uniform in 1..5 (capped by
    the pool), species uniform without replacement, each variable uniform."""
    if not species_pool:
        raise ContractError("species pool is empty")
    pool = sorted(species_pool, key=lambda c: c.id)
    rng = random.Random(seed)
    size = rng.randint(1, min(MAX_SPECIES_PER_PROMPT, len(pool)))
    species = rng.sample(pool, size)
    subset = tuple((cls, rng.choice(ABUNDANCE_PHRASES)) for cls in species)
    values = {var: rng.choice(space.values[var]) for var in VARIABLES}
    return AttributeAssignment(values=values, species_subset=subset, rng_seed=seed)


def _assignment_for_subset(
    space: AttributeSpace, subset: tuple[ClassDef, ...], seed: int
) -> AttributeAssignment:
    rng = random.Random(seed)
    pairs = tuple((cls, rng.choice(ABUNDANCE_PHRASES)) for cls in subset)
    values = {var: rng.choice(space.values[var]) for var in VARIABLES}
    return AttributeAssignment(values=values, species_subset=pairs, rng_seed=seed)


def _join_species(subset: tuple[tuple[ClassDef, str], ...]) -> str:
    parts = [f"{phrase} {cls.prompt_label}" for cls, phrase in subset]
    if len(parts) == 1:
        joined = parts[0]
    elif len(parts) == 2:
        joined = f"{parts[0]} and {parts[1]}"
    else:
        joined = ", ".join(parts[:-1]) + f", and {parts[-1]}"
    return joined[0].upper() + joined[1:]


def _other_classes_in(text: str, taxonomy: ClassTaxonomy) -> list[PromptColour]:
    lowered = text.lower()
    out = []
    for tax_name, display, colour_name, rgb in OTHER_CLASS_COLOURS:
        keyword = tax_name.lower()
        if keyword in lowered:
            try:
                cls = taxonomy.by_name(tax_name)
            except KeyError:
                raise ContractError(
                    f"other-classes text names {tax_name!r}, absent from the taxonomy"
                ) from None
            out.append(PromptColour(display, colour_name, rgb, cls.id))
    return out


def _species_colours(subset: tuple[tuple[ClassDef, str], ...]) -> list[PromptColour]:
    if len(subset) > len(PROMPT_COLOURS):
        raise ContractError("more species than available prompt colours")
    lines = []
    for (cls, _), (base_name, base_rgb) in zip(subset, PROMPT_COLOURS):
        if cls.gradient_shades:
            if len(cls.gradient_shades) > len(_SHADE_PREFIXES):
                raise ContractError(
                    f"class {cls.name!r} has more shades than shade names available"
                )
            lines.append(PromptColour(cls.prompt_label, base_name, base_rgb, cls.id))
            labels = cls.shade_labels or tuple(
                f"{cls.prompt_label} variant {i + 1}" for i in range(len(cls.gradient_shades))
            )
            for i, label in enumerate(labels):
                prefix = _SHADE_PREFIXES[i]
                lines.append(
                    PromptColour(label, f"{prefix} {base_name}", shade_rgb(base_rgb, prefix), cls.id)
                )
        else:
            lines.append(PromptColour(cls.prompt_label, base_name, base_rgb, cls.id))
    return lines


def render_prompt(assignment: AttributeAssignment, taxonomy: ClassTaxonomy) -> PromptText:
    """Render the split-screen generation prompt for one assignment."""
    for cls, _ in assignment.species_subset:
        if cls.id >= taxonomy.n_classes or taxonomy.classes[cls.id].name != cls.name:
            raise ContractError(f"species {cls.name!r} is not part of the taxonomy")

    plant_colours = _species_colours(assignment.species_subset)
    other_colours = _other_classes_in(assignment.values["other_classes"], taxonomy)

    text = TEMPLATE
    text = text.replace("<PLANT_CLASSES>", _join_species(assignment.species_subset))
    plant_fragment = ", ".join(f"{c.label} : {c.colour_name}" for c in plant_colours)
    text = text.replace("<PLANT_CLASSES_MASK_COLORS>", plant_fragment)
    if other_colours:
        other_fragment = ", ".join(f"{c.label} : {c.colour_name}" for c in other_colours)
        text = text.replace("<OTHER_CLASSES_MASK_COLORS>", other_fragment)
    else:
        text = text.replace(", <OTHER_CLASSES_MASK_COLORS>", "")
    for var, placeholder in VARIABLE_PLACEHOLDERS.items():
        text = text.replace(placeholder, assignment.values[var])

    if "<" in text:
        raise RuntimeError(
            f"unresolved placeholder left in rendered prompt: "
            f"{text[text.index('<'):text.index('<') + 40]!r}"
        )
    return PromptText(
        text=text,
        assignment=assignment,
        palette_fragment=tuple(plant_colours + other_colours),
    )


def assignment_palette(
    assignment_or_prompt: AttributeAssignment | PromptText, taxonomy: ClassTaxonomy
) -> tuple[ClassTaxonomy, dict[int, int]]:
    """Batch-local taxonomy for decoding this prompt's generated mask.

    Returns (batch taxonomy, batch id -> canonical id). Classes carry the
    prompt's named colours; gradient-shade species keep their shade RGBs as
    decode shades.
    """
    if isinstance(assignment_or_prompt, PromptText):
        prompt = assignment_or_prompt
        if prompt.assignment is None:
            raise ContractError("prompt has no assignment; cannot derive a batch palette")
    else:
        prompt = render_prompt(assignment_or_prompt, taxonomy)

    per_class: dict[int, list[PromptColour]] = {}
    for colour in prompt.palette_fragment:
        per_class.setdefault(colour.class_id, []).append(colour)

    classes = []
    remap = {}
    for batch_id, (canonical_id, colours) in enumerate(sorted(per_class.items())):
        base = taxonomy.classes[canonical_id]
        primary, *shades = colours
        classes.append(
            ClassDef(
                id=batch_id,
                name=base.name,
                rank=base.rank,
                colour=primary.rgb,
                gradient_shades=tuple(s.rgb for s in shades),
                shade_labels=tuple(s.label for s in shades),
                scientific_name=base.scientific_name,
            )
        )
        remap[batch_id] = canonical_id
    return ClassTaxonomy(classes=tuple(classes), ignore_index=taxonomy.ignore_index), remap


def plan_generation(
    quotas: dict[str, int],
    taxonomy: ClassTaxonomy,
    space: AttributeSpace,
    batch_bounds: tuple[int, int] = (50, 100),
    seed: int = 0,
) -> GenerationPlan:
    """Greedy batch planner: co-group the neediest classes until quotas are met.

    Batches use a fixed species subset (every assignment in the batch
    contains the full subset), sized to the largest remaining quota clamped
    to the bounds. Greedy by largest remaining quota; not claimed optimal.
    """
    low, high = batch_bounds
    if not 1 <= low <= high:
        raise ContractError(f"bad batch bounds {batch_bounds}")
    remaining: dict[int, int] = {}
    for name, quota in quotas.items():
        try:
            cls = taxonomy.by_name(name)
        except KeyError:
            raise ContractError(f"quota for unknown class {name!r}") from None
        if quota < 0:
            raise ContractError(f"negative quota for class {name!r}")
        if not cls.rank.is_plant:
            raise ContractError(
                f"quota for non-plant class {name!r}; the planner subsets plant species "
                "(non-plant content is driven by the other_classes variable)"
            )
        if quota > 0:
            remaining[cls.id] = quota

    master = random.Random(seed)
    batches = []
    while remaining:
        ordered = sorted(remaining.items(), key=lambda kv: (-kv[1], kv[0]))
        subset_ids = [cid for cid, _ in ordered[:MAX_SPECIES_PER_PROMPT]]
        subset = tuple(taxonomy.classes[cid] for cid in subset_ids)
        size = max(low, min(high, ordered[0][1]))
        assignments = tuple(
            _assignment_for_subset(space, subset, master.randrange(2**32))
            for _ in range(size)
        )
        batches.append(PlanBatch(species_subset=subset, batch_size=size, assignments=assignments))
        for cid in subset_ids:
            left = remaining[cid] - size
            if left > 0:
                remaining[cid] = left
            else:
                del remaining[cid]
    return GenerationPlan(batches=tuple(batches), batch_bounds=batch_bounds)


def write_plan(plan: GenerationPlan, taxonomy: ClassTaxonomy, out_dir: str | Path) -> Path:
    """One prompt file per assignment plus a JSON Lines plan index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / "plan_index.jsonl"
    with index_path.open("w", encoding="utf-8") as index:
        for b, batch in enumerate(plan.batches):
            for i, assignment in enumerate(batch.assignments):
                prompt = render_prompt(assignment, taxonomy)
                fname = f"prompt_b{b:03d}_{i:04d}.txt"
                (out_dir / fname).write_text(prompt.text, encoding="utf-8")
                entry = {
                    "prompt_file": fname,
                    "batch": b,
                    "seed": assignment.rng_seed,
                    "values": assignment.values,
                    "species": [
                        {"name": cls.name, "phrase": phrase}
                        for cls, phrase in assignment.species_subset
                    ],
                    "palette": [
                        {
                            "label": c.label,
                            "colour_name": c.colour_name,
                            "rgb": list(c.rgb),
                            "class_id": c.class_id,
                        }
                        for c in prompt.palette_fragment
                    ],
                    "expected_classes": sorted({c.class_id for c in prompt.palette_fragment}),
                }
                index.write(json.dumps(entry) + "\n")
    return index_path


def classes_in_mask(mask: SemanticMask, taxonomy: ClassTaxonomy) -> list[ClassDef]:
    ids = [int(i) for i in np.unique(mask.data) if int(i) != taxonomy.ignore_index]
    return [taxonomy.classes[i] for i in ids if i < taxonomy.n_classes]


def build_zero_shot_prompt(
    taxonomy: ClassTaxonomy,
    classes: list[ClassDef] | None = None,
    attach_pseudo_label: bool = False,
) -> PromptText:
    """Zero-shot segmentation prompt: class/colour listing over the palette.

    ``classes=None`` lists the full taxonomy; otherwise only the listed
    classes, in taxonomy order. With ``attach_pseudo_label`` the text
    references an attached hint mask and the caller must attach one.
    """
    if classes is None:
        chosen = list(taxonomy.classes)
    else:
        if not classes:
            raise ContractError("listed class set is empty")
        ids = set()
        for cls in classes:
            if cls.id >= taxonomy.n_classes or taxonomy.classes[cls.id].name != cls.name:
                raise ContractError(f"class {cls.name!r} is not part of the taxonomy")
            ids.add(cls.id)
        chosen = [c for c in taxonomy.classes if c.id in ids]

    lines = [f"{c.name}: ({c.colour[0]}, {c.colour[1]}, {c.colour[2]})" for c in chosen]
    text = ZERO_SHOT_HEADER + "\n".join(lines) + "\n"
    if attach_pseudo_label:
        text += ZERO_SHOT_MASK_HINT
    palette = tuple(PromptColour(c.name, None, c.colour, c.id) for c in chosen)
    return PromptText(
        text=text, assignment=None, palette_fragment=palette, attach_mask=attach_pseudo_label
    )
