"""Class schema, mask palette, and RGB <-> class-id mask conversion.

The taxonomy is the contract every mask in the pipeline is validated
against: an ordered list of classes, each with a unique primary colour and
optional gradient shades (extra colours that decode back to the same
class), plus a reserved ignore index.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from .errors import ConfigError, ContractError

RGB = tuple[int, int, int]

# Sentinel candidates for encoding ignore_index pixels; the first one not
# already used by the palette wins.
_SENTINEL_CANDIDATES = [(255, 255, 255), (1, 1, 1), (254, 254, 254), (2, 2, 2)]


class Rank(str, Enum):
    DIVISION = "division"
    CLASS = "class"
    FAMILY = "family"
    GENUS = "genus"
    SPECIES = "species"
    NON_PLANT = "non-plant"

    @property
    def is_plant(self) -> bool:
        return self is not Rank.NON_PLANT


@dataclass(frozen=True)
class ClassDef:
    """One semantic class: id, display name, taxonomic rank, palette colours.

    ``gradient_shades`` are additional colours that map to this class on
    decode (one per prompted subspecies); ``shade_labels`` name them for
    prompt rendering. ``scientific_name`` is the label used inside
    generation prompts when present.
    """

    id: int
    name: str
    rank: Rank
    colour: RGB
    gradient_shades: tuple[RGB, ...] = ()
    shade_labels: tuple[str, ...] = ()
    scientific_name: str | None = None

    def __post_init__(self):
        _check_rgb(self.colour, f"class {self.name!r}")
        for shade in self.gradient_shades:
            _check_rgb(shade, f"shade of class {self.name!r}")
        if self.shade_labels and len(self.shade_labels) != len(self.gradient_shades):
            raise ConfigError(
                f"class {self.name!r}: {len(self.shade_labels)} shade labels "
                f"for {len(self.gradient_shades)} gradient shades"
            )

    @property
    def prompt_label(self) -> str:
        return self.scientific_name or self.name

    @property
    def all_colours(self) -> tuple[RGB, ...]:
        return (self.colour,) + self.gradient_shades


def _check_rgb(value, where: str) -> None:
    if len(value) != 3 or any(not (0 <= int(c) <= 255) for c in value):
        raise ConfigError(f"{where}: colour {value!r} is not an RGB triple in 0..255")


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered class list plus the reserved ignore index."""

    classes: tuple[ClassDef, ...]
    ignore_index: int = 255

    def __post_init__(self):
        if not self.classes:
            raise ConfigError("taxonomy has no classes")
        for i, c in enumerate(self.classes):
            if c.id != i:
                raise ConfigError(
                    f"class ids must be contiguous from 0; class {c.name!r} has id "
                    f"{c.id} at position {i}"
                )
        if any(c.id == self.ignore_index for c in self.classes):
            raise ConfigError(f"ignore_index {self.ignore_index} collides with a class id")
        seen: dict[RGB, str] = {}
        for c in self.classes:
            for colour, kind in [(c.colour, "colour")] + [
                (s, "shade") for s in c.gradient_shades
            ]:
                key = tuple(int(v) for v in colour)
                if key in seen:
                    raise ConfigError(
                        f"duplicate colour {key}: used by {seen[key]} and by "
                        f"{kind} of class {c.name!r}"
                    )
                seen[key] = f"{kind} of class {c.name!r}"
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ConfigError("class names are not unique")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def palette_size(self) -> int:
        return sum(1 + len(c.gradient_shades) for c in self.classes)

    def palette_entries(self) -> list[tuple[RGB, int]]:
        """All (colour, class id) pairs, primaries and shades, ordered by class id."""
        entries = []
        for c in self.classes:
            for colour in c.all_colours:
                entries.append((colour, c.id))
        return entries

    def by_name(self, name: str) -> ClassDef:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def sentinel_colour(self) -> RGB:
        """Colour used to encode ignore_index pixels; never a palette entry."""
        used = {tuple(col) for col, _ in self.palette_entries()}
        for cand in _SENTINEL_CANDIDATES:
            if cand not in used:
                return cand
        for g in range(256):  # palette cannot exhaust all greys
            if (g, g, g) not in used:
                return (g, g, g)
        raise ConfigError("no free sentinel colour")

    def taxonomy_hash(self) -> str:
        """Digest binding manifests and caches to this taxonomy version."""
        canon = [
            {
                "id": c.id,
                "name": c.name,
                "rank": c.rank.value,
                "colour": list(c.colour),
                "shades": [list(s) for s in c.gradient_shades],
            }
            for c in self.classes
        ]
        blob = json.dumps({"ignore": self.ignore_index, "classes": canon}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _class_entry_lines(path: Path) -> list[int]:
    """Start line (1-based) of each entry under the top-level ``classes`` list."""
    try:
        root = yaml.compose(path.read_text())
    except yaml.YAMLError:
        return []
    if root is None or not isinstance(root, yaml.MappingNode):
        return []
    for key_node, value_node in root.value:
        if key_node.value == "classes" and isinstance(value_node, yaml.SequenceNode):
            return [item.start_mark.line + 1 for item in value_node.value]
    return []


def load_taxonomy(path: str | Path) -> ClassTaxonomy:
    """Load a taxonomy config (YAML: ignore_index + ordered class list)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"taxonomy config not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from e
    if not isinstance(doc, dict) or "classes" not in doc:
        raise ConfigError(f"{path}: expected a mapping with a 'classes' list")
    lines = _class_entry_lines(path)

    classes = []
    for i, entry in enumerate(doc["classes"]):
        where = f"{path}, class entry {i}"
        if i < len(lines):
            where += f" (line {lines[i]})"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected a mapping")
        for required in ("name", "rank", "colour"):
            if required not in entry:
                raise ConfigError(f"{where}: missing field {required!r}")
        try:
            rank = Rank(entry["rank"])
        except ValueError:
            raise ConfigError(
                f"{where}: unknown rank {entry['rank']!r} "
                f"(expected one of {[r.value for r in Rank]})"
            ) from None
        shades, labels = [], []
        for shade in entry.get("gradient_shades") or []:
            if isinstance(shade, dict):
                if "colour" not in shade:
                    raise ConfigError(f"{where}: gradient shade missing 'colour'")
                shades.append(tuple(int(v) for v in shade["colour"]))
                labels.append(str(shade.get("label", f"{entry['name']} shade {len(shades)}")))
            else:
                shades.append(tuple(int(v) for v in shade))
                labels.append(f"{entry['name']} shade {len(shades)}")
        classes.append(
            ClassDef(
                id=i,
                name=str(entry["name"]),
                rank=rank,
                colour=tuple(int(v) for v in entry["colour"]),
                gradient_shades=tuple(shades),
                shade_labels=tuple(labels),
                scientific_name=entry.get("scientific_name"),
            )
        )
    return ClassTaxonomy(classes=tuple(classes), ignore_index=int(doc.get("ignore_index", 255)))


def default_taxonomy() -> ClassTaxonomy:
    """The shipped 23-class taxonomy (20 plant + 3 non-plant classes)."""
    with resources.as_file(resources.files("regenforge.data") / "taxonomy_default.yaml") as p:
        return load_taxonomy(p)


@dataclass(frozen=True)
class SemanticMask:
    """Dense per-pixel class-id grid; cells hold a class id or the ignore value."""

    data: np.ndarray = field(repr=False)
    ignore_index: int = 255

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ContractError(f"mask must be a 2-D grid, got shape {arr.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr, dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def validate(self, taxonomy: ClassTaxonomy) -> None:
        ids = np.unique(self.data)
        valid = set(range(taxonomy.n_classes)) | {taxonomy.ignore_index}
        bad = [int(i) for i in ids if int(i) not in valid]
        if bad:
            raise ContractError(f"mask contains ids {bad} not in the taxonomy")
        if self.ignore_index != taxonomy.ignore_index:
            raise ContractError(
                f"mask ignore_index {self.ignore_index} != taxonomy "
                f"ignore_index {taxonomy.ignore_index}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticMask):
            return NotImplemented
        return self.ignore_index == other.ignore_index and np.array_equal(
            self.data, other.data
        )

    def save_png(self, path: str | Path) -> None:
        Image.fromarray(self.data, mode="L").save(path, format="PNG")

    @classmethod
    def load_png(cls, path: str | Path, ignore_index: int = 255) -> "SemanticMask":
        img = Image.open(path)
        if img.mode != "L":
            raise ContractError(f"{path}: expected 8-bit greyscale mask, got mode {img.mode}")
        return cls(data=np.asarray(img), ignore_index=ignore_index)


@dataclass(frozen=True)
class UnmappedReport:
    """Pixels decode_mask could not assign to any palette colour."""

    count: int
    fraction: float
    top_colours: tuple[tuple[RGB, int], ...] = ()


def decode_mask(
    image: np.ndarray,
    taxonomy: ClassTaxonomy,
    tolerance: int = 0,
) -> tuple[SemanticMask, UnmappedReport]:
    """Map an RGB raster to class ids by nearest palette colour.

    Distance is Chebyshev (max per-channel difference). A pixel maps to the
    nearest primary colour or gradient shade if that distance is within
    ``tolerance``, else to ignore_index. Equidistant colours resolve to the
    lowest class id. Never raises on content: unmappable pixels are
    reported, not fatal.
    """
    if tolerance < 0:
        raise ContractError("tolerance must be >= 0")
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractError(f"expected an RGB raster (h, w, 3), got shape {img.shape}")
    px = img.astype(np.int16)
    h, w = img.shape[:2]

    best = np.full((h, w), 512, dtype=np.int16)
    out = np.full((h, w), taxonomy.ignore_index, dtype=np.uint8)
    # Ascending class id with strict improvement keeps the lowest id on ties.
    for colour, cid in taxonomy.palette_entries():
        d = np.abs(px - np.array(colour, dtype=np.int16)).max(axis=2)
        better = d < best
        out[better] = cid
        best[better] = d[better]

    unmapped = best > tolerance
    out[unmapped] = taxonomy.ignore_index
    n_unmapped = int(unmapped.sum())

    top: tuple[tuple[RGB, int], ...] = ()
    if n_unmapped:
        colours, counts = np.unique(img[unmapped].reshape(-1, 3), axis=0, return_counts=True)
        order = np.argsort(-counts, kind="stable")[:5]
        top = tuple(
            (tuple(int(v) for v in colours[i]), int(counts[i])) for i in order
        )
    report = UnmappedReport(
        count=n_unmapped, fraction=n_unmapped / (h * w), top_colours=top
    )
    return SemanticMask(data=out, ignore_index=taxonomy.ignore_index), report


def encode_mask(mask: SemanticMask, taxonomy: ClassTaxonomy) -> np.ndarray:
    """Render a mask as an RGB raster of primary colours.

    ignore_index pixels get the taxonomy's sentinel colour, which is
    guaranteed distinct from every palette entry.
    """
    mask.validate(taxonomy)
    lut = np.zeros((256, 3), dtype=np.uint8)
    for c in taxonomy.classes:
        lut[c.id] = c.colour
    lut[taxonomy.ignore_index] = taxonomy.sentinel_colour
    return lut[mask.data]


def read_rgb(path: str | Path) -> np.ndarray:
    """Read an image file as an (h, w, 3) uint8 array."""
    return np.asarray(Image.open(path).convert("RGB"))


def write_rgb(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path, format="PNG")
