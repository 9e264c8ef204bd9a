"""Provenance-tagged sample records and the JSON Lines dataset manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import ConfigError, ContractError
from .taxonomy import ClassTaxonomy


class Source(str, Enum):
    HAND_LABELLED = "hand_labelled"
    PSEUDO_LABELLED = "pseudo_labelled"
    SYNTHETIC = "synthetic"


class ReviewStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class DefectTag(str, Enum):
    """Closed taxonomy of generation/extraction defects."""

    HALLUCINATION = "hallucination"
    MISSING_MASK = "missing_mask"
    MISALIGNMENT = "misalignment"
    PALETTE_LEAK_IN_PHOTO = "palette_leak_in_photo"
    WRONG_SEMANTICS = "wrong_semantics"
    WRONG_VIEWPOINT = "wrong_viewpoint"
    SIZE_MISMATCH = "size_mismatch"
    WATERMARK = "watermark"


@dataclass(frozen=True)
class SampleRecord:
    id: str
    source: Source
    image_path: str
    mask_path: str
    location: tuple[float, float] | None = None  # (lat, lon) degrees
    site_name: str | None = None
    sensor: str | None = None
    gsd_cm: float | None = None
    review_status: ReviewStatus = ReviewStatus.PENDING
    defect_tags: tuple[DefectTag, ...] = ()

    def __post_init__(self):
        if self.gsd_cm is not None and not self.gsd_cm > 0:
            raise ContractError(f"record {self.id}: gsd_cm must be > 0, got {self.gsd_cm}")
        if self.source is Source.SYNTHETIC and self.location is not None:
            raise ContractError(f"record {self.id}: synthetic records carry no location")

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "source": self.source.value,
            "image_path": self.image_path,
            "mask_path": self.mask_path,
            "review_status": self.review_status.value,
        }
        if self.location is not None:
            d["location"] = list(self.location)
        for key in ("site_name", "sensor", "gsd_cm"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        if self.defect_tags:
            d["defect_tags"] = [t.value for t in self.defect_tags]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SampleRecord":
        loc = d.get("location")
        return cls(
            id=d["id"],
            source=Source(d["source"]),
            image_path=d["image_path"],
            mask_path=d["mask_path"],
            location=(float(loc[0]), float(loc[1])) if loc is not None else None,
            site_name=d.get("site_name"),
            sensor=d.get("sensor"),
            gsd_cm=d.get("gsd_cm"),
            review_status=ReviewStatus(d.get("review_status", "pending")),
            defect_tags=tuple(DefectTag(t) for t in d.get("defect_tags", [])),
        )

    def with_status(self, status: ReviewStatus, tags: tuple[DefectTag, ...] = ()) -> "SampleRecord":
        return replace(self, review_status=status, defect_tags=tags)


@dataclass
class DatasetManifest:
    """All known samples plus the digest of the taxonomy they were made under."""

    records: list[SampleRecord] = field(default_factory=list)
    taxonomy_hash: str | None = None

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ContractError(f"duplicate record ids in manifest: {dupes[:5]}")

    def by_source(self, source: Source) -> list[SampleRecord]:
        return [r for r in self.records if r.source is source]

    def accepted(self) -> list[SampleRecord]:
        return [r for r in self.records if r.review_status is ReviewStatus.ACCEPTED]

    def add(self, record: SampleRecord) -> None:
        if any(r.id == record.id for r in self.records):
            raise ContractError(f"duplicate record id: {record.id}")
        self.records.append(record)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write as JSON Lines: a header object, then one record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"manifest": {"taxonomy_hash": manifest.taxonomy_hash}}) + "\n")
        for r in manifest.records:
            f.write(json.dumps(r.to_json()) + "\n")


def read_manifest(path: str | Path, taxonomy: ClassTaxonomy | None = None) -> DatasetManifest:
    """Read a JSON Lines manifest; verifies the taxonomy digest when one is given."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    records: list[SampleRecord] = []
    taxonomy_hash: str | None = None
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if "manifest" in d:
                taxonomy_hash = d["manifest"].get("taxonomy_hash")
                continue
            try:
                records.append(SampleRecord.from_json(d))
            except (KeyError, ValueError) as e:
                raise ConfigError(f"{path}:{lineno}: bad record: {e}") from e
    manifest = DatasetManifest(records=records, taxonomy_hash=taxonomy_hash)
    if taxonomy is not None and taxonomy_hash is not None:
        expected = taxonomy.taxonomy_hash()
        if taxonomy_hash != expected:
            raise ConfigError(
                f"{path}: manifest was built under a different taxonomy "
                f"(hash {taxonomy_hash[:12]}… != {expected[:12]}…)"
            )
    return manifest
