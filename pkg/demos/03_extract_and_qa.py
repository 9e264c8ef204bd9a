"""Split generated canvases into (photo, mask) pairs and run automated QA.

Three constructed canvases: a clean pair, one with mask colours leaking
into the photo, and one whose mask half is mostly missing. QA only
auto-rejects the unambiguous failures; suspicious pairs go to review.
"""

import tempfile
from pathlib import Path

import numpy as np

from regenforge.pair_extract import extract_directory
from regenforge.taxonomy import default_taxonomy, write_rgb

taxonomy = default_taxonomy()
rng = np.random.default_rng(0)
h = w = 192


def photo_texture(layout):
    bases = [(40, 90, 50), (200, 120, 80), (110, 140, 200)]
    out = np.zeros((h, w, 3), dtype=np.float64)
    for region, base in enumerate(bases):
        out[layout == region] = base
    out += rng.uniform(-15, 15, out.shape)
    return np.clip(out, 0, 255).astype(np.uint8)


layout = np.zeros((h, w), dtype=int)
layout[:, w // 3 : 2 * w // 3] = 1
layout[:, 2 * w // 3 :] = 2
colours = [taxonomy.by_name(n).colour for n in ("Fir", "Bog Labrador Tea", "Boulder")]
mask_raster = np.zeros((h, w, 3), dtype=np.uint8)
for region, colour in enumerate(colours):
    mask_raster[layout == region] = colour

clean = np.concatenate([photo_texture(layout), mask_raster], axis=1)

leaky_photo = photo_texture(layout)
leaky_photo[: h // 2, : w // 2] = colours[1]  # mask green painted into the photo
leaky = np.concatenate([leaky_photo, mask_raster], axis=1)

broken_mask = mask_raster.copy()
broken_mask[: int(h * 0.8)] = (99, 99, 99)  # not a palette colour
broken = np.concatenate([photo_texture(layout), broken_mask], axis=1)

with tempfile.TemporaryDirectory() as tmp:
    raw = Path(tmp) / "raw"
    raw.mkdir()
    for name, canvas in [("clean", clean), ("leaky", leaky), ("broken", broken)]:
        write_rgb(raw / f"{name}.png", canvas)
    entries = extract_directory(raw, Path(tmp) / "pairs", taxonomy, workers=2)
    for e in entries:
        print(
            f"{e['id']:<8} verdict={e['verdict']:<13} "
            f"leakage={e.get('palette_leakage_fraction', float('nan')):.3f} "
            f"unmapped={e.get('unmapped_fraction', float('nan')):.3f} "
            f"tags={e.get('suggested_tags', [])}"
        )
