"""Walk through the class schema and the RGB <-> class-id mask codecs.

The taxonomy is the contract everything else consumes: 23 classes (20
plant, 3 non-plant), one unique colour each, plus gradient shades that
decode back to their parent class.
"""

import numpy as np

from regenforge import decode_mask, default_taxonomy, encode_mask, SemanticMask

taxonomy = default_taxonomy()
print(f"{taxonomy.n_classes} classes, {taxonomy.palette_size} palette colours")
for cls in taxonomy.classes[:6]:
    print(f"  {cls.id:>2} {cls.name:<22} {cls.rank.value:<9} {cls.colour}")
print("  ...")

# Paint a little mask by id and round-trip it through RGB.
mask = SemanticMask(np.zeros((6, 9), dtype=np.uint8))
mask.data[:, 3:6] = taxonomy.by_name("Fern").id
mask.data[:, 6:] = taxonomy.by_name("Boulder").id
mask.data[0, 0] = taxonomy.ignore_index

raster = encode_mask(mask, taxonomy)
decoded, report = decode_mask(raster, taxonomy, tolerance=0)
print("\nround trip exact:", decoded == mask)
print("unmapped fraction:", report.fraction)

# Generators emit approximate colours; the tolerance absorbs the drift.
wobbly = raster.astype(np.int16) + np.random.default_rng(0).integers(-5, 6, raster.shape)
wobbly = np.clip(wobbly, 0, 255).astype(np.uint8)
decoded, report = decode_mask(wobbly, taxonomy, tolerance=8)
print("wobbly colours, tolerance 8 -> unmapped:", report.fraction)

# A shade of Lowbush Blueberry decodes to the same class id as its primary.
blueberry = taxonomy.by_name("Lowbush Blueberry")
shade_px = np.array([[blueberry.gradient_shades[0]]], dtype=np.uint8)
decoded, _ = decode_mask(shade_px, taxonomy, tolerance=0)
print(f"shade {blueberry.gradient_shades[0]} decodes to class:", decoded.data[0, 0], f"({blueberry.name})")
