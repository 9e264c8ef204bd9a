"""Sliding-window pseudo-labels with a pluggable window classifier.

Windows slide at half overlap; each contributes its class-probability
vector to every pixel it covers, and the per-pixel argmax of the averaged
scores becomes the mask. The classifier here is a builtin stub; real runs
point --classifier-cmd at a subprocess speaking the line-JSON protocol.
"""

import numpy as np

from regenforge.mask_metrics import instance_count
from regenforge.pseudo_label import StubClassifier, WindowSpec, generate_pseudo_label, tile

rng = np.random.default_rng(2)
image = rng.integers(0, 255, size=(448, 448, 3), dtype=np.uint8)

spec = WindowSpec(size=224, stride=112)
windows = tile(448, 448, spec)
print(f"{len(windows)} windows over 448x448 at size {spec.size}, stride {spec.stride}")
print("offsets:", sorted({(w.x, w.y) for w in windows}))

classifier = StubClassifier(
    n_classes=4, rule="quadrant", image_size=(448, 448), quadrant_classes=(0, 1, 2, 3)
)
mask = generate_pseudo_label(image, classifier, spec)
print("\nclass layout (every 64th pixel):")
print(mask.data[::64, ::64])
print("regions per class:", instance_count(mask, connectivity=4))

# Soft voting blends overlapping windows; a constant classifier is a fixed point.
constant = StubClassifier(n_classes=4, rule="constant", constant_class=2)
flat = generate_pseudo_label(image, constant, WindowSpec(size=224, stride=37))
print("\nconstant classifier -> single class:", set(np.unique(flat.data)))
