"""Mix synthetic and hand-labelled samples into training batches.

Three strategies at the default 40:60 synthetic:labelled ratio: pure
batches drawn per batch, fixed per-batch composition, and per-slot
weighted sampling. All are seeded and reproducible; within a source every
sample appears once per epoch.
"""

from regenforge.manifest import DatasetManifest, SampleRecord, Source
from regenforge.mix_sampler import MixConfig, Strategy, make_sampler

records = [
    SampleRecord(id=f"syn{i:02d}", source=Source.SYNTHETIC, image_path="", mask_path="")
    for i in range(8)
]
records += [
    SampleRecord(id=f"lab{i:02d}", source=Source.HAND_LABELLED, image_path="", mask_path="")
    for i in range(12)
]
manifest = DatasetManifest(records=records)

for strategy in Strategy:
    sampler = make_sampler(
        manifest,
        MixConfig(ratio_synthetic=0.4, strategy=strategy, batch_size=10, seed=3),
    )
    print(f"\n{strategy.value}:")
    synthetic = total = 0
    for b in range(4):
        batch = sampler.next_batch()
        synthetic += batch.n_synthetic()
        total += len(batch)
        tags = "".join("S" if src is Source.SYNTHETIC else "L" for _, src in batch.entries)
        print(f"  batch {b}: {tags}  ({batch.n_synthetic()}/10 synthetic)")
    for _ in range(996):
        batch = sampler.next_batch()
        synthetic += batch.n_synthetic()
        total += len(batch)
    print(f"  long-run synthetic fraction over 1000 batches: {synthetic / total:.3f}")
