"""The human curation loop, headless.

Extracted pairs that were not auto-rejected queue up for review ordered by
their worst QA score; decisions append to an event log whose replay is the
single source of truth; accepted items export as a synthetic-source
manifest. `regenforge review serve` exposes the same service over HTTP
for the browser UI in frontend/.
"""

import tempfile
from pathlib import Path

from regenforge.review import ReviewService

entries = [
    {
        "id": f"pair{i:02d}",
        "photo_path": f"pair{i:02d}_photo.png",
        "mask_path": f"pair{i:02d}_mask.png",
        "verdict": "needs_review" if i % 4 else "auto_pass",
        "palette_leakage_fraction": 0.04 * (i % 5),
        "unmapped_fraction": 0.0,
        "misalignment_score": 0.3 * (i % 3),
    }
    for i in range(10)
]

with tempfile.TemporaryDirectory() as tmp:
    log = Path(tmp) / "review_log.bin"
    service = ReviewService(log, lease_seconds=600)
    print("enqueued:", service.enqueue(entries))

    # Review in worst-first order: accept most, reject a couple with tags.
    while (item := service.next(reviewer="demo")) is not None:
        leak = item.qa.get("palette_leakage_fraction", 0.0)
        if leak > 0.12:
            decided = service.decide(
                item.id, "reject", tags=["palette_leak_in_photo"], reviewer="demo",
                note="palette green all over the canopy",
            )
        else:
            decided = service.decide(item.id, "accept", reviewer="demo")
        print(f"  {item.id}: leakage {leak:.2f} -> {decided.status.value}")

    stats = service.stats()
    print(
        f"\naccepted {stats['accepted']}, rejected {stats['rejected']}; "
        f"acceptance rate {stats['acceptance_rate_reviewed']:.0f}% of reviewed"
    )
    out = Path(tmp) / "accepted_manifest.jsonl"
    print("exported records:", service.export_accepted(out))
    service.close()

    # The event log alone reproduces the same state (crash-safe by replay).
    resumed = ReviewService(log)
    print("states after replay:", {
        s.value: sum(1 for i in resumed.items().values() if i.status is s)
        for s in {i.status for i in resumed.items().values()}
    })
    resumed.close()
