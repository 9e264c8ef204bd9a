"""Build spatially separated cross-validation folds.

Sites within 20 km of each other merge into one cluster (single linkage),
so clusters can go to different folds without geographic leakage; the
greedy assignment then balances class pixels across folds.
"""

import random

from regenforge.fold_builder import (
    Site,
    assign_folds,
    cluster_sites,
    exclusion_filter,
    verify_assignment,
)

rng = random.Random(0)

# Four field areas, each a handful of nearby flight sites.
areas = [(46.8, -71.3), (48.4, -71.1), (47.0, -74.5), (49.1, -68.2)]
sites = []
for ai, (lat, lon) in enumerate(areas):
    for j in range(rng.randint(2, 4)):
        sites.append(Site(f"area{ai}_site{j}", lat + rng.uniform(-0.03, 0.03), lon + rng.uniform(-0.04, 0.04)))

clusters = cluster_sites(sites, separation_km=20.0)
print(f"{len(sites)} sites -> {len(clusters)} clusters")
for c in clusters:
    print(f"  centroid ({c.centroid[0]:.2f}, {c.centroid[1]:.2f}): {', '.join(c.site_ids)}")

# Class-pixel totals per cluster (wildly imbalanced, as in the field).
totals = [
    {0: rng.randint(1000, 8000), 1: rng.randint(0, 3000), 2: rng.randint(0, 500)}
    for _ in clusters
]
assignment = assign_folds(clusters, k=4, class_totals=totals)
print("\nfold per cluster:", assignment.cluster_folds)
for f, pixels in enumerate(assignment.fold_class_pixels):
    print(f"  fold {f}: {pixels}")

report = verify_assignment(assignment, sites, separation_km=20.0)
print(f"\nverified: {report.ok}, min cross-fold distance {report.min_cross_fold_km:.1f} km")

# Pseudo-label pre-training must stay clear of held-out geography too.
heldout = [(s.lat, s.lon) for s in sites if assignment.site_fold()[s.id] == 0]
candidates = [("near_fold0", (areas[0][0] + 0.01, areas[0][1])), ("far_away", (50.5, -66.0))]
print("pseudo-label candidates kept:", exclusion_filter(candidates, heldout, 20.0))
