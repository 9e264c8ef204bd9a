"""Spatially stratified cross-validation folds.

Sites are merged by single linkage below the separation threshold, which
makes the inter-cluster minimum distance at least that threshold; clusters
then go to folds greedily, biggest first, each to the fold that keeps
every class's share closest to an even 1/k split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ContractError

EARTH_RADIUS_KM = 6371.0

LatLon = tuple[float, float]


@dataclass(frozen=True)
class Site:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class SiteCluster:
    site_ids: tuple[str, ...]
    centroid: LatLon
    class_pixels: Mapping[int, int] | None = None


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    cluster_folds: tuple[int, ...]  # fold index per cluster, aligned with clusters
    clusters: tuple[SiteCluster, ...]
    fold_class_pixels: tuple[dict[int, int], ...]

    def site_fold(self) -> dict[str, int]:
        out = {}
        for cluster, fold in zip(self.clusters, self.cluster_folds):
            for sid in cluster.site_ids:
                out[sid] = fold
        return out


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    min_cross_fold_km: float
    violations: tuple[tuple[str, str, float], ...]
    fold_class_pixels: tuple[dict[int, int], ...]


def haversine_km(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    for lat, lon in (a, b):
        if not -90.0 <= lat <= 90.0:
            raise ContractError(f"latitude {lat} out of [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ContractError(f"longitude {lon} out of [-180, 180]")
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


def cluster_sites(sites: Sequence[Site], separation_km: float) -> list[SiteCluster]:
    """Single-linkage clustering at the separation threshold.

    Two sites share a cluster iff a chain of pairwise distances below
    separation_km connects them, so any two sites in different clusters are
    at least separation_km apart.
    """
    if not sites:
        raise ContractError("cluster_sites requires at least one site")
    if separation_km <= 0:
        raise ContractError("separation_km must be > 0")
    ids = [s.id for s in sites]
    if len(set(ids)) != len(ids):
        raise ContractError("site ids are not unique")

    parent = list(range(len(sites)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(sites)):
        for j in range(i + 1, len(sites)):
            d = haversine_km((sites[i].lat, sites[i].lon), (sites[j].lat, sites[j].lon))
            if d < separation_km:
                parent[find(i)] = find(j)

    groups: dict[int, list[Site]] = {}
    for i, site in enumerate(sites):
        groups.setdefault(find(i), []).append(site)

    clusters = []
    for members in groups.values():
        members = sorted(members, key=lambda s: s.id)
        centroid = (
            sum(s.lat for s in members) / len(members),
            sum(s.lon for s in members) / len(members),
        )
        clusters.append(SiteCluster(site_ids=tuple(s.id for s in members), centroid=centroid))
    clusters.sort(key=lambda c: c.site_ids[0])
    return clusters


def assign_folds(
    clusters: Sequence[SiteCluster],
    k: int,
    class_totals: Sequence[Mapping[int, int]],
) -> FoldAssignment:
    """Greedy class-balanced assignment of clusters to k folds.

    Clusters are taken largest first. A fold's imbalance is its worst
    per-class deviation from an even split: max over classes of
    |fold share of the class's pixels - 1/k|. Each cluster goes to the
    fold minimizing the total imbalance summed over folds; ties break
    toward the lowest fold index. When as many clusters remain as folds
    are still empty, the remainder is forced onto the empty folds so every
    fold is populated.
    """
    if k < 2:
        raise ContractError(f"fold count must be >= 2, got {k}")
    if len(clusters) < k:
        raise ContractError(
            f"only {len(clusters)} geographic clusters for k={k} folds; lower k to at most "
            f"{len(clusters)}"
        )
    if len(class_totals) != len(clusters):
        raise ContractError("class_totals must align with clusters")

    global_totals: dict[int, int] = {}
    for totals in class_totals:
        for cid, px in totals.items():
            global_totals[cid] = global_totals.get(cid, 0) + int(px)
    scored_classes = [cid for cid, px in sorted(global_totals.items()) if px > 0]

    order = sorted(
        range(len(clusters)),
        key=lambda i: (-sum(class_totals[i].values()), clusters[i].site_ids[0]),
    )

    fold_pixels: list[dict[int, int]] = [dict() for _ in range(k)]
    assignment = [0] * len(clusters)
    used_folds: set[int] = set()

    def deviation(pixels: Sequence[dict[int, int]]) -> float:
        total = 0.0
        for f in range(k):
            worst = 0.0
            for cid in scored_classes:
                share = pixels[f].get(cid, 0) / global_totals[cid]
                worst = max(worst, abs(share - 1.0 / k))
            total += worst
        return total

    for position, ci in enumerate(order):
        remaining = len(order) - position
        empty = [f for f in range(k) if f not in used_folds]
        candidates = empty if remaining <= len(empty) else list(range(k))
        best_fold, best_score = None, None
        for f in candidates:
            trial = [dict(p) for p in fold_pixels]
            for cid, px in class_totals[ci].items():
                trial[f][cid] = trial[f].get(cid, 0) + int(px)
            score = deviation(trial)
            if best_score is None or score < best_score:
                best_fold, best_score = f, score
        assignment[ci] = best_fold
        used_folds.add(best_fold)
        for cid, px in class_totals[ci].items():
            fold_pixels[best_fold][cid] = fold_pixels[best_fold].get(cid, 0) + int(px)

    attached = [
        SiteCluster(site_ids=c.site_ids, centroid=c.centroid, class_pixels=dict(t))
        for c, t in zip(clusters, class_totals)
    ]
    return FoldAssignment(
        k=k,
        cluster_folds=tuple(assignment),
        clusters=tuple(attached),
        fold_class_pixels=tuple(fold_pixels),
    )


def verify_assignment(
    assignment: FoldAssignment,
    sites: Sequence[Site],
    separation_km: float,
) -> VerificationReport:
    """Check that every cross-fold site pair is at least separation_km apart."""
    site_fold = assignment.site_fold()
    missing = [s.id for s in sites if s.id not in site_fold]
    if missing:
        raise ContractError(f"assignment does not cover sites: {missing[:5]}")

    min_cross = math.inf
    violations = []
    for i in range(len(sites)):
        for j in range(i + 1, len(sites)):
            if site_fold[sites[i].id] == site_fold[sites[j].id]:
                continue
            d = haversine_km((sites[i].lat, sites[i].lon), (sites[j].lat, sites[j].lon))
            min_cross = min(min_cross, d)
            if d < separation_km:
                violations.append((sites[i].id, sites[j].id, d))
    return VerificationReport(
        ok=not violations,
        min_cross_fold_km=min_cross,
        violations=tuple(violations),
        fold_class_pixels=assignment.fold_class_pixels,
    )


def exclusion_filter(
    candidates: Sequence[tuple[str, LatLon]],
    heldout: Sequence[LatLon],
    separation_km: float,
) -> list[str]:
    """Ids of candidates at least separation_km from every held-out point.

    Used to keep pseudo-labelled pre-training data geographically clear of
    validation and test sites.
    """
    kept = []
    for cid, coord in candidates:
        if all(haversine_km(coord, h) >= separation_km for h in heldout):
            kept.append(cid)
    return kept
