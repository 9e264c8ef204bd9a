"""Multi-source batch mixing at a configurable synthetic:labelled ratio.

Three strategies: homogeneous (whole batch from one source, source drawn
per batch), balanced heterogeneous (fixed per-batch composition, rounding
alternated so the long-run ratio is exact), and weighted random (each slot
drawn independently). Within a source, sampling is uniform without
replacement per epoch, reshuffled between epochs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError
from .manifest import DatasetManifest, SampleRecord, Source
from .taxonomy import SemanticMask


class Strategy(str, Enum):
    HOMOGENEOUS = "homogeneous"
    BALANCED_HETEROGENEOUS = "balanced_heterogeneous"
    WEIGHTED_RANDOM = "weighted_random"


@dataclass(frozen=True)
class MixConfig:
    ratio_synthetic: float = 0.4  # 40:60 synthetic:labelled default
    strategy: Strategy = Strategy.WEIGHTED_RANDOM
    batch_size: int = 16
    seed: int = 0
    with_replacement: bool = False

    def __post_init__(self):
        if not 0.0 <= self.ratio_synthetic <= 1.0:
            raise ContractError(f"ratio_synthetic must be in [0, 1], got {self.ratio_synthetic}")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")


@dataclass(frozen=True)
class BatchPlan:
    entries: tuple[tuple[str, Source], ...]  # (sample id, source), batch order

    def __len__(self) -> int:
        return len(self.entries)

    def n_synthetic(self) -> int:
        return sum(1 for _, s in self.entries if s is Source.SYNTHETIC)


class _SourcePool:
    """Epoch-shuffled id pool: every id once per epoch, reshuffled between epochs."""

    def __init__(self, ids: list[str], rng: random.Random, with_replacement: bool):
        if not ids:
            raise ContractError("empty source pool")
        self.ids = sorted(ids)  # manifest order must not matter
        self.rng = rng
        self.with_replacement = with_replacement
        self._queue: list[str] = []

    def draw(self) -> str:
        if self.with_replacement:
            return self.rng.choice(self.ids)
        if not self._queue:
            self._queue = self.ids.copy()
            self.rng.shuffle(self._queue)
        return self._queue.pop()


class Sampler:
    """Seeded batch stream; single-owner, calls are serialized by the caller."""

    def __init__(self, manifest: DatasetManifest, config: MixConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        synthetic = [r.id for r in manifest.by_source(Source.SYNTHETIC)]
        labelled = [r.id for r in manifest.by_source(Source.HAND_LABELLED)]
        if config.ratio_synthetic > 0 and not synthetic:
            raise ContractError("config mixes synthetic data but the manifest has none")
        if config.ratio_synthetic < 1 and not labelled:
            raise ContractError("config mixes labelled data but the manifest has none")
        self._pools = {}
        if synthetic:
            self._pools[Source.SYNTHETIC] = _SourcePool(
                synthetic, self.rng, config.with_replacement
            )
        if labelled:
            self._pools[Source.HAND_LABELLED] = _SourcePool(
                labelled, self.rng, config.with_replacement
            )
        self._round_carry = 0.0

    def _draw(self, source: Source) -> tuple[str, Source]:
        return self._pools[source].draw(), source

    def next_batch(self) -> BatchPlan:
        cfg = self.config
        ratio = cfg.ratio_synthetic
        entries: list[tuple[str, Source]] = []
        if cfg.strategy is Strategy.HOMOGENEOUS:
            source = Source.SYNTHETIC if self.rng.random() < ratio else Source.HAND_LABELLED
            if source not in self._pools:  # degenerate single-source config
                source = next(iter(self._pools))
            entries = [self._draw(source) for _ in range(cfg.batch_size)]
        elif cfg.strategy is Strategy.BALANCED_HETEROGENEOUS:
            exact = ratio * cfg.batch_size
            n_syn = int(exact)
            self._round_carry += exact - n_syn
            if self._round_carry >= 1.0 - 1e-9:  # alternate rounding, no drift
                n_syn += 1
                self._round_carry -= 1.0
            n_syn = min(n_syn, cfg.batch_size)
            entries = [self._draw(Source.SYNTHETIC) for _ in range(n_syn)]
            entries += [self._draw(Source.HAND_LABELLED) for _ in range(cfg.batch_size - n_syn)]
            self.rng.shuffle(entries)
        elif cfg.strategy is Strategy.WEIGHTED_RANDOM:
            for _ in range(cfg.batch_size):
                take_syn = self.rng.random() < ratio
                source = Source.SYNTHETIC if take_syn else Source.HAND_LABELLED
                if source not in self._pools:
                    source = next(iter(self._pools))
                entries.append(self._draw(source))
        else:  # pragma: no cover
            raise ContractError(f"unknown strategy {cfg.strategy}")
        return BatchPlan(entries=tuple(entries))


def make_sampler(manifest: DatasetManifest, config: MixConfig) -> Sampler:
    return Sampler(manifest, config)


@dataclass(frozen=True)
class SeenPixelReport:
    analytic: dict[int, float]
    empirical: dict[int, float]
    n_batches: int


def _source_class_share(records: list[SampleRecord], cache: dict[str, dict[int, int]]) -> dict[int, float]:
    totals: dict[int, int] = {}
    for r in records:
        for cid, px in cache[r.id].items():
            totals[cid] = totals.get(cid, 0) + px
    grand = sum(totals.values())
    return {cid: px / grand for cid, px in sorted(totals.items())} if grand else {}


def seen_pixel_report(
    manifest: DatasetManifest, config: MixConfig, n_batches: int
) -> SeenPixelReport:
    """Per-class pixel share the model would see under a mixing config.

    Analytic: ratio * synthetic share + (1 - ratio) * labelled share, per
    class. Empirical: the share actually accumulated over n_batches of
    simulated sampling. Mask pixel counts are read once per sample.
    """
    cache: dict[str, dict[int, int]] = {}
    relevant = manifest.by_source(Source.SYNTHETIC) + manifest.by_source(Source.HAND_LABELLED)
    for r in relevant:
        mask = SemanticMask.load_png(r.mask_path)
        ids, counts = np.unique(mask.data, return_counts=True)
        cache[r.id] = {
            int(i): int(c) for i, c in zip(ids, counts) if int(i) != mask.ignore_index
        }

    ratio = config.ratio_synthetic
    syn_share = _source_class_share(manifest.by_source(Source.SYNTHETIC), cache)
    lab_share = _source_class_share(manifest.by_source(Source.HAND_LABELLED), cache)
    classes = sorted(set(syn_share) | set(lab_share))
    analytic = {
        cid: ratio * syn_share.get(cid, 0.0) + (1 - ratio) * lab_share.get(cid, 0.0)
        for cid in classes
    }

    sampler = make_sampler(manifest, config)
    seen: dict[int, int] = {}
    for _ in range(n_batches):
        for sid, _src in sampler.next_batch().entries:
            for cid, px in cache[sid].items():
                seen[cid] = seen.get(cid, 0) + px
    grand = sum(seen.values())
    empirical = {cid: seen.get(cid, 0) / grand for cid in classes} if grand else {}
    return SeenPixelReport(analytic=analytic, empirical=empirical, n_batches=n_batches)


def format_seen_report(report: SeenPixelReport, names: dict[int, str] | None = None) -> str:
    names = names or {}
    lines = [f"{'class':<22} {'analytic':>10} {'empirical':>10}", "-" * 44]
    for cid in sorted(report.analytic):
        label = names.get(cid, str(cid))
        lines.append(
            f"{label:<22} {report.analytic[cid]:>10.4f} "
            f"{report.empirical.get(cid, 0.0):>10.4f}"
        )
    return "\n".join(lines) + "\n"
