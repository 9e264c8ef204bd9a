"""Unified command-line front door.

Subcommands: prompt, extract, stats, eval, distance, folds, mix,
pseudolabel, review. Exit codes: 0 success, 1 validation error, 2 runtime
error. Logs go to stderr; data goes to files or stdout, so pipelines stay
composable. Every pipeline command drops a run manifest with input digests
next to its output; a rerun with identical digests is flagged as a
reproduction.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, ContractError, RegenforgeError
from . import dist_metrics, fold_builder, mask_metrics, mix_sampler, promptgen, seg_eval
from .manifest import ReviewStatus, Source, read_manifest, write_manifest, DatasetManifest
from .pair_extract import Corner, QaThresholds, WatermarkSpec, extract_directory
from .pseudo_label import StubClassifier, SubprocessClassifier, WindowSpec, batch_run
from .review import ReviewServer, ReviewService
from .taxonomy import ClassTaxonomy, SemanticMask, default_taxonomy, load_taxonomy

log = logging.getLogger("regenforge")

COMMANDS = (
    "prompt",
    "extract",
    "stats",
    "eval",
    "distance",
    "folds",
    "mix",
    "pseudolabel",
    "review",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # validation problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _env_config() -> dict:
    path = os.environ.get("REGENFORGE_CONFIG")
    if not path:
        return {}
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: REGENFORGE_CONFIG must hold a mapping")
    return doc


def _taxonomy(args) -> ClassTaxonomy:
    path = getattr(args, "taxonomy", None) or _env_config().get("taxonomy")
    return load_taxonomy(path) if path else default_taxonomy()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_manifest(command: str, args, inputs: list[str], outputs: list[str], started: float):
    """Record the run next to its first output for reproducibility checks."""
    if not outputs:
        return
    target = Path(outputs[0])
    run_path = (target if target.is_dir() else target.parent) / "run_manifest.json"
    digests = {}
    for p in inputs:
        path = Path(p)
        if path.is_file():
            digests[p] = _sha256(path)
    payload = {
        "command": command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "input_digests": digests,
        "outputs": outputs,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(timespec="seconds"),
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if run_path.exists():
        try:
            previous = json.loads(run_path.read_text())
            if previous.get("input_digests") == digests and previous.get("command") == command:
                payload["reproduction"] = True
        except (json.JSONDecodeError, OSError):
            pass
    run_path.write_text(json.dumps(payload, indent=2) + "\n")


# -- subcommand implementations ----------------------------------------------


def _cmd_prompt_plan(args) -> int:
    taxonomy = _taxonomy(args)
    space = (
        promptgen.load_attribute_space(args.space)
        if args.space
        else promptgen.default_attribute_space()
    )
    quotas = yaml.safe_load(Path(args.quotas).read_text()) or {}
    if not isinstance(quotas, dict):
        raise ConfigError(f"{args.quotas}: quotas must map class name to image count")
    plan = promptgen.plan_generation(
        {str(k): int(v) for k, v in quotas.items()},
        taxonomy,
        space,
        batch_bounds=(args.batch_min, args.batch_max),
        seed=args.seed,
    )
    started = time.time()
    index = promptgen.write_plan(plan, taxonomy, args.out)
    log.info(
        "planned %d batches, %d prompts -> %s",
        len(plan.batches),
        plan.total_images(),
        args.out,
    )
    _write_run_manifest("prompt plan", args, [args.quotas], [str(args.out)], started)
    print(str(index))
    return 0


def _cmd_prompt_zeroshot(args) -> int:
    taxonomy = _taxonomy(args)
    classes = None
    if args.from_mask:
        mask = SemanticMask.load_png(args.from_mask, taxonomy.ignore_index)
        classes = promptgen.classes_in_mask(mask, taxonomy)
    elif args.classes and args.classes != "full":
        classes = [taxonomy.by_name(n.strip()) for n in args.classes.split(",")]
    prompt = promptgen.build_zero_shot_prompt(
        taxonomy, classes, attach_pseudo_label=args.attach_pseudo_label
    )
    if args.out:
        Path(args.out).write_text(prompt.text, encoding="utf-8")
    else:
        print(prompt.text, end="")
    if prompt.attach_mask:
        log.info("prompt references an attached mask: attach the pseudo-label image")
    return 0


def _parse_watermark(spec: str) -> WatermarkSpec:
    try:
        corner, extent = spec.split(":")
        w, h = extent.lower().split("x")
        return WatermarkSpec(corner=Corner(corner), width=int(w), height=int(h))
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad watermark spec {spec!r}; expected corner:WxH") from e


def _cmd_extract(args) -> int:
    taxonomy = _taxonomy(args)
    thresholds = QaThresholds.load(args.thresholds) if args.thresholds else QaThresholds()
    watermark = _parse_watermark(args.watermark) if args.watermark else None
    started = time.time()
    entries = extract_directory(
        args.in_dir, args.out, taxonomy, thresholds, watermark, workers=args.jobs
    )
    verdicts = {}
    for e in entries:
        verdicts[e["verdict"]] = verdicts.get(e["verdict"], 0) + 1
    log.info("extracted %d pairs: %s", len(entries), verdicts)
    _write_run_manifest("extract", args, [str(args.in_dir)], [str(args.out)], started)
    print(json.dumps({"pairs": len(entries), "verdicts": verdicts}))
    return 0


def _filtered_records(manifest: DatasetManifest, source: str | None, accepted_only: bool):
    records = manifest.records
    if source:
        records = [r for r in records if r.source is Source(source)]
    if accepted_only:
        records = [r for r in records if r.review_status is ReviewStatus.ACCEPTED]
    return records


def _cmd_stats(args) -> int:
    taxonomy = _taxonomy(args)
    manifest = read_manifest(args.manifest, taxonomy)
    records = _filtered_records(manifest, args.source, args.accepted_only)
    if not records:
        raise ContractError("no records left after filtering; nothing to report")
    masks = [SemanticMask.load_png(r.mask_path, taxonomy.ignore_index) for r in records]
    started = time.time()
    stats = mask_metrics.dataset_mask_stats(masks)
    dist = mask_metrics.class_distribution(masks)
    label = args.source or "all"
    names = {c.id: c.name for c in taxonomy.classes}
    lines = [mask_metrics.format_stats_table([(label, stats)]), "", "class distribution:"]
    for cid, share in dist.items():
        lines.append(f"  {names.get(cid, cid):<22} {share:8.4f}")
    report = "\n".join(lines) + "\n"
    Path(args.out).write_text(report)
    _write_run_manifest("stats", args, [args.manifest], [args.out], started)
    print(report, end="")
    return 0


def _load_fold_map(path: str) -> dict[str, int]:
    folds = {}
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                d = json.loads(line)
                if "id" in d and "fold" in d:
                    folds[d["id"]] = int(d["fold"])
    return folds


def _cmd_eval(args) -> int:
    taxonomy = _taxonomy(args)
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    gt_files = sorted(p for p in gt_dir.glob("*.png"))
    if not gt_files:
        raise ConfigError(f"no ground-truth masks in {gt_dir}")
    fold_map = _load_fold_map(args.pool) if args.pool else None

    matrices: dict[int, seg_eval.ConfusionMatrix] = {}
    matched = 0
    for gt_path in gt_files:
        pred_path = pred_dir / gt_path.name
        if not pred_path.exists():
            log.warning("no prediction for %s; skipped", gt_path.name)
            continue
        matched += 1
        gt = SemanticMask.load_png(gt_path, taxonomy.ignore_index)
        pred = SemanticMask.load_png(pred_path, taxonomy.ignore_index)
        fold = fold_map.get(gt_path.stem, 0) if fold_map else 0
        cm = matrices.setdefault(fold, seg_eval.ConfusionMatrix(taxonomy.n_classes))
        seg_eval.accumulate(cm, pred, gt, taxonomy.ignore_index)
    if not matched:
        raise ConfigError("no prediction/ground-truth pairs matched by filename")

    started = time.time()
    scoring = seg_eval.Scoring(args.scoring)
    report = seg_eval.pooled_eval(list(matrices.values()), scoring)
    names = {c.id: c.name for c in taxonomy.classes}
    text = report.formatted(names)
    pooled = seg_eval.ConfusionMatrix(taxonomy.n_classes)
    for m in matrices.values():
        pooled.counts += m.counts
        pooled.reject += m.reject
        pooled.ignored_pixels += m.ignored_pixels
    text += "\n" + seg_eval.format_matrix(pooled, names)
    Path(args.out).write_text(text)
    _write_run_manifest("eval", args, [str(args.pred), str(args.gt)], [args.out], started)
    print(text, end="")
    return 0


def _cmd_distance(args) -> int:
    a = dist_metrics.read_embeddings(args.a)
    b = dist_metrics.read_embeddings(args.b)
    started = time.time()
    fid_value = dist_metrics.fid(a, b)
    mmd_value = dist_metrics.mmd_squared(a, b, bandwidth=args.bandwidth)
    relative: dict[str, str] = {}
    if args.baseline:
        base = dist_metrics.read_embeddings(args.baseline)
        values = {
            base.source_label: dist_metrics.fid(a, base),
            b.source_label: fid_value,
        }
        relative = dist_metrics.relative_report(values, base.source_label)
    payload = {
        "fid": fid_value,
        "cmmd": max(mmd_value, 0.0),  # unbiased estimate clamped for reporting
        "cmmd_raw": mmd_value,
        "bandwidth": args.bandwidth,
        "relative_to_baseline": relative,
    }
    out = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(out + "\n")
        _write_run_manifest(
            "distance", args, [args.a, args.b], [args.out], started
        )
    print(out)
    return 0


def _read_sites(path: str) -> list[fold_builder.Site]:
    sites = []
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for row in reader:
            if not row or row[0].strip().lower() in ("id", "site", "site_id"):
                continue
            sites.append(
                fold_builder.Site(id=row[0].strip(), lat=float(row[1]), lon=float(row[2]))
            )
    if not sites:
        raise ConfigError(f"{path}: no site rows parsed")
    return sites


def _cmd_folds(args) -> int:
    taxonomy = _taxonomy(args)
    sites = _read_sites(args.sites)
    manifest = read_manifest(args.manifest, taxonomy)

    per_site: dict[str, dict[int, int]] = {s.id: {} for s in sites}
    placeable = []
    for record in manifest.records:
        if record.source is Source.SYNTHETIC:
            continue
        if record.site_name is None or record.site_name not in per_site:
            if record.location is None:
                raise ContractError(
                    f"record {record.id}: real records used for folds need a site or location"
                )
            nearest = min(
                sites,
                key=lambda s: fold_builder.haversine_km((s.lat, s.lon), record.location),
            )
            site_id = nearest.id
        else:
            site_id = record.site_name
        placeable.append((record.id, site_id))
        mask = SemanticMask.load_png(record.mask_path, taxonomy.ignore_index)
        ids, counts = np.unique(mask.data, return_counts=True)
        for cid, count in zip(ids, counts):
            if int(cid) != taxonomy.ignore_index:
                per_site[site_id][int(cid)] = per_site[site_id].get(int(cid), 0) + int(count)

    started = time.time()
    clusters = fold_builder.cluster_sites(sites, args.separation_km)
    totals = [
        {
            cid: sum(per_site[sid].get(cid, 0) for sid in c.site_ids)
            for cid in range(taxonomy.n_classes)
        }
        for c in clusters
    ]
    assignment = fold_builder.assign_folds(clusters, args.k, totals)
    verification = fold_builder.verify_assignment(assignment, sites, args.separation_km)
    if not verification.ok:
        raise RegenforgeError(
            f"fold verification failed: offending pairs {verification.violations[:3]}"
        )
    site_fold = assignment.site_fold()
    with Path(args.out).open("w", encoding="utf-8") as f:
        for sid, fold in sorted(site_fold.items()):
            f.write(json.dumps({"site": sid, "fold": fold}) + "\n")
        for rid, sid in sorted(placeable):
            f.write(json.dumps({"id": rid, "fold": site_fold[sid]}) + "\n")

    if args.pseudo_exclusion_out:
        # Pre-training safety map: a pseudo-labelled record may be used while
        # fold h is held out only if it sits >= separation from every site of h.
        fold_sites: dict[int, list[tuple[float, float]]] = {}
        site_coords = {s.id: (s.lat, s.lon) for s in sites}
        for sid, fold in site_fold.items():
            fold_sites.setdefault(fold, []).append(site_coords[sid])
        with Path(args.pseudo_exclusion_out).open("w", encoding="utf-8") as f:
            for record in manifest.by_source(Source.PSEUDO_LABELLED):
                if record.location is None:
                    continue
                safe = [
                    fold
                    for fold in sorted(fold_sites)
                    if len(
                        fold_builder.exclusion_filter(
                            [(record.id, record.location)], fold_sites[fold], args.separation_km
                        )
                    )
                    == 1
                ]
                f.write(json.dumps({"id": record.id, "safe_when_heldout": safe}) + "\n")
    log.info(
        "built %d folds over %d clusters; min cross-fold distance %.1f km",
        args.k,
        len(clusters),
        verification.min_cross_fold_km,
    )
    _write_run_manifest("folds", args, [args.sites, args.manifest], [args.out], started)
    print(
        json.dumps(
            {
                "folds": args.k,
                "clusters": len(clusters),
                "min_cross_fold_km": verification.min_cross_fold_km,
            }
        )
    )
    return 0


def _mix_config(args) -> mix_sampler.MixConfig:
    return mix_sampler.MixConfig(
        ratio_synthetic=args.ratio,
        strategy=mix_sampler.Strategy(args.strategy),
        batch_size=args.batch,
        seed=args.seed,
        with_replacement=args.with_replacement,
    )


def _cmd_mix_emit(args) -> int:
    taxonomy = _taxonomy(args)
    manifest = read_manifest(args.manifest, taxonomy)
    sampler = mix_sampler.make_sampler(manifest, _mix_config(args))
    started = time.time()
    with Path(args.out).open("w", encoding="utf-8") as f:
        for i in range(args.emit):
            batch = sampler.next_batch()
            f.write(
                json.dumps(
                    {
                        "batch": i,
                        "samples": [
                            {"id": sid, "source": src.value} for sid, src in batch.entries
                        ],
                    }
                )
                + "\n"
            )
    _write_run_manifest("mix", args, [args.manifest], [args.out], started)
    print(json.dumps({"batches": args.emit, "batch_size": args.batch}))
    return 0


def _cmd_mix_report(args) -> int:
    taxonomy = _taxonomy(args)
    manifest = read_manifest(args.manifest, taxonomy)
    started = time.time()
    report = mix_sampler.seen_pixel_report(manifest, _mix_config(args), args.batches)
    names = {c.id: c.name for c in taxonomy.classes}
    text = mix_sampler.format_seen_report(report, names)
    if args.out:
        Path(args.out).write_text(text)
        _write_run_manifest("mix report", args, [args.manifest], [args.out], started)
    print(text, end="")
    return 0


def _parse_stub(spec: str, n_classes: int) -> StubClassifier:
    kind, _, rest = spec.partition(":")
    if kind == "constant":
        return StubClassifier(n_classes=n_classes, rule="constant", constant_class=int(rest or 0))
    if kind == "quadrant":
        quads = tuple(int(v) for v in rest.split(",")) if rest else (0, 1, 2, 3)
        return StubClassifier(n_classes=n_classes, rule="quadrant", quadrant_classes=quads)
    if kind == "mean":
        below, _, above = (rest or "0,1").partition(",")
        return StubClassifier(
            n_classes=n_classes, rule="mean_threshold", below_class=int(below), above_class=int(above or 1)
        )
    raise ConfigError(f"unknown stub spec {spec!r}")


def _cmd_pseudolabel(args) -> int:
    taxonomy = _taxonomy(args)
    manifest = read_manifest(args.manifest, taxonomy)
    subset = [r for r in manifest.records if r.source is Source.HAND_LABELLED or args.all_sources]
    spec = WindowSpec(size=args.window, stride=args.stride, pad_policy=args.pad_policy)

    if args.classifier_cmd:
        def factory():
            return SubprocessClassifier(args.classifier_cmd)
    elif args.stub:
        def factory():
            stub = _parse_stub(args.stub, taxonomy.n_classes)
            return stub
    else:
        raise ConfigError("provide --classifier-cmd or --stub")

    started = time.time()
    result = batch_run(subset, factory, spec, args.out_dir, parallelism=args.jobs)
    for rid, reason in result.failures:
        log.warning("quarantined %s: %s", rid, reason)
    for record in result.new_records:
        manifest.add(record)
    out_manifest = args.out_manifest or args.manifest
    manifest.taxonomy_hash = taxonomy.taxonomy_hash()
    write_manifest(manifest, out_manifest)
    elapsed = time.time() - started
    log.info(
        "pseudo-labelled %d images (%d windows) in %.1fs; %d failures",
        len(result.new_records),
        result.n_windows,
        elapsed,
        len(result.failures),
    )
    _write_run_manifest("pseudolabel", args, [args.manifest], [str(args.out_dir)], started)
    print(
        json.dumps(
            {
                "labelled": len(result.new_records),
                "failed": len(result.failures),
                "windows": result.n_windows,
                "manifest": str(out_manifest),
            }
        )
    )
    return 0


def _cmd_review_serve(args) -> int:
    taxonomy = _taxonomy(args)
    service = ReviewService(args.log)
    if args.manifest:
        enqueued = service.enqueue_qa_manifest(args.manifest)
        log.info("enqueued %d items from %s", enqueued, args.manifest)
    host, _, port = args.addr.partition(":")
    server = ReviewServer(
        service,
        taxonomy=taxonomy,
        host=host or "127.0.0.1",
        port=int(port or 0),
        ui_dir=args.ui,
        export_path=args.export,
    )
    print(json.dumps({"addr": f"{host or '127.0.0.1'}:{server.port}"}))
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    finally:
        service.close()
    return 0


def _cmd_review_decide(args) -> int:
    service = ReviewService(args.log)
    try:
        tags = [t.strip() for t in args.tags.split(",") if t.strip()] if args.tags else []
        item = service.decide(
            args.id, args.verdict, tags, note=args.note or "", duration_ms=args.duration_ms
        )
        print(json.dumps(item.to_json()))
    finally:
        service.close()
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="regenforge", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="seed for stochastic commands")
    parser.add_argument("-v", "--verbose", action="store_true")
    # The same flags are accepted after the subcommand; SUPPRESS keeps the
    # root-parsed values when they are not repeated there.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")

    # prompt
    prompt = sub.add_parser("prompt", help="generation and zero-shot prompts")
    prompt_sub = prompt.add_subparsers(dest="action", required=True)
    plan = prompt_sub.add_parser("plan", help="plan generation batches from class quotas", parents=[common])
    plan.add_argument("--quotas", required=True, help="YAML: class name -> image count")
    plan.add_argument("--taxonomy")
    plan.add_argument("--space", help="attribute space YAML (default: shipped)")
    plan.add_argument("--out", required=True)
    plan.add_argument("--batch-min", type=int, default=50)
    plan.add_argument("--batch-max", type=int, default=100)
    plan.set_defaults(func=_cmd_prompt_plan)
    zeroshot = prompt_sub.add_parser("zeroshot", help="zero-shot segmentation prompt", parents=[common])
    zeroshot.add_argument("--taxonomy")
    zeroshot.add_argument("--classes", default="full", help='"full" or comma-separated names')
    zeroshot.add_argument("--from-mask", help="restrict classes to those in this mask PNG")
    zeroshot.add_argument("--attach-pseudo-label", action="store_true")
    zeroshot.add_argument("--out")
    zeroshot.set_defaults(func=_cmd_prompt_zeroshot)

    # extract
    extract = sub.add_parser("extract", help="split raw canvases into QA'd pairs", parents=[common])
    extract.add_argument("--in", dest="in_dir", required=True)
    extract.add_argument("--out", required=True)
    extract.add_argument("--taxonomy")
    extract.add_argument("--thresholds", help="QA thresholds YAML")
    extract.add_argument("--watermark", help="corner:WxH strip to crop from every pair")
    extract.add_argument("-j", "--jobs", type=int, default=1)
    extract.set_defaults(func=_cmd_extract)

    # stats
    stats = sub.add_parser("stats", help="mask complexity and class distribution", parents=[common])
    stats.add_argument("--manifest", required=True)
    stats.add_argument("--source", choices=[s.value for s in Source])
    stats.add_argument("--accepted-only", action="store_true")
    stats.add_argument("--taxonomy")
    stats.add_argument("--out", required=True)
    stats.set_defaults(func=_cmd_stats)

    # eval
    ev = sub.add_parser("eval", help="score predictions against ground truth", parents=[common])
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--taxonomy")
    ev.add_argument("--pool", help="fold map JSONL for pooled evaluation")
    ev.add_argument(
        "--scoring",
        choices=[s.value for s in seg_eval.Scoring],
        default=seg_eval.Scoring.PRESENT_IN_GT_OR_PRED.value,
    )
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_eval)

    # distance
    dist = sub.add_parser("distance", help="FID and MMD^2 between embedding sets", parents=[common])
    dist.add_argument("--a", required=True)
    dist.add_argument("--b", required=True)
    dist.add_argument("--baseline")
    dist.add_argument("--bandwidth", type=float, default=10.0)
    dist.add_argument("--out")
    dist.set_defaults(func=_cmd_distance)

    # folds
    folds = sub.add_parser("folds", help="spatially separated cross-validation folds", parents=[common])
    folds.add_argument("--sites", required=True, help="CSV: id, lat, lon")
    folds.add_argument("--manifest", required=True)
    folds.add_argument("--taxonomy")
    folds.add_argument("--k", type=int, default=5)
    folds.add_argument("--separation-km", type=float, default=20.0)
    folds.add_argument("--out", required=True)
    folds.add_argument(
        "--pseudo-exclusion-out",
        help="also write which folds each pseudo-labelled record is far enough from",
    )
    folds.set_defaults(func=_cmd_folds)

    # mix
    mix = sub.add_parser("mix", help="multi-source batch plans and seen-pixel report")
    mix_sub = mix.add_subparsers(dest="action", required=True)
    emit = mix_sub.add_parser("emit", help="write batch plans as JSON Lines", parents=[common])
    report = mix_sub.add_parser("report", help="seen-pixel proportion table", parents=[common])
    for p in (emit, report):
        p.add_argument("--manifest", required=True)
        p.add_argument("--taxonomy")
        p.add_argument("--ratio", type=float, default=0.4)
        p.add_argument(
            "--strategy",
            choices=[s.value for s in mix_sampler.Strategy],
            default=mix_sampler.Strategy.WEIGHTED_RANDOM.value,
        )
        p.add_argument("--batch", type=int, default=16)
        p.add_argument("--with-replacement", action="store_true")
    emit.add_argument("--emit", type=int, required=True, help="number of batches")
    emit.add_argument("--out", required=True)
    emit.set_defaults(func=_cmd_mix_emit)
    report.add_argument("--batches", type=int, default=1000, help="simulated batches")
    report.add_argument("--out")
    report.set_defaults(func=_cmd_mix_report)

    # pseudolabel
    pseudo = sub.add_parser("pseudolabel", help="sliding-window pseudo-label generation", parents=[common])
    pseudo.add_argument("--manifest", required=True)
    pseudo.add_argument("--taxonomy")
    pseudo.add_argument("--classifier-cmd", help="subprocess plugin command line")
    pseudo.add_argument("--stub", help="builtin stub: constant:K | quadrant:a,b,c,d | mean:a,b")
    pseudo.add_argument("--window", type=int, default=224)
    pseudo.add_argument("--stride", type=int, default=112)
    pseudo.add_argument(
        "--pad-policy", choices=["clamp_last_window", "reflect"], default="clamp_last_window"
    )
    pseudo.add_argument("--all-sources", action="store_true")
    pseudo.add_argument("--out-dir", required=True)
    pseudo.add_argument("--out-manifest")
    pseudo.add_argument("-j", "--jobs", type=int, default=1)
    pseudo.set_defaults(func=_cmd_pseudolabel)

    # review
    review = sub.add_parser("review", help="curation service")
    review_sub = review.add_subparsers(dest="action", required=True)
    serve = review_sub.add_parser("serve", help="run the review HTTP service", parents=[common])
    serve.add_argument("--manifest", help="QA manifest to enqueue at startup")
    serve.add_argument("--log", required=True, help="append-only event log file")
    serve.add_argument("--addr", default="127.0.0.1:8765")
    serve.add_argument("--taxonomy")
    serve.add_argument("--ui", help="static UI bundle directory")
    serve.add_argument("--export", default="accepted_manifest.jsonl")
    serve.set_defaults(func=_cmd_review_serve)
    decide = review_sub.add_parser("decide", help="headless decision for scripted QA", parents=[common])
    decide.add_argument("--log", required=True)
    decide.add_argument("--id", required=True)
    decide.add_argument("--verdict", required=True, choices=["accept", "reject"])
    decide.add_argument("--tags", help="comma-separated defect tags")
    decide.add_argument("--note")
    decide.add_argument("--duration-ms", type=int)
    decide.set_defaults(func=_cmd_review_decide)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # `regenforge mix --manifest ...` is shorthand for `mix emit`.
    if "mix" in argv:
        i = argv.index("mix")
        if i + 1 >= len(argv) or argv[i + 1].startswith("-"):
            argv.insert(i + 1, "emit")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, ContractError) as e:
        print(f"regenforge {args.command}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"regenforge {args.command}: {e}", file=sys.stderr)
        return 1
    except RegenforgeError as e:
        print(f"regenforge {args.command}: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures
        log.exception("unhandled error: %s", e)
        return 2


def main() -> None:
    raise SystemExit(dispatch())
