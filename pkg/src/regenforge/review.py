"""Human curation service: queue, leases, decisions, and export.

State is event-sourced: a single append-only log file of length-prefixed
JSON records is the only persistence, and replaying it reproduces the
materialized item states exactly. Leases are deliberately in-memory only
(a crash returns leased items to the queue, which replay agrees with).
"""

from __future__ import annotations

import io
import json
import struct
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .errors import RegenforgeError
from .manifest import (
    DatasetManifest,
    DefectTag,
    ReviewStatus,
    SampleRecord,
    Source,
    write_manifest,
)
from .taxonomy import ClassTaxonomy, SemanticMask, encode_mask

_LEN = struct.Struct(">I")

# Tags that contradict an accept decision outright.
_ACCEPT_FORBIDDEN = {DefectTag.MISSING_MASK, DefectTag.SIZE_MISMATCH}


class ReviewError(RegenforgeError):
    pass


class ValidationError(ReviewError):
    pass


class ConflictError(ReviewError):
    pass


@dataclass(frozen=True)
class ReviewItem:
    id: str
    photo_path: str
    mask_path: str
    qa: dict
    status: ReviewStatus = ReviewStatus.PENDING
    defect_tags: tuple[DefectTag, ...] = ()
    note: str = ""
    decided_at: str | None = None
    review_duration_ms: int | None = None

    @property
    def badness(self) -> float:
        """Worst QA score, used to surface likely rejects first."""
        leak = float(self.qa.get("palette_leakage_fraction", 0.0))
        unmapped = float(self.qa.get("unmapped_fraction", 0.0))
        misalign = float(self.qa.get("misalignment_score", 0.0)) / 16.0
        return max(leak, unmapped, misalign)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "photo_path": self.photo_path,
            "mask_path": self.mask_path,
            "qa": self.qa,
            "status": self.status.value,
            "defect_tags": [t.value for t in self.defect_tags],
            "note": self.note,
            "decided_at": self.decided_at,
            "review_duration_ms": self.review_duration_ms,
        }


def _read_events(path: Path) -> list[dict]:
    events = []
    if not path.exists():
        return events
    blob = path.read_bytes()
    offset = 0
    while offset + _LEN.size <= len(blob):
        (length,) = _LEN.unpack_from(blob, offset)
        start = offset + _LEN.size
        if start + length > len(blob):
            break  # truncated tail record (interrupted write); ignore it
        events.append(json.loads(blob[start : start + length].decode("utf-8")))
        offset = start + length
    return events


def replay(events: list[dict]) -> tuple[dict[str, ReviewItem], int]:
    """Materialize item states from the event sequence.

    Returns (items, qa_rejected_count). The count covers items rejected by
    automated QA before ever reaching a human.
    """
    items: dict[str, ReviewItem] = {}
    qa_rejected = 0
    for ev in events:
        kind = ev["type"]
        if kind == "enqueued":
            d = ev["item"]
            items[d["id"]] = ReviewItem(
                id=d["id"],
                photo_path=d.get("photo_path", ""),
                mask_path=d.get("mask_path", ""),
                qa=d.get("qa", {}),
            )
        elif kind == "qa_rejected":
            qa_rejected += 1
        elif kind == "decided":
            prev = items[ev["id"]]
            status = ReviewStatus.ACCEPTED if ev["verdict"] == "accept" else ReviewStatus.REJECTED
            items[ev["id"]] = replace(
                prev,
                status=status,
                defect_tags=tuple(DefectTag(t) for t in ev.get("tags", [])),
                note=ev.get("note", ""),
                decided_at=ev.get("decided_at"),
                review_duration_ms=ev.get("duration_ms"),
            )
        else:
            raise ReviewError(f"unknown event type {kind!r} in log")
    return items, qa_rejected


class ReviewService:
    """Single-writer curation state; safe for concurrent callers."""

    def __init__(self, log_path: str | Path, lease_seconds: float = 600.0, clock=time.time):
        self.log_path = Path(log_path)
        self.lease_seconds = lease_seconds
        self.clock = clock
        self._lock = threading.Lock()
        self._leases: dict[str, tuple[str, float]] = {}  # id -> (reviewer, expiry)
        self._lease_granted: dict[str, float] = {}
        events = _read_events(self.log_path)
        self._items, self._qa_rejected = replay(events)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self._log = self.log_path.open("ab")

    def close(self):
        with self._lock:
            self._log.close()

    def _append(self, event: dict) -> None:
        payload = json.dumps(event).encode("utf-8")
        self._log.write(_LEN.pack(len(payload)) + payload)
        self._log.flush()

    # -- queueing ----------------------------------------------------------

    def enqueue(self, entries: list[dict]) -> int:
        """Queue QA-manifest entries for review; auto-rejects never enter.

        Duplicate ids are skipped. Returns the number actually enqueued.
        """
        count = 0
        with self._lock:
            for entry in entries:
                item_id = entry["id"]
                if entry.get("verdict") == "auto_reject":
                    if item_id not in self._items:
                        self._append({"type": "qa_rejected", "id": item_id})
                        self._qa_rejected += 1
                    continue
                if item_id in self._items:
                    continue
                qa = {
                    k: entry[k]
                    for k in (
                        "verdict",
                        "palette_leakage_fraction",
                        "unmapped_fraction",
                        "misalignment_score",
                        "suggested_tags",
                        "watermark_cropped",
                    )
                    if k in entry
                }
                item = {
                    "id": item_id,
                    "photo_path": entry.get("photo_path", ""),
                    "mask_path": entry.get("mask_path", ""),
                    "qa": qa,
                }
                self._append({"type": "enqueued", "item": item})
                self._items[item_id] = ReviewItem(
                    id=item_id,
                    photo_path=item["photo_path"],
                    mask_path=item["mask_path"],
                    qa=qa,
                )
                count += 1
        return count

    def enqueue_qa_manifest(self, path: str | Path) -> int:
        entries = []
        with Path(path).open(encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
        return self.enqueue(entries)

    # -- review loop -------------------------------------------------------

    def next(self, reviewer: str = "default") -> ReviewItem | None:
        """Lease the worst-scoring pending item; None when the queue is empty."""
        now = self.clock()
        with self._lock:
            candidates = [
                item
                for item in self._items.values()
                if item.status is ReviewStatus.PENDING and not self._leased(item.id, now)
            ]
            if not candidates:
                return None
            best = max(candidates, key=lambda i: (i.badness, i.id))
            self._leases[best.id] = (reviewer, now + self.lease_seconds)
            self._lease_granted[best.id] = now
            return best

    def _leased(self, item_id: str, now: float) -> bool:
        lease = self._leases.get(item_id)
        return lease is not None and lease[1] > now

    def decide(
        self,
        item_id: str,
        verdict: str,
        tags: list[DefectTag | str] | None = None,
        note: str = "",
        duration_ms: int | None = None,
        reviewer: str = "default",
    ) -> ReviewItem:
        if verdict not in ("accept", "reject"):
            raise ValidationError(f"verdict must be accept or reject, got {verdict!r}")
        parsed = tuple(DefectTag(t) for t in (tags or []))
        if verdict == "reject" and not parsed:
            raise ValidationError("a reject decision needs at least one defect tag")
        if verdict == "accept" and set(parsed) & _ACCEPT_FORBIDDEN:
            raise ValidationError(
                "accepted items cannot carry missing_mask or size_mismatch tags"
            )
        now = self.clock()
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise KeyError(item_id)
            if item.status is not ReviewStatus.PENDING:
                raise ConflictError(f"item {item_id} already {item.status.value}")
            lease = self._leases.get(item_id)
            if lease is not None and lease[1] > now and lease[0] != reviewer:
                raise ConflictError(f"item {item_id} is leased to another reviewer")
            if duration_ms is None and item_id in self._lease_granted:
                duration_ms = int((now - self._lease_granted[item_id]) * 1000)
            event = {
                "type": "decided",
                "id": item_id,
                "verdict": verdict,
                "tags": [t.value for t in parsed],
                "note": note,
                "duration_ms": duration_ms,
                "decided_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            }
            self._append(event)
            status = ReviewStatus.ACCEPTED if verdict == "accept" else ReviewStatus.REJECTED
            updated = replace(
                item,
                status=status,
                defect_tags=parsed,
                note=note,
                decided_at=event["decided_at"],
                review_duration_ms=duration_ms,
            )
            self._items[item_id] = updated
            self._leases.pop(item_id, None)
            self._lease_granted.pop(item_id, None)
            return updated

    # -- reporting ---------------------------------------------------------

    def items(self) -> dict[str, ReviewItem]:
        with self._lock:
            return dict(self._items)

    def stats(self) -> dict:
        with self._lock:
            items = list(self._items.values())
            qa_rejected = self._qa_rejected
        accepted = sum(1 for i in items if i.status is ReviewStatus.ACCEPTED)
        rejected = sum(1 for i in items if i.status is ReviewStatus.REJECTED)
        pending = sum(1 for i in items if i.status is ReviewStatus.PENDING)
        decided = accepted + rejected
        durations = [
            i.review_duration_ms for i in items if i.review_duration_ms is not None
        ]
        return {
            "pending": pending,
            "accepted": accepted,
            "rejected": rejected,
            "decided": decided,
            "qa_rejected": qa_rejected,
            "mean_duration_ms": (sum(durations) / len(durations)) if durations else None,
            # Two denominators: human decisions only, and everything QA saw.
            "acceptance_rate_reviewed": (100.0 * accepted / decided) if decided else 0.0,
            "acceptance_rate_overall": (
                100.0 * accepted / (decided + qa_rejected) if decided + qa_rejected else 0.0
            ),
        }

    def export_accepted(self, out_path: str | Path) -> int:
        """Write the accepted items as a synthetic-source manifest; returns count."""
        with self._lock:
            accepted = sorted(
                (i for i in self._items.values() if i.status is ReviewStatus.ACCEPTED),
                key=lambda i: i.id,
            )
        records = [
            SampleRecord(
                id=i.id,
                source=Source.SYNTHETIC,
                image_path=i.photo_path,
                mask_path=i.mask_path,
                review_status=ReviewStatus.ACCEPTED,
            )
            for i in accepted
        ]
        write_manifest(DatasetManifest(records=records), out_path)
        return len(records)


# -- HTTP API ----------------------------------------------------------------


class ReviewServer:
    """Serves the curation API (and optionally the static UI bundle)."""

    def __init__(
        self,
        service: ReviewService,
        taxonomy: ClassTaxonomy | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir: str | Path | None = None,
        export_path: str | Path | None = None,
    ):
        self.service = service
        self.taxonomy = taxonomy
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.export_path = Path(export_path) if export_path else Path("accepted_manifest.jsonl")
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.port = self.httpd.server_address[1]

    def serve_forever(self):
        self.httpd.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def _item_payload(item: ReviewItem) -> dict:
    d = item.to_json()
    d["photo_url"] = f"/api/items/{item.id}/photo"
    d["mask_url"] = f"/api/items/{item.id}/mask"
    d["overlay_url"] = f"/api/items/{item.id}/overlay"
    return d


def _make_handler(server: ReviewServer):
    service = server.service

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, status: int, payload: dict | list) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error_json(self, status: int, message: str) -> None:
            self._send_json(status, {"error": message})

        def _send_png(self, data: bytes) -> None:
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            if length == 0:
                return {}
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def do_GET(self):
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            try:
                if parsed.path == "/api/items/next":
                    item = service.next()
                    if item is None:
                        self.send_response(204)
                        self.send_header("Content-Length", "0")
                        self.end_headers()
                        return
                    self._send_json(200, _item_payload(item))
                elif len(parts) == 4 and parts[:2] == ["api", "items"]:
                    self._item_asset(parts[2], parts[3], parsed)
                elif parsed.path == "/api/stats":
                    self._send_json(200, service.stats())
                elif parsed.path == "/taxonomy.json":
                    self._taxonomy_json()
                else:
                    self._static(parsed.path)
            except KeyError:
                self._send_error_json(404, "no such item")
            except BrokenPipeError:
                pass

        def _item_asset(self, item_id: str, asset: str, parsed):
            item = service.items().get(item_id)
            if item is None:
                raise KeyError(item_id)
            if asset == "photo":
                self._send_png(Path(item.photo_path).read_bytes())
            elif asset == "mask":
                self._send_png(Path(item.mask_path).read_bytes())
            elif asset == "overlay":
                if server.taxonomy is None:
                    self._send_error_json(400, "server started without a taxonomy")
                    return
                query = parse_qs(parsed.query)
                try:
                    alpha = float(query.get("alpha", ["0.5"])[0])
                except ValueError:
                    self._send_error_json(400, "alpha must be a number")
                    return
                alpha = min(1.0, max(0.0, alpha))
                photo = np.asarray(Image.open(item.photo_path).convert("RGB"), dtype=np.float64)
                mask = SemanticMask.load_png(item.mask_path, server.taxonomy.ignore_index)
                colours = encode_mask(mask, server.taxonomy).astype(np.float64)
                blend = ((1 - alpha) * photo + alpha * colours).round().astype(np.uint8)
                buf = io.BytesIO()
                Image.fromarray(blend).save(buf, format="PNG")
                self._send_png(buf.getvalue())
            else:
                raise KeyError(asset)

        def _taxonomy_json(self):
            if server.taxonomy is None:
                self._send_error_json(404, "server started without a taxonomy")
                return
            payload = {
                "ignore_index": server.taxonomy.ignore_index,
                "classes": [
                    {"id": c.id, "name": c.name, "rank": c.rank.value, "colour": list(c.colour)}
                    for c in server.taxonomy.classes
                ],
            }
            self._send_json(200, payload)

        def _static(self, path: str):
            if server.ui_dir is None:
                self._send_error_json(404, "not found")
                return
            rel = "index.html" if path in ("", "/") else path.lstrip("/")
            target = (server.ui_dir / rel).resolve()
            if not str(target).startswith(str(server.ui_dir.resolve())) or not target.is_file():
                self._send_error_json(404, "not found")
                return
            types = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".png": "image/png",
            }
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", types.get(target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            try:
                if len(parts) == 4 and parts[:2] == ["api", "items"] and parts[3] == "decision":
                    body = self._read_body()
                    item = service.decide(
                        parts[2],
                        verdict=body.get("verdict", ""),
                        tags=body.get("tags", []),
                        note=body.get("note", ""),
                        duration_ms=body.get("duration_ms"),
                        reviewer=body.get("reviewer", "default"),
                    )
                    self._send_json(200, _item_payload(item))
                elif parsed.path == "/api/export":
                    body = self._read_body()
                    out = body.get("out_path") or str(server.export_path)
                    count = service.export_accepted(out)
                    stats = service.stats()
                    self._send_json(200, {"count": count, "out_path": out, "stats": stats})
                else:
                    self._send_error_json(404, "not found")
            except KeyError:
                self._send_error_json(404, "no such item")
            except ValidationError as e:
                self._send_error_json(400, str(e))
            except ConflictError as e:
                self._send_error_json(409, str(e))
            except ValueError as e:
                self._send_error_json(400, str(e))
            except BrokenPipeError:
                pass

    return Handler
