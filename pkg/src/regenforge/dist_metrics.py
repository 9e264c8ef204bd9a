"""Dataset-distance math over precomputed embedding vectors.

Two metrics: the Fréchet distance between Gaussian fits of two embedding
sets, and the unbiased squared maximum mean discrepancy with a Gaussian
kernel. Embedding inference is out of scope; vectors arrive via the EMB1
binary format or CSV.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError

_EMB_MAGIC = b"EMB1"


@dataclass(frozen=True)
class EmbeddingSet:
    vectors: np.ndarray  # (n, d) float
    source_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ContractError(f"embeddings must be an (n, d) matrix, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ContractError(f"embedding set {self.source_label!r} has non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class DistanceReport:
    fid: float
    cmmd: float
    relative_to_baseline: dict[str, str]


def _psd_sqrt(matrix: np.ndarray, clip_tol: float) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clipping noise eigenvalues."""
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.clip(vals, 0.0, None)
    vals[vals < clip_tol] = 0.0
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Fréchet distance between Gaussian fits of two embedding sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the cross
    square root evaluated through the symmetric product
    S_a^{1/2} S_b S_a^{1/2}, whose eigenvalues are clipped at
    1e-10 * max eigenvalue before the square root. Covariances use the
    unbiased (n-1) estimator.
    """
    if a.d != b.d:
        raise ContractError(f"dimension mismatch: {a.d} != {b.d}")
    if a.n < 2 or b.n < 2:
        raise ContractError("fid needs at least 2 samples per set to fit a covariance")
    mu_a = a.vectors.mean(axis=0)
    mu_b = b.vectors.mean(axis=0)
    cov_a = np.cov(a.vectors, rowvar=False).reshape(a.d, a.d)
    cov_b = np.cov(b.vectors, rowvar=False).reshape(b.d, b.d)

    scale = max(float(np.linalg.eigvalsh(cov_a).max()), 1.0)
    sqrt_a = _psd_sqrt(cov_a, clip_tol=1e-10 * scale)
    inner = sqrt_a @ cov_b @ sqrt_a
    inner_vals = np.linalg.eigvalsh(inner)
    inner_vals = np.clip(inner_vals, 0.0, None)
    inner_vals[inner_vals < 1e-10 * max(float(inner_vals.max()), 1.0)] = 0.0
    tr_cross = float(np.sqrt(inner_vals).sum())

    mean_term = float(np.sum((mu_a - mu_b) ** 2))
    return mean_term + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * tr_cross


def _kernel_sum(x: np.ndarray, y: np.ndarray, inv: float, drop_diagonal: bool) -> float:
    """Sum of exp(-||x_i - y_j||^2 * inv), in row blocks so memory stays O(block * n)."""
    block = max(1, int(4e6) // max(1, y.shape[0]))
    yy = np.sum(y * y, axis=1)[None, :]
    total = 0.0
    for start in range(0, x.shape[0], block):
        xs = x[start : start + block]
        sq = np.maximum(np.sum(xs * xs, axis=1)[:, None] + yy - 2.0 * (xs @ y.T), 0.0)
        k = np.exp(-sq * inv)
        if drop_diagonal:
            rows = np.arange(start, min(start + block, x.shape[0]))
            k[rows - start, rows] = 0.0
        total += float(k.sum())
    return total


def mmd_squared(a: EmbeddingSet, b: EmbeddingSet, bandwidth: float = 10.0) -> float:
    """Unbiased MMD^2 with kernel exp(-||x-y||^2 / (2 h^2)).

    The U-statistic drops diagonal terms, so the estimate can be slightly
    negative when the sets coincide in distribution.
    """
    if bandwidth <= 0:
        raise ContractError(f"bandwidth must be > 0, got {bandwidth}")
    if a.d != b.d:
        raise ContractError(f"dimension mismatch: {a.d} != {b.d}")
    m, n = a.n, b.n
    if m < 2 or n < 2:
        raise ContractError("mmd_squared needs at least 2 samples per set")
    x, y = a.vectors, b.vectors
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    term_x = _kernel_sum(x, x, inv, drop_diagonal=True) / (m * (m - 1))
    term_y = _kernel_sum(y, y, inv, drop_diagonal=True) / (n * (n - 1))
    term_xy = 2.0 * _kernel_sum(x, y, inv, drop_diagonal=False) / (m * n)
    return float(term_x + term_y - term_xy)


def relative_report(values: dict[str, float], baseline_label: str) -> dict[str, str]:
    """Percent-point deltas against a baseline, formatted like "+126 pp"."""
    if baseline_label not in values:
        raise ContractError(f"baseline {baseline_label!r} not among {sorted(values)}")
    baseline = values[baseline_label]
    if baseline == 0:
        raise ContractError("baseline value is zero; relative deltas undefined")
    out = {}
    for label, value in values.items():
        if label == baseline_label:
            continue
        delta = 100.0 * (value - baseline) / baseline
        out[label] = f"{delta:+.0f} pp"
    return out


def write_embeddings(path: str | Path, emb: EmbeddingSet) -> None:
    """EMB1 binary: magic, u64 n, u64 d (little-endian), then n*d float32 row-major."""
    with Path(path).open("wb") as f:
        f.write(_EMB_MAGIC)
        f.write(struct.pack("<QQ", emb.n, emb.d))
        f.write(np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes())


def read_embeddings(path: str | Path, source_label: str | None = None) -> EmbeddingSet:
    """Read EMB1 binary embeddings, or CSV rows of floats as a fallback."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"embedding file not found: {path}")
    label = source_label if source_label is not None else path.stem
    with path.open("rb") as f:
        head = f.read(4)
        if head == _EMB_MAGIC:
            n, d = struct.unpack("<QQ", f.read(16))
            data = np.frombuffer(f.read(n * d * 4), dtype="<f4")
            if data.size != n * d:
                raise ConfigError(f"{path}: truncated EMB1 payload")
            return EmbeddingSet(vectors=data.reshape(n, d).astype(np.float64), source_label=label)
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise ConfigError(f"{path}: neither EMB1 binary nor numeric CSV: {e}") from e
    return EmbeddingSet(vectors=arr, source_label=label)
