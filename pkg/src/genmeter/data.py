"""Datasets, their file formats, and seeded synthetic samplers.

Two on-disk formats are supported:

* CSV: a header line ``dim=<d>`` or ``dim=<d>,labels``, then one row per
  point, ``d`` decimal reals optionally followed by an integer label.
* binary: magic ``GMDS1``, uint64 row count, uint32 dim, uint8 label flag,
  the points as little-endian float32 in row-major order, then int64 labels.

Both store 32-bit reals; loading returns float64 arrays holding those values
exactly, so ``load(save(x)) == x.astype(float32)`` bitwise.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, InputError
from .rng import substream

BINARY_MAGIC = b"GMDS1"


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.points),):
                raise InputError("label count differs from point count")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.points[idx], None if self.labels is None else self.labels[idx])


def as_points(data) -> np.ndarray:
    """Accept a Dataset or anything array-like; return an ``(n, d)`` float64 array."""
    if isinstance(data, Dataset):
        return data.points
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D point array, got shape {arr.shape}")
    return arr


def _f32_text(v) -> str:
    return np.format_float_positional(np.float32(v), unique=True, trim="-")


def dataset_to_csv(ds: Dataset) -> str:
    lines = [f"dim={ds.dim}" + (",labels" if ds.labels is not None else "")]
    for i, row in enumerate(ds.points):
        cells = [_f32_text(v) for v in row]
        if ds.labels is not None:
            cells.append(str(int(ds.labels[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise DataFormatError("empty file", line=1)
    head = [h.strip() for h in lines[0].split(",")]
    if not head[0].startswith("dim=") or len(head) > 2 or (len(head) == 2 and head[1] != "labels"):
        raise DataFormatError(f"malformed header {lines[0]!r}", line=1)
    try:
        dim = int(head[0][4:])
    except ValueError:
        raise DataFormatError(f"malformed header {lines[0]!r}", line=1) from None
    if dim < 1:
        raise DataFormatError("dim must be >= 1", line=1)
    has_labels = len(head) == 2
    width = dim + has_labels
    points, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise DataFormatError(f"expected {width} values, found {len(cells)}", line=lineno)
        try:
            row = [float(c) for c in cells[:dim]]
            if has_labels:
                labels.append(int(cells[dim]))
        except ValueError as exc:
            raise DataFormatError(str(exc), line=lineno) from None
        if not all(np.isfinite(row)):
            raise DataFormatError("non-finite value", line=lineno)
        points.append(row)
    pts = np.asarray(points, dtype=np.float32).astype(np.float64).reshape(-1, dim)
    return Dataset(pts, np.asarray(labels, dtype=np.int64) if has_labels else None)


def dataset_to_bytes(ds: Dataset) -> bytes:
    has_labels = ds.labels is not None
    parts = [BINARY_MAGIC, struct.pack("<QIB", len(ds), ds.dim, int(has_labels)),
             np.ascontiguousarray(ds.points, dtype="<f4").tobytes()]
    if has_labels:
        parts.append(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return b"".join(parts)


def dataset_from_bytes(data: bytes) -> Dataset:
    if data[:5] != BINARY_MAGIC:
        raise DataFormatError("not a GMDS1 dataset")
    head = struct.calcsize("<QIB")
    try:
        n, dim, has_labels = struct.unpack_from("<QIB", data, 5)
        pos = 5 + head
        pts = np.frombuffer(data, dtype="<f4", count=n * dim, offset=pos).reshape(n, dim)
        pos += 4 * n * dim
        labels = None
        if has_labels:
            labels = np.frombuffer(data, dtype="<i8", count=n, offset=pos).copy()
            pos += 8 * n
    except (struct.error, ValueError) as exc:
        raise DataFormatError(f"truncated dataset: {exc}") from exc
    if pos != len(data):
        raise DataFormatError("trailing bytes after dataset payload")
    if not np.all(np.isfinite(pts)):
        raise DataFormatError("non-finite value in dataset")
    return Dataset(pts.astype(np.float64), labels)


def save_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(dataset_to_csv(ds))
    else:
        path.write_bytes(dataset_to_bytes(ds))


def load_dataset(path) -> Dataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if raw[:5] == BINARY_MAGIC:
        return dataset_from_bytes(raw)
    return dataset_from_csv(raw.decode("utf-8"))


# --- synthetic samplers -------------------------------------------------------

FAMILIES = ("gaussian_mixture", "two_moons", "ring", "uniform_box", "uniform_ball", "swiss_roll")


@dataclass
class SyntheticSampler:
    """Seeded synthetic stand-in for ``p_data``.

    ``params`` per family:
      gaussian_mixture: means (k x d), covs (k x d x d, or scalars), weights
      two_moons: noise
      ring: k, radius, sigma
      uniform_box: low, high (scalars or length-d)
      uniform_ball: radius
      swiss_roll: noise
    """

    family: str
    dim: int = 2
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown sampler family {self.family!r}")
        if self.family in ("two_moons", "ring", "swiss_roll") and self.dim != 2:
            raise ConfigError(f"{self.family} is 2-dimensional")
        if self.family == "gaussian_mixture":
            w = np.asarray(self.params.get("weights", [1.0]), dtype=np.float64)
            if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
                raise ConfigError("mixture weights must be non-negative and sum to 1")

    def sample(self, n: int, seed) -> Dataset:
        rng = substream(seed, "sampler", self.family) if isinstance(seed, (int, np.integer)) else seed
        p = self.params
        if self.family == "gaussian_mixture":
            means = np.atleast_2d(np.asarray(p.get("means", [[0.0] * self.dim]), dtype=np.float64))
            weights = np.asarray(p.get("weights", [1.0] * len(means)), dtype=np.float64)
            covs = p.get("covs", [1.0] * len(means))
            comp = rng.choice(len(means), size=n, p=weights)
            z = rng.standard_normal((n, self.dim))
            out = np.empty((n, self.dim))
            for j in range(len(means)):
                c = np.asarray(covs[j], dtype=np.float64)
                chol = np.sqrt(c) * np.eye(self.dim) if c.ndim == 0 else np.linalg.cholesky(c)
                sel = comp == j
                out[sel] = means[j] + z[sel] @ chol.T
            return Dataset(out, comp)
        if self.family == "two_moons":
            noise = p.get("noise", 0.05)
            lab = rng.integers(0, 2, size=n)
            ang = rng.uniform(0.0, np.pi, size=n)
            x = np.where(lab == 0, np.cos(ang), 1.0 - np.cos(ang))
            y = np.where(lab == 0, np.sin(ang), 0.5 - np.sin(ang))
            pts = np.stack([x, y], axis=1) + noise * rng.standard_normal((n, 2))
            return Dataset(pts, lab)
        if self.family == "ring":
            k, radius, sigma = int(p.get("k", 8)), p.get("radius", 2.0), p.get("sigma", 0.05)
            lab = rng.integers(0, k, size=n)
            ang = 2 * np.pi * lab / k
            centres = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            return Dataset(centres + sigma * rng.standard_normal((n, 2)), lab)
        if self.family == "uniform_box":
            low, high = p.get("low", -1.0), p.get("high", 1.0)
            return Dataset(rng.uniform(low, high, size=(n, self.dim)))
        if self.family == "uniform_ball":
            radius = p.get("radius", 1.0)
            g = rng.standard_normal((n, self.dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
            return Dataset(g * r)
        noise = p.get("noise", 0.05)  # swiss_roll slice
        t = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(size=n))
        pts = np.stack([t * np.cos(t), t * np.sin(t)], axis=1) / 10.0
        return Dataset(pts + noise * rng.standard_normal((n, 2)))

    def to_dict(self) -> dict:
        return {"family": self.family, "dim": self.dim, "params": self.params}


def _row_keys(points) -> set:
    return {row.tobytes() for row in np.ascontiguousarray(points)}


def split_disjoint(sampler, n_train: int, n_test: int, seed: int, max_rounds: int = 20):
    """Independent train/test samples with no bitwise-equal rows in common."""
    train = sampler.sample(n_train, substream(seed, "split", "train"))
    test = sampler.sample(n_test, substream(seed, "split", "test"))
    train_keys = _row_keys(train.points)
    for attempt in range(max_rounds):
        clash = np.array([row.tobytes() in train_keys for row in test.points])
        if not clash.any():
            return train, test
        fresh = sampler.sample(int(clash.sum()), substream(seed, "split", "resample", attempt))
        test.points[clash] = fresh.points
        if test.labels is not None and fresh.labels is not None:
            test.labels[clash] = fresh.labels
    raise InputError("sampler keeps producing test rows that also occur in the training set")
