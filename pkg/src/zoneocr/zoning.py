"""Static-grid zoning density features, grid entropy, and the feature table."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .preprocess import Diagnostics, PreprocessConfig, preprocess_with_diagnostics
from .raster import BinaryImage, RawDataset


@dataclass(frozen=True)
class GridSpec:
    rows: int = 4
    cols: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid rows and cols must be >= 1")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """Parse ``"RxC"``, e.g. ``"4x4"``."""
        try:
            r, c = text.lower().split("x")
            return cls(int(r), int(c))
        except ValueError as exc:
            raise ValueError(f"grid must look like 4x4, got {text!r}") from exc

    def __str__(self):
        return f"{self.rows}x{self.cols}"


def zone_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    return [((i * n) // parts, ((i + 1) * n) // parts) for i in range(parts)]


def zone_densities(img: BinaryImage, grid: GridSpec = GridSpec()) -> np.ndarray:
    """Ink fraction per zone, row-major starting at the top-left zone.

    Zone boundaries are floor partitions, so every pixel belongs to exactly one zone.
    """
    h, w = img.mask.shape
    if w < grid.cols or h < grid.rows:
        raise ValueError(f"image {w}x{h} is smaller than grid {grid}")
    counts, areas = zone_counts(img, grid)
    return counts / areas


def zone_counts(img: BinaryImage, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer (ink count, pixel count) per zone."""
    h, w = img.mask.shape
    rb, cb = zone_bounds(h, grid.rows), zone_bounds(w, grid.cols)
    ink = np.empty(grid.size, dtype=np.int64)
    area = np.empty(grid.size, dtype=np.int64)
    i = 0
    for r0, r1 in rb:
        for c0, c1 in cb:
            ink[i] = img.mask[r0:r1, c0:c1].sum()
            area[i] = (r1 - r0) * (c1 - c0)
            i += 1
    return ink, area


def grid_entropy(values) -> float:
    """Shannon entropy in bits of the values normalized to sum one; 0 for an all-zero vector."""
    p = np.asarray(values, dtype=np.float64).ravel()
    if (p < 0).any():
        raise ValueError("entropy input must be non-negative")
    total = p.sum()
    if total == 0:
        return 0.0
    p = p[p > 0] / total
    p = p[p > 0]  # tiny inputs can underflow to zero after scaling
    return float(-sum(pi * math.log2(pi) for pi in p)) + 0.0


@dataclass
class FeatureTable:
    """Labeled feature vectors, one row per sample."""

    grid: GridSpec
    classes: list[tuple[int, str]]
    class_ids: np.ndarray
    sample_ids: list[str]
    features: np.ndarray
    diagnostics: Optional[list[Diagnostics]] = field(default=None, repr=False)
    preprocess: Optional[PreprocessConfig] = field(default=None, repr=False)

    def __post_init__(self):
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64).reshape(-1)
        self.features = np.asarray(self.features, dtype=np.float64).reshape(len(self.class_ids), -1)
        if self.features.shape[1] != self.grid.size:
            raise ValueError(
                f"feature width {self.features.shape[1]} does not match grid {self.grid}"
            )
        if len(self.sample_ids) != len(self.class_ids):
            raise ValueError("sample_ids and class_ids lengths differ")

    def __len__(self):
        return len(self.class_ids)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_name(self, cid: int) -> str:
        return dict(self.classes).get(cid, f"class_{cid}")

    def subset(self, idx) -> FeatureTable:
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureTable(
            self.grid,
            list(self.classes),
            self.class_ids[idx],
            [self.sample_ids[i] for i in idx],
            self.features[idx],
            preprocess=self.preprocess,
        )

    def rows(self):
        for cid, sid, vec in zip(self.class_ids, self.sample_ids, self.features):
            yield int(cid), sid, vec


def extract_all(
    ds: RawDataset,
    pcfg: PreprocessConfig = PreprocessConfig(),
    grid: GridSpec = GridSpec(),
) -> FeatureTable:
    """Preprocess every sample and compute its zone densities, in dataset order."""
    if len(ds) == 0:
        raise ValueError("dataset has no samples")
    feats = np.empty((len(ds), grid.size))
    diags = []
    for i, s in enumerate(ds.samples):
        binary, diag = preprocess_with_diagnostics(s.image, pcfg)
        feats[i] = zone_densities(binary, grid)
        diags.append(diag)
    return FeatureTable(
        grid,
        list(ds.classes),
        [s.class_id for s in ds.samples],
        [s.sample_id for s in ds.samples],
        feats,
        diagnostics=diags,
        preprocess=pcfg,
    )


# ---------------------------------------------------------------- CSV


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def features_to_csv(table: FeatureTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_id", "sample_id"] + [f"f{i}" for i in range(table.grid.size)])
    for cid, sid, vec in table.rows():
        writer.writerow([cid, sid] + [_fmt(v) for v in vec])
    return buf.getvalue()


def features_from_csv(
    text: str, grid: Optional[GridSpec] = None, classes: Optional[list[tuple[int, str]]] = None
) -> FeatureTable:
    """Parse the feature CSV.

    Without ``grid`` the grid is taken as 1xN unless N is a perfect square (then sqrt x sqrt).
    Without ``classes`` the class list is 0..max id with generated names.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty feature CSV") from None
    n = len(header) - 2
    if n < 1 or header[:2] != ["class_id", "sample_id"] or header[2:] != [f"f{i}" for i in range(n)]:
        raise ValueError(f"bad feature CSV header: {header}")
    cids, sids, rows = [], [], []
    for lineno, rec in enumerate(reader, 2):
        if not rec:
            continue
        if len(rec) != n + 2:
            raise ValueError(f"line {lineno}: expected {n + 2} fields, got {len(rec)}")
        try:
            cids.append(int(rec[0]))
            rows.append([float(v) for v in rec[2:]])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        sids.append(rec[1])
    if grid is None:
        side = math.isqrt(n)
        grid = GridSpec(side, side) if side * side == n else GridSpec(1, n)
    elif grid.size != n:
        raise ValueError(f"CSV has {n} features but grid {grid} needs {grid.size}")
    if classes is None:
        top = max(cids) if cids else -1
        classes = [(c, f"class_{c}") for c in range(top + 1)]
    known = {c for c, _ in classes}
    unknown = sorted(set(cids) - known)
    if unknown:
        raise ValueError(f"feature rows reference unknown classes {unknown}")
    return FeatureTable(grid, classes, np.array(cids, dtype=np.int64), sids,
                        np.array(rows, dtype=np.float64).reshape(len(cids), n))


def meta_sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def save_features(path: str | Path, table: FeatureTable,
                  pcfg: Optional[PreprocessConfig] = None) -> None:
    """Write the CSV plus a ``<path>.meta.json`` sidecar with grid, classes and preprocessing."""
    path = Path(path)
    path.write_text(features_to_csv(table), encoding="utf-8")
    meta = {
        "grid": str(table.grid),
        "classes": [[cid, name] for cid, name in table.classes],
        "preprocess": asdict(pcfg or table.preprocess or PreprocessConfig()),
    }
    meta_sidecar(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_features(path: str | Path, grid: Optional[GridSpec] = None) -> FeatureTable:
    path = Path(path)
    sidecar = meta_sidecar(path)
    classes, pcfg = None, None
    if sidecar.is_file():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        if grid is None and "grid" in meta:
            grid = GridSpec.parse(meta["grid"])
        if "classes" in meta:
            classes = [(int(c), str(n)) for c, n in meta["classes"]]
        if "preprocess" in meta:
            pcfg = PreprocessConfig(**meta["preprocess"])
    table = features_from_csv(path.read_text(encoding="utf-8"), grid=grid, classes=classes)
    table.preprocess = pcfg
    return table


def diagnostics_to_csv(table: FeatureTable) -> str:
    lines = ["sample_id,threshold,specks_removed,clipped"]
    for sid, d in zip(table.sample_ids, table.diagnostics or []):
        lines.append(f"{sid},{d.threshold},{d.specks_removed},{d.clipped}")
    return "\n".join(lines) + "\n"
