"""Brute-force multi-class k-nearest-neighbor classifier (Euclidean)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .preprocess import PreprocessConfig
from .zoning import FeatureTable, GridSpec, features_from_csv, features_to_csv

METRIC = "euclidean"
_CHUNK = 64


@dataclass(frozen=True)
class KnnModel:
    table: FeatureTable
    metric: str = METRIC


def knn_fit(train: FeatureTable) -> KnnModel:
    if len(train) == 0:
        raise ValueError("cannot fit KNN on an empty table")
    return KnnModel(train)


def _check_k(model: KnnModel, k: int) -> None:
    n = len(model.table)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range 1..{n}")


def _vote(dist2: np.ndarray, class_ids: np.ndarray, k: int) -> tuple[int, np.ndarray]:
    """Pick the k nearest (stable on ties) and run the tie-broken majority vote."""
    order = np.argsort(dist2, kind="stable")[:k]
    votes: dict[int, list[float]] = {}
    for i in order:
        votes.setdefault(int(class_ids[i]), []).append(math.sqrt(dist2[i]))
    # most votes, then smallest summed distance, then smallest class id
    best = min(votes, key=lambda c: (-len(votes[c]), math.fsum(votes[c]), c))
    return best, order


def _sq_dists(train: np.ndarray, q: np.ndarray) -> np.ndarray:
    return ((train - q) ** 2).sum(axis=-1)


def knn_predict(model: KnnModel, q, k: int = 1) -> tuple[int, list[int]]:
    """Return (predicted class, indices of the k stored rows nearest to ``q``)."""
    _check_k(model, k)
    q = np.asarray(q, dtype=np.float64).ravel()
    feats = model.table.features
    if q.shape[0] != feats.shape[1]:
        raise ValueError(f"query has {q.shape[0]} features, model expects {feats.shape[1]}")
    cls, order = _vote(_sq_dists(feats, q), model.table.class_ids, k)
    return cls, [int(i) for i in order]


def knn_predict_batch(model: KnnModel, queries, k: int = 1) -> np.ndarray:
    """Predicted class for every query row, in query order."""
    _check_k(model, k)
    q = queries.features if isinstance(queries, FeatureTable) else np.asarray(queries, dtype=np.float64)
    q = q.reshape(-1, model.table.features.shape[1]) if q.size else q.reshape(0, model.table.features.shape[1])
    feats = model.table.features
    if q.shape[1] != feats.shape[1]:
        raise ValueError(f"queries have {q.shape[1]} features, model expects {feats.shape[1]}")
    out = np.empty(len(q), dtype=np.int64)
    for start in range(0, len(q), _CHUNK):
        block = q[start : start + _CHUNK]
        d2 = _sq_dists(feats[None, :, :], block[:, None, :])
        for j, row in enumerate(d2):
            out[start + j] = _vote(row, model.table.class_ids, k)[0]
    return out


def save_knn_model(path: str | Path, model: KnnModel) -> None:
    """``metric=euclidean`` line, grid/classes/preprocess lines, then the stored rows as CSV."""
    classes = json.dumps([[c, n] for c, n in model.table.classes], ensure_ascii=False)
    pcfg = json.dumps(asdict(model.table.preprocess or PreprocessConfig()))
    head = f"metric={model.metric}\ngrid={model.table.grid}\nclasses={classes}\npreprocess={pcfg}\n"
    Path(path).write_text(head + features_to_csv(model.table), encoding="utf-8")


def load_knn_model(path: str | Path) -> KnnModel:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines(keepends=True)
    fields = {}
    i = 0
    while i < len(lines) and not lines[i].startswith("class_id,"):
        key, sep, value = lines[i].rstrip("\n").partition("=")
        if not sep:
            raise ValueError(f"{path}: bad header line {lines[i]!r}")
        fields[key] = value
        i += 1
    if fields.get("metric") != METRIC:
        raise ValueError(f"{path}: not a KNN model file")
    grid = GridSpec.parse(fields["grid"]) if "grid" in fields else None
    classes = None
    if "classes" in fields:
        classes = [(int(c), str(n)) for c, n in json.loads(fields["classes"])]
    table = features_from_csv("".join(lines[i:]), grid=grid, classes=classes)
    if "preprocess" in fields:
        table.preprocess = PreprocessConfig(**json.loads(fields["preprocess"]))
    return knn_fit(table)
