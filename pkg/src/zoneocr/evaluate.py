"""Stratified splitting, accuracy/confusion reports and the parameter sweeps."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .knn import knn_fit, knn_predict_batch
from .mlp import TrainHyperparams, TrainingTrace, mlp_init, mlp_predict_batch, mlp_train
from .zoning import FeatureTable

DEFAULT_FRACTIONS = (0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80)
DEFAULT_KS = (1, 3, 5, 9, 15)
DEFAULT_EPOCHS = (10, 100, 500)

# fraction * count is floored; the slack keeps e.g. (2/3) * 102 from landing on 67.999...
_FLOOR_SLACK = 1e-9


def split_sizes(count: int, train_fraction: float) -> tuple[int, int]:
    n_train = math.floor(train_fraction * count + _FLOOR_SLACK)
    n_train = min(max(n_train, 1), count - 1)
    return n_train, count - n_train


def stratified_split(
    table: FeatureTable, train_fraction: float, seed: int = 42
) -> tuple[FeatureTable, FeatureTable]:
    """Per class: shuffle with a seeded generator, first floor(fraction * count) rows train.

    Both halves keep the input row order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cid in np.unique(table.class_ids):
        rows = np.flatnonzero(table.class_ids == cid)
        if rows.size < 2:
            raise ValueError(f"class {cid} has {rows.size} sample(s); at least 2 are needed to split")
        n_train, _ = split_sizes(rows.size, train_fraction)
        shuffled = rows[rng.permutation(rows.size)]
        train_idx.append(shuffled[:n_train])
        test_idx.append(shuffled[n_train:])
    return (
        table.subset(np.sort(np.concatenate(train_idx))),
        table.subset(np.sort(np.concatenate(test_idx))),
    )


@dataclass
class EvalReport:
    overall_accuracy: float
    per_class_accuracy: list[float]
    confusion: np.ndarray
    n_train: int
    n_test: int
    elapsed_train: float = 0.0
    elapsed_test: float = 0.0

    def to_dict(self, timings: bool = True) -> dict:
        doc = {
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "confusion": self.confusion.tolist(),
            "counts": {"n_train": self.n_train, "n_test": self.n_test},
        }
        if timings:
            doc["timings"] = {
                "elapsed_train": round(self.elapsed_train, 3),
                "elapsed_test": round(self.elapsed_test, 3),
            }
        return doc

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2) + "\n"


def make_report(
    true_ids, predicted_ids, n_classes: int, n_train: int = 0,
    elapsed_train: float = 0.0, elapsed_test: float = 0.0,
) -> EvalReport:
    true_ids = np.asarray(true_ids, dtype=np.int64)
    predicted_ids = np.asarray(predicted_ids, dtype=np.int64)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (true_ids, predicted_ids), 1)
    n_test = int(confusion.sum())
    correct = int(np.trace(confusion))
    row_sums = confusion.sum(axis=1)
    per_class = [
        float(confusion[c, c] / row_sums[c]) if row_sums[c] else 0.0 for c in range(n_classes)
    ]
    return EvalReport(
        overall_accuracy=correct / n_test if n_test else 0.0,
        per_class_accuracy=per_class,
        confusion=confusion,
        n_train=n_train,
        n_test=n_test,
        elapsed_train=elapsed_train,
        elapsed_test=elapsed_test,
    )


@dataclass
class SweepCurve:
    points: list[tuple[float, float, float]] = field(default_factory=list)

    def add(self, x: float, accuracy: float, seconds: float) -> None:
        if self.points and not x > self.points[-1][0]:
            raise ValueError("sweep x values must be strictly increasing")
        self.points.append((x, accuracy, seconds))

    @property
    def xs(self):
        return [p[0] for p in self.points]

    @property
    def accuracies(self):
        return [p[1] for p in self.points]

    @property
    def seconds(self):
        return [p[2] for p in self.points]

    def to_csv(self) -> str:
        lines = ["x,accuracy,seconds"]
        lines += [f"{x:g},{acc!r},{sec:.3f}" for x, acc, sec in self.points]
        return "\n".join(lines) + "\n"


def evaluate_knn_split(train: FeatureTable, test: FeatureTable, k: int) -> EvalReport:
    t0 = time.perf_counter()
    model = knn_fit(train)
    t1 = time.perf_counter()
    predicted = knn_predict_batch(model, test, k)
    t2 = time.perf_counter()
    return make_report(test.class_ids, predicted, train.n_classes, len(train), t1 - t0, t2 - t1)


def evaluate_knn(table: FeatureTable, k: int = 1, train_fraction: float = 2 / 3, seed: int = 42) -> EvalReport:
    train, test = stratified_split(table, train_fraction, seed)
    return evaluate_knn_split(train, test, k)


def _train_mlp(train: FeatureTable, hp: TrainHyperparams, seed: int, on_epoch=None):
    model = mlp_init(hp.h1, hp.h2, seed, n_in=train.grid.size, n_out=train.n_classes)
    return mlp_train(model, train, hp, on_epoch=on_epoch)


def evaluate_mlp(
    table: FeatureTable, hp: TrainHyperparams = TrainHyperparams(),
    train_fraction: float = 2 / 3, seed: int = 42, return_model: bool = False,
):
    """Split, train a fresh network (init seed = ``seed``), score the test half.

    Returns (report, trace), plus the trained model when ``return_model`` is set.
    """
    train, test = stratified_split(table, train_fraction, seed)
    t0 = time.perf_counter()
    model, trace = _train_mlp(train, hp, seed)
    t1 = time.perf_counter()
    predicted = mlp_predict_batch(model, test.features)
    t2 = time.perf_counter()
    report = make_report(test.class_ids, predicted, table.n_classes, len(train), t1 - t0, t2 - t1)
    return (report, trace, model) if return_model else (report, trace)


def sweep_k(table: FeatureTable, ks=DEFAULT_KS, train_fraction: float = 2 / 3, seed: int = 42) -> SweepCurve:
    """Accuracy per k, all on one shared split."""
    ks = list(ks)
    if not ks:
        raise ValueError("ks must not be empty")
    train, test = stratified_split(table, train_fraction, seed)
    curve = SweepCurve()
    for k in ks:
        r = evaluate_knn_split(train, test, k)
        curve.add(k, r.overall_accuracy, r.elapsed_train + r.elapsed_test)
    return curve


def _epoch_durations(trace: TrainingTrace) -> np.ndarray:
    return np.diff([0.0] + [r.seconds for r in trace.records])


def sweep_split(
    table: FeatureTable, fractions=DEFAULT_FRACTIONS, hp: TrainHyperparams = TrainHyperparams(),
    seed: int = 42, k: int = 1, timing_repeats: int = 1,
) -> tuple[SweepCurve, SweepCurve]:
    """(knn curve, mlp curve) over train fractions; MLP seconds are training time only.

    With ``timing_repeats`` > 1 every MLP is trained that many times in interleaved
    rounds over all fractions. Training is deterministic, so every repeat does the
    same work; the reported time is the fastest setup phase plus, for each epoch, the
    fastest wall-clock duration seen for that epoch. This filters bursts of scheduler
    noise that would otherwise swamp the difference between adjacent fractions.
    """
    if timing_repeats < 1:
        raise ValueError("timing_repeats must be >= 1")
    fractions = list(fractions)
    splits = [stratified_split(table, frac, seed) for frac in fractions]
    setup = [math.inf] * len(fractions)
    epoch_best = [np.full(hp.epochs, math.inf) for _ in fractions]
    mlp_acc = [0.0] * len(fractions)
    for round_no in range(timing_repeats):
        for i, (train, test) in enumerate(splits):
            t0 = time.perf_counter()
            model, trace = _train_mlp(train, hp, seed)
            elapsed = time.perf_counter() - t0
            setup[i] = min(setup[i], elapsed - trace.records[-1].seconds)
            epoch_best[i] = np.minimum(epoch_best[i], _epoch_durations(trace))
            if round_no == 0:
                predicted = mlp_predict_batch(model, test.features)
                mlp_acc[i] = make_report(test.class_ids, predicted, table.n_classes).overall_accuracy
    knn_curve, mlp_curve = SweepCurve(), SweepCurve()
    for i, (frac, (train, test)) in enumerate(zip(fractions, splits)):
        r = evaluate_knn_split(train, test, k)
        knn_curve.add(frac, r.overall_accuracy, r.elapsed_train + r.elapsed_test)
        mlp_curve.add(frac, mlp_acc[i], setup[i] + float(epoch_best[i].sum()))
    return knn_curve, mlp_curve


def sweep_epochs(
    table: FeatureTable, epoch_list=DEFAULT_EPOCHS, hp: TrainHyperparams = TrainHyperparams(),
    train_fraction: float = 2 / 3, seed: int = 42,
) -> tuple[SweepCurve, TrainingTrace]:
    """Train once to the largest epoch count, scoring the test half at each listed epoch."""
    epochs = list(epoch_list)
    if not epochs or any(b <= a for a, b in zip(epochs, epochs[1:])) or epochs[0] < 1:
        raise ValueError("epoch_list must be non-empty, positive and strictly ascending")
    train, test = stratified_split(table, train_fraction, seed)
    wanted = set(epochs)
    scores: dict[int, float] = {}

    def snapshot(epoch, model):
        if epoch in wanted:
            predicted = mlp_predict_batch(model, test.features)
            scores[epoch] = make_report(test.class_ids, predicted, table.n_classes).overall_accuracy

    run_hp = replace(hp, epochs=epochs[-1])
    _, trace = _train_mlp(train, run_hp, seed, on_epoch=snapshot)
    curve = SweepCurve()
    for e in epochs:
        curve.add(e, scores[e], trace.records[e - 1].seconds)
    return curve, trace
