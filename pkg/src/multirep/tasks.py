"""Method naming, program classification and unsupervised clone detection."""
from __future__ import annotations

import csv
import logging
import math
import random
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import Sample, Vocabularies, natural_key
from .neural import (
    AdamState, Model, ModelConfig, NumericFault, adam_step, backward, batch_loss, forward, iter_batches,
    save_checkpoint,
)
from .paths import ExtractionLimits, PathKind

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class MethodNamingMetrics:
    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def subtoken_metrics(predicted: Sequence[str], actual: Sequence[str]) -> MethodNamingMetrics:
    """Micro-averaged precision/recall over ``|``-separated subtokens, with
    multiset intersection per sample."""
    tp = n_pred = n_true = 0
    for p, t in zip(predicted, actual, strict=True):
        ps, ts = Counter(x for x in p.split("|") if x), Counter(x for x in t.split("|") if x)
        tp += sum((ps & ts).values())
        n_pred += sum(ps.values())
        n_true += sum(ts.values())
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_true if n_true else 0.0
    return MethodNamingMetrics(precision, recall, f1_score(precision, recall))


def predict_labels(model: Model, samples: Sequence[Sample], vocabs: Vocabularies, limits: ExtractionLimits,
                   batch_size: int = 256) -> list[str]:
    out: list[str] = []
    for batch in iter_batches(samples, vocabs, model.config.kinds, batch_size, limits):
        out += [vocabs.labels.itos[i] for i in np.argmax(forward(model, batch).probs, axis=1)]
    return out


def evaluate_method_naming(model: Model, samples: Sequence[Sample], vocabs: Vocabularies,
                           limits: ExtractionLimits = ExtractionLimits()) -> MethodNamingMetrics:
    return subtoken_metrics(predict_labels(model, samples, vocabs, limits), [s.label for s in samples])


@dataclass
class ClassificationReport:
    accuracy: float
    confusion: Counter = field(default_factory=Counter)  # (true, predicted) -> count

    def confusion_csv(self) -> str:
        rows = ["true,predicted,count"] + [f"{t},{p},{c}" for (t, p), c in
                                           sorted(self.confusion.items(), key=lambda kv: (natural_key(kv[0][0]),
                                                                                          natural_key(kv[0][1])))]
        return "\n".join(rows) + "\n"


def classification_report(predicted: Sequence[str], actual: Sequence[str]) -> ClassificationReport:
    confusion = Counter(zip(actual, predicted, strict=True))
    correct = sum(c for (t, p), c in confusion.items() if t == p)
    return ClassificationReport(correct / len(actual) if actual else 0.0, confusion)


def evaluate_classification(model: Model, samples: Sequence[Sample], vocabs: Vocabularies,
                            limits: ExtractionLimits = ExtractionLimits()) -> ClassificationReport:
    return classification_report(predict_labels(model, samples, vocabs, limits), [s.label for s in samples])


# ---------------------------------------------------------------------------
# Training

@dataclass(frozen=True)
class TrainConfig:
    kinds: tuple[PathKind, ...] = (PathKind.AST, PathKind.CFG, PathKind.PDG)
    task: str = "file_level"
    dim: int = 128
    dropout: float = 0.25
    lr: float = 1e-3
    batch_size: int = 1024
    epochs: int = 50
    patience: int = 5
    seed: int = 0
    dtype: str = "float64"


@dataclass
class TrainResult:
    model: Model
    best_epoch: int
    best_metric: float
    history: list[dict] = field(default_factory=list)


def _metric(task: str, model: Model, samples: Sequence[Sample], vocabs: Vocabularies,
            limits: ExtractionLimits) -> float:
    if task == "method_level":
        return evaluate_method_naming(model, samples, vocabs, limits).f1
    return evaluate_classification(model, samples, vocabs, limits).accuracy


def _log_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(labels)), labels].sum())


def _mean_loss(model: Model, samples: Sequence[Sample], vocabs: Vocabularies, limits: ExtractionLimits) -> float:
    """Mean cross-entropy over samples whose label is in the vocabulary."""
    total, n = 0.0, 0
    for batch in iter_batches(samples, vocabs, model.config.kinds, 256, limits):
        known = batch.labels >= 0
        if known.any():
            total += _log_loss(forward(model, batch).logits[known], batch.labels[known])
            n += int(known.sum())
    return total / n if n else float("nan")


def train_task(config: TrainConfig, train: Sequence[Sample], validation: Sequence[Sample], vocabs: Vocabularies,
               limits: ExtractionLimits = ExtractionLimits(), log_path: Optional[Path | str] = None,
               checkpoint_path: Optional[Path | str] = None,
               on_epoch: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Shuffled mini-batch Adam with validation after every epoch.

    The parameters with the best validation metric are kept (and saved to
    ``checkpoint_path``); training stops after ``patience`` epochs without
    improvement. A numeric fault aborts training but leaves the last good
    checkpoint on disk.
    """
    usable = [s for s in train if s.label in vocabs.labels]
    if len(usable) < len(train):
        log.warning("%d training samples have labels outside the label vocabulary", len(train) - len(usable))
    if not usable:
        raise ValueError("no trainable samples")
    model = Model(ModelConfig(len(vocabs.labels), len(vocabs.tokens), {k: len(v) for k, v in vocabs.paths.items()},
                              config.dim, config.kinds, config.dropout, config.dtype, config.seed))
    state = AdamState()
    order_rng = random.Random(config.seed)
    val_set = validation if validation else usable
    best = TrainResult(model.copy(), 0, -math.inf)
    history: list[dict] = []
    log_file = open(log_path, "w", encoding="utf-8", newline="") if log_path else None
    writer = csv.writer(log_file, lineterminator="\n") if log_file else None
    if writer:
        writer.writerow(["epoch", "split", "loss", "metric", "seconds"])
    stale = 0
    try:
        for epoch in range(1, config.epochs + 1):
            started = time.perf_counter()
            order = list(range(len(usable)))
            order_rng.shuffle(order)
            total = 0.0
            for batch in iter_batches(usable, vocabs, config.kinds, config.batch_size, limits, order):
                result = forward(model, batch, training=True)
                loss_value = batch_loss(result, batch.labels)
                if not math.isfinite(loss_value):
                    raise NumericFault(f"non-finite training loss at epoch {epoch}")
                grads = backward(model, batch, result)
                adam_step(model.params, grads, state, lr=config.lr)
                total += loss_value * len(batch)
            train_seconds = time.perf_counter() - started
            train_loss = total / len(usable)
            started = time.perf_counter()
            val_loss = _mean_loss(model, val_set, vocabs, limits)
            val_metric = _metric(config.task, model, val_set, vocabs, limits)
            val_seconds = time.perf_counter() - started
            rows = [
                {"epoch": epoch, "split": "train", "loss": train_loss, "metric": float("nan"), "seconds": train_seconds},
                {"epoch": epoch, "split": "validation", "loss": val_loss, "metric": val_metric, "seconds": val_seconds},
            ]
            for row in rows:
                history.append(row)
                if writer:
                    writer.writerow([row["epoch"], row["split"], f"{row['loss']:.6f}", f"{row['metric']:.6f}",
                                     f"{row['seconds']:.3f}"])
                if on_epoch:
                    on_epoch(row)
            if log_file:
                log_file.flush()
            if val_metric > best.best_metric:
                best = TrainResult(model.copy(), epoch, val_metric)
                stale = 0
                if checkpoint_path:
                    save_checkpoint(best.model, checkpoint_path, vocabs.digest(), {"epoch": epoch})
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("early stop after epoch %d (best epoch %d)", epoch, best.best_epoch)
                    break
    finally:
        if log_file:
            log_file.close()
    best.history = history
    return best


# ---------------------------------------------------------------------------
# Code vectors

@dataclass
class CodeVectorStore:
    ids: list[str]
    labels: list[str]
    vectors: np.ndarray  # (count, d)

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("code vector ids must be unique")
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.ids) or len(self.labels) != len(self.ids):
            raise ValueError("one vector and one label per id required")
        self._index = {k: i for i, k in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector(self, sample_id: str) -> np.ndarray:
        return self.vectors[self._index[sample_id]]

    def label(self, sample_id: str) -> str:
        return self.labels[self._index[sample_id]]

    def dumps(self) -> str:
        lines = [f"{self.dim}\t{len(self)}"]
        for sid, label, vec in zip(self.ids, self.labels, self.vectors):
            lines.append(f"{sid}\t{label}\t" + " ".join(repr(float(x)) for x in vec))
        return "\n".join(lines) + "\n"

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "CodeVectorStore":
        lines = text.rstrip("\n").split("\n")
        dim, count = (int(x) for x in lines[0].split("\t"))
        ids, labels, rows = [], [], []
        for line in lines[1:]:
            sid, label, values = line.split("\t")
            vec = [float(x) for x in values.split(" ")] if values else []
            if len(vec) != dim:
                raise ValueError(f"vector for {sid!r} has width {len(vec)}, expected {dim}")
            ids.append(sid)
            labels.append(label)
            rows.append(vec)
        if len(ids) != count:
            raise ValueError(f"header announces {count} vectors, found {len(ids)}")
        return cls(ids, labels, np.array(rows, dtype=np.float64).reshape(count, dim))

    @classmethod
    def load(cls, path: Path | str) -> "CodeVectorStore":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def export_code_vectors(model: Model, samples: Sequence[Sample], vocabs: Vocabularies,
                        ids: Optional[Sequence[str]] = None, limits: ExtractionLimits = ExtractionLimits(),
                        batch_size: int = 256) -> CodeVectorStore:
    """Inference-mode code vectors (no dropout) for every sample."""
    ids = list(ids) if ids is not None else [str(i) for i in range(len(samples))]
    chunks = [forward(model, b).code_vectors
              for b in iter_batches(samples, vocabs, model.config.kinds, batch_size, limits)]
    vectors = np.concatenate(chunks).astype(np.float64) if chunks else np.zeros((0, model.config.code_dim))
    return CodeVectorStore(ids, [s.label for s in samples], vectors)


# ---------------------------------------------------------------------------
# Clone detection

class InsufficientPairs(UserWarning):
    pass


class ZeroVector(ValueError):
    pass


@dataclass
class ClonePair:
    id_a: str
    id_b: str
    ground_truth: int
    similarity: Optional[float] = None

    def __post_init__(self) -> None:
        if self.id_a == self.id_b:
            raise ValueError("a clone pair needs two distinct samples")


@dataclass(frozen=True)
class ClonePreset:
    n_classes: int
    n_true: int
    n_false: int


CLONE_PRESETS = {
    "desk": ClonePreset(5, 2000, 2000),
    "paper-ojclone": ClonePreset(15, 50000, 50000),
}


def _draw_pairs(n: int, total: int, enumerate_all: Callable[[], list], draw_one: Callable[[], tuple],
                rng: random.Random) -> list[tuple[int, int]]:
    if n >= total or total <= 4 * n or total <= 200_000:
        population = enumerate_all()
        return [population[i] for i in sorted(rng.sample(range(len(population)), min(n, len(population))))]
    chosen: set = set()
    out = []
    while len(out) < n:
        pair = draw_one()
        if pair not in chosen:
            chosen.add(pair)
            out.append(pair)
    return sorted(out)


def sample_clone_pairs(store: CodeVectorStore, n_classes: int = 15, n_true: int = 50000, n_false: int = 50000,
                       seed: int = 0) -> list[ClonePair]:
    """Same-class (clone) and cross-class (non-clone) pairs drawn uniformly
    without replacement from the first ``n_classes`` labels in natural order.

    When a request exceeds the available pairs, both counts shrink by the
    same factor and an ``InsufficientPairs`` warning reports the actual counts.
    """
    classes = sorted(set(store.labels), key=natural_key)
    if len(classes) < n_classes:
        raise ValueError(f"store has {len(classes)} classes; {n_classes} requested")
    classes = classes[:n_classes]
    members = {c: [i for i, l in enumerate(store.labels) if l == c] for c in classes}
    pool = [i for c in classes for i in members[c]]
    sizes = [len(members[c]) for c in classes]
    total_true = sum(n * (n - 1) // 2 for n in sizes)
    total_false = (len(pool) ** 2 - sum(n * n for n in sizes)) // 2
    scale = min(1.0, total_true / n_true if n_true else 1.0, total_false / n_false if n_false else 1.0)
    want_true, want_false = int(n_true * scale), int(n_false * scale)
    if scale < 1.0:
        warnings.warn(f"only {total_true} clone and {total_false} non-clone pairs available; "
                      f"sampling {want_true} + {want_false}", InsufficientPairs, stacklevel=2)
    rng = random.Random(seed)
    label_of = {i: store.labels[i] for i in pool}

    def all_true():
        return [(a, b) for c in classes for k, a in enumerate(members[c]) for b in members[c][k + 1:]]

    def all_false():
        return [(a, b) for k, a in enumerate(sorted(pool)) for b in sorted(pool)[k + 1:] if label_of[a] != label_of[b]]

    weights = [n * (n - 1) / 2 for n in sizes]

    def one_true():
        c = rng.choices(classes, weights=weights)[0]
        a, b = rng.sample(members[c], 2)
        return (min(a, b), max(a, b))

    def one_false():
        while True:
            a, b = rng.sample(pool, 2)
            if label_of[a] != label_of[b]:
                return (min(a, b), max(a, b))

    true_pairs = _draw_pairs(want_true, total_true, all_true, one_true, rng)
    false_pairs = _draw_pairs(want_false, total_false, all_false, one_false, rng)
    return ([ClonePair(store.ids[a], store.ids[b], 1) for a, b in true_pairs]
            + [ClonePair(store.ids[a], store.ids[b], 0) for a, b in false_pairs])


def cosine_similarity(v1, v2) -> float:
    v1, v2 = np.asarray(v1, dtype=np.float64), np.asarray(v2, dtype=np.float64)
    n1, n2 = math.sqrt(float(v1 @ v1)), math.sqrt(float(v2 @ v2))
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return max(-1.0, min(1.0, float(v1 @ v2) / (n1 * n2)))


def score_pairs(store: CodeVectorStore, pairs: Sequence[ClonePair]) -> list[ClonePair]:
    for p in pairs:
        p.similarity = cosine_similarity(store.vector(p.id_a), store.vector(p.id_b))
    return list(pairs)


@dataclass(frozen=True)
class CloneResult:
    predictions: tuple[int, ...]
    precision: float
    recall: float
    f1: float


def _prf(predicted: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    tp = int(np.sum(predicted & truth))
    n_pred, n_true = int(predicted.sum()), int(truth.sum())
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_true if n_true else 0.0
    return precision, recall, f1_score(precision, recall)


def _arrays(pairs: Sequence[ClonePair]) -> tuple[np.ndarray, np.ndarray]:
    if any(p.similarity is None for p in pairs):
        raise ValueError("pairs must be scored before detection")
    sims = np.array([p.similarity for p in pairs], dtype=np.float64)
    truth = np.array([p.ground_truth == 1 for p in pairs], dtype=bool)
    return sims, truth


def detect_clones(pairs: Sequence[ClonePair], theta: float = 0.4) -> CloneResult:
    """A pair is predicted a clone when its similarity exceeds ``theta``."""
    sims, truth = _arrays(pairs)
    predicted = sims > theta
    return CloneResult(tuple(int(x) for x in predicted), *_prf(predicted, truth))


SWEEP_GRID = tuple(round(i / 100, 2) for i in range(-100, 101))


def threshold_sweep(pairs: Sequence[ClonePair], grid: Sequence[float] = SWEEP_GRID
                    ) -> tuple[float, list[tuple[float, float, float, float]]]:
    """F1 at each threshold; the best threshold is the smallest one reaching the maximum F1."""
    sims, truth = _arrays(pairs)
    curve = [(float(t), *_prf(sims > t, truth)) for t in grid]
    best = max(range(len(curve)), key=lambda i: (curve[i][3], -curve[i][0]))
    return curve[best][0], curve


def sweep_csv(curve: Sequence[tuple[float, float, float, float]]) -> str:
    rows = ["theta,precision,recall,f1"] + [f"{t:.2f},{p:.6f},{r:.6f},{f:.6f}" for t, p, r, f in curve]
    return "\n".join(rows) + "\n"
