"""Small random models and batches built directly from index arrays."""
from __future__ import annotations

import numpy as np

from multirep.neural import BatchedSample, KindBatch, Model, ModelConfig
from multirep.paths import PathKind

KINDS = (PathKind.AST, PathKind.CFG, PathKind.PDG)


def small_model(seed: int, dim: int = 4, n_labels: int = 5, kinds=KINDS, vocab: int = 9,
                dropout: float = 0.0) -> Model:
    cfg = ModelConfig(n_labels, vocab, {k: vocab for k in KINDS}, dim=dim, kinds=kinds, dropout=dropout, seed=seed)
    model = Model(cfg)
    # Larger weights than the default init keep every gradient well away from zero.
    rng = np.random.default_rng(seed + 1000)
    for name, p in model.params.items():
        p[...] = rng.normal(0.0, 0.6, size=p.shape)
    return model


def random_batch(seed: int, size: int = 3, width: int = 4, vocab: int = 9, n_labels: int = 5,
                 kinds=KINDS) -> BatchedSample:
    rng = np.random.default_rng(seed)
    parts = {}
    for kind in kinds:
        mask = np.zeros((size, width), dtype=bool)
        for row in range(size):
            mask[row, :rng.integers(1, width + 1)] = True
        idx = lambda: np.where(mask, rng.integers(0, vocab, size=(size, width)), 0)  # noqa: E731
        parts[kind] = KindBatch(idx(), idx(), idx(), mask)
    return BatchedSample(parts, rng.integers(0, n_labels, size=size))


def numeric_gradient(model: Model, batch: BatchedSample, loss_fn, name: str, eps: float = 1e-6) -> np.ndarray:
    p = model.params[name]
    out = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = p[i]
        p[i] = old + eps
        hi = loss_fn()
        p[i] = old - eps
        lo = loss_fn()
        p[i] = old
        out[i] = (hi - lo) / (2 * eps)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)
