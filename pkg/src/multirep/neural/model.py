"""Parallel attention pipelines over AST/CFG/PDG path contexts, in plain numpy.

Each active representation has its own token and path embeddings, a tanh
dense layer compressing ``[e_start; e_path; e_end]`` (3D) into a context
vector (D), and an attention vector. The attention-weighted averages are
concatenated into the code vector, and a softmax layer predicts the label.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..paths import PathKind
from .batch import BatchedSample

ORDER = (PathKind.AST, PathKind.CFG, PathKind.PDG)
REPRESENTATION_COMBINATIONS = (
    (PathKind.AST,),
    (PathKind.AST, PathKind.CFG),
    (PathKind.AST, PathKind.PDG),
    (PathKind.AST, PathKind.CFG, PathKind.PDG),
)
LOG_CLAMP = 1e-12


class NumericFault(ArithmeticError):
    pass


class AllMasked(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


def check_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericFault(f"non-finite values in {name}")


@dataclass(frozen=True)
class ModelConfig:
    n_labels: int
    token_vocab_size: int
    path_vocab_sizes: Mapping[PathKind, int]
    dim: int = 128
    kinds: tuple[PathKind, ...] = ORDER
    dropout: float = 0.25
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self) -> None:
        kinds = tuple(k for k in ORDER if k in {PathKind(x) for x in self.kinds})
        if not kinds:
            raise ValueError("at least one representation must be active")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "path_vocab_sizes", {PathKind(k): int(v) for k, v in self.path_vocab_sizes.items()})
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def code_dim(self) -> int:
        return self.dim * len(self.kinds)

    def to_dict(self) -> dict:
        return {
            "n_labels": self.n_labels, "token_vocab_size": self.token_vocab_size,
            "path_vocab_sizes": {k.value: v for k, v in self.path_vocab_sizes.items()},
            "dim": self.dim, "kinds": [k.value for k in self.kinds], "dropout": self.dropout,
            "dtype": self.dtype, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(d["n_labels"], d["token_vocab_size"], {PathKind(k): v for k, v in d["path_vocab_sizes"].items()},
                   d["dim"], tuple(PathKind(k) for k in d["kinds"]), d["dropout"], d["dtype"], d["seed"])


def param_names(kind: PathKind) -> tuple[str, ...]:
    k = kind.value.lower()
    return (f"{k}.token_embedding", f"{k}.path_embedding", f"{k}.dense_weights", f"{k}.dense_bias", f"{k}.attention")


class Model:
    """Parameters plus the dropout generator. ``params`` maps names to arrays."""

    def __init__(self, config: ModelConfig, params: Optional[dict[str, np.ndarray]] = None):
        self.config = config
        self.dtype = np.dtype(config.dtype)
        self.rng = np.random.default_rng(config.seed)
        self.params = params if params is not None else self._init_params()

    def _init_params(self) -> dict[str, np.ndarray]:
        cfg, rng, D = self.config, np.random.default_rng([self.config.seed, 1]), self.config.dim
        emb = 0.5 / np.sqrt(D)

        def glorot(shape):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            return rng.uniform(-limit, limit, size=shape)

        params = {}
        for kind in cfg.kinds:
            tok, path, dense, bias, att = param_names(kind)
            params[tok] = rng.uniform(-emb, emb, size=(cfg.token_vocab_size, D))
            params[path] = rng.uniform(-emb, emb, size=(cfg.path_vocab_sizes[kind], D))
            params[dense] = glorot((D, 3 * D))
            params[bias] = np.zeros(D)
            params[att] = glorot((D, 1))[:, 0]
        params["prediction"] = glorot((cfg.n_labels, cfg.code_dim))
        return {k: v.astype(self.dtype) for k, v in params.items()}

    def pipeline(self, kind: PathKind) -> dict[str, np.ndarray]:
        tok, path, dense, bias, att = param_names(kind)
        p = self.params
        return {"token_embedding": p[tok], "path_embedding": p[path], "dense_weights": p[dense],
                "dense_bias": p[bias], "attention": p[att]}

    def copy(self) -> "Model":
        clone = Model(self.config, {k: v.copy() for k, v in self.params.items()})
        clone.rng = np.random.default_rng(self.config.seed)
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone


# ---------------------------------------------------------------------------
# Single-sample reference operations

def embed_context(pipeline: Mapping[str, np.ndarray], t1_idx, p_idx, t2_idx) -> np.ndarray:
    """Context vector(s) ``tanh(W [e_t1; e_p; e_t2] + b)``; indices may be arrays."""
    tokens, paths = pipeline["token_embedding"], pipeline["path_embedding"]
    for name, idx, table in (("start token", t1_idx, tokens), ("path", p_idx, paths), ("end token", t2_idx, tokens)):
        arr = np.asarray(idx)
        if arr.size and (arr.min() < 0 or arr.max() >= len(table)):
            raise IndexOutOfRange(f"{name} index out of range [0, {len(table)})")
    concat = np.concatenate([tokens[t1_idx], paths[p_idx], tokens[t2_idx]], axis=-1)
    return np.tanh(concat @ pipeline["dense_weights"].T + pipeline["dense_bias"])


def attend(attention, contexts: np.ndarray, mask: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Softmax weights of ``a . x_i`` over unmasked rows, and the weighted average.

    ``attention`` is the vector ``a`` or a pipeline mapping holding it.
    """
    if isinstance(attention, Mapping):
        attention = attention["attention"]
    contexts = np.asarray(contexts)
    mask = np.ones(len(contexts), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMasked("attention needs at least one unmasked context")
    scores = contexts @ attention
    scores = np.where(mask, scores, -np.inf)
    scores = scores - scores[mask].max()
    weights = np.where(mask, np.exp(scores), 0.0)
    weights = weights / weights.sum()
    return weights, weights @ contexts


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def loss(probs: np.ndarray, target: np.ndarray) -> float:
    """Cross-entropy ``-sum t_i log p_i`` with probabilities clamped at 1e-12."""
    probs = np.asarray(probs, dtype=float)
    return float(max(0.0, -np.sum(np.asarray(target) * np.log(np.maximum(probs, LOG_CLAMP)))))


# ---------------------------------------------------------------------------
# Batched forward / backward

@dataclass
class _KindCache:
    emb: np.ndarray
    x: np.ndarray
    x_drop: np.ndarray
    keep: Optional[np.ndarray]
    alpha: np.ndarray


@dataclass
class ForwardResult:
    code_vectors: np.ndarray
    probs: np.ndarray
    logits: np.ndarray
    attention: dict[PathKind, np.ndarray] = field(default_factory=dict)
    cache: dict[PathKind, _KindCache] = field(default_factory=dict, repr=False)


def forward(model: Model, batch: BatchedSample, training: bool = False) -> ForwardResult:
    cfg, dtype = model.config, model.dtype
    rate = cfg.dropout if training else 0.0
    pieces, cache, attention = [], {}, {}
    for kind in cfg.kinds:
        part = batch.parts[kind]
        pipe = model.pipeline(kind)
        if not part.mask.any(axis=1).all():
            raise AllMasked(f"a sample has no {kind.value} contexts")
        emb = np.concatenate([pipe["token_embedding"][part.starts], pipe["path_embedding"][part.paths],
                              pipe["token_embedding"][part.ends]], axis=-1)
        x = np.tanh(emb @ pipe["dense_weights"].T + pipe["dense_bias"])
        keep = None
        x_drop = x
        if rate > 0.0:
            keep = (model.rng.random(x.shape) >= rate).astype(dtype) / dtype.type(1.0 - rate)
            x_drop = x * keep
        scores = x_drop @ pipe["attention"]
        scores = np.where(part.mask, scores, -np.inf)
        scores = scores - scores.max(axis=1, keepdims=True)
        weights = np.where(part.mask, np.exp(scores), 0.0)
        alpha = weights / weights.sum(axis=1, keepdims=True)
        pieces.append(np.einsum("bl,bld->bd", alpha, x_drop))
        cache[kind] = _KindCache(emb, x, x_drop, keep, alpha)
        attention[kind] = alpha
    v = np.concatenate(pieces, axis=1)
    logits = v @ model.params["prediction"].T
    probs = softmax(logits)
    check_finite("forward pass", v, probs)
    return ForwardResult(v, probs, logits, attention, cache)


def batch_loss(result: ForwardResult, labels: np.ndarray) -> float:
    """Mean cross-entropy of a forward pass, computed through log-softmax."""
    logits = result.logits
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def backward(model: Model, batch: BatchedSample, result: ForwardResult) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch cross-entropy for every parameter."""
    cfg, D = model.config, model.config.dim
    labels = batch.labels
    if (labels < 0).any() or (labels >= cfg.n_labels).any():
        raise IndexOutOfRange("batch labels must be known label indices")
    B = len(labels)
    dlogits = result.probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    W = model.params["prediction"]
    grads = {"prediction": dlogits.T @ result.code_vectors}
    dv = dlogits @ W
    for i, kind in enumerate(cfg.kinds):
        c = result.cache[kind]
        part = batch.parts[kind]
        pipe = model.pipeline(kind)
        dvk = dv[:, i * D:(i + 1) * D]
        dx = c.alpha[..., None] * dvk[:, None, :]
        dalpha = np.einsum("bld,bd->bl", c.x_drop, dvk)
        dscore = c.alpha * (dalpha - (c.alpha * dalpha).sum(axis=1, keepdims=True))
        dx += dscore[..., None] * pipe["attention"]
        if c.keep is not None:
            dx = dx * c.keep
        dh = dx * (1.0 - c.x * c.x)
        flat_dh = dh.reshape(-1, D)
        demb = dh @ pipe["dense_weights"]
        dtok = np.zeros_like(pipe["token_embedding"])
        dpath = np.zeros_like(pipe["path_embedding"])
        np.add.at(dtok, part.starts.ravel(), demb[..., :D].reshape(-1, D))
        np.add.at(dtok, part.ends.ravel(), demb[..., 2 * D:].reshape(-1, D))
        np.add.at(dpath, part.paths.ravel(), demb[..., D:2 * D].reshape(-1, D))
        tok, path, dense, bias, att = param_names(kind)
        grads[tok] = dtok
        grads[path] = dpath
        grads[dense] = flat_dh.T @ c.emb.reshape(-1, 3 * D)
        grads[bias] = flat_dh.sum(axis=0)
        grads[att] = np.einsum("bl,bld->d", dscore, c.x_drop)
    check_finite("gradients", *grads.values())
    return grads


def loss_and_grad(model: Model, batch: BatchedSample, training: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    result = forward(model, batch, training=training)
    return batch_loss(result, batch.labels), backward(model, batch, result)


def predict(model: Model, batch: BatchedSample) -> np.ndarray:
    """Arg-max label index per sample (ties go to the lowest index)."""
    return np.argmax(forward(model, batch).probs, axis=1)


def code_vectors(model: Model, batch: BatchedSample) -> np.ndarray:
    return forward(model, batch).code_vectors


def active_kinds(kinds: Sequence[str | PathKind]) -> tuple[PathKind, ...]:
    chosen = {PathKind(k.upper() if isinstance(k, str) else k) for k in kinds}
    return tuple(k for k in ORDER if k in chosen)
