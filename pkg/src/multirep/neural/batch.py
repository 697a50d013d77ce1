"""Index tensors for a batch of samples."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus import PAD, Sample, Vocabularies
from ..paths import ExtractionLimits, PathKind


@dataclass
class KindBatch:
    starts: np.ndarray  # (B, L) token indices
    paths: np.ndarray   # (B, L) path indices
    ends: np.ndarray    # (B, L) token indices
    mask: np.ndarray    # (B, L) True on real slots


@dataclass
class BatchedSample:
    parts: dict[PathKind, KindBatch]
    labels: np.ndarray  # (B,) label index, -1 when unknown

    def __len__(self) -> int:
        return len(self.labels)


def make_batch(samples: Sequence[Sample], vocabs: Vocabularies, kinds: Sequence[PathKind],
               limits: ExtractionLimits = ExtractionLimits(), pad_to_cap: bool = False) -> BatchedSample:
    """Pad each kind's contexts to the longest bag in the batch (or to the
    kind's cap with ``pad_to_cap``); padded slots are masked out.

    Unknown tokens and paths map to UNK; unknown labels to -1.
    """
    parts = {}
    for kind in kinds:
        cap = limits.cap(kind)
        width = cap if pad_to_cap else max(1, min(cap, max((len(s.contexts(kind)) for s in samples), default=1)))
        shape = (len(samples), width)
        starts, paths, ends = (np.full(shape, PAD, dtype=np.int64) for _ in range(3))
        mask = np.zeros(shape, dtype=bool)
        path_vocab = vocabs.paths[kind]
        for row, sample in enumerate(samples):
            for col, pc in enumerate(sample.contexts(kind)[:width]):
                starts[row, col] = vocabs.tokens.lookup(pc.start_token)
                paths[row, col] = path_vocab.lookup(pc.path_string)
                ends[row, col] = vocabs.tokens.lookup(pc.end_token)
                mask[row, col] = True
        parts[kind] = KindBatch(starts, paths, ends, mask)
    labels = np.array([vocabs.labels.stoi.get(s.label, -1) for s in samples], dtype=np.int64)
    return BatchedSample(parts, labels)


def iter_batches(samples: Sequence[Sample], vocabs: Vocabularies, kinds: Sequence[PathKind],
                 batch_size: int, limits: ExtractionLimits = ExtractionLimits(),
                 order: Optional[Sequence[int]] = None):
    order = range(len(samples)) if order is None else order
    order = list(order)
    for i in range(0, len(order), max(1, batch_size)):
        chunk = [samples[j] for j in order[i:i + batch_size]]
        yield make_batch(chunk, vocabs, kinds, limits)
