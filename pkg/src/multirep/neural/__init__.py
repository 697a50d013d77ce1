from .adam import AdamState, ShapeMismatch, adam_step
from .batch import BatchedSample, KindBatch, iter_batches, make_batch
from .checkpoint import ChecksumMismatch, VocabMismatch, load_checkpoint, read_header, save_checkpoint
from .model import (
    REPRESENTATION_COMBINATIONS, AllMasked, ForwardResult, IndexOutOfRange, Model, ModelConfig, NumericFault,
    active_kinds, attend, backward, batch_loss, code_vectors, embed_context, forward, loss, loss_and_grad,
    predict, softmax,
)

__all__ = [
    "AdamState", "ShapeMismatch", "adam_step", "BatchedSample", "KindBatch", "iter_batches", "make_batch",
    "ChecksumMismatch", "VocabMismatch", "load_checkpoint", "read_header", "save_checkpoint",
    "REPRESENTATION_COMBINATIONS", "AllMasked", "ForwardResult", "IndexOutOfRange", "Model", "ModelConfig",
    "NumericFault", "active_kinds", "attend", "backward", "batch_loss", "code_vectors", "embed_context",
    "forward", "loss", "loss_and_grad", "predict", "softmax",
]
