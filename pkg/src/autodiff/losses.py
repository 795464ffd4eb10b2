"""
Scalar losses used across the protocol and the attack.
"""

import numpy as np

from ..errors import ContractError, ShapeError
from .tensor import Tensor, as_tensor


def mse_loss(pred, target) -> Tensor:
    """Mean of squared elementwise differences over the whole batch."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    return (diff * diff).mean()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy_loss(logits, targets) -> Tensor:
    """Mean over the batch of -log softmax(logits)[target] (log-sum-exp stabilized)."""
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be batch x classes, got {logits.shape}")
    n, k = logits.shape
    if n == 0:
        raise ContractError("cross_entropy_loss on an empty batch")
    if targets.shape != (n,):
        raise ShapeError(f"expected {n} targets, got shape {targets.shape}")
    if not np.issubdtype(targets.dtype, np.integer):
        if not np.all(np.equal(np.mod(targets, 1), 0)):
            raise ContractError("targets must be integer class indices")
        targets = targets.astype(np.int64)
    if targets.min() < 0 or targets.max() >= k:
        raise ContractError(f"target index out of range [0, {k}): min {targets.min()}, max {targets.max()}")

    log_probs = log_softmax(logits.data)
    rows = np.arange(n)
    value = -log_probs[rows, targets].mean()

    def backward(g):
        probs = np.exp(log_probs)
        probs[rows, targets] -= 1.0
        return (g * probs / n,)

    return Tensor._from_op(np.asarray(value), (logits,), backward, "cross_entropy")
