"""
SplitGuard-style detection on the passive side.

The passive client occasionally sends a batch with deliberately wrong labels
and compares the gradients it receives for that batch against gradients of
regular batches. Honest training (and a label-aware attacker) answers a fake
batch with gradients that point elsewhere; a label-blind attacker does not.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ContractError
from .events import DETECTED, UNDETECTED, DetectionEvent

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-12


def sg_fake_batch(labels, num_classes: int, seed) -> np.ndarray:
    """Replace every label by a uniform draw over the other classes."""
    if num_classes < 2:
        raise ContractError(f"fake batches need at least 2 classes, got {num_classes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=np.int64)
    offsets = rng.integers(1, num_classes, size=labels.shape)
    return (labels + offsets) % num_classes


def class_signature(grads: np.ndarray, labels, num_classes: int) -> np.ndarray:
    """Per-class mean gradient rows, concatenated in class order (zeros for absent classes)."""
    grads = np.asarray(grads, dtype=np.float64)
    labels = np.asarray(labels)
    parts = []
    for cls in range(num_classes):
        rows = grads[labels == cls]
        parts.append(rows.mean(axis=0) if len(rows) else np.zeros(grads.shape[1]))
    return np.concatenate(parts)


def vector_angle(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.arccos(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)))


def sg_score(F, R, seed) -> float:
    """Score in [0, 1]; near 1 when fake-batch gradients stand apart from regular ones."""
    F = [np.ravel(f) for f in F]
    R = [np.ravel(r) for r in R]
    if not F:
        raise ContractError("sg_score needs at least one fake-batch gradient")
    if len(R) < 2:
        raise ContractError(f"sg_score needs at least 2 regular gradients, got {len(R)}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    order = rng.permutation(len(R))
    half = len(R) // 2
    regular = np.stack(R)
    fake_mean = np.mean(np.stack(F), axis=0)
    regular_mean = regular.mean(axis=0)
    first = regular[order[:half]].mean(axis=0)
    second = regular[order[half:]].mean(axis=0)

    fake_term = vector_angle(fake_mean, regular_mean) * np.linalg.norm(fake_mean - regular_mean)
    regular_term = vector_angle(first, second) * np.linalg.norm(first - second)
    raw = (fake_term - regular_term) / (fake_term + regular_term + SCORE_EPS)
    return float((raw + 1.0) / 2.0)


@dataclass
class SgState:
    fake_probability: float = 0.1
    warmup_rounds: int = 20
    threshold: float = 0.9
    window: int = 10
    score_history: list = field(default_factory=list)
    decision: str = UNDETECTED
    detected_round: Optional[int] = None

    @property
    def trailing_mean(self) -> Optional[float]:
        if not self.score_history:
            return None
        return float(np.mean(self.score_history[-self.window:]))


def sg_update(state: SgState, score: float, round_index: int = None) -> SgState:
    """Append a score; flag once a full window averages strictly below threshold."""
    state.score_history.append(float(score))
    if state.decision == DETECTED:
        return state
    if len(state.score_history) >= state.window and state.trailing_mean < state.threshold:
        state.decision = DETECTED
        state.detected_round = round_index
    return state


class FakeBatchSchedule:
    """Which rounds carry fake labels; one schedule per run, shared by all passive clients."""

    def __init__(self, probability: float, warmup_rounds: int, rng: np.random.Generator):
        if not 0.0 <= probability < 1.0:
            raise ContractError(f"fake-batch probability must be in [0, 1), got {probability}")
        self.probability = probability
        self.warmup_rounds = warmup_rounds
        self.rng = rng

    def is_fake(self, round_index: int) -> bool:
        draw = self.rng.random()
        return round_index >= self.warmup_rounds and draw < self.probability

    def fake_labels(self, labels, num_classes: int) -> np.ndarray:
        return sg_fake_batch(labels, num_classes, self.rng)


class SplitGuardDetector:
    name = "splitguard"

    def __init__(self, client: int, num_classes: int, state: SgState,
                 rng: np.random.Generator, regular_window: int = 10, fake_window: int = 5):
        self.client = client
        self.num_classes = num_classes
        self.state = state
        self.rng = rng
        # both windows hold recent rounds only
        self.fake_signatures = deque(maxlen=fake_window)
        self.regular_signatures = deque(maxlen=regular_window)

    @property
    def detected(self) -> bool:
        return self.state.decision == DETECTED

    def observe(self, round_index: int, grads: np.ndarray, true_labels, fake: bool) -> Optional[DetectionEvent]:
        signature = class_signature(grads, true_labels, self.num_classes)
        if not fake:
            self.regular_signatures.append(signature)
            return None
        self.fake_signatures.append(signature)
        if len(self.regular_signatures) < 2:
            return None

        score = sg_score(list(self.fake_signatures), list(self.regular_signatures), self.rng)
        was_detected = self.detected
        sg_update(self.state, score, round_index)
        if self.detected and not was_detected:
            logger.warning("SplitGuard flagged client %d at round %d (trailing mean %.3f)",
                           self.client, round_index, self.state.trailing_mean)
        return DetectionEvent(round_index, self.name, self.client, score,
                              self.state.trailing_mean, self.state.decision)
