"""
Gradient Scrutinizer-style detection: under honest training, per-sample
gradients of same-label rows sit closer together than those of different-label rows.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from .events import DETECTED, UNDETECTED, DetectionEvent

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-12


def gs_score(grads: np.ndarray, labels) -> Optional[float]:
    """Score in [0, 1], or None when the batch has fewer than 2 rows or 2 labels."""
    grads = np.asarray(grads, dtype=np.float64)
    labels = np.asarray(labels)
    if len(grads) < 2 or len(np.unique(labels)) < 2:
        return None
    distances = pdist(grads)
    rows, cols = np.triu_indices(len(grads), k=1)
    same = labels[rows] == labels[cols]
    d_same = distances[same].mean() if same.any() else 0.0
    d_diff = distances[~same].mean()
    raw = (d_diff - d_same) / (d_diff + d_same + SCORE_EPS)
    return float((raw + 1.0) / 2.0)


@dataclass
class GsState:
    threshold: float = 0.8
    min_scores: int = 10
    running_scores: list = field(default_factory=list)
    decision: str = UNDETECTED
    detected_round: Optional[int] = None

    @property
    def running_mean(self) -> Optional[float]:
        return float(np.mean(self.running_scores)) if self.running_scores else None


def gs_update(state: GsState, score: float, round_index: int = None) -> GsState:
    state.running_scores.append(float(score))
    if state.decision == DETECTED:
        return state
    if len(state.running_scores) >= state.min_scores and state.running_mean < state.threshold:
        state.decision = DETECTED
        state.detected_round = round_index
    return state


class GradientScrutinizer:
    name = "scrutinizer"

    def __init__(self, client: int, state: GsState):
        self.client = client
        self.state = state

    @property
    def detected(self) -> bool:
        return self.state.decision == DETECTED

    def observe(self, round_index: int, grads: np.ndarray, true_labels) -> Optional[DetectionEvent]:
        score = gs_score(grads, true_labels)
        if score is None:
            return None
        was_detected = self.detected
        gs_update(self.state, score, round_index)
        if self.detected and not was_detected:
            logger.warning("Gradient Scrutinizer flagged client %d at round %d (running mean %.3f)",
                           self.client, round_index, self.state.running_mean)
        return DetectionEvent(round_index, self.name, self.client, score,
                              self.state.running_mean, self.state.decision)
