"""
Gradient-norm profiling: per-sample L2 norms of received embedding gradients,
compared against an honest baseline with a two-sample KS test.
"""

import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import ContractError, DataError

logger = logging.getLogger(__name__)

MIN_NORMS = 100


@dataclass
class GradNormProfile:
    norms: np.ndarray
    per_round_counts: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    def save(self, path: str) -> None:
        np.savez(path, norms=self.norms, per_round_counts=self.per_round_counts,
                 bin_edges=self.bin_edges, counts=self.counts)

    def subsample(self, size: int, rng: np.random.Generator) -> "GradNormProfile":
        """At most `size` norms, drawn without replacement."""
        if self.norms.size <= size:
            return self
        norms = np.sort(rng.choice(self.norms, size=size, replace=False))
        counts, _ = np.histogram(norms, bins=self.bin_edges)
        return GradNormProfile(norms=norms, per_round_counts=np.array([size], dtype=np.int64),
                               bin_edges=self.bin_edges, counts=counts)

    @classmethod
    def load(cls, path: str) -> "GradNormProfile":
        if not os.path.isfile(path):
            raise DataError(f"gradient-norm baseline not found: {path}")
        with np.load(path) as archive:
            return cls(**{key: archive[key] for key in archive.files})


def grad_norm_profile(trace, bins: int = 30) -> GradNormProfile:
    """Profile from an iterable of per-round gradient matrices (one row per sample)."""
    blocks = [np.linalg.norm(np.asarray(g, dtype=np.float64), axis=1) for g in trace]
    norms = np.concatenate(blocks) if blocks else np.empty(0)
    if norms.size:
        counts, edges = np.histogram(norms, bins=bins)
    else:
        counts, edges = np.zeros(bins, dtype=np.int64), np.linspace(0.0, 1.0, bins + 1)
    return GradNormProfile(norms=norms, per_round_counts=np.array([len(b) for b in blocks], dtype=np.int64),
                           bin_edges=edges, counts=counts)


def compare_profiles(p1: GradNormProfile, p2: GradNormProfile) -> float:
    """Two-sample KS statistic between the two norm samples."""
    for label, profile in (("first", p1), ("second", p2)):
        if profile.norms.size < MIN_NORMS:
            raise ContractError(f"{label} profile has {profile.norms.size} norms; need {MIN_NORMS}")
    return float(stats.ks_2samp(p1.norms, p2.norms).statistic)


def ks_critical_value(n: int, m: int, alpha: float = 0.01) -> float:
    c_alpha = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c_alpha * math.sqrt((n + m) / (n * m))


class GradNormDetector:
    """Collects live norms; flags when KS against the baseline exceeds the critical value."""

    name = "grad_norm"

    def __init__(self, client: int, alpha: float = 0.01, baseline: GradNormProfile = None,
                 sample_size: int = None, rng: np.random.Generator = None):
        self.client = client
        self.alpha = alpha
        self.baseline = baseline
        self.sample_size = sample_size
        self.rng = rng if rng is not None else np.random.default_rng(client)
        self.trace = []

    def observe(self, round_index: int, grads: np.ndarray) -> None:
        self.trace.append(np.array(grads, dtype=np.float64))

    def profile(self) -> GradNormProfile:
        return grad_norm_profile(self.trace)

    def evaluate(self):
        """(ks, critical, flagged), or None without a usable baseline."""
        live = self.profile()
        if self.baseline is None:
            return None
        if live.norms.size < MIN_NORMS or self.baseline.norms.size < MIN_NORMS:
            logger.info("Client %d: too few norms for a KS comparison", self.client)
            return None
        baseline = self.baseline
        if self.sample_size:
            baseline = baseline.subsample(self.sample_size, self.rng)
            live = live.subsample(self.sample_size, self.rng)
        ks = compare_profiles(baseline, live)
        critical = ks_critical_value(baseline.norms.size, live.norms.size, self.alpha)
        flagged = ks > critical
        if flagged:
            logger.warning("Gradient-norm profile of client %d departs from baseline: KS %.3f > %.3f",
                           self.client, ks, critical)
        return ks, critical, flagged
