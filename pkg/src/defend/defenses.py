"""
Passive-side defenses.

- Nopeek: distance-correlation penalty between a client's raw features and
  its embeddings, mixed into the local training signal.
- Obfuscation: Gaussian noise on uploaded embeddings.
- Gradient DP: per-sample L1 clipping plus Laplace noise on downloaded gradients.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..autodiff import Tensor, as_tensor, pairwise_distances
from ..errors import ConfigError, ContractError

logger = logging.getLogger(__name__)

VARIANCE_EPS = 1e-12


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass
class DefenseConfig:
    """dp_epsilon None disables DP; inf clips without noise."""

    nopeek_alpha: float = 0.0
    noise_sigma: float = 0.0
    dp_epsilon: Optional[float] = None
    dp_clip: float = 1.0
    seed: Optional[int] = None

    def validate(self) -> list:
        errors = []
        if not _is_real(self.nopeek_alpha) or not 0.0 <= self.nopeek_alpha <= 1.0:
            errors.append(f"defense.nopeek_alpha must be in [0, 1], got {self.nopeek_alpha!r}")
        if not _is_real(self.noise_sigma) or self.noise_sigma < 0:
            errors.append(f"defense.noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if self.dp_epsilon is not None and (not _is_real(self.dp_epsilon) or not self.dp_epsilon > 0):
            errors.append(f"defense.dp_epsilon must be > 0 or inf, got {self.dp_epsilon!r}")
        if not _is_real(self.dp_clip) or not self.dp_clip > 0:
            errors.append(f"defense.dp_clip must be > 0, got {self.dp_clip!r}")
        if self.seed is not None and (not isinstance(self.seed, int) or isinstance(self.seed, bool)):
            errors.append(f"defense.seed must be an integer, got {self.seed!r}")
        return errors

    @property
    def enabled(self) -> list:
        names = []
        if self.nopeek_alpha > 0:
            names.append("nopeek")
        if self.noise_sigma > 0:
            names.append("obfuscation")
        if self.dp_epsilon is not None:
            names.append("dp_laplace")
        return names

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------
# DISTANCE CORRELATION
# ---------------------------------------------------------------------
def _double_centered(distances: Tensor) -> Tensor:
    return (distances
            - distances.mean(axis=0, keepdims=True)
            - distances.mean(axis=1, keepdims=True)
            + distances.mean())


def dcor_tensor(X, H) -> Tensor:
    """Differentiable sample distance correlation between the rows of X and H."""
    X, H = as_tensor(X), as_tensor(H)
    if X.ndim != 2 or H.ndim != 2:
        raise ContractError("dcor needs two matrices")
    n = X.shape[0]
    if H.shape[0] != n:
        raise ContractError(f"dcor row counts differ: {n} vs {H.shape[0]}")
    if n < 3:
        raise ContractError(f"dcor needs at least 3 rows, got {n}")

    a = _double_centered(pairwise_distances(X))
    b = _double_centered(pairwise_distances(H))
    var_x = (a * a).mean()
    var_h = (b * b).mean()
    if var_x.item() <= VARIANCE_EPS or var_h.item() <= VARIANCE_EPS:
        return Tensor(0.0)
    cov = (a * b).mean().relu()
    return cov.sqrt() / (var_x * var_h) ** 0.25


def dcor(X, H) -> float:
    """Distance correlation in [0, 1]; 0 when either side has no spread."""
    X = X.detach() if isinstance(X, Tensor) else X
    H = H.detach() if isinstance(H, Tensor) else H
    return float(np.clip(dcor_tensor(X, H).item(), 0.0, 1.0))


def nopeek_loss(task_loss, X, H, alpha: float) -> Tensor:
    """alpha * dcor(X, H) + (1 - alpha) * task_loss."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"nopeek alpha must be in [0, 1], got {alpha}")
    task_loss = as_tensor(task_loss)
    if alpha == 0.0:
        return task_loss
    penalty = dcor_tensor(X, H)
    if alpha == 1.0:
        return penalty
    return alpha * penalty + (1.0 - alpha) * task_loss


# ---------------------------------------------------------------------
# NOISE
# ---------------------------------------------------------------------
def _generator(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def obfuscate_embeddings(H: np.ndarray, sigma: float, seed) -> np.ndarray:
    if sigma < 0:
        raise ConfigError(f"noise sigma must be >= 0, got {sigma}")
    H = np.asarray(H, dtype=np.float64)
    if sigma == 0:
        return H.copy()
    return H + _generator(seed).normal(0.0, sigma, size=H.shape)


def clip_l1_rows(G: np.ndarray, clip: float) -> np.ndarray:
    norms = np.abs(G).sum(axis=1, keepdims=True)
    scale = np.minimum(1.0, clip / np.where(norms > 0, norms, 1.0))
    return G * scale


def dp_laplace_gradients(G: np.ndarray, epsilon: float, clip: float, seed) -> np.ndarray:
    """Clip each row to L1 norm <= clip, then add Laplace(0, clip / epsilon) noise."""
    if not epsilon > 0:
        raise ConfigError(f"dp epsilon must be > 0, got {epsilon}")
    if not clip > 0:
        raise ConfigError(f"dp clip must be > 0, got {clip}")
    clipped = clip_l1_rows(np.asarray(G, dtype=np.float64), clip)
    if math.isinf(epsilon):
        return clipped
    return clipped + _generator(seed).laplace(0.0, clip / epsilon, size=clipped.shape)


# ---------------------------------------------------------------------
# PIPELINE
# ---------------------------------------------------------------------
class DefensePipeline:
    """Defenses as one passive client applies them, with that client's noise stream."""

    def __init__(self, config: DefenseConfig, rng: np.random.Generator):
        errors = config.validate()
        if errors:
            raise ConfigError(errors)
        self.config = config
        self.rng = np.random.default_rng(config.seed) if config.seed is not None else rng

    def on_upload(self, H: np.ndarray) -> np.ndarray:
        if self.config.noise_sigma > 0:
            return obfuscate_embeddings(H, self.config.noise_sigma, self.rng)
        return H

    def on_download(self, G: np.ndarray) -> np.ndarray:
        if self.config.dp_epsilon is not None:
            return dp_laplace_gradients(G, self.config.dp_epsilon, self.config.dp_clip, self.rng)
        return G

    def local_loss(self, H: Tensor, received: np.ndarray, X: np.ndarray) -> Tensor:
        """Surrogate whose gradient w.r.t. H is the received gradient, plus the Nopeek term."""
        surrogate = (H * Tensor(received)).sum()
        alpha = self.config.nopeek_alpha
        if alpha > 0 and H.shape[0] < 3:
            logger.debug("Batch of %d rows too small for Nopeek; using task signal only", H.shape[0])
            return surrogate
        return nopeek_loss(surrogate, X, H, alpha)
