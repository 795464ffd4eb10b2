"""
Final metrics and the per-run report container.
"""

import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np

from ..errors import ShapeError

PSNR_CAP = 100.0
MSE_FLOOR = 1e-10
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def recon_mse(X_t, X_hat) -> float:
    X_t, X_hat = np.asarray(X_t, dtype=np.float64), np.asarray(X_hat, dtype=np.float64)
    if X_t.shape != X_hat.shape:
        raise ShapeError(f"recon_mse shapes differ: {X_t.shape} vs {X_hat.shape}")
    return float(np.mean((X_t - X_hat) ** 2))


class ImageQuality(NamedTuple):
    psnr: float
    ssim: float


def image_quality(X_t, X_hat, value_range=(0.0, 1.0)) -> ImageQuality:
    """PSNR (capped at 100 dB) and single-window SSIM after mapping value_range onto [0, 1]."""
    X_t, X_hat = np.asarray(X_t, dtype=np.float64), np.asarray(X_hat, dtype=np.float64)
    if X_t.shape != X_hat.shape:
        raise ShapeError(f"image_quality shapes differ: {X_t.shape} vs {X_hat.shape}")
    low, high = value_range
    span = high - low if high > low else 1.0
    a = (X_t - low) / span
    b = (X_hat - low) / span

    mse = float(np.mean((a - b) ** 2))
    psnr = PSNR_CAP if mse < MSE_FLOOR else min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))

    mu_a, mu_b = a.mean(), b.mean()
    var_a, var_b = a.var(), b.var()
    cov = np.mean((a - mu_a) * (b - mu_b))
    ssim = ((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)) / \
           ((mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2))
    return ImageQuality(psnr, float(ssim))


TRACE_FIELDS = ("round", "loss", "L_R", "L_M", "L_D", "fake_batch", "halted_clients", "grad_norm_mean")
DISTANCE_FIELDS = ("round", "emb_mse", "emb_cos", "probe_accuracy")
DETECTION_FIELDS = ("round", "detector", "client", "score", "trailing_mean", "decision")


@dataclass
class MetricsReport:
    run_name: str
    mode: str
    seed: int
    config: dict
    final: dict = field(default_factory=dict)
    rounds: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    detection: list = field(default_factory=list)
    pretrain_losses: list = field(default_factory=list)
    detected_rounds: dict = field(default_factory=dict)
    grad_norm: dict = field(default_factory=dict)
    label_oracle: bool = False
    gs_threshold: Optional[float] = None
    wall_clock_seconds: Optional[float] = None

    def payload(self) -> dict:
        """Everything but wall-clock; identical across reruns of the same config and seed."""
        data = asdict(self)
        data.pop("wall_clock_seconds")
        return data

    def summary_record(self) -> dict:
        data = asdict(self)
        for name in ("rounds", "distances", "detection"):
            data.pop(name)
        return data

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]
