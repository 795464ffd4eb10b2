"""
Gradient Scrutinizer threshold calibration.

Honest runs of the same data and model setup are scored with the Scrutinizer
in observe-only mode. The threshold is placed between the label-blind score
(0.5) and a low quantile of the honest running averages, then frozen into the
configuration so every later run, and its report, carries the same value.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..detect import GradientScrutinizer
from ..errors import ContractError
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

LABEL_BLIND_SCORE = 0.5


@dataclass
class GsCalibration:
    threshold: float
    honest_quantile: float
    seeds: list
    running_means: list = field(default_factory=list)


def honest_variant(config: ExperimentConfig) -> ExperimentConfig:
    """The honest counterpart of `config`: Scrutinizer on and never flagging, other detectors off."""
    variant = config.to_dict()
    variant["name"] = f"{config.name}_gs_calibration"
    variant["mode"] = "honest"
    variant["seeds"] = list(config.detection.gs_calibration_seeds)
    variant["detection"].update(splitguard=False, grad_norm=False, grad_norm_baseline=None,
                                scrutinizer=True, gs_threshold=0.0, gs_calibrate=False)
    variant["evaluation"].update(train_reconstruction=False, export_embeddings=False)
    return ExperimentConfig.from_dict(variant).validate()


def _running_means(report, min_scores: int) -> list:
    """Running averages the Scrutinizer would have compared against its threshold."""
    seen, values = {}, []
    for event in report.detection:
        if event["detector"] != GradientScrutinizer.name:
            continue
        count = seen[event["client"]] = seen.get(event["client"], 0) + 1
        if count >= min_scores:
            values.append(float(event["trailing_mean"]))
    return values


def calibrate_gs_threshold(config: ExperimentConfig) -> GsCalibration:
    from .experiment import Experiment

    det = config.detection
    honest = honest_variant(config)
    values = []
    for seed in honest.seeds:
        values += _running_means(Experiment(honest, seed).run(), det.gs_min_scores)
    if not values:
        raise ContractError("GS calibration produced no running averages; "
                            "honest batches need at least two labels and enough rounds")
    quantile = float(np.quantile(values, det.gs_calibration_quantile))
    threshold = LABEL_BLIND_SCORE + det.gs_calibration_margin * max(quantile - LABEL_BLIND_SCORE, 0.0)
    logger.info("GS threshold calibrated on %d honest run(s): %.2f-quantile %.4f -> threshold %.4f",
                len(honest.seeds), det.gs_calibration_quantile, quantile, threshold)
    return GsCalibration(float(threshold), quantile, list(honest.seeds), values)


def freeze_thresholds(config: ExperimentConfig) -> ExperimentConfig:
    """Config with a calibrated, frozen gs_threshold; unchanged when calibration is off."""
    det = config.detection
    if not (det.scrutinizer and det.gs_calibrate):
        return config
    calibration = calibrate_gs_threshold(config)
    data = config.to_dict()
    data["detection"].update(gs_threshold=calibration.threshold, gs_calibrate=False,
                             gs_calibrated_on=calibration.seeds)
    return ExperimentConfig.from_dict(data).validate()
