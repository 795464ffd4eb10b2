from .config import (
    MODES,
    ExperimentConfig,
    config_diff,
    load_config,
    resolve_path,
    save_config,
    with_override,
)
from .seeding import SeedBank
from .metrics import ImageQuality, MetricsReport, image_quality, recon_mse
from .snapshot import Snapshot, final_metrics, load_snapshot, save_snapshot
from .report_writer import emit_report, read_report, write_embeddings
from .calibration import (
    LABEL_BLIND_SCORE,
    GsCalibration,
    calibrate_gs_threshold,
    freeze_thresholds,
    honest_variant,
)
from .experiment import Experiment, run_experiment
from .sweep import run_all, sweep
