"""
Experiment configuration.

One YAML document per experiment, schema_version 1. Sections map to the
dataclasses below; an unknown key anywhere is an error, and validate()
reports every problem at once before any compute starts.
"""

import copy
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import yaml

from ..data import vertical_partition
from ..defend import DefenseConfig
from ..errors import ConfigError, DataError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("honest", "urvfl", "urvfl_sync", "plain_discriminator")
OUTPUT_DIR_ENV = "URVFL_OUTPUT_DIR"


@dataclass
class DatasetConfig:
    source: str = "synthetic"
    num_classes: int = 2
    dims: int = 16
    per_class: int = 1000
    separation: float = 6.0
    feature_correlation: float = 0.0
    csv_path: Optional[str] = None
    label_column: str = "label"
    normalize: str = "standardize"


@dataclass
class PartitionConfig:
    fractions: list = field(default_factory=lambda: [0.5, 0.5])
    permutation_seed: Optional[int] = None


@dataclass
class SplitConfig:
    aux_ratio: float = 0.1
    test_fraction: float = 0.3
    aux_source: str = "in_distribution"
    ood_aux_rows: int = 100


@dataclass
class ModelConfig:
    embedding_dim: int = 8
    hidden: int = 32
    bottom_depth: int = 2
    encoder_depth: Optional[int] = None
    optimizer: str = "adam"
    learning_rate: float = 1e-3


@dataclass
class TrainingConfig:
    epochs: int = 10
    batch_size: int = 64


@dataclass
class AttackConfig:
    pretrain_epochs: int = 30
    pretrain_batch_size: int = 16
    attack_rounds: int = 300
    train_batch_size: int = 64
    aux_batch_size: int = 64
    learning_rate: float = 1e-3
    learning_rates: dict = field(default_factory=dict)
    target_clients: Optional[list] = None
    shuffle_labels: bool = False
    distance_every: int = 10
    log_every: int = 50


@dataclass
class DetectionConfig:
    splitguard: bool = False
    sg_threshold: float = 0.9
    sg_window: int = 10
    sg_fake_probability: float = 0.1
    sg_warmup_rounds: int = 20
    sg_regular_window: int = 10
    sg_fake_window: int = 5
    scrutinizer: bool = False
    gs_threshold: float = 0.8
    gs_min_scores: int = 10
    # gs_calibrate replaces gs_threshold by one derived from honest runs
    gs_calibrate: bool = False
    gs_calibration_seeds: list = field(default_factory=lambda: [100, 101, 102])
    gs_calibration_quantile: float = 0.05
    gs_calibration_margin: float = 0.4
    gs_calibrated_on: Optional[list] = None
    grad_norm: bool = False
    grad_norm_alpha: float = 0.01
    grad_norm_baseline: Optional[str] = None
    grad_norm_sample_size: Optional[int] = 300

    @property
    def any_label_detector(self) -> bool:
        return self.splitguard or self.scrutinizer


@dataclass
class EvaluationConfig:
    train_reconstruction: bool = False
    export_embeddings: bool = False
    embedding_rows: int = 200


SECTIONS = {
    "dataset": DatasetConfig,
    "partition": PartitionConfig,
    "splits": SplitConfig,
    "models": ModelConfig,
    "training": TrainingConfig,
    "attack": AttackConfig,
    "detection": DetectionConfig,
    "defense": DefenseConfig,
    "evaluation": EvaluationConfig,
}


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    mode: str = "urvfl"
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    schema_version: int = SCHEMA_VERSION
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    splits: SplitConfig = field(default_factory=SplitConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    # -----------------------------------------------------------------
    # SERIALIZATION
    # -----------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping at the top level")
        errors = []
        top_names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - top_names)
        errors += [f"unknown key '{key}'" for key in unknown]

        kwargs = {}
        for name in top_names:
            if name not in data:
                continue
            if name in SECTIONS:
                kwargs[name] = _section_from_dict(SECTIONS[name], data[name], name, errors)
            else:
                kwargs[name] = copy.deepcopy(data[name])
        if errors:
            raise ConfigError(errors)
        config = cls(**kwargs)
        if config.defense.dp_epsilon is not None:
            config.defense.dp_epsilon = _as_float(config.defense.dp_epsilon)
        return config

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    # -----------------------------------------------------------------
    # VALIDATION
    # -----------------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        """Raise one ConfigError listing every problem; returns self when valid."""
        errors = []
        if self.schema_version != SCHEMA_VERSION:
            errors.append(f"schema_version must be {SCHEMA_VERSION}, got {self.schema_version}")
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}, got '{self.mode}'")
        if not isinstance(self.seeds, list) or not self.seeds or \
                not all(_is_int(s) and s >= 0 for s in self.seeds):
            errors.append(f"seeds must be a non-empty list of non-negative integers, got {self.seeds}")

        errors += self._validate_dataset()
        errors += self._validate_partition()
        errors += self._validate_training()
        errors += self._validate_detection()
        errors += self.defense.validate()
        if errors:
            raise ConfigError(errors)
        return self

    def _validate_dataset(self) -> list:
        ds, errors = self.dataset, []
        if ds.source not in ("synthetic", "csv"):
            errors.append(f"dataset.source must be 'synthetic' or 'csv', got '{ds.source}'")
        if ds.source == "synthetic":
            errors += _int_error("dataset.num_classes", ds.num_classes, 2)
            errors += _int_error("dataset.dims", ds.dims, 2)
            errors += _int_error("dataset.per_class", ds.per_class, 2)
            errors += _number_error("dataset.separation", ds.separation, lambda v: v > 0, "> 0")
            errors += _number_error("dataset.feature_correlation", ds.feature_correlation,
                                    lambda v: 0.0 <= v < 1.0, "in [0, 1)")
        elif ds.source == "csv" and not ds.csv_path:
            errors.append("dataset.csv_path is required when dataset.source is 'csv'")
        if ds.normalize not in ("standardize", "unit_range", "none"):
            errors.append(f"dataset.normalize must be standardize, unit_range or none, got '{ds.normalize}'")

        sp = self.splits
        errors += _number_error("splits.aux_ratio", sp.aux_ratio, lambda v: v >= 0, ">= 0")
        errors += _number_error("splits.test_fraction", sp.test_fraction, lambda v: 0.0 <= v < 1.0, "in [0, 1)")
        errors += _int_error("splits.ood_aux_rows", sp.ood_aux_rows, 0)
        if sp.aux_source not in ("in_distribution", "ood"):
            errors.append(f"splits.aux_source must be in_distribution or ood, got '{sp.aux_source}'")
        if sp.aux_source == "ood" and ds.source != "synthetic":
            errors.append("splits.aux_source 'ood' needs a synthetic dataset")
        if self.mode != "honest" and _is_number(sp.aux_ratio) and _is_int(sp.ood_aux_rows):
            has_aux = sp.aux_ratio > 0 or (sp.aux_source == "ood" and sp.ood_aux_rows > 0)
            if not has_aux:
                errors.append("attack modes need an auxiliary set: raise splits.aux_ratio or use ood rows")
        return errors

    def _validate_partition(self) -> list:
        errors = []
        fractions = self.partition.fractions
        if not isinstance(fractions, list) or len(fractions) < 2:
            return ["partition.fractions needs the adversary fraction plus at least one passive fraction"]
        if not all(_is_number(f) for f in fractions):
            return [f"partition.fractions must all be numbers, got {fractions}"]
        if self.partition.permutation_seed is not None and not _is_int(self.partition.permutation_seed):
            errors.append(f"partition.permutation_seed must be an integer, got {self.partition.permutation_seed!r}")
        elif self.dataset.source == "synthetic" and _is_int(self.dataset.dims):
            try:
                vertical_partition(self.dataset.dims, fractions, self.partition.permutation_seed)
            except DataError as e:
                errors.append(f"partition: {e}")
        num_passive = len(fractions) - 1
        targets = self.attack.target_clients
        if targets is not None:
            if not isinstance(targets, list) or not targets or \
                    any(not _is_int(t) or not 1 <= t <= num_passive for t in targets):
                errors.append(f"attack.target_clients must list clients within 1..{num_passive}, got {targets}")
        if self.mode == "honest" and fractions[0] == 0:
            logger.info("Honest run with an adversary that holds no features")
        return errors

    def _validate_training(self) -> list:
        errors = []
        m, t, a = self.models, self.training, self.attack
        for label, value in (("models.embedding_dim", m.embedding_dim), ("models.hidden", m.hidden),
                             ("models.bottom_depth", m.bottom_depth), ("training.batch_size", t.batch_size),
                             ("attack.pretrain_batch_size", a.pretrain_batch_size),
                             ("attack.train_batch_size", a.train_batch_size),
                             ("attack.aux_batch_size", a.aux_batch_size)):
            errors += _int_error(label, value, 1)
        if m.encoder_depth is not None:
            errors += _int_error("models.encoder_depth", m.encoder_depth, 1)
        if m.optimizer not in ("adam", "sgd"):
            errors.append(f"models.optimizer must be adam or sgd, got '{m.optimizer}'")
        if not isinstance(a.learning_rates, dict):
            errors.append(f"attack.learning_rates must be a mapping, got {a.learning_rates!r}")
            rates = []
        else:
            rates = [(f"attack.learning_rates.{k}", v) for k, v in a.learning_rates.items()]
            unknown = set(a.learning_rates) - {"fe", "fd", "fa", "D"}
            if unknown:
                errors.append(f"attack.learning_rates keys must be fe, fd, fa or D; got {sorted(unknown)}")
        for label, lr in [("models.learning_rate", m.learning_rate), ("attack.learning_rate", a.learning_rate)] + rates:
            errors += _number_error(label, lr, lambda v: v >= 0, ">= 0")
        errors += _int_error("training.epochs", t.epochs, 0)
        errors += _int_error("attack.attack_rounds", a.attack_rounds, 0)
        errors += _int_error("attack.pretrain_epochs", a.pretrain_epochs, 0)
        if self.mode in ("urvfl", "plain_discriminator") and _is_int(a.pretrain_epochs) and a.pretrain_epochs < 1:
            errors.append(f"mode {self.mode} needs attack.pretrain_epochs >= 1")
        errors += _int_error("attack.distance_every", a.distance_every, 0)
        errors += _int_error("attack.log_every", a.log_every, 0)
        for label, value in (("attack.shuffle_labels", a.shuffle_labels),
                             ("evaluation.train_reconstruction", self.evaluation.train_reconstruction),
                             ("evaluation.export_embeddings", self.evaluation.export_embeddings)):
            if not isinstance(value, bool):
                errors.append(f"{label} must be true or false, got {value!r}")
        errors += _int_error("evaluation.embedding_rows", self.evaluation.embedding_rows, 1)
        return errors

    def _validate_detection(self) -> list:
        d, errors = self.detection, []
        for label in ("splitguard", "scrutinizer", "grad_norm", "gs_calibrate"):
            if not isinstance(getattr(d, label), bool):
                errors.append(f"detection.{label} must be true or false, got {getattr(d, label)!r}")
        errors += _number_error("detection.sg_fake_probability", d.sg_fake_probability,
                                lambda v: 0.0 <= v < 1.0, "in [0, 1)")
        errors += _number_error("detection.sg_threshold", d.sg_threshold, lambda v: 0.0 <= v <= 1.0, "in [0, 1]")
        errors += _number_error("detection.gs_threshold", d.gs_threshold, lambda v: 0.0 <= v <= 1.0, "in [0, 1]")
        errors += _int_error("detection.sg_window", d.sg_window, 1)
        errors += _int_error("detection.sg_regular_window", d.sg_regular_window, 2)
        errors += _int_error("detection.sg_fake_window", d.sg_fake_window, 1)
        errors += _int_error("detection.sg_warmup_rounds", d.sg_warmup_rounds, 0)
        errors += _int_error("detection.gs_min_scores", d.gs_min_scores, 1)
        if not isinstance(d.gs_calibration_seeds, list) or not d.gs_calibration_seeds or \
                not all(_is_int(s) and s >= 0 for s in d.gs_calibration_seeds):
            errors.append("detection.gs_calibration_seeds must be a non-empty list of non-negative integers, "
                          f"got {d.gs_calibration_seeds}")
        if d.gs_calibrated_on is not None and (not isinstance(d.gs_calibrated_on, list)
                                               or not all(_is_int(s) for s in d.gs_calibrated_on)):
            errors.append(f"detection.gs_calibrated_on must be a list of seeds, got {d.gs_calibrated_on!r}")
        errors += _number_error("detection.gs_calibration_quantile", d.gs_calibration_quantile,
                                lambda v: 0.0 <= v <= 1.0, "in [0, 1]")
        errors += _number_error("detection.gs_calibration_margin", d.gs_calibration_margin,
                                lambda v: 0.0 < v <= 1.0, "in (0, 1]")
        errors += _number_error("detection.grad_norm_alpha", d.grad_norm_alpha, lambda v: 0.0 < v < 1.0, "in (0, 1)")
        if d.grad_norm_sample_size is not None:
            errors += _int_error("detection.grad_norm_sample_size", d.grad_norm_sample_size, 100)
        if d.grad_norm_baseline and not os.path.isdir(str(d.grad_norm_baseline)):
            errors.append(f"detection.grad_norm_baseline run directory not found: {d.grad_norm_baseline}")
        return errors

    # -----------------------------------------------------------------
    # DERIVED
    # -----------------------------------------------------------------
    @property
    def encoder_depth(self) -> int:
        return self.models.encoder_depth or self.models.bottom_depth

    def attack_learning_rate(self, model: str) -> float:
        return self.attack.learning_rates.get(model, self.attack.learning_rate)


def _as_float(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", ".inf", "infinity"):
            return math.inf
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"cannot read '{value}' as a number")
    if not _is_number(value):
        raise ConfigError(f"cannot read {value!r} as a number")
    return float(value)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _int_error(label: str, value, minimum: int) -> list:
    if not _is_int(value) or value < minimum:
        return [f"{label} must be an integer >= {minimum}, got {value!r}"]
    return []


def _number_error(label: str, value, accept, expectation: str) -> list:
    if not _is_number(value) or not accept(value):
        return [f"{label} must be a number {expectation}, got {value!r}"]
    return []


def _section_from_dict(cls, data, prefix: str, errors: list):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        errors.append(f"section '{prefix}' must be a mapping")
        return cls()
    names = {f.name for f in fields(cls)}
    for key in sorted(set(data) - names):
        errors.append(f"unknown key '{prefix}.{key}'")
    return cls(**{k: copy.deepcopy(v) for k, v in data.items() if k in names})


# ---------------------------------------------------------------------
# FILES AND OVERRIDES
# ---------------------------------------------------------------------
def load_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    config = ExperimentConfig.from_dict(data or {})
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        config.output_dir = override
    return config.validate()


def save_config(config: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(config.to_yaml())


def resolve_path(data: dict, path: str):
    """Value at a dotted path such as 'defense.noise_sigma'."""
    node = data
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unresolvable config path '{path}'")
        node = node[part]
    return node


def with_override(config: ExperimentConfig, path: str, value) -> ExperimentConfig:
    data = config.to_dict()
    resolve_path(data, path)
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
    return ExperimentConfig.from_dict(data)


def config_diff(a: dict, b: dict, prefix: str = "") -> list:
    """Dotted paths where two config dicts differ."""
    paths = []
    for key in sorted(set(a) | set(b)):
        path = f"{prefix}{key}"
        left, right = a.get(key), b.get(key)
        if isinstance(left, dict) and isinstance(right, dict):
            paths += config_diff(left, right, path + ".")
        elif left != right:
            paths.append(path)
    return paths
