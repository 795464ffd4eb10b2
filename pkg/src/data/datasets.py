"""
Datasets for the simulator.

- Dataset: immutable feature matrix + class labels.
- generate_gaussian_mixture: seeded tabular stand-in for real VFL data.
- load_csv_dataset: CSV ingestion (header row, one label column, numeric features).
- standardize / rescale_to_unit_range: the two feature normalizations.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DataError

logger = logging.getLogger(__name__)

STD_GUARD = 1e-12


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_names: tuple = None
    label_mapping: dict = None
    row_ids: np.ndarray = None
    allow_empty: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels)
        if features.ndim != 2:
            raise DataError(f"features must be a matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DataError(f"{features.shape[0]} feature rows but labels have shape {labels.shape}")
        if features.shape[0] < 1 and not self.allow_empty:
            raise DataError("dataset has no rows")
        if features.shape[1] < 2:
            raise DataError(f"dataset needs at least 2 features, got {features.shape[1]}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise DataError("labels must be integer class indices")
        labels = labels.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(features)):
            raise DataError("features contain non-finite values")
        row_ids = np.arange(features.shape[0]) if self.row_ids is None else np.array(self.row_ids, dtype=np.int64)
        if self.feature_names is not None and len(self.feature_names) != features.shape[1]:
            raise DataError("feature_names length does not match feature count")

        for array in (features, labels, row_ids):
            array.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", row_ids)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def num_rows(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            num_classes=self.num_classes,
            feature_names=self.feature_names,
            label_mapping=self.label_mapping,
            row_ids=self.row_ids[rows],
            allow_empty=True,
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(
            features=features,
            labels=self.labels,
            num_classes=self.num_classes,
            feature_names=self.feature_names,
            label_mapping=self.label_mapping,
            row_ids=self.row_ids,
            allow_empty=self.allow_empty,
        )

    def __len__(self):
        return self.num_rows


# ---------------------------------------------------------------------
# SYNTHESIS
# ---------------------------------------------------------------------
def mixture_means(num_classes: int, dims: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """One mean per class on a random direction, scaled to norm `separation`."""
    directions = rng.normal(size=(num_classes, dims))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return separation * directions / norms


def generate_gaussian_mixture(num_classes: int, dims: int, per_class: int, separation: float,
                              seed: int, feature_correlation: float = 0.0,
                              means_seed: int = None) -> Dataset:
    """Seeded Gaussian mixture with `per_class` rows per label.

    Within a class the covariance is (1 - rho) I + rho 11^T (rho =
    feature_correlation, 0 gives unit covariance). `means_seed` draws the class
    means independently of `seed`, which yields an out-of-distribution set.
    """
    problems = []
    if num_classes < 2:
        problems.append(f"num_classes must be >= 2, got {num_classes}")
    if dims < 2:
        problems.append(f"dims must be >= 2, got {dims}")
    if per_class < 2:
        problems.append(f"per_class must be >= 2, got {per_class}")
    if not separation > 0:
        problems.append(f"separation must be > 0, got {separation}")
    if not 0.0 <= feature_correlation < 1.0:
        problems.append(f"feature_correlation must be in [0, 1), got {feature_correlation}")
    if problems:
        raise DataError("; ".join(problems))

    means_sequence, sample_sequence = np.random.SeedSequence(seed).spawn(2)
    if means_seed is not None:
        means_sequence = np.random.SeedSequence(means_seed).spawn(2)[0]
    means = mixture_means(num_classes, dims, separation, np.random.default_rng(means_sequence))
    rng = np.random.default_rng(sample_sequence)

    blocks, labels = [], []
    for label in range(num_classes):
        noise = rng.normal(size=(per_class, dims))
        if feature_correlation > 0:
            shared = rng.normal(size=(per_class, 1))
            noise = np.sqrt(1.0 - feature_correlation) * noise + np.sqrt(feature_correlation) * shared
        blocks.append(means[label] + noise)
        labels.append(np.full(per_class, label))
    order = rng.permutation(num_classes * per_class)
    features = np.concatenate(blocks)[order]
    return Dataset(
        features=features,
        labels=np.concatenate(labels)[order],
        num_classes=num_classes,
        feature_names=tuple(f"f{i}" for i in range(dims)),
    )


# ---------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------
def _remap_labels(raw: pd.Series):
    numeric = pd.to_numeric(raw, errors="coerce")
    if not numeric.isna().any():
        values = numeric.to_numpy()
        if np.all(np.equal(np.mod(values, 1), 0)):
            values = values.astype(np.int64)
        keys = [v.item() for v in values]
    else:
        keys = list(raw)
    mapping = {key: index for index, key in enumerate(sorted(set(keys)))}
    return np.array([mapping[k] for k in keys], dtype=np.int64), mapping


def load_csv_dataset(path: str, label_column: str) -> Dataset:
    """Load a UTF-8 CSV with a header row; every non-label column must be numeric.

    Rows in error messages are 1-based data rows (the header is not counted).
    """
    if not os.path.isfile(path):
        raise DataError(f"CSV file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError(f"CSV file is empty: {path}")
    except (UnicodeDecodeError, pd.errors.ParserError) as e:
        raise DataError(f"cannot parse {path}: {e}")

    if frame.empty:
        raise DataError(f"CSV file has a header but no data rows: {path}")
    if label_column not in frame.columns:
        raise DataError(f"label column '{label_column}' not in {list(frame.columns)}")

    feature_columns = [c for c in frame.columns if c != label_column]
    columns = []
    for name in feature_columns:
        cells = frame[name].str.strip()
        values = pd.to_numeric(cells, errors="coerce")
        bad = values.isna()
        if bad.any():
            first = int(np.argmax(bad.to_numpy()))
            raise DataError(
                f"non-numeric value {frame[name].iloc[first]!r} at row {first + 1}, column \"{name}\""
            )
        columns.append(values.to_numpy(dtype=np.float64))

    labels, mapping = _remap_labels(frame[label_column].str.strip())
    logger.info("Loaded %d rows x %d features from %s (%d classes)",
                len(frame), len(feature_columns), path, len(mapping))
    return Dataset(
        features=np.column_stack(columns) if columns else np.empty((len(frame), 0)),
        labels=labels,
        num_classes=len(mapping),
        feature_names=tuple(feature_columns),
        label_mapping=mapping,
    )


# ---------------------------------------------------------------------
# NORMALIZATION
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        constant = self.std < STD_GUARD
        scaled = (features - self.mean) / np.where(constant, 1.0, self.std)
        scaled[:, constant] = 0.0
        return scaled


def standardize(ds: Dataset):
    """Zero mean, unit population std per column; constant columns become 0.

    Returns (dataset, scaler).
    """
    if ds.num_rows < 2:
        raise DataError("standardize needs at least 2 rows")
    scaler = Scaler(mean=ds.features.mean(axis=0), std=ds.features.std(axis=0))
    return ds.with_features(scaler.transform(ds.features)), scaler


def rescale_to_unit_range(ds: Dataset) -> Dataset:
    """Affine map of each column onto [-1, 1]; constant columns become 0."""
    low = ds.features.min(axis=0)
    high = ds.features.max(axis=0)
    span = high - low
    constant = span <= 0
    if np.all(constant):
        raise DataError("rescale_to_unit_range needs at least one non-constant feature")
    scaled = 2.0 * (ds.features - low) / np.where(constant, 1.0, span) - 1.0
    scaled[:, constant] = 0.0
    return ds.with_features(scaled)
