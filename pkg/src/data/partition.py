"""
Vertical partitioning of feature columns and aux/train/test row splits.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .datasets import Dataset

logger = logging.getLogger(__name__)

FRACTION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class VerticalPartition:
    """Column index sets; slot 0 is the adversary (active) client, slots 1..N passive."""

    column_sets: tuple
    num_features: int

    def __post_init__(self):
        sets = tuple(tuple(int(c) for c in cols) for cols in self.column_sets)
        if len(sets) < 2:
            raise DataError("a partition needs the adversary slot and at least one passive client")
        for index, cols in enumerate(sets[1:], start=1):
            if not cols:
                raise DataError(f"passive client {index} holds no columns")
        seen = [c for cols in sets for c in cols]
        if len(seen) != len(set(seen)):
            raise DataError("partition column sets overlap")
        if sorted(seen) != list(range(self.num_features)):
            raise DataError(f"partition does not cover columns 0..{self.num_features - 1} exactly")
        object.__setattr__(self, "column_sets", sets)

    @property
    def adversary_columns(self) -> tuple:
        return self.column_sets[0]

    @property
    def num_passive(self) -> int:
        return len(self.column_sets) - 1

    @property
    def split_learning(self) -> bool:
        """True when the adversary holds no features."""
        return not self.column_sets[0]

    def passive_columns(self, client: int) -> tuple:
        """Columns of passive client `client` (1-based)."""
        if not 1 <= client <= self.num_passive:
            raise DataError(f"no passive client {client}; have 1..{self.num_passive}")
        return self.column_sets[client]

    @property
    def all_passive_columns(self) -> tuple:
        return tuple(c for cols in self.column_sets[1:] for c in cols)

    def slice(self, features: np.ndarray, slot: int) -> np.ndarray:
        return features[:, list(self.column_sets[slot])]


def vertical_partition(d: int, fractions, permutation_seed: int = None) -> VerticalPartition:
    """Contiguous blocks [adversary, passive 1..N] sized by rounded fractions.

    The last client takes the remainder. With `permutation_seed` the columns are
    shuffled before blocking.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) < 2:
        raise DataError("need a fraction for the adversary and at least one passive client")
    if abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
        raise DataError(f"partition fractions must sum to 1, got {sum(fractions):.12g}")
    if fractions[0] < 0 or any(f <= 0 for f in fractions[1:]):
        raise DataError("passive fractions must be > 0 and the adversary fraction >= 0")

    sizes = [int(np.floor(f * d + 0.5)) for f in fractions[:-1]]
    sizes.append(d - sum(sizes))
    for index, (fraction, size) in enumerate(zip(fractions, sizes)):
        if size < 0 or (fraction > 0 and size == 0):
            raise DataError(f"fraction {fraction} for client {index} gives {size} of {d} columns")

    order = np.arange(d)
    if permutation_seed is not None:
        order = np.random.default_rng(permutation_seed).permutation(d)
    bounds = np.cumsum(sizes)[:-1]
    blocks = [tuple(int(c) for c in block) for block in np.split(order, bounds)]
    logger.debug("Vertical partition of %d columns: sizes %s", d, sizes)
    return VerticalPartition(column_sets=tuple(blocks), num_features=d)


@dataclass(frozen=True)
class SplitSpec:
    """aux_ratio is |aux| / |train| (0.1 for a 1:10 aux set)."""

    aux_ratio: float
    test_fraction: float
    seed: int


def make_splits(ds: Dataset, spec: SplitSpec):
    """Seeded shuffle, then disjoint (aux, train, test)."""
    if spec.aux_ratio < 0:
        raise DataError(f"aux_ratio must be >= 0, got {spec.aux_ratio}")
    if not 0.0 <= spec.test_fraction < 1.0:
        raise DataError(f"test_fraction must be in [0, 1), got {spec.test_fraction}")

    total = ds.num_rows
    n_test = int(round(spec.test_fraction * total))
    remaining = total - n_test
    n_train = int(round(remaining / (1.0 + spec.aux_ratio)))
    n_aux = remaining - n_train
    if n_train < 1 or (spec.aux_ratio > 0 and n_aux < 1):
        raise DataError(
            f"fractions exceed what {total} rows allow: test={n_test}, aux={n_aux}, train={n_train}"
        )

    order = np.random.default_rng(spec.seed).permutation(total)
    test_rows = order[:n_test]
    aux_rows = order[n_test:n_test + n_aux]
    train_rows = order[n_test + n_aux:]
    logger.info("Splits: aux=%d train=%d test=%d", n_aux, n_train, n_test)
    return ds.subset(aux_rows), ds.subset(train_rows), ds.subset(test_rows)
