from .datasets import (
    Dataset,
    Scaler,
    generate_gaussian_mixture,
    load_csv_dataset,
    rescale_to_unit_range,
    standardize,
)
from .partition import SplitSpec, VerticalPartition, make_splits, vertical_partition
