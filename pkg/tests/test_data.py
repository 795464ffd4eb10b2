"""
Datasets, CSV loading, normalization, vertical partitions and splits.
"""

import numpy as np
import pytest

from src.data import (
    Dataset,
    SplitSpec,
    VerticalPartition,
    generate_gaussian_mixture,
    load_csv_dataset,
    make_splits,
    rescale_to_unit_range,
    standardize,
    vertical_partition,
)
from src.errors import DataError


# =============================================================================
# Dataset and synthesis
# =============================================================================

class TestDataset:

    def test_rejects_single_feature(self):
        with pytest.raises(DataError):
            Dataset(features=np.zeros((3, 1)), labels=np.zeros(3, dtype=int), num_classes=2)

    def test_rejects_out_of_range_label(self):
        with pytest.raises(DataError):
            Dataset(features=np.zeros((2, 2)), labels=np.array([0, 2]), num_classes=2)

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            Dataset(features=np.array([[0.0, np.inf]]), labels=np.array([0]), num_classes=2)

    def test_arrays_are_read_only(self, mixture):
        with pytest.raises(ValueError):
            mixture.features[0, 0] = 1.0

    def test_subset_keeps_row_ids(self, mixture):
        part = mixture.subset([5, 2])
        np.testing.assert_array_equal(part.row_ids, [5, 2])
        np.testing.assert_array_equal(part.features[0], mixture.features[5])

    def test_empty_subset_allowed(self, mixture):
        assert mixture.subset([]).num_rows == 0


class TestGaussianMixture:

    def test_shape_and_balance(self):
        ds = generate_gaussian_mixture(num_classes=3, dims=5, per_class=40, separation=4.0, seed=1)
        assert (ds.num_rows, ds.num_features, ds.num_classes) == (120, 5, 3)
        np.testing.assert_array_equal(np.bincount(ds.labels), [40, 40, 40])

    def test_seed_determinism(self):
        a = generate_gaussian_mixture(2, 4, 30, 6.0, seed=3)
        b = generate_gaussian_mixture(2, 4, 30, 6.0, seed=3)
        c = generate_gaussian_mixture(2, 4, 30, 6.0, seed=4)
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(a.features, c.features)

    def test_class_means_at_separation(self):
        ds = generate_gaussian_mixture(2, 6, 3000, 6.0, seed=9)
        for label in range(2):
            centre = ds.features[ds.labels == label].mean(axis=0)
            assert np.linalg.norm(centre) == pytest.approx(6.0, abs=0.2)

    def test_feature_correlation(self):
        ds = generate_gaussian_mixture(2, 4, 4000, 6.0, seed=2, feature_correlation=0.6)
        rows = ds.features[ds.labels == 0]
        corr = np.corrcoef(rows, rowvar=False)
        assert corr[0, 1] == pytest.approx(0.6, abs=0.05)

    def test_means_seed_moves_the_means(self):
        a = generate_gaussian_mixture(2, 4, 500, 6.0, seed=2)
        b = generate_gaussian_mixture(2, 4, 500, 6.0, seed=2, means_seed=77)
        shift = np.linalg.norm(a.features[a.labels == 0].mean(0) - b.features[b.labels == 0].mean(0))
        assert shift > 1.0

    @pytest.mark.parametrize("kwargs", [
        dict(num_classes=1, dims=4, per_class=10, separation=1.0),
        dict(num_classes=2, dims=1, per_class=10, separation=1.0),
        dict(num_classes=2, dims=4, per_class=1, separation=1.0),
        dict(num_classes=2, dims=4, per_class=10, separation=0.0),
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(DataError):
            generate_gaussian_mixture(seed=0, **kwargs)


# =============================================================================
# CSV
# =============================================================================

class TestCsv:

    def test_loads_and_remaps_labels(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b,label\n1.0,2.0,7\n3.0,4.0,3\n5.0,6.0,7\n", encoding="utf-8")
        ds = load_csv_dataset(str(path), "label")
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.labels, [1, 0, 1])
        assert ds.label_mapping == {3: 0, 7: 1}

    def test_string_labels(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x,y,kind\n1,2,cat\n3,4,dog\n", encoding="utf-8")
        ds = load_csv_dataset(str(path), "kind")
        assert ds.label_mapping == {"cat": 0, "dog": 1}

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b,label\n1,2,0\n3,oops,1\n", encoding="utf-8")
        with pytest.raises(DataError, match=r"'oops' at row 2, column \"b\""):
            load_csv_dataset(str(path), "label")

    def test_header_only(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b,label\n", encoding="utf-8")
        with pytest.raises(DataError, match="no data rows"):
            load_csv_dataset(str(path), "label")

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(DataError, match="label column"):
            load_csv_dataset(str(path), "label")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv_dataset(str(tmp_path / "nope.csv"), "label")


# =============================================================================
# Normalization
# =============================================================================

class TestNormalization:

    def test_standardize(self, mixture):
        scaled, scaler = standardize(mixture)
        np.testing.assert_allclose(scaled.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(scaled.features.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(scaler.transform(mixture.features), scaled.features)

    def test_constant_column_becomes_zero(self):
        ds = Dataset(features=np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]),
                     labels=np.array([0, 1, 0]), num_classes=2)
        scaled, _ = standardize(ds)
        np.testing.assert_array_equal(scaled.features[:, 1], 0.0)
        assert rescale_to_unit_range(ds).features[:, 1].tolist() == [0.0, 0.0, 0.0]

    def test_unit_range(self, mixture):
        scaled = rescale_to_unit_range(mixture)
        np.testing.assert_allclose(scaled.features.min(axis=0), -1.0)
        np.testing.assert_allclose(scaled.features.max(axis=0), 1.0)


# =============================================================================
# Partition and splits
# =============================================================================

class TestVerticalPartition:

    def test_even_split(self):
        part = vertical_partition(16, [0.5, 0.5])
        assert part.adversary_columns == tuple(range(8))
        assert part.passive_columns(1) == tuple(range(8, 16))
        assert not part.split_learning

    def test_remainder_goes_to_last_client(self):
        part = vertical_partition(10, [0.3, 0.3, 0.4])
        assert [len(c) for c in part.column_sets] == [3, 3, 4]

    def test_split_learning(self):
        part = vertical_partition(10, [0.0, 0.2, 0.2, 0.2, 0.2, 0.2])
        assert part.split_learning
        assert part.num_passive == 5
        assert sorted(part.all_passive_columns) == list(range(10))

    def test_permutation_covers_every_column(self):
        part = vertical_partition(12, [0.25, 0.75], permutation_seed=3)
        assert sorted(part.adversary_columns + part.all_passive_columns) == list(range(12))
        assert part.adversary_columns != (0, 1, 2)

    @pytest.mark.parametrize("fractions", [[0.5, 0.4], [1.0], [0.5, 0.0, 0.5], [-0.1, 1.1]])
    def test_invalid_fractions(self, fractions):
        with pytest.raises(DataError):
            vertical_partition(10, fractions)

    def test_fraction_too_small_for_dims(self):
        with pytest.raises(DataError):
            vertical_partition(4, [0.5, 0.45, 0.05])

    def test_overlap_rejected(self):
        with pytest.raises(DataError):
            VerticalPartition(column_sets=((0, 1), (1, 2)), num_features=3)

    def test_unknown_client(self):
        with pytest.raises(DataError):
            vertical_partition(8, [0.5, 0.5]).passive_columns(2)

    def test_slice(self, mixture):
        part = vertical_partition(8, [0.25, 0.75])
        np.testing.assert_array_equal(part.slice(mixture.features, 0), mixture.features[:, :2])


class TestSplits:

    def test_sizes_and_disjointness(self, mixture):
        aux, train, test = make_splits(mixture, SplitSpec(aux_ratio=0.1, test_fraction=0.3, seed=0))
        assert test.num_rows == 60
        assert train.num_rows == round(140 / 1.1)
        assert aux.num_rows + train.num_rows + test.num_rows == 200
        ids = [set(s.row_ids.tolist()) for s in (aux, train, test)]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])

    def test_seeded(self, mixture):
        a = make_splits(mixture, SplitSpec(0.2, 0.2, seed=5))
        b = make_splits(mixture, SplitSpec(0.2, 0.2, seed=5))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.row_ids, y.row_ids)

    def test_no_aux(self, mixture):
        aux, train, _ = make_splits(mixture, SplitSpec(0.0, 0.0, seed=0))
        assert aux.num_rows == 0 and train.num_rows == 200

    def test_too_few_rows(self):
        tiny = generate_gaussian_mixture(2, 4, 2, 6.0, seed=0)
        with pytest.raises(DataError):
            make_splits(tiny, SplitSpec(aux_ratio=0.01, test_fraction=0.5, seed=0))
