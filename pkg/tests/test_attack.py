"""
Adversary models, pretraining, DAC rounds and the attack driver.
"""

import numpy as np
import pytest

from src.attack import (
    DacLabelMap,
    PlainLabelMap,
    build_attack_models,
    clean_embeddings,
    embedding_distances,
    malicious_round,
    plain_discriminator_round,
    pretrain,
    reconstruct,
    reconstruct_rows,
    run_attack,
    sample_aux_batch,
    sync_round,
)
from src.autodiff import Tensor, cross_entropy_loss
from src.data import SplitSpec, make_splits, standardize, vertical_partition
from src.errors import ContractError, ShapeError
from src.protocol import Batch, build_vfl_system


def setup(fractions=(0.5, 0.5), plain=False, targets=None, seed=0):
    rng = np.random.default_rng(seed)
    partition = vertical_partition(8, list(fractions))
    system = build_vfl_system(partition, 2, embedding_dim=4, hidden=16, rng=rng, with_top=False,
                              learning_rate=0.01)
    models = build_attack_models(partition.all_passive_columns, system.passive_embedding_dim,
                                 system.adversary_bottom, targets or partition.all_passive_columns,
                                 num_classes=2, hidden=16, rng=rng, plain_discriminator=plain,
                                 learning_rate=0.01, adversary_optimizer=system.adversary_optimizer)
    return system, models


@pytest.fixture
def splits(mixture):
    aux, train, _ = make_splits(standardize(mixture)[0], SplitSpec(aux_ratio=0.25, test_fraction=0.0, seed=0))
    return aux, train


def batch_of(ds, size=32):
    return Batch(ds.row_ids[:size], ds.features[:size], ds.labels[:size])


def mixed_batch(ds, per_class=16):
    rows = np.concatenate([np.flatnonzero(ds.labels == label)[:per_class] for label in (0, 1)])
    return Batch(ds.row_ids[rows], ds.features[rows], ds.labels[rows])


# =============================================================================
# Label maps and distances
# =============================================================================

class TestLabelMaps:

    def test_dac_map(self):
        label_map = DacLabelMap(3)
        np.testing.assert_array_equal(label_map.real([0, 2]), [0, 2])
        np.testing.assert_array_equal(label_map.fake([0, 2]), [3, 5])
        assert label_map.decode(4) == (1, False)
        assert label_map.decode(1) == (1, True)
        with pytest.raises(ContractError):
            label_map.decode(6)

    def test_dac_predicted_real(self):
        logits = np.array([[5.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 5.0]])
        np.testing.assert_array_equal(DacLabelMap(2).predicted_real(logits), [True, False])

    def test_plain_map_ignores_classes(self):
        label_map = PlainLabelMap()
        np.testing.assert_array_equal(label_map.real([3, 1]), [0, 0])
        np.testing.assert_array_equal(label_map.fake([3, 1]), [1, 1])


class TestEmbeddingDistances:

    def test_identical(self, rng):
        e = rng.normal(size=(5, 3))
        dist = embedding_distances(e, e)
        assert dist.emb_mse == 0.0
        assert dist.emb_cos == pytest.approx(0.0, abs=1e-12)

    def test_opposite_rows(self):
        e = np.array([[1.0, 0.0], [0.0, 2.0]])
        assert embedding_distances(e, -e).emb_cos == pytest.approx(2.0)

    def test_zero_row_counts_as_one(self):
        e = np.array([[1.0, 0.0], [0.0, 0.0]])
        dist = embedding_distances(e, np.array([[1.0, 0.0], [1.0, 1.0]]))
        assert dist.zero_norm_rows == 1
        assert dist.emb_cos == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            embedding_distances(np.zeros((2, 3)), np.zeros((2, 2)))


# =============================================================================
# Models
# =============================================================================

class TestAttackModels:

    def test_dimensions(self):
        system, models = setup((0.25, 0.25, 0.5))
        assert models.encoder.input_dim == 6
        assert models.encoder.output_dim == 8
        assert models.decoder.input_dim == 4 + 8
        assert models.discriminator.output_dim == 4
        assert models.adversary_bottom is system.adversary_bottom

    def test_split_learning_decoder_reads_passive_embeddings_only(self):
        _, models = setup((0.0, 0.5, 0.5))
        assert "fa" not in models.networks()
        assert models.decoder.input_dim == 8

    def test_target_subset(self):
        _, models = setup((0.25, 0.25, 0.5), targets=(2, 3))
        assert models.decoder.output_dim == 2

    def test_target_outside_passive_columns(self):
        with pytest.raises(ContractError):
            setup(targets=(0,))

    def test_frozen_model_cannot_step(self):
        _, models = setup()
        models.freeze()
        assert models.frozen == {"fe", "fa"}
        with pytest.raises(ContractError):
            models.step("fe", {})

    def test_verify_frozen_detects_change(self):
        _, models = setup()
        models.freeze()
        models.encoder.parameters()[0].data += 0.1
        with pytest.raises(ContractError):
            models.verify_frozen()


# =============================================================================
# Rounds
# =============================================================================

class TestRounds:

    def test_pretraining_reduces_reconstruction_loss(self, splits):
        aux, _ = splits
        system, models = setup()
        history = pretrain(models, aux, system.partition, epochs=60, batch_size=16, rng=np.random.default_rng(0))
        assert len(history) == 60
        assert history[-1] < 0.2 * history[0]

    def test_malicious_round_requires_frozen_encoder(self, splits):
        aux, train = splits
        system, models = setup()
        with pytest.raises(ContractError):
            malicious_round(models, system, batch_of(train), batch_of(aux, 16))

    def test_malicious_round(self, splits):
        aux, train = splits
        system, models = setup()
        models.freeze()
        encoder_before = models.encoder.checksum()
        disc_before = models.discriminator.checksum()
        passive_before = system.passive_bottoms[0].checksum()
        record = malicious_round(models, system, batch_of(train), batch_of(aux, 16))
        assert set(record.losses) == {"L_M", "L_D"}
        assert record.gradients[0].shape == (32, 4)
        assert models.encoder.checksum() == encoder_before
        assert models.discriminator.checksum() != disc_before
        assert system.passive_bottoms[0].checksum() != passive_before

    def test_sync_round_updates_encoder(self, splits):
        aux, train = splits
        system, models = setup()
        before = models.encoder.checksum()
        record = sync_round(models, system, batch_of(train), batch_of(aux, 16))
        assert set(record.losses) == {"L_R", "L_M", "L_D"}
        assert models.encoder.checksum() != before

    def test_plain_round_needs_two_way_head(self, splits):
        aux, train = splits
        system, models = setup()
        models.freeze()
        with pytest.raises(ContractError):
            plain_discriminator_round(models, system, batch_of(train), batch_of(aux, 16))
        system, models = setup(plain=True)
        models.freeze()
        assert "L_M" in plain_discriminator_round(models, system, batch_of(train), batch_of(aux, 16)).losses

    def test_dac_gradients_depend_on_labels(self, splits):
        aux, train = splits
        batch = mixed_batch(train)
        empty = sample_aux_batch(aux, 0, np.random.default_rng(0))
        assert not np.array_equal(np.random.default_rng(5).permutation(batch.labels), batch.labels)
        sent = {}
        for plain in (False, True):
            for shuffled in (False, True):
                system, models = setup(plain=plain)
                models.freeze()
                record = malicious_round(models, system, batch, empty,
                                         shuffle_rng=np.random.default_rng(5) if shuffled else None)
                sent[plain, shuffled] = record.gradients[0]
        assert not np.allclose(sent[False, False], sent[False, True])
        np.testing.assert_array_equal(sent[True, False], sent[True, True])

    def test_empty_aux_batch_trains_discriminator_on_passive_rows_only(self, splits):
        aux, train = splits
        system, models = setup()
        models.freeze()
        batch = mixed_batch(train)
        before = clean_embeddings(system, batch.features)
        expected = cross_entropy_loss(models.discriminator(Tensor(before)),
                                      models.label_map.fake(batch.labels)).item()
        record = malicious_round(models, system, batch, sample_aux_batch(aux, 0, np.random.default_rng(0)))
        assert record.losses["L_D"] == pytest.approx(expected, rel=1e-12)

    def test_sync_round_without_encoder_updates_matches_malicious_round(self, splits):
        aux, train = splits
        batch, aux_batch = mixed_batch(train), batch_of(aux, 16)
        sync_system, sync_models = setup()
        for name in ("fe", "fd", "fa"):
            sync_models.optimizers[name].state.learning_rate = 0.0
        frozen_system, frozen_models = setup()
        frozen_models.freeze()

        synced = sync_round(sync_models, sync_system, batch, aux_batch)
        plain = malicious_round(frozen_models, frozen_system, batch, aux_batch)
        np.testing.assert_array_equal(synced.gradients[0], plain.gradients[0])
        assert synced.losses["L_M"] == plain.losses["L_M"]
        assert synced.losses["L_D"] == plain.losses["L_D"]
        assert sync_models.discriminator.checksum() == frozen_models.discriminator.checksum()
        assert sync_system.passive_bottoms[0].checksum() == frozen_system.passive_bottoms[0].checksum()

    def test_shuffled_labels_still_run(self, splits):
        aux, train = splits
        system, models = setup()
        models.freeze()
        record = malicious_round(models, system, batch_of(train), batch_of(aux, 16),
                                 shuffle_rng=np.random.default_rng(3))
        assert np.isfinite(record.loss)

    def test_aux_batch_without_replacement(self, splits):
        aux, _ = splits
        batch = sample_aux_batch(aux, 10, np.random.default_rng(0))
        assert len(set(batch.rows.tolist())) == 10
        assert len(sample_aux_batch(aux, 10 ** 6, np.random.default_rng(0)).rows) == aux.num_rows


# =============================================================================
# Reconstruction and driver
# =============================================================================

class TestReconstruction:

    def test_reconstruct_shapes(self, splits):
        aux, _ = splits
        system, models = setup()
        out = reconstruct_rows(models, system, aux.features)
        assert out.shape == (aux.num_rows, 4)

    def test_reconstruct_needs_adversary_features(self, rng):
        _, models = setup()
        with pytest.raises(ShapeError):
            reconstruct(models, None, rng.normal(size=(3, 4)))
        with pytest.raises(ShapeError):
            reconstruct(models, rng.normal(size=(3, 4)), rng.normal(size=(3, 5)))

    def test_run_attack_records(self, splits):
        aux, train = splits
        system, models = setup()
        seen = []
        trace = run_attack(models, system, train, aux, "urvfl", rounds=9, batch_size=32, aux_batch_size=16,
                           pretrain_epochs=2, batching_rng=np.random.default_rng(0),
                           attack_rng=np.random.default_rng(1), distance_every=4, log_every=0,
                           hooks=[seen.append])
        assert len(trace.records) == 9 == len(seen)
        assert [r.round for r in trace.records] == list(range(9))
        assert len(trace.pretrain_losses) == 2
        assert [d["round"] for d in trace.distances] == [0, 4, 8]
        assert models.frozen == {"fe", "fa"}

    def test_run_attack_rejects_unknown_variant(self, splits):
        aux, train = splits
        system, models = setup()
        with pytest.raises(ContractError):
            run_attack(models, system, train, aux, "gan", 1, 8, 8, 1,
                       np.random.default_rng(0), np.random.default_rng(1))

    def test_run_attack_plain_variant_uses_two_way_rounds(self, splits):
        aux, train = splits
        system, models = setup()
        with pytest.raises(ContractError):
            run_attack(models, system, train, aux, "plain_discriminator", 1, 8, 8, 1,
                       np.random.default_rng(0), np.random.default_rng(1))
        system, models = setup(plain=True)
        trace = run_attack(models, system, train, aux, "plain_discriminator", 3, 8, 8, 1,
                           np.random.default_rng(0), np.random.default_rng(1), log_every=0)
        assert len(trace.records) == 3
        assert models.frozen == {"fe", "fa"}

    def test_run_attack_empty_train(self, splits):
        aux, train = splits
        system, models = setup()
        with pytest.raises(ContractError):
            run_attack(models, system, train.subset([]), aux, "urvfl", 1, 8, 8, 1,
                       np.random.default_rng(0), np.random.default_rng(1))

    @pytest.mark.slow
    def test_attack_pulls_passive_embeddings_toward_encoder(self, splits):
        aux, train = splits
        system, models = setup()
        trace = run_attack(models, system, train, aux, "urvfl", rounds=200, batch_size=32, aux_batch_size=16,
                           pretrain_epochs=30, batching_rng=np.random.default_rng(0),
                           attack_rng=np.random.default_rng(1), distance_every=50, log_every=0)
        first, last = trace.distances[0], trace.distances[-1]
        assert last["emb_mse"] < first["emb_mse"]
        clean = clean_embeddings(system, aux.features)
        assert clean.shape == (aux.num_rows, 4)
