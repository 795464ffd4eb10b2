"""
Honest split VFL: system assembly, rounds, passive-side behaviour and inference.
"""

import numpy as np
import pytest

from src.data import standardize, vertical_partition
from src.defend import DefenseConfig
from src.detect import DETECTED, GradientScrutinizer, GsState
from src.errors import ContractError, ShapeError
from src.protocol import (
    Batch,
    RoundRecord,
    accuracy,
    build_vfl_system,
    honest_round,
    iterate_batches,
    predict,
    predict_logits,
    run_honest_training,
)


@pytest.fixture
def scaled(mixture):
    return standardize(mixture)[0]


def build(partition, rng, **kwargs):
    kwargs.setdefault("learning_rate", 0.01)
    return build_vfl_system(partition, num_classes=2, embedding_dim=4, hidden=16, rng=rng, **kwargs)


def first_batch(ds, size=32):
    return Batch(ds.row_ids[:size], ds.features[:size], ds.labels[:size])


class TestAssembly:

    def test_dimensions(self, rng):
        system = build(vertical_partition(8, [0.25, 0.25, 0.5]), rng)
        assert len(system.passive_clients) == 2
        assert system.adversary_bottom.input_dim == 2
        assert system.concat_dim == 12
        assert system.top.input_dim == 12

    def test_split_learning_has_no_adversary_bottom(self, rng):
        system = build(vertical_partition(8, [0.0, 0.5, 0.5]), rng)
        assert system.adversary_bottom is None
        assert system.concat_dim == 8

    def test_attack_build_has_no_top(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng, with_top=False)
        assert system.top is None
        with pytest.raises(ContractError):
            predict_logits(system, scaled.features)

    def test_round_record_checks_shapes(self):
        with pytest.raises(ShapeError):
            RoundRecord(0, np.arange(2), [np.zeros((2, 3))], [np.zeros((2, 4))], 0.0)


class TestHonestTraining:

    def test_learns_separable_mixture(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        trace = run_honest_training(system, scaled, epochs=10, batch_size=32, rng=np.random.default_rng(0))
        assert len(trace) == 10 * 7
        assert trace[-1].loss < trace[0].loss
        assert accuracy(system, scaled) > 0.9

    def test_round_sends_one_gradient_per_client(self, rng, scaled):
        system = build(vertical_partition(8, [0.25, 0.25, 0.5]), rng)
        record = honest_round(system, first_batch(scaled, 10))
        assert len(record.gradients) == 2
        for h, g in zip(record.embeddings, record.gradients):
            assert h.shape == g.shape == (10, 4)

    def test_passive_bottoms_update(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        before = system.passive_bottoms[0].checksum()
        honest_round(system, first_batch(scaled))
        assert system.passive_bottoms[0].checksum() != before

    def test_hooks_see_every_round(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        seen = []
        run_honest_training(system, scaled, 1, 64, np.random.default_rng(1), hooks=[seen.append])
        assert [r.round for r in seen] == [0, 1, 2, 3]

    def test_empty_batch_rejected(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        with pytest.raises(ContractError):
            honest_round(system, first_batch(scaled, 0))

    def test_predict_shape(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        assert predict(system, scaled.features[:5]).shape == (5,)
        with pytest.raises(ShapeError):
            predict(system, scaled.features[:, :4])


class TestPassiveClient:

    def test_fake_batch_skips_local_update(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        client = system.passive_clients[0]
        before = client.bottom.checksum()
        uploaded = client.upload(scaled.features[:8])
        client.download(0, np.ones_like(uploaded), scaled.labels[:8], fake=True)
        assert client.bottom.checksum() == before

    def test_halted_client_stops_training(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        client = system.passive_clients[0]
        client.detectors.append(GradientScrutinizer(1, GsState(decision=DETECTED)))
        before = client.bottom.checksum()
        honest_round(system, first_batch(scaled))
        assert client.halted
        assert system.halted_clients == [1]
        assert client.bottom.checksum() == before

    def test_download_without_upload(self, rng):
        system = build(vertical_partition(8, [0.5, 0.5]), rng)
        with pytest.raises(ContractError):
            system.passive_clients[0].download(0, np.zeros((2, 4)), np.zeros(2, dtype=int), False)

    def test_gradient_shape_must_match(self, rng, scaled):
        client = build(vertical_partition(8, [0.5, 0.5]), rng).passive_clients[0]
        client.upload(scaled.features[:4])
        with pytest.raises(ShapeError):
            client.download(0, np.zeros((4, 3)), scaled.labels[:4], False)

    def test_obfuscation_applies_on_upload(self, rng, scaled):
        system = build(vertical_partition(8, [0.5, 0.5]), rng, defense=DefenseConfig(noise_sigma=0.5))
        client = system.passive_clients[0]
        clean = client.embed(scaled.features[:16])
        noisy = client.upload(scaled.features[:16])
        assert not np.allclose(clean, noisy)
        assert np.std(noisy - clean) == pytest.approx(0.5, rel=0.35)


def test_iterate_batches_covers_each_row_once(mixture):
    rows = np.concatenate([b.rows for b in iterate_batches(mixture, 30, np.random.default_rng(0))])
    assert sorted(rows.tolist()) == list(range(mixture.num_rows))
