"""
Attack rounds run by the active client.

Variants:
    urvfl               pretrain fe/fa/fd on aux, freeze fe/fa, then DAC rounds
    urvfl_sync          reconstruction step and DAC round interleaved every round
    plain_discriminator as urvfl with a 2-way real/fake discriminator

Passive clients are driven exactly as in honest training; only the gradient
they receive differs.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..autodiff import Tensor, backward, concat_features, cross_entropy_loss, mse_loss
from ..data import Dataset
from ..errors import ContractError, ShapeError
from ..protocol import Batch, RoundRecord, VflSystem, iterate_batches
from .models import AttackModels

logger = logging.getLogger(__name__)

VARIANTS = ("urvfl", "urvfl_sync", "plain_discriminator")


class EmbeddingDistances(NamedTuple):
    emb_mse: float
    emb_cos: float
    zero_norm_rows: int


def embedding_distances(E: np.ndarray, T: np.ndarray) -> EmbeddingDistances:
    """Mean squared difference and mean (1 - cosine) over row-normalized embeddings.

    A row with zero norm on either side counts as cosine distance 1.
    """
    E, T = np.asarray(E, dtype=np.float64), np.asarray(T, dtype=np.float64)
    if E.shape != T.shape:
        raise ShapeError(f"embedding shapes differ: {E.shape} vs {T.shape}")
    if E.ndim != 2 or E.shape[0] < 1:
        raise ShapeError(f"need at least one embedding row, got {E.shape}")
    emb_mse = float(np.mean((E - T) ** 2))
    ne = np.linalg.norm(E, axis=1)
    nt = np.linalg.norm(T, axis=1)
    zero = (ne == 0) | (nt == 0)
    cosine = np.zeros(len(E))
    ok = ~zero
    cosine[ok] = np.sum(E[ok] * T[ok], axis=1) / (ne[ok] * nt[ok])
    distance = np.where(zero, 1.0, 1.0 - cosine)
    if zero.any():
        logger.warning("%d zero-norm embedding row(s) counted as cosine distance 1", int(zero.sum()))
    return EmbeddingDistances(emb_mse, float(distance.mean()), int(zero.sum()))


# ---------------------------------------------------------------------
# HELPERS
# ---------------------------------------------------------------------
def _adversary_embedding(models: AttackModels, features: np.ndarray, partition):
    if models.adversary_bottom is None:
        return None
    return models.adversary_bottom(features[:, list(partition.adversary_columns)])


def _decode(models: AttackModels, h_a, h_p) -> Tensor:
    return models.decoder(h_p if h_a is None else concat_features([h_a, h_p]))


def encoder_embeddings(models: AttackModels, features: np.ndarray) -> np.ndarray:
    return models.encoder(features[:, list(models.passive_columns)]).numpy()


def sample_aux_batch(aux: Dataset, batch_size: int, rng: np.random.Generator) -> Batch:
    """Rows drawn fresh each round, independent of the training batches."""
    size = min(batch_size, aux.num_rows)
    rows = rng.choice(aux.num_rows, size=size, replace=False) if size else np.empty(0, dtype=np.int64)
    return Batch(aux.row_ids[rows], aux.features[rows], aux.labels[rows])


def _attack_labels(labels: np.ndarray, shuffle_rng: Optional[np.random.Generator]) -> np.ndarray:
    return labels if shuffle_rng is None else shuffle_rng.permutation(labels)


# ---------------------------------------------------------------------
# PRETRAINING
# ---------------------------------------------------------------------
def reconstruction_step(models: AttackModels, features: np.ndarray, partition) -> float:
    """One L_R step on adversary-held rows; updates fe, fd and fa."""
    h_a = _adversary_embedding(models, features, partition)
    h_p = models.encoder(features[:, list(models.passive_columns)])
    loss = mse_loss(_decode(models, h_a, h_p), features[:, list(models.target_columns)])
    value = loss.item()
    grads = backward(loss)
    models.step("fe", grads)
    models.step("fd", grads)
    if models.adversary_bottom is not None:
        models.step("fa", grads)
    return value


def pretrain_epoch(models: AttackModels, aux: Dataset, partition, batch_size: int,
                   rng: np.random.Generator) -> float:
    if aux.num_rows == 0:
        raise ContractError("pretraining needs a non-empty auxiliary set")
    losses, sizes = [], []
    for batch in iterate_batches(aux, batch_size, rng):
        losses.append(reconstruction_step(models, batch.features, partition))
        sizes.append(len(batch.rows))
    return float(np.average(losses, weights=sizes))


def pretrain(models: AttackModels, aux: Dataset, partition, epochs: int, batch_size: int,
             rng: np.random.Generator) -> list:
    history = []
    for epoch in range(epochs):
        history.append(pretrain_epoch(models, aux, partition, batch_size, rng))
        logger.debug("Pretrain epoch %d: L_R %.5f", epoch + 1, history[-1])
    if history:
        logger.info("Pretraining done: L_R %.5f -> %.5f over %d epochs", history[0], history[-1], epochs)
    return history


# ---------------------------------------------------------------------
# ADVERSARIAL ROUNDS
# ---------------------------------------------------------------------
def _adversarial_round(models: AttackModels, sys: VflSystem, batch: Batch, aux_batch: Batch,
                       round_index: int, shuffle_rng, losses: dict) -> RoundRecord:
    if len(batch.rows) == 0:
        raise ContractError("attack round on an empty training batch")
    if batch.labels is None:
        raise ContractError("attack round needs the batch labels")
    labels, fake = sys.round_labels(round_index, batch.labels)
    labels = _attack_labels(labels, shuffle_rng)
    label_map = models.label_map

    uploaded = sys.upload_all(batch.features)
    leaves = [Tensor(h, requires_grad=True) for h in uploaded]
    h_p = concat_features(leaves)
    malicious = cross_entropy_loss(models.discriminator(h_p), label_map.real(labels))
    losses["L_M"] = malicious.item()
    grads = backward(malicious, wrt=leaves)
    sent = [grads[leaf].copy() for leaf in leaves]
    sys.send_gradients(round_index, sent, batch.labels, fake)

    # Discriminator update uses this round's pre-update passive embeddings.
    disc = cross_entropy_loss(models.discriminator(Tensor(h_p.data)), label_map.fake(labels))
    if len(aux_batch.rows):
        aux_labels = _attack_labels(aux_batch.labels, shuffle_rng)
        h_aux = Tensor(encoder_embeddings(models, aux_batch.features))
        disc = disc + cross_entropy_loss(models.discriminator(h_aux), label_map.real(aux_labels))
    losses["L_D"] = disc.item()
    models.step("D", backward(disc))
    return RoundRecord(round_index, batch.rows, uploaded, sent, losses["L_M"], fake, losses)


def malicious_round(models: AttackModels, sys: VflSystem, batch: Batch, aux_batch: Batch,
                    round_index: int = 0, shuffle_rng: np.random.Generator = None) -> RoundRecord:
    """DAC round with fe/fa frozen; `record.losses` holds L_M and L_D."""
    if not {"fe"} <= models.frozen:
        raise ContractError("malicious rounds require the encoder to be frozen")
    record = _adversarial_round(models, sys, batch, aux_batch, round_index, shuffle_rng, {})
    models.verify_frozen()
    return record


def sync_round(models: AttackModels, sys: VflSystem, batch: Batch, aux_batch: Batch,
               round_index: int = 0, shuffle_rng: np.random.Generator = None) -> RoundRecord:
    """Reconstruction step on the aux batch, then the DAC round with the updated encoder."""
    losses = {}
    if len(aux_batch.rows):
        losses["L_R"] = reconstruction_step(models, aux_batch.features, sys.partition)
    return _adversarial_round(models, sys, batch, aux_batch, round_index, shuffle_rng, losses)


def plain_discriminator_round(models: AttackModels, sys: VflSystem, batch: Batch, aux_batch: Batch,
                              round_index: int = 0, shuffle_rng: np.random.Generator = None) -> RoundRecord:
    """Malicious round against a 2-way real/fake discriminator; labels never reach the head."""
    if models.label_map.size != 2:
        raise ContractError("plain discriminator rounds need a 2-way discriminator")
    return malicious_round(models, sys, batch, aux_batch, round_index, shuffle_rng)


# ---------------------------------------------------------------------
# RECONSTRUCTION AND DISCRIMINATOR ACCURACY
# ---------------------------------------------------------------------
def reconstruct(models: AttackModels, x_a: Optional[np.ndarray], h_p: np.ndarray) -> np.ndarray:
    """fd(fa(x_a) || h_p), or fd(h_p) when the adversary holds no features."""
    h_p = np.asarray(h_p, dtype=np.float64)
    if h_p.ndim != 2 or h_p.shape[1] != models.encoder.output_dim:
        raise ShapeError(f"passive embeddings must be n x {models.encoder.output_dim}, got {h_p.shape}")
    h_a = None
    if models.adversary_bottom is not None:
        if x_a is None:
            raise ShapeError("adversary features required: the adversary holds columns")
        h_a = models.adversary_bottom(np.asarray(x_a, dtype=np.float64))
    return _decode(models, h_a, Tensor(h_p)).numpy()


def observed_embeddings(sys: VflSystem, features: np.ndarray) -> np.ndarray:
    """Passive embeddings as the adversary receives them (upload defenses applied)."""
    return np.concatenate([c.defense.on_upload(c.embed(features)) for c in sys.passive_clients], axis=1)


def clean_embeddings(sys: VflSystem, features: np.ndarray) -> np.ndarray:
    return np.concatenate([c.embed(features) for c in sys.passive_clients], axis=1)


def reconstruct_rows(models: AttackModels, sys: VflSystem, features: np.ndarray) -> np.ndarray:
    x_a = sys.adversary_features(features) if models.adversary_bottom is not None else None
    return reconstruct(models, x_a, observed_embeddings(sys, features))


def probe_accuracy(models: AttackModels, real: np.ndarray, fake: np.ndarray) -> float:
    """Real/fake accuracy of the discriminator; 0.5 once the two sets are indistinguishable."""
    real_hits = models.label_map.predicted_real(models.discriminator(real).numpy())
    fake_hits = ~models.label_map.predicted_real(models.discriminator(fake).numpy())
    return float(np.mean(np.concatenate([real_hits, fake_hits])))


# ---------------------------------------------------------------------
# DRIVER
# ---------------------------------------------------------------------
@dataclass
class AttackTrace:
    records: list = field(default_factory=list)
    pretrain_losses: list = field(default_factory=list)
    distances: list = field(default_factory=list)


def run_attack(models: AttackModels, sys: VflSystem, train: Dataset, aux: Dataset, variant: str,
               rounds: int, batch_size: int, aux_batch_size: int, pretrain_epochs: int,
               batching_rng: np.random.Generator, attack_rng: np.random.Generator,
               shuffle_rng: np.random.Generator = None, distance_every: int = 10,
               log_every: int = 50, hooks=(), pretrain_batch_size: int = None) -> AttackTrace:
    """Pretraining (non-sync variants), then `rounds` adversarial rounds over reshuffled epochs.

    Pretraining batches default to `aux_batch_size`.
    """
    if variant not in VARIANTS:
        raise ContractError(f"unknown attack variant '{variant}', expected one of {VARIANTS}")
    if train.num_rows == 0:
        raise ContractError("attack needs a non-empty training set")
    trace = AttackTrace()
    if variant != "urvfl_sync":
        if pretrain_epochs and aux.num_rows:
            trace.pretrain_losses = pretrain(models, aux, sys.partition, pretrain_epochs,
                                             pretrain_batch_size or aux_batch_size, attack_rng)
        models.freeze()

    held_out = sample_aux_batch(aux, aux_batch_size, attack_rng) if aux.num_rows else None
    round_fn = {"urvfl": malicious_round, "urvfl_sync": sync_round,
                "plain_discriminator": plain_discriminator_round}[variant]

    def measure(round_index: int) -> None:
        if held_out is None or len(held_out.rows) == 0:
            return
        fake = clean_embeddings(sys, held_out.features)
        real = encoder_embeddings(models, held_out.features)
        dist = embedding_distances(real, fake)
        trace.distances.append({"round": round_index, "emb_mse": dist.emb_mse, "emb_cos": dist.emb_cos,
                                "probe_accuracy": probe_accuracy(models, real, fake)})

    measure(0)
    round_index = 0
    while round_index < rounds:
        for batch in iterate_batches(train, batch_size, batching_rng):
            if round_index >= rounds:
                break
            aux_batch = sample_aux_batch(aux, aux_batch_size, attack_rng)
            record = round_fn(models, sys, batch, aux_batch, round_index, shuffle_rng)
            trace.records.append(record)
            for hook in hooks:
                hook(record)
            round_index += 1
            if distance_every and round_index % distance_every == 0:
                measure(round_index)
            if log_every and round_index % log_every == 0:
                logger.info("Attack round %d/%d: %s", round_index, rounds,
                            ", ".join(f"{k} {v:.4f}" for k, v in record.losses.items()))
    return trace
