"""
Split VFL with one active client and N passive clients.

Round flow (honest):
    passive n: h_n = f_n(x_n), defenses applied, h_n uploaded
    active:    h_a = f_a(x_a); logits = f_0([h_a, h_1, ..., h_N]); CE loss
    active:    dL/dh_n returned to each passive client; f_0 and f_a step
    passive n: defenses on the received gradient, detectors observe it,
               then f_n steps (skipped on fake batches and once halted)

The same PassiveClient is driven by the attack rounds, so passive behaviour
(defenses, detection, halting) is identical whatever the active side does.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..autodiff import Network, Optimizer, Tensor, backward, concat_features, cross_entropy_loss
from ..data import Dataset, VerticalPartition
from ..defend import DefenseConfig, DefensePipeline
from ..detect import FakeBatchSchedule
from ..errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


class Batch(NamedTuple):
    rows: np.ndarray
    features: np.ndarray
    labels: np.ndarray


@dataclass
class RoundRecord:
    """What crossed the wire in one round; gradients are as sent, before passive-side defenses."""

    round: int
    rows: np.ndarray
    embeddings: list
    gradients: list
    loss: float
    fake_batch: bool = False
    losses: dict = field(default_factory=dict)

    def __post_init__(self):
        for index, (h, g) in enumerate(zip(self.embeddings, self.gradients), start=1):
            if np.shape(h) != np.shape(g):
                raise ShapeError(f"client {index}: gradient {np.shape(g)} vs embedding {np.shape(h)}")


# ---------------------------------------------------------------------
# PASSIVE CLIENT
# ---------------------------------------------------------------------
class PassiveClient:
    def __init__(self, index: int, columns: tuple, bottom: Network, optimizer: Optimizer,
                 defense: DefensePipeline = None):
        if bottom.input_dim != len(columns):
            raise ShapeError(f"client {index}: bottom model takes {bottom.input_dim} inputs, "
                             f"holds {len(columns)} columns")
        self.index = index
        self.columns = tuple(columns)
        self.bottom = bottom
        self.optimizer = optimizer
        self.defense = defense or DefensePipeline(DefenseConfig(), np.random.default_rng(0))
        self.detectors = []
        self.grad_norm = None
        self.halted = False
        self._pending = None

    def local_features(self, features: np.ndarray) -> np.ndarray:
        return features[:, list(self.columns)]

    def embed(self, features: np.ndarray) -> np.ndarray:
        """Clean embeddings of full feature rows, no graph kept."""
        return self.bottom(self.local_features(features)).numpy()

    def upload(self, features: np.ndarray) -> np.ndarray:
        x = self.local_features(features)
        h = self.bottom(x)
        self._pending = (x, h)
        return self.defense.on_upload(h.numpy())

    def download(self, round_index: int, received: np.ndarray, true_labels, fake: bool) -> list:
        """Apply defenses, feed detectors, update unless fake or halted. Returns detection events."""
        if self._pending is None:
            raise ContractError(f"client {self.index} received gradients without an upload")
        x, h = self._pending
        self._pending = None
        if received.shape != h.shape:
            raise ShapeError(f"client {self.index}: gradient {received.shape} vs embedding {h.shape}")
        grads = self.defense.on_download(received)

        events = []
        for detector in self.detectors:
            if detector.name == "splitguard":
                event = detector.observe(round_index, grads, true_labels, fake)
            elif not fake:
                event = detector.observe(round_index, grads, true_labels)
            else:
                event = None
            if event is not None:
                events.append(event)
        if self.grad_norm is not None and not fake:
            self.grad_norm.observe(round_index, grads)

        if not self.halted and any(d.detected for d in self.detectors):
            self.halted = True
            logger.warning("Client %d halts local training from round %d", self.index, round_index)
        if self.halted or fake:
            return events

        loss = self.defense.local_loss(h, grads, x)
        self.optimizer.step(backward(loss))
        return events


# ---------------------------------------------------------------------
# SYSTEM
# ---------------------------------------------------------------------
class VflSystem:
    """Top model f0 (None in attack mode), adversary bottom f_a (None with no adversary features)."""

    def __init__(self, top: Optional[Network], adversary_bottom: Optional[Network], passive_clients: list,
                 partition: VerticalPartition, num_classes: int,
                 top_optimizer: Optimizer = None, adversary_optimizer: Optimizer = None):
        if len(passive_clients) != partition.num_passive:
            raise ShapeError(f"{len(passive_clients)} passive clients for a {partition.num_passive}-way partition")
        for client in passive_clients:
            if client.columns != partition.passive_columns(client.index):
                raise ShapeError(f"client {client.index} columns do not match the partition")
        if partition.split_learning and adversary_bottom is not None:
            raise ShapeError("adversary holds no columns but has a bottom model")
        if adversary_bottom is not None and adversary_bottom.input_dim != len(partition.adversary_columns):
            raise ShapeError(f"adversary bottom takes {adversary_bottom.input_dim} inputs, "
                             f"holds {len(partition.adversary_columns)} columns")

        self.top = top
        self.adversary_bottom = adversary_bottom
        self.passive_clients = list(passive_clients)
        self.partition = partition
        self.num_classes = num_classes
        self.top_optimizer = top_optimizer
        self.adversary_optimizer = adversary_optimizer
        self.fake_schedule: Optional[FakeBatchSchedule] = None
        self.events = []

        if top is not None and top.input_dim != self.concat_dim:
            raise ShapeError(f"top model takes {top.input_dim} inputs, embeddings concatenate to {self.concat_dim}")

    @property
    def passive_bottoms(self) -> list:
        return [client.bottom for client in self.passive_clients]

    @property
    def passive_embedding_dim(self) -> int:
        return sum(net.output_dim for net in self.passive_bottoms)

    @property
    def concat_dim(self) -> int:
        own = self.adversary_bottom.output_dim if self.adversary_bottom is not None else 0
        return own + self.passive_embedding_dim

    @property
    def halted_clients(self) -> list:
        return [c.index for c in self.passive_clients if c.halted]

    def adversary_features(self, features: np.ndarray) -> np.ndarray:
        return features[:, list(self.partition.adversary_columns)]

    def passive_features(self, features: np.ndarray) -> np.ndarray:
        return features[:, list(self.partition.all_passive_columns)]

    def round_labels(self, round_index: int, labels: np.ndarray):
        """Labels the active side trains on this round, and whether it is a fake batch."""
        if self.fake_schedule is None:
            return labels, False
        if self.fake_schedule.is_fake(round_index):
            return self.fake_schedule.fake_labels(labels, self.num_classes), True
        return labels, False

    def upload_all(self, features: np.ndarray) -> list:
        return [client.upload(features) for client in self.passive_clients]

    def send_gradients(self, round_index: int, gradients: list, true_labels, fake: bool) -> None:
        for client, grads in zip(self.passive_clients, gradients):
            self.events.extend(client.download(round_index, grads, true_labels, fake))


def build_vfl_system(partition: VerticalPartition, num_classes: int, embedding_dim: int, hidden: int,
                     rng: np.random.Generator, with_top: bool = True, bottom_depth: int = 2,
                     learning_rate: float = 1e-3, optimizer: str = "adam",
                     defense: DefenseConfig = None, noise_rng: np.random.Generator = None) -> VflSystem:
    """Bottoms: tanh-output MLPs of `bottom_depth` layers; top: one hidden relu layer."""
    defense = defense or DefenseConfig()
    noise_rng = noise_rng if noise_rng is not None else np.random.default_rng(0)

    def bottom(inputs: int, name: str) -> Network:
        sizes = [inputs] + [hidden] * (bottom_depth - 1) + [embedding_dim]
        return Network.mlp(sizes, activation="relu", output_activation="tanh", rng=rng, name=name)

    clients = []
    for index in range(1, partition.num_passive + 1):
        columns = partition.passive_columns(index)
        net = bottom(len(columns), f"f{index}")
        client_rng = np.random.default_rng(noise_rng.integers(2 ** 63))
        clients.append(PassiveClient(index, columns, net, Optimizer(net.parameters(), optimizer, learning_rate),
                                     DefensePipeline(defense, client_rng)))

    adversary = None
    adversary_optimizer = None
    if not partition.split_learning:
        adversary = bottom(len(partition.adversary_columns), "fa")
        adversary_optimizer = Optimizer(adversary.parameters(), optimizer, learning_rate)

    top = top_optimizer = None
    if with_top:
        concat = (adversary.output_dim if adversary is not None else 0) + embedding_dim * partition.num_passive
        top = Network.mlp([concat, hidden, num_classes], activation="relu", rng=rng, name="f0")
        top_optimizer = Optimizer(top.parameters(), optimizer, learning_rate)

    return VflSystem(top, adversary, clients, partition, num_classes, top_optimizer, adversary_optimizer)


# ---------------------------------------------------------------------
# HONEST TRAINING
# ---------------------------------------------------------------------
def iterate_batches(ds: Dataset, batch_size: int, rng: np.random.Generator):
    """One epoch of batches under a seeded shuffle; the last batch may be short."""
    order = rng.permutation(ds.num_rows)
    for start in range(0, ds.num_rows, batch_size):
        rows = order[start:start + batch_size]
        yield Batch(ds.row_ids[rows], ds.features[rows], ds.labels[rows])


def _forward_top(sys: VflSystem, features: np.ndarray, passive_embeddings: list):
    """Returns (logits, adversary embedding tensor, passive leaf tensors)."""
    leaves = [Tensor(h, requires_grad=True) for h in passive_embeddings]
    parts = list(leaves)
    h_a = None
    if sys.adversary_bottom is not None:
        h_a = sys.adversary_bottom(sys.adversary_features(features))
        parts.insert(0, h_a)
    return sys.top(concat_features(parts)), h_a, leaves


def honest_round(sys: VflSystem, batch: Batch, round_index: int = 0) -> RoundRecord:
    if sys.top is None:
        raise ContractError("honest_round needs a top model")
    if len(batch.rows) == 0:
        raise ContractError("honest_round on an empty batch")

    labels, fake = sys.round_labels(round_index, batch.labels)
    uploaded = sys.upload_all(batch.features)
    logits, _, leaves = _forward_top(sys, batch.features, uploaded)
    loss = cross_entropy_loss(logits, labels)
    loss_value = loss.item()
    grads = backward(loss, wrt=leaves)

    sys.top_optimizer.step(grads)
    if sys.adversary_bottom is not None:
        sys.adversary_optimizer.step(grads)
    sent = [grads[leaf].copy() for leaf in leaves]
    sys.send_gradients(round_index, sent, batch.labels, fake)
    return RoundRecord(round_index, batch.rows, uploaded, sent, loss_value, fake)


def run_honest_training(sys: VflSystem, train: Dataset, epochs: int, batch_size: int,
                        rng: np.random.Generator, hooks=()) -> list:
    """Seeded per-epoch shuffles; each hook is called with every RoundRecord."""
    if epochs < 0:
        raise ContractError(f"epochs must be >= 0, got {epochs}")
    trace = []
    round_index = 0
    for epoch in range(epochs):
        for batch in iterate_batches(train, batch_size, rng):
            record = honest_round(sys, batch, round_index)
            trace.append(record)
            for hook in hooks:
                hook(record)
            round_index += 1
        logger.debug("Epoch %d done, last loss %.4f", epoch + 1, trace[-1].loss if trace else float("nan"))
    return trace


# ---------------------------------------------------------------------
# INFERENCE
# ---------------------------------------------------------------------
def predict_logits(sys: VflSystem, features: np.ndarray) -> np.ndarray:
    if sys.top is None:
        raise ContractError("no top model: this system was built for an attack run")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != sys.partition.num_features:
        raise ShapeError(f"expected {sys.partition.num_features} features, got {features.shape[1]}")
    embeddings = [client.defense.on_upload(client.embed(features)) for client in sys.passive_clients]
    logits, _, _ = _forward_top(sys, features, embeddings)
    return logits.numpy()


def predict(sys: VflSystem, features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties go to the lowest index."""
    return np.argmax(predict_logits(sys, features), axis=1)


def accuracy(sys: VflSystem, ds: Dataset) -> float:
    if ds.num_rows == 0:
        return float("nan")
    return float(np.mean(predict(sys, ds.features) == ds.labels))
