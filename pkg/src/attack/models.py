"""
Adversary-side models.

fe imitates the passive bottoms (all passive columns in, concatenated passive
embedding out), fd inverts [f_a(x_a), h_p] back to the target columns, and the
discriminator reads passive embeddings only. Discriminator targets come from a
label map: the DAC head uses 2C classes (real y -> y, fake y -> C + y), the
plain baseline uses 2 (real -> 0, fake -> 1).
"""

import hashlib
import logging
from typing import Optional

import numpy as np

from ..autodiff import Network, Optimizer
from ..errors import ContractError, ShapeError

logger = logging.getLogger(__name__)


class DacLabelMap:
    def __init__(self, num_classes: int):
        if num_classes < 2:
            raise ContractError(f"DAC needs at least 2 classes, got {num_classes}")
        self.num_classes = num_classes
        self.size = 2 * num_classes

    def real(self, labels) -> np.ndarray:
        return np.asarray(labels, dtype=np.int64)

    def fake(self, labels) -> np.ndarray:
        return np.asarray(labels, dtype=np.int64) + self.num_classes

    def decode(self, index: int):
        """(class, is_real) for a head index."""
        if not 0 <= index < self.size:
            raise ContractError(f"DAC index {index} outside [0, {self.size})")
        return index % self.num_classes, index < self.num_classes

    def predicted_real(self, logits: np.ndarray) -> np.ndarray:
        return np.argmax(logits, axis=1) < self.num_classes


class PlainLabelMap:
    """Real/fake only; class labels are ignored."""

    size = 2

    def real(self, labels) -> np.ndarray:
        return np.zeros(len(labels), dtype=np.int64)

    def fake(self, labels) -> np.ndarray:
        return np.ones(len(labels), dtype=np.int64)

    def decode(self, index: int):
        if index not in (0, 1):
            raise ContractError(f"discriminator index {index} outside [0, 2)")
        return None, index == 0

    def predicted_real(self, logits: np.ndarray) -> np.ndarray:
        return np.argmax(logits, axis=1) == 0


class AttackModels:
    def __init__(self, encoder: Network, decoder: Network, discriminator: Network,
                 adversary_bottom: Optional[Network], label_map, target_columns: tuple,
                 passive_columns: tuple, passive_embedding_dim: int, optimizers: dict):
        self.encoder = encoder
        self.decoder = decoder
        self.discriminator = discriminator
        self.adversary_bottom = adversary_bottom
        self.label_map = label_map
        self.target_columns = tuple(target_columns)
        self.passive_columns = tuple(passive_columns)
        self.optimizers = optimizers
        self.frozen = set()
        self._frozen_checksum = None

        outside = set(self.target_columns) - set(self.passive_columns)
        if not self.target_columns or outside:
            raise ContractError(f"target columns must be a non-empty subset of passive columns; outside: {sorted(outside)}")
        if encoder.input_dim != len(self.passive_columns):
            raise ShapeError(f"encoder takes {encoder.input_dim} inputs, passives hold {len(self.passive_columns)} columns")
        if encoder.output_dim != passive_embedding_dim:
            raise ShapeError(f"encoder emits {encoder.output_dim}, passive embeddings total {passive_embedding_dim}")
        own = adversary_bottom.output_dim if adversary_bottom is not None else 0
        if decoder.input_dim != own + encoder.output_dim:
            raise ShapeError(f"decoder takes {decoder.input_dim}, expected {own + encoder.output_dim}")
        if decoder.output_dim != len(self.target_columns):
            raise ShapeError(f"decoder emits {decoder.output_dim}, expected {len(self.target_columns)} target columns")
        if discriminator.input_dim != encoder.output_dim:
            raise ShapeError(f"discriminator takes {discriminator.input_dim}, expected {encoder.output_dim}")
        if discriminator.output_dim != label_map.size:
            raise ShapeError(f"discriminator emits {discriminator.output_dim}, label map needs {label_map.size}")

    def networks(self) -> dict:
        nets = {"fe": self.encoder, "fd": self.decoder, "D": self.discriminator}
        if self.adversary_bottom is not None:
            nets["fa"] = self.adversary_bottom
        return nets

    def freeze(self, names=("fe", "fa")) -> None:
        self.frozen = {name for name in names if name in self.networks()}
        self._frozen_checksum = self.checksum(self.frozen)
        logger.debug("Froze %s", sorted(self.frozen))

    def checksum(self, names) -> str:
        digest = hashlib.sha256()
        nets = self.networks()
        for name in sorted(names):
            digest.update(nets[name].checksum().encode())
        return digest.hexdigest()

    def verify_frozen(self) -> None:
        if self._frozen_checksum is not None and self.checksum(self.frozen) != self._frozen_checksum:
            raise ContractError(f"frozen models {sorted(self.frozen)} changed during a malicious round")

    def step(self, name: str, grads: dict) -> None:
        if name in self.frozen:
            raise ContractError(f"attempted to update frozen model {name}")
        self.optimizers[name].step(grads)


def build_attack_models(passive_columns: tuple, passive_embedding_dim: int, adversary_bottom: Optional[Network],
                        target_columns: tuple, num_classes: int, hidden: int, rng: np.random.Generator,
                        plain_discriminator: bool = False, encoder_depth: int = 2,
                        learning_rate: float = 1e-3, optimizer: str = "adam",
                        adversary_optimizer: Optimizer = None) -> AttackModels:
    """fe mirrors the passive bottoms (tanh output); fd and D use one hidden relu layer."""
    encoder = Network.mlp([len(passive_columns)] + [hidden] * (encoder_depth - 1) + [passive_embedding_dim],
                          activation="relu", output_activation="tanh", rng=rng, name="fe")
    own = adversary_bottom.output_dim if adversary_bottom is not None else 0
    decoder = Network.mlp([own + passive_embedding_dim, hidden, len(target_columns)],
                          activation="relu", rng=rng, name="fd")
    label_map = PlainLabelMap() if plain_discriminator else DacLabelMap(num_classes)
    discriminator = Network.mlp([passive_embedding_dim, hidden, label_map.size],
                                activation="relu", rng=rng, name="D")

    optimizers = {
        "fe": Optimizer(encoder.parameters(), optimizer, learning_rate),
        "fd": Optimizer(decoder.parameters(), optimizer, learning_rate),
        "D": Optimizer(discriminator.parameters(), optimizer, learning_rate),
    }
    if adversary_bottom is not None:
        optimizers["fa"] = adversary_optimizer or Optimizer(adversary_bottom.parameters(), optimizer, learning_rate)
    return AttackModels(encoder, decoder, discriminator, adversary_bottom, label_map, target_columns,
                        passive_columns, passive_embedding_dim, optimizers)
