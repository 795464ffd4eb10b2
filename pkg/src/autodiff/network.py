"""
Feed-forward networks built from affine layers and elementwise activations.

Every model in the simulator (top model, bottom models, encoder, decoder,
discriminators) is a Network. Layer dimensions are checked at construction
and again on every forward call; the parameter list never changes after
construction.
"""

import hashlib

import numpy as np

from ..errors import ContractError, ShapeError
from .tensor import Tensor, as_tensor

ACTIVATIONS = ("relu", "tanh", "identity")


class Affine:
    """x @ W + b with W uniform in +-sqrt(6 / (fan_in + fan_out)) and b = 0."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator = None):
        if in_features < 1 or out_features < 1:
            raise ShapeError(f"affine layer needs positive sizes, got {in_features}x{out_features}")
        rng = rng if rng is not None else np.random.default_rng()
        limit = np.sqrt(6.0 / (in_features + out_features))
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(rng.uniform(-limit, limit, size=(in_features, out_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def parameters(self) -> list:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def spec(self) -> dict:
        return {"type": "affine", "in": self.in_features, "out": self.out_features}


class Activation:
    """Parameter-free elementwise nonlinearity."""

    def __init__(self, kind: str):
        if kind not in ACTIVATIONS:
            raise ContractError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")
        self.kind = kind

    def parameters(self) -> list:
        return []

    def __call__(self, x: Tensor) -> Tensor:
        if self.kind == "relu":
            return x.relu()
        if self.kind == "tanh":
            return x.tanh()
        return x

    def spec(self) -> dict:
        return {"type": "activation", "kind": self.kind}


class Network:
    """Ordered sequence of layers."""

    def __init__(self, layers: list, name: str = "network"):
        affines = [layer for layer in layers if isinstance(layer, Affine)]
        if not affines:
            raise ShapeError("a network needs at least one affine layer")
        width = None
        for index, layer in enumerate(layers):
            if isinstance(layer, Affine):
                if width is not None and layer.in_features != width:
                    raise ShapeError(
                        f"expects {layer.in_features} inputs but previous layer gives {width}",
                        layer_index=index,
                    )
                width = layer.out_features
        self.layers = list(layers)
        self.name = name
        self._parameters = [p for layer in self.layers for p in layer.parameters()]

    @classmethod
    def mlp(cls, sizes: list, activation: str = "relu", output_activation: str = "identity",
            rng: np.random.Generator = None, name: str = "mlp") -> "Network":
        """Affine layers between consecutive `sizes`, `activation` between them."""
        if len(sizes) < 2:
            raise ShapeError(f"an MLP needs at least input and output sizes, got {sizes}")
        layers = []
        for index in range(len(sizes) - 1):
            layers.append(Affine(sizes[index], sizes[index + 1], rng))
            last = index == len(sizes) - 2
            kind = output_activation if last else activation
            if kind != "identity":
                layers.append(Activation(kind))
        return cls(layers, name=name)

    @classmethod
    def from_spec(cls, spec: dict, arrays: list = None) -> "Network":
        layers = []
        for entry in spec["layers"]:
            if entry["type"] == "affine":
                layers.append(Affine(entry["in"], entry["out"]))
            else:
                layers.append(Activation(entry["kind"]))
        net = cls(layers, name=spec.get("name", "network"))
        if arrays is not None:
            net.load_state_dict(arrays)
        return net

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------
    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 2:
            raise ShapeError(f"{self.name}: input must be batch x features, got {x.shape}", layer_index=0)
        for index, layer in enumerate(self.layers):
            if isinstance(layer, Affine) and x.shape[1] != layer.in_features:
                raise ShapeError(
                    f"{self.name}: got {x.shape[1]} features, expected {layer.in_features}",
                    layer_index=index,
                )
            x = layer(x)
        return x

    __call__ = forward

    # ------------------------------------------------------------------
    # Introspection and state
    # ------------------------------------------------------------------
    @property
    def input_dim(self) -> int:
        return next(layer for layer in self.layers if isinstance(layer, Affine)).in_features

    @property
    def output_dim(self) -> int:
        return [layer for layer in self.layers if isinstance(layer, Affine)][-1].out_features

    @property
    def depth(self) -> int:
        return sum(isinstance(layer, Affine) for layer in self.layers)

    def parameters(self) -> list:
        return list(self._parameters)

    def state_dict(self) -> list:
        return [p.data.copy() for p in self._parameters]

    def load_state_dict(self, arrays: list) -> None:
        if len(arrays) != len(self._parameters):
            raise ShapeError(f"{self.name}: expected {len(self._parameters)} arrays, got {len(arrays)}")
        for index, (param, values) in enumerate(zip(self._parameters, arrays)):
            values = np.asarray(values, dtype=np.float64)
            if values.shape != param.shape:
                raise ShapeError(f"{self.name}: parameter {index} expects {param.shape}, got {values.shape}")
            param.data = values.copy()

    def spec(self) -> dict:
        return {"name": self.name, "layers": [layer.spec() for layer in self.layers]}

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for param in self._parameters:
            digest.update(np.ascontiguousarray(param.data).tobytes())
        return digest.hexdigest()

    def clone(self, name: str = None) -> "Network":
        copy = Network.from_spec(self.spec(), self.state_dict())
        copy.name = name or self.name
        return copy

    def __repr__(self):
        return f"<Network {self.name} {self.input_dim}->{self.output_dim} depth={self.depth}>"
