"""
Model snapshots and the final-metric computation that reads them.

Final metrics are always computed from a Snapshot, both at the end of a run
and when re-checking a persisted snapshot.npz, so the two agree exactly.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..attack import DacLabelMap, PlainLabelMap, embedding_distances, probe_accuracy, reconstruct
from ..autodiff import Network, concat_features
from ..errors import DataError, ReportError
from .metrics import image_quality, recon_mse

logger = logging.getLogger(__name__)


@dataclass
class Snapshot:
    mode: str
    networks: dict
    arrays: dict
    meta: dict = field(default_factory=dict)


class _SnapshotModels:
    """Just enough of AttackModels for reconstruct() and probe_accuracy()."""

    def __init__(self, networks: dict, label_map):
        self.encoder = networks["fe"]
        self.decoder = networks["fd"]
        self.discriminator = networks["D"]
        self.adversary_bottom = networks.get("fa")
        self.label_map = label_map


def _label_map(meta: dict):
    return PlainLabelMap() if meta["plain_discriminator"] else DacLabelMap(meta["num_classes"])


def _passive_clean(networks: dict, meta: dict, features: np.ndarray) -> np.ndarray:
    parts = [networks[f"f{i}"](features[:, cols]).numpy() for i, cols in enumerate(meta["passive_columns"], start=1)]
    return np.concatenate(parts, axis=1)


def _attack_metrics(snapshot: Snapshot, prefix: str) -> dict:
    nets, arrays, meta = snapshot.networks, snapshot.arrays, snapshot.meta
    features = arrays[f"{prefix}_features"]
    observed = arrays[f"{prefix}_observed"]
    target = features[:, meta["target_columns"]]
    models = _SnapshotModels(nets, _label_map(meta))
    x_a = features[:, meta["adversary_columns"]] if models.adversary_bottom is not None else None
    recon = reconstruct(models, x_a, observed)
    return {"recon_mse": recon_mse(target, recon), "target": target, "recon": recon, "features": features}


def final_metrics(snapshot: Snapshot) -> dict:
    nets, arrays, meta = snapshot.networks, snapshot.arrays, snapshot.meta
    if snapshot.mode == "honest":
        features = arrays["test_features"]
        parts = [arrays["test_observed"]]
        if "fa" in nets:
            parts.insert(0, nets["fa"](features[:, meta["adversary_columns"]]).numpy())
        logits = nets["f0"](concat_features(parts)).numpy()
        predicted = np.argmax(logits, axis=1)
        return {"accuracy": float(np.mean(predicted == arrays["test_labels"]))}

    test = _attack_metrics(snapshot, "test")
    all_passive = [c for cols in meta["passive_columns"] for c in cols]
    encoder = nets["fe"](test["features"][:, all_passive]).numpy()
    target_emb = _passive_clean(nets, meta, test["features"])
    distances = embedding_distances(encoder, target_emb)
    low, high = float(test["target"].min()), float(test["target"].max())
    quality = image_quality(test["target"], test["recon"], (low, high))
    results = {
        "recon_mse": test["recon_mse"],
        "emb_mse": distances.emb_mse,
        "emb_cos": distances.emb_cos,
        "psnr": quality.psnr,
        "ssim": quality.ssim,
        "probe_accuracy": probe_accuracy(_SnapshotModels(nets, _label_map(meta)), encoder, target_emb),
    }
    if "train_features" in arrays:
        results["train_recon_mse"] = _attack_metrics(snapshot, "train")["recon_mse"]
    return results


# ---------------------------------------------------------------------
# PERSISTENCE
# ---------------------------------------------------------------------
def save_snapshot(snapshot: Snapshot, path: str) -> None:
    specs = {name: net.spec() for name, net in snapshot.networks.items()}
    payload = {f"array/{key}": value for key, value in snapshot.arrays.items()}
    for name, net in snapshot.networks.items():
        for index, values in enumerate(net.state_dict()):
            payload[f"param/{name}/{index}"] = values
    header = {"mode": snapshot.mode, "meta": snapshot.meta, "specs": specs}
    payload["header"] = np.array(json.dumps(header))
    try:
        np.savez(path, **payload)
    except OSError as e:
        raise ReportError(f"cannot write snapshot {path}: {e}")


def load_snapshot(path: str) -> Snapshot:
    if not os.path.isfile(path):
        raise DataError(f"snapshot not found: {path}")
    with np.load(path) as archive:
        header = json.loads(str(archive["header"]))
        arrays = {k[len("array/"):]: archive[k] for k in archive.files if k.startswith("array/")}
        networks = {}
        for name, spec in header["specs"].items():
            count = sum(1 for k in archive.files if k.startswith(f"param/{name}/"))
            params = [archive[f"param/{name}/{i}"] for i in range(count)]
            networks[name] = Network.from_spec(spec, params)
    return Snapshot(header["mode"], networks, arrays, header["meta"])
