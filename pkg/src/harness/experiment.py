"""
Single-run orchestration: data, splits, system, detectors, then either honest
training or one of the attack variants, then final metrics and outputs.
"""

import logging
import math
import os
import time

import numpy as np

from ..attack import build_attack_models, clean_embeddings, observed_embeddings, run_attack
from ..data import (
    SplitSpec,
    generate_gaussian_mixture,
    load_csv_dataset,
    make_splits,
    rescale_to_unit_range,
    standardize,
    vertical_partition,
)
from ..detect import (
    FakeBatchSchedule,
    GradientScrutinizer,
    GradNormDetector,
    GradNormProfile,
    GsState,
    SgState,
    SplitGuardDetector,
)
from ..protocol import build_vfl_system, run_honest_training
from .calibration import freeze_thresholds
from .config import ExperimentConfig
from .metrics import MetricsReport
from .report_writer import emit_report, write_embeddings
from .seeding import SeedBank
from .snapshot import Snapshot, final_metrics, save_snapshot

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# DATA
# ---------------------------------------------------------------------
def _normalize(ds, method: str):
    if method == "standardize":
        return standardize(ds)[0]
    if method == "unit_range":
        return rescale_to_unit_range(ds)
    return ds


def load_dataset(config: ExperimentConfig, bank: SeedBank):
    spec = config.dataset
    if spec.source == "csv":
        ds = load_csv_dataset(spec.csv_path, spec.label_column)
    else:
        ds = generate_gaussian_mixture(spec.num_classes, spec.dims, spec.per_class, spec.separation,
                                       seed=bank.integer_seed("data", 0),
                                       feature_correlation=spec.feature_correlation)
    return _normalize(ds, spec.normalize)


def prepare_splits(config: ExperimentConfig, ds, bank: SeedBank):
    """(aux, train, test); with aux_source 'ood' the aux set comes from shifted class means."""
    splits = config.splits
    if splits.aux_source != "ood":
        return make_splits(ds, SplitSpec(splits.aux_ratio, splits.test_fraction, bank.integer_seed("data", 1)))

    empty, train, test = make_splits(ds, SplitSpec(0.0, splits.test_fraction, bank.integer_seed("data", 1)))
    rows = int(round(splits.aux_ratio * train.num_rows)) if splits.aux_ratio > 0 else splits.ood_aux_rows
    spec = config.dataset
    per_class = max(2, math.ceil(rows / spec.num_classes))
    ood = generate_gaussian_mixture(spec.num_classes, spec.dims, per_class, spec.separation,
                                    seed=bank.integer_seed("data", 2),
                                    feature_correlation=spec.feature_correlation,
                                    means_seed=bank.integer_seed("data", 3))
    aux = _normalize(ood, spec.normalize).subset(np.arange(rows))
    logger.info("Out-of-distribution aux set: %d rows", aux.num_rows)
    return aux, train, test


# ---------------------------------------------------------------------
# DETECTION WIRING
# ---------------------------------------------------------------------
def _attach_detectors(config: ExperimentConfig, sys, bank: SeedBank) -> bool:
    det = config.detection
    if det.splitguard:
        sys.fake_schedule = FakeBatchSchedule(det.sg_fake_probability, det.sg_warmup_rounds,
                                              bank.generator("detector", 0))
    for client in sys.passive_clients:
        if det.splitguard:
            state = SgState(det.sg_fake_probability, det.sg_warmup_rounds, det.sg_threshold, det.sg_window)
            client.detectors.append(SplitGuardDetector(client.index, sys.num_classes, state,
                                                       bank.generator("detector", client.index),
                                                       det.sg_regular_window, det.sg_fake_window))
        if det.scrutinizer:
            client.detectors.append(GradientScrutinizer(client.index, GsState(det.gs_threshold, det.gs_min_scores)))
        if det.grad_norm:
            baseline = None
            if det.grad_norm_baseline:
                baseline = GradNormProfile.load(os.path.join(det.grad_norm_baseline,
                                                             f"grad_norms_client{client.index}.npz"))
            client.grad_norm = GradNormDetector(client.index, det.grad_norm_alpha, baseline,
                                                det.grad_norm_sample_size,
                                                bank.generator("detector", client.index, 1))
    if det.any_label_detector:
        logger.warning("Detectors read true labels through an oracle channel; passive clients hold no labels in VFL")
    return det.any_label_detector


def _round_row(record, sys) -> dict:
    norms = [float(np.linalg.norm(g, axis=1).mean()) for g in record.gradients]
    return {
        "round": int(record.round),
        "loss": float(record.loss),
        "L_R": _maybe_float(record.losses.get("L_R")),
        "L_M": _maybe_float(record.losses.get("L_M")),
        "L_D": _maybe_float(record.losses.get("L_D")),
        "fake_batch": bool(record.fake_batch),
        "halted_clients": len(sys.halted_clients),
        "grad_norm_mean": float(np.mean(norms)) if norms else None,
    }


def _maybe_float(value):
    return None if value is None else float(value)


# ---------------------------------------------------------------------
# RUN
# ---------------------------------------------------------------------
class Experiment:
    """One configuration, one seed."""

    def __init__(self, config: ExperimentConfig, seed: int, run_dir: str = None):
        self.config = config
        self.seed = int(seed)
        self.run_dir = run_dir
        self.bank = SeedBank(self.seed)

    def run(self) -> MetricsReport:
        started = time.perf_counter()
        self.config = freeze_thresholds(self.config)
        cfg, bank = self.config, self.bank
        logger.info("Run %s: mode=%s seed=%d", cfg.name, cfg.mode, self.seed)

        ds = load_dataset(cfg, bank)
        aux, train, test = prepare_splits(cfg, ds, bank)
        partition = vertical_partition(ds.num_features, cfg.partition.fractions, cfg.partition.permutation_seed)
        honest = cfg.mode == "honest"
        sys = build_vfl_system(partition, ds.num_classes, cfg.models.embedding_dim, cfg.models.hidden,
                               bank.generator("init", 0), with_top=honest, bottom_depth=cfg.models.bottom_depth,
                               learning_rate=cfg.models.learning_rate, optimizer=cfg.models.optimizer,
                               defense=cfg.defense, noise_rng=bank.generator("noise"))
        report = MetricsReport(run_name=cfg.name, mode=cfg.mode, seed=self.seed, config=cfg.to_dict())
        report.label_oracle = _attach_detectors(cfg, sys, bank)
        if cfg.detection.scrutinizer:
            report.gs_threshold = cfg.detection.gs_threshold
        hooks = [lambda record: report.rounds.append(_round_row(record, sys))]

        if honest:
            run_honest_training(sys, train, cfg.training.epochs, cfg.training.batch_size,
                                bank.generator("batching"), hooks)
            snapshot = self._honest_snapshot(sys, test if test.num_rows else train)
            report.final = final_metrics(snapshot)
        else:
            snapshot = self._attack(sys, partition, aux, train, test, hooks, report)
            report.final = final_metrics(snapshot)

        report.detection = [event.to_dict() for event in sys.events]
        for client in sys.passive_clients:
            for detector in client.detectors:
                report.detected_rounds[f"{detector.name}/{client.index}"] = detector.state.detected_round
            if client.grad_norm is not None:
                outcome = client.grad_norm.evaluate()
                if outcome is not None:
                    ks, critical, flagged = outcome
                    report.grad_norm[str(client.index)] = {"ks": ks, "critical": critical, "flagged": bool(flagged)}

        report.wall_clock_seconds = time.perf_counter() - started
        if self.run_dir:
            self._write_outputs(report, snapshot, sys)
        logger.info("Run %s seed %d done: %s", cfg.name, self.seed,
                    ", ".join(f"{k}={v:.4f}" for k, v in report.final.items()))
        return report

    # -----------------------------------------------------------------
    def _attack(self, sys, partition, aux, train, test, hooks, report):
        cfg, bank = self.config, self.bank
        targets = cfg.attack.target_clients or list(range(1, partition.num_passive + 1))
        target_columns = tuple(c for t in sorted(set(targets)) for c in partition.passive_columns(t))
        models = build_attack_models(partition.all_passive_columns, sys.passive_embedding_dim,
                                     sys.adversary_bottom, target_columns, sys.num_classes, cfg.models.hidden,
                                     bank.generator("init", 1),
                                     plain_discriminator=cfg.mode == "plain_discriminator",
                                     encoder_depth=cfg.encoder_depth, learning_rate=cfg.attack.learning_rate,
                                     optimizer=cfg.models.optimizer)
        for name, optimizer in models.optimizers.items():
            optimizer.state.learning_rate = cfg.attack_learning_rate(name)

        shuffle_rng = bank.generator("shuffle") if cfg.attack.shuffle_labels else None
        trace = run_attack(models, sys, train, aux, cfg.mode, cfg.attack.attack_rounds,
                           cfg.attack.train_batch_size, cfg.attack.aux_batch_size, cfg.attack.pretrain_epochs,
                           bank.generator("batching"), bank.generator("attack"), shuffle_rng,
                           cfg.attack.distance_every, cfg.attack.log_every, hooks,
                           pretrain_batch_size=cfg.attack.pretrain_batch_size)
        report.pretrain_losses = [float(v) for v in trace.pretrain_losses]
        report.distances = [{k: float(v) if k != "round" else int(v) for k, v in row.items()}
                            for row in trace.distances]
        return self._attack_snapshot(models, sys, partition, train, test)

    def _attack_snapshot(self, models, sys, partition, train, test) -> Snapshot:
        networks = dict(models.networks())
        for client in sys.passive_clients:
            networks[f"f{client.index}"] = client.bottom
        evaluation = test if test.num_rows else train
        arrays = {
            "test_features": evaluation.features.copy(),
            "test_labels": evaluation.labels.copy(),
            "test_observed": observed_embeddings(sys, evaluation.features),
        }
        if self.config.evaluation.train_reconstruction:
            arrays["train_features"] = train.features.copy()
            arrays["train_observed"] = observed_embeddings(sys, train.features)
        meta = {
            "num_classes": sys.num_classes,
            "plain_discriminator": self.config.mode == "plain_discriminator",
            "target_columns": list(models.target_columns),
            "adversary_columns": list(partition.adversary_columns),
            "passive_columns": [list(c.columns) for c in sys.passive_clients],
        }
        return Snapshot(self.config.mode, networks, arrays, meta)

    def _honest_snapshot(self, sys, test) -> Snapshot:
        networks = {"f0": sys.top}
        if sys.adversary_bottom is not None:
            networks["fa"] = sys.adversary_bottom
        for client in sys.passive_clients:
            networks[f"f{client.index}"] = client.bottom
        arrays = {"test_features": test.features.copy(), "test_labels": test.labels.copy(),
                  "test_observed": observed_embeddings(sys, test.features)}
        meta = {"num_classes": sys.num_classes,
                "adversary_columns": list(sys.partition.adversary_columns),
                "passive_columns": [list(c.columns) for c in sys.passive_clients]}
        return Snapshot("honest", networks, arrays, meta)

    def _write_outputs(self, report: MetricsReport, snapshot: Snapshot, sys) -> None:
        emit_report(report, self.run_dir)
        save_snapshot(snapshot, os.path.join(self.run_dir, "snapshot.npz"))
        for client in sys.passive_clients:
            if client.grad_norm is not None:
                client.grad_norm.profile().save(os.path.join(self.run_dir, f"grad_norms_client{client.index}.npz"))
        if self.config.evaluation.export_embeddings and snapshot.mode != "honest":
            rows = self.config.evaluation.embedding_rows
            features = snapshot.arrays["test_features"][:rows]
            fe_out = snapshot.networks["fe"](features[:, [c for cols in snapshot.meta["passive_columns"] for c in cols]])
            write_embeddings(self.run_dir, fe_out.numpy(), clean_embeddings(sys, features),
                             snapshot.arrays["test_labels"][:rows])


def run_experiment(config: ExperimentConfig, seed: int = None, run_dir: str = None) -> MetricsReport:
    """Run one seed (the first configured seed by default)."""
    config.validate()
    seed = config.seeds[0] if seed is None else seed
    return Experiment(config, seed, run_dir).run()
