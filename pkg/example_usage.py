#!/usr/bin/env python3
"""
Example usage of the URVFL simulator without the command line

Runs a small honest baseline and a small URVFL attack on a synthetic
Gaussian mixture, records both in a results store, and writes the summary
table and PDF.
"""

import os
import sys

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.errors import ConfigError, UrvflError
from src.export import write_summary
from src.harness import ExperimentConfig, run_all
from src.log_config import configure_logging


def example_config(mode: str, output_dir: str) -> ExperimentConfig:
    """A config small enough to finish in seconds."""
    return ExperimentConfig.from_dict({
        "name": f"example_{mode}",
        "mode": mode,
        "seeds": [0, 1],
        "output_dir": output_dir,
        "dataset": {"source": "synthetic", "num_classes": 3, "dims": 12, "per_class": 200},
        "partition": {"fractions": [0.5, 0.5]},
        "splits": {"aux_ratio": 0.2, "test_fraction": 0.2},
        "models": {"embedding_dim": 6, "hidden": 32, "learning_rate": 0.01},
        "training": {"epochs": 8, "batch_size": 32},
        "attack": {"pretrain_epochs": 20, "attack_rounds": 150, "distance_every": 50, "log_every": 0},
    }).validate()


def main():
    """Demonstrate basic usage of the simulator"""
    print("URVFL Simulator - Example Usage")
    print("=" * 50)

    configure_logging("WARNING")
    output_dir = os.path.join("results", "example")

    # Build configs
    print("1. Building experiment configs...")
    try:
        honest = example_config("honest", output_dir)
        attack = example_config("urvfl", output_dir)
        print("   ✓ Configs validated")
    except ConfigError as e:
        for message in e.errors:
            print(f"   ✗ {message}")
        return

    # Honest baseline
    print("\n2. Training the honest baseline...")
    try:
        reports = run_all(honest, output_dir)
        for report in reports:
            print(f"   ✓ seed {report.seed}: accuracy {report.final['accuracy']:.3f}")
    except UrvflError as e:
        print(f"   ✗ Honest run failed: {e}")
        return

    # Attack
    print("\n3. Running the URVFL attack...")
    try:
        reports = run_all(attack, output_dir)
        for report in reports:
            final = report.final
            print(f"   ✓ seed {report.seed}: recon_mse {final['recon_mse']:.4f}, "
                  f"emb_mse {final['emb_mse']:.4f}, probe_accuracy {final['probe_accuracy']:.3f}")
    except UrvflError as e:
        print(f"   ✗ Attack run failed: {e}")
        return

    # Summary
    print("\n4. Writing the summary...")
    try:
        paths = write_summary(output_dir)
        for name, path in paths.items():
            print(f"   ✓ {name}: {path}")
    except UrvflError as e:
        print(f"   ✗ Summary failed: {e}")

    print("\n" + "=" * 50)
    print("Example completed successfully!")
    print("\nPer-run files are under:")
    print(f"  {output_dir}/<run name>/seed_<n>/")
    print("\nTo run a shipped config from the command line, use:")
    print("  python main.py run configs/urvfl_mixture.yaml")


if __name__ == "__main__":
    main()
