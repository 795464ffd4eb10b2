"""
Per-component random streams derived from one master seed.

Each component gets its own SeedSequence spawn key, so adding draws in one
component (say, turning on obfuscation noise) never shifts another's stream.
"""

import numpy as np

COMPONENTS = ("data", "init", "batching", "noise", "detector", "attack", "shuffle")


class SeedBank:
    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def sequence(self, component: str, *sub: int) -> np.random.SeedSequence:
        if component not in COMPONENTS:
            raise KeyError(f"unknown seed component '{component}', expected one of {COMPONENTS}")
        key = (COMPONENTS.index(component),) + tuple(int(s) for s in sub)
        return np.random.SeedSequence(self.master_seed, spawn_key=key)

    def generator(self, component: str, *sub: int) -> np.random.Generator:
        return np.random.default_rng(self.sequence(component, *sub))

    def integer_seed(self, component: str, *sub: int) -> int:
        return int(self.sequence(component, *sub).generate_state(1)[0])
