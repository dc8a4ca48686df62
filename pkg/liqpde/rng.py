# Copyright (c) 2026 liqpde developers
# MIT License

"""
Counter-based random streams. Every simulated path owns two independent
streams keyed by (seed, path index), one for the factor noise and one for the
dark pool clock, so ensembles do not depend on batching or worker count.
"""

from typing import Tuple

import numpy as np

NOISE = 0
CLOCK = 1


def stream(seed: int, index: int, purpose: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(seed, spawn_key=(index, purpose))
    return np.random.Generator(np.random.Philox(sequence))


def path_streams(seed: int, index: int) -> Tuple[np.random.Generator, np.random.Generator]:
    return stream(seed, index, NOISE), stream(seed, index, CLOCK)
