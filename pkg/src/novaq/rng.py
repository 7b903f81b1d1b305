"""Named random streams derived from one master seed.

Every consumer asks for ``stream(master, name, *keys)``; streams with
different names or keys are independent, and the same request always yields
the same generator state.
"""
from __future__ import annotations

import numpy as np

STREAMS = {
    "init": 1,
    "generation": 2,
    "mutation": 3,
    "baseline": 4,
    "fault_injection": 5,
    "probe": 6,
    "shots": 7,
}


def stream(master: int, name: str, *keys: int) -> np.random.Generator:
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    seq = np.random.SeedSequence(int(master), spawn_key=(STREAMS[name], *(int(k) for k in keys)))
    return np.random.Generator(np.random.PCG64(seq))
