"""Deterministic, parallelism-independent random streams.

Every stream is a counter-based Philox generator keyed by a hash of the
master seed and a structured stream id.  Any worker can therefore
regenerate any stream without coordination, and results never depend on
execution order or the number of workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

__all__ = ["SeededStream"]


def _philox_key(master_seed: int, stream_id: tuple) -> int:
    text = "\x1f".join([str(int(master_seed))] + [repr(part) for part in stream_id])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


@dataclass(frozen=True)
class SeededStream:
    """Addressable random stream.

    The output sequence is a pure function of ``(master_seed, stream_id)``
    where ``stream_id = (experiment_id, trial_index, component_index)``.
    Distinct stream ids give statistically independent streams.
    """

    master_seed: int
    experiment_id: str = "default"
    trial_index: int = 0
    component_index: int | str = 0

    @property
    def stream_id(self) -> tuple:
        return (self.experiment_id, self.trial_index, self.component_index)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = _philox_key(self.master_seed, self.stream_id)
        return np.random.Generator(np.random.Philox(key=key))

    def component(self, index: int | str) -> "SeededStream":
        return replace(self, component_index=index)

    def trial(self, index: int) -> "SeededStream":
        return replace(self, trial_index=index)

    def labeled(self, experiment_id: str) -> "SeededStream":
        return replace(self, experiment_id=experiment_id)
