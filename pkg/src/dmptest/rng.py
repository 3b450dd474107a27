"""Splittable random number streams for reproducible parallel sampling.

Every random draw in this package comes from a stream addressed by a root
seed plus a tuple of labels (purpose string, replicate index, block
coordinates, ...). Two streams with the same address are identical and two
streams with different addresses are statistically independent, so any loop
over replicates or graph blocks can be executed serially, threaded, or
across processes and produce bit-identical output.

Streams are realised with NumPy's ``SeedSequence`` spawn-key mechanism:
the root seed is the entropy and the label tuple is the spawn key. String
labels are hashed with SHA-256 so the mapping is stable across runs,
platforms, and Python processes (unlike the builtin ``hash``).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_MAX_ROOT = 2**64
_MAX_LABEL = 2**32


def _encode_label(label: int | str) -> int:
    """Map a stream label to a 32-bit spawn-key entry."""
    if isinstance(label, bool):
        raise DomainError("boolean stream labels are ambiguous; use int or str")
    if isinstance(label, (int, np.integer)):
        value = int(label)
        if not 0 <= value < _MAX_LABEL:
            raise DomainError(f"integer stream label {value} outside [0, 2^32)")
        return value
    if isinstance(label, str):
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big")
    raise DomainError(f"unsupported stream label type: {type(label).__name__}")


@dataclass(frozen=True)
class SeedSpec:
    """Address of a random stream: a 64-bit root seed plus a label path.

    ``child`` derives sub-streams by appending labels; the conventional
    label order is (purpose, replicate, layer, time). Identical
    (root, path) pairs always yield identical streams.
    """

    root: int
    path: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0 <= int(self.root) < _MAX_ROOT:
            raise DomainError(f"root seed {self.root} outside [0, 2^64)")
        object.__setattr__(self, "root", int(self.root))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        for p in self.path:
            if not 0 <= p < _MAX_LABEL:
                raise DomainError(f"stream label {p} outside [0, 2^32)")

    def child(self, *labels: int | str) -> "SeedSpec":
        """Derive the sub-stream addressed by appending ``labels``."""
        return SeedSpec(self.root, self.path + tuple(_encode_label(l) for l in labels))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=self.root, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))

    def fingerprint(self) -> str:
        """Stable string identifying the stream, for result provenance."""
        return f"root={self.root};path={','.join(map(str, self.path))}"
