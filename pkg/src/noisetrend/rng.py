"""Deterministic random-stream tree.

Every random draw in the pipeline flows from one master seed through named
sub-streams, so each component (training, synthesis, each image, each noise
level) is independently reproducible.  Stream names are hashed into the
`spawn_key` of a ``numpy.random.SeedSequence``, which guarantees independent
streams regardless of draw order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEED_MASK = (1 << 128) - 1


def _token_words(token) -> tuple[int, ...]:
    if isinstance(token, (bool, float)):
        raise TypeError(f"stream tokens must be str or int, got {type(token).__name__}")
    if isinstance(token, (int, np.integer)):
        raw = b"i" + int(token).to_bytes(16, "little", signed=True)
    elif isinstance(token, str):
        raw = b"s" + token.encode("utf-8")
    else:
        raise TypeError(f"stream tokens must be str or int, got {type(token).__name__}")
    digest = hashlib.sha256(raw).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class RandomStream:
    """A node in the seed tree; children are addressed by name tokens."""

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self._seed = int(seed) & _SEED_MASK
        self._key = tuple(_key)

    def child(self, *tokens) -> "RandomStream":
        key = self._key
        for token in tokens:
            key = key + _token_words(token)
        return RandomStream(self._seed, key)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self._seed, spawn_key=self._key)
        return np.random.Generator(np.random.PCG64(seq))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self._seed}, key_len={len(self._key)})"
