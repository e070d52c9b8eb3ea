"""Seed derivation shared by every random component.

A sub-seed is the first 8 bytes (little endian) of
sha256(f"{root_seed}:{name}"). The mapping is stable across platforms
and Python versions.
"""

from __future__ import annotations

import hashlib


def derive_seed(root_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(root_seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
