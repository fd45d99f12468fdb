"""Small shared helpers: seed derivation, hashing, TSV writing."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


def derive_seed(master: int, *keys) -> int:
    """Derive a stable 63-bit seed from a master seed and a key path.

    String keys are hashed so that e.g. ("walk", "1980s") and ("train", "1980s")
    yield unrelated streams. Stable across platforms and processes.
    """
    ints = [int(master) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            digest = hashlib.sha256(key.encode("utf-8")).digest()
            ints.append(int.from_bytes(digest[:8], "little"))
        else:
            ints.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    seq = np.random.SeedSequence(ints)
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def fmt(value) -> str:
    """Render a cell for TSV output; floats use 6 significant digits."""
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return ""
    return str(value)


def write_tsv(path: Path | str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(v) for v in row) + "\n")
