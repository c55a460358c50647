"""Derive independent child seeds from one top-level seed.

``derive_seed(root, *keys)`` feeds ``[root, *keys]`` to
:class:`numpy.random.SeedSequence` and takes its first 32-bit word, so a
child seed depends only on the root and its own key path. String keys are
mapped to integers through their UTF-8 bytes. A partial rerun (one fold, one
setting) therefore reproduces exactly the seeds a full run would use.

Key paths used by the package:

* ``(root, "split")``                        fold assignment
* ``(root, "train", fold, seed_index)``      supervised training seed
* ``(train_seed, view, round)``              per-round classifier shuffling
"""

from __future__ import annotations

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return int.from_bytes(k.encode("utf-8"), "little")
    return int(k)


def derive_seed(root: int, *keys) -> int:
    return int(np.random.SeedSequence([_key(root), *map(_key, keys)]).generate_state(1)[0])
