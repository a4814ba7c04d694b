"""Frozen regression baselines.

Empirical constants (obstacle C*, calibrated bilateral constants, duality
pairing constant, ...) are measured once by scripts/calibrate_baselines.py
and frozen here; tests compare fresh runs against the frozen values at the
drift tolerances the checks state.  Theorems only assert these constants
exist, so freezing the measured value is the strongest reproducible claim.
"""

from __future__ import annotations

import json
from pathlib import Path

_PATH = Path(__file__).parent / "_baselines.json"


def load() -> dict:
    if not _PATH.exists():
        return {}
    with open(_PATH) as fh:
        return json.load(fh)


def get(key: str):
    return load().get(key)


def require(key: str) -> float:
    data = load()
    if key not in data:
        raise KeyError(
            f"baseline {key!r} missing; run scripts/calibrate_baselines.py to freeze it"
        )
    return data[key]


def record(key: str, value) -> None:
    data = load()
    data[key] = value
    with open(_PATH, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
