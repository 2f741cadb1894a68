"""Physical constants (CODATA 2018) shared by every module.

Set ``QUTRIT_METROLOGY_CONSTANTS`` to a JSON file mapping any of the names
below to a float to override them (intended for tests only).
"""
import json
import os

HBAR = 1.054571817e-34  # J s
PLANCK = 6.62607015e-34  # J s
MU_B = 9.2740100783e-24  # J/T
FLUX_QUANTUM = 2.067833848e-15  # Wb
ELEMENTARY_CHARGE = 1.602176634e-19  # C

_NAMES = ("HBAR", "PLANCK", "MU_B", "FLUX_QUANTUM", "ELEMENTARY_CHARGE")
ENV_VAR = "QUTRIT_METROLOGY_CONSTANTS"


def _load_overrides():
    path = os.environ.get(ENV_VAR)
    if not path:
        return
    with open(path) as fh:
        table = json.load(fh)
    unknown = set(table) - set(_NAMES)
    if unknown:
        raise ValueError(f"unknown constants in {path}: {sorted(unknown)}")
    globals().update({k: float(v) for k, v in table.items()})


def as_dict():
    return {name: globals()[name] for name in _NAMES}


_load_overrides()
