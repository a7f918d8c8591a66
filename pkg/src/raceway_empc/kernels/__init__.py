"""Hot simulation kernels with an import-time backend choice.

The compiled extension is used when it was built; otherwise the pure-Python
module with the same API is loaded. Set ``RACEWAY_EMPC_BACKEND=python`` to
force the fallback.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

from .layout import IDX, N_PARAMS, PARAM_NAMES, pack_params

_MODULES = {"cython": "._ckernels", "python": "._pykernels"}


def load_backend(name: str) -> ModuleType:
    """Import a specific backend; raises ImportError if it is unavailable."""
    try:
        return importlib.import_module(_MODULES[name], __name__)
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}") from None


def available_backends() -> list[str]:
    names = []
    for name in _MODULES:
        try:
            load_backend(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select() -> ModuleType:
    wanted = os.environ.get("RACEWAY_EMPC_BACKEND", "").strip().lower()
    if wanted:
        return load_backend(wanted)
    try:
        return load_backend("cython")
    except ImportError:
        return load_backend("python")


backend = _select()
BACKEND = backend.NAME

__all__ = ["IDX", "N_PARAMS", "PARAM_NAMES", "pack_params", "backend", "BACKEND",
           "load_backend", "available_backends"]
