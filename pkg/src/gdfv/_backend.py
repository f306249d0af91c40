"""Kernel backend selection.

Every hot loop in the package exists twice: a numba ``@njit`` kernel and a
vectorized numpy fallback. The environment variable ``GDFV_BACKEND``
(``numba`` or ``numpy``) picks one at import time; :func:`set_backend` and
:func:`use_backend` switch at runtime.
"""

from __future__ import annotations

import contextlib
import os
import warnings

ENV_VAR = "GDFV_BACKEND"
BACKENDS = ("numba", "numpy")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False


def _initial_backend() -> str:
    name = os.environ.get(ENV_VAR, "numba" if HAVE_NUMBA else "numpy").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"{ENV_VAR} must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        warnings.warn("numba is not importable; falling back to the numpy backend")
        name = "numpy"
    return name


_current = _initial_backend()


def get_backend() -> str:
    return _current


def set_backend(name: str) -> None:
    global _current
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    _current = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _current
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def njit(fn=None, **options):
    """``numba.njit`` with the package defaults, or identity without numba."""
    opts = dict(cache=True, nogil=True, error_model="numpy")
    opts.update(options)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**opts)(f)

    return wrap(fn) if fn is not None else wrap
