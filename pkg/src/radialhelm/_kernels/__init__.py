"""Kernel backend selection: compiled Cython core with pure numpy fallback.

The compiled extension is preferred when importable. Override with the
``RADIAL_HELM_KERNELS`` environment variable (``pure`` / ``compiled`` /
``auto``) or per call site via the ``kernels`` config field.
"""

import os

from . import _pure

try:
    from . import _core
except ImportError:
    _core = None

from ..errors import UsageError

_ENV_VAR = "RADIAL_HELM_KERNELS"


def available():
    """Names of the kernel implementations importable right now."""
    names = ["pure"]
    if _core is not None:
        names.append("compiled")
    return names


def get(name=None):
    """Resolve a kernel implementation module by name.

    ``None``/"auto" picks the compiled core when present (subject to the
    RADIAL_HELM_KERNELS override), "pure" and "compiled" are explicit.
    Passing an already-resolved module returns it unchanged, so hot paths
    can resolve once and reuse.
    """
    if name is _pure or name is _core:
        return name
    if name in (None, "auto"):
        name = os.environ.get(_ENV_VAR, "auto")
    if name == "auto":
        return _core if _core is not None else _pure
    if name == "pure":
        return _pure
    if name == "compiled":
        if _core is None:
            raise UsageError("compiled kernels requested but the extension is not built")
        return _core
    raise UsageError(f"unknown kernel implementation {name!r}")


def default_name():
    return get().NAME
