"""Hot-kernel backend selection.

The compiled Cython extension is preferred when importable; the pure-NumPy
implementation is the fallback. Both produce bitwise-identical results (this
is covered by tests), so the choice is purely about speed.

Set PICMC_BACKEND=pure or PICMC_BACKEND=compiled to force one; "compiled"
raises if the extension is missing instead of silently falling back.
"""

import os

from . import pure as _pure

_CHOICES = ("auto", "compiled", "pure")


def load_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}, expected one of {_CHOICES}")


_requested = os.environ.get("PICMC_BACKEND", "auto")
if _requested not in _CHOICES:
    raise ImportError(
        f"PICMC_BACKEND={_requested!r} not understood; expected one of {_CHOICES}"
    )

if _requested == "pure":
    _impl = _pure
else:
    try:
        _impl = load_backend("compiled")
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _pure

BACKEND = _impl.BACKEND_NAME
deposit_partials = _impl.deposit_partials
gather = _impl.gather
fused_move = _impl.fused_move
fused_move_table = _impl.fused_move_table
fused_move_aos = _impl.fused_move_aos
