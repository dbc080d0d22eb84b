"""Backend selection for the integration kernel.

The compiled extension is used when it imports; set
``DISSIPATE_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from . import _kernel_py

if os.environ.get("DISSIPATE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernel_py

BACKEND: str = _impl.BACKEND
integrate_open = _impl.integrate_open
integrate_closed = _impl.integrate_closed


def backends():
    """Return the mapping of available backend names to modules."""
    out = {"python": _kernel_py}
    try:
        from . import _kernel
        out["cython"] = _kernel
    except ImportError:
        pass
    return out
