"""Hot-kernel backend selection.

The compiled extension is used when it imported successfully and the
environment variable ``ACTIVEBASIS_PURE_PYTHON`` is unset; otherwise the
numpy/scipy reference implementation takes over.  Both expose the same two
functions with identical semantics:

``correlate_valid(image, kernels)``
    Valid-mode sliding dot products, shape (K, H-L+1, W-L+1).

``local_max_pool(maps, offsets, counts)``
    Per-pose max over an activity set with orientation wrap-around.
"""

from __future__ import annotations

import os

from . import _ref

try:
    from . import _fastcore
except ImportError:  # extension not built
    _fastcore = None

_FORCE_REF = bool(os.environ.get("ACTIVEBASIS_PURE_PYTHON"))

if _fastcore is not None and not _FORCE_REF:
    BACKEND = "compiled"
    _impl = _fastcore
else:
    BACKEND = "numpy"
    _impl = _ref

correlate_valid = _impl.correlate_valid
local_max_pool = _impl.local_max_pool


def available_backends() -> dict[str, object]:
    """Importable backends by name; used by tests and benchmarks."""
    found = {"numpy": _ref}
    if _fastcore is not None:
        found["compiled"] = _fastcore
    return found
