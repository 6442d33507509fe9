"""Select the coordinate-descent kernel at import.

The compiled extension is used when present. Setting the environment
variable ``LYAPLASSO_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _cd_fallback

if os.environ.get("LYAPLASSO_PURE_PYTHON", "") not in ("", "0"):
    cd_sweep = _cd_fallback.cd_sweep
    BACKEND = "python"
else:
    try:
        from ._cd_core import cd_sweep
        BACKEND = "cython"
    except ImportError:
        cd_sweep = _cd_fallback.cd_sweep
        BACKEND = "python"

KERNELS = {"python": _cd_fallback.cd_sweep}
try:
    from ._cd_core import cd_sweep as _compiled

    KERNELS["cython"] = _compiled
except ImportError:
    pass
