"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise
the numpy versions in ``_pykernels`` are used. Setting the environment
variable ``BEAMGEVREY_PURE_PYTHON=1`` forces the numpy path.
"""
import importlib
import os

from . import _pykernels

_NAMES = (
    "cosh_difference_rel",
    "product_identity_residual",
    "product_sech_margins",
    "rotate_modes",
    "log_sum_sq",
)


def get_backend(name):
    """Return the kernel module for ``name`` in {"c", "python"}."""
    if name == "python":
        return _pykernels
    if name == "c":
        return importlib.import_module("beamgevrey._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        get_backend("c")
    except ImportError:
        pass
    else:
        names.insert(0, "c")
    return names


if os.environ.get("BEAMGEVREY_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        _impl = get_backend("c")
        BACKEND = "c"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

cosh_difference_rel = _impl.cosh_difference_rel
product_identity_residual = _impl.product_identity_residual
product_sech_margins = _impl.product_sech_margins
rotate_modes = _impl.rotate_modes
log_sum_sq = _impl.log_sum_sq
