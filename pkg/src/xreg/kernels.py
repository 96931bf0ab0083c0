"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_kernels_py`` module takes over. Setting ``XREG_PURE_PYTHON=1``
forces the fallback. Both expose the same functions.
"""
import importlib
import os

_FUNCS = ("splitmix64", "shuffle_inplace", "sparse_dot", "rows_dot_dense",
          "dual_cd_logistic")


def load_backend(name):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        return importlib.import_module("xreg._ckernels")
    if name == "python":
        return importlib.import_module("xreg._kernels_py")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


if os.environ.get("XREG_PURE_PYTHON", "") not in ("", "0"):
    _impl = load_backend("python")
    BACKEND = "python"
else:
    try:
        _impl = load_backend("compiled")
        BACKEND = "compiled"
    except ImportError:
        _impl = load_backend("python")
        BACKEND = "python"

splitmix64 = _impl.splitmix64
shuffle_inplace = _impl.shuffle_inplace
sparse_dot = _impl.sparse_dot
rows_dot_dense = _impl.rows_dot_dense
dual_cd_logistic = _impl.dual_cd_logistic

__all__ = ["BACKEND", "available_backends", "load_backend", *_FUNCS]
