"""Backend selection for the trajectory kernels.

The compiled extension is used when importable; setting the environment
variable ``FERMI_ACCEL_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import importlib
import os

STATUS_OK, STATUS_STUCK, STATUS_ESCAPED, STATUS_TOO_MANY, STATUS_BLOWUP = 0, 1, 2, 3, 4
STATUS_NAMES = {0: "ok", 1: "stuck", 2: "escaped", 3: "too_many_bounces", 4: "blowup"}


def load(name):
    """Import a backend by name: ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        return importlib.import_module("fermi_accel._kernels")
    if name == "python":
        return importlib.import_module("fermi_accel._pykernels")
    raise ValueError(f"unknown backend {name!r}")


def _select():
    if os.environ.get("FERMI_ACCEL_PURE_PYTHON") == "1":
        return "python", load("python")
    try:
        return "compiled", load("compiled")
    except ImportError:
        return "python", load("python")


BACKEND, impl = _select()
