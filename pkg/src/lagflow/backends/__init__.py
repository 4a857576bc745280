"""Kernel backend selection.

The compiled Cython core is used when importable; set ``LAGFLOW_PURE=1`` to
force the NumPy reference implementation.  ``active()`` reports which one is
in use so benchmarks and tests can compare the two.
"""

import os

from . import reference

_impl = reference
if not os.environ.get("LAGFLOW_PURE"):
    try:
        from . import _fastcore as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

fundamental_tables = _impl.fundamental_tables
fubini_study_jet = _impl.fubini_study_jet

constant_holomorphic_riemann = reference.constant_holomorphic_riemann
constant_sectional_riemann = reference.constant_sectional_riemann


def active():
    """Name of the backend in use: 'compiled' or 'numpy'."""
    return "compiled" if getattr(_impl, "COMPILED", False) else "numpy"
