"""Hot numerical kernels with a compiled core and a NumPy fallback.

At import time the Cython extension ``_core`` is preferred when it has been
built (``python setup.py build_ext --inplace`` or a regular pip install);
otherwise the NumPy reference in ``_ref`` is used.  Both expose the same
functions and are cross-checked in the test suite.  Set the environment
variable ``INVMET_FORCE_NUMPY=1`` to skip the compiled core.
"""

import os

from . import _ref

DISC = _ref.DISC
BALL = _ref.BALL
POLYDISC = _ref.POLYDISC
ELLIPSOID = _ref.ELLIPSOID
ANNULUS = _ref.ANNULUS
HALFPLANE = _ref.HALFPLANE

if os.environ.get("INVMET_FORCE_NUMPY", "") not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

eval_disc_batch = _impl.eval_disc_batch
margin_points = _impl.margin_points
penalty_batch = _impl.penalty_batch


def backend_name():
    return _impl.BACKEND


def backends():
    """All importable backends, for cross-checking and benchmarks."""
    out = {"numpy": _ref}
    try:
        from . import _core

        out["cython"] = _core
    except ImportError:
        pass
    return out
