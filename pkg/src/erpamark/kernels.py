"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``ERPAMARK_PURE_PYTHON=1``
to force the reference implementation.
"""
import os

from erpamark import _pykernels

COMPLETE, LIMIT, TIMEOUT = _pykernels.COMPLETE, _pykernels.LIMIT, _pykernels.TIMEOUT

_ck = None
if not os.environ.get("ERPAMARK_PURE_PYTHON"):
    try:
        from erpamark import _ckernels as _ck
    except ImportError:
        _ck = None

if _ck is not None:
    BACKEND = "cython"
    dcss_enumerate = _ck.dcss_enumerate
    oracle_search = _ck.oracle_search
else:
    BACKEND = "python"
    dcss_enumerate = _pykernels.dcss_enumerate
    oracle_search = _pykernels.oracle_search


def compiled():
    """The compiled module, or None."""
    return _ck
