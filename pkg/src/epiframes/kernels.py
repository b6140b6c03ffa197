"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
versions in ``_pykernels`` are used. Setting ``EPIFRAMES_PURE=1`` forces the
fallback, which is how the test suite checks that both backends agree.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("EPIFRAMES_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

floyd_sample = _impl.floyd_sample
contagion = _impl.contagion
select_by_keys = _impl.select_by_keys
segment_sums = _impl.segment_sums

__all__ = ["BACKEND", "floyd_sample", "contagion", "select_by_keys", "segment_sums"]
