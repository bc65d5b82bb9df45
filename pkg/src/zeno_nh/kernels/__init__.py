"""Backend selection for the propagation kernels.

ZENO_NH_BACKEND=numba|numpy forces a backend; unset, numba is used when
importable and the numpy fallback otherwise.  All kernel entry points have
identical signatures across backends.
"""

import os
import warnings

_requested = os.environ.get("ZENO_NH_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"ZENO_NH_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_backend as backend

    BACKEND_NAME = "numpy"
elif _requested == "numba":
    from . import numba_backend as backend

    BACKEND_NAME = "numba"
else:
    try:
        from . import numba_backend as backend

        BACKEND_NAME = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        from . import numpy_backend as backend

        BACKEND_NAME = "numpy"
        warnings.warn("numba unavailable; falling back to numpy kernels")

from . import numpy_backend as _np_backend

traj_csr = backend.traj_csr
traj_dense = backend.traj_dense
nonherm_csr = backend.nonherm_csr
nonherm_dense = backend.nonherm_dense

#: generic complex-drift path exists only in the numpy implementation
traj_generic = _np_backend.traj_generic
