"""Select the compiled kernels when available.

Set ``NLMC_BACKEND=python`` before import to force the NumPy fallback.
"""
import os

import numpy as np

from nlmc import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("NLMC_BACKEND", "").lower() != "python":
    try:
        from nlmc import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def compiled_available():
    try:
        from nlmc import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


def get(name, backend=None):
    """Kernel ``name`` from ``backend`` ('cython' or 'python'); default is the active one."""
    if backend is None:
        mod = _impl
    elif backend == "python":
        mod = _pykernels
    else:
        from nlmc import _ckernels as mod
    fn = getattr(mod, name)

    def call(*args):
        return fn(*[np.ascontiguousarray(a, dtype=np.float64) if isinstance(a, np.ndarray) else a
                    for a in args])

    return call


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def flux_sum_batched(P, X, NW, expo):
    return _impl.flux_sum_batched(_c(P), _c(X), _c(NW), float(expo))


def flux_sum_shared(P, X, NW, expo):
    return _impl.flux_sum_shared(_c(P), _c(X), _c(NW), float(expo))


def lipschitz_sup(P, H, hmin):
    return _impl.lipschitz_sup(_c(P), _c(H), float(hmin))


def rotate_nodes(R, L):
    return _impl.rotate_nodes(_c(R), _c(L))
