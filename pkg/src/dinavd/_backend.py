"""Kernel backend selection.

The compiled module is used when it imports; setting ``DINAVD_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

kernels = None
if os.environ.get("DINAVD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        kernels = None

HAVE_COMPILED = kernels is not None
DEFAULT = "compiled" if HAVE_COMPILED else "python"
# above this size a dense matrix-vector product is faster through numpy's BLAS
DENSE_CROSSOVER = 192


def resolve(backend="auto"):
    """Map a requested backend name onto the one that will run."""
    from .errors import InvalidArgument, NotSupported
    if backend == "auto":
        return DEFAULT
    if backend == "python":
        return "python"
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise NotSupported("compiled backend is not available in this build")
        return "compiled"
    raise InvalidArgument(f"backend must be 'auto', 'compiled' or 'python', got {backend!r}")


def select(backend, kernel, dim):
    """Backend for a run on an objective with closed-form ``kernel`` (or None)."""
    be = resolve(backend)
    if kernel is None:
        return "python"
    if backend == "auto" and kernel.matrix is not None and dim > DENSE_CROSSOVER:
        return "python"
    return be
