"""Backend selection: numba-jitted kernels or a pure-numpy fallback.

The hot paths (the MPK walker, spmv_range, the LRU cache simulator) exist
twice: a numba ``@njit`` version and a plain numpy version.  Which one runs
is decided once at import time:

* ``LEVELMPK_BACKEND=numpy``  forces the numpy fallback,
* ``LEVELMPK_BACKEND=numba``  forces numba (ImportError if absent),
* unset: numba if importable, numpy otherwise.

The numpy path is sequential (worker count only affects chunking, not
execution order), so the point-to-point synchronization machinery is
exercised only under the numba backend.  Within either backend all MPK
variants produce bitwise-identical power vectors; across backends results
agree only to rounding (different summation kernels).
"""

import ctypes
import os

_CHOICE = os.environ.get("LEVELMPK_BACKEND", "").strip().lower()

if _CHOICE not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"LEVELMPK_BACKEND={_CHOICE!r} not understood (use 'numba' or 'numpy')"
    )

if _CHOICE == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _CHOICE == "numba":
            raise
        HAS_NUMBA = False

USING_NUMBA = HAS_NUMBA

#: Opaque libc calls used inside compiled spin loops.  Any external call is
#: a compiler barrier: LLVM cannot hoist the polled flag loads out of a
#: spin loop nor move data stores across it.  ``cpu_relax`` is the cheap
#: barrier (a pure userspace thread-local lookup, ~1 ns); ``sched_yield``
#: is the backoff used every few dozen spins so oversubscribed workers
#: still make progress.
if USING_NUMBA:
    _libc = ctypes.CDLL("libc.so.6", use_errno=False)
    _libc.sched_yield.argtypes = []
    _libc.sched_yield.restype = ctypes.c_int
    sched_yield = _libc.sched_yield
    try:
        _libc.__errno_location.argtypes = []
        _libc.__errno_location.restype = ctypes.c_void_p
        cpu_relax = _libc.__errno_location
        cpu_relax()
    except AttributeError:  # non-glibc: fall back to the yield call
        cpu_relax = _libc.sched_yield
else:  # pragma: no cover - trivial
    def sched_yield():
        return 0

    def cpu_relax():
        return 0


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
