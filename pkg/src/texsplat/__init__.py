"""texsplat: geometry/texture-disentangled Gaussian splatting on the CPU."""

import os

__version__ = "0.1.0"


def set_threads(n: int | None = None) -> int:
    """Cap render parallelism; falls back to the TEXSPLAT_THREADS env var."""
    import numba

    if n is None:
        env = os.environ.get("TEXSPLAT_THREADS")
        n = int(env) if env else numba.config.NUMBA_DEFAULT_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
