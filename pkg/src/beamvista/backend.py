"""Kernel backend selection.

The package ships two implementations of its hot kernels: numba-jitted
loops and a pure-numpy fallback. Selection order:

  * env ``BEAMVISTA_BACKEND=numpy`` forces the fallback,
  * ``BEAMVISTA_BACKEND=numba`` requires numba (raises if missing),
  * unset / ``auto``: numba when importable, numpy otherwise.

``BEAMVISTA_THREADS`` caps the numba thread pool. Both backends produce
bitwise-identical results run to run on the same host.
"""

import os

from . import _kernels_numpy
from .errors import ConfigError

try:
    import numba

    from . import _kernels_numba
    HAVE_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAVE_NUMBA = False

_KERNEL_NAMES = ("im2col", "col2im", "maxpool_forward", "maxpool_backward")
_active = {}
_active_name = ""


def _apply_thread_cap():
    if not HAVE_NUMBA:
        return
    cap = os.environ.get("BEAMVISTA_THREADS")
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"BEAMVISTA_THREADS must be an integer, got {cap!r}")
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def set_thread_cap(n):
    """Cap the numba thread pool at n; no-op when numba is absent."""
    if n < 1:
        raise ConfigError("thread cap must be >= 1")
    if HAVE_NUMBA:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def use_backend(name):
    """Switch the active kernel backend ('numba' or 'numpy')."""
    global _active_name
    if name == "numba":
        if not HAVE_NUMBA:
            raise ConfigError("numba backend requested but numba is not installed")
        mod = _kernels_numba
    elif name == "numpy":
        mod = _kernels_numpy
    else:
        raise ConfigError(f"unknown kernel backend {name!r}")
    for fn in _KERNEL_NAMES:
        _active[fn] = getattr(mod, fn)
    _active_name = name


def active_backend():
    return _active_name


def _initial_choice():
    env = os.environ.get("BEAMVISTA_BACKEND", "auto").lower()
    if env in ("numba", "numpy"):
        return env
    if env in ("auto", ""):
        return "numba" if HAVE_NUMBA else "numpy"
    raise ConfigError(f"BEAMVISTA_BACKEND must be auto|numba|numpy, got {env!r}")


_apply_thread_cap()
use_backend(_initial_choice())


def im2col(xp, k, stride, oh, ow):
    return _active["im2col"](xp, k, stride, oh, ow)


def col2im(dcols, B, C, Hp, Wp, k, stride, oh, ow):
    return _active["col2im"](dcols, B, C, Hp, Wp, k, stride, oh, ow)


def maxpool_forward(x, k, stride, oh, ow):
    return _active["maxpool_forward"](x, k, stride, oh, ow)


def maxpool_backward(dout, idx, B, C, H, W):
    return _active["maxpool_backward"](dout, idx, B, C, H, W)
