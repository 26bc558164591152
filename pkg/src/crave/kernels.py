"""Hot kernels with a compiled backend selected at import.

``BACKEND`` is ``"cython"`` when the extension is importable and
``CRAVE_NO_EXT`` is unset, otherwise ``"python"``. Both backends return
identical results: block matching runs on integer images and the Kendall
counts are exact integers, so there is no rounding to disagree on.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("CRAVE_NO_EXT"):
        raise ImportError("compiled kernels disabled by CRAVE_NO_EXT")
    from . import _kernels_ext as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def search_offsets(radius):
    """Candidate displacements ordered by (squared length, dy, dx).

    Ties in SAD are resolved in favour of the earliest offset, so the
    smallest displacement wins.
    """
    offs = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    offs.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))
    return np.ascontiguousarray(offs, dtype=np.int32).reshape(-1, 2)


def _prep_block_args(prev, nxt, block, radius):
    prev = np.ascontiguousarray(prev, dtype=np.int32)
    nxt = np.ascontiguousarray(nxt, dtype=np.int32)
    if prev.ndim != 2 or prev.shape != nxt.shape:
        raise ValueError(f"block_match needs two equal 2-D frames, got {prev.shape} and {nxt.shape}")
    if block < 1 or radius < 0:
        raise ValueError("block must be >= 1 and radius >= 0")
    return prev, nxt


def block_match(prev, nxt, block=8, radius=3, impl=None):
    """Exhaustive SAD block matching between two integer frames.

    Returns ``(u, v)``: horizontal and vertical integer displacement per
    block, where content at ``(y, x)`` in ``prev`` is found at
    ``(y + v, x + u)`` in ``nxt``. Candidates that leave the frame are
    skipped.
    """
    prev, nxt = _prep_block_args(prev, nxt, block, radius)
    impl = impl or _impl
    return impl.block_match(prev, nxt, int(block), int(radius), search_offsets(radius))


def kendall_counts(x, y, impl=None):
    """Pair counts ``(concordant, discordant, tied_x_only, tied_y_only, tied_both)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("kendall_counts needs two 1-D arrays of equal length")
    impl = impl or _impl
    return tuple(int(c) for c in impl.kendall_counts(x, y))


def available_backends():
    out = {"python": _kernels_py}
    try:
        from . import _kernels_ext

        out["cython"] = _kernels_ext
    except ImportError:
        pass
    return out
