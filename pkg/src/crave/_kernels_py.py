"""Pure numpy implementations of the hot kernels (fallback path)."""
import numpy as np


def block_match(prev, nxt, block, radius, offsets):
    h, w = prev.shape
    nby, nbx = h // block, w // block
    u = np.zeros((nby, nbx), dtype=np.int32)
    v = np.zeros((nby, nbx), dtype=np.int32)
    if nby == 0 or nbx == 0:
        return u, v
    # (nby, nbx, block, block) view of the reference blocks
    ref = prev[: nby * block, : nbx * block].reshape(nby, block, nbx, block).transpose(0, 2, 1, 3)
    best = np.full((nby, nbx), -1, dtype=np.int64)
    ys = np.arange(nby)[:, None] * block
    xs = np.arange(nbx)[None, :] * block
    padded = np.pad(nxt.astype(np.int64), radius)
    ref = ref.astype(np.int64)
    for dy, dx in offsets:
        valid = (ys + dy >= 0) & (xs + dx >= 0) & (ys + dy + block <= h) & (xs + dx + block <= w)
        window = padded[radius + dy: radius + dy + nby * block, radius + dx: radius + dx + nbx * block]
        if window.shape != (nby * block, nbx * block):
            continue
        cand = window.reshape(nby, block, nbx, block).transpose(0, 2, 1, 3)
        sad = np.abs(ref - cand).sum(axis=(2, 3))
        better = valid & ((best < 0) | (sad < best))
        best = np.where(better, sad, best)
        u[better] = dx
        v[better] = dy
    return u, v


def kendall_counts(x, y):
    n = len(x)
    iu, ju = np.triu_indices(n, k=1)
    sx = np.sign(x[iu] - x[ju])
    sy = np.sign(y[iu] - y[ju])
    both = (sx == 0) & (sy == 0)
    tx = (sx == 0) & (sy != 0)
    ty = (sy == 0) & (sx != 0)
    prod = sx * sy
    return (int((prod > 0).sum()), int((prod < 0).sum()), int(tx.sum()), int(ty.sum()), int(both.sum()))
