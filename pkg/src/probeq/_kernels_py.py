"""Pure-numpy kernels for the conditional joint queue law.

Cell weight over the cube (a, b, c) in [0, N]^3:

    w = btab[m - 1 + min(m, min3) + mid3] * ga[a] * gb[b] * gc[c]

restricted to the support {max3 >= m, a + b + c >= xp}, where min3/mid3/max3
sort the triple and btab/g* arrive pre-scaled from the caller.  The compiled
twin in _kernels.pyx computes the same quantities loop-wise without
materializing intermediates.
"""
import numpy as np

BACKEND = "py"


def _weights(ga, gb, gc, btab, m, xp):
    n = ga.shape[0]
    idx = np.arange(n)
    a = idx[:, None, None]
    b = idx[None, :, None]
    c = idx[None, None, :]
    mn = np.minimum(np.minimum(a, b), c)
    mx = np.maximum(np.maximum(a, b), c)
    s3 = a + b + c
    mid = s3 - mn - mx
    t = (m - 1) + np.minimum(m, mn) + mid
    w = btab[t] * (ga[:, None, None] * gb[None, :, None] * gc[None, None, :])
    w[(mx < m) | (s3 < xp)] = 0.0
    return w


def prop2_fill(ga, gb, gc, btab, m, xp, out):
    """Write the unnormalized cell weights into out (shape (N+1,)*3)."""
    out[...] = _weights(ga, gb, gc, btab, m, xp)


def prop2_zmom(ga, gb, gc, btab, m, xp):
    """Return (Z, S_a, S_b, S_c): total mass and first-moment sums."""
    w = _weights(ga, gb, gc, btab, m, xp)
    n = np.arange(ga.shape[0], dtype=float)
    return (
        float(w.sum()),
        float(w.sum(axis=(1, 2)) @ n),
        float(w.sum(axis=(0, 2)) @ n),
        float(w.sum(axis=(0, 1)) @ n),
    )
