# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the conditional joint queue law.

Same cell-weight definition as _kernels_py; prop2_zmom runs the triple loop
without materializing the (N+1)^3 cube.
"""
import numpy as np

BACKEND = "c"


def prop2_fill(double[::1] ga, double[::1] gb, double[::1] gc,
               double[::1] btab, int m, int xp, double[:, :, ::1] out):
    """Write the unnormalized cell weights into out (shape (N+1,)*3)."""
    cdef Py_ssize_t n = ga.shape[0]
    cdef Py_ssize_t a, b, c
    cdef int mn, mx, mid, t
    cdef double wa, wab
    with nogil:
        for a in range(n):
            wa = ga[a]
            for b in range(n):
                wab = wa * gb[b]
                for c in range(n):
                    mn = a
                    mx = a
                    if b < mn:
                        mn = b
                    if c < mn:
                        mn = c
                    if b > mx:
                        mx = b
                    if c > mx:
                        mx = c
                    if mx < m or a + b + c < xp:
                        out[a, b, c] = 0.0
                        continue
                    mid = <int>(a + b + c) - mn - mx
                    t = m - 1 + (m if m < mn else mn) + mid
                    out[a, b, c] = btab[t] * wab * gc[c]


def prop2_zmom(double[::1] ga, double[::1] gb, double[::1] gc,
               double[::1] btab, int m, int xp):
    """Return (Z, S_a, S_b, S_c): total mass and first-moment sums."""
    cdef Py_ssize_t n = ga.shape[0]
    cdef Py_ssize_t a, b, c
    cdef int mn, mx, mid, t
    cdef double w, wa, wab
    cdef double z = 0.0, sa = 0.0, sb = 0.0, sc = 0.0
    with nogil:
        for a in range(n):
            wa = ga[a]
            if wa == 0.0:
                continue
            for b in range(n):
                wab = wa * gb[b]
                if wab == 0.0:
                    continue
                for c in range(n):
                    mn = a
                    mx = a
                    if b < mn:
                        mn = b
                    if c < mn:
                        mn = c
                    if b > mx:
                        mx = b
                    if c > mx:
                        mx = c
                    if mx < m or a + b + c < xp:
                        continue
                    mid = <int>(a + b + c) - mn - mx
                    t = m - 1 + (m if m < mn else mn) + mid
                    w = btab[t] * wab * gc[c]
                    z += w
                    sa += a * w
                    sb += b * w
                    sc += c * w
    return z, sa, sb, sc
