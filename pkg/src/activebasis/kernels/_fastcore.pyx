# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: direct 2D correlation and activity-set max pooling.

Semantics match ``activebasis.kernels._ref`` exactly; the test suite asserts
agreement between the two backends.
"""

import numpy as np


def correlate_valid(image, kernels):
    """Valid-mode sliding dot products of ``kernels`` (K, L, L) over ``image``."""
    image = np.ascontiguousarray(image, dtype=np.float64)
    kernels = np.ascontiguousarray(kernels, dtype=np.float64)
    cdef const double[:, ::1] img = image
    cdef const double[:, :, ::1] ker = kernels
    cdef Py_ssize_t K = ker.shape[0]
    cdef Py_ssize_t L1 = ker.shape[1]
    cdef Py_ssize_t L2 = ker.shape[2]
    cdef Py_ssize_t H = img.shape[0]
    cdef Py_ssize_t W = img.shape[1]
    cdef Py_ssize_t Ho = H - L1 + 1
    cdef Py_ssize_t Wo = W - L2 + 1
    if Ho <= 0 or Wo <= 0:
        raise ValueError("image smaller than kernel support")
    out_arr = np.empty((K, Ho, Wo), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, r, c, i, j
    cdef double acc
    with nogil:
        for k in range(K):
            for r in range(Ho):
                for c in range(Wo):
                    acc = 0.0
                    for i in range(L1):
                        for j in range(L2):
                            acc += img[r + i, c + j] * ker[k, i, j]
                    out[k, r, c] = acc
    return out_arr


def local_max_pool(maps, offsets, counts):
    """Max over perturbed poses; see the reference backend for the contract."""
    maps = np.ascontiguousarray(maps, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const double[:, :, ::1] m = maps
    cdef const long long[:, :, ::1] offs = offsets
    cdef const long long[::1] cnt = counts
    cdef Py_ssize_t O = m.shape[0]
    cdef Py_ssize_t H = m.shape[1]
    cdef Py_ssize_t W = m.shape[2]
    out_arr = np.full((O, H, W), -np.inf, dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, r, c, t
    cdef Py_ssize_t so, sr, sc
    cdef long long do, dr, dc
    cdef double best, v
    cdef bint seen
    with nogil:
        for o in range(O):
            for r in range(H):
                for c in range(W):
                    best = 0.0
                    seen = False
                    for t in range(cnt[o]):
                        do = offs[o, t, 0]
                        dr = offs[o, t, 1]
                        dc = offs[o, t, 2]
                        sr = r + dr
                        sc = c + dc
                        if sr < 0 or sr >= H or sc < 0 or sc >= W:
                            continue
                        so = (o + do) % O
                        if so < 0:
                            so += O
                        v = m[so, sr, sc]
                        if not seen or v > best:
                            best = v
                            seen = True
                    if seen:
                        out[o, r, c] = best
    return out_arr
