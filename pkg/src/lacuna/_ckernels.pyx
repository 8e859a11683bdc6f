# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: directional segment averages and the dyadic strong maximal function.

Arrays are handled as flat C-contiguous buffers of length M**n; an axis ``d``
is addressed through ``pre = M**d`` and ``post = M**(n-1-d)``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.string cimport memcpy

cnp.import_array()


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t M) noexcept nogil:
    i = i % M
    return i + M if i < 0 else i


cdef void _shift_axis(const double[::1] src, double[::1] dst, Py_ssize_t M,
                      Py_ssize_t pre, Py_ssize_t post, double offset) noexcept nogil:
    # dst[m] = (1-w) src[m + base] + w src[m + base + 1], periodic
    cdef Py_ssize_t base = <Py_ssize_t>floor(offset)
    cdef double w = offset - floor(offset)
    cdef double w0 = 1.0 - w
    cdef Py_ssize_t p, m, q, o, a, b
    base = _wrap(base, M)
    for p in range(pre):
        for m in range(M):
            o = (p * M + m) * post
            a = (p * M + _wrap(m + base, M)) * post
            if w == 0.0:
                for q in range(post):
                    dst[o + q] = src[a + q]
            else:
                b = (p * M + _wrap(m + base + 1, M)) * post
                for q in range(post):
                    dst[o + q] = w0 * src[a + q] + w * src[b + q]


cdef void _shifted(const double[::1] f, double[::1] out, double[::1] tmp, Py_ssize_t n,
                   Py_ssize_t M, const double[::1] delta) noexcept nogil:
    # successive 1-d passes ending in ``out``
    cdef Py_ssize_t d, pre = 1, post = 1
    for d in range(n - 1):
        post *= M
    if n % 2 == 1:
        _shift_axis(f, out, M, pre, post, delta[0])
    else:
        _shift_axis(f, tmp, M, pre, post, delta[0])
    for d in range(1, n):
        pre *= M
        post //= M
        if (n - d) % 2 == 1:
            _shift_axis(tmp, out, M, pre, post, delta[d])
        else:
            _shift_axis(out, tmp, M, pre, post, delta[d])


cdef void _tables(Py_ssize_t M, double offset, Py_ssize_t stride, Py_ssize_t[::1] lo,
                  Py_ssize_t[::1] hi, double* w) noexcept nogil:
    cdef Py_ssize_t base = <Py_ssize_t>floor(offset)
    cdef Py_ssize_t m
    w[0] = offset - floor(offset)
    for m in range(M):
        lo[m] = _wrap(m + base, M) * stride
        hi[m] = _wrap(m + base + 1, M) * stride


cdef void _step_2d(const double[::1] f, double[::1] total, double[::1] out, Py_ssize_t M,
                   double dx, double dy, Py_ssize_t r, bint emit,
                   Py_ssize_t[::1] xl, Py_ssize_t[::1] xh, Py_ssize_t[::1] yl, Py_ssize_t[::1] yh,
                   Py_ssize_t[::1] xl2, Py_ssize_t[::1] xh2, Py_ssize_t[::1] yl2,
                   Py_ssize_t[::1] yh2) noexcept nogil:
    # fused bilinear forward/backward samples, running trapezoid sum, and max update
    cdef double wx, wy, wx2, wy2, fw, bw, avg
    cdef Py_ssize_t i, j, o, a0, a1, b0, b1
    _tables(M, dx, M, xl, xh, &wx)
    _tables(M, dy, 1, yl, yh, &wy)
    _tables(M, -dx, M, xl2, xh2, &wx2)
    _tables(M, -dy, 1, yl2, yh2, &wy2)
    for i in range(M):
        a0 = xl[i]
        a1 = xh[i]
        b0 = xl2[i]
        b1 = xh2[i]
        for j in range(M):
            fw = ((1.0 - wy) * ((1.0 - wx) * f[a0 + yl[j]] + wx * f[a1 + yl[j]])
                  + wy * ((1.0 - wx) * f[a0 + yh[j]] + wx * f[a1 + yh[j]]))
            bw = ((1.0 - wy2) * ((1.0 - wx2) * f[b0 + yl2[j]] + wx2 * f[b1 + yl2[j]])
                  + wy2 * ((1.0 - wx2) * f[b0 + yh2[j]] + wx2 * f[b1 + yh2[j]]))
            o = i * M + j
            total[o] += fw + bw
            if emit:
                avg = (total[o] - 0.5 * (fw + bw)) / (2 * r)
                if avg > out[o]:
                    out[o] = avg


def segment_max(cnp.ndarray f_arr, const double[::1] v, list groups):
    """Max over radius groups of trapezoid averages along ``v``.

    ``groups`` is a list of ``(step, [nodes_per_side, ...])`` with node counts
    increasing, in cell units, as produced by ``kernels.radius_groups``.
    """
    cdef Py_ssize_t n = f_arr.ndim
    cdef Py_ssize_t M = f_arr.shape[0]
    cdef Py_ssize_t size = f_arr.size
    cdef const double[::1] f = f_arr.reshape(-1)
    out_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef double[::1] total = np.empty(size)
    cdef double[::1] fwd = np.empty(size)
    cdef double[::1] bwd = np.empty(size)
    cdef double[::1] tmp = np.empty(size)
    cdef double[::1] delta = np.empty(n)
    cdef Py_ssize_t[::1] t0 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t1 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t2 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t3 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t4 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t5 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t6 = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] t7 = np.empty(M, dtype=np.intp)
    cdef double h, avg
    cdef Py_ssize_t r, last, i, d, k
    cdef bint emit
    cdef list targets
    for h, targets in groups:
        last = targets[len(targets) - 1]
        k = 0
        for i in range(size):
            total[i] = f[i]
        for r in range(1, last + 1):
            emit = r == <Py_ssize_t>targets[k]
            if n == 2:
                _step_2d(f, total, out, M, r * h * v[0], r * h * v[1], r, emit,
                         t0, t1, t2, t3, t4, t5, t6, t7)
            else:
                for d in range(n):
                    delta[d] = r * h * v[d]
                _shifted(f, fwd, tmp, n, M, delta)
                for d in range(n):
                    delta[d] = -r * h * v[d]
                _shifted(f, bwd, tmp, n, M, delta)
                for i in range(size):
                    total[i] += fwd[i] + bwd[i]
                if emit:
                    for i in range(size):
                        avg = (total[i] - 0.5 * (fwd[i] + bwd[i])) / (2 * r)
                        if avg > out[i]:
                            out[i] = avg
            if emit:
                k += 1
    return out_arr.reshape((<object>f_arr).shape)


cdef inline void _add_run(const double* x, const double* y, double* z, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(k):
        z[i] = x[i] + y[i]


cdef inline void _max_run(const double* x, const double* y, double* z, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(k):
        z[i] = x[i] if x[i] >= y[i] else y[i]


cdef void _roll_add(const double* src, double* dst, Py_ssize_t M, Py_ssize_t pre,
                    Py_ssize_t post, Py_ssize_t shift) noexcept nogil:
    # dst[m] = src[m] + src[(m + shift) % M]; two contiguous runs per row
    cdef Py_ssize_t p, o, split = (M - shift) * post
    cdef Py_ssize_t row = M * post
    for p in range(pre):
        o = p * row
        _add_run(src + o, src + o + shift * post, dst + o, split)
        _add_run(src + o + split, src + o, dst + o + split, row - split)


cdef void _roll_max(const double* src, double* dst, Py_ssize_t M, Py_ssize_t pre,
                    Py_ssize_t post, Py_ssize_t shift) noexcept nogil:
    # dst[m] = max(src[m], src[(m - shift) % M])
    cdef Py_ssize_t p, o, head = shift * post
    cdef Py_ssize_t row = M * post
    for p in range(pre):
        o = p * row
        _max_run(src + o, src + o + row - head, dst + o, head)
        _max_run(src + o + head, src + o, dst + o + head, row - head)


cdef void _strong_recurse(double* sums, double* work, double* out, Py_ssize_t size,
                          Py_ssize_t axis, Py_ssize_t n, Py_ssize_t M, Py_ssize_t levels,
                          Py_ssize_t* sizes) noexcept nogil:
    # sums + axis*size holds box sums with sizes[0..axis-1] fixed along earlier axes
    cdef Py_ssize_t pre = 1, post, a, b, i, ax
    cdef double area
    cdef double* src
    cdef double* dst
    cdef double* swap
    cdef double* cur
    if axis == n:
        area = 1.0
        for ax in range(n):
            area *= <double>(1 << sizes[ax])
        src = work
        dst = work + size
        cur = sums + n * size
        for i in range(size):
            src[i] = cur[i] / area
        post = size
        for ax in range(n):
            post //= M
            for b in range(sizes[ax]):
                _roll_max(src, dst, M, pre, post, 1 << b)
                swap = src
                src = dst
                dst = swap
            pre *= M
        for i in range(size):
            if src[i] > out[i]:
                out[i] = src[i]
        return
    for ax in range(axis):
        pre *= M
    post = size // (pre * M)
    cur = sums + (axis + 1) * size
    memcpy(cur, sums + axis * size, size * sizeof(double))
    sizes[axis] = 0
    _strong_recurse(sums, work, out, size, axis + 1, n, M, levels, sizes)
    for a in range(levels):
        # cur still holds the size-a sums along ``axis``
        _roll_add(cur, work + 2 * size, M, pre, post, 1 << a)
        memcpy(cur, work + 2 * size, size * sizeof(double))
        sizes[axis] = a + 1
        _strong_recurse(sums, work, out, size, axis + 1, n, M, levels, sizes)


def strong_maximal(cnp.ndarray f_arr):
    """Sup of averages over periodic rectangles with dyadic side lengths (cells)."""
    cdef Py_ssize_t n = f_arr.ndim
    cdef Py_ssize_t M = f_arr.shape[0]
    cdef Py_ssize_t size = f_arr.size
    cdef Py_ssize_t levels = 0
    cdef Py_ssize_t sizes[8]
    while (<Py_ssize_t>1 << (levels + 1)) <= M:
        levels += 1
    out_arr = np.zeros(size)
    sums = np.empty((n + 1, size))
    sums[0] = np.asarray(f_arr, dtype=float).reshape(-1)
    work = np.empty((3, size))
    cdef double[:, ::1] sv = sums
    cdef double[:, ::1] wv = work
    cdef double[::1] ov = out_arr
    with nogil:
        _strong_recurse(&sv[0, 0], &wv[0, 0], &ov[0], size, 0, n, M, levels, sizes)
    return out_arr.reshape((<object>f_arr).shape)
