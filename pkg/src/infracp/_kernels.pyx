# Compiled counterparts of infracp._kernels_py. Keep signatures in sync.

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, INFINITY

cnp.import_array()

cdef enum:
    NO_HIT = -2
    GROUND_HIT = -1


def cast_rays(origin, dirs, boxes, Py_ssize_t exclude=-1, bint ground=True,
              double max_range=INFINITY):
    cdef double[::1] o = np.ascontiguousarray(origin, dtype=np.float64)
    cdef double[:, ::1] d = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(
        np.asarray(boxes, dtype=np.float64).reshape(-1, 7))
    cdef Py_ssize_t n = d.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, k, a, kk

    dist_arr = np.full(n, np.inf)
    hit_arr = np.full(n, NO_HIT, dtype=np.int64)
    cdef double[::1] best = dist_arr
    cdef long long[::1] hit = hit_arr

    # per-box constants; boxes visited nearest-first so a ray can stop early
    cdef double[:, ::1] pre = np.empty((m, 10))
    cdef double[::1] reach = np.empty(m)
    cdef double c, s, ox, oy, oz, r
    for k in range(m):
        c = cos(b[k, 6])
        s = sin(b[k, 6])
        ox = o[0] - b[k, 0]
        oy = o[1] - b[k, 1]
        oz = o[2] - b[k, 2]
        pre[k, 0] = c
        pre[k, 1] = s
        pre[k, 2] = c * ox + s * oy
        pre[k, 3] = -s * ox + c * oy
        pre[k, 4] = oz
        pre[k, 5] = 0.5 * b[k, 4]
        pre[k, 6] = 0.5 * b[k, 3]
        pre[k, 7] = 0.5 * b[k, 5]
        r = sqrt(pre[k, 5] * pre[k, 5] + pre[k, 6] * pre[k, 6] + pre[k, 7] * pre[k, 7])
        pre[k, 8] = r
        reach[k] = sqrt(ox * ox + oy * oy + oz * oz) - r
    order_arr = np.argsort(np.asarray(reach), kind="stable").astype(np.intp)
    cdef Py_ssize_t[::1] order = order_arr

    cdef long long hk
    cdef double dx, dy, dz, lo[3], ld[3], half[3], t1, t2, tmp, tn, tf, t, tg
    cdef bint miss
    for i in range(n):
        dx = d[i, 0]
        dy = d[i, 1]
        dz = d[i, 2]
        t = INFINITY
        hk = NO_HIT
        if ground and o[2] > 0.0 and dz < 0.0:
            tg = -o[2] / dz
            t = tg
            hk = GROUND_HIT
        for kk in range(m):
            k = order[kk]
            if reach[k] > t:
                break
            if k == exclude:
                continue
            c = pre[k, 0]
            s = pre[k, 1]
            lo[0] = pre[k, 2]
            lo[1] = pre[k, 3]
            lo[2] = pre[k, 4]
            ld[0] = c * dx + s * dy
            ld[1] = -s * dx + c * dy
            ld[2] = dz
            half[0] = pre[k, 5]
            half[1] = pre[k, 6]
            half[2] = pre[k, 7]
            tn = -INFINITY
            tf = INFINITY
            miss = False
            for a in range(3):
                if ld[a] == 0.0:
                    if fabs(lo[a]) > half[a]:
                        miss = True
                        break
                    continue
                t1 = (-half[a] - lo[a]) / ld[a]
                t2 = (half[a] - lo[a]) / ld[a]
                if t1 > t2:
                    tmp = t1
                    t1 = t2
                    t2 = tmp
                if t1 > tn:
                    tn = t1
                if t2 < tf:
                    tf = t2
                if tn > tf:
                    miss = True
                    break
            if miss or tf < 0.0:
                continue
            if tn < 0.0:
                tn = tf
            if tn < t:
                t = tn
                hk = k
        if t > max_range:
            continue
        best[i] = t
        hit[i] = hk
    return dist_arr, hit_arr


cdef inline double _shoelace(double* px, double* py, int n) nogil:
    cdef double acc = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        acc += px[i] * py[j] - px[j] * py[i]
    return 0.5 * acc


cdef inline void _corners(double x, double y, double w, double l, double yaw,
                          double* cx, double* cy) nogil:
    cdef double c = cos(yaw), s = sin(yaw), hl = 0.5 * l, hw = 0.5 * w
    cdef double dxs[4]
    cdef double dys[4]
    dxs[0] = hl; dys[0] = hw
    dxs[1] = -hl; dys[1] = hw
    dxs[2] = -hl; dys[2] = -hw
    dxs[3] = hl; dys[3] = -hw
    cdef int i
    for i in range(4):
        cx[i] = x + c * dxs[i] - s * dys[i]
        cy[i] = y + s * dxs[i] + c * dys[i]


cdef double _rect_iou(double[:] a, double[:] b) nogil:
    cdef double ax[4]
    cdef double ay[4]
    cdef double bx[4]
    cdef double by[4]
    cdef double px[16]
    cdef double py[16]
    cdef double qx[16]
    cdef double qy[16]
    cdef int n, m, i, j, jn, e
    cdef double ex, ey, x0, y0, sp, sq, t, inter, union

    _corners(a[0], a[1], a[2], a[3], a[4], ax, ay)
    _corners(b[0], b[1], b[2], b[3], b[4], bx, by)
    for i in range(4):
        px[i] = ax[i]
        py[i] = ay[i]
    n = 4
    for e in range(4):
        if n < 3:
            return 0.0
        x0 = bx[e]
        y0 = by[e]
        ex = bx[(e + 1) % 4] - x0
        ey = by[(e + 1) % 4] - y0
        m = 0
        for j in range(n):
            jn = j + 1
            if jn == n:
                jn = 0
            sp = ex * (py[j] - y0) - ey * (px[j] - x0)
            sq = ex * (py[jn] - y0) - ey * (px[jn] - x0)
            if sp >= 0.0:
                qx[m] = px[j]
                qy[m] = py[j]
                m += 1
            if (sp >= 0.0) != (sq >= 0.0):
                t = sp / (sp - sq)
                qx[m] = px[j] + t * (px[jn] - px[j])
                qy[m] = py[j] + t * (py[jn] - py[j])
                m += 1
        for j in range(m):
            px[j] = qx[j]
            py[j] = qy[j]
        n = m
    if n < 3:
        return 0.0
    inter = _shoelace(px, py, n)
    if inter <= 0.0:
        return 0.0
    union = a[2] * a[3] + b[2] * b[3] - inter
    if union <= 0.0:
        return 0.0
    t = inter / union
    if t > 1.0:
        return 1.0
    return t


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 5))
    cdef double[:, ::1] B = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 5))
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out_arr = np.zeros((n, m))
    cdef double[:, ::1] out = out_arr
    cdef double ra, rb, dx, dy
    for i in range(n):
        ra = 0.5 * sqrt(A[i, 2] * A[i, 2] + A[i, 3] * A[i, 3])
        for j in range(m):
            rb = 0.5 * sqrt(B[j, 2] * B[j, 2] + B[j, 3] * B[j, 3])
            dx = A[i, 0] - B[j, 0]
            dy = A[i, 1] - B[j, 1]
            if sqrt(dx * dx + dy * dy) >= ra + rb:
                continue
            out[i, j] = _rect_iou(A[i], B[j])
    return out_arr
