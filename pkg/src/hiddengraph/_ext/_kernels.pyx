# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_fallback.py``.

Loops accumulate in double and store in the input dtype. Summation runs in
ascending index order so results are reproducible run to run.
"""
import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.math cimport exp, tanh

cnp.import_array()

BACKEND = "cython"


cdef inline object _empty(tuple shape, floating dummy):
    if floating is float:
        return np.empty(shape, dtype=np.float32)
    return np.empty(shape, dtype=np.float64)


cdef inline object _zeros(tuple shape, floating dummy):
    if floating is float:
        return np.zeros(shape, dtype=np.float32)
    return np.zeros(shape, dtype=np.float64)


def iou_matrix(const floating[:, ::1] a, const floating[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef floating zero = 0
    cdef double iw, ih, inter, union, area_a, area_b
    out = _empty((n, m), zero)
    cdef floating[:, ::1] o = out
    for i in range(n):
        area_a = (<double>a[i, 2] - a[i, 0]) * (<double>a[i, 3] - a[i, 1])
        for j in range(m):
            area_b = (<double>b[j, 2] - b[j, 0]) * (<double>b[j, 3] - b[j, 1])
            iw = min(<double>a[i, 2], <double>b[j, 2]) - max(<double>a[i, 0], <double>b[j, 0])
            ih = min(<double>a[i, 3], <double>b[j, 3]) - max(<double>a[i, 1], <double>b[j, 1])
            if iw < 0.0:
                iw = 0.0
            if ih < 0.0:
                ih = 0.0
            inter = iw * ih
            union = area_a + area_b - inter
            o[i, j] = inter / union if union > 0.0 else 0.0
    return out


def l1_normalize_columns(const floating[:, ::1] raw):
    cdef Py_ssize_t n = raw.shape[0], m = raw.shape[1], i, j
    cdef floating zero = 0
    cdef double total
    out = _zeros((n, m), zero)
    cdef floating[:, ::1] o = out
    for j in range(m):
        total = 0.0
        for i in range(n):
            total += raw[i, j]
        if total > 0.0:
            for i in range(n):
                o[i, j] = raw[i, j] / total
    return out


def shift_boxes(const floating[:, ::1] nodes, const floating[:, ::1] props,
                const floating[:, ::1] weights):
    cdef Py_ssize_t m = nodes.shape[0], n = props.shape[0], i, j, c
    cdef floating zero = 0
    cdef double total, acc
    out = _empty((m, 4), zero)
    cdef floating[:, ::1] o = out
    for j in range(m):
        total = 0.0
        for i in range(n):
            total += weights[i, j]
        for c in range(4):
            if total <= 0.0:
                o[j, c] = nodes[j, c]
                continue
            acc = 0.0
            for i in range(n):
                acc += <double>weights[i, j] * props[i, c]
            o[j, c] = 0.5 * (nodes[j, c] + acc)
    return out


def softmax_message_forward(const floating[:, ::1] keys, const floating[:, ::1] queries,
                            const floating[:, ::1] values):
    cdef Py_ssize_t n = keys.shape[0], m = queries.shape[0]
    cdef floating zero = 0
    cdef Py_ssize_t k = keys.shape[1], d = values.shape[1], i, j, c
    cdef double acc, top, total
    raw_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] raw = raw_arr
    weights_arr = _empty((n, m), zero)
    out_arr = _empty((m, d), zero)
    cdef floating[:, ::1] w = weights_arr
    cdef floating[:, ::1] o = out_arr
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for c in range(k):
                acc += <double>keys[i, c] * queries[j, c]
            raw[i, j] = acc
    for j in range(m):
        top = raw[0, j]
        for i in range(1, n):
            if raw[i, j] > top:
                top = raw[i, j]
        total = 0.0
        for i in range(n):
            raw[i, j] = exp(raw[i, j] - top)
            total += raw[i, j]
        for i in range(n):
            w[i, j] = raw[i, j] / total
        for c in range(d):
            acc = 0.0
            for i in range(n):
                acc += <double>w[i, j] * values[i, c]
            o[j, c] = acc
    return out_arr, weights_arr


def softmax_message_backward(const floating[:, ::1] keys, const floating[:, ::1] queries,
                             const floating[:, ::1] values, const floating[:, ::1] weights,
                             const floating[:, ::1] grad_out):
    cdef Py_ssize_t n = keys.shape[0], m = queries.shape[0]
    cdef floating zero = 0
    cdef Py_ssize_t k = keys.shape[1], d = values.shape[1], i, j, c
    cdef double acc, inner
    draw_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] draw = draw_arr
    dk_arr = _empty((n, k), zero)
    dq_arr = _empty((m, k), zero)
    dv_arr = _empty((n, d), zero)
    cdef floating[:, ::1] dk = dk_arr
    cdef floating[:, ::1] dq = dq_arr
    cdef floating[:, ::1] dv = dv_arr
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for c in range(d):
                acc += <double>values[i, c] * grad_out[j, c]
            draw[i, j] = acc
        for c in range(d):
            acc = 0.0
            for j in range(m):
                acc += <double>weights[i, j] * grad_out[j, c]
            dv[i, c] = acc
    for j in range(m):
        inner = 0.0
        for i in range(n):
            inner += weights[i, j] * draw[i, j]
        for i in range(n):
            draw[i, j] = weights[i, j] * (draw[i, j] - inner)
    for i in range(n):
        for c in range(k):
            acc = 0.0
            for j in range(m):
                acc += draw[i, j] * queries[j, c]
            dk[i, c] = acc
    for j in range(m):
        for c in range(k):
            acc = 0.0
            for i in range(n):
                acc += draw[i, j] * keys[i, c]
            dq[j, c] = acc
    return dk_arr, dq_arr, dv_arr


def gated_merge_forward(const floating[:, ::1] x, const floating[:, ::1] xh,
                        const floating[:, ::1] wx, const floating[::1] bx,
                        const floating[:, ::1] wh, const floating[::1] bh):
    cdef Py_ssize_t m = x.shape[0], d = x.shape[1], r, a, c
    cdef floating zero = 0
    cdef double acc, g
    out_arr = _empty((m, d), zero)
    gate_arr = _empty((m, d), zero)
    cdef floating[:, ::1] o = out_arr
    cdef floating[:, ::1] gate = gate_arr
    for r in range(m):
        for a in range(d):
            acc = <double>bx[a] + bh[a]
            for c in range(d):
                acc += <double>wx[a, c] * x[r, c] + <double>wh[a, c] * xh[r, c]
            g = 0.5 * (tanh(0.5 * acc) + 1.0)
            gate[r, a] = g
            g = gate[r, a]
            o[r, a] = g * x[r, a] + (1.0 - g) * xh[r, a]
    return out_arr, gate_arr


def gated_merge_backward(const floating[:, ::1] x, const floating[:, ::1] xh,
                         const floating[:, ::1] wx, const floating[:, ::1] wh,
                         const floating[:, ::1] gate, const floating[:, ::1] grad_out):
    cdef Py_ssize_t m = x.shape[0], d = x.shape[1], r, a, c
    cdef floating zero = 0
    cdef double g, acc_x, acc_h
    dpre_arr = np.empty((m, d), dtype=np.float64)
    cdef double[:, ::1] dpre = dpre_arr
    dx_arr = _empty((m, d), zero)
    dxh_arr = _empty((m, d), zero)
    dwx_arr = _empty((d, d), zero)
    dwh_arr = _empty((d, d), zero)
    dbx_arr = _empty((d,), zero)
    dbh_arr = _empty((d,), zero)
    cdef floating[:, ::1] dx = dx_arr
    cdef floating[:, ::1] dxh = dxh_arr
    cdef floating[:, ::1] dwx = dwx_arr
    cdef floating[:, ::1] dwh = dwh_arr
    cdef floating[::1] dbx = dbx_arr
    cdef floating[::1] dbh = dbh_arr
    for r in range(m):
        for a in range(d):
            g = gate[r, a]
            dpre[r, a] = grad_out[r, a] * (<double>x[r, a] - xh[r, a]) * g * (1.0 - g)
    for r in range(m):
        for c in range(d):
            acc_x = 0.0
            acc_h = 0.0
            for a in range(d):
                acc_x += dpre[r, a] * wx[a, c]
                acc_h += dpre[r, a] * wh[a, c]
            g = gate[r, c]
            dx[r, c] = grad_out[r, c] * g + acc_x
            dxh[r, c] = grad_out[r, c] * (1.0 - g) + acc_h
    for a in range(d):
        acc_x = 0.0
        for r in range(m):
            acc_x += dpre[r, a]
        dbx[a] = acc_x
        dbh[a] = acc_x
        for c in range(d):
            acc_x = 0.0
            acc_h = 0.0
            for r in range(m):
                acc_x += dpre[r, a] * x[r, c]
                acc_h += dpre[r, a] * xh[r, c]
            dwx[a, c] = acc_x
            dwh[a, c] = acc_h
    return dx_arr, dxh_arr, dwx_arr, dbx_arr, dwh_arr, dbh_arr


def attend_forward(const floating[:, ::1] nodes, const floating[::1] query,
                   const floating[:, ::1] wg, const floating[::1] bg,
                   const floating[:, ::1] wh, const floating[::1] bh,
                   const floating[:, ::1] wo, const floating[::1] bo):
    cdef Py_ssize_t m = nodes.shape[0], d = nodes.shape[1], na = wg.shape[0], r, a, c
    cdef floating zero = 0
    cdef double acc, top, total
    gq_arr = np.empty(na, dtype=np.float64)
    score_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] gq = gq_arr
    cdef double[::1] score = score_arr
    e_arr = _empty((m, na), zero)
    alpha_arr = _empty((m,), zero)
    q_arr = _empty((d,), zero)
    cdef floating[:, ::1] e = e_arr
    cdef floating[::1] alpha = alpha_arr
    cdef floating[::1] q = q_arr
    for a in range(na):
        acc = bg[a]
        for c in range(d):
            acc += <double>wg[a, c] * query[c]
        gq[a] = acc
    for r in range(m):
        total = bo[0]
        for a in range(na):
            acc = gq[a] + bh[a]
            for c in range(d):
                acc += <double>wh[a, c] * nodes[r, c]
            e[r, a] = tanh(acc)
            total += <double>wo[0, a] * e[r, a]
        score[r] = total
    top = score[0]
    for r in range(1, m):
        if score[r] > top:
            top = score[r]
    total = 0.0
    for r in range(m):
        score[r] = exp(score[r] - top)
        total += score[r]
    for r in range(m):
        alpha[r] = score[r] / total
    for c in range(d):
        acc = 0.0
        for r in range(m):
            acc += <double>alpha[r] * nodes[r, c]
        q[c] = acc
    return alpha_arr, q_arr, e_arr


def attend_backward(const floating[:, ::1] nodes, const floating[::1] query,
                    const floating[:, ::1] wg, const floating[:, ::1] wh,
                    const floating[:, ::1] wo, const floating[::1] alpha,
                    const floating[:, ::1] e, const floating[::1] grad_q):
    cdef Py_ssize_t m = nodes.shape[0], d = nodes.shape[1], na = wg.shape[0], r, a, c
    cdef floating zero = 0
    cdef double acc, mean
    dscore_arr = np.empty(m, dtype=np.float64)
    dpre_arr = np.empty((m, na), dtype=np.float64)
    dg_acc_arr = np.zeros(na, dtype=np.float64)
    cdef double[::1] dscore = dscore_arr
    cdef double[:, ::1] dpre = dpre_arr
    cdef double[::1] dg_acc = dg_acc_arr
    dn_arr = _empty((m, d), zero)
    dq_arr = _empty((d,), zero)
    dwg_arr = _empty((na, d), zero)
    dbg_arr = _empty((na,), zero)
    dwh_arr = _empty((na, d), zero)
    dbh_arr = _empty((na,), zero)
    dwo_arr = _empty((1, na), zero)
    dbo_arr = _empty((1,), zero)
    cdef floating[:, ::1] dn = dn_arr
    cdef floating[::1] dq = dq_arr
    cdef floating[:, ::1] dwg = dwg_arr
    cdef floating[::1] dbg = dbg_arr
    cdef floating[:, ::1] dwh = dwh_arr
    cdef floating[::1] dbh = dbh_arr
    cdef floating[:, ::1] dwo = dwo_arr
    cdef floating[::1] dbo = dbo_arr
    mean = 0.0
    for r in range(m):
        acc = 0.0
        for c in range(d):
            acc += <double>nodes[r, c] * grad_q[c]
        dscore[r] = acc
        mean += alpha[r] * acc
    acc = 0.0
    for r in range(m):
        dscore[r] = alpha[r] * (dscore[r] - mean)
        acc += dscore[r]
    dbo[0] = acc
    for a in range(na):
        acc = 0.0
        for r in range(m):
            acc += dscore[r] * e[r, a]
            dpre[r, a] = dscore[r] * wo[0, a] * (1.0 - <double>e[r, a] * e[r, a])
            dg_acc[a] += dpre[r, a]
        dwo[0, a] = acc
        dbg[a] = dg_acc[a]
        dbh[a] = dg_acc[a]
    for r in range(m):
        for c in range(d):
            acc = <double>alpha[r] * grad_q[c]
            for a in range(na):
                acc += dpre[r, a] * wh[a, c]
            dn[r, c] = acc
    for a in range(na):
        for c in range(d):
            acc = 0.0
            for r in range(m):
                acc += dpre[r, a] * nodes[r, c]
            dwh[a, c] = acc
            dwg[a, c] = dg_acc[a] * query[c]
    for c in range(d):
        acc = 0.0
        for a in range(na):
            acc += dg_acc[a] * wg[a, c]
        dq[c] = acc
    return dn_arr, dq_arr, dwg_arr, dbg_arr, dwh_arr, dbh_arr, dwo_arr, dbo_arr
