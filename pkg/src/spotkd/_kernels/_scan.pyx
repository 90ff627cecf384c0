# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled recurrent scan kernels; numerically equivalent to numpy_backend."""

from libc.math cimport tanh

import numpy as np


def scan_forward(double[:, :, ::1] xproj, double[:, ::1] rec_w):
    cdef Py_ssize_t t_len = xproj.shape[0]
    cdef Py_ssize_t batch = xproj.shape[1]
    cdef Py_ssize_t hidden = xproj.shape[2]
    h_arr = np.empty((t_len, batch, hidden), dtype=np.float64)
    cdef double[:, :, ::1] h = h_arr
    acc_arr = np.empty(batch * hidden, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    cdef double* acc_p = &acc[0]
    cdef const double* w_p = &rec_w[0, 0]
    cdef const double* x_p
    cdef const double* hprev_p
    cdef double* hout_p
    cdef const double* wrow
    cdef Py_ssize_t t, b, i, j
    cdef double hj

    for t in range(t_len):
        x_p = &xproj[t, 0, 0]
        for i in range(batch * hidden):
            acc_p[i] = x_p[i]
        if t > 0:
            hprev_p = &h[t - 1, 0, 0]
            for b in range(batch):
                for j in range(hidden):
                    hj = hprev_p[b * hidden + j]
                    wrow = w_p + j * hidden
                    for i in range(hidden):
                        acc_p[b * hidden + i] += hj * wrow[i]
        hout_p = &h[t, 0, 0]
        for i in range(batch * hidden):
            hout_p[i] = tanh(acc_p[i])
    return h_arr


def scan_backward(double[:, :, ::1] h, double[:, ::1] rec_w,
                  double[:, :, ::1] dh):
    cdef Py_ssize_t t_len = h.shape[0]
    cdef Py_ssize_t batch = h.shape[1]
    cdef Py_ssize_t hidden = h.shape[2]
    dxproj_arr = np.empty((t_len, batch, hidden), dtype=np.float64)
    drec_arr = np.zeros((hidden, hidden), dtype=np.float64)
    cdef double[:, :, ::1] dxproj = dxproj_arr
    cdef double[:, ::1] drec = drec_arr
    # Contiguous transpose keeps the inner accumulation loops unit-stride.
    wt_arr = np.ascontiguousarray(np.asarray(rec_w).T)
    cdef double[:, ::1] wt = wt_arr
    total_arr = np.empty(batch * hidden, dtype=np.float64)
    delta_arr = np.zeros(batch * hidden, dtype=np.float64)
    cdef double[::1] total = total_arr
    cdef double[::1] delta = delta_arr
    cdef double* total_p = &total[0]
    cdef double* delta_p = &delta[0]
    cdef double* drec_p = &drec[0, 0]
    cdef const double* wt_p = &wt[0, 0]
    cdef const double* dh_p
    cdef const double* h_p
    cdef const double* hprev_p
    cdef double* dx_p
    cdef const double* wrow
    cdef double* drow
    cdef Py_ssize_t t, b, i, j
    cdef double dj, hv, hprev

    for t in range(t_len - 1, -1, -1):
        dh_p = &dh[t, 0, 0]
        for i in range(batch * hidden):
            total_p[i] = dh_p[i]
        if t < t_len - 1:
            # total += delta_{t+1} @ rec_w.T; wt[j, i] == rec_w[i, j].
            for b in range(batch):
                for j in range(hidden):
                    dj = delta_p[b * hidden + j]
                    wrow = wt_p + j * hidden
                    for i in range(hidden):
                        total_p[b * hidden + i] += dj * wrow[i]
        h_p = &h[t, 0, 0]
        dx_p = &dxproj[t, 0, 0]
        for i in range(batch * hidden):
            hv = h_p[i]
            delta_p[i] = total_p[i] * (1.0 - hv * hv)
            dx_p[i] = delta_p[i]
        if t > 0:
            hprev_p = &h[t - 1, 0, 0]
            for b in range(batch):
                for j in range(hidden):
                    hprev = hprev_p[b * hidden + j]
                    drow = drec_p + j * hidden
                    for i in range(hidden):
                        drow[i] += hprev * delta_p[b * hidden + i]
    return dxproj_arr, drec_arr
