# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row kernels. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND = "cython"


def softmax_forward(const double[:, ::1] x, double tau):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] y = out
    cdef double mx, s, inv_tau = 1.0 / tau
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, k):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(k):
            y[i, j] = exp((x[i, j] - mx) * inv_tau)
            s += y[i, j]
        for j in range(k):
            y[i, j] = y[i, j] / s
    return out


def softmax_backward(const double[:, ::1] y, const double[:, ::1] gy, double tau):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] gx = out
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(k):
            dot += gy[i, j] * y[i, j]
        for j in range(k):
            gx[i, j] = y[i, j] * (gy[i, j] - dot) / tau
    return out


def layer_norm_forward(const double[:, ::1] x, const double[::1] gain,
                       const double[::1] bias, double eps):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    y_arr = np.empty((n, d))
    xhat_arr = np.empty((n, d))
    rstd_arr = np.empty(n)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] rstd = rstd_arr
    cdef double mu, var, r, c
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += x[i, j]
        mu = mu / d
        var = 0.0
        for j in range(d):
            c = x[i, j] - mu
            var += c * c
        r = 1.0 / sqrt(var / d + eps)
        rstd[i] = r
        for j in range(d):
            c = (x[i, j] - mu) * r
            xhat[i, j] = c
            y[i, j] = c * gain[j] + bias[j]
    return y_arr, xhat_arr, rstd_arr


def layer_norm_backward(const double[:, ::1] gy, const double[:, ::1] xhat,
                        const double[::1] rstd, const double[::1] gain):
    cdef Py_ssize_t n = xhat.shape[0], d = xhat.shape[1], i, j
    gx_arr = np.empty((n, d))
    ggain_arr = np.zeros(d)
    gbias_arr = np.zeros(d)
    cdef double[:, ::1] gx = gx_arr
    cdef double[::1] ggain = ggain_arr
    cdef double[::1] gbias = gbias_arr
    cdef double a, b, g
    for i in range(n):
        a = 0.0
        b = 0.0
        for j in range(d):
            g = gy[i, j] * gain[j]
            a += g
            b += g * xhat[i, j]
            ggain[j] += gy[i, j] * xhat[i, j]
            gbias[j] += gy[i, j]
        a = a / d
        b = b / d
        for j in range(d):
            gx[i, j] = (gy[i, j] * gain[j] - a - xhat[i, j] * b) * rstd[i]
    return gx_arr, ggain_arr, gbias_arr


def cross_entropy_forward(const double[:, ::1] logits, const cnp.int64_t[::1] labels):
    cdef Py_ssize_t n = logits.shape[0], c = logits.shape[1], i, j
    probs_arr = np.empty((n, c))
    cdef double[:, ::1] probs = probs_arr
    cdef double mx, s, lse, total = 0.0
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(c):
            s += exp(logits[i, j] - mx)
        lse = log(s)
        for j in range(c):
            probs[i, j] = exp(logits[i, j] - mx - lse)
        total += lse - (logits[i, labels[i]] - mx)
    return total / n, probs_arr


def cross_entropy_backward(const double[:, ::1] probs, const cnp.int64_t[::1] labels, double gscale):
    cdef Py_ssize_t n = probs.shape[0], c = probs.shape[1], i, j
    out = np.empty((n, c))
    cdef double[:, ::1] g = out
    cdef double f = gscale / n
    for i in range(n):
        for j in range(c):
            g[i, j] = probs[i, j] * f
        g[i, labels[i]] = (probs[i, labels[i]] - 1.0) * f
    return out


def embedding_backward(const cnp.int64_t[::1] ids, const double[:, ::1] gy, Py_ssize_t vocab_size):
    cdef Py_ssize_t n = gy.shape[0], d = gy.shape[1], i, j, r
    out = np.zeros((vocab_size, d))
    cdef double[:, ::1] table = out
    for i in range(n):
        r = ids[i]
        for j in range(d):
            table[r, j] += gy[i, j]
    return out
