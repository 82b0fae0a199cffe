# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain kernel; contract documented in _pyloops (the fallback twin)."""

from libc.math cimport exp, fabs
from libc.stdint cimport int64_t

import numpy as np


def run_chain_block(int model_kind,
                    double[:, ::1] X,
                    double[::1] y_real,
                    int64_t[::1] y_class,
                    int n_classes,
                    double lam_over_n,
                    double[::1] theta,
                    double[:, ::1] grad_mat,
                    object noise_mat_obj,
                    int64_t[:, ::1] batch_idx,
                    object noise_obj,
                    int64_t t_start,
                    int64_t burn_in,
                    int64_t thin,
                    double[:, ::1] out,
                    int64_t n_recorded,
                    double div_threshold):
    cdef bint has_noise = noise_mat_obj is not None
    cdef double[:, ::1] noise_mat = noise_mat_obj if has_noise else None
    cdef double[:, ::1] noise = noise_obj if has_noise else None
    cdef Py_ssize_t block_len = batch_idx.shape[0]
    cdef Py_ssize_t S = batch_idx.shape[1]
    cdef Py_ssize_t P = theta.shape[0]
    cdef Py_ssize_t D = X.shape[1]
    cdef Py_ssize_t K = n_classes if n_classes > 0 else 1
    cdef Py_ssize_t cap = out.shape[0]
    cdef double inv_S = 1.0 / S
    cdef Py_ssize_t i, j, p, q, d, k, n
    cdef int64_t t
    cdef double dot, r, mx, acc
    cdef bint bad

    scratch_g = np.zeros(P)
    scratch_u = np.zeros(P)
    scratch_l = np.zeros(K)
    cdef double[::1] g = scratch_g
    cdef double[::1] upd = scratch_u
    cdef double[::1] logits = scratch_l

    for i in range(block_len):
        if model_kind == 0:
            for p in range(P):
                g[p] = theta[p]
        else:
            for p in range(P):
                g[p] = lam_over_n * theta[p]
            if model_kind == 1:
                for j in range(S):
                    n = <Py_ssize_t> batch_idx[i, j]
                    dot = 0.0
                    for d in range(D):
                        dot += X[n, d] * theta[d]
                    r = (dot - y_real[n]) * inv_S
                    for d in range(D):
                        g[d] += X[n, d] * r
            elif model_kind == 2:
                for j in range(S):
                    n = <Py_ssize_t> batch_idx[i, j]
                    dot = 0.0
                    for d in range(D):
                        dot += X[n, d] * theta[d]
                    if dot >= 0.0:
                        r = 1.0 / (1.0 + exp(-dot))
                    else:
                        r = exp(dot)
                        r = r / (1.0 + r)
                    r = (r - <double> y_class[n]) * inv_S
                    for d in range(D):
                        g[d] += X[n, d] * r
            else:
                for j in range(S):
                    n = <Py_ssize_t> batch_idx[i, j]
                    mx = -1e300
                    for k in range(K):
                        dot = 0.0
                        for d in range(D):
                            dot += X[n, d] * theta[d * K + k]
                        logits[k] = dot
                        if dot > mx:
                            mx = dot
                    acc = 0.0
                    for k in range(K):
                        logits[k] = exp(logits[k] - mx)
                        acc += logits[k]
                    for k in range(K):
                        logits[k] /= acc
                    logits[<Py_ssize_t> y_class[n]] -= 1.0
                    for d in range(D):
                        dot = X[n, d] * inv_S
                        for k in range(K):
                            g[d * K + k] += dot * logits[k]

        for p in range(P):
            acc = 0.0
            for q in range(P):
                acc += grad_mat[p, q] * g[q]
            upd[p] = acc
        for p in range(P):
            theta[p] -= upd[p]
        if has_noise:
            for p in range(P):
                acc = 0.0
                for q in range(P):
                    acc += noise_mat[p, q] * noise[i, q]
                upd[p] = acc
            for p in range(P):
                theta[p] += upd[p]

        bad = 0
        for p in range(P):
            if not fabs(theta[p]) <= div_threshold:
                bad = 1
                break
        if bad:
            return n_recorded, t_start + i
        t = t_start + i
        if t >= burn_in and (t - burn_in) % thin == 0 and n_recorded < cap:
            for p in range(P):
                out[n_recorded, p] = theta[p]
            n_recorded += 1
    return n_recorded, -1
