# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics are defined by ``merlab._fallback``."""
import numpy as np

from libc.math cimport exp, log, log1p, INFINITY


def seq_weights(const double[::1] prior, const double[:, ::1] lik_t, int n,
                long long start, long long count):
    """Joint weights P(w, z^n) for ``count`` sequences from index ``start``.

    Sequences are ordered lexicographically with the first pair most
    significant; ``lik_t[a, k]`` is the probability of pair atom ``a`` under
    parameter atom ``k``. Prefix products are updated odometer style, so each
    row costs O(K) amortized.
    """
    cdef Py_ssize_t K = prior.shape[0]
    cdef Py_ssize_t A = lik_t.shape[0]
    out_arr = np.empty((count, K), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, s
    cdef long long rem
    if count <= 0:
        return out_arr
    if n == 0:
        for k in range(K):
            out[0, k] = prior[k]
        return out_arr

    digits_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] digits = digits_arr
    pref_arr = np.empty((n + 1, K), dtype=np.float64)
    cdef double[:, ::1] pref = pref_arr

    rem = start
    for i in range(n - 1, -1, -1):
        digits[i] = rem % A
        rem //= A
    for k in range(K):
        pref[0, k] = prior[k]
    for i in range(n):
        for k in range(K):
            pref[i + 1, k] = pref[i, k] * lik_t[digits[i], k]

    for s in range(count):
        for k in range(K):
            out[s, k] = pref[n, k]
        if s == count - 1:
            break
        j = n - 1
        while j >= 0:
            digits[j] += 1
            if digits[j] < A:
                break
            digits[j] = 0
            j -= 1
        if j < 0:
            j = 0
        for i in range(j, n):
            for k in range(K):
                pref[i + 1, k] = pref[i, k] * lik_t[digits[i], k]
    return out_arr


cdef inline double _log1pexp(double a) nogil:
    if a > 0.0:
        return a + log1p(exp(-a))
    return log1p(exp(a))


cdef double _log_target(const double[:, ::1] phi, const double[::1] y,
                        const double[::1] w, int prior_kind, double prior_var,
                        double radius, const double[::1] lo,
                        const double[::1] hi) nogil:
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t d = phi.shape[1]
    cdef Py_ssize_t i, j
    cdef double sq = 0.0, a, total = 0.0
    if prior_kind == 0:
        for j in range(d):
            sq += w[j] * w[j]
        if sq > radius * radius:
            return -INFINITY
        total = -0.5 * sq / prior_var
    else:
        for j in range(d):
            if w[j] < lo[j] or w[j] > hi[j]:
                return -INFINITY
    for i in range(n):
        a = 0.0
        for j in range(d):
            a += phi[i, j] * w[j]
        total += y[i] * a - _log1pexp(a)
    return total


def rwm_logistic(const double[:, ::1] phi, const double[::1] y,
                 const double[::1] w0, const double[:, ::1] steps,
                 const double[::1] log_u, int prior_kind, double prior_var,
                 double radius, const double[::1] lo, const double[::1] hi):
    """Random-walk Metropolis on a Bayesian logistic-regression posterior.

    ``steps`` holds pre-scaled Gaussian increments and ``log_u`` the log
    uniforms of the accept test, so the chain is a pure function of its
    inputs. Returns the chain (one row per step) and the acceptance count.
    """
    cdef Py_ssize_t S = steps.shape[0]
    cdef Py_ssize_t d = w0.shape[0]
    cdef Py_ssize_t s, j
    cdef long long accepted = 0
    chain_arr = np.empty((S, d), dtype=np.float64)
    cdef double[:, ::1] chain = chain_arr
    cur_arr = np.array(w0, dtype=np.float64)
    prop_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    cdef double[::1] prop = prop_arr
    cdef double cur_lp, prop_lp
    cur_lp = _log_target(phi, y, cur, prior_kind, prior_var, radius, lo, hi)
    for s in range(S):
        for j in range(d):
            prop[j] = cur[j] + steps[s, j]
        prop_lp = _log_target(phi, y, prop, prior_kind, prior_var, radius, lo, hi)
        if prop_lp - cur_lp >= log_u[s]:
            for j in range(d):
                cur[j] = prop[j]
            cur_lp = prop_lp
            accepted += 1
        for j in range(d):
            chain[s, j] = cur[j]
    return chain_arr, accepted
