"""Pure-Python reference implementations of the compiled kernels."""
import numpy as np


def seq_weights(prior, lik_t, n, start, count):
    """Joint weights P(w, z^n) for ``count`` sequences from index ``start``.

    Same contract as the compiled kernel: lexicographic order with the first
    pair most significant, ``lik_t[a, k]`` the probability of pair atom ``a``
    under parameter atom ``k``. Products are formed left to right so the
    results match the compiled kernel bit for bit.
    """
    prior = np.asarray(prior, dtype=np.float64)
    lik_t = np.asarray(lik_t, dtype=np.float64)
    K = prior.shape[0]
    A = lik_t.shape[0]
    if count <= 0:
        return np.empty((0, K))
    if n == 0:
        return prior[None, :].copy()
    idx = np.arange(start, start + count, dtype=np.int64)
    out = np.broadcast_to(prior, (count, K)).copy()
    for i in range(n):
        digit = (idx // A ** (n - 1 - i)) % A
        out *= lik_t[digit]
    return out


def _log1pexp(a):
    return np.where(a > 0, a + np.log1p(np.exp(-np.abs(a))), np.log1p(np.exp(np.minimum(a, 0.0))))


def _log_target(phi, y, w, prior_kind, prior_var, radius, lo, hi):
    if prior_kind == 0:
        sq = float(w @ w)
        if sq > radius * radius:
            return -np.inf
        total = -0.5 * sq / prior_var
    else:
        if np.any(w < lo) or np.any(w > hi):
            return -np.inf
        total = 0.0
    if phi.shape[0]:
        a = phi @ w
        total += float(np.sum(y * a - _log1pexp(a)))
    return total


def rwm_logistic(phi, y, w0, steps, log_u, prior_kind, prior_var, radius, lo, hi):
    """Random-walk Metropolis on a Bayesian logistic-regression posterior."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    cur = np.array(w0, dtype=np.float64)
    S = steps.shape[0]
    chain = np.empty((S, cur.shape[0]))
    cur_lp = _log_target(phi, y, cur, prior_kind, prior_var, radius, lo, hi)
    accepted = 0
    for s in range(S):
        prop = cur + steps[s]
        prop_lp = _log_target(phi, y, prop, prior_kind, prior_var, radius, lo, hi)
        if prop_lp - cur_lp >= log_u[s]:
            cur = prop
            cur_lp = prop_lp
            accepted += 1
        chain[s] = cur
    return chain, accepted
