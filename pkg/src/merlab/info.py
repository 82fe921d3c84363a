"""Entropies, conditional mutual informations, distances and Legendre duals.

Mutual informations on finite models come from the full enumerated joint via
entropy decompositions inside each conditioning cell, so null cells simply
contribute zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from merlab.core import DiscreteModel, FiniteDist, LOG, ensure_valid
from merlab.oracle import (ExactSum, check_budget, div0, fundamental_limit, iter_blocks,
                           mul0, seq_weight_blocks, xlogx)

# ----------------------------------------------------------------------------
# entropy


class Counting:
    """Counting reference measure: Shannon entropy."""
    tag = "counting"


class Lebesgue:
    """Lebesgue reference measure: differential entropy."""
    tag = "lebesgue"


COUNTING = Counting()
LEBESGUE = Lebesgue()


@dataclass(frozen=True)
class Gaussian:
    """Gaussian with independent coordinates (scalar or per-coordinate variances)."""
    mean: float | np.ndarray = 0.0
    var: float | np.ndarray = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.var) < 0):
            raise ValueError("variance must be nonnegative")

    @property
    def dim(self) -> int:
        return int(np.broadcast(np.asarray(self.mean), np.asarray(self.var)).size)


def entropy(dist, base=COUNTING) -> float:
    """H(dist) in nats; Shannon for finite dists, differential for Gaussians."""
    if isinstance(base, Counting):
        if isinstance(dist, Gaussian):
            raise TypeError("counting base needs a finite distribution")
        p = dist.probs if isinstance(dist, FiniteDist) else np.asarray(dist, dtype=np.float64)
        return -math.fsum(np.ravel(xlogx(p)))
    if isinstance(base, Lebesgue):
        if not isinstance(dist, Gaussian):
            raise TypeError("Lebesgue base is implemented for Gaussians")
        var = np.broadcast_to(np.asarray(dist.var, dtype=np.float64), (dist.dim,))
        return math.fsum(0.5 * math.log(2 * math.pi * math.e * v) for v in var)
    raise TypeError(f"unknown entropy base {base!r}")


def cond_entropy(joint, base=COUNTING) -> float:
    """H(Y | V).

    Counting: ``joint[y, v]`` is a probability table. Lebesgue: ``joint`` is a
    sequence of ``(P(v), Gaussian law of Y given v)`` pairs.
    """
    if isinstance(base, Counting):
        p = np.asarray(joint, dtype=np.float64)
        if p.ndim != 2:
            raise ValueError("joint must be a 2-D table p[y, v]")
        pv = p.sum(axis=0)
        return -math.fsum(np.ravel(xlogx(p))) + math.fsum(xlogx(pv))
    if isinstance(base, Lebesgue):
        return math.fsum(w * entropy(g, LEBESGUE) for w, g in joint if w > 0)
    raise TypeError(f"unknown entropy base {base!r}")


# ----------------------------------------------------------------------------
# conditional mutual information on finite models


def _cell_entropy(p: np.ndarray, tot: np.ndarray, axes) -> np.ndarray:
    """Entropy of p / tot over ``axes``, per cell."""
    c = div0(p, np.expand_dims(tot, axis=tuple(range(tot.ndim, p.ndim))))
    return -xlogx(c).sum(axis=axes)


def _onehot(labels: np.ndarray) -> np.ndarray:
    nx, K = labels.shape
    ng = int(labels.max()) + 1
    O = np.zeros((nx, K, ng))
    O[np.arange(nx)[:, None], np.arange(K)[None, :], labels] = 1.0
    return O


def cmi_pushforward(model: DiscreteModel, labels, n: int, budget=None) -> float:
    """I(G; Y | X, Z^n) for G = labels[X, W], a deterministic function of (X, W).

    Within each (z^n, x) cell: D * [H(G|cell) + H(Y|cell) - H(G, Y|cell)].
    """
    ensure_valid(model)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (model.nx, model.K):
        raise ValueError("labels must have shape (nx, K)")
    O = _onehot(labels)
    acc = ExactSum()
    for blk in iter_blocks(model, n, budget):
        JG = np.einsum("bkx,xkg->bxg", blk.J, O)
        JGY = np.einsum("bkx,kxy,xkg->bxgy", blk.J, model.ky, O)
        hg = _cell_entropy(JG, blk.D, -1)
        hy = _cell_entropy(blk.N, blk.D, -1)
        hgy = _cell_entropy(JGY, blk.D, (-2, -1))
        acc.add(mul0(blk.D, hg + hy - hgy))
    return acc.value


def identity_labels(model: DiscreteModel) -> np.ndarray:
    return np.broadcast_to(np.arange(model.K), (model.nx, model.K)).copy()


def cmi_wy(model: DiscreteModel, n: int, budget=None) -> float:
    """I(W; Y | X, Z^n)."""
    return cmi_pushforward(model, identity_labels(model), n, budget)


def seq_entropy(prior: np.ndarray, lik: np.ndarray, n: int, budget=None) -> float:
    """H(S^n) of the mixture sum_k prior_k prod_i lik[k, s_i]."""
    check_budget(np.asarray(lik).shape[1] ** n, budget)
    acc = ExactSum()
    for _, V in seq_weight_blocks(prior, lik, n):
        acc.add(-xlogx(V.sum(axis=1)))
    return acc.value


def mi_w_data(model: DiscreteModel, n: int, budget=None) -> float:
    """I(W; Z^n) = H(Z^n) - n H(Z | W)."""
    ensure_valid(model)
    lik = model.pair_lik()
    hz_w = math.fsum(mul0(model.prior, -xlogx(lik).sum(axis=1)))
    return seq_entropy(model.prior, lik, n, budget) - n * hz_w


def cond_entropy_labels(model: DiscreteModel, n: int, budget=None) -> float:
    """H(Y^n | X^n) = H(Z^n) - H(X^n)."""
    ensure_valid(model)
    return (seq_entropy(model.prior, model.pair_lik(), n, budget)
            - seq_entropy(model.prior, model.px, n, budget))


def mi_w_labels(model: DiscreteModel, n: int, budget=None) -> float:
    """I(W; Y^n | X^n) = H(Y^n | X^n) - n H(Y | X, W)."""
    return cond_entropy_labels(model, n, budget) - n * fundamental_limit(model, LOG).value


CHAIN_TOL = 1e-12


def mi_chain(model: DiscreteModel, n: int, budget=None) -> tuple[float, float, float]:
    """(I(W;Y|X,Z^n), I(W;Y^n|X^n)/n, I(W;Z^n)/n), ordering asserted."""
    if n < 1:
        raise ValueError("mi_chain needs n >= 1")
    a = cmi_wy(model, n, budget)
    b = mi_w_labels(model, n, budget) / n
    c = mi_w_data(model, n, budget) / n
    if not (a <= b + CHAIN_TOL and b <= c + CHAIN_TOL):
        raise AssertionError(f"information chain violated: {a!r}, {b!r}, {c!r}")
    return a, b, c


# ----------------------------------------------------------------------------
# distances

TV, KL, CHISQ, W2 = "tv", "kl", "chisq", "w2"
DISTANCE_KINDS = (TV, KL, CHISQ, W2)
W2_GRID = 4096


def _aligned(p, q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, FiniteDist) and isinstance(q, FiniteDist):
        if p.support == q.support:
            return p.probs, q.probs
        labels = list(p.support) + [s for s in q.support if s not in set(p.support)]
        return (np.array([p.prob(s) if s in p.support else 0.0 for s in labels]),
                np.array([q.prob(s) if s in q.support else 0.0 for s in labels]))
    a, b = np.asarray(getattr(p, "probs", p), float), np.asarray(getattr(q, "probs", q), float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def tv(p, q) -> float:
    a, b = _aligned(p, q)
    return 0.5 * math.fsum(np.abs(a - b))


def kl(p, q) -> float:
    a, b = _aligned(p, q)
    if np.any((a > 0) & (b == 0)):
        return math.inf
    m = a > 0
    return math.fsum(a[m] * (np.log(a[m]) - np.log(b[m])))  # no overflow for subnormal b


def chisq(p, q) -> float:
    a, b = _aligned(p, q)
    if np.any((a > 0) & (b == 0)):
        return math.inf
    m = b > 0
    return math.fsum((a[m] - b[m]) ** 2 / b[m])


def tv_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(P - Q).sum(axis=-1)


def kl_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """KL along the last axis with +inf where supp P is not inside supp Q."""
    bad = ((P > 0) & (Q == 0)).any(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0) / np.where(Q > 0, Q, 1.0)), 0.0)
    return np.where(bad, np.inf, t.sum(axis=-1))


def chisq_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    bad = ((P > 0) & (Q == 0)).any(axis=-1)
    t = div0((P - Q) ** 2, Q)
    return np.where(bad, np.inf, t.sum(axis=-1))


def _discrete_sorted(d) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(d.support, dtype=np.float64)
    p = d.probs
    order = np.argsort(x, kind="stable")
    x, p = x[order], p[order]
    keep = p > 0
    return x[keep], p[keep]


def w2_discrete(x1, p1, x2, p2) -> float:
    """Exact W2 between 1-D discrete laws by merging their quantile functions."""
    o1, o2 = np.argsort(x1, kind="stable"), np.argsort(x2, kind="stable")
    x1, p1, x2, p2 = (np.asarray(x1, float)[o1], np.asarray(p1, float)[o1],
                      np.asarray(x2, float)[o2], np.asarray(p2, float)[o2])
    c1 = np.cumsum(p1)
    c2 = np.cumsum(p2)
    c1[-1] = c2[-1] = 1.0
    cuts = np.union1d(c1, c2)
    lo = np.concatenate([[0.0], cuts[:-1]])
    mid = 0.5 * (lo + cuts)
    width = cuts - lo
    q1 = x1[np.minimum(np.searchsorted(c1, mid), len(x1) - 1)]
    q2 = x2[np.minimum(np.searchsorted(c2, mid), len(x2) - 1)]
    return math.sqrt(max(math.fsum(width * (q1 - q2) ** 2), 0.0))


def _quantiles(d, u: np.ndarray) -> np.ndarray:
    if isinstance(d, FiniteDist):
        x, p = _discrete_sorted(d)
        c = np.cumsum(p)
        c[-1] = 1.0
        return x[np.minimum(np.searchsorted(c, u), len(x) - 1)]
    if isinstance(d, Gaussian):
        from scipy.stats import norm
        return norm.ppf(u, loc=float(d.mean), scale=math.sqrt(float(d.var)))
    if hasattr(d, "ppf"):
        return np.asarray(d.ppf(u), dtype=np.float64)
    raise TypeError(f"no quantile function for {d!r}")


def w2(p, q, grid: int = W2_GRID) -> float:
    """2-Wasserstein distance between 1-D laws (or coordinatewise Gaussians).

    Discrete pairs are exact; Gaussian pairs use the closed form; anything
    else with a ``ppf`` uses the midpoint quantile grid.
    """
    if isinstance(p, Gaussian) and isinstance(q, Gaussian):
        mu = np.asarray(p.mean, float) - np.asarray(q.mean, float)
        sd = np.sqrt(np.asarray(p.var, float)) - np.sqrt(np.asarray(q.var, float))
        if mu.size != sd.size and mu.size > 1 and sd.size > 1:
            raise ValueError("dimension mismatch")
        return math.sqrt(math.fsum(np.ravel(np.broadcast_to(mu ** 2 + sd ** 2, np.broadcast(mu, sd).shape))))
    if isinstance(p, FiniteDist) and isinstance(q, FiniteDist):
        x1, p1 = _discrete_sorted(p)
        x2, p2 = _discrete_sorted(q)
        return w2_discrete(x1, p1, x2, p2)
    u = (np.arange(grid) + 0.5) / grid
    diff = _quantiles(p, u) - _quantiles(q, u)
    return math.sqrt(math.fsum(diff ** 2) / grid)


def _gauss_scalar(g: Gaussian) -> tuple[float, float]:
    if g.dim != 1:
        raise ValueError("only 1-D Gaussians are supported here")
    return float(np.ravel(g.mean)[0]), float(np.ravel(g.var)[0])


def kl_gauss(p: Gaussian, q: Gaussian) -> float:
    m1, v1 = _gauss_scalar(p)
    m2, v2 = _gauss_scalar(q)
    return 0.5 * (v1 / v2 + (m1 - m2) ** 2 / v2 - 1.0 + math.log(v2 / v1))


def chisq_gauss(p: Gaussian, q: Gaussian) -> float:
    m1, v1 = _gauss_scalar(p)
    m2, v2 = _gauss_scalar(q)
    if 2 * v2 <= v1:
        return math.inf
    return v2 / math.sqrt(v1 * (2 * v2 - v1)) * math.exp((m1 - m2) ** 2 / (2 * v2 - v1)) - 1.0


def tv_gauss(p: Gaussian, q: Gaussian) -> float:
    from scipy.integrate import quad
    from scipy.stats import norm
    m1, v1 = _gauss_scalar(p)
    m2, v2 = _gauss_scalar(q)
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    f = lambda t: abs(norm.pdf(t, m1, s1) - norm.pdf(t, m2, s2))
    lo = min(m1 - 12 * s1, m2 - 12 * s2)
    hi = max(m1 + 12 * s1, m2 + 12 * s2)
    pts = sorted({m1, m2})
    return 0.5 * quad(f, lo, hi, points=pts, limit=200, epsabs=1e-13)[0]


def distance(kind: str, p, q) -> float:
    """Statistical distance D(p, q) of the given kind (tv, kl, chisq, w2)."""
    kind = kind.lower()
    if kind not in DISTANCE_KINDS:
        raise ValueError(f"unknown distance kind {kind!r}")
    if kind == W2:
        return w2(p, q)
    if isinstance(p, Gaussian) and isinstance(q, Gaussian):
        return {TV: tv_gauss, KL: kl_gauss, CHISQ: chisq_gauss}[kind](p, q)
    return {TV: tv, KL: kl, CHISQ: chisq}[kind](p, q)


# ----------------------------------------------------------------------------
# cgf envelopes and the generalized inverse of the Legendre dual


@dataclass(frozen=True, eq=False)
class CgfEnvelope:
    """Convex phi on [0, b) with phi(0) = 0, bounding a centered cgf."""
    phi: Callable[[float], float]
    b: float = math.inf
    tag: str = "numeric"
    param: float | None = None

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("domain bound b must be positive")
        if abs(self.phi(0.0)) > 1e-12:
            raise ValueError("phi(0) must be 0")
        top = min(self.b, 1e3)
        lam = np.linspace(0.0, top * (1 - 1e-9), 65)
        v = np.array([self.phi(float(t)) for t in lam])
        mid = np.array([self.phi(float(t)) for t in 0.5 * (lam[1:] + lam[:-1])])
        if np.any(mid > 0.5 * (v[1:] + v[:-1]) + 1e-9 * (1 + np.abs(v[1:]))):
            raise ValueError("phi fails the convexity spot check")

    @classmethod
    def subgaussian(cls, sigma2: float) -> "CgfEnvelope":
        s = float(sigma2)
        return cls(lambda t: 0.5 * s * t * t, math.inf, "subgaussian", s)

    @classmethod
    def chi_square_type(cls, sigma_chi2: float) -> "CgfEnvelope":
        s = float(sigma_chi2)
        return cls(lambda t: s * s * t * t, math.inf, "chi_square_type", s)

    @classmethod
    def numeric(cls, phi: Callable[[float], float], b: float = math.inf) -> "CgfEnvelope":
        return cls(phi, b, "numeric", None)

    def dual(self, gamma: float) -> float:
        """phi*(gamma) = sup over lambda in [0, b) of lambda*gamma - phi(lambda)."""
        f = lambda t: -(t * gamma - self.phi(t))
        hi = _upper(self, lambda t: t * gamma - self.phi(t))
        t = _golden(f, 0.0, hi)
        return max(0.0, t * gamma - self.phi(t))


def _upper(env: CgfEnvelope, g: Callable[[float], float]) -> float:
    if math.isfinite(env.b):
        return env.b * (1 - 1e-12)
    hi = 1.0
    while hi < 1e12 and g(2 * hi) > g(hi):
        hi *= 2
    return 2 * hi


def _golden(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13) -> float:
    """Minimizer of a unimodal f on [lo, hi] by golden-section search."""
    r = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def legendre_inverse(env: CgfEnvelope, u: float) -> float:
    """phi*^{-1}(u) = sup{gamma >= 0 : phi*(gamma) <= u}.

    Numeric envelopes use the equivalent form inf over lambda in (0, b) of
    (u + phi(lambda)) / lambda, minimized by golden section in log lambda.
    """
    u = float(u)
    if u < 0 or math.isnan(u):
        raise ValueError("legendre_inverse needs u >= 0")
    if math.isinf(u):
        return math.inf
    if env.tag == "subgaussian":
        return math.sqrt(2.0 * env.param * u)
    if env.tag == "chi_square_type":
        return 2.0 * env.param * math.sqrt(u)
    if u == 0.0:
        return 0.0
    g = lambda s: (u + env.phi(math.exp(s))) / math.exp(s)
    top = math.log(env.b * (1 - 1e-12)) if math.isfinite(env.b) else 60.0
    lo = -60.0
    # coarse scan brackets the minimum; golden section refines it
    grid = np.linspace(lo, top, 241)
    vals = np.array([g(s) for s in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    s = _golden(g, a, b, tol=1e-15)
    return min(g(s), float(vals[i]))


def w2sq_rows(y_values, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Squared W2 along the last axis for laws on a common 1-D support.

    Vectorized quantile merge: breakpoints are the union of both CDFs.
    """
    yv = np.asarray(y_values, dtype=np.float64).ravel()
    order = np.argsort(yv, kind="stable")
    yv = yv[order]
    P, Q = np.broadcast_arrays(np.asarray(P, float)[..., order], np.asarray(Q, float)[..., order])
    M = yv.size
    cp, cq = np.cumsum(P, axis=-1), np.cumsum(Q, axis=-1)
    cp[..., -1] = 1.0
    cq[..., -1] = 1.0
    cuts = np.sort(np.concatenate([cp, cq], axis=-1), axis=-1)
    lo = np.concatenate([np.zeros(cuts.shape[:-1] + (1,)), cuts[..., :-1]], axis=-1)
    mid = 0.5 * (lo + cuts)
    ip = np.minimum((cp[..., None, :] < mid[..., :, None]).sum(-1), M - 1)
    iq = np.minimum((cq[..., None, :] < mid[..., :, None]).sum(-1), M - 1)
    return ((cuts - lo) * (yv[ip] - yv[iq]) ** 2).sum(axis=-1)


def moments(d) -> tuple[float, float]:
    """(mean, second moment) of a 1-D law."""
    if isinstance(d, FiniteDist):
        x = np.asarray(d.support, dtype=np.float64)
        return math.fsum(d.probs * x), math.fsum(d.probs * x * x)
    if isinstance(d, Gaussian):
        m, v = _gauss_scalar(d)
        return m, v + m * m
    m, v = float(d.mean()), float(d.var())
    return m, v + m * m
