"""Conjugate Bayesian linear regression with Gaussian prior and noise.

Y = W^T phi(X) + V with W ~ N(0, s_W^2 I_d), V ~ N(0, s^2). Given x^n the
posterior covariance is C = (I/s_W^2 + Phi Phi^T / s^2)^{-1}, so every MER
quantity is an expectation over designs x^n of a closed form in C:

    MER_2 = E phi(X)^T C phi(X),   MER_log = E 1/2 ln(1 + phi(X)^T C phi(X) / s^2),
    R_2(W|Z^n) = E tr C,           I(W; Z^n) = E 1/2 ln det(I + s_W^2/s^2 Phi Phi^T).

The expectation over X uses the exact atoms of a finite law or 64-point
Gauss-Legendre quadrature for a uniform law. The expectation over X^n is an
exact sum over count vectors when the finite law is small, else Monte Carlo
with nested common random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import eval_legendre, gammaln

from merlab.core import RngStream
from merlab.report import BoundReport, Estimate

QUAD_NODES = 64
EXACT_MAX_ATOMS = 16
EXACT_MAX_N = 8
EXACT_MAX_TYPES = 200_000
DEFAULT_TRIALS = 2000


@dataclass(frozen=True)
class FiniteX:
    """Finite covariate law on real values."""
    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        if v.shape[0] != p.size or np.any(p < 0) or abs(math.fsum(p) - 1) > 1e-12:
            raise ValueError("invalid finite covariate law")

    def nodes(self, k: int | None = None):
        return np.asarray(self.values, dtype=np.float64), np.asarray(self.probs, dtype=np.float64)

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        v, p = self.nodes()
        c = np.cumsum(p)
        idx = np.minimum((u[..., None] >= c).sum(-1), len(p) - 1)
        return v[idx]


@dataclass(frozen=True)
class UniformX:
    lo: float = -1.0
    hi: float = 1.0

    def nodes(self, k: int = QUAD_NODES):
        t, w = np.polynomial.legendre.leggauss(k)
        return self.lo + (self.hi - self.lo) * (t + 1) / 2, w / 2

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u


def legendre_features(d: int) -> Callable:
    """phi_k(x) = sqrt(2k+1) P_k(x), k < d: orthonormal under uniform X on [-1, 1]."""
    scale = np.sqrt(2 * np.arange(d) + 1.0)

    def phi(x):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([eval_legendre(k, x) for k in range(d)], axis=-1) * scale
    return phi


def constant_feature(x):
    x = np.asarray(x, dtype=np.float64)
    return np.ones(x.shape + (1,))


class GaussLinRegModel:
    def __init__(self, d: int, prior_var: float, noise_var: float, feature_map: Callable,
                 x_sampler, orthonormal: bool = False):
        if d < 1 or not prior_var > 0 or not noise_var > 0:
            raise ValueError("need d >= 1 and positive variances")
        self.d = int(d)
        self.prior_var = float(prior_var)
        self.noise_var = float(noise_var)
        self.feature_map = feature_map
        self.x_sampler = x_sampler
        self.orthonormal = bool(orthonormal)
        xq, wq = x_sampler.nodes()
        F = self.phi(xq)
        if F.shape[-1] != self.d:
            raise ValueError("feature map dimension does not match d")
        self._xq, self._wq, self._Fq = xq, wq, F
        self.M = np.einsum("q,qi,qj->ij", wq, F, F)  # E phi phi^T
        if orthonormal and np.max(np.abs(self.M - np.eye(self.d))) > 1e-6:
            raise ValueError("features are not orthonormal under the covariate law")

    @classmethod
    def constant(cls, prior_var=1.0, noise_var=1.0) -> "GaussLinRegModel":
        return cls(1, prior_var, noise_var, constant_feature, FiniteX((0.0,), (1.0,)), orthonormal=True)

    @classmethod
    def legendre(cls, d: int, prior_var=1.0, noise_var=1.0) -> "GaussLinRegModel":
        return cls(d, prior_var, noise_var, legendre_features(d), UniformX(), orthonormal=True)

    def phi(self, x) -> np.ndarray:
        return np.asarray(self.feature_map(x), dtype=np.float64)

    @property
    def e_phi2(self) -> float:
        """E ||phi(X)||^2."""
        return float(np.trace(self.M))

    def __repr__(self):
        return (f"GaussLinRegModel(d={self.d}, prior_var={self.prior_var}, noise_var={self.noise_var}, "
                f"x={self.x_sampler!r})")


@dataclass(frozen=True, eq=False)
class PosteriorCov:
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if np.max(np.abs(m - m.T)) > 1e-10:
            raise ValueError("posterior covariance is not symmetric")


def precision(model: GaussLinRegModel, G: np.ndarray) -> np.ndarray:
    """I/s_W^2 + G/s^2 for Gram matrices G = Phi Phi^T (batched on leading axes)."""
    return np.eye(model.d) / model.prior_var + np.asarray(G) / model.noise_var


def posterior_cov(model: GaussLinRegModel, xn) -> PosteriorCov:
    """C_{W|z^n} by Cholesky solve; depends on x^n only."""
    xn = np.asarray(xn, dtype=np.float64)
    Phi = model.phi(xn).reshape(-1, model.d)
    A = precision(model, Phi.T @ Phi)
    C = cho_solve(cho_factor(A, lower=True), np.eye(model.d))
    return PosteriorCov(0.5 * (C + C.T))


def _chol_inverse(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched (inverse, log-determinant) of SPD matrices via Cholesky."""
    L = np.linalg.cholesky(A)
    Li = np.linalg.inv(L)
    C = np.einsum("...ki,...kj->...ij", Li, Li)
    logdet = 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(-1)
    return C, logdet


@dataclass(frozen=True)
class DesignStats:
    """Per-design closed forms and their averages over X^n."""
    n: int
    mer2: Estimate
    mer_log: Estimate
    trace_c: Estimate
    mi: Estimate
    bmax: float
    exact: bool
    per_design: dict = field(repr=False, default_factory=dict)


def _types(m: int, n: int):
    """All count vectors of n draws over m atoms, with multinomial log-weights."""
    counts = []
    for combo in combinations_with_replacement(range(m), n):
        c = np.bincount(np.asarray(combo, dtype=np.int64), minlength=m)
        counts.append(c)
    if not counts:
        counts = [np.zeros(m, dtype=np.int64)]
    return np.array(counts)


def _type_count(m: int, n: int) -> int:
    return math.comb(n + m - 1, m - 1)


def exact_designs_ok(model: GaussLinRegModel) -> bool:
    return isinstance(model.x_sampler, FiniteX) and len(model.x_sampler.probs) <= EXACT_MAX_ATOMS


def use_exact(model: GaussLinRegModel, n: int) -> bool:
    if not exact_designs_ok(model):
        return False
    m = len(model.x_sampler.probs)
    return m == 1 or (n <= EXACT_MAX_N and _type_count(m, n) <= EXACT_MAX_TYPES)


def _grams(model: GaussLinRegModel, n: int, mc_x: RngStream | None, trials: int):
    """(Gram matrices, weights or None for i.i.d. samples)."""
    if use_exact(model, n):
        v, p = model.x_sampler.nodes()
        Fa = model.phi(v)
        counts = _types(len(p), n) if len(p) > 1 else np.array([[n]])
        outer = np.einsum("ai,aj->aij", Fa, Fa)
        G = np.einsum("ta,aij->tij", counts.astype(np.float64), outer)
        with np.errstate(divide="ignore"):
            logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        lw = gammaln(n + 1) - gammaln(counts + 1).sum(1) + np.where(counts > 0, counts * logp, 0.0).sum(1)
        w = np.exp(lw)
        return G, w / math.fsum(w)
    rng = mc_x if mc_x is not None else RngStream(0)
    X = design_draws(model, rng, n, trials)
    F = model.phi(X)  # (trials, n, d)
    return np.einsum("tni,tnj->tij", F, F), None


def design_draws(model: GaussLinRegModel, rng: RngStream, n: int, trials: int) -> np.ndarray:
    """(trials, n) covariates with nested prefixes: the first n columns do not depend on n."""
    u = rng.generator.random((n, trials)).T
    return model.x_sampler.from_uniform(u)


def _average(vals: np.ndarray, w) -> Estimate:
    if w is None:
        return Estimate.of(vals)
    return Estimate(math.fsum(w * vals), 0.0, len(vals), "exact")


def design_stats(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
                 trials: int = DEFAULT_TRIALS) -> DesignStats:
    G, w = _grams(model, n, mc_x, trials)
    A = precision(model, G)
    C, logdet_a = _chol_inverse(A)
    Fq, wq = model._Fq, model._wq
    q = np.einsum("qi,tij,qj->tq", Fq, C, Fq)  # phi(x)^T C phi(x) at the X nodes
    mer2 = np.einsum("tij,ji->t", C, model.M)
    merlog = 0.5 * (np.log1p(q / model.noise_var) * wq).sum(1)
    trc = np.einsum("tii->t", C)
    mi = 0.5 * (logdet_a + model.d * math.log(model.prior_var))
    live = wq > 0
    return DesignStats(n, _average(mer2, w), _average(merlog, w), _average(trc, w), _average(mi, w),
                       float(q[:, live].max()), w is not None,
                       {"mer2": mer2, "mer_log": merlog, "trace_c": trc, "mi": mi, "weights": w})


def exact_mer_log(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
                  trials: int = DEFAULT_TRIALS) -> Estimate:
    """1/2 E ln(1 + phi(X)^T C phi(X) / s^2)."""
    return design_stats(model, n, mc_x, trials).mer_log


def exact_mer_quadratic(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
                        trials: int = DEFAULT_TRIALS) -> Estimate:
    """E phi(X)^T C phi(X) = E tr(C M)."""
    return design_stats(model, n, mc_x, trials).mer2


def mmse_w(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
           trials: int = DEFAULT_TRIALS) -> Estimate:
    """R_2(W | Z^n) = E tr C."""
    return design_stats(model, n, mc_x, trials).trace_c


def mi_data(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
            trials: int = DEFAULT_TRIALS) -> Estimate:
    """I(W; Z^n) = 1/2 E ln det(I + s_W^2/s^2 Phi Phi^T)."""
    return design_stats(model, n, mc_x, trials).mi


def linreg_bounds(model: GaussLinRegModel, n: int, mc_x: RngStream | None = None,
                  trials: int = DEFAULT_TRIALS, b: float | None = None) -> list[BoundReport]:
    """The four closed-form linear-regression bounds against the exact MERs.

    ``b`` caps phi(x)^T C phi(x); by default it is the maximum over the
    evaluated designs and X nodes (recorded in the note).
    """
    st = design_stats(model, n, mc_x, trials)
    s2, e2 = model.noise_var, model.e_phi2
    t, tse = st.trace_c.value, st.trace_c.se
    cap = st.bmax if b is None else float(b)
    cov = "exact" if st.exact else f"{st.trace_c.trials} sampled designs"
    r1 = 2 * e2 * t
    r2 = e2 * t / s2
    k3 = 2 * (model.prior_var * e2 + s2) * e2
    r3 = 4 * math.sqrt(k3 * t)
    u = e2 * t / s2
    r4 = 2 * (2 * cap + s2) * math.sqrt(0.5 * math.log1p(u))
    # delta-method errors for the nonlinear right sides
    se3 = 0.0 if t <= 0 else 2 * math.sqrt(k3 / t) * tse
    se4 = 0.0 if u <= 0 else 2 * (2 * cap + s2) * (e2 / s2) * tse / (2 * (1 + u) * math.sqrt(2 * math.log1p(u)))
    return [
        BoundReport("linreg_rlz_mer2", "MER_2 <= 2 E||phi||^2 E tr C", n, st.mer2.value, r1,
                    st.mer2.se, 2 * e2 * tse, note=cov),
        BoundReport("linreg_log", "MER_log <= s^-2 E||phi||^2 E tr C", n, st.mer_log.value, r2,
                    st.mer_log.se, e2 * tse / s2, note=cov),
        BoundReport("linreg_w2_mer2", "MER_2 <= 4 sqrt(2(s_W^2 E||phi||^2 + s^2) E||phi||^2 E tr C)", n,
                    st.mer2.value, r3, st.mer2.se, se3, note=cov),
        BoundReport("linreg_cgf_mer2", "MER_2 <= 2(2b + s^2) sqrt(ln(1 + s^-2 E||phi||^2 E tr C)/2)", n,
                    st.mer2.value, r4, st.mer2.se, se4, note=f"{cov}; b={cap!r}"),
    ]


# ----------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingReport:
    d: int
    rows: list  # (n, I_WZn, MER_log, MER_2, bound_1..4)
    slope_mi: float
    slope_mer_log: float
    slope_mer2: float

    COLUMNS = ("n", "I_WZn", "MER_log", "MER_2", "bound_1", "bound_2", "bound_3", "bound_4")


def top_decade_slope(ns, values) -> float:
    """Least-squares slope of values against ln n over n >= n_max / 10."""
    ns = np.asarray(ns, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = ns >= ns.max() / 10
    if keep.sum() < 2:
        raise ValueError("degenerate grid: fewer than two points in the top decade")
    x = np.log(ns[keep])
    return float(np.polyfit(x, v[keep], 1)[0])


def mi_growth_check(model: GaussLinRegModel, n_grid, mc_x: RngStream | None = None,
                    trials: int = 200) -> ScalingReport:
    """Slopes of I(W;Z^n) and ln MER against ln n; the designs are nested across n."""
    grid = [int(n) for n in n_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ValueError("degenerate grid: need a strictly increasing positive n grid")
    rng = mc_x if mc_x is not None else RngStream(0)
    exact = use_exact(model, grid[-1])
    stats = []
    if exact:
        stats = [design_stats(model, n) for n in grid]
    else:
        X = design_draws(model, rng, grid[-1], trials)
        F = model.phi(X)
        G = np.zeros((trials, model.d, model.d))
        prev = 0
        Fq, wq = model._Fq, model._wq
        for n in grid:
            G = G + np.einsum("tni,tnj->tij", F[:, prev:n], F[:, prev:n])
            prev = n
            C, logdet_a = _chol_inverse(precision(model, G))
            q = np.einsum("qi,tij,qj->tq", Fq, C, Fq)
            stats.append(DesignStats(
                n, Estimate.of(np.einsum("tij,ji->t", C, model.M)),
                Estimate.of(0.5 * (np.log1p(q / model.noise_var) * wq).sum(1)),
                Estimate.of(np.einsum("tii->t", C)),
                Estimate.of(0.5 * (logdet_a + model.d * math.log(model.prior_var))),
                float(q.max()), False))
    rows = []
    s2, e2 = model.noise_var, model.e_phi2
    for st in stats:
        t = st.trace_c.value
        rows.append((st.n, st.mi.value, st.mer_log.value, st.mer2.value, 2 * e2 * t, e2 * t / s2,
                     4 * math.sqrt(2 * (model.prior_var * e2 + s2) * e2 * t),
                     2 * (2 * st.bmax + s2) * math.sqrt(0.5 * math.log1p(e2 * t / s2))))
    ns = [r[0] for r in rows]
    return ScalingReport(model.d, rows,
                         top_decade_slope(ns, [r[1] for r in rows]),
                         top_decade_slope(ns, [math.log(r[2]) for r in rows]),
                         top_decade_slope(ns, [math.log(r[3]) for r in rows]))


# ----------------------------------------------------------------------------
# generative-process oracles


def simulate(model: GaussLinRegModel, n: int, trials: int, rng: RngStream):
    """Draw (W, X^n, Y^n, X, Y) and return per-trial posterior quantities."""
    g = rng.generator
    d, s2 = model.d, model.noise_var
    W = g.normal(0.0, math.sqrt(model.prior_var), (trials, d))
    X = model.x_sampler.from_uniform(g.random((trials, n + 1)))
    F = model.phi(X)  # (trials, n+1, d)
    noise = g.normal(0.0, math.sqrt(s2), (trials, n + 1))
    Y = np.einsum("tnd,td->tn", F, W) + noise
    Fn, Yn = F[:, :n], Y[:, :n]
    C, _ = _chol_inverse(precision(model, np.einsum("tni,tnj->tij", Fn, Fn)))
    mu = np.einsum("tij,tnj,tn->ti", C, Fn, Yn) / s2
    return W, F[:, n], Y[:, n], mu, C, g


def oracle_mer2(model: GaussLinRegModel, n: int, trials: int, rng: RngStream) -> Estimate:
    """Monte Carlo of E(Y - phi^T mu)^2 - E(Y - phi^T W)^2 from simulated data."""
    W, f, y, mu, _, _ = simulate(model, n, trials, rng)
    pred = np.einsum("ti,ti->t", f, mu)
    omni = np.einsum("ti,ti->t", f, W)
    return Estimate.of((y - pred) ** 2 - (y - omni) ** 2, note="generative MC")


def oracle_mer_log(model: GaussLinRegModel, n: int, trials: int, rng: RngStream) -> Estimate:
    """Monte Carlo of E[ln K(Y|X,W) - ln P(Y|X,Z^n)] with a Gaussian predictive."""
    W, f, y, mu, C, _ = simulate(model, n, trials, rng)
    s2 = model.noise_var
    v = s2 + np.einsum("ti,tij,tj->t", f, C, f)
    m = np.einsum("ti,ti->t", f, mu)
    omni = np.einsum("ti,ti->t", f, W)
    lk = -0.5 * (y - omni) ** 2 / s2 - 0.5 * math.log(s2)
    lp = -0.5 * (y - m) ** 2 / v - 0.5 * np.log(v)
    return Estimate.of(lk - lp, note="generative MC")


def oracle_posterior_error(model: GaussLinRegModel, n: int, trials: int, rng: RngStream):
    """(E||W - W'||^2, 2 E tr C) from paired posterior samples."""
    W, _, _, mu, C, g = simulate(model, n, trials, rng)
    L = np.linalg.cholesky(C)
    Wp = mu + np.einsum("tij,tj->ti", L, g.standard_normal((trials, model.d)))
    return Estimate.of(((W - Wp) ** 2).sum(1)), Estimate.of(2 * np.einsum("tii->t", C))
