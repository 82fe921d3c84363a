"""Monte Carlo MER and bound estimates for models without closed forms.

Two model classes: Bayesian logistic regression and realizable regression
Y = g(X, W) + V with Gaussian noise. Each trial draws (w, x^n, y^n), forms
the posterior on a quadrature grid or by random-walk Metropolis, and
evaluates the conditional Bayes envelope of the posterior predictive minus
the omniscient envelope at the true w. The fresh X is integrated out exactly
(finite laws) or by Gauss-Legendre quadrature (uniform laws).

Draws use separate child streams for W, X^n, the label noise and the
sampler, with (n, trials) layouts, so runs at different n share their data
prefixes (common random numbers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.special import expit, logsumexp, xlogy

from merlab import _backend
from merlab.core import LOG, QUADRATIC, ZERO_ONE, BoundedTableLoss, DiscreteModel, RngStream, ZeroOneLoss
from merlab.linreg import FiniteX, UniformX
from merlab.report import BoundReport, Estimate

MIN_TRIALS = 100
MAX_GRID = 10 ** 6
ACCEPT_BAND = (0.1, 0.7)
TARGET_ACCEPT = 0.35
ADAPT_ROUNDS = 5
NONLIN_X_NODES = 16
Y_GRID = 513  # odd, for Simpson's rule
CHUNK_CELLS = 4_000_000


# ----------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class TruncatedGaussianPrior:
    """N(0, var I_d) conditioned on ||w|| <= radius."""
    d: int
    var: float
    radius: float

    def __post_init__(self):
        if not (self.var > 0 and 0 < self.radius < math.inf):
            raise ValueError("need positive variance and finite positive radius")

    @property
    def sup_norm(self) -> float:
        return float(self.radius)

    def box(self):
        return np.full(self.d, -self.radius), np.full(self.d, self.radius)

    def log_density(self, w: np.ndarray) -> np.ndarray:
        sq = (w * w).sum(-1)
        return np.where(sq <= self.radius ** 2, -0.5 * sq / self.var, -np.inf)

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((0, self.d))
        while out.shape[0] < size:
            cand = g.normal(0.0, math.sqrt(self.var), (2 * (size - out.shape[0]) + 8, self.d))
            out = np.vstack([out, cand[(cand * cand).sum(1) <= self.radius ** 2]])
        return out[:size]


@dataclass(frozen=True)
class BoxPrior:
    """Uniform on the box [lo, hi]."""
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo) or not np.all(np.isfinite(hi - lo)):
            raise ValueError("box needs finite lo < hi per coordinate")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def sup_norm(self) -> float:
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def box(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def log_density(self, w):
        lo, hi = self.box()
        return np.where(np.all((w >= lo) & (w <= hi), axis=-1), 0.0, -np.inf)

    def sample(self, g, size):
        lo, hi = self.box()
        return lo + (hi - lo) * g.random((size, self.d))


@dataclass(frozen=True)
class GaussianPrior:
    """Untruncated N(0, var I_d); the grid covers +-span standard deviations."""
    d: int
    var: float
    span: float = 8.0

    @property
    def sup_norm(self) -> float:
        return math.inf

    def box(self):
        r = self.span * math.sqrt(self.var)
        return np.full(self.d, -r), np.full(self.d, r)

    def log_density(self, w):
        return -0.5 * (w * w).sum(-1) / self.var

    def sample(self, g, size):
        return g.normal(0.0, math.sqrt(self.var), (size, self.d))


@dataclass(frozen=True, eq=False)
class GridPrior:
    """Finite prior on explicit parameter atoms."""
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.nodes, float))
        if v.shape[0] == 1 and np.ndim(self.nodes) == 1:
            v = v.T
        p = np.asarray(self.weights, float)
        if p.shape != (v.shape[0],) or np.any(p < 0) or abs(math.fsum(p) - 1) > 1e-12:
            raise ValueError("grid prior weights must be a probability vector over the nodes")
        object.__setattr__(self, "nodes", v)
        object.__setattr__(self, "weights", p)

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def sup_norm(self) -> float:
        return float(np.linalg.norm(self.nodes[self.weights > 0], axis=1).max())

    def box(self):
        return self.nodes.min(0), self.nodes.max(0)

    def sample(self, g, size):
        c = np.cumsum(self.weights)
        idx = np.minimum((g.random(size)[:, None] >= c).sum(1), len(c) - 1)
        return self.nodes[idx]


def point_mass(w) -> GridPrior:
    w = np.atleast_1d(np.asarray(w, float))
    return GridPrior(w[None, :], np.array([1.0]))


# ----------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class GridQuadrature:
    """Midpoint grid over the prior support, normalized exactly on the grid."""
    points: int = 401
    tag = "grid"


@dataclass(frozen=True)
class RandomWalkMetropolis:
    step: float = 0.8
    burn_in: int = 500
    thin: int = 2
    samples: int = 500  # kept per chain
    chains: int = 4
    tag = "rwm"

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("need at least two chains for paired posterior draws")


def prior_grid(prior, sampler: GridQuadrature) -> tuple[np.ndarray, np.ndarray]:
    """(nodes (J, d), log weights (J,)) of the quadrature grid."""
    if isinstance(prior, GridPrior):
        keep = prior.weights > 0
        return prior.nodes[keep], np.log(prior.weights[keep])
    lo, hi = prior.box()
    G = int(sampler.points)
    if G ** prior.d > MAX_GRID:
        raise ValueError(f"grid of {G}^{prior.d} points exceeds {MAX_GRID}")
    axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(G) + 0.5) / G for i in range(prior.d)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, prior.d)
    lw = prior.log_density(nodes)
    keep = np.isfinite(lw)
    return nodes[keep], lw[keep]


def _x_nodes(sampler, k: int):
    if isinstance(sampler, FiniteX):
        v, p = sampler.nodes()
        return v[p > 0], p[p > 0]
    return sampler.nodes(k)


def _categorical(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draws; p is (T, J), u is (T,)."""
    c = np.cumsum(p, axis=1)
    idx = (u[:, None] * c[:, -1:] >= c).sum(1)
    return np.minimum(idx, p.shape[1] - 1)


def _chunks(T: int, per_trial: int):
    step = max(1, CHUNK_CELLS // max(per_trial, 1))
    for a in range(0, T, step):
        yield slice(a, min(T, a + step))


# ----------------------------------------------------------------------------
# logistic regression


class LogisticModel:
    """K(1 | x, w) = sigmoid(w^T phi(x)), X independent of W."""

    def __init__(self, d: int, feature_map: Callable, x_sampler, prior, s_phi: float | None = None):
        if not isinstance(prior, (TruncatedGaussianPrior, BoxPrior, GridPrior)):
            raise TypeError("logistic prior must be a truncated Gaussian, a box or a finite grid")
        if prior.d != d:
            raise ValueError("prior dimension does not match d")
        self.d = int(d)
        self.feature_map = feature_map
        self.x_sampler = x_sampler
        self.prior = prior
        xq, wq = _x_nodes(x_sampler, 64)
        self._xq, self._wq = xq, wq
        self._Fq = self.phi(xq)
        if s_phi is None:
            if not isinstance(x_sampler, FiniteX):
                raise ValueError("s_phi must be supplied when the covariate support is not finite")
            s_phi, self.s_phi_source = float(np.linalg.norm(self._Fq, axis=1).max()), "exact over the finite support"
        else:
            self.s_phi_source = "supplied"
        self.s_phi = float(s_phi)
        self.s_w = prior.sup_norm
        if not (0 < self.s_phi < math.inf and 0 <= self.s_w < math.inf):
            raise ValueError("s_phi must be finite and positive, s_W finite")
        self.e_norm_phi = float(np.dot(wq, np.linalg.norm(self._Fq, axis=1)))

    @classmethod
    def toy(cls, s_w: float = 2.0) -> "LogisticModel":
        """d = 1, phi(x) = x with X uniform on {-1, 1}, W uniform on [-s_W, s_W]."""
        return cls(1, lambda x: np.asarray(x, float)[..., None], FiniteX((-1.0, 1.0), (0.5, 0.5)),
                   BoxPrior((-s_w,), (s_w,)))

    def phi(self, x) -> np.ndarray:
        return np.asarray(self.feature_map(np.asarray(x, float)), float)

    def __repr__(self):
        return f"LogisticModel(d={self.d}, prior={self.prior!r}, s_phi={self.s_phi}, s_W={self.s_w})"


def _bern_envelopes(p: np.ndarray) -> dict:
    q = 1.0 - p
    return {"log": -(xlogy(p, p) + xlogy(q, q)), "quadratic": p * q, "zeroone": np.minimum(p, q)}


@dataclass
class TrialValues:
    """Per-trial arrays from one simulated sweep cell."""
    n: int
    values: dict
    notes: list = field(default_factory=list)

    def estimate(self, key: str) -> Estimate:
        return Estimate.of(self.values[key], note="; ".join(self.notes))


def _log_lik_logistic(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    # y*a - log(1 + e^a), stable
    return y * a - np.logaddexp(0.0, a)


def _logistic_data(model: LogisticModel, n: int, trials: int, rng: RngStream):
    W = model.prior.sample(rng.child(0).generator, trials)
    X = model.x_sampler.from_uniform(rng.child(1).generator.random((n, trials)).T)
    F = model.phi(X).reshape(trials, n, model.d)
    u = rng.child(2).generator.random((n, trials)).T
    Y = (u < expit(np.einsum("tnd,td->tn", F, W))).astype(np.float64)
    return W, F, Y


def _run_logistic(model: LogisticModel, n: int, trials: int, sampler, rng: RngStream) -> TrialValues:
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials")
    W, F, Y = _logistic_data(model, n, trials, rng)
    Fq, wq = model._Fq, model._wq
    true_p = expit(W @ Fq.T)  # (T, Q)
    notes = []
    if isinstance(sampler, GridQuadrature):
        nodes, lw = prior_grid(model.prior, sampler)
        J = nodes.shape[0]
        pred = np.empty_like(true_p)
        trc = np.empty(trials)
        pairs = np.empty((trials, 2, model.d))
        u = rng.child(3).generator.random((trials, 2))
        Gq = expit(nodes @ Fq.T)  # (J, Q)
        for sl in _chunks(trials, n * J + J):
            A = np.einsum("tnd,jd->tnj", F[sl], nodes)
            lp = lw[None, :] + _log_lik_logistic(A, Y[sl][:, :, None]).sum(1)
            post = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
            pred[sl] = post @ Gq
            mean = post @ nodes
            trc[sl] = (post @ (nodes * nodes)).sum(1) - (mean * mean).sum(1)
            pairs[sl, 0] = nodes[_categorical(post, u[sl, 0])]
            pairs[sl, 1] = nodes[_categorical(post, u[sl, 1])]
    else:
        pred, trc, pairs, acc = _rwm_logistic(model, W, F, Y, sampler, rng.child(3))
        rate = float(acc.mean())
        notes.append(f"rwm acceptance {rate:.3f}")
        if not ACCEPT_BAND[0] <= rate <= ACCEPT_BAND[1]:
            notes.append(f"warning: acceptance outside [{ACCEPT_BAND[0]}, {ACCEPT_BAND[1]}]")
    ep, et = _bern_envelopes(pred), _bern_envelopes(true_p)
    vals = {f"mer_{k}": (ep[k] - et[k]) @ wq for k in ep}
    vals["bayes_zeroone"] = ep["zeroone"] @ wq
    vals["sampling_zeroone"] = (true_p * (1 - pred) + (1 - true_p) * pred) @ wq
    vals["trace_c"] = np.maximum(trc, 0.0)
    vals["pair_half"] = 0.5 * ((pairs[:, 0] - pairs[:, 1]) ** 2).sum(1)
    vals["err_true"] = ((W - pairs[:, 0]) ** 2).sum(1)
    return TrialValues(n, vals, notes)


def _prior_code(prior):
    d = prior.d
    if isinstance(prior, TruncatedGaussianPrior):
        return 0, prior.var, prior.radius, np.zeros(d), np.zeros(d)
    lo, hi = prior.box()
    return 1, 1.0, 0.0, lo, hi


def _rwm_logistic(model: LogisticModel, W, F, Y, sampler: RandomWalkMetropolis, rng: RngStream):
    T, d = W.shape
    Fq = model._Fq
    pred = np.empty((T, Fq.shape[0]))
    trc = np.empty(T)
    pairs = np.empty((T, 2, d))
    acc = np.empty(T)
    if isinstance(model.prior, GridPrior):
        raise TypeError("random-walk Metropolis needs a continuous prior")
    kind, pvar, radius, lo, hi = _prior_code(model.prior)
    S = sampler.thin * sampler.samples
    for t in range(T):
        g = rng.child(t).generator
        phi = np.ascontiguousarray(F[t])
        y = np.ascontiguousarray(Y[t])
        w0s = model.prior.sample(g, sampler.chains)
        kept, accepted = [], 0
        for c in range(sampler.chains):
            w, scale = np.ascontiguousarray(w0s[c]), sampler.step
            # burn-in in rounds, nudging the step toward the target acceptance
            for _ in range(ADAPT_ROUNDS):
                m = sampler.burn_in // ADAPT_ROUNDS
                steps = g.normal(0.0, scale, (m, d))
                chain, a = _backend.rwm_logistic(phi, y, w, steps, np.log(g.random(m)), kind, pvar, radius, lo, hi)
                w = np.ascontiguousarray(np.asarray(chain)[-1]) if m else w
                scale *= math.exp(a / max(m, 1) - TARGET_ACCEPT)
            m = sampler.thin * sampler.samples
            steps = g.normal(0.0, scale, (m, d))
            chain, a = _backend.rwm_logistic(phi, y, w, steps, np.log(g.random(m)), kind, pvar, radius, lo, hi)
            accepted += a
            kept.append(np.asarray(chain)[sampler.thin - 1::sampler.thin])
        samples = np.concatenate(kept)
        pred[t] = expit(samples @ Fq.T).mean(0)
        trc[t] = samples.var(0, ddof=1).sum()
        pairs[t, 0], pairs[t, 1] = kept[0][-1], kept[1][-1]
        acc[t] = accepted / (S * sampler.chains)
    return pred, trc, pairs, acc


# ----------------------------------------------------------------------------
# realizable regression


def linear_g(x, w):
    return w[..., 0] * x


def linear_grad(x, w):
    return np.broadcast_to(np.asarray(x, float)[..., None], np.broadcast_shapes(np.shape(x) + (1,), w.shape))


def squared_g(x, w):
    """g(x, w) = w^2 x: w and -w give the same function."""
    return w[..., 0] ** 2 * x


def squared_grad(x, w):
    return (2.0 * w[..., 0] * x)[..., None]


def tanh_unit(x, w):
    """One hidden unit, g(x, w) = w_0 tanh(w_1 x)."""
    return w[..., 0] * np.tanh(w[..., 1] * x)


def tanh_unit_grad(x, w):
    t = np.tanh(w[..., 1] * x)
    return np.stack([t, w[..., 0] * x * (1 - t * t)], -1)


class NonlinRegModel:
    """Y = g(X, W) + V, V ~ N(0, noise_var), X independent of W.

    ``g(x, w)`` broadcasts x of shape S against w of shape S + (d,) and
    returns shape S; ``grad`` follows the same contract with a trailing d.
    """

    def __init__(self, g: Callable, x_sampler, prior, noise_var: float, *, grad: Callable | None = None,
                 s_g: float | None = None, grid: GridQuadrature | None = None):
        if not noise_var > 0:
            raise ValueError("noise variance must be positive")
        self.g = g
        self.grad = grad
        self.x_sampler = x_sampler
        self.prior = prior
        self.d = prior.d
        self.noise_var = float(noise_var)
        self.grid = grid if grid is not None else GridQuadrature(401 if prior.d == 1 else 61)
        xq, wq = _x_nodes(x_sampler, NONLIN_X_NODES)
        self._xq, self._wq = xq, wq
        if s_g is not None:
            self.s_g, self.s_g_source = float(s_g), "supplied"
        elif grad is not None:
            self.s_g, self.s_g_source = self._grid_s_g(), "grid maximum over the prior box"
        else:
            raise ValueError("give grad or s_g")

    def _grid_s_g(self) -> float:
        lo, hi = self.prior.box()
        G = 201 if self.d == 1 else 61
        axes = [np.linspace(lo[i], hi[i], G) for i in range(self.d)]
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, self.d)
        gr = self.grad(self._xq[:, None], nodes[None, :, :])  # (Q, J, d)
        return float(self._wq @ (gr * gr).sum(-1).max(1))

    def __repr__(self):
        return f"NonlinRegModel(g={getattr(self.g, '__name__', self.g)}, prior={self.prior!r}, noise_var={self.noise_var})"


def mixture_entropy(post: np.ndarray, means: np.ndarray, var: float, points: int = Y_GRID) -> np.ndarray:
    """Differential entropy of sum_j post[t, j] N(means[j], var), one value per row.

    Simpson's rule on a fixed y grid spanning the component means +-10 sd;
    the grid has at least ``points`` nodes and spacing at most sd/8.
    """
    sd = math.sqrt(var)
    lo, hi = means.min() - 10 * sd, means.max() + 10 * sd
    m = max(points, int(math.ceil((hi - lo) / (sd / 8))) | 1)
    y = np.linspace(lo, hi, m)
    K = np.exp(-0.5 * ((y[None, :] - means[:, None]) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    p = post @ K
    return -simpson(xlogy(p, p), x=y, axis=1)


def _nonlin_data(model: NonlinRegModel, n: int, trials: int, rng: RngStream):
    W = model.prior.sample(rng.child(0).generator, trials)
    X = model.x_sampler.from_uniform(rng.child(1).generator.random((n, trials)).T)
    eps = rng.child(2).generator.standard_normal((n, trials)).T
    Y = model.g(X, W[:, None, :]) + math.sqrt(model.noise_var) * eps
    return W, X, Y


def _run_nonlin(model: NonlinRegModel, n: int, trials: int, rng: RngStream, with_log: bool = True) -> TrialValues:
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials")
    W, X, Y = _nonlin_data(model, n, trials, rng)
    nodes, lw = prior_grid(model.prior, model.grid)
    J = nodes.shape[0]
    xq, wq = model._xq, model._wq
    Gq = model.g(xq[:, None], nodes[None, :, :])  # (Q, J)
    gt = model.g(xq[None, :], W[:, None, :])  # (T, Q)
    u = rng.child(3).generator.random(trials)
    s2 = model.noise_var
    var_g = np.empty((trials, len(xq)))
    wp = np.empty((trials, model.d))
    hq = np.empty((trials, len(xq))) if with_log else None
    for sl in _chunks(trials, n * J + J):
        R = Y[sl][:, :, None] - model.g(X[sl][:, :, None], nodes[None, None, :, :])
        lp = lw[None, :] - 0.5 * (R * R).sum(1) / s2
        post = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
        m1 = post @ Gq.T
        var_g[sl] = np.maximum(post @ (Gq * Gq).T - m1 * m1, 0.0)
        wp[sl] = nodes[_categorical(post, u[sl])]
        if with_log:
            for q in range(len(xq)):
                hq[sl, q] = mixture_entropy(post, Gq[q], s2)
    gp = model.g(xq[None, :], wp[:, None, :])
    vals = {
        "mer_quadratic": var_g @ wq,
        "r2_g_pair": 0.5 * ((gt - gp) ** 2) @ wq,
        "r2_w_pair": 0.5 * ((W - wp) ** 2).sum(1),
        "g_sq": (gt * gt) @ wq,
    }
    if with_log:
        vals["mer_log"] = (hq - 0.5 * math.log(2 * math.pi * math.e * s2)) @ wq
    notes = [f"grid {J} nodes", f"s_g {model.s_g_source}"]
    return TrialValues(n, vals, notes)


# ----------------------------------------------------------------------------
# public operations


def _loss_key(loss) -> str:
    if loss is LOG or getattr(loss, "tag", None) == "log":
        return "log"
    if loss is QUADRATIC or getattr(loss, "tag", None) == "quadratic":
        return "quadratic"
    if isinstance(loss, ZeroOneLoss):
        return "zeroone"
    raise TypeError(f"unsupported loss {loss!r}")


def simulate(model, n: int, trials: int, sampler=None, rng: RngStream | None = None) -> TrialValues:
    rng = rng if rng is not None else RngStream(0)
    if isinstance(model, LogisticModel):
        return _run_logistic(model, n, trials, sampler or GridQuadrature(), rng)
    if isinstance(model, NonlinRegModel):
        if sampler is not None and not isinstance(sampler, GridQuadrature):
            raise TypeError("realizable regression supports grid quadrature only")
        return _run_nonlin(model, n, trials, rng)
    raise TypeError(f"no Monte Carlo path for {type(model).__name__}")


def estimate_mer(model, loss, n: int, trials: int, sampler=None, rng: RngStream | None = None) -> Estimate:
    """MER estimate with its standard error over independent trials."""
    key = _loss_key(loss)
    if isinstance(model, NonlinRegModel) and key == "zeroone":
        raise TypeError("zero-one loss needs a finite label space")
    rng = rng if rng is not None else RngStream(0)
    if isinstance(model, NonlinRegModel) and key == "quadratic":
        tv = _run_nonlin(model, n, trials, rng, with_log=False)
    else:
        tv = simulate(model, n, trials, sampler, rng)
    return tv.estimate(f"mer_{key}")


def estimate_mmse_w(model, n: int, trials: int, sampler=None, rng: RngStream | None = None) -> Estimate:
    """R_2(W | Z^n) as half the mean squared gap between two posterior draws."""
    rng = rng if rng is not None else RngStream(0)
    if isinstance(model, NonlinRegModel):
        tv = _run_nonlin(model, n, trials, rng, with_log=False)
        return tv.estimate("r2_w_pair")
    return simulate(model, n, trials, sampler, rng).estimate("pair_half")


def posterior_error_mc(model: LogisticModel, n: int, trials: int, sampler=None,
                       rng: RngStream | None = None) -> tuple[Estimate, Estimate]:
    """(E||W - W'||^2, 2 E tr Cov(W | Z^n)) from the same trials."""
    tv = simulate(model, n, trials, sampler, rng)
    return tv.estimate("err_true"), Estimate.of(2.0 * tv.values["trace_c"])


def _delta_report(bound_id, anchor, n, lhs: np.ndarray, comps: list[np.ndarray], f: Callable, note="") -> BoundReport:
    """Report lhs-mean <= f(component means); errors by the delta method on paired trials."""
    L = Estimate.of(lhs)
    means = np.array([math.fsum(c) / c.size for c in comps])
    rhs = f(*means)
    grad = np.zeros(len(comps))
    for i in range(len(comps)):
        h = 1e-6 * max(abs(means[i]), 1e-8)
        up, dn = means.copy(), means.copy()
        up[i] += h
        dn[i] = max(dn[i] - h, 0.0)
        grad[i] = (f(*up) - f(*dn)) / (up[i] - dn[i])
    lin = sum(gi * c for gi, c in zip(grad, comps))
    rhs_se = Estimate.of(lin).se
    slack_se = Estimate.of(lin - lhs).se
    return BoundReport(bound_id, anchor, n, L.value, rhs, L.se, rhs_se, slack_se, note)


def logistic_bounds(model: LogisticModel, n: int, trials: int, sampler=None,
                    rng: RngStream | None = None) -> list[BoundReport]:
    """The three R_2(W | Z^n) bounds, each against the estimated MER from the same trials."""
    tv = simulate(model, n, trials, sampler, rng)
    v = tv.values
    r2 = v["trace_c"]
    e, s, sw = model.e_norm_phi, model.s_phi, model.s_w
    note = "; ".join(tv.notes + [f"s_phi {model.s_phi_source}"])
    return [
        _delta_report("logistic_lipschitz", "MER_log <= E||phi(X)|| sqrt(2 R_2(W|Z^n))", n,
                      v["mer_log"], [r2], lambda r: e * math.sqrt(2 * r), note),
        _delta_report("logistic_log", "MER_log <= ln(1 + s_phi^2 e^(s_phi s_W) R_2(W|Z^n) / 2)", n,
                      v["mer_log"], [r2], lambda r: math.log1p(0.5 * s * s * math.exp(s * sw) * r), note),
        _delta_report("logistic_zeroone", "MER_01 <= E||phi(X)|| sqrt(2 R_2(W|Z^n)) / 4", n,
                      v["mer_zeroone"], [r2], lambda r: 0.25 * e * math.sqrt(2 * r), note),
    ]


def nonlinreg_bounds(model: NonlinRegModel, n: int, trials: int, sampler=None,
                     rng: RngStream | None = None) -> list[BoundReport]:
    """Function-space and parameter-space bounds for realizable regression."""
    tv = simulate(model, n, trials, sampler, rng)
    v = tv.values
    s2, sg = model.noise_var, model.s_g
    note = "; ".join(tv.notes)
    return [
        _delta_report("nonlinreg_rlz_g", "MER_2 <= 2 R_2(g(X,W)|X,Z^n)", n,
                      v["mer_quadratic"], [v["r2_g_pair"]], lambda r: 2 * r, note),
        _delta_report("nonlinreg_rlz_w", "MER_2 <= 2 s_g R_2(W|Z^n)", n,
                      v["mer_quadratic"], [v["r2_w_pair"]], lambda r: 2 * sg * r, note),
        _delta_report("nonlinreg_log_g", "MER_log <= R_2(g(X,W)|X,Z^n) / s^2", n,
                      v["mer_log"], [v["r2_g_pair"]], lambda r: r / s2, note),
        _delta_report("nonlinreg_log_w", "MER_log <= s_g R_2(W|Z^n) / s^2", n,
                      v["mer_log"], [v["r2_w_pair"]], lambda r: sg * r / s2, note),
        _delta_report("nonlinreg_w2", "MER_2 <= 4 sqrt(2 (E g(X,W)^2 + s^2) R_2(g(X,W)|X,Z^n))", n,
                      v["mer_quadratic"], [v["g_sq"], v["r2_g_pair"]],
                      lambda a, r: 4 * math.sqrt(2 * (a + s2) * max(r, 0.0)), note),
    ]


def metric_table(loss, ny: int) -> np.ndarray:
    """Loss as a square matrix over Y; raises unless it is a metric."""
    if isinstance(loss, ZeroOneLoss):
        return 1.0 - np.eye(ny)
    if not isinstance(loss, BoundedTableLoss):
        raise TypeError("predictive sampling needs a metric loss on Y")
    t = np.asarray(loss.table, float)
    if t.shape != (ny, ny):
        raise TypeError("metric loss needs actions equal to labels")
    off = ~np.eye(ny, dtype=bool)
    # triangle: t[x, z] <= t[x, y] + t[y, z]
    if (np.any(np.diag(t) != 0) or np.any(t[off] <= 0) or np.any(t != t.T)
            or not np.all(t[:, None, :] <= t[:, :, None] + t[None, :, :] + 1e-12)):
        raise TypeError("loss table is not a metric")
    return t


def predictive_sampling_risk(model, loss, n: int, trials: int | None = None, rng: RngStream | None = None,
                             sampler=None, budget=None) -> BoundReport:
    """E l(Y, Y') with Y' drawn from the posterior predictive, against 2 R(Y|X,W) + 2 MER."""
    if isinstance(model, DiscreteModel):
        from merlab.oracle import ExactSum, iter_blocks, mer as exact_mer
        L = metric_table(loss, model.ny)
        acc = ExactSum()
        for blk in iter_blocks(model, n, budget):
            p = blk.pred()
            acc.add(blk.D * np.einsum("bxy,yz,bxz->bx", p, L, p))
        rv = exact_mer(model, loss, n, budget)
        return BoundReport("predictive_sampling", "E l(Y,Y') <= 2 R(Y|X,W) + 2 MER", n, acc.value,
                           2 * rv.fundamental + 2 * rv.value, note="exact enumeration")
    if isinstance(model, LogisticModel):
        metric_table(loss, 2)
        if not isinstance(loss, ZeroOneLoss):
            raise TypeError("logistic predictive sampling supports the zero-one metric")
        tv = simulate(model, n, trials or 1000, sampler, rng)
        v = tv.values
        return _delta_report("predictive_sampling", "E l(Y,Y') <= 2 R(Y|X,W) + 2 MER", n,
                             v["sampling_zeroone"], [v["bayes_zeroone"]], lambda r: 2 * r, "; ".join(tv.notes))
    raise TypeError(f"no predictive sampling path for {type(model).__name__}")


# ----------------------------------------------------------------------------
# sweeps

SWEEP_FIELDS = ("model_id", "loss", "n", "mer_hat", "mer_se", "bound_id", "rhs_hat", "rhs_se", "verdict", "seed")


def mer_curve(model, loss, ns, trials: int, sampler=None, seed: int = 0) -> list[Estimate]:
    """MER estimates over an n grid with common random numbers."""
    return [estimate_mer(model, loss, n, trials, sampler, RngStream(seed)) for n in ns]


def strictly_decreasing(estimates, k: float = 3.0) -> bool:
    """Each step down exceeds k combined standard errors."""
    return all(a.value - b.value > k * math.hypot(a.se, b.se) for a, b in zip(estimates, estimates[1:]))


def sweep(model, model_id: str, ns, trials: int, sampler=None, seed: int = 0) -> list[tuple]:
    rows = []
    fn = logistic_bounds if isinstance(model, LogisticModel) else nonlinreg_bounds
    for n in ns:
        for r in fn(model, n, trials, sampler, RngStream(seed)):
            loss = "zeroone" if "MER_01" in r.anchor else ("log" if "MER_log" in r.anchor else "quadratic")
            rows.append((model_id, loss, n, r.lhs, r.lhs_se, r.bound_id, r.rhs, r.rhs_se, r.verdict, seed))
    return rows
