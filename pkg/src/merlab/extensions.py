"""Multi-family models and Gaussian-process regression.

Multi-family: a model index M with prior P_M selects a family, then a
parameter W within it. On finite spaces everything is enumerated exactly;
the linear-regression families use conjugate posteriors within each family
and exact posterior weights over the index.

Gaussian processes: noiseless regression Y = F(X) with a zero-mean (or given
mean) process, and a noisy variant used for the information check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, roots_hermite

from merlab import info
from merlab import linreg
from merlab.bounds import expect_pairs, pair_table
from merlab.core import LOG, DiscreteModel, FiniteDist, RngStream, ensure_valid
from merlab.mc import _delta_report, _x_nodes
from merlab.oracle import (ExactSum, RiskValue, check_budget, check_loss, envelope, fundamental_limit,
                           iter_blocks, mul0, div0, required_atoms, seq_weight_blocks)
from merlab.report import BoundReport, Estimate

IDENTITY_TOL = 1e-12
GP_JITTER = (1e-10, 1e-8)
PSD_TOL = 1e-8
GH_NODES = 64
MM_X_NODES = 16
DIAM_X_GRID = 2001


# ----------------------------------------------------------------------------
# finite families


class MultiModelFamily:
    """Model prior over family indices plus one model per index.

    Members are :class:`DiscreteModel` (exact paths) or
    :class:`merlab.linreg.GaussLinRegModel` (Monte Carlo paths); mixing the
    two kinds is rejected.
    """

    def __init__(self, model_prior, members: Sequence):
        pm = model_prior if isinstance(model_prior, FiniteDist) else FiniteDist(range(len(members)), model_prior)
        if len(pm.probs) != len(members) or not members:
            raise ValueError("need one prior weight per member")
        self.model_prior = np.asarray(pm.probs, dtype=np.float64)
        self.members = list(members)
        kinds = {type(m) for m in self.members}
        if len(kinds) != 1:
            raise TypeError("members must all be of one model kind")
        self.discrete = isinstance(self.members[0], DiscreteModel)
        if self.discrete:
            self._check_discrete()
        else:
            self._check_linreg()

    def _check_discrete(self):
        ref = self.members[0]
        for m in self.members:
            ensure_valid(m)
            if (m.nx, m.ny) != (ref.nx, ref.ny) or m.x_labels != ref.x_labels or m.y_labels != ref.y_labels:
                raise ValueError("members must share X and Y atoms")
            if (m.y_values is None) != (ref.y_values is None) or (
                    m.y_values is not None and not np.array_equal(m.y_values, ref.y_values)):
                raise ValueError("members must share the numeric embedding of Y")

    def _check_linreg(self):
        ref = self.members[0]
        for m in self.members:
            if m.noise_var != ref.noise_var:
                raise ValueError("linear-regression families must share the noise variance")
            if m.x_sampler != ref.x_sampler:
                raise ValueError("linear-regression families must share the covariate law")

    @property
    def size(self) -> int:
        return len(self.members)

    def family_of_atom(self) -> np.ndarray:
        """Family index of each pooled parameter atom."""
        return np.concatenate([np.full(m.K, i) for i, m in enumerate(self.members)])


def pooled_model(family: MultiModelFamily) -> DiscreteModel:
    """One finite model over (m, w) atoms with prior P_M(m) P_{W|m}(w)."""
    if not family.discrete:
        raise TypeError("pooling needs finite members")
    ms = family.members
    prior = np.concatenate([pm * m.prior for pm, m in zip(family.model_prior, ms)])
    px = np.concatenate([m.px for m in ms])
    ky = np.concatenate([m.ky for m in ms])
    labels = [(i, w) for i, m in enumerate(ms) for w in m.w_labels]
    wv = None
    if all(m.w_values is not None for m in ms) and len({m.w_values.shape[1] for m in ms}) == 1:
        wv = np.concatenate([m.w_values for m in ms])
    ref = ms[0]
    return DiscreteModel(prior, px, ky, y_values=ref.y_values, w_values=wv, w_labels=labels,
                         x_labels=ref.x_labels, y_labels=ref.y_labels)


def _member_blocks(family: MultiModelFamily, n: int, budget=None):
    """Lockstep per-member enumeration; yields (D, N, Js) with Js one J block per member."""
    ms = family.members
    check_budget(sum(required_atoms(m, n) for m in ms), budget)
    gens = [seq_weight_blocks(pm * m.prior, m.pair_lik(), n) for pm, m in zip(family.model_prior, ms)]
    for parts in zip(*gens):
        Js = [V[:, :, None] * m.px[None, :, :] for (_, V), m in zip(parts, ms)]
        D = Js[0].sum(axis=1)
        N = np.einsum("bkx,kxy->bxy", Js[0], ms[0].ky)
        for J, m in zip(Js[1:], ms[1:]):
            D = D + J.sum(axis=1)
            N = N + np.einsum("bkx,kxy->bxy", J, m.ky)
        yield D, N, Js


def mm_mer(family: MultiModelFamily, loss, n: int, budget=None) -> RiskValue:
    """R(Y | X, Z^n) - R(Y | X, W, M) by exact enumeration over (m, w, z^n, x)."""
    if not family.discrete:
        raise TypeError("mm_mer needs finite members")
    for m in family.members:
        check_loss(m, loss)
    yv = family.members[0].y_values
    acc = ExactSum()
    for D, N, _ in _member_blocks(family, n, budget):
        acc.add(mul0(D, envelope(div0(N, D[:, :, None]), loss, yv)))
    br = acc.value
    fl = fundamental_limit(pooled_model(family), loss).value
    return RiskValue(br - fl, loss.tag, n, bayes_risk=br, fundamental=fl)


def diam_discrete(family: MultiModelFamily, kind: str = info.TV) -> float:
    """max over m != m', w in W_m, w' in W_m', reachable x of D(K_{x,w',m'}, K_{x,w,m})."""
    rowfn = {info.TV: info.tv_rows, info.KL: info.kl_rows, info.CHISQ: info.chisq_rows}[kind]
    if family.size == 1:
        return 0.0
    best = 0.0
    ms = family.members
    for i, a in enumerate(ms):
        for j, b in enumerate(ms):
            if i == j:
                continue
            ka = a.ky[a.prior > 0]  # (k, nx, ny), truth W in family a
            reach = a.px[a.prior > 0] > 0
            kb = b.ky[b.prior > 0]
            d = rowfn(kb[None, :, :, :], ka[:, None, :, :])  # (k, l, nx)
            d = np.where(reach[:, None, :], d, 0.0)
            best = max(best, float(d.max()))
    return best


def _same_family_expectation(family: MultiModelFamily, pooled: DiscreteModel, n: int, table: np.ndarray,
                             budget=None) -> tuple[float, float]:
    """(E T[X, W, W'] with W' drawn within the true family, R_01(M | X, Z^n))."""
    fam = family.family_of_atom()
    same = (fam[:, None] == fam[None, :]).astype(np.float64)
    onehot = (fam[:, None] == np.arange(family.size)[None, :]).astype(np.float64)
    T = np.transpose(table, (1, 2, 0))[None]
    acc, err = ExactSum(), ExactSum()
    for blk in iter_blocks(pooled, n, budget):
        Dm = np.einsum("bkx,km->bmx", blk.J, onehot) if family.size > 1 else blk.J.sum(axis=1)[:, None, :]
        Dk = Dm[:, fam, :]  # (B, K, nx) mass of the family of atom k
        post_fam = div0(blk.J[:, None, :, :], Dk[:, :, None, :]) * same[None, :, :, None]
        acc.add(mul0(blk.J[:, :, None, :] * post_fam, T))
        err.add(blk.D - Dm.max(axis=1))
    return acc.value, err.value


def mm_log_identity_and_bounds(family: MultiModelFamily, n: int, budget=None) -> list[BoundReport]:
    """Identity MER_log = I(M,W; Y | X, Z^n), plus the information and deviation bounds."""
    pooled = pooled_model(family)
    lhs = mm_mer(family, LOG, n, budget).value
    cmi = info.cmi_wy(pooled, n, budget)
    if not abs(lhs - cmi) <= IDENTITY_TOL:
        raise ArithmeticError(f"MER_log {lhs!r} differs from I(M,W;Y|X,Z^n) {cmi!r}")
    out = [BoundReport("mm_log_identity", "MER_log = I(M,W;Y|X,Z^n)", n, lhs, cmi,
                       note=f"gap {abs(lhs - cmi):.3e}")]
    if n >= 1:
        out.append(BoundReport("mm_log_total", "MER_log <= I(M,W;Y^n|X^n) / n", n, lhs,
                               info.mi_w_labels(pooled, n, budget) / n))
    out.append(BoundReport("mm_kl_posterior", "MER_log <= E KL(K_{X,W,M} || K_{X,W',M'})", n, lhs,
                           expect_pairs(pooled, n, pair_table(pooled, info.kl_rows, first="w"), budget)))
    # deviation of the predictive, TV form: D(P_pred, K_true) with W' inside the true family
    tv_tab = pair_table(pooled, info.tv_rows)
    within_tv, r01 = _same_family_expectation(family, pooled, n, tv_tab, budget)
    dev = ExactSum()
    for blk in iter_blocks(pooled, n, budget):
        dev.add(mul0(blk.J, info.tv_rows(blk.pred()[:, None, :, :], pooled.ky[None])))
    d_tv = diam_discrete(family, info.TV)
    out.append(BoundReport("mm_decomposition_tv",
                           "E TV(P_{X,Z^n}, K_{X,W,M}) <= E TV(K_{X,W',M}, K_{X,W,M}) + 2 diam R_01(M|X,Z^n)",
                           n, dev.value, within_tv + 2.0 * d_tv * r01, note=f"diam {d_tv!r}"))
    kl_tab = pair_table(pooled, info.kl_rows, first="w")
    within_kl, _ = _same_family_expectation(family, pooled, n, kl_tab, budget)
    d_kl = diam_discrete(family, info.KL)
    rhs = within_kl + (2.0 * d_kl * r01 if r01 > 0 else 0.0)
    out.append(BoundReport("mm_decomposition_kl",
                           "MER_log <= E KL(K_{X,W,M} || K_{X,W',M}) + 2 diam R_01(M|X,Z^n)",
                           n, lhs, rhs, note=f"diam {d_kl!r}"))
    return out


# ----------------------------------------------------------------------------
# linear-regression families


def _box_sup_abs(lo, hi, a) -> float:
    """max over w in [lo, hi] of |w^T a| is attained at a vertex, coordinate-wise."""
    return float(np.maximum(np.abs(lo) * np.abs(a), np.abs(hi) * np.abs(a)).sum())


def _box_range(lo, hi, A):
    """Row-wise (min, max) of w^T a over the box for a in rows of A."""
    lo_, hi_ = np.asarray(lo, float), np.asarray(hi, float)
    mx = np.maximum(A * lo_, A * hi_).sum(-1)
    mn = np.minimum(A * lo_, A * hi_).sum(-1)
    return mn, mx


def diam_linreg_kl(family: MultiModelFamily, boxes) -> tuple[float, str]:
    """(1 / 2s^2) max_{m != m'} sup_{w, w' in boxes} sup_x (w'^T phi_m'(x) - w^T phi_m(x))^2."""
    if boxes is None:
        raise ValueError("diameter needs a finite truncation box per family")
    if len(boxes) != family.size:
        raise ValueError("need one truncation box per family")
    if family.size == 1:
        return 0.0, "single family"
    xs = family.members[0].x_sampler
    if isinstance(xs, linreg.FiniteX):
        v, p = xs.nodes()
        grid, how = v[p > 0], "finite support"
    else:
        grid, how = np.linspace(xs.lo, xs.hi, DIAM_X_GRID), f"{DIAM_X_GRID}-point grid"
    best = 0.0
    for i, a in enumerate(family.members):
        for j, b in enumerate(family.members):
            if i == j:
                continue
            amin, amax = _box_range(*boxes[i], a.phi(grid))
            bmin, bmax = _box_range(*boxes[j], b.phi(grid))
            gap = np.maximum(bmax - amin, amax - bmin)
            best = max(best, float((gap ** 2).max()))
    return best / (2.0 * family.members[0].noise_var), f"sup over x on the {how}; boxes {boxes!r}"


def _gh_entropy(weights: np.ndarray, means: np.ndarray, variances: np.ndarray, nodes: int = GH_NODES) -> np.ndarray:
    """Entropy of Gaussian mixtures, rows (T, C), by Gauss-Hermite per component."""
    t, w = roots_hermite(nodes)
    # evaluation points y = mu_c + sqrt(2 v_c) t_k, shape (T, C, k)
    y = means[..., None] + np.sqrt(2.0 * variances)[..., None] * t
    z = (y[:, None, :, :] - means[:, :, None, None]) ** 2 / variances[:, :, None, None]
    logc = (np.log(np.where(weights > 0, weights, 1.0)) - 0.5 * np.log(2 * math.pi * variances))
    logc = np.where(weights > 0, logc, -np.inf)
    logp = logsumexp(logc[:, :, None, None] - 0.5 * z, axis=1)  # (T, C, k)
    return -(weights * (logp @ w) / math.sqrt(math.pi)).sum(1)


def mm_linreg_bounds(family: MultiModelFamily, n: int, trials: int, rng: RngStream | None = None,
                     boxes=None) -> list[BoundReport]:
    """The two multi-family linear-regression MER_log bounds against a Monte Carlo MER_log.

    R_2(W | Z^n, M) enters family by family, sum_m P_M(m) E||phi_m||^2 E tr C_m.
    """
    if family.discrete:
        raise TypeError("mm_linreg_bounds needs linear-regression members")
    diam, diam_note = diam_linreg_kl(family, boxes)
    rng = rng if rng is not None else RngStream(0)
    ms = family.members
    s2 = ms[0].noise_var
    pm = family.model_prior
    T = int(trials)
    if T < 100:
        raise ValueError("need at least 100 trials")
    g_m = rng.child(0).generator
    M = np.minimum((g_m.random(T)[:, None] >= np.cumsum(pm)[None, :]).sum(1), len(pm) - 1)
    dmax = max(m.d for m in ms)
    Z = rng.child(1).generator.standard_normal((T, dmax))
    X = ms[0].x_sampler.from_uniform(rng.child(2).generator.random((n, T)).T)
    eps = rng.child(3).generator.standard_normal((n, T)).T
    xq, wq = _x_nodes(ms[0].x_sampler, MM_X_NODES)
    Y = np.empty((T, n))
    for i, m in enumerate(ms):
        sel = M == i
        W = Z[sel, : m.d] * math.sqrt(m.prior_var)
        Y[sel] = np.einsum("tnd,td->tn", m.phi(X[sel]).reshape(int(sel.sum()), n, m.d), W)
    Y += math.sqrt(s2) * eps
    # per-family conjugate posterior and evidence
    logev = np.empty((T, len(ms)))
    pmean = np.empty((T, len(ms), len(xq)))
    pvar = np.empty((T, len(ms), len(xq)))
    trc = np.empty((T, len(ms)))
    for i, m in enumerate(ms):
        F = m.phi(X).reshape(T, n, m.d)
        G = np.einsum("tni,tnj->tij", F, F)
        b = np.einsum("tni,tn->ti", F, Y)
        C, logdet_a = linreg._chol_inverse(linreg.precision(m, G))
        mu = np.einsum("tij,tj->ti", C, b) / s2
        quad = (Y * Y).sum(1) / s2 - np.einsum("ti,ti->t", b, mu) / s2
        logev[:, i] = -0.5 * (quad + logdet_a + m.d * math.log(m.prior_var) + n * math.log(2 * math.pi * s2))
        Fq = m.phi(xq)
        pmean[:, i] = mu @ Fq.T
        pvar[:, i] = s2 + np.einsum("qi,tij,qj->tq", Fq, C, Fq)
        trc[:, i] = np.einsum("tii->t", C)
    lp = np.log(np.where(pm > 0, pm, 1.0))[None, :] + logev
    lp = np.where(pm[None, :] > 0, lp, -np.inf)
    post = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
    h = np.stack([_gh_entropy(post, pmean[:, :, q], pvar[:, :, q]) for q in range(len(xq))], 1)
    mer_log = (h - 0.5 * math.log(2 * math.pi * math.e * s2)) @ wq
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = -np.where(post > 0, post * np.log(np.where(post > 0, post, 1.0)), 0.0).sum(1)
    r01 = 1.0 - post.max(1)
    e2 = np.array([m.e_phi2 for m in ms])
    coef = pm * e2  # the R_2 term is sum_m P_M(m) E||phi_m||^2 E tr C_m

    def rterm(*tr):
        return float(np.dot(coef, tr))

    comps = [trc[:, i] for i in range(len(ms))]
    note = f"{T} trials; diam {diam!r}; {diam_note}"
    return [
        _delta_report("mm_linreg_entropy", "MER_log <= (2 s^2)^-1 sum_m P(m) E||phi_m||^2 E tr C_m + H(M|Z^n)", n,
                      mer_log, comps + [hm], lambda *a: rterm(*a[:-1]) / (2 * s2) + a[-1], note),
        _delta_report("mm_linreg_kl", "MER_log <= s^-2 sum_m P(m) E||phi_m||^2 E tr C_m + 2 diam R_01(M|Z^n)", n,
                      mer_log, comps + [r01], lambda *a: rterm(*a[:-1]) / s2 + 2 * diam * a[-1], note),
    ]


# ----------------------------------------------------------------------------
# Gaussian processes


@dataclass(frozen=True)
class RBF:
    length: float = 1.0
    amplitude: float = 1.0

    def __call__(self, a, b):
        d = np.asarray(a, float) - np.asarray(b, float)
        return self.amplitude * np.exp(-0.5 * d * d / self.length ** 2)


@dataclass(frozen=True)
class ConstantKernel:
    value: float = 1.0

    def __call__(self, a, b):
        return np.full(np.broadcast_shapes(np.shape(a), np.shape(b)), float(self.value))


@dataclass(frozen=True, eq=False)
class TabulatedKernel:
    """Kernel given as a matrix over finitely many real x atoms."""
    values: tuple
    matrix: np.ndarray

    def __call__(self, a, b):
        v = np.asarray(self.values, float)
        ia = np.searchsorted(v, np.asarray(a, float))
        ib = np.searchsorted(v, np.asarray(b, float))
        return np.asarray(self.matrix, float)[ia, ib]


@dataclass(frozen=True)
class GPModel:
    kernel: Callable
    x_sampler: object = linreg.UniformX()
    mean: Callable | None = None
    noise_var: float = 0.0

    @property
    def noiseless(self) -> bool:
        return self.noise_var == 0.0

    def gram(self, A, B=None) -> np.ndarray:
        A = np.asarray(A, float)
        B = A if B is None else np.asarray(B, float)
        return self.kernel(A[..., :, None], B[..., None, :])

    def m(self, x):
        return np.zeros(np.shape(x)) if self.mean is None else np.asarray(self.mean(np.asarray(x, float)), float)


class SingularGramError(np.linalg.LinAlgError):
    pass


def _check_psd(K: np.ndarray) -> None:
    if K.shape[-1] == 0:
        return
    lo = np.linalg.eigvalsh(K).min()
    if lo < -PSD_TOL:
        raise ValueError(f"kernel Gram matrix is not PSD (smallest eigenvalue {lo:.3e})")


def _chol_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Batched Cholesky of K + jitter I, trying each jitter level in turn."""
    eye = np.eye(K.shape[-1])
    for jit in GP_JITTER:
        try:
            return np.linalg.cholesky(K + jit * eye), jit
        except np.linalg.LinAlgError:
            continue
    raise SingularGramError("Gram matrix singular beyond jitter rescue")


def gp_posterior_var(model: GPModel, xn, x) -> float:
    """Var(F(x) | Y at x^n); in the noiseless case an exact repeat of x gives 0."""
    xn = np.asarray(xn, float).ravel()
    x = float(x)
    kxx = float(model.kernel(np.array(x), np.array(x)))
    if xn.size == 0:
        return kxx
    K = model.gram(xn)
    _check_psd(K)
    if model.noiseless and np.any(xn == x):
        return 0.0
    kx = model.kernel(xn, np.array(x))
    if model.noiseless:
        L, _ = _chol_jitter(K)
    else:
        L = np.linalg.cholesky(K + model.noise_var * np.eye(xn.size))
    a = np.linalg.solve(L, kx)
    return max(kxx - float(a @ a), 0.0)


def _gp_design(model: GPModel, n: int, trials: int, rng: RngStream, force_query: bool):
    Xn = model.x_sampler.from_uniform(rng.child(0).generator.random((n, trials)).T)
    X = model.x_sampler.from_uniform(rng.child(1).generator.random(trials))
    if force_query:
        if n < 1:
            raise ValueError("forcing the query onto a training point needs n >= 1")
        X = Xn[:, 0].copy()
    return Xn, X


def _batched_var(model: GPModel, Xn: np.ndarray, X: np.ndarray) -> np.ndarray:
    T, n = Xn.shape
    kxx = model.kernel(X, X)
    if n == 0:
        return kxx
    K = model.gram(Xn)
    _check_psd(K)
    kx = model.kernel(Xn, X[:, None])  # (T, n)
    try:
        L, _ = _chol_jitter(K)
        a = np.linalg.solve(L, kx[..., None])[..., 0]
        v = kxx - (a * a).sum(1)
    except SingularGramError:
        v = np.array([gp_posterior_var(model, Xn[t], X[t]) for t in range(T)])
    dup = np.any(Xn == X[:, None], axis=1)
    return np.where(dup, 0.0, np.maximum(v, 0.0))


def gp_mer_quadratic(model: GPModel, n: int, trials: int, rng: RngStream | None = None,
                     force_query: bool = False) -> Estimate:
    """MER_2 = E[k(X,X) - k(X,X^n)^T Sigma(X^n)^-1 k(X,X^n)] for the noiseless process."""
    if not model.noiseless:
        raise ValueError("the conditioning formula is for noiseless observations")
    rng = rng if rng is not None else RngStream(0)
    Xn, X = _gp_design(model, n, trials, rng, force_query)
    return Estimate.of(_batched_var(model, Xn, X), note=f"jitter {GP_JITTER[0]}")


def gp_conditional_var_oracle(model: GPModel, n: int, trials: int, rng: RngStream | None = None,
                              force_query: bool = False) -> Estimate:
    """E[(F(X) - E[F(X) | F(X^n)])^2] from joint draws of the process.

    The conditional mean comes from the precision matrix of the joint
    (n+1)-point covariance, a different linear-algebra route than the
    conditioning formula.
    """
    rng = rng if rng is not None else RngStream(0)
    Xn, X = _gp_design(model, n, trials, rng, force_query)
    S = np.concatenate([Xn, X[:, None]], axis=1)
    K = model.gram(S)
    _check_psd(K)
    L, jit = _chol_jitter(K)
    z = rng.child(2).generator.standard_normal((trials, n + 1))
    F = model.m(S) + np.einsum("tij,tj->ti", L, z)
    P = np.linalg.inv(K + jit * np.eye(n + 1))
    last = P[:, n, :]
    resid = (last * (F - model.m(S))).sum(1) / last[:, n]
    return Estimate.of(resid ** 2, note="joint-draw oracle")


def gp_log_cmi_check(model: GPModel, n: int, trials: int, rng: RngStream | None = None,
                     duplicate: bool = False) -> BoundReport:
    """I(F(X); Y | X, Z^n) <= I(F; Y^n | X^n) / n, on sampled sets of n+1 points.

    Each set S is used symmetrically: every point in turn is the query and the
    other n are the data. The averaged sides then satisfy the inequality
    exactly for each S (Han's inequality for the submodular I(F; Y_A)), and
    their means over S are unbiased for the two sides.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = rng if rng is not None else RngStream(0)
    S = model.x_sampler.from_uniform(rng.child(0).generator.random((n + 1, trials)).T)
    if duplicate:
        S[:, n] = S[:, 0]
    K = model.gram(S)
    _check_psd(K)
    s2 = model.noise_var
    lhs = np.zeros(trials)
    rhs = np.zeros(trials)
    for j in range(n + 1):
        keep = [i for i in range(n + 1) if i != j]
        KT = K[:, keep][:, :, keep]
        kj = K[:, keep, j]
        if model.noiseless:
            dup = np.any(S[:, keep] == S[:, [j]], axis=1)
            lhs += np.where(dup, 0.0, np.inf)
            rhs += np.inf
            continue
        A = KT + s2 * np.eye(n)
        sol = np.linalg.solve(A, kj[..., None])[..., 0]
        v = np.maximum(K[:, j, j] - (kj * sol).sum(1), 0.0)
        lhs += 0.5 * np.log1p(v / s2)
        rhs += 0.5 * np.linalg.slogdet(np.eye(n) + KT / s2)[1] / n
    lhs /= n + 1
    rhs /= n + 1
    worst = float(np.min(rhs - lhs)) if not model.noiseless else math.nan
    L, R = Estimate.of(lhs), Estimate.of(rhs)
    return BoundReport("gp_log_cmi", "I(F(X);Y|X,Z^n) <= I(F;Y^n|X^n) / n", n, L.value, R.value,
                       L.se, R.se, slack_se=0.0, note=f"per-set inequality; worst per-set slack {worst!r}")
