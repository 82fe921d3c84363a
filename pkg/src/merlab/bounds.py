"""Both sides of every MER upper bound on enumerable models, as BoundReports.

Each ``bound_*`` function computes the left side (an exact MER or excess risk)
and the right side (the bound) by enumeration. Functions that emit more than
one related inequality return a list, primary report first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from merlab import info
from merlab.core import (BoundedTableLoss, DiscreteModel, FiniteDist, LOG, LogLoss, Loss,
                         QUADRATIC, QuadraticLoss, Verdict, ZERO_ONE, ZeroOneLoss, ensure_valid)
from merlab.info import CgfEnvelope, Gaussian
from merlab.oracle import (ExactSum, ExceedsEnumerationBudget, action_labels, action_losses,
                           check_budget, check_loss, decode_sequence, fundamental_limit,
                           iter_blocks, mer, mmse_w, mul0, plug_in_risk, resolve_budget, dpi_check)
from merlab.report import BoundReport

LN2 = math.log(2.0)
CGF_GRID = 64


def _x_reach(model: DiscreteModel) -> np.ndarray:
    """(nx,) probability of each X atom."""
    return model.prior @ model.px


def _support_mask(model: DiscreteModel) -> np.ndarray:
    """(K, nx, ny) mask of (w', x, y) reachable under some posterior/predictive pair."""
    pwx = model.prior[:, None] * model.px
    ysupp = np.einsum("kx,kxy->xy", pwx, model.ky) > 0
    return (pwx > 0)[:, :, None] & ysupp[None, :, :]


def _loss_range(model: DiscreteModel, loss: Loss) -> tuple[float, float]:
    """Declared range for bounded losses, else the per-x range of loss(y, Psi*(x, w'))."""
    if isinstance(loss, ZeroOneLoss):
        return 0.0, 1.0
    if isinstance(loss, BoundedTableLoss):
        return 0.0, float(loss.b)
    L = action_losses(model, loss)
    mask = _support_mask(model)
    width = 0.0
    for x in range(model.nx):
        v = L[:, x, :][mask[:, x, :]]
        if v.size:
            if not np.all(np.isfinite(v)):
                raise ValueError("loss is unbounded on the model support; supply sigma2 explicitly")
            width = max(width, float(v.max() - v.min()))
    return 0.0, width


def _bound_b(loss: Loss) -> float:
    if isinstance(loss, ZeroOneLoss):
        return 1.0
    if isinstance(loss, BoundedTableLoss):
        return float(loss.b)
    raise ValueError("this bound needs a loss with a declared range [0, b]")


# ----------------------------------------------------------------------------
# information bounds


def bound_quadratic_mi(model: DiscreteModel, n: int, budget=None) -> BoundReport:
    """MER_2 <= 2 b^2 I(W; Y | X, Z^n) with b = max ||y||."""
    if model.y_values is None:
        raise ValueError("quadratic loss needs a numeric embedding of Y")
    yv = model.y_values
    if not np.all(np.isfinite(yv)):
        raise ValueError("unbounded Y embedding")
    b = float(np.sqrt((yv ** 2).sum(axis=1)).max())
    lhs = mer(model, QUADRATIC, n, budget).value
    rhs = 2.0 * b * b * info.cmi_wy(model, n, budget)
    return BoundReport("quadratic_mi", "MER_2 <= 2 b^2 I(W;Y|X,Z^n)", n, lhs, rhs)


def bound_zeroone(model: DiscreteModel, n: int, budget=None) -> list[BoundReport]:
    """[A: MER_01 <= sqrt(I/2); B: MER_01 <= H(Y|X,Z^n)/(2 ln 2); B-chain when n >= 1].

    The entropy form uses the binary entropy in bits (min(p, 1-p) <= h2(p)/2
    fails in nats). B and its chain link need binary Y.
    """
    lhs = mer(model, ZERO_ONE, n, budget).value
    i_wy = info.cmi_wy(model, n, budget)
    out = [BoundReport("zeroone_mi", "MER_01 <= sqrt(I(W;Y|X,Z^n)/2)", n, lhs, math.sqrt(max(i_wy, 0.0) / 2))]
    if model.ny != 2:
        return out
    h_cond = mer(model, LOG, n, budget).bayes_risk
    out.append(BoundReport("zeroone_entropy", "MER_01 <= H(Y|X,Z^n) / (2 ln 2)", n, lhs, h_cond / (2 * LN2)))
    if n >= 1:
        h_seq = info.cond_entropy_labels(model, n, budget)
        out.append(BoundReport("zeroone_entropy_chain", "H(Y|X,Z^n) <= H(Y^n|X^n) / n", n,
                               h_cond / (2 * LN2), h_seq / (2 * n * LN2)))
    return out


def bound_subgaussian(model: DiscreteModel, loss: Loss, n: int, sigma2: float | None = None,
                      budget=None) -> list[BoundReport]:
    """MER <= sqrt(2 s2 I(Psi*(X,W); Y | X, Z^n)), then the W-level and data-level weakenings.

    Default s2 is (b - a)^2 / 4 for the loss range [a, b].
    """
    check_loss(model, loss)
    if sigma2 is None:
        a, b = _loss_range(model, loss)
        sigma2 = (b - a) ** 2 / 4.0
    lhs = mer(model, loss, n, budget).value
    i_push = info.cmi_pushforward(model, action_labels(model, loss), n, budget)
    i_wy = info.cmi_wy(model, n, budget)
    f = lambda i: math.sqrt(2.0 * sigma2 * max(i, 0.0))
    out = [BoundReport("subgaussian_pushforward", "MER <= sqrt(2 s2 I(Psi*(X,W);Y|X,Z^n))", n, lhs, f(i_push),
                       note=f"sigma2={sigma2!r}"),
           BoundReport("subgaussian_w", "MER <= sqrt(2 s2 I(W;Y|X,Z^n))", n, lhs, f(i_wy), note=f"sigma2={sigma2!r}")]
    if n >= 1 and model.x_independent:
        i_z = info.mi_w_data(model, n, budget) / n
        out.append(BoundReport("subgaussian_data", "MER <= sqrt(2 s2 I(Z^n;W')/n)", n, lhs, f(i_z),
                               note=f"sigma2={sigma2!r}"))
    return out


def lambda_grid(env: CgfEnvelope) -> np.ndarray:
    top = min(env.b, 1e3)
    return np.geomspace(top * 1e-6, top * (1 - 1e-9), CGF_GRID)


def check_cgf_domination(model: DiscreteModel, loss: Loss, n: int, env: CgfEnvelope, budget=None) -> int:
    """Check the centered cgf of -loss(Y, Psi*(x, W')) against phi on every (x, z^n) cell.

    Returns the number of cells checked; raises ValueError naming the first
    violating (x, z^n, lambda).
    """
    L = action_losses(model, loss)
    lam = lambda_grid(env)
    phi = np.array([env.phi(float(t)) for t in lam])
    cells = 0
    for blk in iter_blocks(model, n, budget):
        post, pred = blk.post(), blk.pred()
        q = post.transpose(0, 2, 1)[:, :, :, None] * pred[:, :, None, :]  # (B, nx, K, ny)
        Lx = L.transpose(1, 0, 2)[None]  # (1, nx, K, ny)
        if np.any((q > 0) & ~np.isfinite(Lx)):
            raise ValueError("loss is infinite on a positive-probability atom")
        Lf = np.where(q > 0, Lx, 0.0)
        m = (q * Lf).sum(axis=(2, 3))
        dev = (Lf - m[:, :, None, None]).reshape(q.shape[0], q.shape[1], -1)
        w = q.reshape(dev.shape)
        live = blk.D > 0
        cells += int(live.sum())
        arg = -lam[None, None, :, None] * dev[:, :, None, :]
        with np.errstate(divide="ignore"):
            cgf = logsumexp(arg, b=w[:, :, None, :], axis=-1)
        bad = live[:, :, None] & (cgf > phi[None, None, :] + 1e-12 * np.maximum(1.0, np.abs(phi)))
        if bad.any():
            b, x, j = map(int, np.argwhere(bad)[0])
            z = decode_sequence(model, n, blk.start + b)
            raise ValueError(f"cgf domination fails at x={model.x_labels[x]!r}, z^n={z.pairs!r}, "
                             f"lambda={lam[j]!r}")
    return cells


def bound_general_phi(model: DiscreteModel, loss: Loss, n: int, env: CgfEnvelope, budget=None) -> BoundReport:
    """MER <= phi*^{-1}(I(Psi*(X,W); Y | X, Z^n)) after a cgf domination check."""
    check_loss(model, loss)
    cells = check_cgf_domination(model, loss, n, env, budget)
    lhs = mer(model, loss, n, budget).value
    i_push = info.cmi_pushforward(model, action_labels(model, loss), n, budget)
    rhs = info.legendre_inverse(env, max(i_push, 0.0))
    return BoundReport("general_phi", "MER <= phi*^-1(I(Psi*(X,W);Y|X,Z^n))", n, lhs, rhs,
                       note=f"{env.tag}; cgf checked on {cells} cells x {CGF_GRID} lambdas")


# ----------------------------------------------------------------------------
# realizable models and VC machinery


@dataclass(frozen=True, eq=False)
class GenerativeFunctionClass:
    """Table g[x, w] of Y-atom indices (or action indices for table losses)."""
    table: np.ndarray
    binary: bool = True

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        if t.ndim != 2:
            raise ValueError("g must be a (nx, K) table")
        if self.binary and not np.isin(t, (0, 1)).all():
            raise ValueError("binary class with labels outside {0, 1}")
        object.__setattr__(self, "table", t)

    @classmethod
    def from_function(cls, g, xs, ws, binary: bool = True) -> "GenerativeFunctionClass":
        return cls(np.array([[int(g(x, w)) for w in ws] for x in xs]), binary)

    @property
    def nx(self) -> int:
        return self.table.shape[0]

    @property
    def K(self) -> int:
        return self.table.shape[1]

    def flipped(self) -> "GenerativeFunctionClass":
        return GenerativeFunctionClass(1 - self.table, True)


def threshold_class(xs, ws) -> GenerativeFunctionClass:
    """y = 1{x >= w}."""
    return GenerativeFunctionClass.from_function(lambda x, w: x >= w, xs, ws)


def interval_class(xs, grid) -> GenerativeFunctionClass:
    """y = 1{a <= x <= b} for all a <= b on the grid, plus the empty interval."""
    ws = [(a, b) for a in grid for b in grid if a <= b] + [(math.inf, -math.inf)]
    return GenerativeFunctionClass.from_function(lambda x, w: w[0] <= x <= w[1], xs, ws)


def constant_class(nx: int, value: int = 0) -> GenerativeFunctionClass:
    return GenerativeFunctionClass(np.full((nx, 1), value))


def realizable_model(gclass: GenerativeFunctionClass, prior=None, x_law=None, x_labels=None) -> DiscreteModel:
    """Deterministic-label model Y = g(X, W) with X independent of W."""
    K, nx = gclass.K, gclass.nx
    prior = np.full(K, 1.0 / K) if prior is None else np.asarray(prior, float)
    px = np.full(nx, 1.0 / nx) if x_law is None else np.asarray(x_law, float)
    ny = int(gclass.table.max()) + 1 if not gclass.binary else 2
    ky = np.zeros((K, nx, ny))
    ky[np.arange(K)[:, None], np.arange(nx)[None, :], gclass.table.T] = 1.0
    return DiscreteModel(prior, px, ky, y_values=np.arange(ny, dtype=float), x_labels=x_labels)


def _realizable_or_raise(model: DiscreteModel, gclass: GenerativeFunctionClass, loss: Loss) -> None:
    if gclass.table.shape != (model.nx, model.K):
        raise ValueError("generative class does not match the model supports")
    pwxy = (model.prior[:, None, None] * model.px[:, :, None] * model.ky) > 0
    k, x, y = np.nonzero(pwxy)
    a = gclass.table[x, k]
    if isinstance(loss, ZeroOneLoss):
        bad = y != a
    elif isinstance(loss, BoundedTableLoss):
        bad = loss.table[y, a] != 0
    else:
        raise ValueError("realizable bounds need a zero-one or bounded table loss")
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"realizability fails at w={model.w_labels[k[i]]!r}, x={model.x_labels[x[i]]!r}, "
                         f"y={model.y_labels[y[i]]!r}")


def bound_realizable(model: DiscreteModel, gclass: GenerativeFunctionClass, loss: Loss, n: int,
                     budget=None) -> list[BoundReport]:
    """MER <= (b / ln 2) I(g(X,W); Y | X, Z^n), with the decoupling step checked.

    Returns [main, plug-in step E loss(Y, g(X,W')) <= rhs, worst single cell of
    the decoupling inequality].
    """
    check_loss(model, loss)
    _realizable_or_raise(model, gclass, loss)
    b = _bound_b(loss)
    risk = mer(model, loss, n, budget)
    if abs(risk.fundamental) > 1e-12:
        raise AssertionError("fundamental limit is nonzero on a realizable model")
    i_g = info.cmi_pushforward(model, gclass.table, n, budget)
    rhs = b / LN2 * i_g
    # per-cell decoupling: E[l(Y, V')] vs (b/ln2) I(V; Y) with V = g(x, W)
    G = gclass.table  # (nx, K)
    ltab = (np.arange(model.ny)[None, None, :] != G[:, :, None]).astype(float) if isinstance(loss, ZeroOneLoss) \
        else loss.table[:, G].transpose(1, 2, 0)  # (nx, K, ny)
    O = info._onehot(G)
    plug = ExactSum()
    worst = None
    for blk in iter_blocks(model, n, budget):
        post, pred = blk.post(), blk.pred()
        el = np.einsum("bkx,xky,bxy->bx", post, ltab, pred)
        plug.add(blk.D * el)
        JG = np.einsum("bkx,xkg->bxg", blk.J, O)
        JGY = np.einsum("bkx,kxy,xkg->bxgy", blk.J, model.ky, O)
        icell = (info._cell_entropy(JG, blk.D, -1) + info._cell_entropy(blk.N, blk.D, -1)
                 - info._cell_entropy(JGY, blk.D, (-2, -1)))
        slack = np.where(blk.D > 0, b / LN2 * icell - el, np.inf)
        j = np.unravel_index(int(np.argmin(slack)), slack.shape)
        if worst is None or slack[j] < worst[0]:
            worst = (float(slack[j]), float(el[j]), float(b / LN2 * icell[j]), blk.start + int(j[0]), int(j[1]))
    _, wl, wr, seq, x = worst
    return [BoundReport("realizable", "MER <= (b/ln2) I(g(X,W);Y|X,Z^n)", n, risk.value, rhs),
            BoundReport("realizable_plugin", "E l(Y,g(X,W')) <= (b/ln2) I(g(X,W);Y|X,Z^n)", n, plug.value, rhs),
            BoundReport("decoupling_worst_cell", "E l(Y,V') <= (b/ln2) I(V;Y) per cell", n, wl, wr,
                        note=f"x={model.x_labels[x]!r} z^n={decode_sequence(model, n, seq).pairs!r}")]


def patterns(gclass: GenerativeFunctionClass, subset) -> set:
    cols = gclass.table[list(subset), :]
    return {tuple(cols[:, k]) for k in range(gclass.K)}


def vc_dimension(gclass: GenerativeFunctionClass, x_atoms=None) -> int:
    """Largest size of a shattered subset of ``x_atoms`` (all atoms by default)."""
    if not gclass.binary:
        raise ValueError("VC dimension needs a binary class")
    atoms = list(range(gclass.nx)) if x_atoms is None else list(x_atoms)
    if len(atoms) > 20:
        raise ValueError("brute-force shattering limited to 20 atoms")
    d = 0
    for s in range(1, len(atoms) + 1):
        if 2 ** s > gclass.K:
            break
        if not any(len(patterns(gclass, S)) == 2 ** s for S in combinations(atoms, s)):
            break  # shattering is hereditary
        d = s
    return d


def sauer_shelah_bound(d: int, n: int) -> int:
    return sum(math.comb(n, k) for k in range(d + 1))


def sauer_shelah_check(gclass: GenerativeFunctionClass, n: int, budget=None) -> Verdict:
    """Pattern counts on every point set of size <= n against sum_{k<=d} C(n,k) <= e n^d."""
    d = vc_dimension(gclass)
    m = min(n, gclass.nx)
    count = sum(math.comb(gclass.nx, s) for s in range(m + 1))
    if count > resolve_budget(budget):
        raise ExceedsEnumerationBudget(count, resolve_budget(budget))
    for s in range(m + 1):
        cap = sauer_shelah_bound(d, s)
        for S in combinations(range(gclass.nx), s):
            c = len(patterns(gclass, S))
            if c > cap:
                return Verdict(False, f"{c} patterns exceed {cap}", S)
    # a length-n sequence sees at most min(n, nx) distinct points
    if sauer_shelah_bound(d, m) > sauer_shelah_bound(d, n):
        return Verdict(False, "pattern bound not monotone", (n,))
    if n >= 1 and sauer_shelah_bound(d, n) > math.e * n ** d:
        return Verdict(False, f"sum C(n,k) exceeds e n^d at n={n}", (n,))
    return Verdict(True)


def _partition_entropy(gclass: GenerativeFunctionClass, prior: np.ndarray, subset) -> float:
    if not subset:
        return 0.0
    cols = gclass.table[list(subset), :]
    mass: dict = {}
    for k in range(gclass.K):
        key = cols[:, k].tobytes()
        mass[key] = mass.get(key, 0.0) + float(prior[k])
    return -math.fsum(p * math.log(p) for p in mass.values() if p > 0)


def label_entropy_realizable(model: DiscreteModel, gclass: GenerativeFunctionClass, n: int) -> float:
    """H(Y^n | X^n) for Y = g(X, W) with X independent of W.

    Given x^n the labels are a function of W through the distinct points T
    only, so H = sum_T P(set(X^n) = T) H(pattern of W on T); P(set(X^n) = T)
    comes from a subset dynamic program over draws.
    """
    if not model.x_independent:
        raise ValueError("subset recursion needs X independent of W")
    px = model.px[0]
    nx = model.nx
    if nx > 16:
        raise ValueError("subset recursion limited to 16 atoms")
    size = 1 << nx
    pT = np.zeros(size)
    for T in range(size):
        pT[T] = math.fsum(px[i] for i in range(nx) if T >> i & 1)
    f = np.zeros(size)
    f[0] = 1.0
    for _ in range(n):
        g = f * pT
        for i in range(nx):
            bit = 1 << i
            idx = np.arange(size)[(np.arange(size) & bit) != 0]
            g[idx] += f[idx ^ bit] * px[i]
        f = g
    return math.fsum(f[T] * _partition_entropy(gclass, model.prior, [i for i in range(nx) if T >> i & 1])
                     for T in range(size) if f[T] > 0)


def vc_entropy_check(model: DiscreteModel, gclass: GenerativeFunctionClass, n: int,
                     loss: Loss = ZERO_ONE, budget=None) -> list[BoundReport]:
    """[H(Y^n|X^n) <= d ln n + 1 (n >= 2), MER <= (b/ln2) H(Y^n|X^n)/n (n >= 1)]."""
    _realizable_or_raise(model, gclass, loss)
    d = vc_dimension(gclass)
    if model.x_independent and model.nx <= 16:
        h = label_entropy_realizable(model, gclass, n)
    else:
        h = info.cond_entropy_labels(model, n, budget)
    out = []
    if n >= 2:
        out.append(BoundReport("vc_entropy", "H(Y^n|X^n) <= d ln n + 1", n, h, d * math.log(n) + 1.0,
                               note=f"d={d}"))
    if n >= 1:
        lhs = mer(model, loss, n, budget).value
        out.append(BoundReport("vc_mer", "MER <= (b/ln2) H(Y^n|X^n)/n", n, lhs, _bound_b(loss) / LN2 * h / n,
                               note=f"d={d}"))
    return out


# ----------------------------------------------------------------------------
# posterior-deviation bounds


def pair_table(model: DiscreteModel, rowfn, first: str = "w_prime") -> np.ndarray:
    """(nx, K, K) table T[x, k, l] = D(K_{x,l}, K_{x,k}) for W = k, W' = l.

    ``first="w"`` swaps the arguments to D(K_{x,k}, K_{x,l}).
    """
    P = model.ky.transpose(1, 0, 2)
    Kw, Kwp = P[:, :, None, :], P[:, None, :, :]
    return rowfn(Kwp, Kw) if first == "w_prime" else rowfn(Kw, Kwp)


def expect_pairs(model: DiscreteModel, n: int, table: np.ndarray, budget=None) -> float:
    """E[T[X, W, W']] over the exact (W, W', X, Z^n) joint."""
    T = np.transpose(table, (1, 2, 0))[None]
    acc = ExactSum()
    for blk in iter_blocks(model, n, budget):
        acc.add(mul0(blk.J[:, :, None, :] * blk.post()[:, None, :, :], T))
    return acc.value


def bound_kl_posterior(model: DiscreteModel, n: int, budget=None) -> BoundReport:
    """MER_log <= E[KL(K_{Y|X,W} || K_{Y|X,W'})]."""
    lhs = mer(model, LOG, n, budget).value
    rhs = expect_pairs(model, n, pair_table(model, info.kl_rows, first="w"), budget)
    return BoundReport("kl_posterior", "MER_log <= E KL(K_{X,W} || K_{X,W'})", n, lhs, rhs)


def kernel_kappa(model: DiscreteModel) -> float:
    """min over reachable (x, w) and all y of K(y | x, w)."""
    pwx = model.prior[:, None] * model.px
    return float(model.ky[pwx > 0].min())


def check_entropy_tv_lemma(model: DiscreteModel) -> BoundReport:
    """Pointwise entropy/max-probability continuity in TV over all kernel pairs (worst case)."""
    P = model.ky.transpose(1, 0, 2)
    A, B = P[:, :, None, :], P[:, None, :, :]
    d = info.tv_rows(A, B)
    gap_max = B.max(-1) - A.max(-1) - d
    hA = -info.xlogx(A).sum(-1)
    hB = -info.xlogx(B).sum(-1)
    kb = B.min(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap_h = np.where(kb > 0, hA - hB + np.log(np.where(kb > 0, kb, 1.0)) * d, -np.inf)
    worst = max(float(gap_max.max()), float(gap_h.max()))
    return BoundReport("entropy_tv_lemma", "H(P)-H(Q) <= -ln(min Q) TV; max Q - max P <= TV", 0, worst, 0.0)


def bound_tv_classification(model: DiscreteModel, n: int, forms=("log", "zeroone"),
                            budget=None) -> list[BoundReport]:
    """Log form MER_log <= sup(-ln kappa) E TV and zero-one form MER_01 <= E TV."""
    etv = expect_pairs(model, n, pair_table(model, info.tv_rows), budget)
    out = []
    if "log" in forms:
        kappa = kernel_kappa(model)
        if kappa <= 0.0:
            raise ValueError("kernel minimum zero")
        out.append(BoundReport("tv_log", "MER_log <= sup(-ln kappa) E TV(K_{X,W'}, K_{X,W})", n,
                               mer(model, LOG, n, budget).value, -math.log(kappa) * etv))
    if "zeroone" in forms:
        out.append(BoundReport("tv_zeroone", "MER_01 <= E TV(K_{X,W'}, K_{X,W})", n,
                               mer(model, ZERO_ONE, n, budget).value, etv))
    return out


def _rows_for(kind: str, model: DiscreteModel):
    kind = kind.lower()
    if kind == info.TV:
        return info.tv_rows
    if kind == info.KL:
        return info.kl_rows
    if kind == info.CHISQ:
        return info.chisq_rows
    if kind == info.W2:
        yv = model.scalar_y()
        return lambda P, Q: info.w2sq_rows(yv, P, Q)
    raise ValueError(f"unknown distance kind {kind!r}")


def bound_posterior_deviation(model: DiscreteModel, n: int, kind: str = "tv", side: str = "first",
                              budget=None) -> BoundReport:
    """E D(P_{Y|X,Z^n}, K_{Y|X,W}) <= E D(K_{Y|X,W'}, K_{Y|X,W}) (side="first"),
    or the mirrored form with the predictive in the second argument.

    The W2 kind is evaluated as squared W2, which is jointly convex.
    """
    if side not in ("first", "second"):
        raise ValueError("side must be 'first' or 'second'")
    ensure_valid(model)
    rowfn = _rows_for(kind, model)
    acc = ExactSum()
    for blk in iter_blocks(model, n, budget):
        pred = blk.pred()[:, None, :, :]
        K = model.ky[None]
        d = rowfn(pred, K) if side == "first" else rowfn(K, pred)
        acc.add(mul0(blk.J, d))
    table = pair_table(model, rowfn, first="w_prime" if side == "first" else "w")
    rhs = expect_pairs(model, n, table, budget)
    name = "w2sq" if kind.lower() == info.W2 else kind.lower()
    return BoundReport(f"posterior_deviation_{name}_{side}", "E D(P_{X,Z^n}, K_{X,W}) <= E D(K_{X,W'}, K_{X,W})",
                       n, acc.value, rhs)


def bound_regression_w2(model: DiscreteModel, n: int, budget=None) -> BoundReport:
    """MER_2 <= 4 sqrt(E[Y^2] E W2^2(K_{Y|X,W'}, K_{Y|X,W})) for scalar Y."""
    yv = model.scalar_y()
    ey2 = math.fsum(np.ravel(model.prior[:, None, None] * model.px[:, :, None] * model.ky * yv ** 2))
    ew2 = expect_pairs(model, n, pair_table(model, lambda P, Q: info.w2sq_rows(yv, P, Q)), budget)
    lhs = mer(model, QUADRATIC, n, budget).value
    return BoundReport("regression_w2", "MER_2 <= 4 sqrt(E[Y^2] E W2^2(K_{X,W'}, K_{X,W}))", n, lhs,
                       4.0 * math.sqrt(ey2 * ew2))


def grad_bound_discrete(model: DiscreteModel, loss: Loss) -> float:
    """E_X[max over y, w != w' of |loss(y, Psi*(X,w')) - loss(y, Psi*(X,w))| / ||w' - w||].

    y ranges over the support of K(. | x, w) for the true atom w.
    """
    wv = model.w_values
    if wv is None:
        raise ValueError("a numeric embedding of W (w_values) is required")
    L = action_losses(model, loss)
    live = np.flatnonzero(model.prior > 0)
    dist = np.sqrt(((wv[:, None, :] - wv[None, :, :]) ** 2).sum(-1))
    px = model.px[0]
    G = np.zeros(model.nx)
    for x in range(model.nx):
        best = 0.0
        for k in live:
            ys = model.ky[k, x] > 0
            for l in live:
                if l == k:
                    continue
                diff = np.abs(L[l, x, ys] - L[k, x, ys])
                top = float(diff.max()) if diff.size else 0.0
                if top == 0.0:
                    continue
                best = max(best, math.inf if dist[k, l] == 0 else top / dist[k, l])
        G[x] = best
    return math.fsum(mul0(px, G))


def bound_lipschitz_psi(model: DiscreteModel, loss: Loss, n: int, grad_bound: float | None = None,
                        budget=None) -> BoundReport:
    """MER <= G sqrt(2 R_2(W | Z^n)) for X independent of W."""
    check_loss(model, loss)
    if not model.x_independent:
        raise ValueError("X depends on W; the Lipschitz bound needs X independent of W")
    G = grad_bound_discrete(model, loss) if grad_bound is None else float(grad_bound)
    r2 = mmse_w(model, n, budget, given_x=False)
    rhs = 0.0 if (G == 0.0 or r2 <= 0.0) else G * math.sqrt(2.0 * r2)
    return BoundReport("lipschitz_psi", "MER <= E sup|grad loss(y,Psi*(X,w))| sqrt(2 R_2(W|Z^n))", n,
                       mer(model, loss, n, budget).value, rhs, note=f"grad_bound={G!r}")


def bound_plug_in(model: DiscreteModel, loss: Loss, n: int, budget=None) -> BoundReport:
    """MER <= excess risk of the plug-in rule Psi*(X, W')."""
    r = mer(model, loss, n, budget)
    return BoundReport("plug_in", "MER <= E l(Y,Psi*(X,W')) - E l(Y,Psi*(X,W))", n, r.value,
                       plug_in_risk(model, loss, n, budget) - r.fundamental)


def bound_variance_continuity(p, q) -> list[BoundReport]:
    """|Var p - Var q| against its W2 bound and, for Gaussian q, two KL bounds."""
    mp, sp = info.moments(p)
    mq, sq = info.moments(q)
    lhs = abs((sp - mp * mp) - (sq - mq * mq))
    scale = 2.0 * (math.sqrt(sp) + math.sqrt(sq))
    out = [BoundReport("variance_w2", "|Var U - Var V| <= 2(sqrt E U^2 + sqrt E V^2) W2", 0, lhs,
                       scale * info.w2(p, q))]
    if isinstance(q, Gaussian):
        s2 = float(np.ravel(q.var)[0])
        d = math.inf if isinstance(p, FiniteDist) else info.distance("kl", p, q)
        out.append(BoundReport("variance_talagrand", "|Var U - Var V| <= 2(...) sqrt(2 s2 KL)", 0, lhs,
                               scale * math.sqrt(2 * s2 * d)))
        out.append(BoundReport("variance_kl", "|Var U - Var V| <= 2 s2 (sqrt KL + KL)", 0, lhs,
                               2 * s2 * (math.sqrt(d) + d)))
    return out


# ----------------------------------------------------------------------------
# full battery


def absolute_table(model: DiscreteModel) -> BoundedTableLoss:
    """Bounded table loss |y - a| over the scalar Y embedding, actions = Y atoms."""
    yv = model.scalar_y()
    t = np.abs(yv[:, None] - yv[None, :])
    return BoundedTableLoss(t, float(max(t.max(), 1e-12)))


def default_losses(model: DiscreteModel) -> list[Loss]:
    losses = [LOG, ZERO_ONE]
    if model.y_values is not None:
        losses += [QUADRATIC]
        if model.y_values.shape[1] == 1:
            losses.append(absolute_table(model))
    return losses


def battery_shared(model: DiscreteModel, n: int, budget=None) -> list[BoundReport]:
    """Bounds that do not depend on a user-chosen loss."""
    ensure_valid(model)
    out: list[BoundReport] = []
    scalar = model.y_values is not None and model.y_values.shape[1] == 1
    if model.y_values is not None:
        out.append(bound_quadratic_mi(model, n, budget))
    out += bound_zeroone(model, n, budget)
    out.append(bound_kl_posterior(model, n, budget))
    forms = ("log", "zeroone") if kernel_kappa(model) > 0 else ("zeroone",)
    out += bound_tv_classification(model, n, forms, budget)
    out.append(check_entropy_tv_lemma(model))
    kinds = ["tv", "kl", "chisq"] + (["w2"] if scalar else [])
    for kind in kinds:
        for side in ("first", "second"):
            out.append(bound_posterior_deviation(model, n, kind, side, budget))
    if scalar:
        out.append(bound_regression_w2(model, n, budget))
    return out


def battery_loss(model: DiscreteModel, loss: Loss, n: int, budget=None) -> list[BoundReport]:
    """Bounds evaluated for one loss."""
    ensure_valid(model, loss)
    out = [bound_plug_in(model, loss, n, budget)]
    try:
        a, b = _loss_range(model, loss)
    except ValueError:
        a = b = None
    if b is not None:
        out += bound_subgaussian(model, loss, n, budget=budget)
        out.append(bound_general_phi(model, loss, n, CgfEnvelope.subgaussian((b - a) ** 2 / 4), budget))
    if model.x_independent and model.w_values is not None:
        out.append(bound_lipschitz_psi(model, loss, n, budget=budget))
    for kind in ("value_of_information", "data_growth", "total_evidence", "randomized"):
        try:
            out.append(dpi_check(model, loss, kind, n=n, budget=budget))
        except ExceedsEnumerationBudget:
            pass
    if model.ny >= 2 and isinstance(loss, (ZeroOneLoss, BoundedTableLoss)):
        g = _deterministic_class(model)
        if g is not None:
            out += bound_realizable(model, g, loss, n, budget)
    return out


def battery(model: DiscreteModel, n: int, losses=None, budget=None) -> list[BoundReport]:
    """Every bound that applies to ``model`` at sample size n."""
    out = battery_shared(model, n, budget)
    for loss in (default_losses(model) if losses is None else losses):
        out += battery_loss(model, loss, n, budget)
    return out


def _deterministic_class(model: DiscreteModel) -> GenerativeFunctionClass | None:
    """The generative function when every reachable kernel row is a point mass."""
    pwx = model.prior[:, None] * model.px
    rows = model.ky[pwx > 0]
    if not np.all(rows.max(axis=-1) == 1.0):
        return None
    return GenerativeFunctionClass(np.argmax(model.ky, axis=-1).T, binary=model.ny == 2)
