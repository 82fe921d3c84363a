"""Exact Bayes envelopes, Bayes risks, fundamental limits and MER on finite models.

Everything here enumerates z^n in lexicographic order (first pair most
significant, pair atom ``a = x*ny + y``) in fixed-size blocks. Each block sum is
exactly rounded by ``math.fsum`` and the block sums are combined the same way,
so totals do not depend on the block size beyond a final rounding.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from merlab import _backend
from merlab.core import (BoundedTableLoss, DataSequence, DiscreteModel, FiniteDist, LogLoss,
                         Loss, QuadraticLoss, ZeroOneLoss, ensure_valid)
from merlab.report import BoundReport

DEFAULT_BUDGET = 10 ** 7
BLOCK = 2048


class ExceedsEnumerationBudget(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"enumeration needs {required} joint atoms; budget is {budget}")
        self.required = required
        self.budget = budget


class ImpossibleDataError(ValueError):
    """The data has probability zero under every parameter atom."""


@dataclass(frozen=True)
class EnumerationBudget:
    max_atoms: int = DEFAULT_BUDGET

    def __post_init__(self):
        if int(self.max_atoms) <= 0:
            raise ValueError("budget must be positive")


def resolve_budget(budget=None) -> int:
    """Explicit budget, else ``MERLAB_BUDGET``, else the default."""
    if budget is None:
        env = os.environ.get("MERLAB_BUDGET")
        return int(env) if env else DEFAULT_BUDGET
    if isinstance(budget, EnumerationBudget):
        return int(budget.max_atoms)
    return int(budget)


def required_atoms(model: DiscreteModel, n: int) -> int:
    return model.n_pairs ** n * model.nx


def check_budget(required: int, budget=None) -> None:
    b = resolve_budget(budget)
    if required > b:
        raise ExceedsEnumerationBudget(required, b)


# ----------------------------------------------------------------------------
# numerics


class ExactSum:
    """Accumulate arrays blockwise; each block and the total are fsum-rounded."""

    __slots__ = ("_parts", "_pinf", "_ninf")

    def __init__(self):
        self._parts: list[float] = []
        self._pinf = False
        self._ninf = False

    def add(self, a) -> None:
        a = np.ravel(np.asarray(a, dtype=np.float64))
        if a.size == 0:
            return
        fin = np.isfinite(a)
        if not fin.all():
            if np.isnan(a).any():
                raise FloatingPointError("nan in accumulated quantity")
            self._pinf |= bool(np.any(a == np.inf))
            self._ninf |= bool(np.any(a == -np.inf))
            a = a[fin]
        self._parts.append(math.fsum(a))

    @property
    def value(self) -> float:
        if self._pinf and self._ninf:
            return math.nan
        if self._pinf:
            return math.inf
        if self._ninf:
            return -math.inf
        return math.fsum(self._parts)


def xlogx(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    m = p > 0
    out[m] = p[m] * np.log(p[m])
    return out


def mul0(a, b) -> np.ndarray:
    """Elementwise product with 0 * anything = 0 (so 0 * inf = 0)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    out = np.zeros(a.shape)
    m = a != 0
    out[m] = a[m] * b[m]
    return out


def div0(a, b) -> np.ndarray:
    """a / b where b > 0, else 0 (conditionals on null events)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    out = np.zeros(a.shape)
    np.divide(a, b, out=out, where=b > 0)
    return out


def entropy_sum(p) -> float:
    """-sum p ln p over all entries, 0 ln 0 = 0."""
    return -math.fsum(np.ravel(xlogx(p)))


# ----------------------------------------------------------------------------
# enumeration


@dataclass
class Block:
    """One block of consecutive z^n sequences starting at index ``start``."""
    start: int
    V: np.ndarray  # (B, K) P(w, z^n)
    J: np.ndarray  # (B, K, nx) P(w, z^n, x)
    D: np.ndarray  # (B, nx) P(z^n, x)
    N: np.ndarray  # (B, nx, ny) P(z^n, x, y)

    def pred(self) -> np.ndarray:
        """(B, nx, ny) posterior predictive P(y | x, z^n); zero rows on null cells."""
        return div0(self.N, self.D[:, :, None])

    def post(self) -> np.ndarray:
        """(B, K, nx) posterior P(w | x, z^n); zero on null cells."""
        return div0(self.J, self.D[:, None, :])


def seq_weight_blocks(prior: np.ndarray, lik: np.ndarray, n: int,
                      block: int = BLOCK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start, P(w, s)) over all sequences s of length n; lik is (K, A)."""
    prior = np.ascontiguousarray(prior, dtype=np.float64)
    lik_t = np.ascontiguousarray(np.asarray(lik, dtype=np.float64).T)
    total = lik_t.shape[0] ** n
    for start in range(0, total, block):
        cnt = min(block, total - start)
        yield start, _backend.seq_weights(prior, lik_t, n, start, cnt)


def iter_blocks(model: DiscreteModel, n: int, budget=None, block: int = BLOCK) -> Iterator[Block]:
    if n < 0:
        raise ValueError("n must be nonnegative")
    check_budget(required_atoms(model, n), budget)
    px, ky = model.px, model.ky
    for start, V in seq_weight_blocks(model.prior, model.pair_lik(), n, block):
        J = V[:, :, None] * px[None, :, :]
        D = J.sum(axis=1)
        N = np.einsum("bkx,kxy->bxy", J, ky)
        yield Block(start, V, J, D, N)


def decode_sequence(model: DiscreteModel, n: int, index: int) -> DataSequence:
    """The z^n with lexicographic position ``index``, as labels."""
    A = model.n_pairs
    digits = []
    for _ in range(n):
        index, a = divmod(index, A)
        digits.append(a)
    digits.reverse()
    return DataSequence(tuple((model.x_labels[a // model.ny], model.y_labels[a % model.ny])
                              for a in digits))


# ----------------------------------------------------------------------------
# envelopes and actions


def check_loss(model: DiscreteModel, loss: Loss) -> None:
    ensure_valid(model, loss)
    if not isinstance(loss, (LogLoss, QuadraticLoss, ZeroOneLoss, BoundedTableLoss)):
        raise TypeError(f"unknown loss {loss!r}")


def envelope(p: np.ndarray, loss: Loss, y_values: np.ndarray | None = None) -> np.ndarray:
    """Bayes envelope along the last axis of ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if isinstance(loss, LogLoss):
        return -xlogx(p).sum(axis=-1)
    if isinstance(loss, QuadraticLoss):
        if y_values is None:
            raise ValueError("quadratic loss needs a numeric embedding of Y")
        yv = np.asarray(y_values, dtype=np.float64)
        if yv.ndim == 1:
            yv = yv[:, None]
        m = p @ yv
        d2 = ((yv - m[..., None, :]) ** 2).sum(axis=-1)
        return (p * d2).sum(axis=-1)
    if isinstance(loss, ZeroOneLoss):
        return 1.0 - p.max(axis=-1)
    if isinstance(loss, BoundedTableLoss):
        return (p @ loss.table).min(axis=-1)
    raise TypeError(f"unknown loss {loss!r}")


def optimal_actions(p: np.ndarray, loss: Loss, y_values: np.ndarray | None = None) -> np.ndarray:
    """Bayes actions along the last axis; argmax/argmin ties go to the lowest index."""
    p = np.asarray(p, dtype=np.float64)
    if isinstance(loss, LogLoss):
        return p.copy()
    if isinstance(loss, QuadraticLoss):
        yv = np.asarray(y_values, dtype=np.float64)
        if yv.ndim == 1:
            yv = yv[:, None]
        return p @ yv
    if isinstance(loss, ZeroOneLoss):
        return np.argmax(p, axis=-1)
    if isinstance(loss, BoundedTableLoss):
        return np.argmin(p @ loss.table, axis=-1)
    raise TypeError(f"unknown loss {loss!r}")


def action_losses(model: DiscreteModel, loss: Loss) -> np.ndarray:
    """(K, nx, ny) table of loss(y, Psi*(x, w)) for the omniscient rule Psi*."""
    ky = model.ky
    act = optimal_actions(ky, loss, model.y_values)
    if isinstance(loss, LogLoss):
        with np.errstate(divide="ignore"):
            return -np.log(ky)
    if isinstance(loss, QuadraticLoss):
        yv = model.y_values
        return ((yv[None, None, :, :] - act[:, :, None, :]) ** 2).sum(axis=-1)
    if isinstance(loss, ZeroOneLoss):
        return (np.arange(model.ny)[None, None, :] != act[:, :, None]).astype(np.float64)
    return loss.table.T[act]


def action_labels(model: DiscreteModel, loss: Loss) -> np.ndarray:
    """(nx, K) class id of Psi*(x, w) among the parameter atoms at each x.

    Atoms whose actions are exactly equal share an id, so these labels define
    the pushforward variable Psi*(X, W).
    """
    act = optimal_actions(model.ky, loss, model.y_values)
    act = act.reshape(model.K, model.nx, -1)
    labels = np.zeros((model.nx, model.K), dtype=np.int64)
    for x in range(model.nx):
        seen: dict = {}
        for k in range(model.K):
            labels[x, k] = seen.setdefault(act[k, x].tobytes(), len(seen))
    return labels


def bayes_envelope(dist, loss: Loss, y_values=None):
    """(risk, optimal action) for one distribution over Y.

    Log: (entropy, dist); Quadratic: (variance, mean); ZeroOne: (1 - max, mode
    label); BoundedTable: (minimum expected loss, action index).
    """
    if isinstance(dist, FiniteDist):
        p, support = dist.probs, dist.support
    else:
        p = np.asarray(dist, dtype=np.float64)
        support = tuple(range(p.size))
        dist = FiniteDist(support, p)
    if isinstance(loss, QuadraticLoss) and y_values is None:
        try:
            y_values = np.asarray(support, dtype=np.float64)
        except (TypeError, ValueError):
            raise ValueError("quadratic loss needs a numeric embedding of Y") from None
    if isinstance(loss, BoundedTableLoss) and loss.table.shape[0] != p.size:
        raise ValueError("loss table rows do not match the support")
    if isinstance(loss, LogLoss):
        return entropy_sum(p), dist
    risk = float(envelope(p, loss, y_values))
    act = optimal_actions(p, loss, y_values)
    if isinstance(loss, QuadraticLoss):
        return risk, (float(act[0]) if act.size == 1 else act)
    if isinstance(loss, ZeroOneLoss):
        return risk, support[int(act)]
    return risk, int(act)


# ----------------------------------------------------------------------------
# posteriors


def _likelihood(model: DiscreteModel, x, z: DataSequence) -> np.ndarray:
    xi, yi = z.indices(model)
    w = np.array(model.prior, dtype=np.float64)
    for a, b in zip(xi, yi):
        w = w * (model.px[:, a] * model.ky[:, a, b])
    if x is not None:
        w = w * model.px[:, model.x_index(x)]
    return w


def posterior_w(model: DiscreteModel, x, z: DataSequence) -> FiniteDist:
    """P(W | x, z^n); pass ``x=None`` for P(W | z^n)."""
    ensure_valid(model)
    w = _likelihood(model, x, z)
    total = math.fsum(w)
    if total <= 0.0:
        raise ImpossibleDataError("data has zero likelihood under every parameter atom")
    return FiniteDist(model.w_labels, w / total)


def posterior_predictive(model: DiscreteModel, x, z: DataSequence) -> FiniteDist:
    """P(Y | x, z^n) = sum_w P(w | x, z^n) K(. | x, w)."""
    post = posterior_w(model, x, z).probs
    pred = post @ model.ky[:, model.x_index(x), :]
    return FiniteDist(model.y_labels, pred)


# ----------------------------------------------------------------------------
# risks


@dataclass(frozen=True, eq=False)
class RiskValue:
    value: float
    loss: str
    n: int | None = None
    bayes_risk: float | None = None
    fundamental: float | None = None
    rule: np.ndarray | None = field(default=None, repr=False)

    def __float__(self) -> float:
        return float(self.value)


def bayes_risk_data(model: DiscreteModel, loss: Loss, n: int, budget=None) -> RiskValue:
    """R(Y | X, Z^n) = sum over (z^n, x) of P(z^n, x) times the envelope of P(Y | x, z^n)."""
    check_loss(model, loss)
    acc = ExactSum()
    for blk in iter_blocks(model, n, budget):
        acc.add(mul0(blk.D, envelope(blk.pred(), loss, model.y_values)))
    return RiskValue(acc.value, loss.tag, n)


def fundamental_limit(model: DiscreteModel, loss: Loss) -> RiskValue:
    """R(Y | X, W), with the omniscient rule Psi* as a (K, nx, ...) action table."""
    check_loss(model, loss)
    pwx = model.prior[:, None] * model.px
    env = envelope(model.ky, loss, model.y_values)
    value = math.fsum(np.ravel(mul0(pwx, env)))
    rule = optimal_actions(model.ky, loss, model.y_values)
    return RiskValue(value, loss.tag, None, rule=rule)


def mer(model: DiscreteModel, loss: Loss, n: int, budget=None) -> RiskValue:
    """Minimum excess risk R(Y | X, Z^n) - R(Y | X, W), with both addends."""
    br = bayes_risk_data(model, loss, n, budget).value
    fl = fundamental_limit(model, loss).value
    return RiskValue(br - fl, loss.tag, n, bayes_risk=br, fundamental=fl)


def plug_in_risk(model: DiscreteModel, loss: Loss, n: int, budget=None) -> float:
    """E[loss(Y, Psi*(X, W'))] with W' an independent posterior draw given (X, Z^n)."""
    check_loss(model, loss)
    L = action_losses(model, loss)
    acc = ExactSum()
    for blk in iter_blocks(model, n, budget):
        T = mul0(blk.pred()[:, None, :, :], L[None]).sum(axis=-1)
        acc.add(mul0(blk.J, T))
    return acc.value


def plug_in_excess(model: DiscreteModel, loss: Loss, n: int, budget=None) -> float:
    """Excess risk of the plug-in rule Psi*(X, W'); never below the MER."""
    return plug_in_risk(model, loss, n, budget) - fundamental_limit(model, loss).value


def _w_embedding(model: DiscreteModel) -> np.ndarray:
    if model.w_values is None:
        raise ValueError("a numeric embedding of W (w_values) is required")
    return model.w_values


def posterior_error(model: DiscreteModel, n: int, budget=None) -> tuple[float, float]:
    """(E||W - W'||^2, 2 R_2(W | X, Z^n)) computed along separate paths.

    The first sums squared distances over (W, W') pairs under the exact joint;
    the second sums posterior variances.
    """
    ensure_valid(model)
    wv = _w_embedding(model)
    d2 = ((wv[:, None, :] - wv[None, :, :]) ** 2).sum(axis=-1)
    esq, r2 = ExactSum(), ExactSum()
    for blk in iter_blocks(model, n, budget):
        post = blk.post()
        esq.add(np.einsum("bkx,kl,blx->bx", blk.J, d2, post))
        m = np.einsum("bkx,kq->bxq", post, wv)
        var = np.einsum("bkx,bkx->bx", post, ((wv[None, :, None, :] - m[:, None, :, :]) ** 2).sum(-1))
        r2.add(2.0 * blk.D * var)
    return esq.value, r2.value


def mmse_w(model: DiscreteModel, n: int, budget=None, given_x: bool = True) -> float:
    """R_2(W | X, Z^n), or R_2(W | Z^n) with ``given_x=False``."""
    ensure_valid(model)
    wv = _w_embedding(model)
    acc = ExactSum()
    if given_x:
        for blk in iter_blocks(model, n, budget):
            post = blk.post()
            m = np.einsum("bkx,kq->bxq", post, wv)
            var = np.einsum("bkx,bkx->bx", post, ((wv[None, :, None, :] - m[:, None, :, :]) ** 2).sum(-1))
            acc.add(blk.D * var)
        return acc.value
    check_budget(model.n_pairs ** n, budget)
    for _, V in seq_weight_blocks(model.prior, model.pair_lik(), n):
        ps = V.sum(axis=1)
        post = div0(V, ps[:, None])
        m = post @ wv
        var = (post * ((wv[None, :, :] - m[:, None, :]) ** 2).sum(-1)).sum(-1)
        acc.add(ps * var)
    return acc.value


# ----------------------------------------------------------------------------
# data processing for Bayes risk


@dataclass(frozen=True, eq=False)
class MarkovTriple:
    """Finite joint ``p[u, v, y]`` claimed to satisfy U - V - Y."""
    p: np.ndarray
    kind: str = "custom"


def _joint_sxy(model: DiscreteModel, n: int, budget=None) -> np.ndarray:
    """Dense P(z^n, x, y) with row index s*nx + x."""
    return np.concatenate([blk.N.reshape(-1, model.ny) for blk in iter_blocks(model, n, budget)])


def markov_triple(model: DiscreteModel, kind: str, n: int = 0, t: float = 0.5,
                  budget=None) -> MarkovTriple:
    """Build U - V - Y from the model.

    value_of_information: U constant, V = (X, Z^n).
    data_growth: U = (X, Z^n), V = (X, Z^{n+1}).
    total_evidence: U = (X, Z^n), V = (W, X, Z^n).
    randomized: V = (X, Z^n), U = (T, V) with T ~ Bern(t) independent.
    """
    ensure_valid(model)
    ny, nx, A = model.ny, model.nx, model.n_pairs
    if kind == "value_of_information":
        pv = _joint_sxy(model, n, budget)
        p = pv[None, :, :]
    elif kind == "data_growth":
        pv = _joint_sxy(model, n + 1, budget)
        nv = pv.shape[0]
        check_budget(nv * (nv // A) * ny, budget)
        v = np.arange(nv)
        u = (v // nx) // A * nx + v % nx
        p = np.zeros((nv // A, nv, ny))
        p[u, v, :] = pv
    elif kind == "total_evidence":
        rows = []
        for blk in iter_blocks(model, n, budget):
            # (B, K, nx, ny) -> rows ordered (s, x, w)
            pw = blk.J[:, :, :, None] * model.ky[None]
            rows.append(np.transpose(pw, (0, 2, 1, 3)).reshape(-1, ny))
        pv = np.concatenate(rows)
        nv = pv.shape[0]
        check_budget(nv * (nv // model.K) * ny, budget)
        v = np.arange(nv)
        p = np.zeros((nv // model.K, nv, ny))
        p[v // model.K, v, :] = pv
    elif kind == "randomized":
        pv = _joint_sxy(model, n, budget)
        nv = pv.shape[0]
        check_budget(2 * nv * nv * ny, budget)
        p = np.zeros((2 * nv, nv, ny))
        v = np.arange(nv)
        p[v, v, :] = (1.0 - t) * pv
        p[nv + v, v, :] = t * pv
    else:
        raise ValueError(f"unknown Markov triple kind {kind!r}")
    return MarkovTriple(p, kind)


def bayes_risk_joint(p_vy: np.ndarray, loss: Loss, y_values=None) -> float:
    """R(Y | V) for a dense joint ``p_vy[v, y]``."""
    pv = p_vy.sum(axis=1)
    cond = div0(p_vy, pv[:, None])
    return math.fsum(np.ravel(mul0(pv, envelope(cond, loss, y_values))))


def dpi_check(model: DiscreteModel, loss: Loss, triple, n: int = 0, t: float = 0.5,
              budget=None) -> BoundReport:
    """Verify R(Y | V) <= R(Y | U) on a Markov chain U - V - Y."""
    check_loss(model, loss)
    if isinstance(triple, str):
        triple = markov_triple(model, triple, n=n, t=t, budget=budget)
    p = np.asarray(triple.p, dtype=np.float64)
    puv = p.sum(axis=2)
    pvy = p.sum(axis=0)
    pv = pvy.sum(axis=1)
    gap = np.max(np.abs(p * pv[None, :, None] - puv[:, :, None] * pvy[None, :, :]))
    if gap > 1e-12:
        raise ValueError(f"supplied joint is not Markov U - V - Y (gap {gap:.3g})")
    r_u = bayes_risk_joint(p.sum(axis=1), loss, model.y_values)
    r_v = bayes_risk_joint(pvy, loss, model.y_values)
    return BoundReport(f"dpi_{triple.kind}", "R(Y|V) <= R(Y|U) when U - V - Y", n, r_v, r_u)
