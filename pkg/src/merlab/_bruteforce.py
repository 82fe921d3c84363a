"""Slow, independent reference oracle on plain Python floats.

Shares nothing with the vectorized engine beyond the model arrays: sequences
come from ``itertools.product``, joints live in dicts, and every sum is an
``fsum``. Tests compare the two routes.
"""
from __future__ import annotations

import math
from collections import defaultdict
from itertools import product

from merlab.core import BoundedTableLoss, DiscreteModel, LogLoss, QuadraticLoss, ZeroOneLoss


def _pairs(model):
    return [(x, y) for x in range(model.nx) for y in range(model.ny)]


def joint_table(model: DiscreteModel, n: int) -> dict:
    """{(k, z^n, x, y): probability} over all atoms with positive mass."""
    prior = [float(v) for v in model.prior]
    px = model.px.tolist()
    ky = model.ky.tolist()
    out = {}
    for k in range(model.K):
        if prior[k] == 0.0:
            continue
        for zs in product(_pairs(model), repeat=n):
            pz = prior[k]
            for x, y in zs:
                pz *= px[k][x] * ky[k][x][y]
            if pz == 0.0:
                continue
            for x in range(model.nx):
                for y in range(model.ny):
                    p = pz * px[k][x] * ky[k][x][y]
                    if p > 0.0:
                        out[(k, zs, x, y)] = p
    return out


def marginal(table: dict, key) -> dict:
    acc = defaultdict(list)
    for atom, p in table.items():
        acc[key(atom)].append(p)
    return {k: math.fsum(v) for k, v in acc.items()}


def entropy(table: dict) -> float:
    return -math.fsum(p * math.log(p) for p in table.values() if p > 0.0)


def envelope(cond: list[float], loss, y_values=None) -> float:
    if isinstance(loss, LogLoss):
        return -math.fsum(p * math.log(p) for p in cond if p > 0.0)
    if isinstance(loss, ZeroOneLoss):
        return 1.0 - max(cond)
    if isinstance(loss, QuadraticLoss):
        q = len(y_values[0])
        mean = [math.fsum(p * yv[j] for p, yv in zip(cond, y_values)) for j in range(q)]
        return math.fsum(p * math.fsum((yv[j] - mean[j]) ** 2 for j in range(q))
                         for p, yv in zip(cond, y_values))
    if isinstance(loss, BoundedTableLoss):
        tab = loss.table.tolist()
        return min(math.fsum(p * tab[y][a] for y, p in enumerate(cond))
                   for a in range(len(tab[0])))
    raise TypeError(loss)


def _risk(groups: dict, loss, model) -> float:
    yv = None if model.y_values is None else model.y_values.tolist()
    terms = []
    for ys in groups.values():
        tot = math.fsum(ys)
        if tot > 0.0:
            terms.append(tot * envelope([p / tot for p in ys], loss, yv))
    return math.fsum(terms)


def _group(table: dict, key, ny) -> dict:
    groups: dict = {}
    for (k, zs, x, y), p in table.items():
        row = groups.setdefault(key(k, zs, x), [0.0] * ny)
        row[y] += p
    return groups


def bayes_risk(model: DiscreteModel, loss, n: int) -> float:
    t = joint_table(model, n)
    return _risk(_group(t, lambda k, zs, x: (zs, x), model.ny), loss, model)


def fundamental(model: DiscreteModel, loss) -> float:
    t = joint_table(model, 0)
    return _risk(_group(t, lambda k, zs, x: (k, x), model.ny), loss, model)


def mer(model: DiscreteModel, loss, n: int) -> float:
    return bayes_risk(model, loss, n) - fundamental(model, loss)


def cmi_wy(model: DiscreteModel, n: int) -> float:
    """I(W; Y | X, Z^n) as H(W,X,S) + H(Y,X,S) - H(X,S) - H(W,Y,X,S)."""
    t = joint_table(model, n)
    h = lambda key: entropy(marginal(t, key))
    return (h(lambda a: (a[0], a[1], a[2])) + h(lambda a: (a[1], a[2], a[3]))
            - h(lambda a: (a[1], a[2])) - entropy(t))


def info_chain(model: DiscreteModel, n: int) -> tuple[float, float, float]:
    """(I(W;Y|X,Z^n), I(W;Y^n|X^n)/n, I(W;Z^n)/n) from the n-sample joint."""
    t = joint_table(model, n)
    tz = marginal(t, lambda a: (a[0], a[1]))
    h = lambda key: entropy(marginal(tz, key))
    xs = lambda zs: tuple(x for x, _ in zs)
    hwz = entropy(tz)
    i_z = h(lambda a: a[0]) + h(lambda a: a[1]) - hwz
    i_yx = (h(lambda a: (a[0], xs(a[1]))) + h(lambda a: a[1])
            - h(lambda a: xs(a[1])) - hwz)
    return cmi_wy(model, n), i_yx / n, i_z / n


def posterior_error(model: DiscreteModel, n: int) -> tuple[float, float]:
    """(E||W - W'||^2, 2 E Var(W | X, Z^n)) by explicit pairs."""
    wv = model.w_values.tolist()
    t = joint_table(model, n)
    cells = defaultdict(lambda: defaultdict(float))
    for (k, zs, x, y), p in t.items():
        cells[(zs, x)][k] += p
    e2, r2 = [], []
    for ws in cells.values():
        tot = math.fsum(ws.values())
        post = {k: p / tot for k, p in ws.items()}
        for k, p in ws.items():
            for l, q in post.items():
                e2.append(p * q * math.fsum((a - b) ** 2 for a, b in zip(wv[k], wv[l])))
        mean = [math.fsum(q * wv[l][j] for l, q in post.items()) for j in range(len(wv[0]))]
        var = math.fsum(q * math.fsum((wv[l][j] - mean[j]) ** 2 for j in range(len(mean)))
                        for l, q in post.items())
        r2.append(2.0 * tot * var)
    return math.fsum(e2), math.fsum(r2)
