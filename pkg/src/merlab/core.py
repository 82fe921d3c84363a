"""Domain types shared by every module.

Finite distributions, discrete generative models ``P_W * prod P_{Z_i|W} * P_{Z|W}``
with ``P_{Z|W} = P_{X|W} K_{Y|X,W}``, the four loss regimes, data sequences and
seeded random streams.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, ClassVar, Mapping, NamedTuple, Sequence, Union

import numpy as np

NORM_TOL = 1e-12
RENORM_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _parse_prob(v: Any) -> float:
    """Accept floats, ints, or decimal/fraction strings such as "0.3" or "1/3"."""
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    return float(v)


class FiniteDist:
    """Probability vector over an ordered, labeled finite support."""

    __slots__ = ("support", "probs", "_index")

    def __init__(self, support: Sequence, probs: Sequence[float]):
        support = tuple(support)
        p = np.array([_parse_prob(v) for v in np.ravel(np.asarray(probs, dtype=object))],
                     dtype=np.float64)
        if len(support) != p.size:
            raise ValueError("support and probs differ in length")
        if len(set(support)) != len(support):
            raise ValueError("support labels are not distinct")
        if p.size == 0:
            raise ValueError("empty support")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        total = math.fsum(p)
        drift = abs(total - 1.0)
        if drift > RENORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        if drift > NORM_TOL:
            p = p / total
        self.support = support
        self.probs = _frozen(p)
        self._index = {lab: i for i, lab in enumerate(support)}

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "FiniteDist":
        return cls(list(mapping.keys()), list(mapping.values()))

    @classmethod
    def bernoulli(cls, p: float) -> "FiniteDist":
        return cls((0, 1), (1.0 - p, p))

    @classmethod
    def point_mass(cls, label, support: Sequence | None = None) -> "FiniteDist":
        support = tuple(support) if support is not None else (label,)
        return cls(support, [1.0 if s == label else 0.0 for s in support])

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"{label!r} is not in the support") from None

    def prob(self, label) -> float:
        i = self._index.get(label)
        return 0.0 if i is None else float(self.probs[i])

    def __len__(self) -> int:
        return len(self.support)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteDist):
            return NotImplemented
        return self.support == other.support and np.array_equal(self.probs, other.probs)

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(f"{s!r}: {p:.6g}" for s, p in zip(self.support, self.probs))
        return f"FiniteDist({{{body}}})"


# ----------------------------------------------------------------------------
# Losses


@dataclass(frozen=True)
class LogLoss:
    """Actions are distributions over Y; loss is -ln q(y)."""
    tag: ClassVar[str] = "log"


@dataclass(frozen=True)
class QuadraticLoss:
    """Actions are reals or real vectors; needs a numeric embedding of Y."""
    tag: ClassVar[str] = "quadratic"


@dataclass(frozen=True)
class ZeroOneLoss:
    """Actions are Y atoms."""
    tag: ClassVar[str] = "zeroone"


@dataclass(frozen=True, eq=False)
class BoundedTableLoss:
    """Explicit matrix ``table[y, a]`` with entries in ``[0, b]``."""
    table: np.ndarray
    b: float
    tag: ClassVar[str] = "table"

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2 or t.size == 0:
            raise ValueError("loss table must be a non-empty matrix")
        b = float(self.b)
        if not b > 0:
            raise ValueError("loss range bound b must be positive")
        if np.any(t < 0) or np.any(t > b) or not np.all(np.isfinite(t)):
            raise ValueError("loss table entries must lie in [0, b]")
        object.__setattr__(self, "table", _frozen(t))
        object.__setattr__(self, "b", b)

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def scaled(self, factor: float) -> "BoundedTableLoss":
        return BoundedTableLoss(self.table * factor, self.b * factor)


Loss = Union[LogLoss, QuadraticLoss, ZeroOneLoss, BoundedTableLoss]

LOG = LogLoss()
QUADRATIC = QuadraticLoss()
ZERO_ONE = ZeroOneLoss()
LOSSES = {"log": LOG, "quadratic": QUADRATIC, "zeroone": ZERO_ONE}


def loss_from_name(name: str, table=None, b=None) -> Loss:
    if name == "table":
        if table is None or b is None:
            raise ValueError("table loss needs 'table' and 'b'")
        return BoundedTableLoss(np.asarray(table, dtype=float), b)
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}") from None


def loss_eval(loss: Loss, y, a) -> float:
    """Evaluate ``loss(y, a)``.

    Log takes a FiniteDist action and a Y label; Quadratic takes numeric y and
    a; ZeroOne compares labels; BoundedTable takes integer row and column.
    """
    if isinstance(loss, LogLoss):
        if not isinstance(a, FiniteDist):
            raise TypeError("log loss needs a FiniteDist action")
        q = a.prob(y)
        return math.inf if q <= 0.0 else -math.log(q)
    if isinstance(a, FiniteDist):
        raise TypeError(f"{loss.tag} loss does not take a distribution action")
    if isinstance(loss, QuadraticLoss):
        d = np.asarray(y, dtype=float) - np.asarray(a, dtype=float)
        return float(np.sum(d * d))
    if isinstance(loss, ZeroOneLoss):
        return 0.0 if y == a else 1.0
    if isinstance(loss, BoundedTableLoss):
        if not (isinstance(y, (int, np.integer)) and isinstance(a, (int, np.integer))):
            raise TypeError("table loss needs integer row and action indices")
        return float(loss.table[y, a])
    raise TypeError(f"unknown loss {loss!r}")


# ----------------------------------------------------------------------------
# Models


@dataclass(frozen=True)
class Verdict:
    ok: bool
    message: str = "ok"
    location: tuple | None = None

    def __bool__(self) -> bool:
        return self.ok


class InvalidModelError(ValueError):
    def __init__(self, verdict: Verdict):
        super().__init__(f"{verdict.message} at {verdict.location}")
        self.verdict = verdict


def _renorm_rows(a: np.ndarray) -> np.ndarray:
    """Renormalize rows whose sum drifts from 1 by at most RENORM_TOL."""
    a = np.array(a, dtype=np.float64)
    s = a.sum(axis=-1, keepdims=True)
    drift = np.abs(s - 1.0)
    fix = (drift > NORM_TOL) & (drift <= RENORM_TOL) & (s > 0)
    return np.where(fix, a / np.where(s > 0, s, 1.0), a)


class DiscreteModel:
    """Finite generative model.

    prior: (K,) over parameter atoms; x_law: (nx,) shared or (K, nx);
    y_kernel: (K, nx, ny). ``y_values`` (ny,) or (ny, p) embeds Y numerically;
    ``w_values`` (K,) or (K, q) embeds W. The constructor only checks shapes and
    fixes tiny drift; use :func:`validate_model` for the full verdict.
    """

    def __init__(self, prior, x_law, y_kernel, *, y_values=None, w_values=None,
                 w_labels=None, x_labels=None, y_labels=None):
        prior = _renorm_rows(np.asarray(prior, dtype=float).ravel())
        K = prior.shape[0]
        px = np.asarray(x_law, dtype=float)
        if px.ndim == 1:
            px = np.broadcast_to(px, (K, px.shape[0]))
        if px.ndim != 2 or px.shape[0] != K:
            raise ValueError("x_law must be (nx,) or (K, nx)")
        ky = np.asarray(y_kernel, dtype=float)
        if ky.ndim != 3 or ky.shape[:2] != (K, px.shape[1]):
            raise ValueError("y_kernel must be (K, nx, ny)")
        self.prior = _frozen(prior)
        self.px = _frozen(_renorm_rows(px))
        self.ky = _frozen(_renorm_rows(ky))
        self.K, self.nx, self.ny = ky.shape
        self.y_values = None
        if y_values is not None:
            yv = np.asarray(y_values, dtype=float)
            if yv.ndim == 1:
                yv = yv[:, None]
            if yv.shape[0] != self.ny:
                raise ValueError("y_values needs one entry per Y atom")
            self.y_values = _frozen(yv)
        self.w_values = None
        if w_values is not None:
            wv = np.asarray(w_values, dtype=float)
            if wv.ndim == 1:
                wv = wv[:, None]
            if wv.shape[0] != self.K:
                raise ValueError("w_values needs one entry per W atom")
            self.w_values = _frozen(wv)
        self.w_labels = tuple(w_labels) if w_labels is not None else tuple(range(self.K))
        self.x_labels = tuple(x_labels) if x_labels is not None else tuple(range(self.nx))
        self.y_labels = tuple(y_labels) if y_labels is not None else tuple(range(self.ny))
        for name, labs, size in (("w", self.w_labels, self.K), ("x", self.x_labels, self.nx),
                                 ("y", self.y_labels, self.ny)):
            if len(labs) != size:
                raise ValueError(f"{name}_labels has the wrong length")

    @classmethod
    def from_dists(cls, prior: FiniteDist, x_law, y_kernel, y_values=None, w_values=None):
        """Build from FiniteDists.

        x_law is a FiniteDist (shared) or a mapping w -> FiniteDist; y_kernel is a
        mapping (w, x) -> FiniteDist or a callable; y_values and w_values are
        mappings from labels to numbers (or vectors).
        """
        ws = prior.support
        xlaws = {w: x_law for w in ws} if isinstance(x_law, FiniteDist) else dict(x_law)
        xs: list = []
        for w in ws:
            for x in xlaws[w].support:
                if x not in xs:
                    xs.append(x)
        kern = y_kernel if callable(y_kernel) else (lambda w, x: y_kernel[(w, x)])
        rows = {(w, x): kern(w, x) for w in ws for x in xs}
        ys: list = []
        for d in rows.values():
            for y in d.support:
                if y not in ys:
                    ys.append(y)
        px = np.array([[xlaws[w].prob(x) for x in xs] for w in ws])
        ky = np.array([[[rows[(w, x)].prob(y) for y in ys] for x in xs] for w in ws])
        yv = None if y_values is None else [y_values[y] for y in ys]
        wv = None if w_values is None else [w_values[w] for w in ws]
        return cls(prior.probs, px, ky, y_values=yv, w_values=wv,
                   w_labels=ws, x_labels=xs, y_labels=ys)

    @property
    def n_pairs(self) -> int:
        return self.nx * self.ny

    @property
    def x_independent(self) -> bool:
        """True when every parameter atom shares one covariate law (X independent of W)."""
        return bool(np.all(self.px == self.px[0]))

    def pair_lik(self) -> np.ndarray:
        """(K, nx*ny) probability of each pair atom ``a = x*ny + y`` under each w."""
        return (self.px[:, :, None] * self.ky).reshape(self.K, self.n_pairs)

    def scalar_y(self) -> np.ndarray:
        if self.y_values is None or self.y_values.shape[1] != 1:
            raise ValueError("a scalar numeric embedding of Y is required")
        return self.y_values[:, 0]

    def x_index(self, label) -> int:
        return self.x_labels.index(label)

    def y_index(self, label) -> int:
        return self.y_labels.index(label)

    def w_index(self, label) -> int:
        return self.w_labels.index(label)

    def with_prior(self, prior) -> "DiscreteModel":
        return DiscreteModel(prior, self.px, self.ky, y_values=self.y_values,
                             w_values=self.w_values, w_labels=self.w_labels,
                             x_labels=self.x_labels, y_labels=self.y_labels)

    def __repr__(self) -> str:
        return f"DiscreteModel(K={self.K}, nx={self.nx}, ny={self.ny})"


def _check_rows(a: np.ndarray, what: str) -> Verdict | None:
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        loc = tuple(int(i) for i in np.argwhere(~(np.isfinite(a) & (a >= 0)))[0])
        return Verdict(False, "negative probability", (what,) + loc[:-1])
    s = a.sum(axis=-1)
    bad = np.abs(s - 1.0) > NORM_TOL
    if np.any(bad):
        loc = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0]) if a.ndim > 1 else ()
        return Verdict(False, "row not normalized", (what,) + loc)
    return None


def validate_model(model: DiscreteModel, loss: Loss | None = None) -> Verdict:
    """First violated invariant with its location, or ok."""
    for arr, what in ((model.prior, "prior"), (model.px, "x_law"), (model.ky, "y_kernel")):
        v = _check_rows(arr, what)
        if v is not None:
            return v
    for name, labs in (("w", model.w_labels), ("x", model.x_labels), ("y", model.y_labels)):
        if len(set(labs)) != len(labs):
            return Verdict(False, "labels not distinct", (name,))
    if model.y_values is not None and not np.all(np.isfinite(model.y_values)):
        return Verdict(False, "non-finite Y embedding", ("y_values",))
    if isinstance(loss, QuadraticLoss) and model.y_values is None:
        return Verdict(False, "numeric embedding missing", ("y_values",))
    if isinstance(loss, BoundedTableLoss) and loss.table.shape[0] != model.ny:
        return Verdict(False, "loss table rows do not match Y atoms", ("loss",))
    return Verdict(True)


def ensure_valid(model: DiscreteModel, loss: Loss | None = None) -> None:
    v = validate_model(model, loss)
    if not v.ok:
        raise InvalidModelError(v)


# ----------------------------------------------------------------------------
# Data and randomness


@dataclass(frozen=True)
class DataSequence:
    """Pairs ((x1, y1), ..., (xn, yn)) of atom labels."""
    pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))

    @property
    def n(self) -> int:
        return len(self.pairs)

    def indices(self, model: DiscreteModel) -> tuple[np.ndarray, np.ndarray]:
        try:
            xi = np.array([model.x_index(x) for x, _ in self.pairs], dtype=np.int64)
            yi = np.array([model.y_index(y) for _, y in self.pairs], dtype=np.int64)
        except ValueError:
            raise ValueError("data atom outside the model's supports") from None
        return xi, yi


_MASK64 = (1 << 64) - 1


class RngStream:
    """Deterministic stream keyed by (seed, stream id).

    Children extend the stream id, so a tree of independent streams can be
    derived from one seed.
    """

    def __init__(self, seed: int, stream: int | tuple = 0):
        self.seed = int(seed) & _MASK64
        key = tuple(int(s) & _MASK64 for s in stream) if isinstance(stream, tuple) else (int(stream) & _MASK64,)
        self.stream = key
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(k),))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def _last_positive(p: np.ndarray) -> np.ndarray:
    k = p.shape[-1]
    return k - 1 - np.argmax(p[..., ::-1] > 0, axis=-1)


def _draw(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw along the last axis of ``p`` (broadcast against ``u``).

    Atom i is chosen when cumsum[i-1] <= u < cumsum[i], so zero-probability
    atoms are never drawn, even when rounding leaves the total below u.
    """
    c = np.cumsum(p, axis=-1)
    idx = (u[..., None] >= c).sum(axis=-1)
    return np.minimum(idx, _last_positive(p))


def sample_indices(model: DiscreteModel, n: int, size: int, rng: RngStream):
    """Vectorized draws: w (size,), x (size, n+1), y (size, n+1); column n is the fresh pair."""
    g = rng.generator
    w = _draw(model.prior, g.random(size))
    x = _draw(model.px[w][:, None, :], g.random((size, n + 1)))
    y = _draw(model.ky[w[:, None], x], g.random((size, n + 1)))
    return w, x, y


class Sample(NamedTuple):
    w: Any
    data: DataSequence
    fresh: tuple


def sample_dataset(model: DiscreteModel, n: int, rng: RngStream) -> Sample:
    """Draw w from the prior, then n training pairs and one fresh pair given w."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    w, x, y = sample_indices(model, n, 1, rng)
    xl, yl = model.x_labels, model.y_labels
    pairs = tuple((xl[x[0, i]], yl[y[0, i]]) for i in range(n))
    return Sample(model.w_labels[w[0]], DataSequence(pairs), (xl[x[0, n]], yl[y[0, n]]))


# ----------------------------------------------------------------------------
# Stock models and generators


def bias_model() -> DiscreteModel:
    """Coin with bias uniform on {0.3, 0.7}; X is a single atom."""
    ws = (0.3, 0.7)
    ky = np.array([[[1 - w, w]] for w in ws])
    return DiscreteModel([0.5, 0.5], [1.0], ky, y_values=[0.0, 1.0], w_values=list(ws),
                         w_labels=ws, x_labels=("*",), y_labels=(0, 1))


def random_discrete_model(rng: RngStream | np.random.Generator, max_atoms: int = 4, *,
                          binary: bool = False, x_independent: bool | None = None,
                          sparse: float = 0.2, min_y: int = 2) -> DiscreteModel:
    """Random valid model with at most ``max_atoms`` atoms per space.

    Entries are Dirichlet draws with occasional exact zeros, so null events
    are exercised. Y and W get random scalar embeddings.
    """
    g = rng.generator if isinstance(rng, RngStream) else rng
    K = int(g.integers(1, max_atoms + 1))
    nx = int(g.integers(1, max_atoms + 1))
    ny = 2 if binary else int(g.integers(min_y, max_atoms + 1))
    shared = bool(g.random() < 0.5) if x_independent is None else x_independent

    def rows(shape):
        alpha = float(g.choice([0.3, 1.0, 3.0]))
        a = g.dirichlet(np.full(shape[-1], alpha), size=shape[:-1])
        if shape[-1] > 1:
            zero = g.random(a.shape) < sparse
            keep = np.argmax(a, axis=-1)
            np.put_along_axis(zero, keep[..., None], False, axis=-1)
            a = np.where(zero, 0.0, a)
            a = a / a.sum(axis=-1, keepdims=True)
        return a

    prior = rows((K,))
    px = rows((nx,)) if shared else rows((K, nx))
    ky = rows((K, nx, ny))
    yv = np.sort(g.uniform(-1.0, 1.0, ny))
    wv = g.uniform(-1.0, 1.0, K)
    return DiscreteModel(prior, px, ky, y_values=yv, w_values=wv)


# ----------------------------------------------------------------------------
# JSON model files


def _dist_from_json(obj) -> FiniteDist:
    if isinstance(obj, Mapping) and set(obj) == {"support", "probs"}:
        return FiniteDist(obj["support"], obj["probs"])
    return FiniteDist.from_mapping(obj)


def model_from_json(obj: Mapping | str | Path) -> DiscreteModel:
    """Parse the model schema (see README): prior, x_law, y_kernel, y_values, w_values."""
    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text())
    missing = {"prior", "x_law", "y_kernel"} - set(obj)
    if missing:
        raise ValueError(f"model file lacks keys {sorted(missing)}")
    prior = _dist_from_json(obj["prior"])
    xl = obj["x_law"]
    if all(isinstance(v, Mapping) for v in xl.values()) and set(xl) == set(prior.support):
        x_law = {w: _dist_from_json(xl[w]) for w in prior.support}
    else:
        x_law = _dist_from_json(xl)
    yk = obj["y_kernel"]
    kernel = {}
    for w in prior.support:
        if w not in yk:
            raise ValueError(f"y_kernel lacks parameter atom {w!r}")
        for x, row in yk[w].items():
            kernel[(w, x)] = _dist_from_json(row)

    def kern(w, x):
        try:
            return kernel[(w, x)]
        except KeyError:
            raise ValueError(f"y_kernel lacks row ({w!r}, {x!r})") from None

    yv = obj.get("y_values")
    wv = obj.get("w_values")
    yv = None if yv is None else {k: v for k, v in yv.items()}
    wv = None if wv is None else {k: v for k, v in wv.items()}
    return DiscreteModel.from_dists(prior, x_law, kern, y_values=yv, w_values=wv)


def model_to_json(model: DiscreteModel) -> dict:
    s = str
    out = {
        "prior": {s(w): float(p) for w, p in zip(model.w_labels, model.prior)},
        "x_law": {s(w): {s(x): float(p) for x, p in zip(model.x_labels, model.px[k])}
                  for k, w in enumerate(model.w_labels)},
        "y_kernel": {s(w): {s(x): {s(y): float(p) for y, p in zip(model.y_labels, model.ky[k, i])}
                            for i, x in enumerate(model.x_labels)}
                     for k, w in enumerate(model.w_labels)},
    }
    if model.y_values is not None:
        out["y_values"] = {s(y): (float(v[0]) if v.size == 1 else [float(t) for t in v])
                           for y, v in zip(model.y_labels, model.y_values)}
    if model.w_values is not None:
        out["w_values"] = {s(w): (float(v[0]) if v.size == 1 else [float(t) for t in v])
                           for w, v in zip(model.w_labels, model.w_values)}
    return out
