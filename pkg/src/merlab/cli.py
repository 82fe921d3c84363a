"""Command-line runner: ``merlab run | scaling | suite``.

A config is one JSON object per file (see README for the schema). ``run``
sweeps the grid of (loss, n) cells and writes

    results.csv   one row per evaluated bound, columns ``RESULT_FIELDS``
    summary.json  per-bound verdict counts, worst slack, violated cells
    meta.json     seed, package versions, runtime

results.csv and summary.json depend only on the config and the seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from merlab import __version__, _backend
from merlab.core import RngStream, bias_model, loss_from_name, model_from_json
from merlab.oracle import ExceedsEnumerationBudget
from merlab.report import CSV_FIELDS, VACUOUS, VIOLATED, BoundReport, fmt

RESULT_FIELDS = ("cell", "loss") + CSV_FIELDS + ("note",)
SCALING_FIELDS = ("n", "I_WZn", "MER_log", "MER_2", "bound_1", "bound_2", "bound_3", "bound_4")
MIN_SCALING_POINTS = 4
MODEL_KINDS = ("discrete", "multi", "linreg", "logistic", "nonlinreg", "gp")
ERROR = "error"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment_id: str
    model: dict
    n_grid: list
    seed: int
    losses: list = field(default_factory=list)
    trials: int = 400
    sampler: dict = field(default_factory=lambda: {"kind": "grid"})
    bounds: list | None = None
    output_dir: str | None = None
    inject_violation: dict | None = None
    base_dir: str = "."

    @property
    def kind(self) -> str:
        return self.model["kind"]


def _fail(fieldname: str, msg: str):
    raise ConfigError(f"field '{fieldname}': {msg}")


def _int(v, name: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(name, f"must be >= {lo}")
    return v


def parse_config(text: str, source: str = "<config>", base_dir: str = ".") -> ExperimentConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    known = {"experiment_id", "model", "losses", "n_grid", "trials", "seed", "sampler", "bounds",
             "output_dir", "inject_violation"}
    extra = sorted(set(obj) - known)
    if extra:
        _fail(extra[0], "unknown field")
    for req in ("experiment_id", "model", "n_grid", "seed"):
        if req not in obj:
            _fail(req, "missing (mandatory)")
    seed = _int(obj["seed"], "seed", 0)
    grid = obj["n_grid"]
    if not isinstance(grid, list) or not grid:
        _fail("n_grid", "expected a non-empty list of integers")
    grid = [_int(v, f"n_grid[{i}]", 0) for i, v in enumerate(grid)]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        _fail("n_grid", "must be strictly increasing")
    model = obj["model"]
    if not isinstance(model, dict) or model.get("kind") not in MODEL_KINDS:
        _fail("model.kind", f"expected one of {list(MODEL_KINDS)}")
    losses = obj.get("losses", [])
    if not isinstance(losses, list) or not all(isinstance(x, str) for x in losses):
        _fail("losses", "expected a list of loss names")
    for i, name in enumerate(losses):
        if name not in ("log", "quadratic", "zeroone", "absolute"):
            _fail(f"losses[{i}]", f"unknown loss {name!r}")
    bounds = obj.get("bounds")
    if bounds is not None and (not isinstance(bounds, list) or not all(isinstance(x, str) for x in bounds)):
        _fail("bounds", "expected a list of bound-id prefixes or null")
    sampler = obj.get("sampler", {"kind": "grid"})
    if isinstance(sampler, str):
        sampler = {"kind": sampler}
    if not isinstance(sampler, dict) or sampler.get("kind") not in ("grid", "rwm"):
        _fail("sampler.kind", "expected 'grid' or 'rwm'")
    inj = obj.get("inject_violation")
    if inj is not None:
        if not isinstance(inj, dict) or "bound_id" not in inj:
            _fail("inject_violation", "expected an object with bound_id")
    return ExperimentConfig(
        experiment_id=str(obj["experiment_id"]), model=model, n_grid=grid, seed=seed, losses=list(losses),
        trials=_int(obj.get("trials", 400), "trials", 2), sampler=sampler, bounds=bounds,
        output_dir=obj.get("output_dir"), inject_violation=inj, base_dir=base_dir)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{p}: {e.strerror}") from None
    return parse_config(text, str(p), str(p.parent))


# ----------------------------------------------------------------------------
# model construction


def _x_law(spec, name="model.x_law"):
    from merlab.linreg import FiniteX, UniformX
    if spec is None:
        return UniformX()
    if isinstance(spec, dict) and "uniform" in spec:
        lo, hi = spec["uniform"]
        return UniformX(float(lo), float(hi))
    if isinstance(spec, dict) and "values" in spec and "probs" in spec:
        return FiniteX(tuple(float(v) for v in spec["values"]), tuple(float(p) for p in spec["probs"]))
    _fail(name, "expected {'uniform': [lo, hi]} or {'values': [...], 'probs': [...]}")


def _prior(spec, d: int, name="model.prior"):
    from merlab.mc import BoxPrior, GaussianPrior, TruncatedGaussianPrior
    if not isinstance(spec, dict):
        _fail(name, "expected an object")
    if "box" in spec:
        lo, hi = spec["box"]
        lo = [float(lo)] * d if np.isscalar(lo) else [float(v) for v in lo]
        hi = [float(hi)] * d if np.isscalar(hi) else [float(v) for v in hi]
        return BoxPrior(tuple(lo), tuple(hi))
    if "truncated_gaussian" in spec:
        t = spec["truncated_gaussian"]
        return TruncatedGaussianPrior(d, float(t["var"]), float(t["radius"]))
    if "gaussian" in spec:
        return GaussianPrior(d, float(spec["gaussian"]["var"]))
    _fail(name, "expected 'box', 'truncated_gaussian' or 'gaussian'")


def _discrete(spec: dict, base_dir: str, name="model"):
    if "stock" in spec:
        if spec["stock"] != "bias":
            _fail(f"{name}.stock", "only 'bias' is built in")
        return bias_model()
    try:
        if "file" in spec:
            return model_from_json(Path(base_dir) / spec["file"])
        if "inline" in spec:
            return model_from_json(spec["inline"])
    except (ValueError, KeyError, TypeError) as e:
        _fail(name, str(e))
    _fail(name, "discrete model needs 'stock', 'file' or 'inline'")


def _linreg(spec: dict, name="model"):
    from merlab.linreg import GaussLinRegModel, constant_feature, legendre_features
    d = int(spec.get("d", 1))
    feat = spec.get("features", "legendre")
    if feat == "constant":
        fmap, d = constant_feature, 1
    elif feat == "legendre":
        fmap = legendre_features(d)
    else:
        _fail(f"{name}.features", "expected 'constant' or 'legendre'")
    try:
        return GaussLinRegModel(d, float(spec.get("prior_var", 1.0)), float(spec.get("noise_var", 1.0)),
                                fmap, _x_law(spec.get("x_law"), f"{name}.x_law"))
    except ValueError as e:
        _fail(name, str(e))


G_FUNCTIONS = ("linear", "squared", "tanh")


def build_model(cfg: ExperimentConfig):
    from merlab import extensions as ext, mc
    spec = cfg.model
    kind = spec["kind"]
    if kind == "discrete":
        return _discrete(spec, cfg.base_dir)
    if kind == "linreg":
        return _linreg(spec)
    if kind == "multi":
        members = spec.get("members")
        if not isinstance(members, list) or not members:
            _fail("model.members", "expected a non-empty list")
        built = []
        for i, m in enumerate(members):
            mk = m.get("kind", "discrete")
            built.append(_discrete(m, cfg.base_dir, f"model.members[{i}]") if mk == "discrete"
                         else _linreg(m, f"model.members[{i}]"))
        prior = spec.get("model_prior", [1.0 / len(built)] * len(built))
        try:
            return ext.MultiModelFamily(prior, built)
        except (ValueError, TypeError) as e:
            _fail("model.members", str(e))
    if kind == "logistic":
        if spec.get("toy", False):
            return mc.LogisticModel.toy(float(spec.get("s_w", 2.0)))
        d = int(spec.get("d", 1))
        if d != 1:
            _fail("model.d", "config-built logistic models use phi(x) = x with d = 1")
        return mc.LogisticModel(1, lambda x: np.asarray(x, float)[..., None], _x_law(spec.get("x_law")),
                                _prior(spec.get("prior"), 1), spec.get("s_phi"))
    if kind == "nonlinreg":
        gname = spec.get("g", "linear")
        if gname not in G_FUNCTIONS:
            _fail("model.g", f"expected one of {list(G_FUNCTIONS)}")
        g, grad = {"linear": (mc.linear_g, mc.linear_grad), "squared": (mc.squared_g, mc.squared_grad),
                   "tanh": (mc.tanh_unit, mc.tanh_unit_grad)}[gname]
        d = int(spec.get("d", 1))
        return mc.NonlinRegModel(g, _x_law(spec.get("x_law")), _prior(spec.get("prior"), d),
                                 float(spec.get("noise_var", 1.0)), grad=grad)
    if kind == "gp":
        k = spec.get("kernel", {"rbf": {}})
        if "rbf" in k:
            kern = ext.RBF(float(k["rbf"].get("length", 1.0)), float(k["rbf"].get("amplitude", 1.0)))
        elif "constant" in k:
            kern = ext.ConstantKernel(float(k["constant"]))
        else:
            _fail("model.kernel", "expected 'rbf' or 'constant'")
        return ext.GPModel(kern, _x_law(spec.get("x_law")), noise_var=float(spec.get("noise_var", 0.0)))
    _fail("model.kind", f"unknown kind {kind!r}")


def _sampler(cfg: ExperimentConfig):
    from merlab.mc import GridQuadrature, RandomWalkMetropolis
    s = dict(cfg.sampler)
    kind = s.pop("kind")
    try:
        return GridQuadrature(**s) if kind == "grid" else RandomWalkMetropolis(**s)
    except TypeError as e:
        _fail("sampler", str(e))


def _loss(name: str, model):
    if name == "absolute":
        from merlab.bounds import absolute_table
        return absolute_table(model)
    return loss_from_name(name)


# ----------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class Cell:
    index: int
    loss: str
    n: int

    @property
    def name(self) -> str:
        return f"{self.loss}/n={self.n}"


def plan_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Grid cells in output order: for each n, the loss-free cell then one per loss."""
    per_loss = cfg.kind in ("discrete",)
    out = []
    for n in cfg.n_grid:
        out.append(Cell(len(out), "-", n))
        if per_loss:
            for name in cfg.losses:
                out.append(Cell(len(out), name, n))
    return out


def _anchor_loss(r: BoundReport) -> str:
    a = r.anchor
    if "MER_01" in a:
        return "zeroone"
    if "MER_log" in a or "I(" in a.split("<=")[0]:
        return "log"
    if "MER_2" in a:
        return "quadratic"
    return "-"


def evaluate_cell(cfg: ExperimentConfig, cell: Cell, model=None) -> list[BoundReport]:
    from merlab import bounds, extensions as ext, linreg, mc
    model = build_model(cfg) if model is None else model
    rng = RngStream(cfg.seed, (cell.index,))
    n, T, kind = cell.n, cfg.trials, cfg.kind
    if kind == "discrete":
        if cell.loss == "-":
            return bounds.battery_shared(model, n)
        return bounds.battery_loss(model, _loss(cell.loss, model), n)
    if kind == "multi":
        if model.discrete:
            return ext.mm_log_identity_and_bounds(model, n)
        boxes = cfg.model.get("boxes")
        return ext.mm_linreg_bounds(model, n, T, rng, boxes)
    if kind == "linreg":
        return linreg.linreg_bounds(model, n, rng, T)
    if kind == "logistic":
        sampler = _sampler(cfg)
        out = mc.logistic_bounds(model, n, T, sampler, rng)
        from merlab.core import ZERO_ONE
        out.append(mc.predictive_sampling_risk(model, ZERO_ONE, n, T, rng, sampler))
        return out
    if kind == "nonlinreg":
        return mc.nonlinreg_bounds(model, n, T, None, rng)
    if kind == "gp":
        if n < 1:
            return []
        return [ext.gp_log_cmi_check(model, n, T, rng)]
    raise ConfigError(f"field 'model.kind': unknown kind {kind!r}")


@dataclass(frozen=True)
class CellResult:
    cell: Cell
    reports: tuple
    error: str | None = None


def _selected(cfg: ExperimentConfig, r: BoundReport) -> bool:
    return cfg.bounds is None or any(r.bound_id.startswith(p) for p in cfg.bounds)


def _inject(cfg: ExperimentConfig, cell: Cell, reports: list[BoundReport]) -> list[BoundReport]:
    inj = cfg.inject_violation
    if not inj:
        return reports
    out = []
    for r in reports:
        hit = r.bound_id == inj["bound_id"] and inj.get("n", r.n) == r.n and inj.get("loss", cell.loss) == cell.loss
        if hit and math.isfinite(r.slack):
            eps = float(inj.get("eps", 1e-3))
            r = r.shifted(-(r.slack + 3.0 * r.combined_se + eps))
        out.append(r)
    return out


def run_cell(cfg: ExperimentConfig, cell: Cell, model=None) -> CellResult:
    """Evaluate one cell; budget errors are captured, not raised."""
    try:
        reps = [r for r in evaluate_cell(cfg, cell, model) if _selected(cfg, r)]
    except ExceedsEnumerationBudget as e:
        return CellResult(cell, (), f"budget: {e}")
    return CellResult(cell, tuple(_inject(cfg, cell, reps)))


def _worker(args):
    cfg, cell = args
    return run_cell(cfg, cell)


def run_cells(cfg: ExperimentConfig, jobs: int = 1) -> list[CellResult]:
    cells = plan_cells(cfg)
    if jobs <= 1 or len(cells) <= 1:
        model = build_model(cfg)
        return [run_cell(cfg, c, model) for c in cells]
    build_model(cfg)  # surface config errors before forking
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so the collector writes in cell order
        return list(pool.map(_worker, [(cfg, c) for c in cells]))


# ----------------------------------------------------------------------------
# outputs


def results_csv(results: list[CellResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for res in results:
        if res.error is not None:
            w.writerow([res.cell.name, res.cell.loss, "cell_error", "", res.cell.n, "nan", "nan",
                        "nan", "nan", "nan", ERROR, res.error])
            continue
        loss = res.cell.loss
        for r in res.reports:
            tag = loss if loss != "-" else _anchor_loss(r)
            w.writerow([res.cell.name, tag] + r.row() + [r.note])
    return buf.getvalue()


def summarize(cfg: ExperimentConfig, results: list[CellResult]) -> dict:
    per: dict[str, dict] = {}
    violated, errors = [], []
    rows = 0
    for res in results:
        if res.error is not None:
            errors.append({"cell": res.cell.name, "error": res.error})
            continue
        for r in res.reports:
            rows += 1
            b = per.setdefault(r.bound_id, {"holds": 0, "vacuous": 0, "violated": 0,
                                            "worst_slack": None, "worst_cell": None})
            b[r.verdict] += 1
            if r.verdict != VACUOUS and math.isfinite(r.slack) and (
                    b["worst_slack"] is None or r.slack < b["worst_slack"]):
                b["worst_slack"], b["worst_cell"] = r.slack, res.cell.name
            if r.verdict == VIOLATED:
                violated.append(f"{res.cell.name}:{r.bound_id}")
    return {"experiment_id": cfg.experiment_id, "seed": cfg.seed, "rows": rows, "bounds": dict(sorted(per.items())),
            "violated": violated, "errors": errors, "exit_code": 1 if violated else 0}


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _versions() -> dict:
    return {"merlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": _backend.BACKEND}


def run(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    t0 = time.perf_counter()
    results = run_cells(cfg, jobs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "results.csv", results_csv(results))
    summary = summarize(cfg, results)
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=False))
    meta = {"experiment_id": cfg.experiment_id, "seed": cfg.seed, "jobs": jobs, "versions": _versions(),
            "runtime_s": round(time.perf_counter() - t0, 3)}
    _write(out / "meta.json", json.dumps(meta, indent=2))
    return summary


# ----------------------------------------------------------------------------
# scaling


def scaling(cfg: ExperimentConfig, out_dir) -> dict:
    """(n, value) series and top-decade slopes, written as whitespace data for gnuplot."""
    from merlab import linreg, mc
    if len(cfg.n_grid) < MIN_SCALING_POINTS:
        _fail("n_grid", f"scaling needs at least {MIN_SCALING_POINTS} grid points")
    if cfg.n_grid[0] < 1:
        _fail("n_grid", "scaling needs n >= 1")
    model = build_model(cfg)
    rng = RngStream(cfg.seed, (0,))
    t0 = time.perf_counter()
    if cfg.kind == "linreg":
        rep = linreg.mi_growth_check(model, cfg.n_grid, rng, cfg.trials)
        cols, rows = SCALING_FIELDS, rep.rows
        slopes = {"d": rep.d, "slope_I": rep.slope_mi, "target_slope_I": rep.d / 2,
                  "slope_mer_log": rep.slope_mer_log, "slope_mer2": rep.slope_mer2}
    elif cfg.kind == "logistic":
        sampler = _sampler(cfg)
        ests = [mc.estimate_mer(model, loss_from_name("log"), n, cfg.trials, sampler, rng) for n in cfg.n_grid]
        cols = ("n", "MER_log", "MER_log_se")
        rows = [(n, e.value, e.se) for n, e in zip(cfg.n_grid, ests)]
        slopes = {"d": model.d, "slope_I": None,
                  "slope_mer_log": linreg.top_decade_slope(cfg.n_grid, [math.log(max(e.value, 1e-300))
                                                                        for e in ests])}
    else:
        _fail("model.kind", "scaling supports 'linreg' and 'logistic'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(cols)] + [" ".join(fmt(float(v)) if i else str(int(v)) for i, v in enumerate(r))
                                       for r in rows]
    _write(out / "scaling.dat", "\n".join(lines))
    _write(out / "slopes.json", json.dumps(slopes, indent=2))
    meta = {"experiment_id": cfg.experiment_id, "seed": cfg.seed, "versions": _versions(),
            "runtime_s": round(time.perf_counter() - t0, 3)}
    _write(out / "meta.json", json.dumps(meta, indent=2))
    return slopes


# ----------------------------------------------------------------------------
# entry point


def _arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="merlab", description="Minimum-excess-risk verification lab.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "sweep a (loss, n) grid and check every bound"),
                      ("scaling", "slopes of I(W;Z^n) and ln MER against ln n"),
                      ("suite", "run the acceptance battery")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=name != "suite")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _arg_parser().parse_args(argv)
    if args.command == "suite":
        from merlab.acceptance import run_all
        results = run_all(seed=args.seed if args.seed is not None else 0)
        for r in results:
            print(r.line(), flush=True)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            _write(Path(args.out) / "acceptance.json", json.dumps([r.as_dict() for r in results], indent=2))
        return 0 if all(r.passed for r in results) else 1
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out or cfg.output_dir
        if out is None:
            raise ConfigError("field 'output_dir': missing and no --out given")
        if args.command == "run":
            summary = run(cfg, out, max(1, args.jobs))
            for v in summary["violated"]:
                print(f"violated: {v}", file=sys.stderr)
            for e in summary["errors"]:
                print(f"cell error: {e['cell']}: {e['error']}", file=sys.stderr)
            print(f"{summary['rows']} rows, {len(summary['violated'])} violated -> {out}")
            return summary["exit_code"]
        slopes = scaling(cfg, out)
        print(json.dumps(slopes))
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
