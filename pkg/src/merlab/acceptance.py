"""The twelve acceptance criteria as runnable checks.

Each ``criterion_k`` returns a :class:`Criterion` with a pass flag and a
one-line detail; :func:`run_all` runs them in order. Tolerances are the
stated ones and are not tuned per run.
"""
from __future__ import annotations

import json
import math
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from merlab import bounds, extensions as ext, linreg, mc, oracle
from merlab.core import LOG, QUADRATIC, ZERO_ONE, DiscreteModel, RngStream, bias_model, random_discrete_model
from merlab.info import cmi_wy
from merlab.report import VIOLATED

N_MODELS = 50
IDENTITY_TOL = 1e-10
MONO_TOL = 1e-12


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.name}: {self.detail} ({self.seconds:.2f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3)}


def suite_models(seed: int = 0, count: int = N_MODELS) -> list[DiscreteModel]:
    """The shared seeded set of random finite models (at most 4 atoms per space)."""
    return [random_discrete_model(RngStream(seed, (101, i)), max_atoms=4) for i in range(count)]


def four_losses(model: DiscreteModel) -> list:
    return [LOG, QUADRATIC, ZERO_ONE, bounds.absolute_table(model)]


def _timed(number: int, name: str, fn) -> Criterion:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as e:  # a crash is a failure of the criterion, reported as such
        ok, detail = False, f"raised {type(e).__name__}: {e}"
    return Criterion(number, name, bool(ok), detail, time.perf_counter() - t0)


# ----------------------------------------------------------------------------


def criterion_1(seed: int = 0) -> Criterion:
    def body():
        t0 = time.perf_counter()
        worst = 0.0
        for m in suite_models(seed):
            for n in (0, 1, 2):
                worst = max(worst, abs(oracle.mer(m, LOG, n).value - cmi_wy(m, n)))
        dt = time.perf_counter() - t0
        return worst <= IDENTITY_TOL and dt < 60, f"max |MER_log - I(W;Y|X,Z^n)| = {worst:.2e}, {dt:.1f}s"
    return _timed(1, "exact identity MER_log = CMI", body)


def criterion_2(seed: int = 0) -> Criterion:
    def body():
        worst_up, worst_neg = -math.inf, math.inf
        for m in suite_models(seed):
            for loss in four_losses(m):
                vals = [oracle.mer(m, loss, n).value for n in range(4)]
                worst_neg = min(worst_neg, min(vals))
                worst_up = max(worst_up, max(b - a for a, b in zip(vals, vals[1:])))
        ok = worst_up <= MONO_TOL and worst_neg >= -MONO_TOL
        return ok, f"max increase {worst_up:.2e}, min value {worst_neg:.2e} over n = 0..3, four losses"
    return _timed(2, "monotone and nonnegative MER", body)


def criterion_3(seed: int = 0) -> Criterion:
    def body():
        total, bad = 0, []
        for i, m in enumerate(suite_models(seed)):
            for n in (0, 1, 2):
                for r in bounds.battery(m, n, four_losses(m)):
                    total += 1
                    if r.verdict == VIOLATED:
                        bad.append(f"model {i} n={n} {r.bound_id}")
        return not bad, f"{total} reports, {len(bad)} violated" + (f" (first: {bad[0]})" if bad else "")
    return _timed(3, "inequality battery", body)


def criterion_4(seed: int = 0) -> Criterion:
    def body():
        b = bias_model()
        got = {"MER_01(0)": oracle.mer(b, ZERO_ONE, 0).value, "MER_01(1)": oracle.mer(b, ZERO_ONE, 1).value,
               "MER_log(0)": oracle.mer(b, LOG, 0).value, "MER_2(0)": oracle.mer(b, QUADRATIC, 0).value}
        ok = (abs(got["MER_01(0)"] - 0.2) <= 1e-12 and abs(got["MER_01(1)"] - 0.12) <= 1e-12
              and abs(got["MER_log(0)"] - 0.082283) <= 1e-6 and abs(got["MER_2(0)"] - 0.04) <= 1e-12)
        return ok, ", ".join(f"{k} = {v:.9g}" for k, v in got.items())
    return _timed(4, "bias-model anchors", body)


def criterion_5(seed: int = 0) -> Criterion:
    def body():
        m = linreg.GaussLinRegModel.constant()
        worst, z = 0.0, 0.0
        for n in (0, 1, 2, 4, 8, 16):
            worst = max(worst, abs(linreg.exact_mer_quadratic(m, n).value - 1 / (n + 1)),
                        abs(linreg.exact_mer_log(m, n).value - 0.5 * math.log1p(1 / (n + 1))))
        for n in (0, 4, 16):
            rng = RngStream(seed, (105, n))
            e2 = linreg.oracle_mer2(m, n, 20000, rng.child(0))
            el = linreg.oracle_mer_log(m, n, 20000, rng.child(1))
            z = max(z, abs(e2.value - 1 / (n + 1)) / e2.se, abs(el.value - 0.5 * math.log1p(1 / (n + 1))) / el.se)
        return worst <= 1e-12 and z <= 3, f"closed-form gap {worst:.1e}; MC oracle max |z| = {z:.2f}"
    return _timed(5, "linear-regression closed forms", body)


def criterion_6(seed: int = 0) -> Criterion:
    def body():
        t0 = time.perf_counter()
        grid = [int(v) for v in np.unique(np.round(np.geomspace(10, 10_000, 13)))]
        parts, ok = [], True
        for d in (1, 2, 4, 8):
            rep = linreg.mi_growth_check(linreg.GaussLinRegModel.legendre(d), grid, RngStream(seed, (106, d)), 200)
            rel = abs(rep.slope_mi - d / 2) / (d / 2)
            ok &= rel <= 0.10 and abs(rep.slope_mer2 + 1) <= 0.1
            parts.append(f"d={d}: I {rep.slope_mi:.3f} MER_2 {rep.slope_mer2:.3f}")
        dt = time.perf_counter() - t0
        return ok and dt < 300, "; ".join(parts) + f"; {dt:.1f}s"
    return _timed(6, "d/2 and 1/n scaling", body)


def criterion_7(seed: int = 0) -> Criterion:
    def body():
        xs = list(range(6))
        thr = bounds.threshold_class(xs, [w - 0.5 for w in range(7)])
        itv = bounds.interval_class(xs, xs)
        d_thr, d_itv = bounds.vc_dimension(thr), bounds.vc_dimension(itv)
        fails = []
        for name, g in (("threshold", thr), ("interval", itv), ("constant", bounds.constant_class(6)),
                        ("flipped threshold", thr.flipped())):
            model = bounds.realizable_model(g)
            for n in range(0, 13):
                v = bounds.sauer_shelah_check(g, n)
                if not v.ok:
                    fails.append(f"{name} n={n}: {v.message}")
                h = bounds.label_entropy_realizable(model, g, n)
                d = bounds.vc_dimension(g)
                if n >= 2 and h > d * math.log(n) + 1.0 + 1e-12:
                    fails.append(f"{name} n={n}: H(Y^n|X^n) = {h:.6f} > d ln n + 1")
            # the MER companion needs full enumeration, so it runs on the short prefix only
            for n in range(1, 4):
                for r in bounds.vc_entropy_check(model, g, n):
                    if r.verdict == VIOLATED:
                        fails.append(f"{name} n={n}: {r.bound_id}")
        ok = d_thr == 1 and d_itv == 2 and not fails
        return ok, f"VC(thresholds) = {d_thr}, VC(intervals) = {d_itv}, {len(fails)} failures" + (
            f" (first: {fails[0]})" if fails else "")
    return _timed(7, "VC machinery", body)


def criterion_8(seed: int = 0) -> Criterion:
    def body():
        worst = 0.0
        for m in suite_models(seed):
            for n in (0, 1, 2):
                a, b = oracle.posterior_error(m, n)
                worst = max(worst, abs(a - b))
        zs = []
        lr = linreg.GaussLinRegModel.legendre(2)
        for n in (0, 4, 16):
            a, b = linreg.oracle_posterior_error(lr, n, 4000, RngStream(seed, (108, n)))
            zs.append(abs(a.value - b.value) / math.hypot(a.se, b.se))
        toy = mc.LogisticModel.toy()
        for n in (0, 2, 8):
            a, b = mc.posterior_error_mc(toy, n, 4000, mc.GridQuadrature(), RngStream(seed, (208, n)))
            zs.append(abs(a.value - b.value) / math.hypot(a.se, b.se))
        z = max(zs)
        return worst <= 1e-12 and z <= 3, f"exact gap {worst:.1e}; Gaussian/MC max |z| = {z:.2f}"
    return _timed(8, "posterior-error identity", body)


def criterion_9(seed: int = 0) -> Criterion:
    def body():
        toy = mc.LogisticModel.toy()
        bad, ests = [], []
        for n in (0, 2, 8):
            rng = RngStream(seed, (109,))
            for r in mc.logistic_bounds(toy, n, 4000, mc.GridQuadrature(), rng):
                if r.verdict == VIOLATED:
                    bad.append(f"{r.bound_id} n={n}")
            ests.append(mc.estimate_mer(toy, LOG, n, 4000, mc.GridQuadrature(), rng))
        dec = mc.strictly_decreasing(ests, 3.0)
        vals = ", ".join(f"{e.value:.4f}+-{e.se:.4f}" for e in ests)
        return not bad and dec, f"MER_log(0, 2, 8) = {vals}; {len(bad)} violated bounds"
    return _timed(9, "logistic suite", body)


def criterion_10(seed: int = 0) -> Criterion:
    def body():
        gp = ext.GPModel(ext.RBF(0.5, 1.0))
        zs, vals = [], []
        for n in (0, 1, 2, 4, 8):
            # same designs on both routes; the oracle adds its own process draws
            f = ext.gp_mer_quadratic(gp, n, 4000, RngStream(seed, (110, n)))
            o = ext.gp_conditional_var_oracle(gp, n, 4000, RngStream(seed, (110, n)))
            vals.append(f.value)
            zs.append(abs(f.value - o.value) / max(math.hypot(f.se, o.se), 1e-300) if f.value or o.value else 0.0)
        mono = all(b <= a for a, b in zip(vals, vals[1:]))
        dup = ext.gp_mer_quadratic(gp, 3, 200, RngStream(seed, (310,)), force_query=True).value
        point = ext.gp_posterior_var(gp, [0.1, 0.4, -0.2], 0.4)
        ok = max(zs) <= 3 and mono and dup == 0.0 and point == 0.0
        return ok, f"max |z| = {max(zs):.2f}, monotone {mono}, duplicate query {dup} / {point}"
    return _timed(10, "Gaussian process", body)


def two_family_models(seed: int = 0, count: int = 20) -> list:
    """The stock two-family coin plus seeded random two-member families on shared atoms."""
    coin = lambda a, b: DiscreteModel([0.5, 0.5], [1.0], [[[1 - a, a]], [[1 - b, b]]], y_values=[0.0, 1.0])
    fams = [ext.MultiModelFamily([0.5, 0.5], [coin(0.3, 0.7), coin(0.1, 0.9)])]
    for i in range(count):
        g = RngStream(seed, (111, i)).generator
        nx, ny = int(g.integers(1, 4)), int(g.integers(2, 4))
        yv = np.sort(g.uniform(-1, 1, ny))
        members = []
        for _ in range(2):
            K = int(g.integers(1, 4))
            members.append(DiscreteModel(g.dirichlet(np.ones(K)), g.dirichlet(np.ones(nx)),
                                         g.dirichlet(np.ones(ny), size=(K, nx)), y_values=yv))
        fams.append(ext.MultiModelFamily(g.dirichlet(np.ones(2)), members))
    return fams


def criterion_11(seed: int = 0) -> Criterion:
    def body():
        bad, count = [], 0
        for i, fam in enumerate(two_family_models(seed)):
            for n in (0, 1, 2):
                for r in ext.mm_log_identity_and_bounds(fam, n):
                    count += 1
                    if r.verdict == VIOLATED:
                        bad.append(f"family {i} n={n} {r.bound_id}")
        mismatch = []
        for j, m in enumerate(suite_models(seed, 10)):
            fam = ext.MultiModelFamily([1.0], [m])
            for n in (0, 1, 2):
                for loss in (LOG, QUADRATIC, ZERO_ONE):
                    if ext.mm_mer(fam, loss, n).value != oracle.mer(m, loss, n).value:
                        mismatch.append(f"model {j} n={n} mer")
                kl = {r.bound_id: r for r in ext.mm_log_identity_and_bounds(fam, n)}["mm_kl_posterior"]
                ref = bounds.bound_kl_posterior(m, n)
                if (kl.lhs, kl.rhs) != (ref.lhs, ref.rhs):
                    mismatch.append(f"model {j} n={n} kl_posterior")
        ok = not bad and not mismatch
        return ok, (f"{count} reports on {len(two_family_models(seed))} families, {len(bad)} violated; "
                    f"{len(mismatch)} single-member mismatches") + (f" (first: {(bad + mismatch)[0]})"
                                                                   if bad or mismatch else "")
    return _timed(11, "multi-model identity and bounds", body)


def _cli(args, cwd) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "merlab.cli", *args], cwd=cwd, capture_output=True, text=True)


def criterion_12(seed: int = 0) -> Criterion:
    def body():
        here = Path(__file__).with_name("data") / "bias_model.json"
        cfg = {"experiment_id": "determinism", "model": {"kind": "discrete", "file": str(here)},
               "losses": ["log", "quadratic", "zeroone", "absolute"], "n_grid": [0, 1, 2, 3], "seed": seed}
        with tempfile.TemporaryDirectory() as tmp:
            t = Path(tmp)
            (t / "c.json").write_text(json.dumps(cfg))
            r1, r2 = _cli(["run", "--config", "c.json", "--out", "a"], t), _cli(["run", "--config", "c.json", "--out", "b"], t)
            same = r1.returncode == r2.returncode == 0 and \
                (t / "a" / "results.csv").read_bytes() == (t / "b" / "results.csv").read_bytes()
            cfg["inject_violation"] = {"bound_id": "kl_posterior", "n": 2, "eps": 1e-6}
            (t / "bad.json").write_text(json.dumps(cfg))
            r3 = _cli(["run", "--config", "bad.json", "--out", "c"], t)
            named = r3.returncode != 0 and "-/n=2:kl_posterior" in json.loads(
                (t / "c" / "summary.json").read_text())["violated"]
        return same and named, f"byte-identical {same}; injected violation exit {r3.returncode}, named {named}"
    return _timed(12, "CLI determinism and failure path", body)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


def run_all(seed: int = 0) -> list[Criterion]:
    return [c(seed) for c in CRITERIA]
