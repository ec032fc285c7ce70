"""Experiment configuration, orchestration and report files."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np

SCHEMA = "oscint/1"
SUBCOMMANDS = ("analyze", "resolve", "decay", "sublevel", "decompose", "profile")
JSON_RECT_LIMIT = 20_000


class ConfigError(ValueError):
    """Invalid configuration; the message says how to fix it."""


@dataclass
class ExperimentConfig:
    subcommand: str
    phase: Optional[str] = None
    domain: Optional[str] = None
    # decay / profile
    cutoff: str = "bump"
    n: int = 1024
    lambda_min: float = 2.0 ** 8
    lambda_max: float = 2.0 ** 14
    points: int = 7
    restarts: int = 8
    iters: int = 400
    slope_tol: float = 0.03
    j_range: tuple = (-4, -1)
    k_range: tuple = (-4, -1)
    lam: float = 2.0 ** 10
    # resolve
    edge: int = 0
    root: int = 0
    j: int = -6
    mu: str = "1/16"
    eps: float = 0.125
    delta: Optional[float] = None
    max_depth: int = 10
    budget: int = 4_000_000
    samples: int = 200_000
    # sublevel
    mu_min: float = 2.0 ** -12
    mu_max: float = 2.0 ** -4
    conditions: tuple = ()
    seed: int = 0
    out_dir: str = "oscint-out"

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}; choose one of {', '.join(SUBCOMMANDS)}")
        needs_phase = self.subcommand in ("analyze", "resolve", "decay", "sublevel", "profile")
        if needs_phase and not self.phase:
            raise ConfigError("a phase polynomial is required (--phase or --H)")
        if self.subcommand == "decompose" and self.domain is None:
            raise ConfigError("decompose needs --domain (file with one inequality per line)")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("eps", "slope_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.subcommand == "decay":
            if self.points < 1:
                raise ConfigError("decay needs at least one lambda; raise --points")
            if self.points < 5:
                raise ConfigError("decay needs at least 5 lambdas for a slope fit; raise --points")
            if not (0 < self.lambda_min < self.lambda_max):
                raise ConfigError("need 0 < --lambda-min < --lambda-max")
            if self.restarts < 4:
                raise ConfigError("--restarts must be at least 4")
        if self.subcommand == "sublevel":
            if self.points < 2:
                raise ConfigError("sublevel needs at least two mu values; raise --points")
            if not (0 < self.mu_min < self.mu_max):
                raise ConfigError("need 0 < --mu-min < --mu-max")
            if not self.conditions:
                raise ConfigError('sublevel needs --conditions, e.g. "1,1"')
        if self.subcommand in ("decay", "sublevel", "profile") and self.n < 64:
            raise ConfigError("grid too small: use --n 64 or more")

    def lambdas(self) -> list[float]:
        return [float(v) for v in np.geomspace(self.lambda_min, self.lambda_max, self.points)]

    def mus(self) -> list[float]:
        return [float(v) for v in np.geomspace(self.mu_min, self.mu_max, self.points)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["j_range"] = list(self.j_range)
        d["k_range"] = list(self.k_range)
        d["conditions"] = [list(c) for c in self.conditions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["j_range"] = tuple(d.get("j_range", (-4, -1)))
        d["k_range"] = tuple(d.get("k_range", (-4, -1)))
        d["conditions"] = tuple(tuple(c) for c in d.get("conditions", ()))
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class Verdict:
    name: str
    verdict: str  # pass | fail | inconclusive
    comparison: str

    @classmethod
    def check(cls, name: str, ok: bool, comparison: str) -> "Verdict":
        return cls(name, "pass" if ok else "fail", comparison)


@dataclass
class RunReport:
    config: dict
    results: list = field(default_factory=list)
    measured: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def exit_code(self) -> int:
        kinds = {v.verdict for v in self.verdicts}
        if "fail" in kinds:
            return 2
        if "inconclusive" in kinds:
            return 3
        return 0

    def to_json(self, timings: bool = True) -> str:
        doc = {
            "schema": self.schema,
            "config": self.config,
            "results": self.results,
            "measured": self.measured,
            "verdicts": [asdict(v) for v in self.verdicts],
            "tables": {k: {"columns": list(c), "rows": [list(r) for r in rows]} for k, (c, rows) in self.tables.items()},
        }
        if timings:
            doc["timings"] = self.timings
        return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {doc.get('schema')!r}")
        tables = {k: (tuple(v["columns"]), [tuple(r) for r in v["rows"]]) for k, v in doc.get("tables", {}).items()}
        return cls(doc["config"], doc["results"], doc["measured"], [Verdict(**v) for v in doc["verdicts"]],
                   doc.get("timings", {}), tables, doc["schema"])

    def normalised(self) -> "RunReport":
        """Round-trip through JSON so in-memory values compare equal to re-parsed ones."""
        return RunReport.from_json(self.to_json())


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# --------------------------------------------------------------------------
# dispatch

def _phase(text: str):
    from .poly import parse_poly

    path = Path(text)
    if "\n" not in text and len(text) < 4096 and path.is_file():
        text = path.read_text()
    try:
        return parse_poly(text.strip())
    except ValueError as exc:
        raise ConfigError(f"could not parse polynomial {text.strip()!r}: {exc}") from exc


def _domain(text: Optional[str]):
    from .sublevel import AlgebraicDomain

    if text is None:
        return AlgebraicDomain.whole()
    path = Path(text)
    if "\n" not in text and len(text) < 4096 and path.is_file():
        text = path.read_text()
    try:
        return AlgebraicDomain.parse(text.replace(";", "\n"))
    except ValueError as exc:
        raise ConfigError(f"could not parse domain: {exc}") from exc


def run(config: ExperimentConfig) -> RunReport:
    config.validate()
    report = RunReport(config.to_dict())
    start = time.perf_counter()
    handler = {"analyze": _run_analyze, "resolve": _run_resolve, "decay": _run_decay,
               "sublevel": _run_sublevel, "decompose": _run_decompose, "profile": _run_profile}[config.subcommand]
    handler(config, report)
    report.timings["total_seconds"] = time.perf_counter() - start
    return report


def analyze_phase(S) -> dict:
    from .newton import newton_polyhedron
    from .poly import convolution_hessian, format_poly

    H = convolution_hessian(S)
    doc = {"phase": format_poly(S), "H": format_poly(H), "degenerate": H.is_zero()}
    if H.is_zero():
        doc.update(vertices=[], edges=[], d=None, exponent=None)
        return doc
    nd = newton_polyhedron(H)
    doc["vertices"] = [list(v) for v in nd.vertices]
    doc["edges"] = [{"M": str(e.M), "p": e.describe(), "weighted_degree": str(e.weighted_degree),
                     "roots": [{"value": r.value, "multiplicity": r.multiplicity, "sign": r.sign}
                               for r in e.real_roots]} for e in nd.edges]
    doc["d"] = nd.d
    doc["exponent"] = str(nd.exponent)
    return doc


def _run_analyze(cfg: ExperimentConfig, report: RunReport) -> None:
    report.results.append(analyze_phase(_phase(cfg.phase)))


def _run_decay(cfg: ExperimentConfig, report: RunReport) -> None:
    from .newton import DegeneratePhaseError
    from .trilinear import decay_sweep

    S = _phase(cfg.phase)
    try:
        sweep = decay_sweep(S, cfg.cutoff, cfg.lambdas(), cfg.n, restarts=cfg.restarts, iters=cfg.iters,
                            seed=cfg.seed)
    except DegeneratePhaseError as exc:
        raise ConfigError(str(exc)) from exc
    theory = float(sweep.theory_slope)
    report.tables["sweep"] = (("lambda", "norm", "extremizer_ratio"),
                              [(l, v, r) for l, v, r in zip(sweep.lambdas, sweep.norms, sweep.extremizer_ratios)])
    report.results.append({"fitted_slope": sweep.fitted_slope, "extremizer_slope": sweep.extremizer_slope,
                           "theory_slope": str(sweep.theory_slope)})
    report.measured.update(fitted_slope=sweep.fitted_slope, extremizer_slope=sweep.extremizer_slope)
    tol = cfg.slope_tol
    report.verdicts.append(Verdict.check(
        "extremizer_slope", abs(sweep.extremizer_slope - theory) <= tol,
        f"|{sweep.extremizer_slope:.4f} - ({theory:.4f})| <= {tol}"))
    report.verdicts.append(Verdict.check(
        "norm_slope", sweep.fitted_slope <= theory + tol,
        f"{sweep.fitted_slope:.4f} <= {theory:.4f} + {tol}"))


def _run_resolve(cfg: ExperimentConfig, report: RunReport) -> None:
    from .resolution import ResolutionBudgetError, ResolutionConfig, resolve

    H = _phase(cfg.phase)
    rc = ResolutionConfig(edge=cfg.edge, root=cfg.root, j=cfg.j, mu=Fraction(cfg.mu), eps=cfg.eps,
                          delta=cfg.delta, max_depth=cfg.max_depth, budget=cfg.budget, samples=cfg.samples,
                          seed=cfg.seed)
    try:
        rep = resolve(H, rc)
    except ResolutionBudgetError as exc:
        report.results.append({"error": str(exc), "depth_reached": exc.depth_reached, "processed": exc.processed})
        report.verdicts.append(Verdict("resolution", "fail",
                                       f"squares examined {exc.processed} > budget {cfg.budget}"))
        return
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    g_rects = rep.g.rects()
    rows = [(float(r[0]), float(r[1]), float(r[2]), float(r[3]), float(w), int(k), int(m), int(n))
            for r, w, k, m, n in zip(g_rects, rep.g.W, rep.g.k, rep.g.m, rep.g.n)]
    report.tables["rects"] = (("x_lo", "x_hi", "y_lo", "y_hi", "W", "k", "m", "n"), rows)
    f = rep.f_inf.f_infinity()
    f_rects = [[float(v) for v in r] for r in f.rects()[:JSON_RECT_LIMIT]]
    audits = rep.audits()
    report.results.append({
        "region": {"j": rep.region.j, "M": str(rep.region.M), "c": str(rep.region.c), "eps": str(rep.region.eps)},
        "mu": str(rep.mu), "d_i": str(rep.d_i), "delta": rep.delta,
        "f_infinity_count": len(f), "f_infinity": f_rects, "f_infinity_truncated": len(f) > JSON_RECT_LIMIT,
        "depth_capped": int(rep.f_inf.capped.sum()),
        "g_count": len(rep.g),
        "g": [{"rect": list(r[:4]), "W": r[4], "bin": list(r[5:])} for r in rows[:JSON_RECT_LIMIT]],
        "g_truncated": len(rows) > JSON_RECT_LIMIT,
        "audits": audits,
    })
    report.measured.update(overlap=rep.overlap, max_ratio=rep.comparability.max_ratio,
                           sigma=rep.eccentricity.sigma, delta0=rep.delta0)
    cov = rep.coverage.coverage
    report.verdicts += [
        Verdict.check("coverage", cov >= 0.999, f"{cov:.5f} >= 0.999"),
        Verdict.check("overlap", rep.overlap <= 16, f"{rep.overlap} <= 16"),
        Verdict.check("comparability", rep.comparability.max_ratio <= 8 and not rep.comparability.violations,
                      f"max_ratio {rep.comparability.max_ratio:.4f} <= 8, violations "
                      f"{len(rep.comparability.violations)} == 0"),
        Verdict.check("bin_window", rep.bin_window.ok,
                      f"|c1| = {abs(rep.bin_window.c1)}, |c2| = {abs(rep.bin_window.c2)} <= 64"),
        Verdict.check("delta0_stable", rep.delta0 > 0 and abs(rep.delta0_refined - rep.delta0) <= 0.2 * rep.delta0,
                      f"delta0 {rep.delta0:.5g} vs refined {rep.delta0_refined:.5g} within 20%"),
    ]


def _run_sublevel(cfg: ExperimentConfig, report: RunReport) -> None:
    from .sublevel import sublevel_sweep

    H = _phase(cfg.phase)
    try:
        sweep = sublevel_sweep(H, _domain(cfg.domain), cfg.mus(), [tuple(c) for c in cfg.conditions], cfg.n,
                               seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report.tables["sweep"] = (("mu", "norm"), list(zip(sweep.mus, sweep.norms)))
    theory = float(sweep.theory_exponent)
    report.results.append({"fitted_exponent": sweep.fitted_exponent, "theory_exponent": str(sweep.theory_exponent),
                           "d": sweep.d, "condition_floor": sweep.condition_floor, "bounds": sweep.bounds})
    report.measured["fitted_exponent"] = sweep.fitted_exponent
    lo, hi = theory - 0.05, theory + 0.08
    report.verdicts.append(Verdict.check("growth_exponent", lo <= sweep.fitted_exponent <= hi,
                                         f"{lo:.4f} <= {sweep.fitted_exponent:.4f} <= {hi:.4f}"))
    if sweep.bounds is not None:
        worst = max(v / b for v, b in zip(sweep.norms, sweep.bounds))
        report.verdicts.append(Verdict.check("monomial_bound", worst <= 1, f"max norm/bound {worst:.4f} <= 1"))


def _run_decompose(cfg: ExperimentConfig, report: RunReport) -> None:
    from .sublevel import critical_sets, decompose_domain, rejection_area

    domain = _domain(cfg.domain)
    crit = critical_sets(domain)
    traps = decompose_domain(domain, crit)
    rows = []
    out = []
    for i, t in enumerate(traps):
        out.append({"a": t.a, "b": t.b, "area": t.area(), "monotone": t.is_monotone(),
                    "g": {"source": None if t.g.source is None else str(t.g.source), "branch": t.g.branch},
                    "h": {"source": None if t.h.source is None else str(t.h.source), "branch": t.h.branch}})
        rows += [(i, float(x), float(g), float(h)) for x, g, h in zip(t.g.xs, t.g.ys, t.h(t.g.xs))]
    area = sum(t["area"] for t in out)
    ref = rejection_area(domain, 400_000, np.random.default_rng(cfg.seed))
    report.tables["boundaries"] = (("trapezoid", "x", "g", "h"), rows)
    report.results.append({"trapezoids": out, "critical": {
        "gamma1": crit.gamma1, "gamma2": crit.gamma2, "gamma3": crit.gamma3, "L": crit.L,
        "budget": crit.budget, "mode": crit.mode}, "area": area, "rejection_area": ref})
    report.measured.update(area=area, count=len(traps))
    report.verdicts += [
        Verdict.check("area", abs(area - ref) <= 2e-3 + 4 / math.sqrt(400_000),
                      f"|{area:.5f} - {ref:.5f}| <= 2e-3 + sampling error"),
        Verdict.check("monotone", all(t["monotone"] for t in out), "every boundary table monotone"),
        Verdict.check("count", len(traps) <= crit.budget["trapezoids"],
                      f"{len(traps)} <= {crit.budget['trapezoids']}"),
    ]


def _run_profile(cfg: ExperimentConfig, report: RunReport) -> None:
    from .trilinear import dyadic_profile

    S = _phase(cfg.phase)
    rows = dyadic_profile(S, cfg.lam, range(cfg.j_range[0], cfg.j_range[1] + 1),
                          range(cfg.k_range[0], cfg.k_range[1] + 1), cfg.cutoff, seed=cfg.seed)
    report.tables["profile"] = (("j", "k", "local_norm", "size_bound", "osc_bound", "flagged"),
                                [(r.j, r.k, r.local_norm, r.size_bound, r.osc_bound, r.flagged) for r in rows])
    flagged = sum(r.flagged for r in rows)
    report.results.append({"rows": len(rows), "flagged": flagged})
    report.verdicts.append(Verdict.check("envelopes", flagged == 0, f"{flagged} flagged boxes == 0"))


# --------------------------------------------------------------------------
# files

def emit(report: RunReport, formats=("json", "csv"), out_dir: Optional[str] = None) -> list[Path]:
    """Write ``summary.json`` and one CSV per table; returns the paths written."""
    out = Path(out_dir if out_dir is not None else report.config.get("out_dir", "oscint-out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    written = []
    if "json" in formats:
        path = out / "summary.json"
        path.write_text(report.to_json() + "\n")
        written.append(path)
    if "csv" in formats:
        for name, (cols, rows) in report.tables.items():
            path = out / f"{name}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                w.writerows(rows)
            written.append(path)
    return written
