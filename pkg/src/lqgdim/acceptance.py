"""Pass/fail evaluation of a finished run directory."""
from __future__ import annotations

import difflib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import MissingInputError
from .experiments import d_hat_of
from .formulas import GAMMA_PURE_GRAVITY, lower_bound, upper_bound
from .runner import parse_raw, read_csv, render_summary, summarize_dir

# (label, gamma, column, target, tolerance)
BOUND_GOLDENS = (
    ("lower bound at sqrt(2)", math.sqrt(2.0), 1, 3.46410, 1e-4),
    ("upper bound at sqrt(2)", math.sqrt(2.0), 2, 3.63299, 1e-4),
    ("lower bound at sqrt(8/3)", GAMMA_PURE_GRAVITY, 1, 4.00000, 1e-4),
    ("upper bound at sqrt(8/3)", GAMMA_PURE_GRAVITY, 2, 4.00000, 1e-4),
    ("lower bound near gamma=2", 1.9999, 1, 4.77485, 1e-3),
    ("upper bound near gamma=2", 1.9999, 2, 4.89898, 1e-3),
)


@dataclass(frozen=True)
class CriterionResult:
    criterion: str
    name: str
    measured: float | None
    target: str
    tolerance: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class AcceptanceReport:
    output_dir: str
    experiment: str
    results: tuple[CriterionResult, ...]

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    def to_json(self) -> str:
        body = {
            "output_dir": self.output_dir,
            "experiment": self.experiment,
            "passed": self.passed,
            "criteria": [asdict(r) for r in self.results],
        }
        return json.dumps(body, indent=2) + "\n"

    def lines(self) -> list[str]:
        return [
            f"[{'PASS' if r.passed else 'FAIL'}] {r.criterion} {r.name}: measured={r.measured} "
            f"target={r.target} tol={r.tolerance}" + (f" ({r.detail.splitlines()[0]})" if r.detail else "")
            for r in self.results
        ]


def _summary_table(path: Path) -> dict[str, dict[str, float | None]]:
    header, rows = read_csv(path)
    table = {}
    for row in rows:
        rec = dict(zip(header, row))
        table[rec["quantity"]] = {k: (float(v) if v != "" else None) for k, v in rec.items() if k != "quantity"}
    return table


def _within(name, crit, value, target, tol) -> CriterionResult:
    ok = value is not None and math.isfinite(value) and abs(value - target) <= tol
    return CriterionResult(crit, name, value, repr(target), repr(tol), ok)


def _band(name, crit, value, lo, hi) -> CriterionResult:
    ok = value is not None and math.isfinite(value) and lo <= value <= hi
    return CriterionResult(crit, name, value, f"[{lo:.6g}, {hi:.6g}]", "band", ok)


def _value(summary, quantity, key="value"):
    rec = summary.get(quantity)
    return None if rec is None else rec.get(key)


def _bounds(cfg, raw, summary):
    out = []
    for label, g, col, target, tol in BOUND_GOLDENS:
        hit = raw[abs(raw[:, 0] - g) < 1e-9]
        measured = float(hit[0, col]) if len(hit) else None
        res = _within(label, "1", measured, target, tol)
        if measured is None:
            res = CriterionResult("1", label, None, repr(target), repr(tol), False, f"no row for gamma={g!r}")
        out.append(res)
    lo, hi, wat = raw[:, 1], raw[:, 2], raw[:, 3]
    bad = int(((wat < lo) | (wat > hi) | (lo > hi)).sum())
    out.append(
        CriterionResult(
            "2", "lower <= Watabiki <= upper on the gamma grid", bad, "0 violations", f">= 199 rows (got {len(raw)})",
            bad == 0 and len(raw) >= 199,
        )
    )
    out.append(_within("(1-lambda)/xi = Q identity, max residual", "3", _value(summary, "identity_max_residual"), 0.0, 1e-12))
    return out


def _field(cfg, raw, summary):
    out = []
    for crit, name, q in (("4", "field variance at bulk point", "point_variance"), ("5", "mean total mass", "mean_total_mass")):
        v, se, th = _value(summary, q), _value(summary, q, "stderr"), _value(summary, q, "theory")
        if v is None or se is None or th is None:
            out.append(CriterionResult(crit, name, v, "n/a", "3 SE", False, f"summary lacks {q}"))
        else:
            out.append(_within(name, crit, v, th, 3.0 * se))
    return out


def _lgd(cfg, raw, summary):
    g = cfg.gamma
    return [
        _band("LGD exponent band", "lgd", _value(summary, "lgd_slope"), 1 / upper_bound(g) - 0.1, 1 / lower_bound(g) + 0.1),
        _within("unreachable corner pairs", "lgd", _value(summary, "unreachable"), 0.0, 0.0),
    ]


def _lfpp(cfg, raw, summary):
    if cfg.model == "lfpp_discrete":
        q = "lfpp_discrete_slope"
        theory = _value(summary, q, "theory")
        if abs(cfg.gamma - GAMMA_PURE_GRAVITY) < 1e-9 and abs(d_hat_of(cfg) - 4.0) < 1e-9:
            lo, hi = 0.68, 0.98
        else:
            lo, hi = (theory or math.nan) - 0.15, (theory or math.nan) + 0.15
        return [_band("discrete LFPP exponent", "9", _value(summary, q), lo, hi)]
    theory = _value(summary, "lfpp_grid_slope", "theory") or math.nan
    return [_band("grid LFPP exponent", "lfpp", _value(summary, "lfpp_grid_slope"), theory - 0.15, theory + 0.15)]


def _crt(cfg, raw, summary):
    g = cfg.gamma
    excess = float((raw[:, 2] - (3 * raw[:, 1] - 6)).max()) if len(raw) else None
    return [
        CriterionResult("7", "edges <= 3n - 6 on every run", excess, "<= 0", "exact", excess is not None and excess <= 0),
        _band("ball growth exponent", "8", _value(summary, "ball_growth_slope"), lower_bound(g) - 0.8, upper_bound(g) + 0.8),
    ]


def _oracle(cfg, raw, summary):
    spec = (
        ("6a", "CRT stack vs brute force", "crt_stack_mismatches", 100),
        ("6b", "Dijkstra vs path enumeration", "lfpp_paths_mismatches", 50),
        ("6c", "ball mass vs brute force", "ball_mass_mismatches", 100),
        ("10", "LGD shift invariance", "shift_lgd_mismatches", 20),
        ("10", "LFPP shift scaling", "shift_lfpp_mismatches", 20),
    )
    out = []
    for crit, name, q, trials in spec:
        v, n = _value(summary, q), _value(summary, q, "n_points")
        need = trials if crit != "6a" else min(trials, cfg.replicates)
        ok = v == 0 and n is not None and n >= need
        out.append(CriterionResult(crit, name, v, "0 mismatches", f"{need} trials (got {n})", ok))
    return out


_CHECKS = {
    "bounds-table": _bounds,
    "field-check": _field,
    "lgd-exponent": _lgd,
    "lfpp-exponent": _lfpp,
    "crt-ball": _crt,
    "oracle-suite": _oracle,
}


def check_acceptance(target) -> AcceptanceReport:
    """Evaluate the criteria that apply to a run directory (or a config naming one).

    Writes ``acceptance.json`` next to the results.  A summary that no longer
    matches what its raw table implies fails with a unified diff.
    """
    if isinstance(target, ExperimentConfig):
        out = target.out
    else:
        out = Path(target)
    missing = [f for f in ("config.json", "raw.csv", "summary.csv") if not (out / f).is_file()]
    if missing:
        raise MissingInputError(f"{out}: missing {', '.join(missing)}")
    cfg = load_config(out / "config.json")
    raw = parse_raw(out / "raw.csv")
    stored = (out / "summary.csv").read_text()
    summary = _summary_table(out / "summary.csv")
    results = list(_CHECKS[cfg.experiment](cfg, raw, summary))
    expected = render_summary(summarize_dir(cfg, out / "raw.csv"))
    diff = "".join(
        difflib.unified_diff(
            expected.splitlines(True), stored.splitlines(True), "summary.csv (recomputed)", "summary.csv (stored)"
        )
    )
    results.append(
        CriterionResult("consistency", "summary matches raw data", None, "identical", "byte-exact", not diff, diff)
    )
    report = AcceptanceReport(str(out), cfg.experiment, tuple(results))
    (out / "acceptance.json").write_text(report.to_json())
    return report
