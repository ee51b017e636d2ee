"""Experiment drivers.

Every experiment produces raw rows (one per replicate observation) and a
summary that is a pure function of the parsed raw table, so a stored summary
can always be recomputed and compared against its raw data.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import crt as crt_mod
from .config import ExperimentConfig
from .errors import InsufficientDataError
from .estimate import d_from_lgd_slope, fit_loglog, replicate_ci
from .field import GridSpec, sample_dgff, sample_layered, sample_layered_pair
from .formulas import (
    bounds_table,
    discrete_lfpp_exponent,
    lfpp_lambda,
    lfpp_xi,
    lower_bound,
    lqg_q,
    upper_bound,
    watabiki,
)
from .measure import build_measure, critical_radii
from .metrics import MetricQuery, lfpp_discrete_distance, lfpp_grid_distance, lgd_distance
from .seeding import as_rng, replicate_seed

SUMMARY_FIELDS = (
    "quantity",
    "value",
    "stderr",
    "ci_lo",
    "ci_hi",
    "theory",
    "theory_lo",
    "theory_hi",
    "n_points",
    "n_replicates",
    "intercept",
)

CORNERS = ((0.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class Experiment:
    raw_fields: tuple[str, ...]
    produce: Callable[[ExperimentConfig], list[tuple]]
    summarize: Callable[[ExperimentConfig, np.ndarray], list[dict]]
    plot: Callable[[ExperimentConfig, list[dict]], str]


def parallel_map(fn, units, threads: int) -> list:
    """Order-preserving map; results never depend on the worker count."""
    units = list(units)
    if threads <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, units))


def _flatten(chunks) -> list[tuple]:
    return [row for chunk in chunks for row in chunk]


def _row(quantity, value, stderr=None, ci=None, theory=None, lo=None, hi=None, n_points=None, reps=None):
    return {
        "quantity": quantity,
        "value": value,
        "stderr": stderr,
        "ci_lo": None if ci is None else ci[0],
        "ci_hi": None if ci is None else ci[1],
        "theory": theory,
        "theory_lo": lo,
        "theory_hi": hi,
        "n_points": n_points,
        "n_replicates": reps,
        "intercept": None,
    }


def default_t_min(n: int) -> float:
    """Finest dyadic scale the lattice resolves with four sites per scale."""
    spacing = 1.0 / (n - 1)
    return 2.0 ** -math.floor(math.log2(1.0 / (4.0 * spacing)))


def d_hat_of(cfg: ExperimentConfig) -> float:
    return watabiki(cfg.gamma) if cfg.d_hat is None else cfg.d_hat


def _slope_with_ci(points_by_rep: dict, n_reps: int, seed: int):
    pooled = fit_loglog([p for pts in points_by_rep.values() for p in pts], n_replicates=n_reps)
    ci = None
    if len(points_by_rep) >= 10:
        slopes = []
        for pts in points_by_rep.values():
            try:
                slopes.append(fit_loglog(pts).slope)
            except (InsufficientDataError, ValueError):
                continue
        if len(slopes) >= 10:
            ci = replicate_ci(slopes, seed=seed)
    return pooled, ci


def _group(raw: np.ndarray, key_col: int, x_col: int, y_col: int, transform=lambda x: x) -> dict:
    out: dict = {}
    for r in raw:
        if not np.isfinite(r[y_col]):
            continue
        out.setdefault(int(r[key_col]), []).append((transform(r[x_col]), r[y_col]))
    return out


def _loglog_plot(xlabel: str, ylabel: str, using: str, summary: list[dict], quantity: str) -> str:
    fit = next((s for s in summary if s["quantity"] == quantity), None)
    lines = [
        'set datafile separator ","',
        "set datafile commentschars '#'",
        "set logscale xy",
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
        "set key top left",
    ]
    if fit is not None and fit["value"] is not None and fit.get("intercept") is not None:
        lines.append(f"a = {fit['value']!r}")
        lines.append(f"b = {fit['intercept']!r}")
        lines.append(
            f'plot "raw.csv" using {using} skip 2 with points pt 7 ps 0.5 title "replicates", '
            'exp(b) * x**a with lines lw 2 title sprintf("fit slope %.3f", a)'
        )
    else:
        lines.append(f'plot "raw.csv" using {using} skip 2 with points pt 7 ps 0.5 title "replicates"')
    return "\n".join(lines) + "\n"


# --- bounds-table -----------------------------------------------------------


def _bounds_produce(cfg):
    return [(r.gamma, r.lower, r.upper, r.watabiki, r.quad) for r in bounds_table(cfg.gammas)]


def _bounds_summarize(cfg, raw):
    gam, lo, hi, wat = raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3]
    violations = int(np.count_nonzero((wat < lo) | (wat > hi) | (lo > hi)))
    rng = as_rng(replicate_seed(cfg.master_seed, 0))
    resid = 0.0
    for _ in range(100):
        g = float(rng.uniform(0.01, 1.99))
        d = float(rng.uniform(2.01, 10.0))
        resid = max(resid, abs((1.0 - lfpp_lambda(g, d)) / lfpp_xi(g, d) - lqg_q(g)))
    rows = [
        _row("sandwich_violations", violations, theory=0, n_points=len(gam)),
        _row("identity_max_residual", resid, theory=0.0, n_points=100),
    ]
    for g, a, b, w in zip(gam, lo, hi, wat):
        if any(abs(g - s) < 1e-12 for s in (math.sqrt(2.0), math.sqrt(8.0 / 3.0), 1.9999)):
            rows.append(_row(f"lower@{g!r}", float(a), theory=lower_bound(g)))
            rows.append(_row(f"upper@{g!r}", float(b), theory=upper_bound(g)))
            rows.append(_row(f"watabiki@{g!r}", float(w), theory=watabiki(g)))
    return rows


def _bounds_plot(cfg, summary):
    return "\n".join(
        [
            'set datafile separator ","',
            "set datafile commentschars '#'",
            'set xlabel "gamma"',
            'set ylabel "dimension"',
            "set xrange [0:2]",
            "set key top left",
            'plot "raw.csv" using 1:2 skip 2 with lines lw 2 title "lower bound", \\',
            '     "raw.csv" using 1:3 skip 2 with lines lw 2 title "upper bound", \\',
            '     "raw.csv" using 1:4 skip 2 with lines dt 2 title "Watabiki", \\',
            '     "raw.csv" using 1:5 skip 2 with lines dt 3 title "quadratic guess"',
        ]
    ) + "\n"


# --- field-check ------------------------------------------------------------


def _field_produce(cfg):
    spec = GridSpec(cfg.n)
    mid = (cfg.n - 1) // 2

    def unit(p):
        out = []
        for k, layered in enumerate(sample_layered_pair(spec, cfg.t_min, replicate_seed(cfg.master_seed, p))):
            rep = 2 * p + k
            if rep >= cfg.replicates:
                break
            f = layered.assemble()
            out.append((rep, float(f.values[mid, mid]), build_measure(f, cfg.gamma).total))
        return out

    return _flatten(parallel_map(unit, range((cfg.replicates + 1) // 2), cfg.threads))


def _field_summarize(cfg, raw):
    x, mass = raw[:, 1], raw[:, 2]
    n = x.size
    var = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    var_se = math.sqrt(max(m4 - var * var, 0.0) / n)
    return [
        _row("point_variance", var, var_se, theory=math.log(1.0 / cfg.t_min), n_points=n, reps=n),
        _row("point_mean", float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), theory=0.0, n_points=n, reps=n),
        _row("mean_total_mass", float(mass.mean()), float(mass.std(ddof=1) / math.sqrt(n)), theory=1.0, n_points=n, reps=n),
    ]


def _field_plot(cfg, summary):
    return "\n".join(
        [
            'set datafile separator ","',
            "set datafile commentschars '#'",
            'set xlabel "field value at the bulk point"',
            'set ylabel "count"',
            "binwidth = 0.25",
            "bin(x) = binwidth * floor(x / binwidth)",
            f"s2 = {math.log(1.0 / cfg.t_min)!r}",
            'plot "raw.csv" using (bin($2)):(1.0) skip 2 smooth freq with boxes title "samples", \\',
            f"     binwidth * {cfg.replicates} * exp(-x**2 / (2 * s2)) / sqrt(2 * pi * s2) "
            'with lines lw 2 title "N(0, log 1/t)"',
        ]
    ) + "\n"


# --- lgd-exponent -----------------------------------------------------------


def _lgd_produce(cfg):
    spec = GridSpec(cfg.n)
    t_min = cfg.t_min if cfg.t_min is not None else default_t_min(cfg.n)
    query = MetricQuery(CORNERS[0], CORNERS[1], model="lgd")

    def unit(rep):
        f = sample_layered(spec, t_min, replicate_seed(cfg.master_seed, rep)).assemble()
        measure = build_measure(f, cfg.gamma)
        out = []
        for eps in cfg.scales:
            radii = critical_radii(measure, f, eps, with_lower=False)
            run = lgd_distance(measure, radii, query)
            value = run.value if run.reachable else math.nan
            out.append((rep, float(eps), value, int(run.reachable), radii.degenerate_fraction))
        return out

    return _flatten(parallel_map(unit, range(cfg.replicates), cfg.threads))


def _lgd_summarize(cfg, raw):
    groups = _group(raw, 0, 1, 2, transform=lambda e: 1.0 / e)
    fit, ci = _slope_with_ci(groups, cfg.replicates, cfg.master_seed)
    d, d_se = d_from_lgd_slope(fit.slope, fit.stderr) if fit.slope > 0 else (math.nan, math.nan)
    row = _row(
        "lgd_slope",
        fit.slope,
        fit.stderr,
        ci,
        1.0 / watabiki(cfg.gamma),
        1.0 / upper_bound(cfg.gamma),
        1.0 / lower_bound(cfg.gamma),
        fit.n_points,
        cfg.replicates,
    )
    row["intercept"] = fit.intercept
    return [
        row,
        _row("d_from_lgd", d, d_se, None, watabiki(cfg.gamma), lower_bound(cfg.gamma), upper_bound(cfg.gamma), fit.n_points, cfg.replicates),
        _row("unreachable", int(np.count_nonzero(raw[:, 3] == 0)), theory=0, n_points=len(raw)),
        _row("max_degenerate_fraction", float(raw[:, 4].max()), n_points=len(raw)),
    ]


def _lgd_plot(cfg, summary):
    return _loglog_plot("1/epsilon", "LGD corner-to-corner distance", "(1/$2):3", summary, "lgd_slope")


# --- lfpp-exponent ----------------------------------------------------------


def _lfpp_produce(cfg):
    xi = lfpp_xi(cfg.gamma, d_hat_of(cfg))
    query = MetricQuery(CORNERS[0], CORNERS[1], model=cfg.model)
    units = [(rep, k) for rep in range(cfg.replicates) for k in range(len(cfg.scales))]
    if cfg.model == "lfpp_grid":
        spec = GridSpec(cfg.n)
        t_min = cfg.t_min if cfg.t_min is not None else default_t_min(cfg.n)

    def unit(task):
        rep, k = task
        scale = cfg.scales[k]
        if cfg.model == "lfpp_discrete":
            size = int(scale)
            f = sample_dgff(GridSpec(size), replicate_seed(cfg.master_seed, rep, k))
            run = lfpp_discrete_distance(f, xi, query)
        else:
            # one field per replicate, shared by every delta
            f = sample_layered(spec, t_min, replicate_seed(cfg.master_seed, rep)).assemble()
            run = lfpp_grid_distance(f, cfg.gamma, d_hat_of(cfg), scale, query)
        value = run.value if run.reachable else math.nan
        return [(rep, float(scale), value, run.path_length_cells)]

    return _flatten(parallel_map(unit, units, cfg.threads))


def _lfpp_summarize(cfg, raw):
    groups = _group(raw, 0, 1, 2)
    fit, ci = _slope_with_ci(groups, cfg.replicates, cfg.master_seed)
    d_hat = d_hat_of(cfg)
    if cfg.model == "lfpp_discrete":
        name, theory = "lfpp_discrete_slope", discrete_lfpp_exponent(cfg.gamma, d_hat)
    else:
        name, theory = "lfpp_grid_slope", lfpp_lambda(cfg.gamma, d_hat)
    row = _row(name, fit.slope, fit.stderr, ci, theory, None, None, fit.n_points, cfg.replicates)
    row["intercept"] = fit.intercept
    return [row, _row("xi", lfpp_xi(cfg.gamma, d_hat), theory=cfg.gamma / d_hat)]


def _lfpp_plot(cfg, summary):
    label = "box size n" if cfg.model == "lfpp_discrete" else "delta"
    name = "lfpp_discrete_slope" if cfg.model == "lfpp_discrete" else "lfpp_grid_slope"
    return _loglog_plot(label, "LFPP corner-to-corner distance", "2:3", summary, name)


# --- crt-ball ---------------------------------------------------------------


def _crt_produce(cfg):
    r_hi = cfg.r_range[1]

    def unit(rep):
        trace = crt_mod.sample_bm(cfg.gamma, cfg.n, cfg.substeps, seed=replicate_seed(cfg.master_seed, rep, 0))
        cmap = crt_mod.build_map(trace)
        del trace
        centers = crt_mod.bulk_centers(cmap, cfg.centers, seed=replicate_seed(cfg.master_seed, rep, 1))
        seen = np.zeros(cmap.n, dtype=np.bool_)
        out = []
        for c in centers.tolist():
            prof = crt_mod.ball_profile(cmap, c, r_hi, _seen=seen)
            out.extend((rep, cmap.n, cmap.n_edges, c, int(r), int(v)) for r, v in zip(prof.radii, prof.volumes))
        return out

    return _flatten(parallel_map(unit, range(cfg.replicates), cfg.threads))


def _crt_profiles(raw):
    profiles: dict = {}
    for rep, _, _, c, r, v in raw:
        profiles.setdefault((int(rep), int(c)), []).append((int(r), int(v)))
    out = {}
    for key, pts in profiles.items():
        pts.sort()
        out[key] = crt_mod.BallProfile(
            np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), key[1]
        )
    return out


def _crt_summarize(cfg, raw):
    lo, hi = cfg.r_range
    profiles = _crt_profiles(raw)
    fit = crt_mod.growth_exponent(list(profiles.values()), lo, hi)
    per_rep: dict = {}
    for (rep, _), prof in profiles.items():
        sel = (prof.radii >= lo) & (prof.radii <= hi)
        per_rep.setdefault(rep, []).extend(zip(prof.radii[sel].tolist(), prof.volumes[sel].tolist()))
    ci = None
    if len(per_rep) >= 10:
        ci = replicate_ci([fit_loglog(p).slope for p in per_rep.values()], seed=cfg.master_seed)
    excess = raw[:, 2] - (3 * raw[:, 1] - 6)
    row = _row(
        "ball_growth_slope",
        fit.slope,
        fit.stderr,
        ci,
        watabiki(cfg.gamma),
        lower_bound(cfg.gamma),
        upper_bound(cfg.gamma),
        fit.n_points,
        len(per_rep),
    )
    row["intercept"] = fit.intercept
    return [
        row,
        _row("max_edge_excess", int(excess.max()), theory=0, n_points=len(per_rep), reps=len(per_rep)),
        _row("profiles", len(profiles), n_points=len(profiles), reps=len(per_rep)),
    ]


def _crt_plot(cfg, summary):
    return _loglog_plot("graph radius r", "ball volume", "5:6", summary, "ball_growth_slope")


# --- oracle-suite -----------------------------------------------------------

ORACLE_CHECKS = ("crt_stack", "lfpp_paths", "ball_mass", "shift_lgd", "shift_lfpp")


def _oracle_produce(cfg):
    from .oracles import brute_ball_mass, exhaustive_path_min
    from .metrics import lfpp_weighted_distance

    def crt_unit(seed):
        trace = crt_mod.sample_bm(cfg.gamma, 2000, 4, seed=replicate_seed(cfg.master_seed, 0, seed))
        bad = 0
        for m in (trace.l_min, trace.r_min):
            fast = crt_mod.coordinate_edges(m)
            ref_u, ref_v = crt_mod.brute_force_edges(m)
            ref = np.stack([ref_u, ref_v], axis=1)
            ref = ref[np.lexsort((ref[:, 0], ref[:, 1]))]
            bad += int(fast.shape != ref.shape or not np.array_equal(fast, ref))
        return [(0, seed, int(bad > 0), len(fast), len(ref))]

    def path_unit(t):
        rng = as_rng(replicate_seed(cfg.master_seed, 1, t))
        w = np.exp(rng.normal(size=(4, 4)))
        src, tgt = (0, 0), (3, 3)
        if t % 2:
            src, tgt = tuple(rng.integers(0, 4, 2)), tuple(rng.integers(0, 4, 2))
        fast = lfpp_weighted_distance(w, [src], [tgt])
        ref = exhaustive_path_min(w, src, tgt)
        return [(1, t, int(fast != ref), fast, ref)]

    def ball_unit(t):
        rng = as_rng(replicate_seed(cfg.master_seed, 2, t))
        f = sample_layered(GridSpec(33), 1 / 8, rng).assemble()
        m = build_measure(f, float(rng.uniform(0.2, 1.9)))
        c = rng.uniform(-0.2, 1.2, 2)
        r = float(rng.uniform(0.0, 0.8))
        if t % 4 == 0:
            # radius landing exactly on a lattice distance
            c = np.round(c * 32) / 32
            r = math.hypot(3, 4) / 32
        from .measure import ball_mass

        fast, ref = ball_mass(m, c, r), brute_ball_mass(m, c, r)
        return [(2, t, int(not math.isclose(fast, ref, rel_tol=1e-12, abs_tol=1e-300)), fast, ref)]

    def shift_lgd_unit(t):
        rng = as_rng(replicate_seed(cfg.master_seed, 3, t))
        gamma = float(rng.uniform(0.3, 1.9))
        c = float(rng.uniform(-1.5, 1.5))
        f = sample_layered(GridSpec(33), 1 / 8, rng).assemble()
        m0, m1 = build_measure(f, gamma), build_measure(f.shifted(c), gamma)
        eps = m0.total * 2.0 ** -float(rng.integers(1, 5))
        r0 = critical_radii(m0, f, eps, with_lower=False)
        r1 = critical_radii(m1, f.shifted(c), eps * math.exp(gamma * c), with_lower=False)
        q = MetricQuery((0.0, 0.0), (1.0, 1.0))
        d0 = lgd_distance(m0, r0, q).value
        d1 = lgd_distance(m1, r1, q).value
        bad = int(not np.array_equal(r0.r_bar, r1.r_bar) or d0 != d1)
        return [(3, t, bad, d0, d1)]

    def shift_lfpp_unit(t):
        rng = as_rng(replicate_seed(cfg.master_seed, 4, t))
        gamma = float(rng.uniform(0.3, 1.9))
        c = float(rng.uniform(-1.5, 1.5))
        d_hat = float(rng.uniform(2.5, 5.0))
        xi = gamma / d_hat
        q = MetricQuery((0.0, 0.0), (1.0, 1.0))
        if t % 2:
            f = sample_dgff(GridSpec(24), rng)
            a = lfpp_discrete_distance(f, xi, q).value
            b = lfpp_discrete_distance(f.shifted(c), xi, q).value
        else:
            f = sample_layered(GridSpec(65), 1 / 16, rng).assemble()
            a = lfpp_grid_distance(f, gamma, d_hat, 1 / 16, q).value
            b = lfpp_grid_distance(f.shifted(c), gamma, d_hat, 1 / 16, q).value
        ratio = b / (a * math.exp(xi * c))
        return [(4, t, int(abs(ratio - 1.0) > 1e-12), a, b)]

    chunks = []
    chunks += parallel_map(crt_unit, range(cfg.replicates), cfg.threads)
    chunks += parallel_map(path_unit, range(50), cfg.threads)
    chunks += parallel_map(ball_unit, range(100), cfg.threads)
    chunks += parallel_map(shift_lgd_unit, range(20), cfg.threads)
    chunks += parallel_map(shift_lfpp_unit, range(20), cfg.threads)
    return _flatten(chunks)


def _oracle_summarize(cfg, raw):
    rows = []
    for code, name in enumerate(ORACLE_CHECKS):
        sel = raw[raw[:, 0] == code]
        rows.append(_row(f"{name}_mismatches", int(sel[:, 2].sum()), theory=0, n_points=len(sel)))
    return rows


def _oracle_plot(cfg, summary):
    return "\n".join(
        [
            'set datafile separator ","',
            "set datafile commentschars '#'",
            "set style data histograms",
            "set style fill solid",
            'set ylabel "mismatches"',
            'plot "summary.csv" using 2:xtic(1) skip 2 title "oracle mismatches"',
        ]
    ) + "\n"


EXPERIMENT_TABLE = {
    "bounds-table": Experiment(("gamma", "lower", "upper", "watabiki", "quad"), _bounds_produce, _bounds_summarize, _bounds_plot),
    "field-check": Experiment(("replicate", "point_value", "total_mass"), _field_produce, _field_summarize, _field_plot),
    "lgd-exponent": Experiment(
        ("replicate", "eps", "distance", "reachable", "degenerate_fraction"), _lgd_produce, _lgd_summarize, _lgd_plot
    ),
    "lfpp-exponent": Experiment(("replicate", "scale", "distance", "path_cells"), _lfpp_produce, _lfpp_summarize, _lfpp_plot),
    "crt-ball": Experiment(
        ("replicate", "n_vertices", "n_edges", "center", "radius", "volume"), _crt_produce, _crt_summarize, _crt_plot
    ),
    "oracle-suite": Experiment(("check", "trial", "mismatch", "fast", "reference"), _oracle_produce, _oracle_summarize, _oracle_plot),
}
