"""Run an experiment and persist config echo, CSVs, gnuplot script and metadata."""
from __future__ import annotations

import datetime as _dt
import json
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .experiments import EXPERIMENT_TABLE, SUMMARY_FIELDS

SCHEMA_LINE = "# schema=1"
FILES = ("config.json", "raw.csv", "summary.csv", "plot.gp", "metadata.json")


def format_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, fields, rows) -> None:
    lines = [SCHEMA_LINE, ",".join(fields)]
    for row in rows:
        cells = [row.get(f) for f in fields] if isinstance(row, dict) else list(row)
        lines.append(",".join(format_cell(c) for c in cells))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: missing '{SCHEMA_LINE}' line")
    header = lines[1].split(",")
    return header, [line.split(",") for line in lines[2:] if line]


def parse_raw(path: Path) -> np.ndarray:
    header, rows = read_csv(path)
    if not rows:
        return np.empty((0, len(header)))
    return np.array([[float(c) for c in r] for r in rows], dtype=float)


def render_summary(rows) -> str:
    lines = [SCHEMA_LINE, ",".join(SUMMARY_FIELDS)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(f)) for f in SUMMARY_FIELDS))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunOutcome:
    config: ExperimentConfig
    output_dir: Path
    summary: list[dict]
    runtime_s: float


def summarize_dir(config: ExperimentConfig, raw_path: Path) -> list[dict]:
    exp = EXPERIMENT_TABLE[config.experiment]
    return exp.summarize(config, parse_raw(raw_path))


def run(config: ExperimentConfig) -> RunOutcome:
    """Execute ``config`` and write its artifacts under ``config.output_dir``."""
    config.validate()
    exp = EXPERIMENT_TABLE[config.experiment]
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json())
    start = time.perf_counter()
    rows = exp.produce(config)
    write_csv(out / "raw.csv", exp.raw_fields, rows)
    # summarise what was written, so the file pair is self-consistent
    summary = summarize_dir(config, out / "raw.csv")
    runtime = time.perf_counter() - start
    (out / "summary.csv").write_text(render_summary(summary))
    (out / "plot.gp").write_text(exp.plot(config, summary))
    meta = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "runtime_s": round(runtime, 3),
        "threads": config.threads,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "rows": len(rows),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    return RunOutcome(config, out, summary, runtime)
