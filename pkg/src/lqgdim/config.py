"""Experiment configuration: JSON file plus flag overrides."""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .formulas import GAMMA_PURE_GRAVITY

EXPERIMENTS = ("bounds-table", "field-check", "lgd-exponent", "lfpp-exponent", "crt-ball", "oracle-suite")
LFPP_MODELS = ("lfpp_discrete", "lfpp_grid")


class ConfigError(ValueError):
    """Configuration is malformed or inconsistent."""


def default_threads() -> int:
    raw = os.environ.get("LQGDIM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"LQGDIM_THREADS={raw!r} is not an integer") from exc
    if value < 1:
        raise ConfigError("LQGDIM_THREADS must be >= 1")
    return value


def _default_gammas() -> list[float]:
    grid = [round(0.01 * k, 10) for k in range(1, 200)]
    return sorted(set(grid) | {math.sqrt(2.0), GAMMA_PURE_GRAVITY, 1.9999})


# experiment -> overrides of the generic defaults
_PRESETS: dict[str, dict] = {
    "bounds-table": {"gammas": None, "replicates": 1},
    "field-check": {"gamma": 1.0, "n": 65, "t_min": 1 / 16, "replicates": 10_000},
    "lgd-exponent": {"n": 1025, "scales": [2.0**-k for k in range(12, 6, -1)], "replicates": 4},
    "lfpp-exponent": {"scales": [256, 512, 1024, 2048], "replicates": 20},
    "crt-ball": {"n": 10_000_000, "r_range": [10, 40], "replicates": 20, "centers": 5},
    "oracle-suite": {"replicates": 100},
}


@dataclass
class ExperimentConfig:
    """All knobs of one experiment run.

    ``scales`` holds epsilons (lgd-exponent), box sizes (discrete LFPP) or
    square sides delta (grid LFPP).  ``n`` is the lattice size for field
    experiments and the number of walk cells for crt-ball.
    """

    experiment: str
    gamma: float = GAMMA_PURE_GRAVITY
    n: int = 257
    t_min: float | None = None
    scales: list[float] = field(default_factory=list)
    r_range: list[int] = field(default_factory=lambda: [10, 40])
    replicates: int = 1
    master_seed: int = 0
    threads: int = 1
    output_dir: str = "results"
    model: str = "lfpp_discrete"
    d_hat: float | None = None
    substeps: int = 16
    centers: int = 5
    gammas: list[float] | None = None

    @classmethod
    def preset(cls, experiment: str, **overrides) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        values = dict(_PRESETS[experiment])
        values.update(overrides)
        if experiment == "lfpp-exponent" and values.get("model") == "lfpp_grid" and "scales" not in overrides:
            values["scales"] = [1 / 64, 1 / 32, 1 / 16, 1 / 8]
        if experiment == "bounds-table" and values.get("gammas") is None:
            values["gammas"] = _default_gammas()
        values.setdefault("threads", default_threads())
        return cls(experiment=experiment, **values)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' key")
        rest = {k: v for k, v in data.items() if k != "experiment"}
        return cls.preset(data["experiment"], **rest)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("replicates must be an integer >= 1")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads must be an integer >= 1")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")
        if self.experiment != "bounds-table" and not 0.0 < self.gamma < 2.0:
            raise ConfigError(f"gamma={self.gamma} must lie in (0, 2)")
        if self.d_hat is not None and not self.d_hat > 2.0:
            raise ConfigError("d_hat must exceed 2")
        if self.scales != sorted(self.scales):
            raise ConfigError("scales must be sorted ascending")
        check = getattr(self, "_validate_" + self.experiment.replace("-", "_"), None)
        if check is not None:
            check()
        return self

    def _need_fit_scales(self, what: str):
        if not self.scales:
            raise ConfigError(f"{what} list is empty")
        if len(set(self.scales)) < 3:
            raise ConfigError(f"{what} list needs at least 3 distinct values to fit a slope")
        if any(s <= 0 for s in self.scales):
            raise ConfigError(f"{what} values must be positive")

    def _validate_bounds_table(self):
        if not self.gammas:
            raise ConfigError("gammas list is empty")
        if any(not 0.0 < g < 2.0 for g in self.gammas):
            raise ConfigError("gammas must lie in (0, 2)")

    def _validate_field_check(self):
        if self.t_min is None:
            raise ConfigError("field-check needs t_min")
        if self.n < 3:
            raise ConfigError("n must be >= 3")
        if self.replicates < 2:
            raise ConfigError("field-check needs at least 2 replicates for a variance")

    def _validate_lgd_exponent(self):
        self._need_fit_scales("epsilon")
        if self.n < 9:
            raise ConfigError("n must be >= 9")

    def _validate_lfpp_exponent(self):
        if self.model not in LFPP_MODELS:
            raise ConfigError(f"model must be one of {LFPP_MODELS}")
        self._need_fit_scales("scale")
        if self.model == "lfpp_discrete" and any(int(s) != s or s < 4 for s in self.scales):
            raise ConfigError("discrete LFPP box sizes must be integers >= 4")
        if self.model == "lfpp_grid" and any(s > 0.5 for s in self.scales):
            raise ConfigError("delta values must be <= 1/2")

    def _validate_crt_ball(self):
        lo, hi = self.r_range
        if not 5 <= lo < hi:
            raise ConfigError("r_range must satisfy 5 <= r_lo < r_hi")
        if self.n < 100:
            raise ConfigError("crt-ball needs n >= 100")
        if self.centers < 1 or self.substeps < 1:
            raise ConfigError("centers and substeps must be >= 1")


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return ExperimentConfig.from_dict(data)
