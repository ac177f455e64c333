"""JSON experiment configs, presets, and trajectory/report serialization.

A config may describe the teacher and ``y0`` by a random recipe; resolving it
produces an equivalent config with explicit vectors, which is what gets
written to ``manifest.json``. Floats are written with ``repr`` (shortest
round-trip form), so a manifest reproduces its run bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import (
    ExperimentConfig,
    GradientSource,
    LearningRateSchedule,
    Trajectory,
    UpdateRule,
    example1_config,
)
from .instances import random_teacher, random_y0
from .model import Teacher
from .quantize import QuantizationMode

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid config; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class TrajectoryFormatError(ValueError):
    pass


def _get(d: dict, key: str, path: str, default=...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    return d[key]


def _number(x, path: str, positive=False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(path, f"expected a finite number, got {x!r}")
    if positive and not x > 0:
        raise ConfigError(path, f"must be positive, got {x!r}")
    return float(x)


def _integer(x, path: str, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {x}")
    return x


def _vector(x, path: str, n: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError(path, "expected a non-empty list of numbers")
    vals = [_number(v, f"{path}[{i}]") for i, v in enumerate(x)]
    if n is not None and len(vals) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(vals)}")
    return np.asarray(vals)


def _teacher(d, path: str, n: int) -> Teacher:
    if "random" in d:
        recipe = d["random"]
        seed = _integer(_get(recipe, "seed", f"{path}.random"), f"{path}.random.seed")
        m = _integer(_get(recipe, "m", f"{path}.random", 4), f"{path}.random.m", 1)
        norm_sq = _get(recipe, "v_norm_sq", f"{path}.random", None)
        if norm_sq is not None:
            norm_sq = _number(norm_sq, f"{path}.random.v_norm_sq", positive=True)
        return random_teacher(n, m, np.random.default_rng(seed), v_norm_sq=norm_sq)
    w = _vector(_get(d, "w_star", path), f"{path}.w_star", n)
    norm = float(np.linalg.norm(w))
    if norm == 0:
        raise ConfigError(f"{path}.w_star", "teacher weights must be nonzero")
    if _get(d, "normalize", path, False):
        w = w / norm
    elif abs(norm - 1.0) > 1e-12:
        raise ConfigError(f"{path}.w_star", f"must have unit norm (got {norm!r}); set normalize=true")
    if "v" in d:
        v = _vector(d["v"], f"{path}.v")
        return Teacher(w, float(v @ v), v)
    return Teacher(w, _number(_get(d, "v_norm_sq", path), f"{path}.v_norm_sq", positive=True))


def _schedule(d, path: str) -> LearningRateSchedule:
    kind = _get(d, "kind", path)
    eta_max = _get(d, "eta_max", path, None)
    if eta_max is not None:
        eta_max = _number(eta_max, f"{path}.eta_max", positive=True)
    try:
        if kind == "constant":
            return LearningRateSchedule("constant", _number(_get(d, "eta", path), f"{path}.eta", True), eta_max=eta_max)
        if kind == "harmonic":
            return LearningRateSchedule("harmonic", _number(_get(d, "a", path), f"{path}.a", True), eta_max=eta_max)
        if kind == "table":
            vals = _vector(_get(d, "values", path), f"{path}.values")
            return LearningRateSchedule("table", table=tuple(vals),
                                        repeat_last=bool(_get(d, "repeat_last", path, True)), eta_max=eta_max)
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(path, str(e)) from None
    raise ConfigError(f"{path}.kind", f"unknown schedule kind {kind!r}")


def _gradient(d, path: str) -> GradientSource:
    src = _get(d, "source", path, "population")
    if src == "population":
        return GradientSource()
    if src == "sampled":
        return GradientSource(
            "sampled",
            batch=_integer(_get(d, "batch", path, 64), f"{path}.batch", 1),
            seed=_integer(_get(d, "seed", path, 0), f"{path}.seed"),
        )
    raise ConfigError(f"{path}.source", f"unknown gradient source {src!r}")


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from its JSON form, resolving random recipes."""
    if not isinstance(d, dict):
        raise ConfigError("$", "config must be a JSON object")
    n = _integer(_get(d, "n", "$"), "$.n", 1)
    try:
        mode = QuantizationMode.parse(_get(d, "mode", "$"))
    except ValueError as e:
        raise ConfigError("$.mode", str(e)) from None
    iterations = _integer(_get(d, "iterations", "$"), "$.iterations", 1)
    teacher = _teacher(_get(d, "teacher", "$"), "$.teacher", n)
    schedule = _schedule(_get(d, "schedule", "$"), "$.schedule")
    y0_spec = _get(d, "y0", "$")
    if isinstance(y0_spec, dict):
        seed = _integer(_get(y0_spec, "seed", "$.y0"), "$.y0.seed")
        scale = _number(_get(y0_spec, "scale", "$.y0", 1.0), "$.y0.scale", positive=True)
        y0 = random_y0(n, np.random.default_rng(seed), scale)
    else:
        y0 = _vector(y0_spec, "$.y0", n)
        if not np.any(y0):
            raise ConfigError("$.y0", "must be nonzero")
    gradient = _gradient(_get(d, "gradient", "$", {}), "$.gradient")
    rule = _get(d, "update_rule", "$", "quant")
    try:
        rule = UpdateRule(rule)
    except ValueError:
        raise ConfigError("$.update_rule", f"unknown update rule {rule!r}") from None
    name = _get(d, "name", "$", "run")
    if not isinstance(name, str):
        raise ConfigError("$.name", "expected a string")
    try:
        return ExperimentConfig(n=n, mode=mode, teacher=teacher, schedule=schedule, iterations=iterations,
                                y0=y0, gradient=gradient, update_rule=rule, name=name)
    except ValueError as e:
        raise ConfigError("$", str(e)) from None


def _floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=float)]


def config_to_dict(config: ExperimentConfig) -> dict:
    """Fully resolved JSON form of a config."""
    teacher = {"w_star": _floats(config.teacher.w_star)}
    if config.teacher.v is not None:
        teacher["v"] = _floats(config.teacher.v)
    else:
        teacher["v_norm_sq"] = config.teacher.v_norm_sq
    return {
        "schema_version": SCHEMA_VERSION,
        "name": config.name,
        "n": config.n,
        "mode": config.mode.value,
        "iterations": config.iterations,
        "teacher": teacher,
        "schedule": config.schedule.to_dict(),
        "y0": _floats(config.y0),
        "gradient": config.gradient.to_dict(),
        "update_rule": config.update_rule.value,
    }


PRESETS = {
    "example1": {
        "name": "example1",
        "n": 4,
        "mode": "binary",
        "iterations": 1000,
        "teacher": None,
        "schedule": {"kind": "constant", "eta": 0.1},
        "y0": None,
    },
    "synthetic-fig2": {
        "name": "synthetic-fig2",
        "n": 8,
        "mode": "binary",
        "iterations": 200,
        "teacher": {"random": {"seed": 2021, "m": 4}},
        "schedule": {"kind": "constant", "eta": 0.1},
        "y0": {"seed": 2022, "scale": 1.0},
        "gradient": {"source": "population"},
        "update_rule": "quant",
    },
}


def preset_recipe(name: str, mode: str | None = None) -> dict:
    """JSON config of a built-in preset, random recipes left unresolved."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "example1":
        if mode not in (None, "binary"):
            raise ConfigError("mode", "the example1 preset is binary only")
        return config_to_dict(example1_config())
    d = json.loads(json.dumps(PRESETS[name]))
    if mode is not None:
        d["mode"] = mode
        d["name"] = f"{name}-{mode}"
    return d


def preset_dict(name: str, mode: str | None = None) -> dict:
    """Resolved JSON config of a built-in preset."""
    return config_to_dict(config_from_dict(preset_recipe(name, mode)))


def load_config(path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"invalid JSON: {e}") from None
    return config_from_dict(d)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = traj.n
    writer.writerow(["t", "eta"] + [f"y_{i}" for i in range(1, n + 1)]
                    + [f"w_{i}" for i in range(1, n + 1)] + ["delta"])
    w = traj.w
    delta = traj.delta
    for t in range(len(traj)):
        writer.writerow([str(t), _fmt(traj.eta[t])] + [_fmt(x) for x in traj.y[t]]
                        + [_fmt(x) for x in w[t]] + [_fmt(delta[t])])
    return buf.getvalue()


def sign_matrix_csv(traj: Trajectory, last: int | None = None) -> str:
    rows = traj.sign_matrix(last)
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in rows)


def read_trajectory_csv(text: str, mode) -> Trajectory:
    """Parse a trajectory CSV; the mode is not stored in the file."""
    mode = QuantizationMode.parse(mode)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise TrajectoryFormatError("empty trajectory file")
    header = rows[0]
    if len(header) < 5 or header[:2] != ["t", "eta"] or header[-1] != "delta" or (len(header) - 3) % 2:
        raise TrajectoryFormatError("bad trajectory header")
    n = (len(header) - 3) // 2
    expected = ["t", "eta"] + [f"y_{i}" for i in range(1, n + 1)] + [f"w_{i}" for i in range(1, n + 1)] + ["delta"]
    if header != expected:
        raise TrajectoryFormatError("bad trajectory header")
    body = rows[1:]
    if not body:
        raise TrajectoryFormatError("trajectory has no records")
    try:
        data = np.array([[float(x) for x in r] for r in body])
    except ValueError as e:
        raise TrajectoryFormatError(f"non-numeric entry: {e}") from None
    if data.shape[1] != len(header):
        raise TrajectoryFormatError("ragged trajectory rows")
    if not np.array_equal(data[:, 0], np.arange(len(body))):
        raise TrajectoryFormatError("records must be consecutive from t=0")
    signs = np.sign(data[:, 2 + n:2 + 2 * n]).astype(np.int8)
    if np.any(np.all(signs == 0, axis=1)):
        raise TrajectoryFormatError("a record has an all-zero quantized weight")
    if mode is QuantizationMode.BINARY and np.any(signs == 0):
        raise TrajectoryFormatError("binary trajectory contains zero weights")
    return Trajectory(mode, data[:, 1], data[:, 2:2 + n], signs)


def write_run(traj: Trajectory, out_dir, tail: int | None = None) -> dict[str, Path]:
    """Write trajectory CSV, sign-matrix CSV and manifest; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": out / "trajectory.csv",
        "signs": out / "signs.csv",
        "manifest": out / "manifest.json",
    }
    paths["trajectory"].write_text(trajectory_csv(traj))
    paths["signs"].write_text(sign_matrix_csv(traj, tail))
    manifest = {"config": config_to_dict(traj.config), "sign_matrix_last": tail}
    paths["manifest"].write_text(dumps(manifest))
    return paths
