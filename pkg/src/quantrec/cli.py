"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 parse/format error,
3 invalid value, 4 dimension mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import (
    ConfigError,
    TrajectoryFormatError,
    config_from_dict,
    config_to_dict,
    dumps,
    preset_recipe,
    read_trajectory_csv,
    write_run,
)
from .dynamics import StepError, run
from .geometry import vertex_set
from .model import Teacher
from .quantize import (
    BRUTE_FORCE_MAX_DIM,
    QuantizationMode,
    brute_force_project,
    normalized_project,
    project,
    projection_distance,
)

log = logging.getLogger("quantrec")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_FORMAT = 2
EXIT_VALUE = 3
EXIT_DIMENSION = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(x) for x in text.replace(" ", "").split(",") if x != ""]
    except ValueError:
        raise CliError(EXIT_FORMAT, f"cannot parse vector {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise CliError(EXIT_FORMAT, f"cannot parse vector {text!r}")
    return np.asarray(vals)


def _emit(obj, out: str | None = None):
    text = dumps(obj)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_project(args) -> int:
    y = parse_vector(args.vec)
    if not np.any(y):
        raise CliError(EXIT_VALUE, "cannot project the zero vector")
    mode = QuantizationMode.parse(args.mode)
    w = project(y, mode)
    report = {
        "mode": mode.value,
        "input": [float(x) for x in y],
        "projection": [float(x) for x in w.vector],
        "delta": w.delta,
        "signs": list(w.signs),
        "normalized": [float(x) for x in normalized_project(y, mode).vector],
        "distance": projection_distance(y, w),
    }
    if y.size <= BRUTE_FORCE_MAX_DIM:
        oracle = brute_force_project(y, mode)
        d = projection_distance(y, oracle)
        report["oracle_distance"] = d
        report["oracle_ok"] = bool(abs(d - report["distance"]) <= 1e-10 * max(1.0, float(np.linalg.norm(y))))
    _emit(report)
    return EXIT_OK


def _raw_config(args) -> dict:
    if args.preset and args.config:
        raise CliError(EXIT_FORMAT, "use either --preset or --config, not both")
    if args.preset:
        try:
            return preset_recipe(args.preset, args.mode)
        except ConfigError as e:
            raise CliError(EXIT_VALUE, str(e)) from None
    if not args.config:
        raise CliError(EXIT_FORMAT, "run needs --preset, --config or --batch")
    return _read_json(args.config)


def _read_json(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(EXIT_FORMAT, f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise CliError(EXIT_FORMAT, f"{path}: invalid JSON: {e}") from None
    # a manifest wraps the resolved config
    if isinstance(d, dict) and "config" in d and isinstance(d["config"], dict):
        d = d["config"]
    return d


def _apply_overrides(d: dict, args) -> dict:
    d = dict(d)
    if getattr(args, "mode", None) and not args.preset:
        d["mode"] = args.mode
    if args.iterations is not None:
        d["iterations"] = args.iterations
    if args.seed is not None:
        if isinstance(d.get("teacher"), dict) and "random" in d["teacher"]:
            d["teacher"] = {"random": dict(d["teacher"]["random"], seed=args.seed)}
        if isinstance(d.get("y0"), dict):
            d["y0"] = dict(d["y0"], seed=args.seed + 1)
        if isinstance(d.get("gradient"), dict) and d["gradient"].get("source") == "sampled":
            d["gradient"] = dict(d["gradient"], seed=args.seed + 2)
    return d


def _build(d: dict):
    try:
        return config_from_dict(d)
    except ConfigError as e:
        raise CliError(EXIT_VALUE, f"invalid config at {e}") from None


def _run_one(config_dict: dict, out_dir: str, tail: int | None) -> dict:
    config = config_from_dict(config_dict)
    traj = run(config)
    paths = write_run(traj, out_dir, tail)
    return {k: str(v) for k, v in paths.items()}


def cmd_run(args) -> int:
    if args.batch:
        configs = [_build(_apply_overrides(_read_json(p), args)) for p in args.batch]
        jobs = []
        for i, cfg in enumerate(configs):
            jobs.append((config_to_dict(cfg), str(Path(args.out) / f"{i:03d}-{cfg.name}"), args.tail))
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
        _emit({"runs": results})
        return EXIT_OK

    d = _apply_overrides(_raw_config(args), args)
    config = _build(d)
    resolved = config_to_dict(config)
    if args.print_config:
        sys.stdout.write(dumps(resolved))
        return EXIT_OK
    start = time.perf_counter()
    try:
        traj = run(config)
    except StepError as e:
        raise CliError(EXIT_VALUE, str(e)) from None
    log.info("%s: %d iterations in %.2fs", config.name, config.iterations, time.perf_counter() - start)
    tail = args.tail
    if tail is None and config.name.startswith("synthetic-fig2"):
        tail = 100
    paths = write_run(traj, args.out, tail)
    summary = {"files": {k: str(v) for k, v in paths.items()}, "records": len(traj)}
    if args.analyze:
        summary["analysis"] = analyze_trajectory(traj, config.teacher)
    _emit(summary)
    return EXIT_OK


def analyze_trajectory(traj, teacher: Teacher, tail_fraction: float = 0.5, window: int | None = None) -> dict:
    mode = traj.mode
    target = normalized_project(teacher.w_star, mode)
    window = min(len(traj), window or len(traj))
    limits = analysis.tail_limit_set(traj, tail_fraction)
    report = {
        "mode": mode.value,
        "records": len(traj),
        "optimum": list(target.signs),
        "recurrence": analysis.detect_recurrence(traj, target).to_dict(),
        "cycle_period": analysis.detect_cycle(traj, window),
        "cycle_window": window,
        "tail_fraction": tail_fraction,
        "tail_limit_set": [list(w.signs) for w in limits],
        "entry_times": analysis.region_entry_times(traj, teacher),
        "sign_oscillation": analysis.sign_oscillation_report(traj),
    }
    if mode is QuantizationMode.TERNARY:
        verts = vertex_set(teacher.w_star)
        report["tail_subset_of_vertex_set"] = all(w in verts for w in limits)
        report["tail_limit_set_size_at_most_n"] = len(limits) <= traj.n
        report["condition"] = analysis.check_ternary_condition(teacher).to_dict()
        report["visit_frequency_vs_lambda"] = analysis.visit_frequency_vs_lambda(traj, teacher, tail_fraction)
    else:
        report["condition"] = analysis.check_binary_condition(teacher).to_dict()
    # keep the JSON small for long runs
    rec = report["recurrence"]
    if len(rec["visit_times"]) > 1000:
        rec["visit_times"] = rec["visit_times"][:1000]
        rec["gaps"] = rec["gaps"][:999]
        rec["truncated"] = True
    return report


def cmd_analyze(args) -> int:
    path = Path(args.trajectory)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise CliError(EXIT_FORMAT, f"no such file: {path}") from None
    manifest = Path(args.manifest) if args.manifest else path.with_name("manifest.json")
    cfg = None
    if manifest.exists():
        cfg = _read_json(manifest)
    mode = args.mode or (cfg or {}).get("mode")
    if mode is None:
        raise CliError(EXIT_FORMAT, "mode unknown: pass --mode or a manifest")
    try:
        traj = read_trajectory_csv(text, mode)
    except (TrajectoryFormatError, ValueError) as e:
        raise CliError(EXIT_FORMAT, f"{path}: {e}") from None
    if args.teacher:
        w = parse_vector(args.teacher)
        if not np.any(w):
            raise CliError(EXIT_VALUE, "teacher must be nonzero")
        teacher = Teacher(w / np.linalg.norm(w), 1.0)
    elif cfg is not None:
        try:
            teacher = config_from_dict(cfg).teacher
        except ConfigError as e:
            raise CliError(EXIT_FORMAT, f"manifest: {e}") from None
    else:
        raise CliError(EXIT_FORMAT, "teacher unknown: pass --teacher or a manifest")
    if teacher.n != traj.n:
        raise CliError(EXIT_DIMENSION, f"teacher has dimension {teacher.n}, trajectory {traj.n}")
    _emit(analyze_trajectory(traj, teacher, args.tail_fraction, args.window), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    report = run_suite(seed=args.seed, count=args.count, instances=args.instances,
                       sigmas=args.sigmas, constant_factor=args.corrupt_constant)
    _emit(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_conditions(args) -> int:
    w = parse_vector(args.teacher)
    norm = float(np.linalg.norm(w))
    if norm == 0:
        raise CliError(EXIT_VALUE, "teacher must be nonzero")
    if abs(norm - 1.0) > 1e-12:
        print(f"warning: teacher normalized (norm was {norm!r})", file=sys.stderr)
        w = w / norm
    teacher = Teacher(w, 1.0)
    if QuantizationMode.parse(args.mode) is QuantizationMode.BINARY:
        report = analysis.check_binary_condition(teacher)
    else:
        report = analysis.check_ternary_condition(teacher)
    _emit(report.to_dict())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantrec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a vector onto the binary/ternary set")
    p.add_argument("--vec", required=True, help="comma-separated vector, e.g. 2,1,0.1")
    p.add_argument("--mode", choices=["binary", "ternary"], default="ternary")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("run", help="run the QUANT iteration and write CSVs + manifest")
    p.add_argument("--preset", help="built-in preset: example1, synthetic-fig2")
    p.add_argument("--config", help="JSON config or manifest.json")
    p.add_argument("--batch", nargs="+", metavar="CONFIG", help="run several configs concurrently")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--mode", choices=["binary", "ternary"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int, help="override the seeds of random recipes")
    p.add_argument("--tail", type=int, help="only the last TAIL iterations in signs.csv")
    p.add_argument("--out", default="out")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.add_argument("--analyze", action="store_true", help="include an analysis report in the summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="analyze a trajectory CSV")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--manifest", help="defaults to manifest.json next to the trajectory")
    p.add_argument("--teacher", help="comma-separated teacher weights (overrides the manifest)")
    p.add_argument("--mode", choices=["binary", "ternary"])
    p.add_argument("--tail-fraction", type=float, default=0.5)
    p.add_argument("--window", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="Monte-Carlo check of the closed-form loss and coarse gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1_000_000)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--sigmas", type=float, default=4.0)
    p.add_argument("--corrupt-constant", type=float, default=1.0, help=argparse.SUPPRESS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("conditions", help="check the recurrence conditions for a teacher")
    p.add_argument("--teacher", required=True)
    p.add_argument("--mode", choices=["binary", "ternary"], required=True)
    p.set_defaults(func=cmd_conditions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"error: invalid config at {e}", file=sys.stderr)
        return EXIT_VALUE


if __name__ == "__main__":
    sys.exit(main())
