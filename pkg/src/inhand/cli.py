"""Command-line entry point: batch runs plus per-algorithm utilities.

Exit codes: 0 success, 1 invalid usage or input, 2 unreadable config,
3 unwritable output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig, load_config
from .errors import InHandError, InvalidArgument
from .fingertip import FingertipState, calibrate_home
from .planner import TRACE_HEADER
from .scene import generate_bin_scene
from .vision import estimate_inhand_pose, read_pgm
from .workcycle import CycleReport, run_cycle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_OUTPUT = 3


class ConfigError(Exception):
    pass


class OutputError(Exception):
    pass


@dataclass
class BatchSummary:
    config: RunConfig
    reports: list[CycleReport] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.reports)

    def to_dict(self) -> dict:
        n = self.n
        inserted = sum(r.inserted for r in self.reports)
        alphas = [abs(r.alpha_final) for r in self.reports if r.alpha_final is not None]
        failures = Counter(r.failure[0] for r in self.reports if r.failure)
        return {
            "n": n,
            "inserted": inserted,
            "success_rate": inserted / n if n else 0.0,
            "mean_abs_alpha_final_deg": math.degrees(sum(alphas) / len(alphas)) if alphas else None,
            "mean_iterations": sum(r.reorient_iterations for r in self.reports) / n if n else None,
            "failure_histogram": dict(sorted(failures.items())),
            "seeds": [r.seed for r in self.reports],
            "config": self.config.to_dict(),
        }


def _read_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return load_config(path)
    except (OSError, InHandError, TypeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc


def run_batch(config_path, n_cycles: int, base_seed: int | None = None) -> BatchSummary:
    """Run ``n_cycles`` cycles on fresh scenes seeded ``base_seed`` onwards."""
    cfg = config_path if isinstance(config_path, RunConfig) else _read_config(config_path)
    if n_cycles < 1:
        raise InvalidArgument("n_cycles must be >= 1")
    base = cfg.base_seed if base_seed is None else base_seed
    spec = cfg.screw_spec()
    summary = BatchSummary(cfg)
    for seed in range(base, base + n_cycles):
        scene = generate_bin_scene(spec, cfg.scene.count, cfg.scene.mode, seed,
                                   cfg.scene.table_height, cfg.scene.clearance_ratio)
        summary.reports.append(run_cycle(scene, cfg, seed))
    return summary


def emit_report(summary: BatchSummary, out_dir, trace: bool = False) -> list[Path]:
    """Write ``reports.jsonl`` and ``summary.json`` (plus per-cycle trace CSVs)."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        reports = out / "reports.jsonl"
        reports.write_text("".join(r.to_json() + "\n" for r in summary.reports), encoding="utf-8")
        written.append(reports)
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
        written.append(summary_path)
        if trace:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for r in summary.reports:
                path = tdir / f"cycle_{r.seed}.csv"
                path.write_text(r.trace_csv or TRACE_HEADER + "\n", encoding="utf-8")
                written.append(path)
    except OSError as exc:
        raise OutputError(f"cannot write to {out}: {exc}") from exc
    return written


# --- subcommands ------------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = _read_config(args.config)
    summary = run_batch(cfg, args.n, args.seed)
    emit_report(summary, args.out or cfg.out_dir, args.trace)
    d = summary.to_dict()
    print(f"cycles={d['n']} inserted={d['inserted']} success_rate={d['success_rate']:.3f}")
    return EXIT_OK


def _cmd_scene(args) -> int:
    cfg = _read_config(args.config)
    seed = cfg.base_seed if args.seed is None else args.seed
    scene = generate_bin_scene(cfg.screw_spec(), cfg.scene.count, cfg.scene.mode, seed,
                               cfg.scene.table_height, cfg.scene.clearance_ratio)
    text = scene.to_json() + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OutputError(str(exc)) from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_perceive(args) -> int:
    try:
        img = read_pgm(args.image)
    except OSError as exc:
        raise InvalidArgument(f"cannot read {args.image}: {exc}") from exc
    obs = estimate_inhand_pose(img)
    hx, hy = obs.head_xy
    print(json.dumps({"alpha": obs.alpha, "alpha_deg": math.degrees(obs.alpha),
                      "h": [hx, hy], "segments": len(obs.segments)}))
    return EXIT_OK


def _cmd_calibrate_demo(args) -> int:
    offset = math.radians(args.offset)
    window = math.radians(args.window)
    step = math.radians(args.step)
    f = calibrate_home(FingertipState(), offset, window, step)
    for k in range(f.calibration_steps + 1):
        print(f"step {k}: magnet at {math.degrees(offset - k * step):.2f} deg")
    print(f"calibrated after {f.calibration_steps} steps, "
          f"residual {math.degrees(f.home_residual):.3f} deg")
    return EXIT_OK


def _cmd_print_config(args) -> int:
    sys.stdout.write(_read_config(args.config).to_json())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit with 2, which is reserved for config errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inhand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of work cycles")
    run.add_argument("--config")
    run.add_argument("--n", type=int, default=1)
    run.add_argument("--seed", type=int)
    run.add_argument("--trace", action="store_true")
    run.add_argument("--out")
    run.set_defaults(func=_cmd_run)

    scene = sub.add_parser("scene", help="generate a scene and dump it as JSON")
    scene.add_argument("--config")
    scene.add_argument("--seed", type=int)
    scene.add_argument("--out")
    scene.set_defaults(func=_cmd_scene)

    perceive = sub.add_parser("perceive", help="estimate the in-hand pose from a PGM image")
    perceive.add_argument("image")
    perceive.set_defaults(func=_cmd_perceive)

    cal = sub.add_parser("calibrate-demo", help="print Hall-sensor homing steps")
    cal.add_argument("--offset", type=float, default=37.0, help="true offset, degrees")
    cal.add_argument("--window", type=float, default=2.0, help="sensing window, degrees")
    cal.add_argument("--step", type=float, default=0.5, help="rotation step, degrees")
    cal.set_defaults(func=_cmd_calibrate_demo)

    pc = sub.add_parser("print-config", help="print the effective configuration")
    pc.add_argument("--config")
    pc.set_defaults(func=_cmd_print_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except InHandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
