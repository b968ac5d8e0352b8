"""Command-line entry point: data synthesis, pipeline runs, batch translation, evaluation.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Config precedence for
`pipeline` is flags > config file > built-in defaults; the resolved snapshot is
written to <workdir>/run_config.json before anything runs and fully determines
the run (it is itself a valid --config file).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import pipelines
from .data import load_manifest, synth_toy_dataset
from .evaluation import evaluate, summary_row, write_pr_csv, write_report_json

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

ENV_WORKDIR = "IR2DAY_WORKDIR"

_APPROACH_ALIASES = {
    "baseline": "baseline",
    "1": "approach1",
    "2": "approach2",
    "3": "approach3",
    "approach1": "approach1",
    "approach2": "approach2",
    "approach3": "approach3",
}


class UsageError(Exception):
    """Bad arguments or config content; maps to exit code 2."""


def _load_config_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    if p.suffix.lower() == ".json":
        try:
            cfg = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{p}: bad JSON: {exc}") from exc
    else:
        try:
            with open(p, "rb") as fh:
                cfg = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"{p}: bad TOML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{p}: config must be a table/object")
    return cfg


@contextmanager
def _workdir_lock(workdir: Path):
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(
            f"work dir {workdir} is locked by another pipeline run (remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def cmd_synth(args) -> int:
    out = Path(args.out)
    synth_toy_dataset(out, args.n, args.size, args.seed)
    print(out / "manifest.jsonl")
    return 0


def cmd_pipeline(args) -> int:
    resolved = {
        "approach": None,
        "manifest": None,
        "workdir": os.environ.get(ENV_WORKDIR),
        "seed": 0,
        "scale": "desk",
        "stages": {},
    }
    if args.config:
        cfg = _load_config_file(args.config)
        unknown = set(cfg) - set(resolved)
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        resolved.update(cfg)
    if args.approach is not None:
        resolved["approach"] = args.approach
    if args.manifest is not None:
        resolved["manifest"] = args.manifest
    if args.workdir is not None:
        resolved["workdir"] = args.workdir
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.scale is not None:
        resolved["scale"] = args.scale

    if resolved["approach"] is None:
        raise UsageError("no approach given (flag --approach or config key 'approach')")
    approach = _APPROACH_ALIASES.get(str(resolved["approach"]))
    if approach is None:
        raise UsageError(f"unknown approach {resolved['approach']!r}")
    resolved["approach"] = approach
    if resolved["manifest"] is None:
        raise UsageError("no manifest given (flag --manifest or config key 'manifest')")
    if resolved["workdir"] is None:
        raise UsageError(f"no work dir given (flag --workdir, config key 'workdir', or ${ENV_WORKDIR})")
    if not isinstance(resolved["stages"], dict):
        raise UsageError("config key 'stages' must be a table of per-stage overrides")

    workdir = Path(resolved["workdir"])
    with _workdir_lock(workdir):
        snapshot = dict(resolved)
        snapshot["manifest"] = str(Path(resolved["manifest"]).resolve())
        snapshot["workdir"] = str(workdir.resolve())
        (workdir / "run_config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")

        manifest = load_manifest(resolved["manifest"])
        spec = pipelines.default_pipeline_spec(
            approach,
            manifest,
            workdir,
            seed=int(resolved["seed"]),
            scale=resolved["scale"],
            stage_overrides=resolved["stages"],
        )
        artifacts = pipelines.run_pipeline(spec)
    for entry in artifacts.lineage["stages"]:
        print(f"stage {entry['name']} ({entry['role']}): {'cached' if entry['cached'] else 'trained'}")
    for entry in artifacts.lineage["synthesized"]:
        print(f"synthesized {entry['name']}: {'cached' if entry['cached'] else 'generated'} -> {entry['manifest']}")
    print(f"lineage: {workdir / 'lineage.json'}")
    return 0


def cmd_translate(args) -> int:
    workdir = args.workdir or os.environ.get(ENV_WORKDIR)
    if workdir is None:
        raise UsageError(f"no work dir given (flag --workdir or ${ENV_WORKDIR})")
    artifacts = pipelines.load_artifacts(workdir)
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise UsageError(f"input dir not found: {input_dir}")
    images = sorted(input_dir.glob("*.png"))
    if not images:
        print(f"warning: no PNG inputs in {input_dir}", file=sys.stderr)
        return 0
    outputs = pipelines.translate(artifacts, images, args.out)
    print(f"wrote {len(outputs)} images to {args.out}")
    return 0


def _plot_pr(report, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    for cat in sorted(report.pr_curves):
        points = report.pr_curves[cat]
        if not points:
            continue
        ax.plot(
            [r for r, _ in points],
            [p for _, p in points],
            label=f"{cat} (AP {report.per_class_ap[cat]:.3f})",
        )
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0.0, 1.02)
    ax.set_ylim(0.0, 1.02)
    ax.set_title(f"PR curve @ IoU {report.iou_threshold:g}")
    if report.pr_curves:
        ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    # drop the version-dependent Software tag so reruns are byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def cmd_eval(args) -> int:
    report = evaluate(args.detections, args.annotations, args.iou, args.score)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out / "report.json")
    write_pr_csv(report, out / "pr_curve.csv")
    _plot_pr(report, out / "pr_curve.png")
    print("images vehicles precision recall mAP@0.5")
    print(summary_row(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ir2day",
        description="Thermal-IR to daytime-RGB translation pipelines and detection-metrics evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a deterministic toy dataset")
    p.add_argument("--n", type=int, required=True, help="number of scenes")
    p.add_argument("--size", type=int, default=64, help="image size in pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="train and assemble one pipeline variant")
    p.add_argument("--approach", choices=sorted(_APPROACH_ALIASES), help="baseline, 1, 2, or 3")
    p.add_argument("--config", help="JSON or TOML config file")
    p.add_argument("--manifest", help="dataset manifest (JSON-lines)")
    p.add_argument("--workdir", help=f"work directory (default ${ENV_WORKDIR})")
    p.add_argument("--seed", type=int, help="master seed, fanned out per stage")
    p.add_argument("--scale", choices=["desk", "full"], help="config defaults preset")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("translate", help="night-IR PNGs -> fake day-RGB PNGs")
    p.add_argument("--workdir", help=f"work directory with pipeline artifacts (default ${ENV_WORKDIR})")
    p.add_argument("--input", required=True, help="directory of night-IR PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="detection metrics: PR curve, AP, mAP@0.5")
    p.add_argument("--detections", required=True, help="detections JSON-lines file")
    p.add_argument("--annotations", required=True, help="annotations JSON-lines file")
    p.add_argument("--iou", type=float, default=0.5, help="IoU matching threshold")
    p.add_argument("--score", type=float, default=0.25, help="score threshold for scalar P/R")
    p.add_argument("--out", required=True, help="output directory for report/plots")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
