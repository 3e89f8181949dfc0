"""Command-line entry point.

Exit codes: 0 success, 2 hypothesis or assumption failure, 3 numerical verification
failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .checker import check_all
from .config import load_config, with_overrides
from .errors import ArtifactError, ConfigError
from .io import write_json
from .model import make_model
from .pipeline import run_pipeline

STAGES = {
    "spectral": ("spectral",),
    "sis": ("spectral", "sis"),
    "front": ("spectral", "front"),
    "entire": ("checker", "spectral", "front", "entire"),
    "pipeline": ("checker", "spectral", "sis", "front", "entire"),
}
TOL_TARGET = {"spectral": "spectral", "sis": "sis", "front": "front", "entire": "entire",
              "pipeline": "entire"}


def _schedule(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}; use e.g. 2,4,6,8") from None


def build_parser():
    p = argparse.ArgumentParser(prog="entirefront", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectral", "sis", "front", "entire", "verify-assumptions", "pipeline"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment YAML file")
        s.add_argument("--out", help="output directory (default: config 'output')")
        s.add_argument("--seed", type=int, help="seed for sampled checks")
        if name != "verify-assumptions":
            s.add_argument("--dx", type=float)
            s.add_argument("--dt", type=float)
            s.add_argument("--tol", type=float, help=f"tolerance of the {TOL_TARGET[name]} stage")
            s.add_argument("--schedule", type=_schedule, help="n schedule, e.g. 2,4,6,8")
            s.add_argument("--cache", help="cache directory (default: OUT/cache)")
    return p


def _summary(manifest):
    lines = []
    for stage, verdict in manifest["verdicts"].items():
        ok = verdict.get("ok") if isinstance(verdict, dict) else None
        if ok is None and isinstance(verdict, dict):
            ok = all(v.get("ok", True) for v in verdict.values() if isinstance(v, dict))
        lines.append(f"{stage:<12} {'ok' if ok else 'FAIL'}")
    return "\n".join(lines)


def _verify(args, config):
    model = make_model(config.model.kind, config.model.parameters)
    ck = config.checker
    rep = check_all(model, seed=config.seed, samples=ck.samples, k_max=ck.k_max, rays=ck.rays)
    print(rep.table())
    if args.out:
        write_json(f"{args.out}/assumptions.json", rep.to_dict())
    return 0 if rep.ok else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.command == "verify-assumptions":
            if args.seed is not None:
                config = with_overrides(config, seed=args.seed)
            return _verify(args, config)
        config = with_overrides(config, dx=args.dx, dt=args.dt, tol=args.tol,
                                schedule=args.schedule, seed=args.seed, output=args.out,
                                tol_target=TOL_TARGET[args.command])
        if args.command in ("entire", "pipeline") and config.entire is None:
            raise ConfigError(f"'{args.command}' needs an entire block in the config")
        manifest = run_pipeline(config, cache_dir=args.cache, stages=STAGES[args.command])
        print(_summary(manifest))
        print(f"outputs written to {config.output}")
        return manifest.exit_code
    except ArtifactError as exc:
        stage = exc.details.get("stage")
        where = f"[{stage}] " if stage else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
