"""``hybridyn`` command line.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure,
3 I/O failure. Every failure is also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .config import describe_scenarios, load_config
from .errors import InputError, NumericalError, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= 2**64 - 1:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridyn", description="Hybrid quantum-classical dynamics scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the scenario named in a config file")
    run.add_argument("--config", required=True, help="path to a key = value config file")
    run.add_argument("--out", default="hybridyn-out", help="output directory (created if missing)")
    run.add_argument("--seed", type=_u64, help="override the configured seed")
    run.add_argument("--dump-elements", action="store_true", help="also write every matrix element as CSV")

    val = sub.add_parser("validate", help="check a config file and print the resolved values")
    val.add_argument("--config", required=True)

    sub.add_parser("scenarios", help="list scenarios and their keys")
    return parser


def _dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("key", "line"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def _versions() -> dict:
    return {"hybridyn": __version__, "numpy": np.__version__, "python": platform.python_version()}


def cmd_run(args) -> int:
    from .scenarios import RUNNERS

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary, details = RUNNERS[cfg.scenario](cfg, out, args.dump_elements)
    wall = time.perf_counter() - start
    _dump_json(summary, out / "summary.json")
    metadata = {
        "scenario": cfg.scenario,
        "config": cfg.to_dict(),
        "defaults_used": list(cfg.defaulted),
        "seed": cfg.seed,
        "versions": _versions(),
        "backend": _backend.name(),
        "wall_time_s": wall,
        "details": details,
    }
    if "grid.n_x" in cfg.values:
        metadata["grid"] = cfg.grid().to_dict()
    _dump_json(metadata, out / "metadata.json")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    json.dump({"scenario": cfg.scenario, "config": cfg.to_dict(), "defaults_used": list(cfg.defaulted)},
              sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "scenarios":
        sys.stdout.write(describe_scenarios())
        return EXIT_OK
    handler = cmd_run if args.command == "run" else cmd_validate
    try:
        return handler(args)
    except (InputError, ValidationError) as exc:
        return _error(exc, EXIT_INPUT)
    except NumericalError as exc:
        return _error(exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _error(exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
