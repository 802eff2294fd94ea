"""Command-line entry point for running experiment batches."""

from __future__ import annotations

import argparse
import sys

from .experiment import RunError, SpecError, execute, load_spec


def _parse_set(entries: list[str] | None) -> dict:
    params: dict[str, float] = {}
    for entry in entries or []:
        if "=" not in entry:
            raise SpecError(f"--set expects key=value, got {entry!r}")
        key, _, raw = entry.partition("=")
        try:
            params[key.strip()] = float(raw)
        except ValueError as exc:
            raise SpecError(f"--set {key.strip()} is not a number: {raw!r}") from exc
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqmsim",
        description=(
            "Run queue-management experiments on the dumbbell simulator and "
            "write metrics/trace CSVs."
        ),
    )
    parser.add_argument("--config", help="experiment file (INI-style); flags override it")
    parser.add_argument("--scenario", type=int, choices=(1, 2))
    parser.add_argument(
        "--aqm",
        help="droptail | red | ared | codel | pie | betared | abetared | dbetared",
    )
    parser.add_argument("--duration", type=float, help="simulated seconds")
    parser.add_argument("--seed", type=int, nargs="+", help="seed list (one run each)")
    parser.add_argument("--n-flows", type=int, dest="n_flows", help="scenario 1 flow count")
    parser.add_argument("--n-max", type=int, dest="n_max", help="scenario 2 peak flow count")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--sweep", help="key=v1,v2[;key2=...] cartesian sweep")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one scheme parameter (repeatable)",
    )
    parser.add_argument("--ma-window", type=float, dest="ma_window",
                        help="moving-average window, seconds")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            "scenario": args.scenario,
            "aqm": args.aqm,
            "duration": args.duration,
            "seeds": args.seed,
            "n_flows": args.n_flows,
            "n_max": args.n_max,
            "out_dir": args.out,
            "sweep": args.sweep,
            "ma_window": args.ma_window,
            "params": _parse_set(args.set) or None,
        }
        spec = load_spec(args.config, overrides)
        written = execute(spec)
    except SpecError as exc:
        print(f"aqmsim: config error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"aqmsim: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(written)} files under {spec.out_dir}")
    print(f"metrics table: {written[0]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
