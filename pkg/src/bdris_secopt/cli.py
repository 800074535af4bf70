"""Command-line front end.

Exit codes: 0 on success, 2 on a configuration problem, 3 when any solver run
hit its iteration budget (results are still written in that case).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdris-secopt",
        description="Secrecy-rate experiments for BD-RIS-assisted MIMO wiretap "
                    "channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--out", default=None, help="results file path")
    run.add_argument("--format", choices=("csv", "json"), default=None)
    run.add_argument("--schemes", default=None,
                     help="comma list: fc, gc<k>, dris, random, wo, upper")
    run.add_argument("--sweep", default=None, help="axis=v1,v2,... "
                     "(axes: p, n_t, n_b, n_e, m, x_b, delta)")
    run.add_argument("--csi", choices=("perfect", "imperfect"), default=None)
    run.add_argument("--delta", default=None,
                     help="comma list of uncertainty levels; several values "
                          "form a delta sweep")
    run.add_argument("--multistart", type=int, default=None)
    run.add_argument("--jobs", type=int, default=None)

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True, help="JSON config file")
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise harness.ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise harness.ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc


def _spec_from_args(args) -> harness.ExperimentSpec:
    kw = harness._config_kwargs(_load_config(args.config))
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        kw["trials"] = args.trials
    if getattr(args, "out", None) is not None:
        kw["out"] = args.out
    if getattr(args, "format", None) is not None:
        kw["fmt"] = args.format
    if getattr(args, "schemes", None) is not None:
        kw["schemes"] = tuple(s for s in args.schemes.split(",") if s)
    if getattr(args, "sweep", None) is not None:
        kw["sweep_name"], kw["sweep_values"] = harness.parse_sweep_arg(args.sweep)
    if getattr(args, "csi", None) is not None:
        kw["csi"] = args.csi
    if getattr(args, "delta", None) is not None:
        try:
            kw["deltas"] = tuple(float(x) for x in args.delta.split(","))
        except ValueError as exc:
            raise harness.ConfigError(f"bad --delta value: {args.delta!r}") from exc
    if getattr(args, "multistart", None) is not None:
        kw["multistart"] = args.multistart
    if getattr(args, "jobs", None) is not None:
        kw["jobs"] = args.jobs
    return harness.build_spec(**kw)


def _describe(spec: harness.ExperimentSpec) -> str:
    n_values = len(spec.sweep_values) if spec.sweep_name else 1
    sweep = f"sweep {spec.sweep_name}={list(spec.sweep_values)}" if spec.sweep_name \
        else "no sweep"
    return (f"{len(spec.schemes)} scheme(s) x {n_values} sweep value(s) x "
            f"{spec.trials} trial(s); {sweep}; csi={spec.csi}; "
            f"multistart={spec.multistart}; seed={spec.seed}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"config OK: {_describe(spec)}")
        return 0

    rows = harness.run_experiment(spec)
    out = spec.out if spec.out is not None else f"results.{spec.fmt}"
    harness.write_results(rows, out, spec.fmt)
    for (scheme, value), mean_sr in harness.summarize(rows).items():
        cell = f" {spec.sweep_name}={value}" if spec.sweep_name else ""
        print(f"{scheme}{cell}: mean SR {mean_sr:.4f} bits/s/Hz over {spec.trials} trial(s)")
    print(f"wrote {len(rows)} row(s) to {out}")
    if any(r.termination == "budget" for r in rows):
        print("warning: at least one solve stopped on its iteration budget",
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
