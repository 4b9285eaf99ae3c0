"""Command line entry point ``barronlab``.

Exit codes: 0 success, 2 invalid configuration or input, 3 a numeric check failed.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import __version__
from .harness import EXIT_CHECK, EXIT_CONFIG, CheckFailure, ConfigError, ExperimentConfig, dumps, run
from .transport import (BudgetError, InvalidMeasureError, read_measure_csv, read_measure_json, wasserstein_exact,
                        wasserstein_sinkhorn)


def _csv_list(kind):
    def parse(s: str):
        try:
            return [kind(v) for v in s.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma separated list, got {s!r}") from None
    return parse


def _params_file(path):
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    # accept either a bare params object or a full run config
    return d.get("params", d) if "tag" in d else d


def _summary(record) -> str:
    ok = sum(record.checks.values())
    lines = [f"{record.config['tag']}: {ok}/{len(record.checks)} checks passed -> {record.config['out']}"]
    lines += [f"  FAIL {name}" for name in record.failed]
    return "\n".join(lines)


def _execute(cfg: ExperimentConfig) -> int:
    try:
        record = run(cfg)
    except CheckFailure as e:
        print(_summary(e.record), file=sys.stderr)
        print(f"numeric check failed: {', '.join(e.failed)}", file=sys.stderr)
        return EXIT_CHECK
    print(_summary(record))
    return 0


def _alias_config(tag, args, params=None) -> ExperimentConfig:
    p = _params_file(getattr(args, "config", None))
    p.update(params or {})
    d = {"tag": tag, "seed": args.seed, "params": p}
    if args.out:
        d["out"] = args.out
    return ExperimentConfig.from_dict(d)


def cmd_run(args) -> int:
    return _execute(ExperimentConfig.load(args.config, args.seed, args.out))


def cmd_fit(args) -> int:
    extra = {"ks": args.ks} if args.ks else {}
    return _execute(_alias_config("fit-scaling", args, extra))


def cmd_ft(args) -> int:
    return _execute(_alias_config("ft-check", args))


def cmd_bounds(args) -> int:
    return _execute(_alias_config("barron-bounds", args))


def cmd_compose_run(args) -> int:
    ledger_path = Path(args.out)
    run_dir = ledger_path.with_name(ledger_path.stem + "_run")
    args.config = args.plan
    args.out = str(run_dir)
    code = _execute(_alias_config("compose", args))
    if (run_dir / "ledger.json").exists():
        ledger_path.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(run_dir / "ledger.json", ledger_path)
    return code


def cmd_transport_suite(args) -> int:
    return _execute(_alias_config("transport-suite", args))


def _read_measure(path):
    return read_measure_json(path) if str(path).endswith(".json") else read_measure_csv(path)


def cmd_transport_w(args) -> int:
    try:
        mu, nu = _read_measure(args.mu), _read_measure(args.nu)
        if args.sinkhorn is not None:
            res = wasserstein_sinkhorn(mu, nu, args.p, args.sinkhorn, args.max_iter)
            out = {"p": args.p, "method": "sinkhorn", **res.to_dict()}
        else:
            val, G = wasserstein_exact(mu, nu, args.p)
            out = {"p": args.p, "method": "exact", "value": val}
            if args.coupling:
                out["coupling"] = G.matrix.tolist()
    except (OSError, InvalidMeasureError, BudgetError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(dumps(out))
    return 0


def cmd_separation_report(args) -> int:
    out = Path(args.out)
    run_dir = out.with_name(out.stem + "_run")
    params = {"ns": args.ns, "c3": args.c3}
    for key in ("C1", "C2"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    args.config = None
    args.out = str(run_dir)
    code = _execute(_alias_config("separation", args, params))
    if (run_dir / "sep.csv").exists():
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(run_dir / "sep.csv", out)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="barronlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON params (bare object or full run config)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", default=None, help="overrides the config output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="two-layer fits against hidden-unit count (fit-scaling)")
    common(p)
    p.add_argument("--ks", type=_csv_list(int))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ft", help="Fourier transform checks (ft-check)")
    common(p)
    p.set_defaults(func=cmd_ft)

    p = sub.add_parser("bounds", help="lower/upper Barron estimate sandwich (barron-bounds)")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("compose", help="multi-layer construction")
    csub = p.add_subparsers(dest="action", required=True)
    q = csub.add_parser("run", help="build the layered network and write its error ledger")
    q.add_argument("--plan", help="JSON compose params")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="ledger.json", help="ledger JSON path")
    q.set_defaults(func=cmd_compose_run)

    p = sub.add_parser("transport", help="Wasserstein distances")
    tsub = p.add_subparsers(dest="action", required=True)
    q = tsub.add_parser("w", help="distance between two measures (CSV rows: weight, coordinates)")
    q.add_argument("--p", type=int, choices=(1, 2), default=2)
    q.add_argument("--mu", required=True)
    q.add_argument("--nu", required=True)
    q.add_argument("--sinkhorn", type=float, default=None, metavar="REG", help="use entropic solver")
    q.add_argument("--max-iter", type=int, default=10000)
    q.add_argument("--coupling", action="store_true", help="include the optimal coupling")
    q.set_defaults(func=cmd_transport_w)
    q = tsub.add_parser("suite", help="transport property suite (transport-suite)")
    common(q)
    q.set_defaults(func=cmd_transport_suite)

    p = sub.add_parser("separation", help="separation experiment")
    ssub = p.add_subparsers(dest="action", required=True)
    q = ssub.add_parser("report", help="ratio table over n and C3")
    q.add_argument("--ns", type=_csv_list(int), default=[3, 7, 11])
    q.add_argument("--c3", type=_csv_list(float), default=[4.0, 8.0, 16.0])
    q.add_argument("--C1", type=float, default=None)
    q.add_argument("--C2", type=float, default=None)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="sep.csv", help="CSV path")
    q.set_defaults(func=cmd_separation_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        # domain validation (bad constants, inconsistent dimensions) is an input problem
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
