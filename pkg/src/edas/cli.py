"""Command-line entry point: ``edas {run,transient-sweep,spectral,bounds}``.

Exit codes: 0 success, 1 configuration error, 2 numerical error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import harness
from .exceptions import (ConfigError, ContractError, DataError, InvalidTopologyError, NumericalError,
                         ParameterError)
from .mixing import b_decomposition

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path or shipped config name")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a dotted config key; VALUE is parsed as JSON when possible")
    common.add_argument("--out", help="output path prefix (overrides config.output)")
    common.add_argument("--seed", type=int, help="base seed (overrides config.seed)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="edas", description="Decentralized stochastic optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="simulate the configured algorithms")
    sw = sub.add_parser("transient-sweep", parents=[common], help="transient time versus network size")
    sw.add_argument("--sizes", help="comma-separated node counts (overrides config.transient.sizes)")
    sw.add_argument("--multiplier", type=float)
    sp = sub.add_parser("spectral", parents=[common], help="spectral summary of the mixing matrix")
    sp.add_argument("--json", action="store_true", help="print JSON instead of aligned text")
    bd = sub.add_parser("bounds", parents=[common], help="theory constants and transient-time terms")
    bd.add_argument("--json", action="store_true")
    return p


def _config(args) -> dict:
    cfg = harness.load_config(args.config)
    for item in args.overrides:
        cfg = harness.apply_override(cfg, item)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output"] = args.out
    return harness.normalize_config(cfg)


def _kv(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in pairs)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def cmd_run(cfg) -> int:
    result = harness.run_experiment(cfg)
    prefix = Path(cfg["output"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = harness.emit_csv(result, prefix.with_name(prefix.name + ".csv"))
    json_path = harness.emit_json(result, prefix.with_name(prefix.name + ".json"))
    for label in result.labels:
        kt = result.transient.get(label, "n/a")
        if label in result.transient and kt is None:
            kt = "not reached"
        mse = result.trajectories[label].get("mse")
        final = f"{mse[-1]:.6e}" if mse is not None else "n/a"
        print(f"{label}: final mse {final}, transient {kt}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_sweep(cfg, args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None

    def show(row):
        kt = row["transient"] if row["reached"] else f"not reached (horizon {row['horizon']})"
        print(f"n={row['n']}: lambda2 {row['lambda2']:.6f}, transient {kt}, "
              f"n/gap {row['n_over_gap']:.4g}, scaled {row['scaled_theory']:.4g}", flush=True)

    rows = harness.transient_sweep(cfg, sizes=sizes, multiplier=args.multiplier, progress=show)
    prefix = Path(cfg["output"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    out = harness.emit_sweep_csv(rows, prefix.with_name(prefix.name + "_sweep.csv"))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_spectral(cfg, args) -> int:
    mixing = harness.build_mixing(cfg["topology"])
    info = {"n": mixing.n, "lambda2": float(mixing.lambda2), "lambda_n": float(mixing.lambda_n),
            "gap": float(mixing.gap), "inverse_gap": float(1.0 / mixing.gap)}
    try:
        bd = b_decomposition(mixing)
        info["UL_UR_norm_product"] = float(bd.norm_UL * bd.norm_UR)
    except NumericalError as exc:
        info["UL_UR_norm_product"] = None
        info["UL_UR_note"] = str(exc)
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        print(_kv([(k, "not computable" if v is None else _fmt(v)) for k, v in info.items()]))
    return EXIT_OK


def cmd_bounds(cfg, args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = harness.bounds_report(cfg)
    report["warnings"] = [str(w.message) for w in caught]
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    pairs = [("theta", _fmt(report["theta"])), ("m", _fmt(report["m"]))]
    if report["constants"] is None:
        pairs.append(("constants", report["constants_skipped"]))
    else:
        pairs += [(k, _fmt(v)) for k, v in report["constants"].items() if k not in ("theta", "m")]
    pairs += [(f"K_T {k}", _fmt(v)) for k, v in report["transient_bound"].items()]
    pairs += [("warning", w) for w in report["warnings"]]
    print(_kv(pairs))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "transient-sweep":
            return cmd_sweep(cfg, args)
        if args.command == "spectral":
            return cmd_spectral(cfg, args)
        return cmd_bounds(cfg, args)
    except (ConfigError, ParameterError, ContractError, InvalidTopologyError) as exc:
        print(f"edas: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"edas: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"edas: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
