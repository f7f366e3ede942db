"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .analyzer import bell_report
from .fock import Ket
from .protocol import SWEEP_PARAMETERS, ProtocolConfig, ProtocolReport, run, sweep
from .source import pair_state, system_state

PROG = "ensemble-ghz"

# flag dest -> path in the nested JSON config
FLAG_KEYS = {
    "n": ("n",),
    "p": ("source", "p"),
    "jmax": ("source", "j_max"),
    "eta": ("detector", "efficiency"),
    "dark": ("detector", "dark_rate"),
    "resolving": ("detector", "resolving"),
    "fp": ("f_p",),
    "trials": ("trials",),
    "seed": ("seed",),
    "engine": ("engine",),
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _num(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--n", type=int, help="number of parties")
    common.add_argument("--p", type=float, help="emission probability per pulse")
    common.add_argument("--jmax", type=int, help="truncation order of each pair state")
    common.add_argument("--eta", type=float, help="detector efficiency")
    common.add_argument("--dark", type=float, help="dark-count probability per detector per shot")
    common.add_argument("--resolving", action=argparse.BooleanOptionalAction, default=None,
                        help="number-resolving detectors (default: threshold)")
    common.add_argument("--fp", type=float, help="pulse repetition frequency in Hz")
    common.add_argument("--trials", type=int, help="Monte Carlo shots")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--engine", choices=("exact", "montecarlo"))
    common.add_argument("--out", type=Path, help="output path (stem when --format both)")
    common.add_argument("--format", choices=("json", "csv", "both"), default="json")
    common.add_argument("--dump-state", type=Path, help="write the source state as JSON to this path")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    parser = _Parser(prog=PROG, description="Exact simulator of heralded GHZ preparation with atomic ensembles.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    pair = sub.add_parser("pair", parents=[common], help="dump one ensemble/photon pair state")
    pair.add_argument("--channel", type=int, default=1)
    sub.add_parser("ghz", parents=[common], help="herald ensemble GHZ states")
    sub.add_parser("photon-ghz", parents=[common], help="herald photon GHZ states via ensemble readout")
    sub.add_parser("bell", parents=[common], help="three-class table of the two-party analyzer")
    sw = sub.add_parser("sweep", parents=[common], help="sweep p, n or eta")
    sw.add_argument("--param", choices=SWEEP_PARAMETERS, required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    return parser


def resolve_config(args: argparse.Namespace) -> ProtocolConfig:
    data = ProtocolConfig().to_dict()
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc.msg}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key].update(value)
            else:
                data[key] = value
    for dest, path in FLAG_KEYS.items():
        value = getattr(args, dest)
        if value is None:
            continue
        node = data
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = value
    if args.command == "ghz":
        data["direction"] = "ensemble-ghz"
    elif args.command == "photon-ghz":
        data["direction"] = "photon-ghz"
    try:
        return ProtocolConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(x) if isinstance(x, (int, float)) or x is None else x for x in row])
    return buf.getvalue()


def _ket_csv(ket: Ket) -> str:
    rows = [[" ".join(f"{m.label}={c}" for m, c in s) or "vac", a.real, a.imag] for s, a in ket]
    return _csv(rows, ["occupations", "re", "im"])


def _report_csv(report: ProtocolReport) -> str:
    rows = [[r.pattern.label, r.pattern_class.value, r.probability, r.fidelity_raw, r.fidelity_postselected]
            for r in report.patterns]
    return _csv(rows, ["pattern", "class", "probability", "fidelity_raw", "fidelity_postselected"])


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit(args, json_doc, csv_text: str) -> None:
    outputs = []
    if args.format in ("json", "both"):
        outputs.append((".json", _dumps(json_doc)))
    if args.format in ("csv", "both"):
        outputs.append((".csv", csv_text))
    if args.out is None:
        for _, text in outputs:
            sys.stdout.write(text)
        return
    for suffix, text in outputs:
        path = args.out.with_suffix(suffix) if args.format == "both" else args.out
        _write(path, text)


def _run_command(args, config: ProtocolConfig) -> None:
    if args.command == "pair":
        ket = pair_state(config.source, args.channel)
        if args.dump_state is not None:
            _write(args.dump_state, _dumps(ket.to_json()))
        _emit(args, ket.to_json(), _ket_csv(ket))
    elif args.command in ("ghz", "photon-ghz"):
        if args.dump_state is not None:
            _write(args.dump_state, _dumps(system_state(config.n, config.source).to_json()))
        report = run(config)
        _emit(args, report.to_dict(), _report_csv(report))
    elif args.command == "bell":
        rows = bell_report(config.detector)
        doc = [
            {"state": row.state, "class": row.bell_class.value,
             "patterns": {pat.label: prob for pat, prob in row.distribution.items()}}
            for row in rows
        ]
        csv_rows = [[row.state, row.bell_class.value, pat.label, prob]
                    for row in rows for pat, prob in row.distribution.items()]
        _emit(args, doc, _csv(csv_rows, ["state", "class", "pattern", "probability"]))
    elif args.command == "sweep":
        try:
            values = [float(x) for x in args.values.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --values: {args.values!r}") from exc
        if not values:
            raise ConfigError("--values is empty")
        rows = sweep(config, args.param, values)
        doc = [{"value": row.value, "error": row.error,
                "report": row.report.to_dict() if row.report else None} for row in rows]
        csv_rows = []
        for row in rows:
            rep = row.report
            if rep is None:
                csv_rows.append([repr(row.value), row.error, None, None, None, None, None, None])
            else:
                cp = rep.class_probabilities
                csv_rows.append([repr(row.value), "", rep.p_signal, rep.p_coincidence, rep.rate,
                                 cp["MPlus"], cp["MMinus"], cp["Other"]])
        header = ["value", "error", "p_signal", "p_coincidence", "rate", "MPlus", "MMinus", "Other"]
        _emit(args, doc, _csv(csv_rows, header))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve_config(args)
        if args.print_config:
            sys.stdout.write(_dumps(config.to_dict()))
            return 0
        _run_command(args, config)
    except ConfigError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"{PROG}: runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
