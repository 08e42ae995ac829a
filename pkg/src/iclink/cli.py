"""Command-line interface for the inductive-link line-code simulator.

Exit codes: 0 success, 1 validation error (including bad usage), 2 runtime/solver error.
Symbol text starting with '-' must follow a '--' separator: ``iclink decode -- --0+``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import codec
from .errors import IclError, ValidationError
from .harness import (compare, default_scenario_path, load_scenario, reports_to_csv, reports_to_json,
                      rows_to_csv, rows_to_json, run_experiment, sweep)
from .magnetics import CoilGeometry, CoilPlacement, build_network
from .netlist import check_reciprocity_passivity, extract_network, format_diagnostics, parse_touchstone

log = logging.getLogger("iclink")


def _read_arg_or_stdin(value):
    return value if value is not None else sys.stdin.read()


def _emit(text: str, out: str | None, name: str):
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)
    log.info("wrote %s", d / name)


def _scenario(args):
    path = args.scenario or default_scenario_path()
    return load_scenario(path, seed=args.seed)


def cmd_encode(args):
    bits = codec.parse_bits(_read_arg_or_stdin(args.bits))
    print(codec.symbols_to_text(codec.encode(args.code, bits)))


def cmd_decode(args):
    symbols = codec.parse_symbols(_read_arg_or_stdin(args.symbols))
    if args.code == "ternary":
        n = args.bits if args.bits is not None else 3 * len(symbols) // 2
        bits = codec.decode_ternary(codec.TernaryFrame(symbols, n))
    elif args.code == "biphase":
        bits = codec.decode_biphase(symbols)
    else:
        if any(s == 0 for s in symbols):
            raise ValidationError("NRZ levels must be '+' or '-'")
        bits = codec.decode_nrz(symbols)
    print(codec.bits_to_text(bits))


def cmd_coil(args):
    if args.scenario:
        from .harness import build_channel

        s = load_scenario(args.scenario)
        net = build_channel(s)
        names = s.coil_names
    else:
        g = CoilGeometry(args.side, args.turns, args.width, args.spacing, args.thickness)
        coils = [(g, CoilPlacement())]
        if args.dz is not None:
            coils.append((g, CoilPlacement(args.dx, args.dy, args.dz)))
        net = build_network(coils, ohm_per_um=args.ohm_per_um)
        names = tuple(f"coil{k}" for k in range(net.n))
    header = "# coils: " + " ".join(f"{k}={n}" for k, n in enumerate(names)) + "\n"
    _emit(header + net.to_table(), args.out, "netlist.txt")


def cmd_import(args):
    data = parse_touchstone(Path(args.file).read_text())
    port_map = None
    if args.port_map:
        port_map = [int(p) - 1 for p in args.port_map.split(",")]
    net = extract_network(data, args.f_extract, port_map)
    text = net.to_table() + "\n" + format_diagnostics(check_reciprocity_passivity(data, args.tol))
    _emit(text, args.out, "netlist.txt")


def _write_reports(reports, ratios, args, stem, extra=None):
    if args.format == "csv":
        text = reports_to_csv(reports)
        if ratios:
            text += "\nratio,value\n" + "".join(
                f"{k},{'' if v is None else format(v, '.17g')}\n" for k, v in ratios.items())
        _emit(text, args.out, f"{stem}.csv")
    else:
        _emit(reports_to_json(reports, ratios, extra), args.out, f"{stem}.json")


def cmd_simulate(args):
    s = _scenario(args)
    codes = [args.code] if args.code else list(s.codes)
    results = run_experiment(s, codes)
    reports = [results[c].report for c in codes]
    _write_reports(reports, None, args, "report",
                   {"network": next(iter(results.values())).fingerprint} if results else None)
    if args.out:
        _emit(s.echo(), args.out, "scenario.json")
        for c in codes:
            for name, w in results[c].waveforms.items():
                _emit(w.to_csv(), args.out, f"{c}_{name}.csv")


def cmd_compare(args):
    s = _scenario(args)
    codes = args.code.split(",") if args.code else list(s.codes)
    cmp_ = compare(s, codes)
    _write_reports(cmp_.reports, cmp_.ratios, args, "comparison", {"network": cmp_.fingerprint})


def cmd_sweep(args):
    s = _scenario(args)
    values = [float(v) if any(c in v for c in ".eE") else int(v) for v in args.values.split(",") if v]
    codes = args.code.split(",") if args.code else None
    rows = sweep(s, args.param, values, codes, workers=args.workers)
    if args.format == "csv":
        _emit(rows_to_csv(rows), args.out, "sweep.csv")
    else:
        _emit(rows_to_json(rows), args.out, "sweep.json")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iclink", description=__doc__.splitlines()[0].rstrip("."))
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="bits -> symbol text")
    e.add_argument("bits", nargs="?")
    e.add_argument("--code", choices=codec_names(), default="ternary")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="symbol text -> bits")
    d.add_argument("symbols", nargs="?")
    d.add_argument("--code", choices=codec_names(), default="ternary")
    d.add_argument("--bits", type=int, help="payload bit count of a ternary frame")
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("coil", help="geometry -> L/M table")
    c.add_argument("--scenario")
    c.add_argument("--side", type=float, default=250.0)
    c.add_argument("--turns", type=int, default=5)
    c.add_argument("--width", type=float, default=1.0)
    c.add_argument("--spacing", type=float, default=1.0)
    c.add_argument("--thickness", type=float, default=1.0)
    c.add_argument("--dx", type=float, default=0.0)
    c.add_argument("--dy", type=float, default=0.0)
    c.add_argument("--dz", type=float, help="add a second coil at this vertical separation")
    c.add_argument("--ohm-per-um", type=float, default=0.02)
    c.add_argument("--out")
    c.set_defaults(func=cmd_coil)

    t = sub.add_parser("import-touchstone", help="Touchstone file -> netlist table")
    t.add_argument("file")
    t.add_argument("--f-extract", type=float)
    t.add_argument("--port-map", help="comma-separated file ports (1-based) for coils 0..N-1")
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--out")
    t.set_defaults(func=cmd_import)

    for name, func, help_ in (("simulate", cmd_simulate, "scenario -> report + waveform CSVs"),
                              ("compare", cmd_compare, "compare line codes on one channel"),
                              ("sweep", cmd_sweep, "sweep one numeric scenario field")):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--scenario", help="scenario JSON (default: shipped 2x2 reference scenario)")
        q.add_argument("--code", help="nrz|biphase|ternary (comma-separated for compare/sweep)")
        q.add_argument("--seed", type=int)
        q.add_argument("--out")
        q.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "sweep":
            q.add_argument("--param", required=True, help="dotted path, e.g. channel.array.gap")
            q.add_argument("--values", required=True, help="comma-separated values")
            q.add_argument("--workers", type=int, default=1)
        q.set_defaults(func=func)
    return p


def codec_names():
    return ("nrz", "biphase", "ternary")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a runtime failure
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IclError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
