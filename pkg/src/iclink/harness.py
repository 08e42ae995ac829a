"""Scenario files, experiment orchestration, comparisons and sweeps."""

from __future__ import annotations

import copy
import json
import math
from decimal import Decimal
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import codec
from .errors import (ConfigError, DegenerateError, GeometryError, InvalidPair, ModelError, PathError,
                     SchemaError, ValidationError)
from .magnetics import CoilGeometry, CoilPlacement, build_network
from .metrics import (REPORT_FIELDS, BerEstimate, LinkReport, bit_errors, count_pulses, count_transitions,
                      crosstalk_metrics, tx_energy, wilson_interval)
from .netlist import CouplingNetwork, extract_network, parse_touchstone
from .sim import (HBridgeParams, NoiseParams, ReceiverParams, Waveform, add_noise, detect_nrz,
                  detect_ternary, samples_per_slot, simulate_transient, synthesize_drive)

REFERENCE_PAYLOAD = "000001010011100101110111"
REFERENCE_ENERGY_RATIO = 0.69  # published ternary/NRZ energy figure
CODES = ("nrz", "biphase", "ternary")

DEFAULTS = {
    "payload": REFERENCE_PAYLOAD,
    "codes": ["nrz", "ternary"],
    "hbridge": {"supply_voltage": 1.0, "on_resistance": 10.0, "edge_time": 2e-10, "symbol_period": 1e-9},
    "receiver": {"load_resistance": 1000.0, "threshold": "auto", "threshold_fraction": 0.4, "hysteresis": 0.0},
    "noise": {"sigma": 0.0, "seed": 0},
    "solver": {"dt": 5e-12},
    "nrz_idle_level": -1,
}
GEOMETRY_DEFAULTS = {"outer_side": 250.0, "turns": 5, "trace_width": 1.0, "trace_spacing": 1.0,
                     "trace_thickness": 1.0}
ARRAY_DEFAULTS = {"channels": 1, "gap": 10.0, "dz": 106.0}
CHANNEL_DEFAULTS = {"ohm_per_um": 0.02, "R": None, "C_shunt": 0.0,
                    "quadrature": {"max_element": 5.0, "gauss": 8}}


def _schema():
    return json.loads(resources.files("iclink.data").joinpath("scenario.schema.json").read_text())


def prbs31(length: int, seed: int = 1) -> tuple[int, ...]:
    """PRBS from the x^31 + x^28 + 1 Fibonacci LFSR; seed 0 is mapped to 1."""
    mask = (1 << 31) - 1
    state = (seed & mask) or 1
    out = []
    for _ in range(length):
        bit = ((state >> 30) ^ (state >> 27)) & 1
        state = ((state << 1) | bit) & mask
        out.append(bit)
    return tuple(out)


@dataclass(eq=False)
class Scenario:
    spec: dict  # normalized document, every default filled in
    bits: tuple
    codes: tuple
    coil_names: tuple
    roles: dict
    hbridge: HBridgeParams
    receiver: ReceiverParams
    noise: NoiseParams
    dt: float
    idle_level: int
    coils: list | None = None  # [(CoilGeometry, CoilPlacement)] for geometry channels
    base_dir: Path = field(default_factory=Path.cwd)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.spec == other.spec

    def echo(self) -> str:
        return json.dumps(self.spec, indent=2, sort_keys=True) + "\n"

    def index(self, role: str) -> list[int]:
        return [self.coil_names.index(n) for n, r in self.roles.items() if r == role]


def _merge(defaults: dict, given: dict | None) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in (given or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def default_scenario_path() -> Path:
    return Path(str(resources.files("iclink.data").joinpath("default.json")))


def load_scenario(source, base_dir: str | Path | None = None, seed: int | None = None) -> Scenario:
    """Validate a scenario document (path, JSON text or dict) and fill defaults."""
    if isinstance(source, dict):
        doc = copy.deepcopy(source)
    else:
        p = Path(source)
        try:
            text = p.read_text()
        except OSError as exc:
            raise SchemaError("", f"cannot read scenario: {exc}") from None
        base_dir = p.parent if base_dir is None else base_dir
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from None
    base_dir = Path(base_dir or Path.cwd()).resolve()
    if seed is not None:
        doc.setdefault("noise", {})["seed"] = seed

    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SchemaError(".".join(str(x) for x in e.absolute_path) or "<root>", e.message)

    spec = _merge(DEFAULTS, {k: v for k, v in doc.items() if k != "channel"})
    spec["channel"] = _normalize_channel(doc.get("channel") or {"array": {}}, base_dir)
    if isinstance(spec["payload"], dict):
        spec["payload"] = {"prbs_length": spec["payload"]["prbs_length"],
                           "prbs_seed": spec["payload"].get("prbs_seed", 1)}
        bits = prbs31(spec["payload"]["prbs_length"], spec["payload"]["prbs_seed"])
    else:
        bits = codec.parse_bits(spec["payload"])
        spec["payload"] = codec.bits_to_text(bits)

    names = _coil_names(spec["channel"])
    spec["roles"] = _normalize_roles(doc.get("roles"), names)

    def build(path, cls, values):
        try:
            return cls(**values)
        except (ValidationError, TypeError) as exc:
            raise ValidationError(f"{path}: {exc}") from None

    hb = build("hbridge", HBridgeParams, spec["hbridge"])
    rx_vals = dict(spec["receiver"])
    rx_vals.pop("threshold_fraction")
    thr = rx_vals["threshold"]
    rx = build("receiver", ReceiverParams, {**rx_vals, "threshold": 1.0 if thr == "auto" else thr})
    noise = build("noise", NoiseParams, spec["noise"])
    dt = spec["solver"]["dt"]
    if dt > hb.symbol_period / 200 * (1 + 1e-9):
        raise ValidationError(f"solver.dt: {dt:g} s exceeds symbol_period/200")
    try:
        samples_per_slot(hb.symbol_period, dt)
    except ConfigError as exc:
        raise ValidationError(f"solver.dt: {exc}") from None

    coils = None
    if "touchstone" not in spec["channel"]:
        coils = _geometry_coils(spec["channel"])

    return Scenario(spec=spec, bits=bits, codes=tuple(spec["codes"]), coil_names=names,
                    roles=spec["roles"], hbridge=hb, receiver=rx, noise=noise, dt=dt,
                    idle_level=spec["nrz_idle_level"], coils=coils, base_dir=base_dir)


def _normalize_channel(ch: dict, base_dir: Path) -> dict:
    sources = [k for k in ("array", "coils", "touchstone") if k in ch]
    if len(sources) != 1:
        raise SchemaError("channel", f"exactly one of array/coils/touchstone required, got {sources or 'none'}")
    out = _merge(CHANNEL_DEFAULTS, {k: v for k, v in ch.items() if k not in sources})
    src = sources[0]
    if src == "array":
        arr = _merge(ARRAY_DEFAULTS, ch["array"])
        arr["geometry"] = _merge(GEOMETRY_DEFAULTS, ch["array"].get("geometry"))
        out["array"] = arr
    elif src == "coils":
        coils = []
        for c in ch["coils"]:
            coils.append({"name": c["name"], "geometry": _merge(GEOMETRY_DEFAULTS, c.get("geometry")),
                          "placement": _merge({"dx": 0.0, "dy": 0.0, "dz": 0.0}, c.get("placement"))})
        if len({c["name"] for c in coils}) != len(coils):
            raise SchemaError("channel.coils", "coil names must be unique")
        out["coils"] = coils
    else:
        ts = dict(ch["touchstone"])
        ts["file"] = str((base_dir / ts["file"]).resolve())
        ts.setdefault("f_extract", None)
        ports = sorted(int(k) for k in ts["port_map"])
        if ports != list(range(1, len(ports) + 1)):
            raise SchemaError("channel.touchstone.port_map", "ports must be numbered 1..N without gaps")
        if len(set(ts["port_map"].values())) != len(ports):
            raise SchemaError("channel.touchstone.port_map", "coil names must be unique")
        ts["port_map"] = {str(k): ts["port_map"][str(k)] for k in ports}
        out["touchstone"] = ts
    return out


def _coil_names(ch: dict) -> tuple:
    if "array" in ch:
        return tuple(n for k in range(1, ch["array"]["channels"] + 1) for n in (f"TX{k}", f"RX{k}"))
    if "coils" in ch:
        return tuple(c["name"] for c in ch["coils"])
    return tuple(ch["touchstone"]["port_map"].values())


def _normalize_roles(roles: dict | None, names: tuple) -> dict:
    if roles is None:
        roles = {}
        for n in names:
            if n == "TX1":
                roles[n] = "aggressor"
            elif n == "RX1":
                roles[n] = "receiver"
            elif n.startswith("TX"):
                roles[n] = "idle"
            elif n.startswith("RX"):
                roles[n] = "victim"
            else:
                raise SchemaError("roles", f"cannot infer a role for coil {n!r}; give roles explicitly")
    unknown = set(roles) - set(names)
    if unknown:
        raise ValidationError(f"roles: unknown coils {sorted(unknown)}; known {list(names)}")
    missing = [n for n in names if n not in roles]
    if missing:
        raise ValidationError(f"roles: no role for coils {missing}")
    values = list(roles.values())
    if values.count("aggressor") != 1 or values.count("receiver") != 1:
        raise ValidationError("roles: exactly one aggressor and one receiver are required")
    return {n: roles[n] for n in names}


def _geometry_coils(ch: dict):
    try:
        if "array" in ch:
            a = ch["array"]
            g = CoilGeometry(**a["geometry"])
            pitch = g.outer_side + a["gap"]
            if not a["gap"] > 0 and a["channels"] > 1:
                raise GeometryError(f"array gap must be positive, got {a['gap']}")
            out = []
            for k in range(a["channels"]):
                out.append((g, CoilPlacement(k * pitch, 0.0, 0.0)))
                out.append((g, CoilPlacement(k * pitch, 0.0, a["dz"])))
            return out
        out = []
        for i, c in enumerate(ch["coils"]):
            where = f"channel.coils[{i}]"
            try:
                g = CoilGeometry(**c["geometry"])
            except GeometryError as exc:
                raise GeometryError(f"{where}.geometry: {exc}") from None
            try:
                p = CoilPlacement(**c["placement"])
            except GeometryError as exc:
                raise GeometryError(f"{where}.placement: {exc}") from None
            out.append((g, p))
        return out
    except GeometryError as exc:
        msg = str(exc)
        raise GeometryError(msg if msg.startswith("channel") else f"channel: {msg}") from None


def build_channel(s: Scenario, workers: int = 1) -> CouplingNetwork:
    ch = s.spec["channel"]
    if s.coils is not None:
        q = ch["quadrature"]
        return build_network(s.coils, R_per_coil=ch["R"], C_shunt=ch["C_shunt"], ohm_per_um=ch["ohm_per_um"],
                             max_element=q["max_element"], gauss=q["gauss"], workers=workers)
    ts = ch["touchstone"]
    try:
        text = Path(ts["file"]).read_text()
    except OSError as exc:
        raise ValidationError(f"channel.touchstone.file: {exc}") from None
    data = parse_touchstone(text)
    if data.port_count != len(ts["port_map"]):
        raise ValidationError(
            f"channel.touchstone.port_map: {len(ts['port_map'])} ports mapped, file has {data.port_count}")
    port_map = [int(k) - 1 for k in ts["port_map"]]
    net = extract_network(data, ts["f_extract"], port_map)
    if ch["R"] is not None or ch["C_shunt"]:
        R = net.R if ch["R"] is None else np.full(net.n, ch["R"])
        net = CouplingNetwork(R=R, L=net.L, M=net.M, C_shunt=ch["C_shunt"])
    return net


def _terminations(s: Scenario) -> list[float]:
    out = []
    for name in s.coil_names:
        role = s.roles[name]
        out.append(s.hbridge.source_resistance if role in ("aggressor", "idle") else s.receiver.load_resistance)
    return out


def _slots(code: str, bits) -> tuple:
    return codec.encode(code, bits)


def _run_clean(s: Scenario, net: CouplingNetwork, code: str, slots):
    tx = s.index("aggressor")[0]
    drive = synthesize_drive(slots, s.hbridge, s.dt, return_to_zero=code != "nrz",
                             idle_level=s.idle_level if code == "nrz" else 0)
    drives = [None] * net.n
    drives[tx] = drive
    return simulate_transient(net, drives, _terminations(s), dt=s.dt, initial="dc")


def calibrate_threshold(s: Scenario, net: CouplingNetwork, code: str) -> tuple[float, float]:
    """(clean peak, threshold) from an isolated pulse (or a single NRZ edge)."""
    if s.spec["receiver"]["threshold"] != "auto":
        thr = float(s.spec["receiver"]["threshold"])
        return thr / s.spec["receiver"]["threshold_fraction"], thr
    slot = (-s.idle_level,) if code == "nrz" else (1,)
    res = _run_clean(s, net, code, slot)
    rx = s.index("receiver")[0]
    peak = float(np.max(np.abs(res.terminal[rx].samples)))
    if peak == 0:
        raise DegenerateError("calibration pulse produced no received signal")
    thr = s.spec["receiver"]["threshold_fraction"] * peak
    if not thr > s.receiver.hysteresis:
        raise ValidationError("receiver.hysteresis must be below the calibrated threshold")
    return peak, thr


def _receiver(s: Scenario, threshold: float) -> ReceiverParams:
    return ReceiverParams(s.receiver.load_resistance, threshold, s.receiver.hysteresis)


def _detect_bits(code: str, rx: Waveform, p: ReceiverParams, s: Scenario, n_bits: int, strict: bool):
    T = s.hbridge.symbol_period
    if code == "nrz":
        return detect_nrz(rx, p, T, n_bits, s.idle_level), True
    if code == "biphase":
        pulses = detect_ternary(rx, p, T, n_bits)
        return tuple(1 if x > 0 else 0 for x in pulses), all(x != 0 for x in pulses)
    n_sym = 2 * -(-n_bits // 3)
    symbols = detect_ternary(rx, p, T, n_sym)
    frame = codec.TernaryFrame(symbols, n_bits)
    try:
        return codec.decode_ternary(frame), True
    except InvalidPair:
        if strict:
            raise
        # erasures: an invalid pair decodes as 000
        fixed = list(symbols)
        for k in range(0, len(fixed), 2):
            if (fixed[k], fixed[k + 1]) == (0, 0):
                fixed[k] = fixed[k + 1] = -1
        return codec.decode_ternary(codec.TernaryFrame(fixed, n_bits)), False


@dataclass
class ExperimentResult:
    report: LinkReport
    waveforms: dict  # name -> Waveform
    threshold: float
    fingerprint: str


def run_experiment(s: Scenario, codes=None, network: CouplingNetwork | None = None) -> dict:
    """Encode, drive, simulate, detect, decode and measure for each line code."""
    net = build_channel(s) if network is None else network
    results = {}
    for code in (codes or s.codes):
        results[code] = _experiment(s, net, code)
    return results


def _experiment(s: Scenario, net: CouplingNetwork, code: str) -> ExperimentResult:
    if code not in CODES:
        raise ValidationError(f"unknown line code {code!r}")
    bits = s.bits
    slots = _slots(code, bits)
    n_sym = len(slots)
    T = s.hbridge.symbol_period
    # decimal product so that 24 slots of 1 ns report exactly 24e-9
    duration = float(Decimal(repr(T)) * n_sym)
    rx_i = s.index("receiver")[0]
    tx_i = s.index("aggressor")[0]
    victims = s.index("victim")
    if n_sym == 0:
        report = LinkReport(code, 0, 0, None, 0.0, 0.0, None, 0, None, None, None, True)
        return ExperimentResult(report, {}, 0.0, net.fingerprint())

    _, thr = calibrate_threshold(s, net, code)
    res = _run_clean(s, net, code, slots)
    clean_rx = res.terminal[rx_i]
    rx = add_noise(clean_rx, s.noise)
    decoded, valid = _detect_bits(code, rx, _receiver(s, thr), s, len(bits), strict=False)
    errors = bit_errors(bits, decoded)

    energy = tx_energy(res.drives[tx_i], res.supply[tx_i])
    if code == "nrz":
        activity = count_transitions(slots, s.idle_level)
    elif code == "ternary":
        activity = count_pulses(codec.TernaryFrame(slots, len(bits)))
    else:
        activity = n_sym
    xt_ratio = xt_energy = None
    if victims:
        pairs = [crosstalk_metrics(clean_rx, res.terminal[v], s.receiver.load_resistance) for v in victims]
        xt_ratio = max(p[0] for p in pairs)
        xt_energy = math.fsum(p[1] for p in pairs)
    report = LinkReport(
        scheme=code, bits=len(bits), symbols=n_sym, bits_per_symbol=len(bits) / n_sym,
        duration_s=duration, tx_energy_j=energy, avg_power_w=energy / duration,
        transitions_or_pulses=activity, crosstalk_peak_ratio=xt_ratio, crosstalk_energy_j=xt_energy,
        ber=errors / len(bits) if bits else None, decoded_ok=valid and errors == 0)
    waves = {"drive": res.drives[tx_i], "tx_current": res.currents[tx_i], "rx": rx}
    for v in victims:
        waves[f"victim_{s.coil_names[v]}"] = res.terminal[v]
    return ExperimentResult(report, waves, thr, net.fingerprint())


@dataclass
class Comparison:
    reports: list
    ratios: dict
    fingerprint: str
    results: dict = field(default_factory=dict, repr=False)


def compare(s: Scenario, codes=None, network: CouplingNetwork | None = None) -> Comparison:
    codes = list(codes or s.codes)
    if len(codes) < 2:
        raise ValidationError("compare needs at least two line codes")
    net = build_channel(s) if network is None else network
    results = {c: _experiment(s, net, c) for c in codes}
    prints = {r.fingerprint for r in results.values()}
    if len(prints) != 1:
        raise ModelError("codes were simulated on different networks")
    by = {c: r.report for c, r in results.items()}
    ratios = {}
    if "nrz" in by:
        base = by["nrz"]
        for c, r in by.items():
            if c == "nrz":
                continue
            ratios[f"{c}/nrz_energy"] = r.tx_energy_j / base.tx_energy_j if base.tx_energy_j else None
            ratios[f"{c}/nrz_duration"] = (float(Fraction(repr(r.duration_s)) / Fraction(repr(base.duration_s)))
                                           if base.duration_s else None)
            if r.crosstalk_energy_j is not None and base.crosstalk_energy_j:
                ratios[f"{c}/nrz_crosstalk_energy"] = r.crosstalk_energy_j / base.crosstalk_energy_j
        if "ternary" in by:
            ratios["reference_ternary/nrz_energy"] = REFERENCE_ENERGY_RATIO
            ratios["reference_ternary/nrz_duration"] = 16 / 24
    return Comparison([by[c] for c in codes], ratios, prints.pop(), results)


def _get_path(doc: dict, path: str):
    node = doc
    parts = path.split(".")
    for p in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(p)]
            except (ValueError, IndexError):
                raise PathError(f"unknown field {path!r}") from None
        elif isinstance(node, dict) and p in node:
            node = node[p]
        else:
            raise PathError(f"unknown field {path!r}")
    last = parts[-1]
    if isinstance(node, list):
        try:
            idx = int(last)
            value = node[idx]
        except (ValueError, IndexError):
            raise PathError(f"unknown field {path!r}") from None
        return node, idx, value
    if not isinstance(node, dict) or last not in node:
        raise PathError(f"unknown field {path!r}")
    return node, last, node[last]


def sweep(s: Scenario, path: str, values, codes=None, workers: int = 1) -> list[dict]:
    """One comparison row per value of a numeric scenario field (dotted path)."""
    _, _, current = _get_path(s.spec, path)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise PathError(f"field {path!r} is not numeric")
    codes = list(codes or s.codes)

    def row(value):
        doc = copy.deepcopy(s.spec)
        node, key, _ = _get_path(doc, path)
        node[key] = value
        scen = load_scenario(doc, base_dir=s.base_dir)
        if len(codes) >= 2:
            cmp_ = compare(scen, codes)
            reports, ratios = cmp_.reports, cmp_.ratios
        else:
            reports = [r.report for r in run_experiment(scen, codes).values()]
            ratios = {}
        out = {"parameter": path, "value": value}
        for r in reports:
            for k in ("tx_energy_j", "duration_s", "crosstalk_peak_ratio", "crosstalk_energy_j", "decoded_ok"):
                out[f"{r.scheme}.{k}"] = getattr(r, k)
        out.update(ratios)
        return out

    values = list(values)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(row, values))
    return [row(v) for v in values]


def estimate_ber(s: Scenario, n_trials: int, noise: NoiseParams, code: str = "ternary",
                 network: CouplingNetwork | None = None) -> BerEstimate:
    """Bit error rate over independent noise draws (seed + trial index) on one clean run."""
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    net = build_channel(s) if network is None else network
    bits = s.bits
    if not bits:
        return BerEstimate(0.0, 0.0, 0.0, 0, 0)
    _, thr = calibrate_threshold(s, net, code)
    p = _receiver(s, thr)
    clean = _run_clean(s, net, code, _slots(code, bits)).terminal[s.index("receiver")[0]]
    errors = 0
    for t in range(n_trials):
        rx = add_noise(clean, NoiseParams(noise.sigma, noise.seed + t))
        decoded, _ = _detect_bits(code, rx, p, s, len(bits), strict=False)
        errors += bit_errors(bits, decoded)
    total = n_trials * len(bits)
    lo, hi = wilson_interval(errors, total)
    return BerEstimate(errors / total, lo, hi, errors, total)


# ---------------------------------------------------------------- output


def fmt_value(v) -> str:
    """Frozen number format: 17 significant digits, null for missing."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return "null"
        return format(v, ".17g")
    return json.dumps(v)


def reports_to_json(reports, ratios: dict | None = None, extra: dict | None = None) -> str:
    lines = ["{"]
    body = []
    if extra:
        for k, v in extra.items():
            body.append(f'  {json.dumps(k)}: {fmt_value(v)}')
    rows = []
    for r in reports:
        d = r.as_dict()
        fields_ = ", ".join(f"{json.dumps(k)}: {fmt_value(d[k])}" for k in d)
        rows.append("    {" + fields_ + "}")
    body.append('  "reports": [\n' + ",\n".join(rows) + ("\n  ]" if rows else "]"))
    if ratios is not None:
        items = ", ".join(f"{json.dumps(k)}: {fmt_value(v)}" for k, v in ratios.items())
        body.append('  "ratios": {' + items + "}")
    lines.append(",\n".join(body))
    lines.append("}")
    return "\n".join(lines) + "\n"


def reports_to_csv(reports) -> str:
    out = [",".join(REPORT_FIELDS)]
    for r in reports:
        d = r.as_dict()
        out.append(",".join("" if d[k] is None else (d[k] if isinstance(d[k], str) else fmt_value(d[k]))
                            for k in REPORT_FIELDS))
    return "\n".join(out) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return "\n"
    keys = list(rows[0])
    out = [",".join(keys)]
    for r in rows:
        out.append(",".join("" if r.get(k) is None else
                            (r[k] if isinstance(r[k], str) else fmt_value(r[k])) for k in keys))
    return "\n".join(out) + "\n"


def rows_to_json(rows: list[dict]) -> str:
    items = []
    for r in rows:
        items.append("  {" + ", ".join(f"{json.dumps(k)}: {fmt_value(v)}" for k, v in r.items()) + "}")
    return "[\n" + ",\n".join(items) + ("\n]\n" if items else "]\n")
