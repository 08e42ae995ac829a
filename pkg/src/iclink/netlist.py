"""Touchstone v1 import/export and lumped R/L/M network extraction.

The extraction path turns an externally produced S-parameter file (for
example a full-wave solver export of a coil array) into the same
:class:`CouplingNetwork` that :mod:`iclink.magnetics` computes from geometry,
so the transient simulator can run on either.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, OrderError, ParseError, PassivityError, SingularityError

_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


@dataclass(frozen=True, eq=False)
class CouplingNetwork:
    """Per-coil series R and L, mutual inductance matrix M, optional shunt C.

    ``M`` is symmetric with a zero diagonal; the full inductance matrix is
    ``diag(L) + M`` and must be positive definite.
    """

    R: np.ndarray
    L: np.ndarray
    M: np.ndarray
    C_shunt: np.ndarray = field(default=None)

    def __post_init__(self):
        R = np.atleast_1d(np.asarray(self.R, dtype=float)).copy()
        L = np.atleast_1d(np.asarray(self.L, dtype=float)).copy()
        n = L.size
        M = np.asarray(self.M, dtype=float).reshape(n, n).copy()
        C = np.zeros(n) if self.C_shunt is None else np.broadcast_to(
            np.asarray(self.C_shunt, dtype=float), (n,)).copy()
        if R.shape != (n,):
            raise ModelError(f"R has {R.size} entries for {n} coils")
        if np.any(R < 0) or np.any(C < 0):
            raise ModelError("R and C_shunt must be non-negative")
        if np.any(L <= 0):
            raise PassivityError(f"self inductance must be positive, got {L}")
        if np.any(np.diag(M) != 0):
            raise ModelError("mutual matrix must have a zero diagonal")
        if not np.array_equal(M, M.T):
            raise ModelError("mutual matrix is not symmetric")
        for name, arr in (("R", R), ("L", L), ("M", M), ("C_shunt", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        try:
            np.linalg.cholesky(self.inductance_matrix())
        except np.linalg.LinAlgError:
            raise PassivityError("inductance matrix is not positive definite") from None

    @property
    def n(self) -> int:
        return self.L.size

    def inductance_matrix(self) -> np.ndarray:
        return np.diag(self.L) + self.M

    def coupling(self, i: int, j: int) -> float:
        """Coupling coefficient k = M_ij / sqrt(L_i L_j)."""
        return float(self.M[i, j] / math.sqrt(self.L[i] * self.L[j]))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.R, self.L, self.M, self.C_shunt):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def to_table(self) -> str:
        """Plain-text netlist: one ``coil R L`` row per coil, then ``M i j value`` rows."""
        lines = ["# coil R_ohm L_H C_F"]
        for k in range(self.n):
            lines.append(f"{k} {self.R[k]:.17g} {self.L[k]:.17g} {self.C_shunt[k]:.17g}")
        lines.append("# M i j value_H k")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                lines.append(f"M {i} {j} {self.M[i, j]:.17g} {self.coupling(i, j):.6f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class TouchstoneData:
    frequencies: np.ndarray  # Hz, strictly ascending
    s_matrices: np.ndarray  # (F, N, N) complex
    reference_impedance: float = 50.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s_matrices, dtype=complex)
        if f.ndim != 1 or s.ndim != 3 or s.shape[0] != f.size or s.shape[1] != s.shape[2]:
            raise ParseError(f"inconsistent shapes: f{f.shape}, S{s.shape}")
        if np.any(f <= 0):
            raise OrderError("frequencies must be positive")
        if np.any(np.diff(f) <= 0):
            raise OrderError("frequencies must be strictly ascending")
        if not np.all(np.isfinite(s)):
            raise ParseError("S-parameters must be finite")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s_matrices", s)

    @property
    def port_count(self) -> int:
        return self.s_matrices.shape[1]


def _strip_comment(line: str) -> str:
    return line.split("!", 1)[0].strip()


def parse_touchstone(text: str, ports: int | None = None) -> TouchstoneData:
    """Parse Touchstone v1 text.

    The port count is taken from ``ports`` when given, otherwise inferred
    from the number of values per frequency (1 + 2 N^2). Two-port files use
    the v1 column order S11 S21 S12 S22; larger files are row-major.
    """
    option = None
    records: list[list[str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            raise ParseError(f"line {lineno}: Touchstone v2 keyword {line.split()[0]} not supported")
        if line.startswith("#"):
            if option is not None:
                raise ParseError(f"line {lineno}: duplicate option line")
            option = _parse_option(line, lineno)
            continue
        if option is None:
            raise ParseError(f"line {lineno}: data before option line")
        toks = line.split()
        # a frequency record starts with an odd count (f + complex pairs);
        # continuation lines of N >= 3 files carry whole pairs only
        if len(toks) % 2 == 1 or not records:
            records.append(toks)
        else:
            records[-1].extend(toks)
    if option is None:
        raise ParseError("missing option line")
    if not records:
        raise ParseError("no data lines")
    unit, fmt, z0 = option
    try:
        values = np.array([float(t) for rec in records for t in rec])
    except ValueError as exc:
        raise ParseError(f"non-numeric data: {exc}") from None

    if ports is None:
        n2 = (len(records[0]) - 1) / 2
        ports = int(round(math.sqrt(n2)))
        if ports < 1 or ports * ports != n2:
            raise ParseError(f"first record has {len(records[0])} values; not 1 + 2*N^2")
    width = 1 + 2 * ports * ports
    bad = [k for k, rec in enumerate(records) if len(rec) != width]
    if bad:
        raise ParseError(f"record {bad[0] + 1} has {len(records[bad[0]])} values, expected {width}")
    rows = values.reshape(-1, width)
    freqs = rows[:, 0] * _FREQ_UNITS[unit]
    a = rows[:, 1::2]
    b = rows[:, 2::2]
    if fmt == "RI":
        s = a + 1j * b
    elif fmt == "MA":
        s = a * np.exp(1j * np.deg2rad(b))
    else:
        s = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
    s = s.reshape(-1, ports, ports)
    if ports == 2:
        s = s.transpose(0, 2, 1)
    if np.any(np.diff(freqs) <= 0):
        raise OrderError("frequencies are not strictly ascending")
    return TouchstoneData(freqs, s, z0)


def _parse_option(line: str, lineno: int):
    parts = line[1:].upper().split()
    unit, fmt, z0 = "GHZ", "MA", 50.0
    i = 0
    while i < len(parts):
        p = parts[i]
        if p in _FREQ_UNITS:
            unit = p
        elif p in ("RI", "MA", "DB"):
            fmt = p
        elif p == "S":
            pass
        elif p in ("Y", "Z", "G", "H"):
            raise ParseError(f"line {lineno}: only S-parameter files are supported, got {p}")
        elif p == "R":
            try:
                z0 = float(parts[i + 1])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad reference impedance") from None
            i += 1
        else:
            raise ParseError(f"line {lineno}: unknown option token {p!r}")
        i += 1
    return unit, fmt, z0


def write_touchstone(data: TouchstoneData) -> str:
    """Canonical RI/Hz Touchstone v1 text, one line per frequency."""
    n = data.port_count
    out = [f"# HZ S RI R {data.reference_impedance:.17g}"]
    for f, s in zip(data.frequencies, data.s_matrices):
        if n <= 2:
            out.append(" ".join([f"{f:.17g}"] + [_ri(z) for z in s.T.reshape(-1)]))
            continue
        # N >= 3: one matrix row per line, wrapped at four entries
        first = True
        for row in s:
            for k in range(0, n, 4):
                vals = [_ri(z) for z in row[k:k + 4]]
                out.append(" ".join(([f"{f:.17g}"] if first else []) + vals))
                first = False
    return "\n".join(out) + "\n"


def _ri(z: complex) -> str:
    return f"{z.real:.17g} {z.imag:.17g}"


def touchstone_suffix(ports: int) -> str:
    return f".s{ports}p"


def z_to_s(z: np.ndarray, z0: float) -> np.ndarray:
    eye = np.eye(z.shape[-1])
    return (z - z0 * eye) @ np.linalg.inv(z + z0 * eye)


def s_to_z(s: np.ndarray, z0: float) -> np.ndarray:
    eye = np.eye(s.shape[-1])
    a = eye - s
    if np.linalg.cond(a) > 1e12:
        raise SingularityError("(I - S) is numerically singular; cannot convert to Z")
    # Z = Z0 (I+S)(I-S)^-1, solved as a right division
    return z0 * np.linalg.solve(a.T, (eye + s).T).T


def synthesize_touchstone(R, L, M, frequencies, z0: float = 50.0) -> TouchstoneData:
    """Forward model: S-parameters of an R/L/M network, Z = R + jw(L + M)."""
    R = np.atleast_1d(np.asarray(R, dtype=float))
    Lmat = np.diag(np.atleast_1d(np.asarray(L, dtype=float))) + np.asarray(M, dtype=float)
    freqs = np.asarray(frequencies, dtype=float)
    s = np.empty((freqs.size,) + Lmat.shape, dtype=complex)
    for k, f in enumerate(freqs):
        z = np.diag(R) + 1j * 2 * np.pi * f * Lmat
        s[k] = z_to_s(z, z0)
    return TouchstoneData(freqs, s, z0)


def interpolate_s(data: TouchstoneData, f: float) -> np.ndarray:
    fs = data.frequencies
    if not fs[0] <= f <= fs[-1]:
        raise ParseError(f"extraction frequency {f:g} Hz outside file range [{fs[0]:g}, {fs[-1]:g}]")
    k = int(np.searchsorted(fs, f))
    if k < fs.size and fs[k] == f:
        return data.s_matrices[k]
    lo, hi = k - 1, k
    w = (f - fs[lo]) / (fs[hi] - fs[lo])
    s_lo, s_hi = data.s_matrices[lo], data.s_matrices[hi]
    re_ = (1 - w) * s_lo.real + w * s_hi.real
    im_ = (1 - w) * s_lo.imag + w * s_hi.imag
    return re_ + 1j * im_


def default_extraction_frequency(data: TouchstoneData) -> float:
    return float(math.sqrt(data.frequencies[0] * data.frequencies[-1]))


def extract_network(data: TouchstoneData, f_extract: float | None = None,
                    port_map: list[int] | None = None) -> CouplingNetwork:
    """Lumped R/L/M network from S-parameters at one frequency.

    ``port_map[i]`` is the zero-based file port feeding coil ``i``; by default
    port i is coil i.
    """
    if f_extract is None:
        f_extract = default_extraction_frequency(data)
    s = interpolate_s(data, f_extract)
    if port_map is not None:
        idx = np.asarray(port_map, dtype=int)
        if sorted(idx.tolist()) != list(range(data.port_count)):
            raise ParseError(f"port map {port_map} is not a permutation of {data.port_count} ports")
        s = s[np.ix_(idx, idx)]
    z = s_to_z(s, data.reference_impedance)
    w = 2 * np.pi * f_extract
    x = z.imag / w
    # reciprocity: symmetrise so that M is exactly symmetric
    x = 0.5 * (x + x.T)
    L = np.diag(x).copy()
    M = x - np.diag(L)
    R = np.diag(z.real).copy()
    if np.any(L <= 0):
        raise PassivityError(f"extracted self inductance is not positive: {L}")
    try:
        np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        raise PassivityError("extracted inductance matrix is not positive definite") from None
    return CouplingNetwork(R=np.maximum(R, 0.0), L=L, M=M)


@dataclass
class DiagnosticsRow:
    frequency: float
    reciprocity: float
    max_singular: float
    reciprocity_flag: bool
    passivity_flag: bool


def check_reciprocity_passivity(data: TouchstoneData, tol: float = 1e-6) -> list[DiagnosticsRow]:
    rows = []
    for f, s in zip(data.frequencies, data.s_matrices):
        rec = float(np.max(np.abs(s - s.T))) if s.size else 0.0
        sv = float(np.linalg.norm(s, 2))
        rows.append(DiagnosticsRow(float(f), rec, sv, rec > tol, sv > 1 + tol))
    return rows


def format_diagnostics(rows: list[DiagnosticsRow]) -> str:
    lines = ["frequency_hz max_asym max_sv reciprocity passivity"]
    for r in rows:
        lines.append(f"{r.frequency:.6g} {r.reciprocity:.3e} {r.max_singular:.6f} "
                     f"{'FAIL' if r.reciprocity_flag else 'ok'} {'FAIL' if r.passivity_flag else 'ok'}")
    return "\n".join(lines) + "\n"
