"""H-bridge drive synthesis, coupled-coil transient solver and receivers.

Every coil is a series R-L branch closed through a termination resistance
(the bridge switches for a driven coil, the sense-amp input for a receiver).
The network is marched with the implicit trapezoidal rule at a fixed step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, SolverError, WindowError
from .netlist import CouplingNetwork

OPEN_CIRCUIT = 1e9


@dataclass(frozen=True)
class HBridgeParams:
    supply_voltage: float = 1.0
    on_resistance: float = 10.0  # per switch; two switches conduct at a time
    edge_time: float = 0.2e-9
    symbol_period: float = 1e-9

    def __post_init__(self):
        if not self.supply_voltage > 0:
            raise ConfigError("supply_voltage must be positive")
        if self.on_resistance < 0:
            raise ConfigError("on_resistance must be non-negative")
        if not 0 < self.edge_time < self.symbol_period:
            raise ConfigError(
                f"edge_time ({self.edge_time:g} s) must lie in (0, symbol_period={self.symbol_period:g} s)")

    @property
    def source_resistance(self) -> float:
        return 2.0 * self.on_resistance


@dataclass(frozen=True)
class ReceiverParams:
    load_resistance: float = 1000.0
    threshold: float = 0.05
    hysteresis: float = 0.0

    def __post_init__(self):
        if not self.load_resistance > 0:
            raise ConfigError("load_resistance must be positive")
        if not self.threshold > self.hysteresis >= 0:
            raise ConfigError("need threshold > hysteresis >= 0")


@dataclass(frozen=True)
class NoiseParams:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class Waveform:
    t0: float
    dt: float
    samples: np.ndarray
    kind: str = "V"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if not self.dt > 0:
            raise ConfigError("waveform dt must be positive")
        if not np.all(np.isfinite(s)):
            raise SolverError("waveform has non-finite samples")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return max(self.samples.size - 1, 0) * self.dt

    def scaled(self, k: float) -> "Waveform":
        return Waveform(self.t0, self.dt, self.samples * k, self.kind)

    def to_csv(self) -> str:
        unit = "A" if self.kind == "A" else "V"
        lines = [f"time_s,value_{unit}"]
        lines += [f"{t:.17g},{v:.17g}" for t, v in zip(self.times(), self.samples)]
        return "\n".join(lines) + "\n"


def samples_per_slot(symbol_period: float, dt: float) -> int:
    s = symbol_period / dt
    n = int(round(s))
    if n < 1 or abs(s - n) > 1e-6 * n:
        raise ConfigError(f"symbol_period {symbol_period:g} is not a whole number of steps dt={dt:g}")
    return n


def synthesize_drive(values, p: HBridgeParams, dt: float, return_to_zero: bool = True,
                     idle_level: int = 0) -> Waveform:
    """Piecewise-linear bridge voltage for a sequence of slot values in {-1, 0, +1}.

    With ``return_to_zero`` every non-zero slot is an isolated pulse that
    ramps up at the slot start and back to 0 V by the slot end (ternary and
    bi-phase). Otherwise levels are held and only changes are ramped (NRZ),
    starting from ``idle_level``.
    """
    values = [int(v) for v in values]
    if any(v not in (-1, 0, 1) for v in values):
        raise ConfigError("drive values must be -1, 0 or +1")
    T, te, V = p.symbol_period, p.edge_time, p.supply_voltage
    if return_to_zero and 2 * te > T:
        raise ConfigError("return-to-zero pulses need 2*edge_time <= symbol_period")
    sps = samples_per_slot(T, dt)
    n = len(values)
    if n == 0:
        return Waveform(0.0, dt, np.zeros(0))
    t = dt * np.arange(n * sps + 1)
    xs, ys = [], []
    if return_to_zero:
        for k, v in enumerate(values):
            xs += [k * T, k * T + te, (k + 1) * T - te, (k + 1) * T]
            ys += [0.0, v * V, v * V, 0.0]
    else:
        prev = idle_level
        xs, ys = [0.0], [prev * V]
        for k, v in enumerate(values):
            if v != prev:
                xs += [k * T, k * T + te]
                ys += [prev * V, v * V]
            prev = v
        xs.append(n * T)
        ys.append(prev * V)
    return Waveform(0.0, dt, np.interp(t, np.asarray(xs), np.asarray(ys)))


@numba.njit(cache=True)
def _march(P, F, x0):
    steps = F.shape[0]
    n = x0.shape[0]
    X = np.empty((steps + 1, n))
    X[0] = x0
    for k in range(steps):
        for r in range(n):
            acc = F[k, r]
            for c in range(n):
                acc += P[r, c] * X[k, c]
            X[k + 1, r] = acc
    return X


@dataclass
class TransientResult:
    currents: list  # coil branch currents, Waveform (A) per coil
    terminal: list  # coil terminal voltages, Waveform (V) per coil
    supply: list  # current drawn from each driven source (A), None for passive coils
    drives: list


def simulate_transient(net: CouplingNetwork, drives, terminations, dt: float | None = None,
                       n_samples: int | None = None, initial: str = "dc") -> TransientResult:
    """Trapezoidal transient of the coupled coils.

    ``drives[k]`` is a voltage Waveform for a driven coil or None for a passive
    one; ``terminations[k]`` is the resistance closing coil k (source
    resistance or load). ``initial='dc'`` starts from the DC operating point
    of the drives at t0, ``'zero'`` from rest.
    """
    n = net.n
    drives = list(drives)
    terms = np.asarray(terminations, dtype=float)
    if len(drives) != n or terms.shape != (n,):
        raise ConfigError(f"need {n} drives and terminations, got {len(drives)} and {terms.size}")
    if np.any(terms <= 0):
        raise ConfigError("terminations must be positive")
    given = [w for w in drives if w is not None]
    if given:
        dt = given[0].dt if dt is None else dt
        n_samples = len(given[0])
        for w in given:
            if len(w) != n_samples or not math.isclose(w.dt, dt, rel_tol=1e-12) or w.t0 != given[0].t0:
                raise ConfigError("all drive waveforms must share t0, dt and length")
        t0 = given[0].t0
    else:
        if dt is None or n_samples is None:
            raise ConfigError("dt and n_samples are required without drives")
        t0 = 0.0
    if not dt > 0:
        raise ConfigError("dt must be positive")

    v = np.zeros((n_samples, n))
    for k, w in enumerate(drives):
        if w is not None:
            v[:, k] = w.samples

    cap = np.flatnonzero(net.C_shunt > 0)
    m = cap.size
    size = n + m
    E = np.zeros((size, size))
    A = np.zeros((size, size))
    B = np.zeros((size, n))
    E[:n, :n] = net.inductance_matrix()
    A[:n, :n] = -np.diag(net.R)
    for k in range(n):
        if k not in cap:
            A[k, k] -= terms[k]
            B[k, k] = 1.0
    for r, k in enumerate(cap):
        u = n + r
        A[k, u] = 1.0
        E[u, u] = net.C_shunt[k]
        A[u, u] = -1.0 / terms[k]
        A[u, k] = -1.0
        B[u, k] = 1.0 / terms[k]

    h = dt
    lhs = E - 0.5 * h * A
    with np.errstate(all="ignore"):
        lu = lu_factor(lhs, check_finite=True)
    if np.any(np.abs(np.diag(lu[0])) < 1e-300) or np.linalg.cond(lhs) > 1e15:
        raise SolverError("trapezoidal step matrix is singular")
    P = lu_solve(lu, E + 0.5 * h * A)
    Q = lu_solve(lu, 0.5 * h * B)

    if initial == "dc":
        try:
            x0 = np.linalg.solve(-A, B @ v[0]) if n_samples else np.zeros(size)
        except np.linalg.LinAlgError:
            raise SolverError("no DC operating point") from None
    elif initial == "zero":
        x0 = np.zeros(size)
    else:
        raise ConfigError(f"unknown initial condition {initial!r}")

    if n_samples == 0:
        X = np.zeros((0, size))
    else:
        F = (v[:-1] + v[1:]) @ Q.T
        X = _march(np.ascontiguousarray(P), np.ascontiguousarray(F), x0.astype(float))
    if not np.all(np.isfinite(X)):
        raise SolverError("solution diverged")

    i = X[:, :n]
    u = v - i * terms
    for r, k in enumerate(cap):
        u[:, k] = X[:, n + r]
    currents = [Waveform(t0, dt, i[:, k], "A") for k in range(n)]
    terminal = [Waveform(t0, dt, u[:, k], "V") for k in range(n)]
    supply = [Waveform(t0, dt, (v[:, k] - u[:, k]) / terms[k], "A") if drives[k] is not None else None
              for k in range(n)]
    return TransientResult(currents, terminal, supply, drives)


def _windows(rx: Waveform, symbol_period: float, n_symbols: int):
    sps = samples_per_slot(symbol_period, rx.dt)
    need = n_symbols * sps + (1 if n_symbols else 0)
    if len(rx) < need:
        raise WindowError(f"waveform has {len(rx)} samples, {need} needed for {n_symbols} slots")
    lo = math.ceil(0.2 * sps - 1e-9)
    hi = math.floor(0.8 * sps + 1e-9)
    if n_symbols == 0:
        return np.zeros((0, hi - lo + 1))
    idx = np.arange(n_symbols)[:, None] * sps + np.arange(lo, hi + 1)[None, :]
    return rx.samples[idx]


def detect_ternary(rx: Waveform, p: ReceiverParams, symbol_period: float, n_symbols: int) -> tuple[int, ...]:
    """Per-slot peak detection over the central 60% of each slot."""
    win = _windows(rx, symbol_period, n_symbols)
    if win.shape[0] == 0:
        return ()
    mx = win.max(axis=1)
    mn = win.min(axis=1)
    pos = (mx > p.threshold) & (np.abs(mx) >= np.abs(mn))
    neg = (mn < -p.threshold) & (np.abs(mn) > np.abs(mx))
    return tuple(int(x) for x in np.where(pos, 1, np.where(neg, -1, 0)))


def detect_nrz(rx: Waveform, p: ReceiverParams, symbol_period: float, n_bits: int,
               idle_level: int = -1) -> tuple[int, ...]:
    """Latch receiver: a positive pulse sets the bit, a negative one clears it.

    After a flip the latch re-arms once the signal has dropped back inside
    +-(threshold - hysteresis).
    """
    win = _windows(rx, symbol_period, n_bits)
    state = 1 if idle_level > 0 else 0
    release = p.threshold - p.hysteresis
    armed = True
    bits = []
    for w in win:
        mx, mn = w.max(), w.min()
        if not armed and abs(w[0]) < release:
            armed = True
        if armed:
            if mx > p.threshold and abs(mx) >= abs(mn) and state == 0:
                state, armed = 1, False
            elif mn < -p.threshold and abs(mn) > abs(mx) and state == 1:
                state, armed = 0, False
        if not armed and abs(w[-1]) < release:
            armed = True
        bits.append(state)
    return tuple(bits)


def add_noise(w: Waveform, noise: NoiseParams) -> Waveform:
    if noise.sigma == 0:
        return Waveform(w.t0, w.dt, w.samples.copy(), w.kind)
    rng = np.random.default_rng(noise.seed)
    return Waveform(w.t0, w.dt, w.samples + rng.normal(0.0, noise.sigma, w.samples.size), w.kind)
