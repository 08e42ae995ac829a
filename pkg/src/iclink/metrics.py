"""Link figures of merit: energy, duration, transitions/pulses, crosstalk, BER."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .codec import TernaryFrame
from .errors import DegenerateError, ShapeError

REPORT_FIELDS = (
    "scheme", "bits", "symbols", "bits_per_symbol", "duration_s", "tx_energy_j", "avg_power_w",
    "transitions_or_pulses", "crosstalk_peak_ratio", "crosstalk_energy_j", "ber", "decoded_ok",
)


@dataclass
class LinkReport:
    scheme: str
    bits: int
    symbols: int
    bits_per_symbol: float | None
    duration_s: float
    tx_energy_j: float
    avg_power_w: float | None
    transitions_or_pulses: int
    crosstalk_peak_ratio: float | None
    crosstalk_energy_j: float | None
    ber: float | None
    decoded_ok: bool

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _same_grid(a, b):
    if len(a) != len(b) or a.t0 != b.t0 or not math.isclose(a.dt, b.dt, rel_tol=1e-12):
        raise ShapeError("waveforms must share t0, dt and length")


def tx_energy(drive_v, coil_current) -> float:
    """Supply-delivered energy: trapezoidal integral of v(t) * i(t)."""
    _same_grid(drive_v, coil_current)
    if len(drive_v) < 2:
        return 0.0
    return float(np.trapezoid(drive_v.samples * coil_current.samples, dx=drive_v.dt))


def count_transitions(levels, idle_level: int) -> int:
    prev = idle_level
    n = 0
    for lv in levels:
        n += lv != prev
        prev = lv
    return int(n)


def count_pulses(frame: TernaryFrame) -> int:
    return sum(1 for s in frame.symbols if s != 0)


def crosstalk_metrics(intended_rx, victim_rx, load: float) -> tuple[float, float]:
    """(max|victim| / max|intended|, energy dissipated in the victim load)."""
    _same_grid(intended_rx, victim_rx)
    peak = float(np.max(np.abs(intended_rx.samples))) if len(intended_rx) else 0.0
    if peak == 0:
        raise DegenerateError("intended receiver waveform is identically zero")
    ratio = float(np.max(np.abs(victim_rx.samples))) / peak
    energy = float(np.trapezoid(victim_rx.samples ** 2, dx=victim_rx.dt)) / load if len(victim_rx) > 1 else 0.0
    return ratio, energy


def bit_errors(sent, received) -> int:
    if len(sent) != len(received):
        raise ShapeError(f"bit counts differ: {len(sent)} vs {len(received)}")
    return int(sum(a != b for a, b in zip(sent, received)))


def wilson_interval(errors: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(errors, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass
class BerEstimate:
    ber: float
    low: float
    high: float
    errors: int
    bits: int


def estimate_ber(scenario, n_trials: int, noise, code: str = "ternary", network=None) -> BerEstimate:
    """Monte Carlo BER with a 95% Wilson interval; see :func:`iclink.harness.estimate_ber`."""
    from .harness import estimate_ber as run

    return run(scenario, n_trials, noise, code, network)
