"""Line codes: NRZ levels, bi-phase pulses and the 3-bit/2-symbol ternary code.

Ternary mapping: a triplet (MSB first) with value b in 0..7 is shifted to
v = b - 4 (b <= 3) or v = b - 3 (b >= 4), then written as two balanced
ternary digits with v = 3*d1 + d0. The eight values land on the eight
non-zero pairs, so (0, 0) never appears and every pair carries a pulse.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidPair, LengthMismatch, ValidationError

SYMBOL_CHARS = {-1: "-", 0: "0", 1: "+"}
CHAR_SYMBOLS = {v: k for k, v in SYMBOL_CHARS.items()}


def _triplet_to_pair(b: int) -> tuple[int, int]:
    v = b - 4 if b <= 3 else b - 3
    d0 = (v + 1) % 3 - 1
    d1 = (v - d0) // 3
    return d1, d0


ENCODE_TABLE: dict[int, tuple[int, int]] = {b: _triplet_to_pair(b) for b in range(8)}
DECODE_TABLE: dict[tuple[int, int], int] = {p: b for b, p in ENCODE_TABLE.items()}


@dataclass(frozen=True)
class TernaryFrame:
    symbols: tuple[int, ...]
    payload_bits: int

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s not in (-1, 0, 1) for s in self.symbols):
            raise ValidationError("ternary symbols must be -1, 0 or +1")
        if self.payload_bits < 0:
            raise ValidationError("payload_bits must be >= 0")

    def __len__(self):
        return len(self.symbols)

    def text(self) -> str:
        return symbols_to_text(self.symbols)


def parse_bits(text: str) -> tuple[int, ...]:
    """Bits from a '0'/'1' string; whitespace and underscores are ignored."""
    cleaned = re.sub(r"[\s_]", "", text)
    if any(c not in "01" for c in cleaned):
        raise ValidationError(f"bit string may only contain 0/1, got {text!r}")
    return tuple(int(c) for c in cleaned)


def bits_to_text(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def symbols_to_text(symbols: Iterable[int]) -> str:
    return "".join(SYMBOL_CHARS[int(s)] for s in symbols)


def parse_symbols(text: str) -> tuple[int, ...]:
    cleaned = re.sub(r"[\s_]", "", text)
    try:
        return tuple(CHAR_SYMBOLS[c] for c in cleaned)
    except KeyError as exc:
        raise ValidationError(f"symbol text may only contain '-', '0', '+': bad {exc}") from None


def _check_bits(bits: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValidationError("bits must be 0 or 1")
    return out


def encode_ternary(bits: Sequence[int]) -> TernaryFrame:
    bits = _check_bits(bits)
    n = len(bits)
    padded = bits + (0,) * (-n % 3)
    symbols = []
    for k in range(0, len(padded), 3):
        b2, b1, b0 = padded[k:k + 3]
        symbols.extend(ENCODE_TABLE[4 * b2 + 2 * b1 + b0])
    return TernaryFrame(tuple(symbols), n)


def decode_ternary(frame: TernaryFrame) -> tuple[int, ...]:
    expected = 2 * -(-frame.payload_bits // 3)
    if len(frame.symbols) != expected:
        raise LengthMismatch(
            f"{len(frame.symbols)} symbols for {frame.payload_bits} payload bits (expected {expected})")
    bits = []
    for k in range(0, len(frame.symbols), 2):
        pair = frame.symbols[k], frame.symbols[k + 1]
        try:
            b = DECODE_TABLE[pair]
        except KeyError:
            raise InvalidPair(f"symbol pair {pair} at index {k} is not a code word") from None
        bits.extend(((b >> 2) & 1, (b >> 1) & 1, b & 1))
    return tuple(bits[:frame.payload_bits])


def encode_nrz(bits: Sequence[int]) -> tuple[int, ...]:
    return tuple(1 if b else -1 for b in _check_bits(bits))


def decode_nrz(levels: Sequence[int]) -> tuple[int, ...]:
    return tuple(1 if lv > 0 else 0 for lv in levels)


def encode_biphase(bits: Sequence[int]) -> tuple[int, ...]:
    # same polarity rule as NRZ, but each level is sent as an isolated pulse
    return encode_nrz(bits)


def decode_biphase(pulses: Sequence[int]) -> tuple[int, ...]:
    if any(p == 0 for p in pulses):
        raise InvalidPair("bi-phase slot without a pulse")
    return decode_nrz(pulses)


def nrz_transition_events(levels: Sequence[int], idle_level: int = -1) -> list[tuple[int, int]]:
    """(slot, polarity) for every slot whose level differs from the one before it."""
    if idle_level not in (-1, 1):
        raise ValidationError("idle_level must be -1 or +1")
    events = []
    prev = idle_level
    for k, lv in enumerate(levels):
        if lv != prev:
            events.append((k, 1 if lv > prev else -1))
        prev = lv
    return events


def max_zero_run(frame: TernaryFrame | Sequence[int]) -> int:
    symbols = frame.symbols if isinstance(frame, TernaryFrame) else frame
    best = run = 0
    for s in symbols:
        run = run + 1 if s == 0 else 0
        best = max(best, run)
    return best


def encode(code: str, bits: Sequence[int]) -> tuple[int, ...]:
    """Slot values for a line code name: 'nrz', 'biphase' or 'ternary'."""
    if code == "nrz":
        return encode_nrz(bits)
    if code == "biphase":
        return encode_biphase(bits)
    if code == "ternary":
        return encode_ternary(bits).symbols
    raise ValidationError(f"unknown line code {code!r}")
