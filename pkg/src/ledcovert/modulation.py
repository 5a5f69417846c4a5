"""Bit-string to LED on/off timelines.

Every modulator returns an :class:`LedTimeline`: per-LED state changes with
microsecond timestamps. LEDs start dark, writes are never redundant (a
state change is only recorded when the state actually changes) and every LED
is dark again at ``total_duration``.

Schemes
-------
ook           one LED; '1' lit for t_on, '0' dark for t_off, bits abut
bfsk          one LED; '1' lit for t_on, '0' lit for t_off, dark t_d after each bit
manchester    one LED; '0' = lit, dark; '1' = dark, lit (equal half cells)
ask           n LEDs; bit i of each n-bit group drives LED i for t_all, then
              all dark for t_d
ask_levels    n LEDs; log2(L) bits pick how many LEDs are lit (0 .. L-1) for
              t_all, no gap. This is the staircase a photodiode can read.
ook_parallel  n LEDs each running OOK side by side: bit i of each group drives
              LED i for t_all, no gap
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bits import BitsLike, as_bits
from .errors import (
    AlignmentError,
    IndistinguishableSymbolsError,
    InvalidCellError,
    InvalidInputError,
)
from .framing import PREAMBLE_BITS

OFF = 0
ON = 1


class Scheme(str, Enum):
    OOK = "ook"
    BFSK = "bfsk"
    MANCHESTER = "manchester"
    ASK = "ask"
    ASK_LEVELS = "ask_levels"
    OOK_PARALLEL = "ook_parallel"

    @classmethod
    def parse(cls, value: "Scheme | str") -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise InvalidInputError(f"unknown scheme {value!r} (expected one of {names})") from None

    @property
    def single_led(self) -> bool:
        return self in (Scheme.OOK, Scheme.BFSK, Scheme.MANCHESTER)


class Event(NamedTuple):
    time_us: float
    led: int
    state: int


@dataclass(frozen=True)
class ModulationParams:
    """Symbol timing in microseconds.

    Only the durations a scheme actually uses matter to it, but all of them
    must be positive.
    """

    t_on: float = 1000.0
    t_off: float = 1000.0
    t_d: float = 500.0
    t_all: float = 1000.0
    n_leds: int = 1

    def __post_init__(self):
        for name in ("t_on", "t_off", "t_d", "t_all"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidInputError(f"{name} must be a positive duration, got {value!r}")
        if int(self.n_leds) != self.n_leds or self.n_leds < 1:
            raise InvalidInputError(f"n_leds must be a positive integer, got {self.n_leds!r}")

    @classmethod
    def bfsk_default(cls, base_us: float) -> "ModulationParams":
        """t_off = T, t_on = 2T, t_d = T/2."""
        return cls(t_on=2 * base_us, t_off=base_us, t_d=base_us / 2, t_all=base_us)


@dataclass(frozen=True)
class LedTimeline:
    events: tuple[Event, ...]
    total_duration: float
    n_leds: int

    def __post_init__(self):
        last = -math.inf
        state = [OFF] * self.n_leds
        for ev in self.events:
            if ev.time_us < last:
                raise InvalidInputError("timeline events must be sorted by time")
            if not 0 <= ev.led < self.n_leds:
                raise InvalidInputError(f"event for LED {ev.led} in a {self.n_leds}-LED timeline")
            if ev.state not in (ON, OFF) or ev.state == state[ev.led]:
                raise InvalidInputError(f"redundant or invalid write at {ev.time_us} us on LED {ev.led}")
            state[ev.led] = ev.state
            last = ev.time_us
        if any(state):
            raise InvalidInputError("every LED must be OFF at the end of a timeline")
        if self.events and self.events[-1].time_us > self.total_duration:
            raise InvalidInputError("event after the end of the timeline")

    def __len__(self):
        return len(self.events)

    def on_intervals(self, led: int) -> list[tuple[float, float]]:
        intervals = []
        start = None
        for ev in self.events:
            if ev.led != led:
                continue
            if ev.state == ON:
                start = ev.time_us
            else:
                intervals.append((start, ev.time_us))
        return intervals

    def edges(self, led: int) -> list[float]:
        return [ev.time_us for ev in self.events if ev.led == led]

    def states_at(self, times_us: Sequence[float] | np.ndarray) -> np.ndarray:
        """Per-LED state at each time; shape ``(len(times), n_leds)``."""
        times = np.asarray(times_us, dtype=float)
        out = np.zeros((times.size, self.n_leds), dtype=np.uint8)
        for led in range(self.n_leds):
            edges = np.asarray(self.edges(led), dtype=float)
            # an odd number of edges at or before t means the LED is lit
            out[:, led] = np.searchsorted(edges, times, side="right") % 2
        return out

    def lit_count_steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Change times and the number of lit LEDs from each change onward."""
        if not self.events:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        times = np.fromiter((e.time_us for e in self.events), dtype=float)
        delta = np.fromiter((1 if e.state == ON else -1 for e in self.events), dtype=np.int64)
        return times, np.cumsum(delta)

    def shifted(self, lead_us: float = 0.0, tail_us: float = 0.0) -> "LedTimeline":
        """Prepend ``lead_us`` and append ``tail_us`` of darkness."""
        if lead_us < 0 or tail_us < 0:
            raise InvalidInputError("padding must be non-negative")
        events = tuple(Event(e.time_us + lead_us, e.led, e.state) for e in self.events)
        return LedTimeline(events, self.total_duration + lead_us + tail_us, self.n_leds)

    def with_leds(self, n_leds: int) -> "LedTimeline":
        if n_leds < self.n_leds:
            raise InvalidInputError("cannot shrink the LED count of a timeline")
        return LedTimeline(self.events, self.total_duration, n_leds)


class _TimelineBuilder:
    def __init__(self, n_leds: int):
        self.n_leds = n_leds
        self.state = [OFF] * n_leds
        self.t = 0.0
        self.events: list[Event] = []

    def hold(self, states: Sequence[int], duration: float) -> None:
        for led, s in enumerate(states):
            if s != self.state[led]:
                self.events.append(Event(self.t, led, int(s)))
                self.state[led] = int(s)
        self.t += duration

    def dark(self, duration: float) -> None:
        self.hold([OFF] * self.n_leds, duration)

    def finish(self) -> LedTimeline:
        self.hold([OFF] * self.n_leds, 0.0)
        return LedTimeline(tuple(self.events), self.t, self.n_leds)


def _require_single_led(params: ModulationParams, scheme: str) -> None:
    if params.n_leds != 1:
        raise InvalidInputError(f"{scheme} drives exactly one LED, params.n_leds={params.n_leds}")


def modulate_ook(bits: BitsLike, params: ModulationParams) -> LedTimeline:
    _require_single_led(params, "OOK")
    b = _TimelineBuilder(1)
    for bit in as_bits(bits):
        if bit:
            b.hold((ON,), params.t_on)
        else:
            b.hold((OFF,), params.t_off)
    return b.finish()


def modulate_bfsk(bits: BitsLike, params: ModulationParams) -> LedTimeline:
    _require_single_led(params, "B-FSK")
    if params.t_on == params.t_off:
        raise IndistinguishableSymbolsError("B-FSK needs t_on != t_off")
    b = _TimelineBuilder(1)
    for bit in as_bits(bits):
        b.hold((ON,), params.t_on if bit else params.t_off)
        b.dark(params.t_d)
    return b.finish()


def modulate_manchester(bits: BitsLike, params: ModulationParams) -> LedTimeline:
    # Follows the table: 0 -> (ON, OFF), 1 -> (OFF, ON).
    _require_single_led(params, "Manchester")
    if params.t_on != params.t_off:
        raise InvalidCellError("Manchester half cells need t_on == t_off")
    b = _TimelineBuilder(1)
    for bit in as_bits(bits):
        if bit:
            b.hold((OFF,), params.t_off)
            b.hold((ON,), params.t_on)
        else:
            b.hold((ON,), params.t_on)
            b.hold((OFF,), params.t_off)
    return b.finish()


def _groups(bits: np.ndarray, n: int) -> np.ndarray:
    if bits.size % n:
        raise AlignmentError(f"{bits.size} bits do not split into groups of {n}")
    return bits.reshape(-1, n)


def modulate_ask_multi(bits: BitsLike, params: ModulationParams) -> LedTimeline:
    """Bit i of every n-bit group drives LED i for t_all; all dark for t_d between groups."""
    n = params.n_leds
    if n < 2:
        raise InvalidInputError("multi-LED ASK needs at least two LEDs")
    b = _TimelineBuilder(n)
    for group in _groups(as_bits(bits), n):
        b.hold(group, params.t_all)
        b.dark(params.t_d)
    return b.finish()


def modulate_ook_parallel(bits: BitsLike, params: ModulationParams) -> LedTimeline:
    n = params.n_leds
    b = _TimelineBuilder(n)
    for group in _groups(as_bits(bits), n):
        b.hold(group, params.t_all)
    return b.finish()


def levels_bits(n_levels: int) -> int:
    k = int(n_levels).bit_length() - 1
    if n_levels < 2 or (1 << k) != n_levels:
        raise InvalidInputError(f"n_levels must be a power of two >= 2, got {n_levels}")
    return k


def modulate_levels(levels: Iterable[int], params: ModulationParams) -> LedTimeline:
    """Hold each amplitude level for t_all by lighting LEDs 0 .. level-1."""
    n = params.n_leds
    b = _TimelineBuilder(n)
    for level in levels:
        level = int(level)
        if not 0 <= level <= n:
            raise InvalidInputError(f"level {level} needs more than {n} LEDs")
        b.hold([ON] * level + [OFF] * (n - level), params.t_all)
    return b.finish()


def bits_to_levels(bits: BitsLike, n_levels: int) -> np.ndarray:
    k = levels_bits(n_levels)
    groups = _groups(as_bits(bits), k)
    weights = 1 << np.arange(k - 1, -1, -1)
    return groups.astype(np.int64) @ weights


def levels_to_bits(levels: Sequence[int], n_levels: int) -> np.ndarray:
    k = levels_bits(n_levels)
    lv = np.asarray(levels, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((lv[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def modulate_ask_levels(bits: BitsLike, params: ModulationParams, n_levels: int = 8) -> LedTimeline:
    if n_levels - 1 > params.n_leds:
        raise InvalidInputError(f"{n_levels} levels need {n_levels - 1} LEDs, have {params.n_leds}")
    return modulate_levels(bits_to_levels(bits, n_levels), params)


def modulate(bits: BitsLike, scheme: Scheme | str, params: ModulationParams,
             n_levels: int | None = None) -> LedTimeline:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OOK:
        return modulate_ook(bits, params)
    if scheme is Scheme.BFSK:
        return modulate_bfsk(bits, params)
    if scheme is Scheme.MANCHESTER:
        return modulate_manchester(bits, params)
    if scheme is Scheme.ASK:
        return modulate_ask_multi(bits, params)
    if scheme is Scheme.OOK_PARALLEL:
        return modulate_ook_parallel(bits, params)
    return modulate_ask_levels(bits, params, n_levels or 8)


def modulate_frame(frame_bits: BitsLike, scheme: Scheme | str, params: ModulationParams,
                   n_levels: int | None = None) -> LedTimeline:
    """Modulate a framed bit-string for transmission.

    Single-LED schemes modulate the frame as is. Grouped schemes zero-pad the
    tail to a whole number of symbols. ``ask_levels`` sends the preamble as
    eight full-swing cells (top level for '1', dark for '0') so that a
    photodiode receiver can calibrate timing and both extreme levels.
    """
    scheme = Scheme.parse(scheme)
    bits = as_bits(frame_bits)
    if scheme in (Scheme.ASK, Scheme.OOK_PARALLEL):
        bits = _pad(bits, params.n_leds)
    if scheme is not Scheme.ASK_LEVELS:
        return modulate(bits, scheme, params)
    n_levels = n_levels or 8
    k = levels_bits(n_levels)
    head = bits[:PREAMBLE_BITS].astype(np.int64) * (n_levels - 1)
    body = bits_to_levels(_pad(bits[PREAMBLE_BITS:], k), n_levels)
    if n_levels - 1 > params.n_leds:
        raise InvalidInputError(f"{n_levels} levels need {n_levels - 1} LEDs, have {params.n_leds}")
    return modulate_levels(np.concatenate([head, body]), params)


def _pad(bits: np.ndarray, n: int) -> np.ndarray:
    extra = (-bits.size) % n
    if not extra:
        return bits
    return np.concatenate([bits, np.zeros(extra, dtype=np.uint8)])


def gang_leds(timeline: LedTimeline, n_leds: int) -> LedTimeline:
    """Mirror LED 0 of a single-LED timeline onto LEDs 0 .. n_leds-1."""
    if timeline.n_leds != 1:
        raise InvalidInputError("only single-LED timelines can be ganged")
    events = tuple(Event(e.time_us, led, e.state) for e in timeline.events for led in range(n_leds))
    return LedTimeline(events, timeline.total_duration, n_leds)


def concat_timelines(parts: Sequence[LedTimeline]) -> LedTimeline:
    if not parts:
        return LedTimeline((), 0.0, 1)
    n = max(p.n_leds for p in parts)
    per_led: list[list[Event]] = [[] for _ in range(n)]
    t0 = 0.0
    for part in parts:
        for e in part.events:
            edges = per_led[e.led]
            # OFF at the end of one part and ON at the start of the next cancel
            if edges and edges[-1].time_us == e.time_us + t0:
                edges.pop()
            else:
                edges.append(Event(e.time_us + t0, e.led, e.state))
        t0 += part.total_duration
    # (time, led) is unique per event, so plain tuple order is time then LED
    events = sorted(e for edges in per_led for e in edges)
    return LedTimeline(tuple(events), t0, n)


def bits_per_symbol(scheme: Scheme | str, n_leds: int = 1, n_levels: int | None = None) -> int:
    scheme = Scheme.parse(scheme)
    if scheme in (Scheme.ASK, Scheme.OOK_PARALLEL):
        return n_leds
    if scheme is Scheme.ASK_LEVELS:
        return levels_bits(n_levels or 8)
    return 1


def symbol_period(scheme: Scheme | str, params: ModulationParams) -> float:
    """Mean duration of one symbol in microseconds (equiprobable bits)."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OOK:
        return (params.t_on + params.t_off) / 2
    if scheme is Scheme.MANCHESTER:
        return params.t_on + params.t_off
    if scheme is Scheme.BFSK:
        return (params.t_on + params.t_off) / 2 + params.t_d
    if scheme is Scheme.ASK:
        return params.t_all + params.t_d
    return params.t_all


def max_bitrate(scheme: Scheme | str, params: ModulationParams, n_levels: int | None = None) -> float:
    """Raw line rate in bit/s implied by the symbol timing."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OOK:
        return 1e6 / symbol_period(scheme, params)
    if scheme is Scheme.MANCHESTER:
        if params.t_on != params.t_off:
            raise InvalidCellError("Manchester half cells need t_on == t_off")
        return 0.5 * 1e6 / params.t_on
    if scheme is Scheme.BFSK:
        if params.t_on == params.t_off:
            raise IndistinguishableSymbolsError("B-FSK needs t_on != t_off")
        return 1e6 / symbol_period(scheme, params)
    k = bits_per_symbol(scheme, params.n_leds, n_levels)
    return k * 1e6 / symbol_period(scheme, params)


def params_for_rate(scheme: Scheme | str, rate_bps: float, n_leds: int = 1,
                    n_levels: int | None = None) -> ModulationParams:
    """Symbol timing that yields ``rate_bps`` under the package's conventions.

    B-FSK uses the 2:1 pulse ratio with a half-base gap; multi-LED ASK uses
    t_d = t_all.
    """
    scheme = Scheme.parse(scheme)
    if not rate_bps > 0:
        raise InvalidInputError(f"bit rate must be positive, got {rate_bps!r}")
    if scheme is Scheme.OOK:
        cell = 1e6 / rate_bps
        return ModulationParams(t_on=cell, t_off=cell, t_d=cell, t_all=cell, n_leds=1)
    if scheme is Scheme.MANCHESTER:
        half = 0.5e6 / rate_bps
        return ModulationParams(t_on=half, t_off=half, t_d=half, t_all=half, n_leds=1)
    if scheme is Scheme.BFSK:
        return ModulationParams.bfsk_default(0.5e6 / rate_bps)
    k = bits_per_symbol(scheme, n_leds, n_levels)
    if scheme is Scheme.ASK:
        hold = 0.5 * k * 1e6 / rate_bps
    else:
        hold = k * 1e6 / rate_bps
    return ModulationParams(t_on=hold, t_off=hold, t_d=hold, t_all=hold, n_leds=n_leds)


def scale_params(params: ModulationParams, factor: float) -> ModulationParams:
    return replace(params, t_on=params.t_on * factor, t_off=params.t_off * factor,
                   t_d=params.t_d * factor, t_all=params.t_all * factor)


# -- CSV trace -------------------------------------------------------------

TIMELINE_HEADER = ("timestamp_us", "led", "state")


def _fmt_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def timeline_to_csv(timeline: LedTimeline) -> str:
    buf = io.StringIO()
    buf.write(f"# total_duration_us={_fmt_time(timeline.total_duration)},n_leds={timeline.n_leds}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIMELINE_HEADER)
    for e in timeline.events:
        writer.writerow((_fmt_time(e.time_us), e.led, e.state))
    return buf.getvalue()


def _parse_meta(lines: list[str]) -> dict[str, str]:
    meta = {}
    for line in lines:
        for item in line.lstrip("#").strip().split(","):
            if "=" in item:
                key, value = item.split("=", 1)
                meta[key.strip()] = value.strip()
    return meta


def timeline_from_csv(text: str) -> LedTimeline:
    lines = text.splitlines()
    meta = _parse_meta([ln for ln in lines if ln.startswith("#")])
    rows = list(csv.reader(ln for ln in lines if ln.strip() and not ln.startswith("#")))
    if not rows or tuple(rows[0]) != TIMELINE_HEADER:
        raise InvalidInputError(f"timeline CSV must start with header {','.join(TIMELINE_HEADER)}")
    events = []
    for row in rows[1:]:
        t = float(row[0])
        events.append(Event(int(t) if t.is_integer() else t, int(row[1]), int(row[2])))
    n_leds = int(meta.get("n_leds", max((e.led for e in events), default=0) + 1))
    duration = float(meta.get("total_duration_us", events[-1].time_us if events else 0.0))
    if duration.is_integer():
        duration = int(duration)
    return LedTimeline(tuple(events), duration, n_leds)


def write_timeline(path: str | Path, timeline: LedTimeline) -> None:
    Path(path).write_text(timeline_to_csv(timeline))


def read_timeline(path: str | Path) -> LedTimeline:
    return timeline_from_csv(Path(path).read_text())
