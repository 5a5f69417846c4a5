"""Router LED profiles, hardware-limit checks and sysfs-style write traces."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .bits import BitsLike, as_bits
from .errors import CapacityError, HardwareLimitError, InvalidInputError
from .modulation import (
    OFF,
    ON,
    Event,
    LedTimeline,
    ModulationParams,
    Scheme,
    gang_leds,
    levels_bits,
    modulate_frame,
    params_for_rate,
)

# Relative slack for float round-off when comparing against a limit.
_EPS = 1e-9


@dataclass(frozen=True)
class RouterProfile:
    name: str
    n_leds: int
    min_on_us: float
    min_cycle_us: float
    on_level_mv: float
    ambient_mv: float
    per_led_step_mv: float | None = None
    led_name_pattern: str = "led{i}"
    inverted: tuple[bool, ...] = ()
    # single-LED schemes are mirrored onto every LED
    ganged: bool = False

    def __post_init__(self):
        if not (self.min_cycle_us >= self.min_on_us > 0):
            raise InvalidInputError("profile needs min_cycle_us >= min_on_us > 0")
        if not (self.on_level_mv > self.ambient_mv >= 0):
            raise InvalidInputError("profile needs on_level_mv > ambient_mv >= 0")
        if self.n_leds < 1:
            raise InvalidInputError("profile needs at least one LED")
        if self.per_led_step_mv is None:
            object.__setattr__(self, "per_led_step_mv", self.on_level_mv - self.ambient_mv)
        if len(self.inverted) not in (0, self.n_leds):
            raise InvalidInputError("inverted flags must cover every LED")

    def led_path(self, led: int) -> str:
        return f"/sys/class/leds/{self.led_name_pattern.format(i=led)}/brightness"

    def is_inverted(self, led: int) -> bool:
        return bool(self.inverted[led]) if self.inverted else False

    def brightness(self, led: int, state: int) -> str:
        lit = bool(state) != self.is_inverted(led)
        return "255" if lit else "0"

    def level_mv(self, lit: int) -> float:
        return self.ambient_mv + lit * self.per_led_step_mv

    @property
    def max_levels(self) -> int:
        """Largest power-of-two level count whose top level fits the LEDs and
        stays under the photodiode's 100 mV full scale."""
        best = 0
        levels = 2
        while levels - 1 <= self.n_leds and self.level_mv(levels - 1) < 100.0:
            best = levels
            levels *= 2
        return best


R1 = RouterProfile("R1", n_leds=7, min_on_us=120, min_cycle_us=700, on_level_mv=14, ambient_mv=4)
R2 = RouterProfile("R2", n_leds=8, min_on_us=190, min_cycle_us=290, on_level_mv=30, ambient_mv=6,
                   led_name_pattern="generic_led{i}")
R1_MULTI = RouterProfile("R1_MULTI", n_leds=7, min_on_us=120, min_cycle_us=240, on_level_mv=14,
                         ambient_mv=4, ganged=True)

PROFILES = {p.name: p for p in (R1, R2, R1_MULTI)}


def get_profile(name: str | RouterProfile) -> RouterProfile:
    if isinstance(name, RouterProfile):
        return name
    try:
        return PROFILES[name.upper()]
    except KeyError:
        raise InvalidInputError(f"unknown profile {name!r} (expected one of {', '.join(PROFILES)})") from None


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    rule: str
    led: int
    time_us: float
    measured_us: float
    limit_us: float

    def __str__(self):
        return (f"LED {self.led} at {self.time_us:g} us: {self.rule} {self.measured_us:g} us "
                f"< {self.limit_us:g} us")


@dataclass(frozen=True)
class ValidationReport:
    profile: str
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.rule] = out.get(v.rule, 0) + 1
        return out

    def summary(self, limit: int = 5) -> str:
        if self.ok:
            return f"timeline fits {self.profile}"
        lines = [f"{len(self.violations)} violation(s) on {self.profile}: {self.counts()}"]
        lines += [f"  {v}" for v in self.violations[:limit]]
        if len(self.violations) > limit:
            lines.append(f"  ... {len(self.violations) - limit} more")
        return "\n".join(lines)


def _short(measured: float, limit: float) -> bool:
    return measured < limit * (1 - _EPS)


def validate_timeline(timeline: LedTimeline, profile: RouterProfile) -> ValidationReport:
    """Check every LED's switching against the profile's limits.

    Rules:
      min_on     an ON interval shorter than min_on_us
      min_cycle  consecutive rising edges closer than min_cycle_us
      min_slot   consecutive writes closer than min_cycle_us; the measured
                 cycle is the fastest the LED can be driven with any state
                 held for a full slot
    """
    if timeline.n_leds > profile.n_leds:
        raise CapacityError(f"timeline uses {timeline.n_leds} LEDs, {profile.name} has {profile.n_leds}")
    found: list[Violation] = []
    for led in range(timeline.n_leds):
        edges = timeline.edges(led)
        for a, b in zip(edges[:-1], edges[1:]):
            if _short(b - a, profile.min_cycle_us):
                found.append(Violation("min_slot", led, a, b - a, profile.min_cycle_us))
        rising = edges[0::2]
        for a, b in zip(rising[:-1], rising[1:]):
            if _short(b - a, profile.min_cycle_us):
                found.append(Violation("min_cycle", led, a, b - a, profile.min_cycle_us))
        for a, b in timeline.on_intervals(led):
            if _short(b - a, profile.min_on_us):
                found.append(Violation("min_on", led, a, b - a, profile.min_on_us))
    found.sort(key=lambda v: (v.time_us, v.led, v.rule))
    return ValidationReport(profile.name, tuple(found))


def require_valid(timeline: LedTimeline, profile: RouterProfile) -> None:
    report = validate_timeline(timeline, profile)
    if not report.ok:
        raise HardwareLimitError(report.summary(), violations=report.violations)


# -- rates -----------------------------------------------------------------

def scheme_leds(scheme: Scheme | str, profile: RouterProfile, n_levels: int | None = None) -> int:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ASK_LEVELS:
        return (n_levels or default_levels(profile)) - 1
    if scheme.single_led:
        return 1
    return profile.n_leds


def default_levels(profile: RouterProfile) -> int:
    levels = profile.max_levels
    if levels < 2:
        raise CapacityError(f"{profile.name} cannot show two amplitude levels")
    return levels


def max_feasible_rate(scheme: Scheme | str, profile: RouterProfile, n_levels: int | None = None) -> float:
    """Fastest bit rate whose timeline passes :func:`validate_timeline`."""
    scheme = Scheme.parse(scheme)
    c = profile.min_cycle_us
    if scheme is Scheme.OOK:
        return 1e6 / c
    if scheme is Scheme.MANCHESTER:
        return 1e6 / (2 * c)
    if scheme is Scheme.BFSK:
        # the half-base gap must last a full slot, so the base is 2c
        return 1e6 / (4 * c)
    if scheme is Scheme.ASK:
        return profile.n_leds * 1e6 / (2 * c)
    if scheme is Scheme.ASK_LEVELS:
        return levels_bits(n_levels or default_levels(profile)) * 1e6 / c
    return profile.n_leds * 1e6 / c


def profile_params(scheme: Scheme | str, profile: RouterProfile, rate_bps: float | None = None,
                   n_levels: int | None = None) -> ModulationParams:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ASK_LEVELS:
        n_levels = n_levels or default_levels(profile)
    if rate_bps is None:
        rate_bps = max_feasible_rate(scheme, profile, n_levels)
    n = scheme_leds(scheme, profile, n_levels)
    if n > profile.n_leds:
        raise CapacityError(f"{scheme.value} needs {n} LEDs, {profile.name} has {profile.n_leds}")
    return params_for_rate(scheme, rate_bps, n_leds=n, n_levels=n_levels)


def frame_timeline(frame_bits: BitsLike, scheme: Scheme | str, profile: RouterProfile,
                   rate_bps: float | None = None, n_levels: int | None = None,
                   params: ModulationParams | None = None, enforce_limits: bool = True) -> LedTimeline:
    """Modulate framed bits for ``profile``; ganged profiles mirror single-LED schemes."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ASK_LEVELS:
        n_levels = n_levels or default_levels(profile)
    if params is None:
        params = profile_params(scheme, profile, rate_bps, n_levels)
    timeline = modulate_frame(as_bits(frame_bits), scheme, params, n_levels)
    if profile.ganged and scheme.single_led:
        timeline = gang_leds(timeline, profile.n_leds)
    if enforce_limits:
        require_valid(timeline, profile)
    return timeline


# -- Algorithm 1 -----------------------------------------------------------

class _LedHandle:
    """Stand-in for an open brightness file: remembers the last value written."""

    def __init__(self, led: int):
        self.led = led
        self.state = OFF
        self.events: list[Event] = []

    def write(self, now: float, state: int) -> None:
        if state != self.state:
            self.events.append(Event(now, self.led, state))
            self.state = state

    def close(self, now: float) -> None:
        self.write(now, OFF)


def algorithm1_ook(led_index: int, bits: BitsLike, T: float) -> LedTimeline:
    if not T > 0:
        raise InvalidInputError("T must be positive")
    led = _LedHandle(led_index)
    now = 0.0
    for bit in as_bits(bits):
        if bit == 0:
            led.write(now, OFF)
        else:
            led.write(now, ON)
        now += T
    led.close(now)
    return LedTimeline(tuple(led.events), now, led_index + 1)


# -- quantization and traces -----------------------------------------------

def quantize_timeline(timeline: LedTimeline, resolution_us: float = 1.0) -> LedTimeline:
    """Round event times to the timer resolution; pulses that collapse vanish."""
    per_led: list[list[Event]] = [[] for _ in range(timeline.n_leds)]
    for e in timeline.events:
        t = round(e.time_us / resolution_us) * resolution_us
        t = int(t) if float(t).is_integer() else t
        edges = per_led[e.led]
        if edges and edges[-1].time_us == t:
            edges.pop()
        else:
            edges.append(Event(t, e.led, e.state))
    end = round(timeline.total_duration / resolution_us) * resolution_us
    end = int(end) if float(end).is_integer() else end
    events = sorted((e for edges in per_led for e in edges), key=lambda e: (e.time_us, e.led))
    return LedTimeline(tuple(events), end, timeline.n_leds)


@dataclass(frozen=True)
class TraceWrite:
    timestamp_us: int
    path: str
    value: str


@dataclass(frozen=True)
class SysfsTrace:
    writes: tuple[TraceWrite, ...]
    total_duration_us: int = 0
    n_leds: int = 1
    profile: str = ""

    def __post_init__(self):
        times = [w.timestamp_us for w in self.writes]
        if any(b < a for a, b in zip(times[:-1], times[1:])):
            raise InvalidInputError("trace timestamps must be non-decreasing")
        for w in self.writes:
            if not (w.path.startswith("/sys/class/leds/") and w.path.endswith("/brightness")):
                raise InvalidInputError(f"not a sysfs LED path: {w.path}")

    def __len__(self):
        return len(self.writes)


def emit_trace(timeline: LedTimeline, profile: RouterProfile, check: bool = True) -> SysfsTrace:
    """One brightness write per event, times rounded to 1 us.

    Raises :class:`HardwareLimitError` if the timeline breaks the profile's
    limits, unless ``check`` is false.
    """
    if timeline.n_leds > profile.n_leds:
        raise CapacityError(f"timeline uses {timeline.n_leds} LEDs, {profile.name} has {profile.n_leds}")
    if check:
        require_valid(timeline, profile)
    q = quantize_timeline(timeline)
    writes = tuple(TraceWrite(int(e.time_us), profile.led_path(e.led), profile.brightness(e.led, e.state))
                   for e in q.events)
    return SysfsTrace(writes, int(q.total_duration), timeline.n_leds, profile.name)


def replay_trace(trace: SysfsTrace, profile: RouterProfile) -> LedTimeline:
    index = {profile.led_path(i): i for i in range(profile.n_leds)}
    events = []
    for w in trace.writes:
        if w.path not in index:
            raise InvalidInputError(f"{w.path} is not an LED of {profile.name}")
        led = index[w.path]
        lit = (w.value != "0") != profile.is_inverted(led)
        events.append(Event(w.timestamp_us, led, ON if lit else OFF))
    return LedTimeline(tuple(events), trace.total_duration_us, trace.n_leds)


TRACE_HEADER = ("timestamp_us", "path", "value")


def trace_to_csv(trace: SysfsTrace) -> str:
    buf = io.StringIO()
    buf.write(f"# total_duration_us={trace.total_duration_us},n_leds={trace.n_leds},profile={trace.profile}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for w in trace.writes:
        writer.writerow((w.timestamp_us, w.path, w.value))
    return buf.getvalue()


def trace_from_csv(text: str) -> SysfsTrace:
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            for item in line[1:].split(","):
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise InvalidInputError(f"trace CSV must start with header {','.join(TRACE_HEADER)}")
    writes = tuple(TraceWrite(int(r[0]), r[1], r[2]) for r in rows[1:])
    duration = int(meta.get("total_duration_us", writes[-1].timestamp_us if writes else 0))
    n_leds = int(meta.get("n_leds", 1))
    return SysfsTrace(writes, duration, n_leds, meta.get("profile", ""))


def write_trace(path: str | Path, trace: SysfsTrace) -> None:
    Path(path).write_text(trace_to_csv(trace))


def read_trace(path: str | Path) -> SysfsTrace:
    return trace_from_csv(Path(path).read_text())
