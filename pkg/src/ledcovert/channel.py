"""What a photodiode or a camera sees when a timeline plays out."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError, UndersamplingError
from .modulation import Event, LedTimeline
from .transmitter import RouterProfile

ADC_FULL_SCALE_MV = 100.0
MIN_SAMPLES_PER_ON = 4


@dataclass(frozen=True)
class ChannelConfig:
    sample_rate: float = 500_000.0
    noise_sigma_mv: float = 1.0
    flicker_freq_hz: float = 500.0
    flicker_amp_mv: float = 0.0
    # None -> min_on_us / 5 of the profile; 0 disables the low-pass
    rise_tau_us: float | None = None
    adc_bits: int = 16
    rng_seed: int = 0
    jitter_us: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InvalidInputError("sample_rate must be positive")
        if self.noise_sigma_mv < 0 or self.flicker_amp_mv < 0 or self.jitter_us < 0:
            raise InvalidInputError("noise, flicker and jitter must be non-negative")
        if not 8 <= self.adc_bits <= 24:
            raise InvalidInputError("adc_bits must be within [8, 24]")
        if self.rise_tau_us is not None and self.rise_tau_us < 0:
            raise InvalidInputError("rise_tau_us must be non-negative")

    def tau_for(self, profile: RouterProfile) -> float:
        return profile.min_on_us / 5 if self.rise_tau_us is None else self.rise_tau_us

    @property
    def lsb_mv(self) -> float:
        return ADC_FULL_SCALE_MV / 2 ** self.adc_bits

    def noiseless(self) -> "ChannelConfig":
        return replace(self, noise_sigma_mv=0.0, flicker_amp_mv=0.0, jitter_us=0.0)


@dataclass(frozen=True, eq=False)
class Waveform:
    sample_rate: float
    samples: np.ndarray
    start_time_us: float = 0.0

    def __len__(self):
        return self.samples.size

    @property
    def dt_us(self) -> float:
        return 1e6 / self.sample_rate

    @property
    def duration_us(self) -> float:
        return self.samples.size * self.dt_us

    def times_us(self) -> np.ndarray:
        return self.start_time_us + np.arange(self.samples.size) * self.dt_us

    def index_at(self, t_us: float) -> float:
        return (t_us - self.start_time_us) / self.dt_us

    def window(self, t0_us: float | None = None, t1_us: float | None = None) -> "Waveform":
        """Samples falling in [t0_us, t1_us), sharing memory with this waveform."""
        i0 = 0 if t0_us is None else min(len(self), max(0, int(math.floor(self.index_at(t0_us)))))
        i1 = len(self) if t1_us is None else min(len(self), max(i0, int(math.ceil(self.index_at(t1_us)))))
        return Waveform(self.sample_rate, self.samples[i0:i1], self.start_time_us + i0 * self.dt_us)

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (self.sample_rate == other.sample_rate and self.start_time_us == other.start_time_us
                and np.array_equal(self.samples, other.samples))


def lit_count(timeline: LedTimeline, times_us: np.ndarray) -> np.ndarray:
    """Number of LEDs lit at each time; an event applies from its own timestamp."""
    ev_t, counts = timeline.lit_count_steps()
    if ev_t.size == 0:
        return np.zeros(np.shape(times_us), dtype=np.int64)
    idx = np.searchsorted(ev_t, times_us, side="right")
    return np.concatenate([[0], counts])[idx]


def _jittered(timeline: LedTimeline, sigma_us: float, rng: np.random.Generator) -> LedTimeline:
    if sigma_us == 0 or not timeline.events:
        return timeline
    out = []
    for led in range(timeline.n_leds):
        edges = np.asarray(timeline.edges(led), dtype=float)
        if not edges.size:
            continue
        moved = np.clip(edges + rng.normal(0.0, sigma_us, edges.size), 0, timeline.total_duration)
        moved = np.maximum.accumulate(moved)
        states = [e.state for e in timeline.events if e.led == led]
        out += [Event(float(t), led, s) for t, s in zip(moved, states)]
    out.sort(key=lambda e: (e.time_us, e.led))
    # jitter may pile up equal timestamps; keep them in per-LED order
    per_led_ok = []
    state = [0] * timeline.n_leds
    for e in out:
        if e.state != state[e.led]:
            per_led_ok.append(e)
            state[e.led] = e.state
    return LedTimeline(tuple(per_led_ok), timeline.total_duration, timeline.n_leds)


def render_waveform(timeline: LedTimeline, profile: RouterProfile,
                    config: ChannelConfig = ChannelConfig()) -> Waveform:
    """Sample the light level a photodiode would report.

    ideal level -> first-order low-pass -> flicker -> Gaussian noise -> ADC.
    """
    fs = config.sample_rate
    if fs * profile.min_on_us * 1e-6 < MIN_SAMPLES_PER_ON:
        raise UndersamplingError(
            f"{fs:g} S/s gives {fs * profile.min_on_us * 1e-6:.2f} samples per {profile.min_on_us:g} us "
            f"ON interval; need at least {MIN_SAMPLES_PER_ON}")
    if timeline.n_leds > profile.n_leds:
        raise InvalidInputError(f"timeline uses {timeline.n_leds} LEDs, {profile.name} has {profile.n_leds}")
    seeds = np.random.SeedSequence(config.rng_seed).spawn(2)
    noise_rng = np.random.default_rng(seeds[0])
    timeline = _jittered(timeline, config.jitter_us, np.random.default_rng(seeds[1]))

    n = math.ceil(round(timeline.total_duration * fs * 1e-6, 9))
    t_us = np.arange(n) * (1e6 / fs)
    level = profile.ambient_mv + lit_count(timeline, t_us) * profile.per_led_step_mv

    tau = config.tau_for(profile)
    if tau > 0 and n:
        alpha = 1.0 - math.exp(-(1e6 / fs) / tau)
        level = lfilter([alpha], [1.0, alpha - 1.0], level,
                        zi=[(1.0 - alpha) * profile.ambient_mv])[0]
    else:
        level = level.astype(float)
    if config.flicker_amp_mv:
        level = level + config.flicker_amp_mv * np.sin(2 * np.pi * config.flicker_freq_hz * t_us * 1e-6)
    if config.noise_sigma_mv:
        level = level + noise_rng.normal(0.0, config.noise_sigma_mv, n)
    lsb = config.lsb_mv
    codes = np.clip(np.round(level / lsb), 0, 2 ** config.adc_bits - 1)
    return Waveform(fs, codes * lsb)


# -- camera ----------------------------------------------------------------

@dataclass(frozen=True)
class CameraConfig:
    fps: float = 30.0
    shutter_fraction: float = 0.5
    rng_seed: int = 0
    # start of the first exposure within the first frame period, us;
    # None draws it uniformly from rng_seed
    phase_us: float | None = 0.0

    def __post_init__(self):
        if not self.fps > 0:
            raise InvalidInputError("fps must be positive")
        if not 0 < self.shutter_fraction <= 1:
            raise InvalidInputError("shutter_fraction must be in (0, 1]")

    @property
    def frame_period_us(self) -> float:
        return 1e6 / self.fps


@dataclass(frozen=True, eq=False)
class FrameSeries:
    fps: float
    states: np.ndarray  # (n_frames, n_leds) uint8

    def __post_init__(self):
        if self.states.ndim != 2:
            raise InvalidInputError("frame states must be a (frames, leds) array")

    @property
    def n_frames(self) -> int:
        return self.states.shape[0]

    @property
    def n_leds(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.n_frames

    def __eq__(self, other):
        if not isinstance(other, FrameSeries):
            return NotImplemented
        return self.fps == other.fps and np.array_equal(self.states, other.states)


def _on_time_until(timeline: LedTimeline, led: int, t: np.ndarray) -> np.ndarray:
    """Cumulative ON time of ``led`` from 0 to each ``t``."""
    knots = [0.0]
    acc = [0.0]
    for a, b in timeline.on_intervals(led):
        knots += [a, b]
        acc += [acc[-1], acc[-1] + (b - a)]
    return np.interp(t, knots, acc, right=acc[-1])


def capture_camera(timeline: LedTimeline, profile: RouterProfile,
                   camera: CameraConfig = CameraConfig()) -> FrameSeries:
    if timeline.n_leds > profile.n_leds:
        raise InvalidInputError(f"timeline uses {timeline.n_leds} LEDs, {profile.name} has {profile.n_leds}")
    period = camera.frame_period_us
    phase = camera.phase_us
    if phase is None:
        phase = float(np.random.default_rng(camera.rng_seed).uniform(0.0, period))
    n_frames = math.ceil(round(timeline.total_duration / period, 9))
    start = np.arange(n_frames) * period + phase
    width = camera.shutter_fraction * period
    states = np.zeros((n_frames, timeline.n_leds), dtype=np.uint8)
    for led in range(timeline.n_leds):
        on = _on_time_until(timeline, led, start + width) - _on_time_until(timeline, led, start)
        states[:, led] = on > width / 2
    return FrameSeries(camera.fps, states)


# -- files -----------------------------------------------------------------

def write_waveform(path: str | Path, wf: Waveform) -> None:
    body = "\n".join(repr(float(x)) for x in wf.samples)
    Path(path).write_text(f"sample_rate_hz={int(round(wf.sample_rate))}\n" + body + ("\n" if body else ""))


def read_waveform(path: str | Path) -> Waveform:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("sample_rate_hz="):
        raise InvalidInputError("waveform file must start with sample_rate_hz=<int>")
    rate = int(lines[0].split("=", 1)[1])
    samples = np.array([float(x) for x in lines[1:] if x.strip()], dtype=float)
    return Waveform(float(rate), samples)


def write_waveform_binary(path: str | Path, wf: Waveform) -> None:
    Path(path).write_bytes(wf.samples.astype("<f4").tobytes())


def read_waveform_binary(path: str | Path, sample_rate: float) -> Waveform:
    samples = np.frombuffer(Path(path).read_bytes(), dtype="<f4").astype(float)
    return Waveform(float(sample_rate), samples)


def read_waveform_any(path: str | Path, sample_rate: float | None = None) -> Waveform:
    """Text files carry their rate; anything else is read as packed float32."""
    raw = Path(path).read_bytes()
    if raw.startswith(b"sample_rate_hz="):
        return read_waveform(path)
    if sample_rate is None:
        raise InvalidInputError("binary waveform needs an explicit sample rate")
    return read_waveform_binary(path, sample_rate)


FRAMES_HEADER = ("frame_index", "led", "state")


def frames_to_csv(fs: FrameSeries) -> str:
    buf = io.StringIO()
    buf.write(f"# fps={fs.fps!r},n_leds={fs.n_leds}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FRAMES_HEADER)
    for k in range(fs.n_frames):
        for led in range(fs.n_leds):
            writer.writerow((k, led, int(fs.states[k, led])))
    return buf.getvalue()


def frames_from_csv(text: str) -> FrameSeries:
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
    if not rows or tuple(rows[0]) != FRAMES_HEADER:
        raise InvalidInputError(f"frame CSV must start with header {','.join(FRAMES_HEADER)}")
    if "fps" not in meta:
        raise InvalidInputError("frame CSV needs a '# fps=' line")
    data = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, 3)
    n_frames = int(data[:, 0].max()) + 1 if data.size else 0
    n_leds = int(meta.get("n_leds", int(data[:, 1].max()) + 1 if data.size else 0))
    states = np.zeros((n_frames, n_leds), dtype=np.uint8)
    states[data[:, 0], data[:, 1]] = data[:, 2]
    return FrameSeries(float(meta["fps"]), states)


def write_frames(path: str | Path, fs: FrameSeries) -> None:
    Path(path).write_text(frames_to_csv(fs))


def read_frames(path: str | Path) -> FrameSeries:
    return frames_from_csv(Path(path).read_text())
