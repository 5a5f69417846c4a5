"""Recover bits from photodiode waveforms and camera frame series.

Sensor path::

    Waveform -> calibrate_preamble -> demod_sensor -> decode_stream

Calibration finds the ``10101010`` preamble in a lightly smoothed copy of
the waveform, measures the symbol period from its edges and reads the OFF
and ON levels. Demodulation refines the clock against every edge of the
frame, then decides each symbol from the median of the central half of its
cell in a Savitzky-Golay smoothed copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bits import BitsLike, as_bits, bits_to_text
from .channel import FrameSeries, Waveform
from .errors import (
    IntegrityError,
    InvalidInputError,
    SubNyquistError,
    SyncNotFoundError,
    TruncationError,
)
from .framing import FRAME_BITS, PREAMBLE, PREAMBLE_BITS, Frame, parse_frame
from .modulation import Scheme, levels_bits, levels_to_bits

# -- Savitzky-Golay --------------------------------------------------------


@lru_cache(maxsize=512)
def savgol_coeffs(window: int, order: int) -> np.ndarray:
    """Weights giving the fitted value at the centre of a ``window``-point fit."""
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(offsets, order + 1, increasing=True)
    coeffs = np.linalg.pinv(vander)[0]
    coeffs.setflags(write=False)
    return coeffs


def default_window(samples_per_bit: float) -> int:
    """Nearest odd integer to a quarter bit, clamped to [5, 101]."""
    target = samples_per_bit / 4
    odd = 2 * int(math.floor((target - 1) / 2 + 0.5)) + 1
    return int(min(101, max(5, odd)))


def savgol_array(x: np.ndarray, window: int, order: int = 3) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size
    if window % 2 == 0 or window < 1:
        raise InvalidInputError(f"window must be a positive odd integer, got {window}")
    if order < 1 or window <= order:
        raise InvalidInputError(f"need window > order >= 1, got window={window}, order={order}")
    if window > n:
        raise InvalidInputError(f"window {window} longer than the {n}-sample input")
    half = window // 2
    out = np.empty(n)
    coeffs = savgol_coeffs(window, order)
    out[half:n - half] = np.convolve(x, coeffs[::-1], mode="valid")
    # edges: the widest symmetric window that fits, degree capped so the fit stays determined
    for i in range(min(half, n)):
        for j in {i, n - 1 - i}:
            h = min(j, n - 1 - j)
            out[j] = savgol_coeffs(2 * h + 1, min(order, 2 * h)) @ x[j - h:j + h + 1]
    return out


def savgol_smooth(w: Waveform, window: int | None = None, order: int = 3,
                  samples_per_bit: float | None = None) -> Waveform:
    if window is None:
        if samples_per_bit is None:
            raise InvalidInputError("give either a window or samples_per_bit")
        window = default_window(samples_per_bit)
        window = min(window, len(w) if len(w) % 2 else len(w) - 1)
    return Waveform(w.sample_rate, savgol_array(w.samples, window, order), w.start_time_us)


def noise_gain(window: int, order: int = 3) -> float:
    """Factor by which smoothing scales white-noise standard deviation."""
    return float(np.sqrt(np.sum(savgol_coeffs(window, order) ** 2)))


def estimate_noise(samples: np.ndarray) -> float:
    """White-noise sigma from the MAD of first differences; edges barely move it."""
    d = np.diff(np.asarray(samples, dtype=float))
    if d.size == 0:
        return 0.0
    mad = np.median(np.abs(d - np.median(d)))
    return float(mad / 0.6744897501960817 / math.sqrt(2))


# -- calibration -----------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    bit_period_us: float
    level_off_mv: float
    level_on_mv: float
    start_offset_us: float
    frame_start_us: float = 0.0
    noise_mv: float = 0.0
    # B-FSK pulse and gap durations; zero for other schemes
    t_on_us: float = 0.0
    t_off_us: float = 0.0
    t_d_us: float = 0.0

    def __post_init__(self):
        if not self.bit_period_us > 0:
            raise InvalidInputError("bit_period_us must be positive")
        if not self.level_on_mv > self.level_off_mv:
            raise InvalidInputError("level_on_mv must exceed level_off_mv")

    @property
    def midpoint_mv(self) -> float:
        return (self.level_on_mv + self.level_off_mv) / 2


@dataclass
class _Edges:
    times: np.ndarray   # us, sub-sample interpolated mid-level crossings
    rising: np.ndarray  # bool per edge
    first_state: int    # state before the first edge
    end_us: float

    def runs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(state, start, length) of every run bounded by two edges."""
        t = self.times
        states = self.rising[:-1].astype(np.int8)
        return states, t[:-1], np.diff(t)


def _find_edges(w: Waveform, smooth: np.ndarray, mid: float, hyst: float) -> _Edges:
    s = smooth
    mark = np.full(s.size, -1, dtype=np.int8)
    mark[s > mid + hyst] = 1
    mark[s < mid - hyst] = 0
    decided = np.where(mark >= 0, np.arange(s.size), 0)
    np.maximum.accumulate(decided, out=decided)
    state = mark[decided]
    state[state < 0] = 0
    change = np.flatnonzero(np.diff(state)) + 1
    above = s > mid
    up = np.flatnonzero(~above[:-1] & above[1:]) + 1
    down = np.flatnonzero(above[:-1] & ~above[1:]) + 1
    rising = state[change] == 1
    j = np.empty(change.size, dtype=np.int64)
    if change.size:
        ju = up[np.maximum(np.searchsorted(up, change[rising], side="right") - 1, 0)] if up.size else change[rising]
        jd = down[np.maximum(np.searchsorted(down, change[~rising], side="right") - 1, 0)] if down.size else change[~rising]
        j[rising] = ju
        j[~rising] = jd
    j = np.clip(j, 1, s.size - 1)
    a, b = s[j - 1], s[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(b != a, (mid - a) / (b - a), 0.0)
    idx = (j - 1) + np.clip(frac, 0.0, 1.0)
    times = w.start_time_us + idx * w.dt_us
    return _Edges(times, rising, int(state[0]) if s.size else 0, w.start_time_us + w.duration_us)


CAL_SMOOTH_US = 40.0
RUN_TOLERANCE = 0.25
MIN_RUN_SAMPLES = 4
MIN_SEPARATION_SIGMAS = 5.0


def _cal_window(w: Waveform) -> int:
    win = int(round(CAL_SMOOTH_US * w.sample_rate * 1e-6))
    win = win if win % 2 else win + 1
    win = max(5, min(101, win))
    return min(win, len(w) if len(w) % 2 else len(w) - 1)


def _consistent(values: np.ndarray) -> bool:
    med = np.median(values)
    return med > 0 and bool(np.all(np.abs(values - med) <= RUN_TOLERANCE * med))


def calibrate_preamble(w: Waveform, scheme: Scheme | str = Scheme.OOK, from_us: float | None = None
                       ) -> Calibration:
    """Locate the first preamble at or after ``from_us`` and measure the channel.

    Raises :class:`SyncNotFoundError` when no alternating pattern with enough
    contrast is present.
    """
    scheme = Scheme.parse(scheme)
    if scheme in (Scheme.ASK, Scheme.OOK_PARALLEL):
        raise InvalidInputError(f"{scheme.value} needs per-LED observations; use a camera receiver")
    win = _cal_window(w)
    if from_us is not None:
        # smoothing is local: a one-window margin keeps the searched region exact
        w = w.window(from_us - win * w.dt_us)
    if len(w) < 5:
        raise SyncNotFoundError("waveform too short to hold a preamble")
    win = _cal_window(w)
    smooth = savgol_array(w.samples, win, 3 if win > 3 else 1)
    first = 0 if from_us is None else max(0, int(math.floor(w.index_at(from_us))))
    region = smooth[first:]
    if region.size < 5:
        raise SyncNotFoundError("no samples left to search")
    lo, hi = np.percentile(region, [5, 99])
    sigma = estimate_noise(w.samples[first:])
    sigma_s = sigma * noise_gain(win, 3 if win > 3 else 1)
    if hi - lo <= max(MIN_SEPARATION_SIGMAS * sigma_s, 1e-9):
        raise SyncNotFoundError("no contrast: waveform looks like ambient light only")
    mid = (lo + hi) / 2
    edges = _find_edges(w, smooth, mid, 0.15 * (hi - lo))
    if from_us is not None:
        keep = edges.times >= from_us
        edges = _Edges(edges.times[keep], edges.rising[keep], 0, edges.end_us)
    min_run = MIN_RUN_SAMPLES * w.dt_us
    if scheme is Scheme.BFSK:
        cal = _match_bfsk(w, smooth, edges, min_run)
    else:
        cal = _match_alternating(w, smooth, edges, min_run, half_cell_lead=scheme is Scheme.MANCHESTER)
    if cal is None:
        raise SyncNotFoundError("no preamble pattern found")
    if cal.level_on_mv - cal.level_off_mv < MIN_SEPARATION_SIGMAS * sigma_s:
        raise SyncNotFoundError("preamble contrast too low for the noise level")
    return replace(cal, noise_mv=sigma)


def _levels_between(w: Waveform, smooth: np.ndarray, t0: float, t1: float) -> tuple[float, float]:
    i0 = max(0, int(math.ceil(w.index_at(t0))))
    i1 = min(len(w), int(math.floor(w.index_at(t1))) + 1)
    seg = smooth[i0:i1]
    lo, hi = np.percentile(seg, [10, 90])
    return float(lo), float(hi)


def _match_alternating(w, smooth, edges: _Edges, min_run: float, half_cell_lead: bool) -> Calibration | None:
    t = edges.times
    if t.size < 8:
        return None
    for i in np.flatnonzero(edges.rising[: t.size - 7]):
        seg = t[i:i + 8]
        # the eight edges must alternate rising/falling starting with a rise
        if not np.array_equal(edges.rising[i:i + 8], [True, False] * 4):
            continue
        lengths = np.diff(seg)
        if np.any(lengths < min_run) or not _consistent(lengths):
            continue
        unit = float(np.median(lengths))
        before = seg[0] - t[i - 1] if i > 0 else math.inf
        after = (t[i + 8] if i + 8 < t.size else edges.end_us) - seg[-1]
        if before < 0.4 * unit or after < 0.4 * unit:
            continue
        k = np.arange(8)
        slope, icpt = np.polyfit(k, seg, 1)
        period = float(slope)
        first_edge = float(icpt)
        start = first_edge - period / 2 if half_cell_lead else first_edge
        off, on = _levels_between(w, smooth, seg[0], seg[-1])
        if on <= off:
            continue
        return Calibration(period, off, on, start + PREAMBLE_BITS * period, frame_start_us=start)
    return None


def _match_bfsk(w, smooth, edges: _Edges, min_run: float) -> Calibration | None:
    t = edges.times
    if t.size < 16:
        return None
    for i in np.flatnonzero(edges.rising[: t.size - 15]):
        seg = t[i:i + 16]
        if not np.array_equal(edges.rising[i:i + 16], [True, False] * 8):
            continue
        widths = seg[1::2] - seg[0::2]
        gaps = seg[2::2] - seg[1:-1:2]
        if np.any(widths < min_run) or np.any(gaps < min_run):
            continue
        longs, shorts = widths[0::2], widths[1::2]
        if not (_consistent(longs) and _consistent(shorts) and _consistent(gaps)):
            continue
        t_on, t_off, t_d = float(np.median(longs)), float(np.median(shorts)), float(np.median(gaps))
        if t_on < 1.3 * t_off:
            continue
        before = seg[0] - t[i - 1] if i > 0 else math.inf
        if before < 0.4 * t_d:
            continue
        off, on = _levels_between(w, smooth, seg[0], seg[-1])
        if on <= off:
            continue
        period = (t_on + t_off) / 2 + t_d
        return Calibration(period, off, on, float(seg[-1]) + t_d, frame_start_us=float(seg[0]),
                           t_on_us=t_on, t_off_us=t_off, t_d_us=t_d)
    return None


# -- sensor demodulation ---------------------------------------------------

def _refine_clock(edge_times: np.ndarray, start: float, unit: float, n_units: int) -> tuple[float, float]:
    """Fit edge times to start + k * unit over progressively longer spans."""
    end = start + n_units * unit
    pool = edge_times[(edge_times >= start - unit / 2) & (edge_times <= end + unit / 2)]
    for span in (32, 64, 128, None):
        limit = start + span * unit if span is not None else end + unit / 2
        sel = pool[pool <= limit]
        k = np.round((sel - start) / unit)
        resid = sel - (start + k * unit)
        good = np.abs(resid) < 0.25 * unit
        if np.unique(k[good]).size < 3:
            continue
        slope, icpt = np.polyfit(k[good], sel[good], 1)
        start, unit = float(icpt), float(slope)
    return start, unit


def _cell_medians(smooth: np.ndarray, w: Waveform, starts_us: np.ndarray, width_us: float) -> np.ndarray:
    centre = w.index_at(starts_us + width_us / 2)
    half = max(0, int(math.floor(0.25 * width_us / w.dt_us)))
    idx = np.rint(centre).astype(np.int64)[:, None] + np.arange(-half, half + 1)
    idx = np.clip(idx, 0, len(w) - 1)
    return np.median(smooth[idx], axis=1)


def _frame_span(w: Waveform, cal: Calibration, n_sym: int | None) -> Waveform:
    """The part of ``w`` a frame of ``n_sym`` symbols can reach, with slack for clock error."""
    margin = 8 * cal.bit_period_us
    if n_sym is None:
        return w.window(cal.frame_start_us - margin)
    return w.window(cal.frame_start_us - margin, cal.frame_start_us + 1.1 * n_sym * cal.bit_period_us + margin)


def _symbol_medians(w: Waveform, smoothed: np.ndarray, cal: Calibration, n_sym: int | None,
                    per_sym: int = 1) -> tuple[np.ndarray, int, int]:
    """Per-cell medians after clock refinement, plus cells found and cells wanted."""
    unit = cal.bit_period_us / per_sym
    wf_end = w.start_time_us + w.duration_us
    # a symbol is usable once the central half of its last slot has been sampled
    reach = 1 - 0.25 / per_sym

    def usable(t0: float, period: float) -> int:
        return max(0, int(math.floor((wf_end - t0) / period - reach + 1e-9)) + 1)

    want = usable(cal.frame_start_us, cal.bit_period_us) if n_sym is None else n_sym
    edges = _find_edges(w, smoothed, cal.midpoint_mv, 0.15 * (cal.level_on_mv - cal.level_off_mv))
    start, unit = _refine_clock(edges.times, cal.frame_start_us, unit, want * per_sym)
    n_cells = min(want, usable(start, unit * per_sym))

    starts = start + np.arange(n_cells * per_sym) * unit
    return _cell_medians(smoothed, w, starts, unit), n_cells, want


def demod_levels(w: Waveform, cal: Calibration, n_levels: int, n_symbols: int | None = None,
                 order: int = 3) -> np.ndarray:
    """Amplitude level index (0 .. n_levels-1) of each symbol from the preamble on.

    Works for any level count, including ones that are not a power of two.
    """
    if n_levels < 2:
        raise InvalidInputError("n_levels must be at least 2")
    w = _frame_span(w, cal, n_symbols)
    smoothed = savgol_smooth(w, samples_per_bit=cal.bit_period_us / w.dt_us, order=order).samples
    med, n_cells, want = _symbol_medians(w, smoothed, cal, n_symbols)
    step = (cal.level_on_mv - cal.level_off_mv) / (n_levels - 1)
    levels = np.clip(np.rint((med - cal.level_off_mv) / step), 0, n_levels - 1).astype(np.int64)
    if n_cells < want:
        raise TruncationError(f"waveform ends after {n_cells} of {want} symbols", partial=levels)
    return levels


def demod_sensor(w: Waveform, scheme: Scheme | str, cal: Calibration, n_levels: int = 2,
                 n_bits: int | None = None, order: int = 3) -> np.ndarray:
    """Demodulate the frame that ``cal`` points at, preamble included.

    ``n_bits`` is the number of framed bits to return (default: as many as
    the waveform holds). Raises :class:`TruncationError` carrying the bits
    decoded so far if the waveform ends first.
    """
    scheme = Scheme.parse(scheme)
    if n_levels < 2:
        raise InvalidInputError("n_levels must be at least 2")
    if n_levels > 2 and scheme is not Scheme.ASK_LEVELS:
        raise InvalidInputError("more than two levels only applies to ask_levels")
    if scheme in (Scheme.ASK, Scheme.OOK_PARALLEL):
        raise InvalidInputError(f"{scheme.value} needs per-LED observations; use demod_camera")
    spb = cal.bit_period_us / w.dt_us
    k = levels_bits(n_levels) if scheme is Scheme.ASK_LEVELS else 1
    if n_bits is None:
        n_sym = None
    elif scheme is Scheme.ASK_LEVELS:
        n_sym = PREAMBLE_BITS + math.ceil(max(0, n_bits - PREAMBLE_BITS) / k)
    else:
        n_sym = n_bits
    # B-FSK symbols vary in length; twice the mean covers any mix
    w = _frame_span(w, cal, 2 * n_bits if scheme is Scheme.BFSK and n_bits else n_sym)
    smoothed = savgol_smooth(w, samples_per_bit=spb, order=order).samples
    if scheme is Scheme.BFSK:
        return _demod_bfsk(w, smoothed, cal, n_bits)

    per_sym = 2 if scheme is Scheme.MANCHESTER else 1
    med, n_cells, want = _symbol_medians(w, smoothed, cal, n_sym, per_sym)
    if scheme is Scheme.OOK:
        bits = (med > cal.midpoint_mv).astype(np.uint8)
    elif scheme is Scheme.MANCHESTER:
        bits = (med[1::2] > med[0::2]).astype(np.uint8)
    else:
        head = (med[:PREAMBLE_BITS] > cal.midpoint_mv).astype(np.uint8)
        step = (cal.level_on_mv - cal.level_off_mv) / (n_levels - 1)
        levels = np.clip(np.rint((med[PREAMBLE_BITS:] - cal.level_off_mv) / step), 0, n_levels - 1)
        bits = np.concatenate([head, levels_to_bits(levels.astype(np.int64), n_levels)])
    if n_bits is not None:
        bits = bits[:n_bits]
    if n_cells < want:
        raise TruncationError(f"waveform ends after {n_cells} of {want} symbols", partial=bits)
    return bits


def _demod_bfsk(w: Waveform, smoothed: np.ndarray, cal: Calibration, n_bits: int | None) -> np.ndarray:
    if not (cal.t_on_us > 0 and cal.t_off_us > 0):
        raise InvalidInputError("B-FSK needs a calibration with pulse durations")
    edges = _find_edges(w, smoothed, cal.midpoint_mv, 0.15 * (cal.level_on_mv - cal.level_off_mv))
    t = edges.times
    i = int(np.searchsorted(t, cal.frame_start_us - cal.t_d_us / 2))
    rises = t[i:][edges.rising[i:]]
    falls = t[i:][~edges.rising[i:]]
    if falls.size and rises.size and falls[0] < rises[0]:
        falls = falls[1:]
    m = min(rises.size, falls.size)
    widths = falls[:m] - rises[:m]
    # drop glitches far shorter than the short symbol
    widths = widths[widths >= 0.4 * cal.t_off_us]
    boundary = (cal.t_on_us + cal.t_off_us) / 2
    bits = (widths > boundary).astype(np.uint8)
    if n_bits is None:
        return bits
    if bits.size < n_bits:
        raise TruncationError(f"waveform holds {bits.size} of {n_bits} pulses", partial=bits)
    return bits[:n_bits]


def frame_end_us(cal: Calibration, scheme: Scheme | str, n_levels: int = 2, n_bits: int = FRAME_BITS) -> float:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.BFSK:
        return cal.frame_start_us + n_bits * cal.bit_period_us
    if scheme is Scheme.ASK_LEVELS:
        k = levels_bits(n_levels)
        n_sym = PREAMBLE_BITS + math.ceil((n_bits - PREAMBLE_BITS) / k)
        return cal.frame_start_us + n_sym * cal.bit_period_us
    return cal.frame_start_us + n_bits * cal.bit_period_us


@dataclass
class SensorCapture:
    bits: np.ndarray
    calibrations: list[Calibration] = field(default_factory=list)
    truncated: bool = False


SEARCH_SAMPLES = 1 << 15


def _search(w: Waveform, scheme: Scheme, from_us: float | None, period_us: float | None) -> Calibration | None:
    """Look for the next preamble in a window that doubles until the waveform ends.

    Keeps long captures linear in length instead of rescanning the whole tail
    for every frame.
    """
    start = w.start_time_us if from_us is None else from_us
    end = w.start_time_us + w.duration_us
    span = max(SEARCH_SAMPLES * w.dt_us, 0 if period_us is None else 64 * period_us)
    while True:
        stop = start + span
        try:
            return calibrate_preamble(w if stop >= end else w.window(None, stop), scheme, from_us)
        except SyncNotFoundError:
            if stop >= end:
                return None
        span *= 2


def receive_sensor(w: Waveform, scheme: Scheme | str, n_levels: int = 2, max_frames: int | None = None,
                   frame_bits: int = FRAME_BITS) -> SensorCapture:
    """Calibrate and demodulate frame after frame until no preamble remains."""
    scheme = Scheme.parse(scheme)
    chunks: list[np.ndarray] = []
    cals: list[Calibration] = []
    pos: float | None = None
    truncated = False
    while max_frames is None or len(cals) < max_frames:
        cal = _search(w, scheme, pos, cals[-1].bit_period_us if cals else None)
        if cal is None:
            break
        cals.append(cal)
        try:
            chunks.append(demod_sensor(w, scheme, cal, n_levels, frame_bits))
        except TruncationError as exc:
            chunks.append(exc.partial)
            truncated = True
            break
        # B-FSK symbols vary in length, so resume after the frame's last pulse
        if scheme is Scheme.BFSK:
            pos = _bfsk_resume(w, cal, frame_bits)
        else:
            pos = frame_end_us(cal, scheme, n_levels, frame_bits) - cal.bit_period_us / 2
    bits = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
    return SensorCapture(bits, cals, truncated)


def _bfsk_resume(w: Waveform, cal: Calibration, frame_bits: int) -> float:
    w = _frame_span(w, cal, 2 * frame_bits)
    spb = cal.bit_period_us / w.dt_us
    smoothed = savgol_smooth(w, samples_per_bit=spb).samples
    edges = _find_edges(w, smoothed, cal.midpoint_mv, 0.15 * (cal.level_on_mv - cal.level_off_mv))
    t = edges.times
    i = int(np.searchsorted(t, cal.frame_start_us - cal.t_d_us / 2))
    falls = t[i:][~edges.rising[i:]]
    if falls.size >= frame_bits:
        return float(falls[frame_bits - 1]) + cal.t_d_us / 4
    return float(t[-1]) if t.size else cal.frame_start_us


# -- camera demodulation ---------------------------------------------------

def demod_camera(frames: FrameSeries, frames_per_bit: int, led_subset: Sequence[int] | None = None,
                 gap_frames: int = 0, start_frame: int = 0) -> np.ndarray:
    """Majority vote over each run of ``frames_per_bit`` frames, per LED.

    Each cell yields one bit per LED in ``led_subset`` order; ``gap_frames``
    frames are skipped after every cell (inter-symbol darkness).
    """
    if int(frames_per_bit) != frames_per_bit or frames_per_bit < 2:
        raise SubNyquistError(f"need at least 2 frames per bit, got {frames_per_bit}")
    if gap_frames < 0 or start_frame < 0:
        raise InvalidInputError("gap_frames and start_frame must be non-negative")
    leds = list(range(frames.n_leds)) if led_subset is None else list(led_subset)
    if any(not 0 <= i < frames.n_leds for i in leds):
        raise InvalidInputError(f"LED subset {leds} outside 0..{frames.n_leds - 1}")
    stride = frames_per_bit + gap_frames
    usable = frames.states[start_frame:, leds]
    n_cells = (usable.shape[0] + gap_frames) // stride
    if n_cells == 0:
        return np.zeros(0, dtype=np.uint8)
    rows = (np.arange(n_cells)[:, None] * stride + np.arange(frames_per_bit)).ravel()
    cells = usable[rows].reshape(n_cells, frames_per_bit, len(leds)).astype(np.int64)
    return (2 * cells.sum(axis=1) >= frames_per_bit).astype(np.uint8).ravel()


# -- framing and scoring ---------------------------------------------------

@dataclass
class DecodeReport:
    payloads: list[np.ndarray] = field(default_factory=list)
    frames_ok: int = 0
    frames_crc_failed: int = 0
    frames_sync_failed: int = 0
    preambles_detected: int = 0
    raw_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    @property
    def crc_pass_rate(self) -> float:
        attempted = self.frames_ok + self.frames_crc_failed
        return self.frames_ok / attempted if attempted else 0.0

    def to_text(self) -> str:
        lines = [
            f"frames_ok={self.frames_ok}",
            f"frames_crc_failed={self.frames_crc_failed}",
            f"frames_sync_failed={self.frames_sync_failed}",
            f"preambles_detected={self.preambles_detected}",
            f"raw_bits={self.raw_bits.size}",
        ]
        lines += [f"payload_{i}={Frame(p, 0).payload_hex}" for i, p in enumerate(self.payloads)]
        return "\n".join(lines) + "\n"


def _preamble_hits(bits: np.ndarray) -> np.ndarray:
    if bits.size < PREAMBLE_BITS:
        return np.zeros(0, dtype=np.int64)
    view = np.lib.stride_tricks.sliding_window_view(bits, PREAMBLE_BITS)
    return np.flatnonzero(np.all(view == PREAMBLE, axis=1))


def decode_stream(bits: BitsLike) -> DecodeReport:
    """Scan for preambles and parse a frame at each one.

    A full frame after a preamble is consumed whether or not its CRC passes.
    A preamble too close to the end for a full frame counts as a sync failure,
    as does a stream long enough for a frame that holds no preamble at all.
    """
    arr = as_bits(bits)
    report = DecodeReport(raw_bits=arr)
    hits = _preamble_hits(arr)
    pos = 0
    for h in hits:
        if h < pos:
            continue
        report.preambles_detected += 1
        if h + FRAME_BITS > arr.size:
            report.frames_sync_failed += 1
            break
        try:
            frame = parse_frame(arr[h:h + FRAME_BITS])
        except IntegrityError:
            report.frames_crc_failed += 1
        else:
            report.frames_ok += 1
            report.payloads.append(frame.payload)
        pos = h + FRAME_BITS
    if report.preambles_detected == 0 and arr.size >= FRAME_BITS:
        report.frames_sync_failed += 1
    return report


@dataclass(frozen=True)
class BerReport:
    bits_sent: int
    bits_errored: int

    @property
    def ber(self) -> float:
        return self.bits_errored / self.bits_sent if self.bits_sent else 0.0

    def to_text(self) -> str:
        return f"bits_sent={self.bits_sent}\nbits_errored={self.bits_errored}\nber={self.ber:.6g}\n"


def compute_ber(sent: BitsLike, received: BitsLike) -> BerReport:
    """Hamming distance over the sent length; missing received bits count as errors."""
    s = as_bits(sent)
    r = as_bits(received)[: s.size]
    missing = s.size - r.size
    errors = int(np.count_nonzero(s[: r.size] != r)) + missing
    return BerReport(int(s.size), errors)


def describe_bits(bits: BitsLike, limit: int = 64) -> str:
    text = bits_to_text(bits)
    return text if len(text) <= limit else text[:limit] + f"... ({len(text)} bits)"
