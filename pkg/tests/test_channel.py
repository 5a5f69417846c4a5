import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ledcovert.channel import (
    CameraConfig,
    ChannelConfig,
    FrameSeries,
    Waveform,
    capture_camera,
    frames_from_csv,
    frames_to_csv,
    lit_count,
    read_waveform,
    read_waveform_any,
    read_waveform_binary,
    render_waveform,
    write_waveform,
    write_waveform_binary,
)
from ledcovert.errors import InvalidInputError, UndersamplingError
from ledcovert.modulation import (
    LedTimeline,
    ModulationParams,
    modulate_levels,
    modulate_ook,
    modulate_ook_parallel,
)
from ledcovert.transmitter import R1, R1_MULTI, R2

QUIET = ChannelConfig(noise_sigma_mv=0.0, rise_tau_us=0.0)


def held_on(duration=20_000):
    return modulate_ook("1", ModulationParams(t_on=duration, t_off=duration))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"sample_rate": 0}, {"noise_sigma_mv": -1}, {"adc_bits": 7},
                                    {"adc_bits": 25}, {"rise_tau_us": -1}])
    def test_rejects(self, kw):
        with pytest.raises(InvalidInputError):
            ChannelConfig(**kw)

    def test_defaults(self):
        c = ChannelConfig()
        assert (c.sample_rate, c.noise_sigma_mv, c.adc_bits) == (500_000, 1.0, 16)
        assert c.tau_for(R1) == pytest.approx(24.0)


class TestRender:
    def test_on_converges_to_single_led_level(self):
        wf = render_waveform(held_on(), R1, ChannelConfig(noise_sigma_mv=0))
        assert wf.samples[-100:] == pytest.approx(14.0, abs=ChannelConfig().lsb_mv)

    def test_off_is_ambient(self):
        wf = render_waveform(modulate_ook("0", ModulationParams(t_on=5000, t_off=5000)), R1,
                             ChannelConfig(noise_sigma_mv=0))
        assert wf.samples == pytest.approx(4.0, abs=ChannelConfig().lsb_mv)

    def test_r2_levels(self):
        wf = render_waveform(held_on(), R2, ChannelConfig(noise_sigma_mv=0))
        assert wf.samples[-1] == pytest.approx(30.0, abs=0.01)

    def test_rise_time_constant(self):
        wf = render_waveform(held_on(), R1, ChannelConfig(noise_sigma_mv=0, rise_tau_us=100))
        # sample k has been through k+1 filter steps
        k = int(round(100 / wf.dt_us))
        assert wf.samples[k] == pytest.approx(4 + 10 * (1 - math.exp(-1 - 1 / 50)), abs=0.02)

    def test_flicker_is_500hz_sinusoid(self):
        dark = LedTimeline((), 20_000, 1)
        wf = render_waveform(dark, R2, ChannelConfig(noise_sigma_mv=0, flicker_amp_mv=2.0))
        x = wf.samples - wf.samples.mean()
        spectrum = np.abs(np.fft.rfft(x))
        freqs = np.fft.rfftfreq(x.size, 1 / wf.sample_rate)
        assert freqs[np.argmax(spectrum)] == pytest.approx(500.0)
        assert wf.samples.mean() == pytest.approx(6.0, abs=0.01)
        assert x.max() == pytest.approx(2.0, abs=0.01)

    def test_staircase_equally_spaced(self):
        tl = modulate_levels(range(8), ModulationParams(t_all=300, n_leds=7))
        wf = render_waveform(tl, R1_MULTI, ChannelConfig(noise_sigma_mv=0))
        mid = ((np.arange(8) + 0.9) * 300 / wf.dt_us).astype(int)
        plateaus = wf.samples[mid]
        assert np.diff(plateaus) == pytest.approx([10.0] * 7, abs=0.05)
        assert plateaus[0] == pytest.approx(4.0, abs=0.01)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 7), min_size=1, max_size=30), st.integers(1, 50))
    def test_ideal_staircase_exact_without_filter(self, levels, hold):
        tl = modulate_levels(levels, ModulationParams(t_all=hold * 10, n_leds=7))
        wf = render_waveform(tl, R1_MULTI, QUIET)
        ideal = 4.0 + 10.0 * lit_count(tl, wf.times_us())
        assert np.max(np.abs(wf.samples - ideal)) <= QUIET.lsb_mv / 2 + 1e-12

    def test_sample_count(self):
        tl = modulate_ook("101", ModulationParams(t_on=333.3, t_off=333.3))
        wf = render_waveform(tl, R1, QUIET)
        assert len(wf) == math.ceil(999.9 * 0.5)

    def test_deterministic(self):
        tl = modulate_ook("1011001", ModulationParams(t_on=700, t_off=700))
        c = ChannelConfig(rng_seed=7, flicker_amp_mv=1, jitter_us=5)
        assert render_waveform(tl, R1, c) == render_waveform(tl, R1, c)
        assert render_waveform(tl, R1, c) != render_waveform(tl, R1, ChannelConfig(rng_seed=8))

    def test_undersampling(self):
        with pytest.raises(UndersamplingError):
            render_waveform(held_on(), R1, ChannelConfig(sample_rate=30_000))

    def test_adc_clips_to_full_scale(self):
        tl = modulate_levels([7], ModulationParams(t_all=10_000, n_leds=7))
        big = R1_MULTI.__class__("big", 7, 120, 240, 30, 4, per_led_step_mv=20)
        wf = render_waveform(tl, big, QUIET)
        assert wf.samples.max() <= 100.0

    def test_more_leds_never_dimmer(self, rng):
        levels = rng.integers(0, 8, 50)
        tl = modulate_levels(levels, ModulationParams(t_all=300, n_leds=7))
        t = np.linspace(0, tl.total_duration, 2000)
        k = lit_count(tl, t)
        ideal = R1_MULTI.ambient_mv + k * R1_MULTI.per_led_step_mv
        order = np.argsort(k, kind="stable")
        assert np.all(np.diff(ideal[order]) >= 0)

    def test_energy_half_duty(self):
        bits = np.tile([1, 0], 500)
        tl = modulate_ook(bits, ModulationParams(t_on=700, t_off=700))
        c = ChannelConfig(noise_sigma_mv=1.0, rng_seed=3)
        wf = render_waveform(tl, R1, c)
        tol = 3 * c.noise_sigma_mv / math.sqrt(len(wf))
        # low-pass leakage at the final edge is bounded by tau / duration of swing
        leak = 10 * c.tau_for(R1) / tl.total_duration
        assert abs(wf.samples.mean() - 9.0) < tol + leak


class TestWindow:
    def test_window_shares_time_axis(self, rng):
        wf = Waveform(100_000.0, rng.normal(size=1000), start_time_us=50.0)
        part = wf.window(1050.0, 2050.0)
        assert part.start_time_us == pytest.approx(1050.0)
        assert len(part) == 100
        assert np.array_equal(part.samples, wf.samples[100:200])
        assert np.shares_memory(part.samples, wf.samples)

    def test_window_clamps(self, rng):
        wf = Waveform(100_000.0, rng.normal(size=100))
        assert wf.window(-500.0) == wf
        assert len(wf.window(5000.0)) == 0
        assert len(wf.window(None, 500.0)) == 50


class TestCamera:
    def test_full_frame_on(self):
        fs = capture_camera(held_on(1e6 / 30), R1, CameraConfig(fps=30))
        assert fs.states.tolist() == [[1]]

    def test_two_frames_per_bit_aligned(self):
        bits = np.tile([1, 0], 20)
        tl = modulate_ook(bits, ModulationParams(t_on=2e6 / 240, t_off=2e6 / 240))
        fs = capture_camera(tl, R1, CameraConfig(fps=240))
        assert fs.n_frames == 80
        assert np.array_equal(fs.states[:, 0], np.repeat(bits, 2))

    def test_majority_threshold(self):
        # LED lit for 60% of the exposure window of frame 0 only
        period = 1e6 / 100
        tl = modulate_ook("10", ModulationParams(t_on=0.3 * period, t_off=0.7 * period))
        fs = capture_camera(tl, R1, CameraConfig(fps=100, shutter_fraction=0.5))
        assert fs.states[0, 0] == 1

    def test_per_led_states(self):
        tl = modulate_ook_parallel("10011100", ModulationParams(t_all=1e6 / 15, n_leds=2))
        fs = capture_camera(tl, R2, CameraConfig(fps=30))
        assert fs.states[:, 0].tolist() == [1, 1, 0, 0, 1, 1, 0, 0]
        assert fs.states[:, 1].tolist() == [0, 0, 1, 1, 1, 1, 0, 0]

    def test_random_phase_reproducible(self):
        tl = modulate_ook("1101", ModulationParams(t_on=1e5, t_off=1e5))
        cam = CameraConfig(fps=30, phase_us=None, rng_seed=4)
        assert capture_camera(tl, R1, cam) == capture_camera(tl, R1, cam)

    def test_bad_config(self):
        with pytest.raises(InvalidInputError):
            CameraConfig(fps=0)
        with pytest.raises(InvalidInputError):
            CameraConfig(shutter_fraction=0)


class TestFiles:
    def test_waveform_text(self, tmp_path, rng):
        wf = Waveform(500_000.0, rng.normal(10, 1, 100))
        write_waveform(tmp_path / "w.txt", wf)
        assert (tmp_path / "w.txt").read_text().startswith("sample_rate_hz=500000\n")
        assert read_waveform(tmp_path / "w.txt") == wf
        assert read_waveform_any(tmp_path / "w.txt") == wf

    def test_waveform_binary(self, tmp_path, rng):
        wf = Waveform(200_000.0, rng.normal(10, 1, 100).astype(np.float32).astype(float))
        write_waveform_binary(tmp_path / "w.bin", wf)
        assert (tmp_path / "w.bin").stat().st_size == 400
        assert read_waveform_binary(tmp_path / "w.bin", 200_000) == wf
        assert read_waveform_any(tmp_path / "w.bin", 200_000) == wf
        with pytest.raises(InvalidInputError):
            read_waveform_any(tmp_path / "w.bin")

    def test_frames_csv(self, rng):
        fs = FrameSeries(240.0, rng.integers(0, 2, (30, 8)).astype(np.uint8))
        text = frames_to_csv(fs)
        assert text.splitlines()[1] == "frame_index,led,state"
        assert frames_from_csv(text) == fs
