import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ledcovert.bits import bits_to_bytes
from ledcovert.channel import CameraConfig, ChannelConfig
from ledcovert.errors import HardwareLimitError, InvalidInputError
from ledcovert.harness import (
    REPRODUCE_TARGETS,
    ExperimentConfig,
    dump_config,
    mean_ci,
    parse_config,
    reproduce,
    run_roundtrip,
    sweep,
    trial_seeds,
    write_reproduction,
    write_roundtrip,
    write_sweep,
)
from ledcovert.modulation import ModulationParams, Scheme

FAST = ChannelConfig(sample_rate=250_000)
QUIET = ChannelConfig(sample_rate=250_000, noise_sigma_mv=0.0)


class TestConfig:
    def test_parse_sections(self):
        cfg = parse_config("""
[experiment]
name = demo
scheme = manchester
profile = r2
rate = 1000
trials = 4
seed = 9

[channel]
noise_sigma_mv = 0.5
sample_rate = 250000

[camera]
fps = 60
""")
        assert cfg.name == "demo" and cfg.scheme is Scheme.MANCHESTER and cfg.profile == "R2"
        assert cfg.rate_bps == 1000 and cfg.trials == 4 and cfg.seed == 9
        assert cfg.channel.noise_sigma_mv == 0.5 and cfg.camera.fps == 60
        assert cfg.receiver == "camera"

    def test_modulation_section(self):
        cfg = parse_config("[modulation]\nt_on = 400\nt_off = 400\n")
        assert cfg.params == ModulationParams(t_on=400, t_off=400)

    def test_dump_parse_roundtrip(self):
        cfg = ExperimentConfig(scheme=Scheme.ASK_LEVELS, profile="R1_MULTI", n_levels=4, trials=3,
                               channel=ChannelConfig(noise_sigma_mv=0.25, rise_tau_us=10),
                               camera=CameraConfig(fps=120, phase_us=None), payload="hex:00ff")
        assert parse_config(dump_config(cfg)) == cfg

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(list(Scheme)), st.sampled_from(["R1", "R2", "R1_MULTI"]),
           st.one_of(st.none(), st.floats(10, 1e5)), st.integers(1, 1000), st.integers(0, 2**31),
           st.floats(0, 10), st.booleans())
    def test_dump_parse_property(self, scheme, profile, rate, trials, seed, sigma, limits):
        cfg = ExperimentConfig(scheme=scheme, profile=profile, rate_bps=rate, trials=trials, seed=seed,
                               channel=ChannelConfig(noise_sigma_mv=sigma), enforce_limits=limits)
        assert parse_config(dump_config(cfg)) == cfg

    @pytest.mark.parametrize("text", [
        "[bogus]\nx = 1\n",
        "[experiment]\ncolour = red\n",
        "[experiment]\ntrials = 0\n",
        "[experiment]\nprofile = R9\n",
        "[experiment]\ntrials = many\n",
        "[channel]\nsample_rate = -5\n",
        "not an ini file",
    ])
    def test_rejects(self, text):
        with pytest.raises(InvalidInputError):
            parse_config(text)

    def test_bad_payload_source(self):
        with pytest.raises(InvalidInputError):
            ExperimentConfig(payload="stdin")


class TestRoundtrip:
    def test_noiseless_r2_ook_is_exact(self):
        res = run_roundtrip(ExperimentConfig(profile="R2", rate_bps=3448, channel=QUIET, trials=3, frames=2))
        assert res.ber.bits_errored == 0 and res.ber.bits_sent == 3 * 2 * 280
        assert res.frames_ok_fraction == 1.0
        assert res.decode.frames_ok == 6

    def test_r1_at_3448_is_refused(self):
        with pytest.raises(HardwareLimitError) as info:
            run_roundtrip(ExperimentConfig(profile="R1", rate_bps=3448))
        assert info.value.violations
        assert {v.rule for v in info.value.violations} >= {"min_cycle"}

    def test_limits_off_flags_infeasible(self):
        res = run_roundtrip(ExperimentConfig(profile="R1", rate_bps=3448, enforce_limits=False, channel=FAST))
        assert not res.feasible
        assert "limit_violations=" in res.summary()

    @pytest.mark.parametrize("scheme", ["ook", "bfsk", "manchester", "ask_levels"])
    def test_sensor_schemes(self, scheme):
        res = run_roundtrip(ExperimentConfig(scheme=scheme, profile="R1_MULTI", channel=FAST, trials=2))
        assert res.mean_ber == 0.0

    @pytest.mark.parametrize("scheme", ["ook", "manchester", "ask", "ook_parallel"])
    def test_camera_schemes(self, scheme):
        res = run_roundtrip(ExperimentConfig(scheme=scheme, profile="R1_MULTI", camera=CameraConfig(fps=240)))
        assert res.mean_ber == 0.0 and res.frames_ok_fraction == 1.0

    def test_scheme_receiver_mismatch(self):
        with pytest.raises(InvalidInputError):
            run_roundtrip(ExperimentConfig(scheme="ask"))
        with pytest.raises(InvalidInputError):
            run_roundtrip(ExperimentConfig(scheme="bfsk", camera=CameraConfig()))

    def test_hex_payload_decoded(self):
        hexstr = bytes(range(64)).hex()
        res = run_roundtrip(ExperimentConfig(profile="R2", payload=f"hex:{hexstr}", channel=FAST))
        assert [bits_to_bytes(p).hex() for p in res.decode.payloads] == [hexstr[:64], hexstr[64:]]
        assert res.trials[0].frames_sent == 2

    def test_file_payload(self, tmp_path):
        (tmp_path / "p.bin").write_bytes(b"\x5a" * 32)
        res = run_roundtrip(ExperimentConfig(profile="R2", payload=f"file:{tmp_path / 'p.bin'}", channel=FAST))
        assert [bits_to_bytes(p) for p in res.decode.payloads] == [b"\x5a" * 32]

    def test_deterministic(self, tmp_path):
        cfg = ExperimentConfig(profile="R2", rate_bps=3555, trials=4, seed=11, enforce_limits=False)
        a = write_roundtrip(run_roundtrip(cfg, keep_artifacts=True), tmp_path, stamp="a")
        b = write_roundtrip(run_roundtrip(cfg, keep_artifacts=True), tmp_path, stamp="b")
        for name in ("result.csv", "summary.txt", "waveform.txt", "config.snapshot"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_noise(self):
        a = run_roundtrip(ExperimentConfig(profile="R2", seed=1, channel=FAST))
        b = run_roundtrip(ExperimentConfig(profile="R2", seed=2, channel=FAST))
        assert a.trials[0].seed != b.trials[0].seed

    def test_trial_seeds_do_not_depend_on_trial_count(self):
        few = [s.generate_state(2).tolist() for s in trial_seeds(5, 3)]
        many = [s.generate_state(2).tolist() for s in trial_seeds(5, 8)]
        assert many[:3] == few

    def test_trial_prefix_stable(self):
        three = run_roundtrip(ExperimentConfig(profile="R2", trials=3, seed=4, channel=FAST))
        five = run_roundtrip(ExperimentConfig(profile="R2", trials=5, seed=4, channel=FAST))
        assert five.trials[:3] == three.trials

    def test_output_layout(self, tmp_path):
        res = run_roundtrip(ExperimentConfig(name="exp", profile="R2", channel=FAST), keep_artifacts=True)
        out = write_roundtrip(res, tmp_path, stamp="20240101T000000Z")
        assert out == tmp_path / "exp" / "20240101T000000Z"
        assert {p.name for p in out.iterdir()} == {"config.snapshot", "result.csv", "summary.txt", "waveform.txt"}
        again = write_roundtrip(res, tmp_path, stamp="20240101T000000Z")
        assert again.name == "20240101T000000Z-1"
        assert parse_config((out / "config.snapshot").read_text()) == res.config

    def test_camera_artifact(self, tmp_path):
        res = run_roundtrip(ExperimentConfig(camera=CameraConfig(fps=60)), keep_artifacts=True)
        out = write_roundtrip(res, tmp_path)
        assert (out / "frames.csv").exists()

    def test_summary_keys(self):
        text = run_roundtrip(ExperimentConfig(profile="R2", channel=FAST)).summary()
        keys = {line.split("=")[0] for line in text.splitlines()}
        assert {"mean_ber", "std_ber", "throughput_bps", "line_rate_bps", "frames_ok_fraction"} <= keys


class TestSweep:
    def test_row_per_value_and_infeasible_flag(self):
        res = sweep(ExperimentConfig(profile="R2", channel=FAST), "bit_rate", [1000, 3448, 5000])
        assert [r.value for r in res.rows] == [1000, 3448, 5000]
        assert [r.feasible for r in res.rows] == [True, True, False]
        assert res.rows[2].note == "exceeds_hardware_limits"

    def test_fps_throughput(self):
        res = sweep(ExperimentConfig(camera=CameraConfig()), "fps", [30, 60, 120, 240])
        assert [r.throughput_bps for r in res.rows] == pytest.approx([15, 30, 60, 120], rel=1e-12)
        assert all(r.mean_ber == 0 for r in res.rows)

    def test_sub_nyquist_point_kept(self):
        res = sweep(ExperimentConfig(camera=CameraConfig()), "frames_per_bit", [1, 2, 3])
        assert len(res.rows) == 3
        assert res.rows[0].note == "SubNyquistError" and res.rows[0].mean_ber == 1.0
        assert res.rows[1].mean_ber == 0 and res.rows[2].mean_ber == 0

    def test_levels(self):
        res = sweep(ExperimentConfig(scheme="ask_levels", profile="R1_MULTI", channel=FAST), "n_levels", [2, 4, 8])
        assert [r.mean_ber for r in res.rows] == [0, 0, 0]
        assert res.rows[0].throughput_bps < res.rows[1].throughput_bps < res.rows[2].throughput_bps

    def test_noise_monotone_small(self):
        res = sweep(ExperimentConfig(profile="R2", rate_bps=3555, enforce_limits=False, trials=10, channel=FAST),
                    "noise_sigma_mv", [0, 1, 6, 12])
        bers = [r.mean_ber for r in res.rows]
        assert bers == sorted(bers) and bers[0] == 0 and bers[-1] > 0
        assert all(0 <= b <= 1 for b in bers)

    def test_unknown_variable(self):
        with pytest.raises(InvalidInputError):
            sweep(ExperimentConfig(), "temperature", [1])

    def test_csv(self, tmp_path):
        cfg = ExperimentConfig(name="sw", profile="R2", channel=FAST)
        res = sweep(cfg, "noise_sigma_mv", [0, 1])
        out = write_sweep(cfg, res, tmp_path, stamp="s")
        lines = (out / "result.csv").read_text().splitlines()
        assert lines[0] == "noise_sigma_mv,mean_ber,std_ber,throughput_bps,frames_ok_fraction,feasible,note"
        assert len(lines) == 3


class TestStats:
    def test_constant(self):
        assert mean_ci([0.0] * 10) == (0.0, 0.0)

    def test_brackets_mean(self, rng):
        x = rng.random(50)
        lo, hi = mean_ci(x, seed=1)
        assert lo < x.mean() < hi

    def test_deterministic(self, rng):
        x = rng.random(20)
        assert mean_ci(x, seed=3) == mean_ci(x, seed=3)


class TestReproduce:
    @pytest.mark.parametrize("target", REPRODUCE_TARGETS)
    def test_each_target_fast_and_written(self, target, tmp_path):
        t0 = time.perf_counter()
        rep = reproduce(target, trials=100)
        assert time.perf_counter() - t0 < 60
        out = write_reproduction(rep, tmp_path, stamp="x")
        assert (out / "result.csv").exists() and (out / "summary.txt").exists()
        assert rep.summary["target"] == target

    def test_fig4_rate(self):
        s = reproduce("fig4").summary
        assert s["measured_rate_bps"] == pytest.approx(1e6 / 700, rel=0.005)
        assert s["measured_rate_bps"] == pytest.approx(1400, rel=0.05)

    def test_fig5_flicker_seen(self):
        s = reproduce("fig5").summary
        assert s["flicker_peak_hz"] == pytest.approx(500, abs=40)
        assert s["level_on_mv"] == pytest.approx(30, abs=1)

    def test_fig6_gangs_all_leds(self):
        s = reproduce("fig6").summary
        assert s["leds_switched"] == 7
        assert s["level_on_mv"] == pytest.approx(74, abs=2)

    def test_fig7_equal_steps(self):
        s = reproduce("fig7").summary
        assert s["step_mean_mv"] == pytest.approx(10, abs=0.2)
        assert s["symbol_errors"] == 0

    def test_fig8_rate(self):
        s = reproduce("fig8").summary
        assert s["bit_rate_bps"] == pytest.approx(10_000, rel=0.01)
        assert s["symbol_errors"] == 0

    def test_fig9_flags_limit(self):
        s = reproduce("fig9", trials=20).summary
        assert s["within_hardware_limits"] is False
        assert s["bits"] == 30 and s["mean_ber"] < 0.05

    def test_fig10_ambiguity(self):
        s = reproduce("fig10", trials=10).summary
        assert s["mean_ber"] == pytest.approx(s["expected_ber_from_ambiguity"], abs=0.05)

    def test_table9(self):
        rep = reproduce("table9")
        lines = rep.files["result.csv"].splitlines()
        assert len(lines) == 9
        flagged = [ln.split(",")[0] for ln in lines[1:] if ln.endswith("true")]
        assert flagged == ["Entry-level DSLR", "Extreme camera (low)"]
        for ln in lines[1:]:
            cells = ln.split(",")
            fps = float(cells[1])
            assert float(cells[7]) == pytest.approx(fps / 2)
            assert float(cells[8]) == pytest.approx(4 * fps)

    def test_unknown(self):
        with pytest.raises(InvalidInputError):
            reproduce("fig99")

    def test_deterministic(self):
        assert reproduce("fig9", seed=3, trials=5).files == reproduce("fig9", seed=3, trials=5).files
