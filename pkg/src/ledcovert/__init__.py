"""Covert data exfiltration through router status LEDs, simulated end to end."""

from .channel import CameraConfig, ChannelConfig, FrameSeries, Waveform, capture_camera, render_waveform
from .errors import (
    CapacityError,
    HardwareLimitError,
    IntegrityError,
    InvalidInputError,
    LedCovertError,
    SyncError,
    SyncNotFoundError,
    TruncationError,
)
from .framing import FRAME_BITS, PAYLOAD_BITS, PREAMBLE, Frame, build_frame, compute_crc16, parse_frame
from .harness import ExperimentConfig, SweepResult, reproduce, run_roundtrip, sweep
from .modulation import LedTimeline, ModulationParams, Scheme, max_bitrate, modulate, modulate_frame
from .receiver import (
    BerReport,
    Calibration,
    DecodeReport,
    calibrate_preamble,
    compute_ber,
    decode_stream,
    demod_camera,
    demod_sensor,
    savgol_smooth,
)
from .transmitter import PROFILES, R1, R1_MULTI, R2, RouterProfile, emit_trace, get_profile, validate_timeline

__version__ = "0.1.0"

__all__ = [
    "BerReport", "Calibration", "CameraConfig", "CapacityError", "ChannelConfig", "DecodeReport",
    "ExperimentConfig", "FRAME_BITS", "Frame", "FrameSeries", "HardwareLimitError", "IntegrityError",
    "InvalidInputError", "LedCovertError", "LedTimeline", "ModulationParams", "PAYLOAD_BITS", "PREAMBLE",
    "PROFILES", "R1", "R1_MULTI", "R2", "RouterProfile", "Scheme", "SweepResult", "SyncError",
    "SyncNotFoundError", "TruncationError", "Waveform", "build_frame", "calibrate_preamble", "capture_camera",
    "compute_ber", "compute_crc16", "decode_stream", "demod_camera", "demod_sensor", "emit_trace",
    "get_profile", "max_bitrate", "modulate", "modulate_frame", "parse_frame", "render_waveform",
    "reproduce", "run_roundtrip", "savgol_smooth", "sweep", "validate_timeline",
]
