"""Fixed-layout transmission frame.

Layout (280 bits total)::

    +----------+-----------+--------+
    | PREAMBLE | PAYLOAD   | CRC-16 |
    | 8 bits   | 256 bits  | 16 bit |
    +----------+-----------+--------+

- PREAMBLE: ``10101010``, used by receivers for sync and level/timing calibration
- PAYLOAD: raw data, always exactly 256 bits (no padding, no variable length)
- CRC-16: CRC-16/CCITT-FALSE over the payload bytes, MSB first
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitsLike, as_bits, bits_from_bytes, bits_to_bytes, bits_to_text
from .errors import FrameSizeError, IntegrityError, InvalidInputError, SyncError

PREAMBLE = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=np.uint8)
PREAMBLE_BITS = PREAMBLE.size
PAYLOAD_BITS = 256
CRC_BITS = 16
FRAME_BITS = PREAMBLE_BITS + PAYLOAD_BITS + CRC_BITS

CRC_POLY = 0x1021
CRC_INIT = 0xFFFF


def _make_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ CRC_POLY) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _make_table()


def crc16_bytes(data: bytes) -> int:
    crc = CRC_INIT
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


def compute_crc16(payload: BitsLike) -> int:
    """CRC-16/CCITT-FALSE of a bit-string whose length is a multiple of 8.

    Poly 0x1021, init 0xFFFF, no reflection, no final XOR. Bits are grouped
    into bytes MSB first.
    """
    bits = as_bits(payload)
    if bits.size % 8:
        raise InvalidInputError(f"CRC input must be whole bytes, got {bits.size} bits")
    return crc16_bytes(bits_to_bytes(bits))


def crc_to_bits(crc: int) -> np.ndarray:
    return bits_from_bytes(int(crc & 0xFFFF).to_bytes(2, "big"))


@dataclass(frozen=True, eq=False)
class Frame:
    payload: np.ndarray
    crc: int

    def __post_init__(self):
        if self.payload.size != PAYLOAD_BITS:
            raise FrameSizeError(f"payload must be {PAYLOAD_BITS} bits, got {self.payload.size}")

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.crc == other.crc and np.array_equal(self.payload, other.payload)

    @property
    def payload_hex(self) -> str:
        return bits_to_bytes(self.payload).hex()

    def __repr__(self):
        return f"Frame(payload=0x{self.payload_hex}, crc=0x{self.crc:04X})"


def build_frame(payload: BitsLike) -> np.ndarray:
    """Wrap a 256-bit payload into the 280-bit on-air frame."""
    bits = as_bits(payload)
    if bits.size != PAYLOAD_BITS:
        raise FrameSizeError(f"payload must be exactly {PAYLOAD_BITS} bits, got {bits.size}")
    return np.concatenate([PREAMBLE, bits, crc_to_bits(compute_crc16(bits))])


def parse_frame(bits: BitsLike) -> Frame:
    """Check preamble and CRC of the first 280 bits of ``bits``.

    Raises:
        SyncError: the stream does not start with ``10101010``.
        IntegrityError: the CRC does not match; the offending payload and both
            CRC values are attached to the exception.
    """
    arr = as_bits(bits)
    if arr.size < FRAME_BITS:
        raise FrameSizeError(f"need {FRAME_BITS} bits to parse a frame, got {arr.size}")
    if not np.array_equal(arr[:PREAMBLE_BITS], PREAMBLE):
        raise SyncError(f"bad preamble {bits_to_text(arr[:PREAMBLE_BITS])}")
    payload = arr[PREAMBLE_BITS:PREAMBLE_BITS + PAYLOAD_BITS].copy()
    crc_field = arr[PREAMBLE_BITS + PAYLOAD_BITS:FRAME_BITS]
    received = int.from_bytes(bits_to_bytes(crc_field), "big")
    computed = compute_crc16(payload)
    if received != computed:
        raise IntegrityError(
            f"CRC mismatch: received 0x{received:04X}, computed 0x{computed:04X}",
            payload=payload, received_crc=received, computed_crc=computed,
        )
    return Frame(payload=payload, crc=received)


def payload_chunks(data: bytes) -> list[np.ndarray]:
    """Split bytes into 256-bit payloads. Partial payloads are refused, not padded."""
    size = PAYLOAD_BITS // 8
    if not data or len(data) % size:
        raise FrameSizeError(f"payload data must be a non-empty multiple of {size} bytes, got {len(data)}")
    return [bits_from_bytes(data[i:i + size]) for i in range(0, len(data), size)]
