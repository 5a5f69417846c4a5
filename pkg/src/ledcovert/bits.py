"""Bit-string helpers.

Bit-strings are plain ``numpy.uint8`` arrays holding only 0 and 1. The
functions here convert between that representation, ``'0'``/``'1'`` text and
packed bytes (MSB first within every byte).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import InvalidInputError

BitsLike = Union[str, bytes, Iterable[int], np.ndarray]


def as_bits(value: BitsLike) -> np.ndarray:
    """Coerce ``value`` into a 1-D uint8 array of 0/1 values.

    Strings are parsed as ``'0'``/``'1'`` text with whitespace ignored.
    ``bytes`` are rejected because their meaning (text or packed) is ambiguous;
    use :func:`bits_from_bytes` for packed data.
    """
    if isinstance(value, np.ndarray):
        arr = value.ravel()
        if arr.dtype != np.uint8:
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise InvalidInputError("bit array may only contain 0 and 1")
            arr = arr.astype(np.uint8)
        elif arr.size and arr.max() > 1:
            raise InvalidInputError("bit array may only contain 0 and 1")
        return arr
    if isinstance(value, (bytes, bytearray)):
        raise InvalidInputError("use bits_from_bytes() for packed data")
    if isinstance(value, str):
        return bits_from_text(value)
    arr = np.asarray(list(value))
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidInputError("bit sequence may only contain 0 and 1")
    return arr.astype(np.uint8)


def bits_from_text(text: str) -> np.ndarray:
    cleaned = "".join(text.split())
    bad = sorted(set(cleaned) - {"0", "1"})
    if bad:
        raise InvalidInputError(f"unexpected characters in bit text: {bad!r}")
    return np.frombuffer(cleaned.encode("ascii"), dtype=np.uint8) - ord("0")


def bits_to_text(bits: BitsLike) -> str:
    arr = as_bits(bits)
    return (arr + ord("0")).tobytes().decode("ascii")


def bits_from_bytes(data: bytes, n_bits: int | None = None) -> np.ndarray:
    """Unpack bytes MSB-first; ``n_bits`` trims the zero padding of the last byte."""
    arr = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
    if n_bits is not None:
        if n_bits > arr.size:
            raise InvalidInputError(f"asked for {n_bits} bits from {arr.size}")
        arr = arr[:n_bits]
    return arr


def bits_to_bytes(bits: BitsLike) -> bytes:
    """Pack MSB-first; a final partial byte is zero-padded in its low bits."""
    return np.packbits(as_bits(bits)).tobytes()


def bits_from_hex(text: str) -> np.ndarray:
    cleaned = "".join(text.split())
    if cleaned.lower().startswith("0x"):
        cleaned = cleaned[2:]
    try:
        data = bytes.fromhex(cleaned)
    except ValueError as exc:
        raise InvalidInputError(f"bad hex string: {exc}") from None
    return bits_from_bytes(data)


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def write_bits_text(path: str | Path, bits: BitsLike, width: int = 64) -> None:
    text = bits_to_text(bits)
    lines = [text[i:i + width] for i in range(0, len(text), width)] or [""]
    Path(path).write_text("\n".join(lines) + "\n")


def read_bits_text(path: str | Path) -> np.ndarray:
    return bits_from_text(Path(path).read_text())


def write_bits_packed(path: str | Path, bits: BitsLike) -> None:
    Path(path).write_bytes(bits_to_bytes(bits))


def read_bits_packed(path: str | Path, n_bits: int | None = None) -> np.ndarray:
    return bits_from_bytes(Path(path).read_bytes(), n_bits)
