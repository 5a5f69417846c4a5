"""Reference implementations used only by the tests.

These are deliberately naive and share no code with the package.
"""

import numpy as np


def crc16_ccitt_false_bitserial(bits):
    """Shift-register CRC, one input bit per clock."""
    reg = 0xFFFF
    for b in bits:
        feedback = ((reg >> 15) & 1) ^ int(b)
        reg = (reg << 1) & 0xFFFF
        if feedback:
            reg ^= 0x1021
    return reg


def bytes_to_bits_msb(data):
    return [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]


def savgol_bruteforce(x, window, order):
    """Per-sample least-squares polynomial fit via the normal equations.

    Edges shrink the window symmetrically and cap the degree so that the
    fit stays determined.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        deg = min(order, 2 * h)
        offsets = np.arange(-h, h + 1, dtype=float)
        A = np.vander(offsets, deg + 1, increasing=True)
        y = x[i - h:i + h + 1]
        coef = np.linalg.solve(A.T @ A, A.T @ y)
        out[i] = coef[0]
    return out
