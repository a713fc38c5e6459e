"""Pure-Python SHA3-256, used only as an independent hashing oracle.

Implements Keccak-f[1600] with the SHA-3 padding (suffix 0x06) directly
from the sponge construction, sharing no code with hashlib, so agreement
between the two is meaningful evidence of correctness.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]


def _rotl(value: int, shift: int) -> int:
    shift %= 64
    if shift == 0:
        return value
    return ((value << shift) | (value >> (64 - shift))) & _MASK


def _keccak_f(lanes: list[list[int]]) -> list[list[int]]:
    for round_constant in _ROUND_CONSTANTS:
        parity = [
            lanes[x][0] ^ lanes[x][1] ^ lanes[x][2] ^ lanes[x][3] ^ lanes[x][4]
            for x in range(5)
        ]
        delta = [parity[(x - 1) % 5] ^ _rotl(parity[(x + 1) % 5], 1) for x in range(5)]
        lanes = [[lanes[x][y] ^ delta[x] for y in range(5)] for x in range(5)]
        x, y = 1, 0
        current = lanes[x][y]
        for t in range(24):
            x, y = y, (2 * x + 3 * y) % 5
            current, lanes[x][y] = lanes[x][y], _rotl(current, (t + 1) * (t + 2) // 2)
        for column in range(5):
            row = [lanes[x2][column] for x2 in range(5)]
            for x2 in range(5):
                lanes[x2][column] = row[x2] ^ ((~row[(x2 + 1) % 5]) & row[(x2 + 2) % 5])
        lanes[0][0] ^= round_constant
    return lanes


def sha3_256(data: bytes) -> bytes:
    rate = 136
    padded = bytearray(data)
    padding = bytearray(rate - (len(padded) % rate))
    padding[0] ^= 0x06
    padding[-1] ^= 0x80
    padded += padding

    lanes = [[0] * 5 for _ in range(5)]
    for start in range(0, len(padded), rate):
        block = padded[start : start + rate]
        for i in range(rate // 8):
            lanes[i % 5][i // 5] ^= int.from_bytes(block[8 * i : 8 * i + 8], "little")
        lanes = _keccak_f(lanes)

    out = b""
    for i in range(4):
        out += lanes[i % 5][i // 5].to_bytes(8, "little")
    return out
