"""MSB-first bit level reader/writer with exp-Golomb support.

Bit order follows MPEG conventions: within each byte the most significant
bit is consumed first.  Exp-Golomb codes use the standard construction,
``value = (1 << n_leading_zeros) - 1 + info_bits``.
"""

from __future__ import annotations

from ..exceptions import BitstreamExhausted, MalformedExpGolomb

MAX_EXP_GOLOMB_ZEROS = 31


class BitReader:
    """Read bits MSB-first from a byte buffer."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # absolute bit position

    @property
    def bit_position(self) -> int:
        return self._pos

    @property
    def bits_left(self) -> int:
        return len(self._data) * 8 - self._pos

    def read_bit(self) -> int:
        if self._pos >= len(self._data) * 8:
            raise BitstreamExhausted(
                f"read past end of payload at bit {self._pos}"
            )
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, n: int) -> int:
        value = 0
        for _ in range(n):
            value = (value << 1) | self.read_bit()
        return value

    def read_ue(self) -> int:
        """Unsigned exp-Golomb, ue(v)."""
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > MAX_EXP_GOLOMB_ZEROS:
                raise MalformedExpGolomb(
                    f"{zeros} leading zeros at bit {self._pos}"
                )
        if zeros == 0:
            return 0
        return (1 << zeros) - 1 + self.read_bits(zeros)

    def read_se(self) -> int:
        """Signed exp-Golomb, se(v): 0, 1, -1, 2, -2, ..."""
        code = self.read_ue()
        magnitude = (code + 1) >> 1
        return magnitude if code & 1 else -magnitude


class BitWriter:
    """Write bits MSB-first; pads the final byte with zeros."""

    def __init__(self):
        self._bytes = bytearray()
        self._cur = 0
        self._nbits = 0

    def write_bit(self, bit: int) -> None:
        self._cur = (self._cur << 1) | (bit & 1)
        self._nbits += 1
        if self._nbits == 8:
            self._bytes.append(self._cur)
            self._cur = 0
            self._nbits = 0

    def write_bits(self, value: int, n: int) -> None:
        if value < 0 or (n < 64 and value >> n):
            raise ValueError(f"value {value} does not fit in {n} bits")
        for shift in range(n - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def write_ue(self, value: int) -> None:
        if value < 0:
            raise ValueError("ue(v) encodes non-negative integers only")
        code = value + 1
        nbits = code.bit_length()
        self.write_bits(0, nbits - 1)
        self.write_bits(code, nbits)

    def write_se(self, value: int) -> None:
        code = 2 * value - 1 if value > 0 else -2 * value
        self.write_ue(code)

    def to_bytes(self) -> bytes:
        out = bytes(self._bytes)
        if self._nbits:
            out += bytes([self._cur << (8 - self._nbits)])
        return out
