"""Type-length-value framing used to encapsulate G-PCC data units.

Wire format per unit: ``unit_type`` u(8), ``payload_length`` u(32)
big-endian, then ``payload_length`` opaque payload bytes.  Parsing is
lossless: re-serializing the parsed units reproduces the input stream
byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..exceptions import EmptyStream, TruncatedUnit

HEADER_SIZE = 5

# Conventional role names a unit type can map to.
ROLES = ("sps", "gps", "aps", "geometry_data", "attribute_data", "other")


@dataclass(frozen=True)
class TlvUnit:
    unit_type: int
    payload: bytes
    stream_offset: int

    @property
    def payload_length(self) -> int:
        return len(self.payload)

    def to_bytes(self) -> bytes:
        return struct.pack(">BI", self.unit_type, len(self.payload)) + self.payload


@dataclass
class StreamSummary:
    """Per-type unit counts and payload byte totals for one stream."""

    units_by_type: dict[int, tuple[int, int]] = field(default_factory=dict)
    attribute_payload_bits: int = 0
    geometry_payload_bits: int = 0


def read_tlv_units(stream: bytes) -> list[TlvUnit]:
    """Split a TLV-encapsulated stream into its units, in stream order."""
    if len(stream) == 0:
        raise EmptyStream("no bytes to parse")
    units = []
    offset = 0
    n = len(stream)
    while offset < n:
        if n - offset < HEADER_SIZE:
            raise TruncatedUnit(offset, "incomplete unit header")
        unit_type, length = struct.unpack_from(">BI", stream, offset)
        end = offset + HEADER_SIZE + length
        if end > n:
            raise TruncatedUnit(
                offset, f"payload needs {length} bytes, {n - offset - HEADER_SIZE} remain"
            )
        units.append(TlvUnit(unit_type, stream[offset + HEADER_SIZE:end], offset))
        offset = end
    return units


def serialize_tlv_units(units: list[TlvUnit]) -> bytes:
    return b"".join(u.to_bytes() for u in units)


def summarize_stream(units: list[TlvUnit], type_map: dict[int, str]) -> StreamSummary:
    """Aggregate unit counts and payload sizes by unit type.

    ``type_map`` assigns each unit type a role; types it does not cover are
    counted under ``other`` rather than rejected, so streams from newer
    encoder versions still summarize.
    """
    summary = StreamSummary()
    for unit in units:
        count, total = summary.units_by_type.get(unit.unit_type, (0, 0))
        summary.units_by_type[unit.unit_type] = (count + 1, total + unit.payload_length)
        role = type_map.get(unit.unit_type, "other")
        if role == "attribute_data":
            summary.attribute_payload_bits += 8 * unit.payload_length
        elif role == "geometry_data":
            summary.geometry_payload_bits += 8 * unit.payload_length
    return summary
