"""Feature extraction: TQP, TBPP and tNSL from a compressed stream.

The three features feed the quality model directly.  TQP and tNSL are
syntax fields read from the attribute and geometry parameter sets; TBPP is
the total attribute payload size in bits divided by the point count of the
source cloud.  None of this requires entropy decoding, so extraction cost
is linear in the number of units, not points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..exceptions import (
    InconsistentTbpp,
    MissingField,
    MissingParameterSet,
    NonPositivePointCount,
)
from .profile import SyntaxDescriptorProfile, extract_syntax_fields
from .tlv import read_tlv_units, summarize_stream

PROVENANCE_BITSTREAM = "parsed-from-bitstream"
PROVENANCE_SIDECAR = "sidecar"


@dataclass(frozen=True)
class FeatureVector:
    """The three bitstream features for one compressed point cloud."""

    tqp: float
    tbpp: float
    tnsl: float
    point_count: int | None = None
    provenance: str = PROVENANCE_SIDECAR
    content_id: str | None = None

    def __post_init__(self):
        if not self.tbpp > 0:
            raise ValueError(f"tbpp must be positive, got {self.tbpp}")
        if not self.tqp > 0:
            raise ValueError(f"tqp must be positive, got {self.tqp}")
        if self.tnsl < 0:
            raise ValueError(f"tnsl must be non-negative, got {self.tnsl}")

    def to_dict(self) -> dict:
        doc = {
            "tqp": self.tqp,
            "tbpp": self.tbpp,
            "tnsl": self.tnsl,
            "provenance": self.provenance,
        }
        if self.point_count is not None:
            doc["point_count"] = self.point_count
        if self.content_id is not None:
            doc["content_id"] = self.content_id
        return doc


def extract_features(
    stream: bytes,
    profile: SyntaxDescriptorProfile,
    point_count: int,
) -> FeatureVector:
    """Parse a TLV stream and assemble the model's feature vector.

    ``point_count`` is the source-cloud point count (TBPP denominator); it
    comes from a sidecar or from the caller since the stream itself is
    never decoded down to points.
    """
    if point_count <= 0:
        raise NonPositivePointCount(f"point count must be positive, got {point_count}")
    units = read_tlv_units(stream)
    summary = summarize_stream(units, profile.unit_type_roles)

    wanted = {
        profile.tqp_field: profile.descriptor(profile.tqp_field).unit_role,
        profile.tnsl_field: profile.descriptor(profile.tnsl_field).unit_role,
    }
    found: dict[str, int] = {}
    for unit in units:
        role = profile.role_of(unit.unit_type)
        pending = [name for name, r in wanted.items() if r == role and name not in found]
        if not pending:
            continue
        fields = extract_syntax_fields(unit, profile)
        for name in pending:
            if name in fields:
                found[name] = fields[name]

    for name in wanted:
        if name not in found:
            raise MissingParameterSet(
                f"no parsed unit carries required field {name!r}"
            )
    return FeatureVector(
        tqp=found[profile.tqp_field],
        tbpp=summary.attribute_payload_bits / point_count,
        tnsl=found[profile.tnsl_field],
        point_count=point_count,
        provenance=PROVENANCE_BITSTREAM,
    )


def load_sidecar(source: str | Path | dict) -> FeatureVector:
    """Build a FeatureVector from a sidecar document.

    The document must carry ``tqp``, ``tnsl`` and either ``tbpp`` directly
    or the pair ``attribute_bits``/``point_count``.  When both forms are
    present they must agree to 1e-9 relative.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)

    for key in ("tqp", "tnsl"):
        if key not in doc:
            raise MissingField(key)

    tbpp = doc.get("tbpp")
    bits = doc.get("attribute_bits")
    count = doc.get("point_count")
    if bits is not None and count is not None:
        if count <= 0:
            raise NonPositivePointCount(f"point count must be positive, got {count}")
        derived = bits / count
        if tbpp is not None and abs(derived - tbpp) > 1e-9 * max(abs(tbpp), 1.0):
            raise InconsistentTbpp(
                f"tbpp {tbpp} disagrees with attribute_bits/point_count {derived}"
            )
        tbpp = derived
    if tbpp is None:
        raise MissingField("tbpp")

    return FeatureVector(
        tqp=doc["tqp"],
        tbpp=tbpp,
        tnsl=doc["tnsl"],
        point_count=count,
        provenance=PROVENANCE_SIDECAR,
        content_id=doc.get("content_id"),
    )
