from .bits import BitReader, BitWriter
from .features import (
    PROVENANCE_BITSTREAM,
    PROVENANCE_SIDECAR,
    FeatureVector,
    extract_features,
    load_sidecar,
)
from .profile import (
    FieldDescriptor,
    SyntaxDescriptorProfile,
    encode_syntax_fields,
    extract_syntax_fields,
    load_profile,
)
from .tlv import (
    StreamSummary,
    TlvUnit,
    read_tlv_units,
    serialize_tlv_units,
    summarize_stream,
)

__all__ = [
    "BitReader",
    "BitWriter",
    "FeatureVector",
    "FieldDescriptor",
    "PROVENANCE_BITSTREAM",
    "PROVENANCE_SIDECAR",
    "StreamSummary",
    "SyntaxDescriptorProfile",
    "TlvUnit",
    "encode_syntax_fields",
    "extract_features",
    "extract_syntax_fields",
    "load_profile",
    "load_sidecar",
    "read_tlv_units",
    "serialize_tlv_units",
    "summarize_stream",
]
