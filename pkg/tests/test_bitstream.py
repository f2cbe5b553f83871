import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streampcq.bitstream import (
    BitReader,
    BitWriter,
    FeatureVector,
    SyntaxDescriptorProfile,
    extract_features,
    extract_syntax_fields,
    load_profile,
    load_sidecar,
    read_tlv_units,
    serialize_tlv_units,
    summarize_stream,
)
from streampcq.bitstream.tlv import TlvUnit
from streampcq.exceptions import (
    BitstreamExhausted,
    EmptyStream,
    InconsistentTbpp,
    MalformedExpGolomb,
    MissingField,
    MissingParameterSet,
    NonPositivePointCount,
    ProfileMismatch,
    TruncatedUnit,
)

from conftest import build_fixture_stream


class TestTlvFraming:
    def test_minimal_frame(self):
        units = read_tlv_units(bytes([0x00, 0, 0, 0, 2, 0xAB, 0xCD]))
        assert len(units) == 1
        u = units[0]
        assert (u.unit_type, u.payload_length, u.payload, u.stream_offset) == \
            (0, 2, b"\xAB\xCD", 0)

    def test_empty_stream(self):
        with pytest.raises(EmptyStream):
            read_tlv_units(b"")

    def test_truncated_payload(self):
        with pytest.raises(TruncatedUnit) as exc:
            read_tlv_units(bytes([0x02, 0, 0, 0, 5, 0x01]))
        assert exc.value.offset == 0

    def test_truncated_header_of_second_unit(self):
        stream = bytes([0x00, 0, 0, 0, 1, 0xFF]) + bytes([0x01, 0, 0])
        with pytest.raises(TruncatedUnit) as exc:
            read_tlv_units(stream)
        assert exc.value.offset == 6

    def test_round_trip_identity(self):
        stream = build_fixture_stream(load_profile("tmc13-v23"))
        assert serialize_tlv_units(read_tlv_units(stream)) == stream

    @given(st.lists(
        st.tuples(st.integers(0, 255), st.binary(max_size=64)),
        min_size=1, max_size=8,
    ))
    @settings(max_examples=100)
    def test_round_trip_property(self, raw_units):
        stream = b"".join(
            bytes([t]) + len(p).to_bytes(4, "big") + p for t, p in raw_units
        )
        units = read_tlv_units(stream)
        assert [(u.unit_type, u.payload) for u in units] == raw_units
        assert serialize_tlv_units(units) == stream
        offsets = [u.stream_offset for u in units]
        assert offsets == sorted(offsets) and len(set(offsets)) == len(offsets)


class TestStreamSummary:
    type_map = {3: "aps", 4: "attribute_data", 2: "geometry_data"}

    def unit(self, t, n, offset=0):
        return TlvUnit(t, bytes(n), offset)

    def test_attribute_bits(self):
        units = [self.unit(4, 100), self.unit(4, 28)]
        assert summarize_stream(units, self.type_map).attribute_payload_bits == 1024

    def test_no_attribute_units(self):
        units = [self.unit(2, 50)]
        assert summarize_stream(units, self.type_map).attribute_payload_bits == 0

    def test_geometry_bits(self):
        units = [self.unit(2, 10), self.unit(2, 10), self.unit(2, 10), self.unit(4, 1)]
        summary = summarize_stream(units, self.type_map)
        assert summary.geometry_payload_bits == 240
        assert summary.units_by_type[2] == (3, 30)

    def test_unknown_types_counted_not_fatal(self):
        summary = summarize_stream([self.unit(250, 7)], self.type_map)
        assert summary.units_by_type[250] == (1, 7)
        assert summary.attribute_payload_bits == 0


class TestBitReader:
    def test_ue_of_single_one_bit_is_zero(self):
        assert BitReader(b"\x80").read_ue() == 0

    def test_ue_hand_decoded(self):
        # bits 00100: two leading zeros, then 1, then info bits 00
        # value = (1 << 2) - 1 + 0b00 = 3
        assert BitReader(b"\x20").read_ue() == 3

    def test_fixed_width(self):
        assert BitReader(b"\x2A").read_bits(8) == 42

    def test_se_mapping(self):
        w = BitWriter()
        for v in (0, 1, -1, 2, -2, 7, -7):
            w.write_se(v)
        r = BitReader(w.to_bytes())
        assert [r.read_se() for _ in range(7)] == [0, 1, -1, 2, -2, 7, -7]

    def test_exhausted(self):
        with pytest.raises(BitstreamExhausted):
            BitReader(b"\x00").read_bits(9)

    def test_malformed_exp_golomb(self):
        with pytest.raises(MalformedExpGolomb):
            BitReader(bytes(5)).read_ue()

    @given(st.integers(0, 2**31 - 2))
    @settings(max_examples=200)
    def test_ue_round_trip(self, value):
        w = BitWriter()
        w.write_ue(value)
        assert BitReader(w.to_bytes()).read_ue() == value

    def test_ue_round_trip_boundary(self):
        for value in (0, 1, 2, 255, 2**16, 2**31 - 2):
            w = BitWriter()
            w.write_ue(value)
            assert BitReader(w.to_bytes()).read_ue() == value


class TestProfile:
    def test_extract_fields_from_fixture(self, profile):
        stream = build_fixture_stream(profile, tqp=46, tnsl=5)
        units = read_tlv_units(stream)
        gps = next(u for u in units if u.unit_type == 1)
        fields = extract_syntax_fields(gps, profile)
        assert fields["trisoup_node_size_log2_minus2"] == 5  # offset applied
        aps = next(u for u in units if u.unit_type == 3)
        assert extract_syntax_fields(aps, profile)["aps_attr_initial_qp_minus4"] == 46

    def test_suppressed_field_absent(self, profile):
        stream = build_fixture_stream(profile, trisoup_enabled=0)
        gps = next(u for u in read_tlv_units(stream) if u.unit_type == 1)
        fields = extract_syntax_fields(gps, profile)
        assert "trisoup_node_size_log2_minus2" not in fields
        assert fields["trisoup_enabled_flag"] == 0

    def test_profile_mismatch(self, profile):
        with pytest.raises(ProfileMismatch):
            extract_syntax_fields(TlvUnit(9, b"\x00", 0), profile)

    def test_walk_past_payload_end(self, profile):
        with pytest.raises(BitstreamExhausted):
            extract_syntax_fields(TlvUnit(3, b"", 0), profile)

    def test_forward_reference_rejected(self):
        with pytest.raises(ValueError, match="before it is decoded"):
            SyntaxDescriptorProfile(
                name="bad",
                unit_type_roles={0: "sps"},
                fields=[
                    dict_field("a", "sps", "ue", when="b == 1"),
                    dict_field("b", "sps", "flag"),
                    dict_field("tqp", "sps", "ue"),
                    dict_field("tnsl", "sps", "ue"),
                ],
                tqp_field="tqp",
                tnsl_field="tnsl",
            )

    def test_tqp_field_must_exist_once(self):
        with pytest.raises(ValueError, match="exactly one descriptor"):
            SyntaxDescriptorProfile(
                name="bad",
                unit_type_roles={0: "sps"},
                fields=[dict_field("tnsl", "sps", "ue")],
                tqp_field="tqp",
                tnsl_field="tnsl",
            )

    def test_conjunction_presence_condition(self):
        from streampcq.bitstream import encode_syntax_fields
        profile = SyntaxDescriptorProfile(
            name="conj",
            unit_type_roles={0: "x"},
            fields=[
                dict_field("tqp", "x", "ue"),
                dict_field("tnsl", "x", "ue"),
                dict_field("mode", "x", "ue"),
                dict_field("extra", "x", "ue", when="mode >= 2 and tnsl != 0"),
            ],
            tqp_field="tqp",
            tnsl_field="tnsl",
        )
        with_extra = {"tqp": 40, "tnsl": 3, "mode": 2, "extra": 9}
        payload = encode_syntax_fields(profile, "x", with_extra)
        assert extract_syntax_fields(TlvUnit(0, payload, 0), profile) == with_extra

        without = {"tqp": 40, "tnsl": 3, "mode": 1}
        payload = encode_syntax_fields(profile, "x", without)
        decoded = extract_syntax_fields(TlvUnit(0, payload, 0), profile)
        assert "extra" not in decoded

    def test_randomized_field_table_round_trip(self):
        # fuzz encode -> decode across random tables mixing all coding kinds
        rng = np.random.default_rng(77)
        for trial in range(50):
            fields = [dict_field("tqp", "x", "ue"), dict_field("tnsl", "x", "ue")]
            for i in range(int(rng.integers(1, 8))):
                kind = ["u", "ue", "se", "flag"][int(rng.integers(0, 4))]
                width = int(rng.integers(1, 33)) if kind == "u" else 0
                offset = int(rng.integers(-4, 5)) if kind in ("u", "ue") else 0
                fields.append(dict_field(f"f{i}", "x", kind, width=width, offset=offset))
            profile = SyntaxDescriptorProfile(
                name=f"fuzz{trial}", unit_type_roles={7: "x"}, fields=fields,
                tqp_field="tqp", tnsl_field="tnsl",
            )
            values = {}
            for f in fields:
                if f.kind == "u":
                    values[f.name] = int(rng.integers(0, 1 << f.width)) + f.offset
                elif f.kind == "ue":
                    values[f.name] = int(rng.integers(0, 100000)) + f.offset
                elif f.kind == "se":
                    values[f.name] = int(rng.integers(-50000, 50000))
                else:
                    values[f.name] = int(rng.integers(0, 2))
            from streampcq.bitstream import encode_syntax_fields
            payload = encode_syntax_fields(profile, "x", values)
            decoded = extract_syntax_fields(TlvUnit(7, payload, 0), profile)
            assert decoded == values


def dict_field(name, role, kind, **kw):
    from streampcq.bitstream import FieldDescriptor
    return FieldDescriptor(name=name, unit_role=role, kind=kind, **kw)


class TestExtractFeatures:
    def test_constructed_fixture(self, profile):
        stream = build_fixture_stream(profile, tqp=40, tnsl=3, attr_bytes=125_000)
        fv = extract_features(stream, profile, point_count=500_000)
        assert fv.tqp == 40
        assert fv.tbpp == 2.0
        assert fv.tnsl == 3
        assert fv.provenance == "parsed-from-bitstream"

    def test_zero_point_count(self, profile):
        stream = build_fixture_stream(profile)
        with pytest.raises(NonPositivePointCount):
            extract_features(stream, profile, point_count=0)

    def test_grid_of_encoder_settings(self, profile):
        for tqp in (28, 34, 40, 46, 51):
            for tnsl in (3, 4, 5, 6):
                stream = build_fixture_stream(profile, tqp=tqp, tnsl=tnsl,
                                              attr_bytes=1000, geom_bytes=100)
                fv = extract_features(stream, profile, point_count=4000)
                assert (fv.tqp, fv.tnsl) == (tqp, tnsl)

    def test_missing_parameter_set(self, profile):
        stream = build_fixture_stream(profile, include_aps=False)
        with pytest.raises(MissingParameterSet):
            extract_features(stream, profile, point_count=1000)

    def test_trisoup_disabled_means_no_tnsl(self, profile):
        stream = build_fixture_stream(profile, trisoup_enabled=0)
        with pytest.raises(MissingParameterSet):
            extract_features(stream, profile, point_count=1000)

    def test_pure_function_of_inputs(self, profile):
        stream = build_fixture_stream(profile, tqp=34, tnsl=4, attr_bytes=7777)
        a = extract_features(stream, profile, point_count=12_345)
        b = extract_features(stream, profile, point_count=12_345)
        assert a == b

    def test_tbpp_times_count_equals_bits(self, profile):
        attr_bytes = 7_771
        stream = build_fixture_stream(profile, attr_bytes=attr_bytes)
        n = 1_234
        fv = extract_features(stream, profile, point_count=n)
        assert fv.tbpp * n == 8 * attr_bytes


class TestSidecar:
    def test_direct_tbpp(self):
        fv = load_sidecar({"tqp": 28, "tbpp": 1.5, "tnsl": 4})
        assert (fv.tqp, fv.tbpp, fv.tnsl) == (28, 1.5, 4)
        assert fv.provenance == "sidecar"

    def test_bits_and_count(self):
        fv = load_sidecar({"tqp": 28, "attribute_bits": 3_000_000,
                           "point_count": 2_000_000, "tnsl": 4})
        assert fv.tbpp == 1.5

    def test_missing_tbpp(self):
        with pytest.raises(MissingField, match="tbpp"):
            load_sidecar({"tqp": 28, "tnsl": 4})

    def test_missing_tqp(self):
        with pytest.raises(MissingField, match="tqp"):
            load_sidecar({"tbpp": 1.0, "tnsl": 4})

    def test_inconsistent_forms(self):
        with pytest.raises(InconsistentTbpp):
            load_sidecar({"tqp": 28, "tbpp": 2.0, "attribute_bits": 3_000_000,
                          "point_count": 2_000_000, "tnsl": 4})

    def test_consistent_forms_accepted(self):
        fv = load_sidecar({"tqp": 28, "tbpp": 1.5, "attribute_bits": 3_000_000,
                           "point_count": 2_000_000, "tnsl": 4})
        assert fv.tbpp == 1.5

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "sidecar.json"
        path.write_text('{"tqp": 40, "tbpp": 0.5, "tnsl": 3, "content_id": "x"}')
        fv = load_sidecar(path)
        assert fv.content_id == "x"


class TestFeatureVectorInvariants:
    def test_rejects_nonpositive_tbpp(self):
        with pytest.raises(ValueError):
            FeatureVector(tqp=40, tbpp=0.0, tnsl=3)

    def test_rejects_nonpositive_tqp(self):
        with pytest.raises(ValueError):
            FeatureVector(tqp=0, tbpp=1.0, tnsl=3)

    def test_rejects_negative_tnsl(self):
        with pytest.raises(ValueError):
            FeatureVector(tqp=40, tbpp=1.0, tnsl=-1)
