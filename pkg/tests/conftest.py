import numpy as np
import pytest

from streampcq import default_params, load_profile, make_synthetic_dataset
from streampcq.bitstream import TlvUnit, encode_syntax_fields, serialize_tlv_units


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def profile():
    return load_profile("tmc13-v23")


@pytest.fixture(scope="session")
def clean_dataset(params):
    return make_synthetic_dataset(params, noise_sigma=0.0)


@pytest.fixture(scope="session")
def noisy_dataset(params):
    return make_synthetic_dataset(params, noise_sigma=3.0, seed=7)


def build_fixture_stream(profile, tqp=40, tnsl=3, attr_bytes=125_000,
                         geom_bytes=10_000, trisoup_enabled=1, include_aps=True,
                         seed=0):
    """Assemble a syntactically valid TLV stream for the given profile."""
    rng = np.random.default_rng(seed)
    units = []

    def add(unit_type, payload):
        offset = sum(len(u.payload) + 5 for u in units)
        units.append(TlvUnit(unit_type, payload, offset))

    add(0, encode_syntax_fields(profile, "sps", {"sps_seq_parameter_set_id": 0}))
    gps_values = {
        "gps_geom_parameter_set_id": 0,
        "gps_seq_parameter_set_id": 0,
        "trisoup_enabled_flag": trisoup_enabled,
    }
    if trisoup_enabled:
        gps_values["trisoup_node_size_log2_minus2"] = tnsl
    add(1, encode_syntax_fields(profile, "gps", gps_values))
    if include_aps:
        add(3, encode_syntax_fields(profile, "aps", {
            "aps_attr_parameter_set_id": 0,
            "aps_seq_parameter_set_id": 0,
            "attr_coding_type": 1,
            "aps_attr_initial_qp_minus4": tqp,
        }))
    add(2, rng.bytes(geom_bytes))
    add(4, rng.bytes(attr_bytes))
    return serialize_tlv_units(units)
