"""Descriptor-driven parameter-set syntax.

Parameter-set layouts differ between encoder releases, so the walk order,
coding kind and presence rules of each syntax field live in a profile (a
plain JSON document) instead of code.  Supporting a new encoder version
means shipping a new profile, not patching the parser.

A profile lists, per unit role, an ordered field table.  Each field is one
of four coding kinds: fixed-width unsigned (``u``), unsigned exp-Golomb
(``ue``), signed exp-Golomb (``se``) or a single-bit ``flag``.  A field may
carry a presence condition over previously decoded fields of the same unit
("only present when trisoup_enabled_flag == 1") and an additive offset for
``_minus_k`` style encodings.  Presence conditions see raw coded values,
before any offset is applied.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..exceptions import ProfileMismatch
from .bits import BitReader, BitWriter

KINDS = ("u", "ue", "se", "flag")

_CONDITION_RE = re.compile(
    r"^\s*(\w+)\s*(?:(==|!=|<=|>=|<|>)\s*(-?\d+)\s*)?$"
)


def _parse_condition(expr: str) -> list[tuple[str, str, int]]:
    """Parse 'name', 'name op int', or conjunctions joined with ' and '."""
    clauses = []
    for part in expr.split(" and "):
        m = _CONDITION_RE.match(part)
        if not m:
            raise ValueError(f"unsupported presence condition: {expr!r}")
        name, op, value = m.groups()
        clauses.append((name, op or "truthy", int(value) if value is not None else 0))
    return clauses


def _eval_condition(clauses, decoded: dict[str, int]) -> bool:
    for name, op, value in clauses:
        have = decoded.get(name)
        if have is None:
            return False
        if op == "truthy":
            ok = have != 0
        elif op == "==":
            ok = have == value
        elif op == "!=":
            ok = have != value
        elif op == "<":
            ok = have < value
        elif op == "<=":
            ok = have <= value
        elif op == ">":
            ok = have > value
        else:
            ok = have >= value
        if not ok:
            return False
    return True


@dataclass(frozen=True)
class FieldDescriptor:
    name: str
    unit_role: str
    kind: str
    width: int = 0  # bits, for kind == "u"
    when: str | None = None
    offset: int = 0  # added to the decoded value (e.g. +2 for a _minus2 field)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coding kind {self.kind!r} for {self.name}")
        if self.kind == "u" and not (1 <= self.width <= 64):
            raise ValueError(f"fixed-width field {self.name} needs width in 1..64")


@dataclass
class SyntaxDescriptorProfile:
    """Field tables plus the unit-type role map for one encoder version."""

    name: str
    unit_type_roles: dict[int, str]
    fields: list[FieldDescriptor]
    tqp_field: str = "tqp"
    tnsl_field: str = "tnsl"
    description: str = ""
    _by_role: dict[str, list[FieldDescriptor]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for f in self.fields:
            self._by_role.setdefault(f.unit_role, []).append(f)
        self._validate()

    def _validate(self) -> None:
        names = [f.name for f in self.fields]
        for key in (self.tqp_field, self.tnsl_field):
            if names.count(key) != 1:
                raise ValueError(
                    f"profile {self.name!r}: exactly one descriptor must define {key!r}"
                )
        # presence conditions may only look backwards within their unit
        for role, descriptors in self._by_role.items():
            seen: set[str] = set()
            for f in descriptors:
                if f.when:
                    for name, _, _ in _parse_condition(f.when):
                        if name not in seen:
                            raise ValueError(
                                f"field {f.name} in {role} references "
                                f"{name!r} before it is decoded"
                            )
                seen.add(f.name)

    def role_of(self, unit_type: int) -> str:
        return self.unit_type_roles.get(unit_type, "other")

    def fields_for_role(self, role: str) -> list[FieldDescriptor]:
        return self._by_role.get(role, [])

    def descriptor(self, name: str) -> FieldDescriptor:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntaxDescriptorProfile":
        fields = [
            FieldDescriptor(
                name=fd["name"],
                unit_role=fd["unit_role"],
                kind=fd["kind"],
                width=fd.get("width", 0),
                when=fd.get("when"),
                offset=fd.get("offset", 0),
            )
            for fd in doc["fields"]
        ]
        return cls(
            name=doc["name"],
            unit_type_roles={int(k): v for k, v in doc["unit_type_roles"].items()},
            fields=fields,
            tqp_field=doc["tqp_field"],
            tnsl_field=doc["tnsl_field"],
            description=doc.get("description", ""),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SyntaxDescriptorProfile":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def load_profile(name_or_path: str | Path = "tmc13-v23") -> SyntaxDescriptorProfile:
    """Load a profile shipped with the package, or from an explicit path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return SyntaxDescriptorProfile.from_json(path)
    ref = resources.files("streampcq.data.profiles").joinpath(f"{name_or_path}.json")
    with resources.as_file(ref) as p:
        if not p.exists():
            raise ValueError(f"no bundled profile named {name_or_path!r}")
        return SyntaxDescriptorProfile.from_json(p)


def extract_syntax_fields(unit, profile: SyntaxDescriptorProfile) -> dict[str, int]:
    """Decode the profile's fields from one unit payload.

    Fields decode in table order with an MSB-first reader; fields whose
    presence condition evaluates false are skipped and absent from the
    result.  Offsets are already applied to returned values.
    """
    role = profile.role_of(unit.unit_type)
    descriptors = profile.fields_for_role(role)
    if not descriptors:
        raise ProfileMismatch(
            f"profile {profile.name!r} has no fields for unit type "
            f"{unit.unit_type} (role {role!r})"
        )
    reader = BitReader(unit.payload)
    raw: dict[str, int] = {}
    out: dict[str, int] = {}
    for f in descriptors:
        if f.when and not _eval_condition(_parse_condition(f.when), raw):
            continue
        if f.kind == "u":
            value = reader.read_bits(f.width)
        elif f.kind == "flag":
            value = reader.read_bit()
        elif f.kind == "ue":
            value = reader.read_ue()
        else:
            value = reader.read_se()
        raw[f.name] = value
        out[f.name] = value + f.offset
    return out


def encode_syntax_fields(
    profile: SyntaxDescriptorProfile, role: str, values: dict[str, int]
) -> bytes:
    """Inverse of :func:`extract_syntax_fields`, used to build test
    fixtures and to self-validate a profile.  ``values`` holds final
    (offset-corrected) field values; fields whose presence condition fails
    are not written and must not be supplied."""
    writer = BitWriter()
    raw: dict[str, int] = {}
    for f in profile.fields_for_role(role):
        if f.when and not _eval_condition(_parse_condition(f.when), raw):
            if f.name in values:
                raise ValueError(f"field {f.name} suppressed by its presence condition")
            continue
        if f.name not in values:
            raise ValueError(f"missing value for field {f.name}")
        value = values[f.name] - f.offset
        raw[f.name] = value
        if f.kind == "u":
            writer.write_bits(value, f.width)
        elif f.kind == "flag":
            writer.write_bits(value, 1)
        elif f.kind == "ue":
            writer.write_ue(value)
        else:
            writer.write_se(value)
    return writer.to_bytes()
