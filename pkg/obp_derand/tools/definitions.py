"""
Generator and registry spec definitions.

A spec is a family name optionally followed by ``:key=value,key=value``,
e.g. ``enumerate``, ``file:path=hsg.txt``, ``smallbias:eps=1/16`` or
``nw:f=0110,s=6``. Each family declares its parameters with a small schema
so specs from the command line are checked before anything is built.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Tuple

from obp_derand.utils.bits import parse_bits


class GeneratorSpecError(Exception):
    """Raised for unknown families or malformed spec parameters."""


class GeneratorFamily(str, Enum):
    ENUMERATE = "enumerate"
    ZEROS = "zeros"
    FILE = "file"
    SMALLBIAS = "smallbias"
    NW = "nw"
    IW = "iw"


class RegistryFamily(str, Enum):
    DEFAULT = "default"
    CONSTANT = "constant"


GENERATOR_FAMILIES = [family.value for family in GeneratorFamily]

ENUMERATE_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.ENUMERATE.value,
    "description": "Every n-bit string once; expectations under it are exact.",
    "parameters": {"properties": {}, "required": []},
}

ZEROS_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.ZEROS.value,
    "description": "The single all-zeros output.",
    "parameters": {"properties": {}, "required": []},
}

FILE_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.FILE.value,
    "description": "Explicit outputs, one bit string per line.",
    "parameters": {
        "properties": {"path": {"type": "string", "description": "File with one output per line."}},
        "required": ["path"],
    },
}

SMALLBIAS_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.SMALLBIAS.value,
    "description": "Powering small-bias space over GF(2^h); give h directly or a target bias.",
    "parameters": {
        "properties": {
            "h": {"type": "integer", "description": "Field degree; seeds have 2h bits."},
            "eps": {"type": "fraction", "description": "Target bias; picks the smallest h."},
        },
        "required": [],
    },
}

NW_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.NW.value,
    "description": "Nisan-Wigderson generator from a truth table over a greedy design.",
    "parameters": {
        "properties": {
            "f": {"type": "bits", "description": "Truth table of the function, big-endian."},
            "s": {"type": "integer", "description": "Seed length; defaults to m + 3."},
        },
        "required": ["f"],
    },
}

IW_SPEC: Dict[str, Any] = {
    "name": GeneratorFamily.IW.value,
    "description": "The assembled hardness-based generator for a hard function.",
    "parameters": {
        "properties": {
            "f": {"type": "bits", "description": "Truth table of the hard function."},
            "profile": {"type": "string", "description": "Stages joined by '/': xor/gl/nw or rm/xor/gl/nw."},
            "eps": {"type": "fraction", "description": "Hardness exponent."},
            "s": {"type": "integer", "description": "NW seed length override."},
        },
        "required": ["f"],
    },
}

CONSTANT_REGISTRY_SPEC: Dict[str, Any] = {
    "name": RegistryFamily.CONSTANT.value,
    "description": "A constant-answer estimator registered ahead of the reference one.",
    "parameters": {
        "properties": {"value": {"type": "fraction", "description": "The planted answer."}},
        "required": ["value"],
    },
}

DEFAULT_REGISTRY_SPEC: Dict[str, Any] = {
    "name": RegistryFamily.DEFAULT.value,
    "description": "Only the reference estimator.",
    "parameters": {"properties": {}, "required": []},
}

_GENERATOR_SPECS: Dict[GeneratorFamily, Dict[str, Any]] = {
    GeneratorFamily.ENUMERATE: ENUMERATE_SPEC,
    GeneratorFamily.ZEROS: ZEROS_SPEC,
    GeneratorFamily.FILE: FILE_SPEC,
    GeneratorFamily.SMALLBIAS: SMALLBIAS_SPEC,
    GeneratorFamily.NW: NW_SPEC,
    GeneratorFamily.IW: IW_SPEC,
}

_REGISTRY_SPECS: Dict[RegistryFamily, Dict[str, Any]] = {
    RegistryFamily.DEFAULT: DEFAULT_REGISTRY_SPEC,
    RegistryFamily.CONSTANT: CONSTANT_REGISTRY_SPEC,
}


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: Dict[str, Any] = field(default_factory=dict)


def get_available_families() -> List[Dict[str, Any]]:
    return list(_GENERATOR_SPECS.values())


def get_family_schema(family: str) -> Dict[str, Any]:
    """
    Schema of a generator family.

    Raises:
        GeneratorSpecError: If the family is not known
    """
    try:
        key = GeneratorFamily(family)
    except ValueError:
        raise GeneratorSpecError(
            f"Generator family '{family}' not found. Available families: {GENERATOR_FAMILIES}"
        ) from None
    return _GENERATOR_SPECS[key]


def _coerce(name: str, kind: str, raw: str) -> Any:
    try:
        if kind == "integer":
            return int(raw)
        if kind == "fraction":
            return Fraction(raw)
        if kind == "bits":
            return parse_bits(raw)
        return raw
    except (ValueError, ZeroDivisionError) as e:
        raise GeneratorSpecError(f"Parameter '{name}' must be of type {kind}: {e}")


def validate_params(schema: Dict[str, Any], raw: Dict[str, str]) -> Dict[str, Any]:
    """Check required fields and convert values to their declared types."""
    properties = schema["parameters"]["properties"]
    for required in schema["parameters"]["required"]:
        if required not in raw:
            raise GeneratorSpecError(f"Missing required parameter '{required}' for '{schema['name']}'")
    params: Dict[str, Any] = {}
    for name, value in raw.items():
        if name not in properties:
            raise GeneratorSpecError(f"Unknown parameter '{name}' for '{schema['name']}'")
        params[name] = _coerce(name, properties[name]["type"], value)
    return params


def _split_spec(text: str) -> Tuple[str, Dict[str, str]]:
    head, _, tail = text.strip().partition(":")
    raw: Dict[str, str] = {}
    for item in filter(None, (part.strip() for part in tail.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise GeneratorSpecError(f"Expected key=value in spec '{text}', got '{item}'")
        raw[key.strip()] = value.strip()
    return head.strip(), raw


def parse_generator_spec(text: str) -> GeneratorSpec:
    family, raw = _split_spec(text)
    schema = get_family_schema(family)
    return GeneratorSpec(family, validate_params(schema, raw))


def parse_registry_spec(text: str) -> GeneratorSpec:
    family, raw = _split_spec(text)
    try:
        key = RegistryFamily(family)
    except ValueError:
        available = [f.value for f in RegistryFamily]
        raise GeneratorSpecError(
            f"Registry '{family}' not found. Available registries: {available}"
        ) from None
    return GeneratorSpec(family, validate_params(_REGISTRY_SPECS[key], raw))
