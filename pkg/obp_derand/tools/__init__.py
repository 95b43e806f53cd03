"""
Spec parsing and building for generators, hitting sets and estimator registries.
"""

from .definitions import GeneratorFamily, GeneratorSpecError, parse_generator_spec
from .executor import GeneratorBuildError, build_generator, build_hitting_set, build_registry

__all__ = [
    "GeneratorFamily",
    "GeneratorSpecError",
    "parse_generator_spec",
    "GeneratorBuildError",
    "build_generator",
    "build_hitting_set",
    "build_registry",
]
