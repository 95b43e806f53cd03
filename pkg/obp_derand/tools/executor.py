"""
Builds generators, hitting sets and estimator registries from parsed specs.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

from obp_derand.combinat.designs import build_design
from obp_derand.combinat.small_bias import BiasGen
from obp_derand.evaluators.evaluator import TruthTable
from obp_derand.generators.assembly import DESK_PROFILE, assemble_iw_generator
from obp_derand.generators.nw import NwGen
from obp_derand.generators.prg import (
    EnumerationGen,
    ExplicitGen,
    HardFunction,
    Prg,
    SmallBiasPrg,
    ZerosGen,
)
from obp_derand.services.bbtest import HittingSet
from obp_derand.services.universal import EstimatorRegistry, constant_estimator, default_registry
from obp_derand.tools.definitions import (
    GeneratorFamily,
    GeneratorSpec,
    RegistryFamily,
    parse_generator_spec,
    parse_registry_spec,
)
from obp_derand.utils.config import CapacityError

logger = logging.getLogger(__name__)


class GeneratorBuildError(Exception):
    """Raised when a valid spec cannot produce a generator of the requested length."""


class GeneratorBuilder:
    """
    Turns a ``GeneratorSpec`` into a ``Prg`` with ``n`` output bits.

    Each family has its own ``_build_*`` method; capacity errors pass
    through untouched so callers can report the cap that was hit.
    """

    def build(self, spec: GeneratorSpec, n: int) -> Prg:
        try:
            g = self._build_inner(spec, n)
        except (GeneratorBuildError, CapacityError):
            raise
        except Exception as e:
            raise GeneratorBuildError(f"Building '{spec.family}' generator failed: {e}")
        if g.output_len != n:
            raise GeneratorBuildError(
                f"'{spec.family}' generator emits {g.output_len} bits, expected {n}"
            )
        logger.debug("Built %s generator: seed_len=%d n=%d", spec.family, g.seed_len, n)
        return g

    def _build_inner(self, spec: GeneratorSpec, n: int) -> Prg:
        family = GeneratorFamily(spec.family)
        params = spec.params
        if family == GeneratorFamily.ENUMERATE:
            return EnumerationGen(n)
        if family == GeneratorFamily.ZEROS:
            return ZerosGen(n)
        if family == GeneratorFamily.FILE:
            return ExplicitGen.from_file(Path(params["path"]))
        if family == GeneratorFamily.SMALLBIAS:
            return self._build_smallbias(params, n)
        if family == GeneratorFamily.NW:
            return self._build_nw(params, n)
        if family == GeneratorFamily.IW:
            return self._build_iw(params, n)
        raise GeneratorBuildError(f"Unknown family: {spec.family}")

    def _build_smallbias(self, params: Dict[str, Any], n: int) -> Prg:
        if "h" in params:
            return SmallBiasPrg(BiasGen(k=n, h=params["h"]))
        eps = params.get("eps", Fraction(1, 4))
        return SmallBiasPrg(BiasGen.for_bias(n, eps))

    def _build_nw(self, params: Dict[str, Any], n: int) -> Prg:
        f = TruthTable.from_bits(params["f"])
        s = params.get("s", f.input_len + 3)
        design = build_design(s, Fraction(f.input_len, s), n)
        return NwGen(design, f)

    def _build_iw(self, params: Dict[str, Any], n: int) -> Prg:
        f = HardFunction.from_bits(params["f"], "spec")
        profile = tuple(params["profile"].split("/")) if "profile" in params else DESK_PROFILE
        assembly = assemble_iw_generator(
            f,
            params.get("eps", Fraction(1, 2)),
            n,
            profile,
            nw_seed_len=params.get("s"),
        )
        return assembly.prg


_builder: Optional[GeneratorBuilder] = None


def get_builder() -> GeneratorBuilder:
    global _builder
    if _builder is None:
        _builder = GeneratorBuilder()
    return _builder


def build_generator(text: str, n: int) -> Prg:
    """
    Parse ``text`` and build the generator it names.

    Raises:
        GeneratorSpecError: If the spec is malformed
        GeneratorBuildError: If the generator cannot be built for length n
    """
    return get_builder().build(parse_generator_spec(text), n)


def build_hitting_set(text: str, n: int, eps: Any) -> HittingSet:
    return HittingSet.from_prg(build_generator(text, n), eps)


def build_registry(text: str) -> EstimatorRegistry:
    """``default`` is the reference estimator alone; ``constant:value=v`` plants v ahead of it."""
    spec = parse_registry_spec(text)
    if RegistryFamily(spec.family) == RegistryFamily.DEFAULT:
        return default_registry()
    registry = EstimatorRegistry()
    registry.register(f"constant({spec.params['value']})", constant_estimator(spec.params["value"]))
    reference = default_registry()
    for i in range(len(reference)):
        registry.register(*reference[i])
    return registry

