"""
Assembly of the hardness-based generator from a hard function.

The chain is driven by a stage profile ending in ``nw``:

    rm   f  -> f'   low-degree extension over H^ℓ followed by a Hadamard bit
    xor  f' -> f''  f' applied to each block of the derandomized direct product
    gl   f''-> f''' inner product of (f''(x), 1) with a fresh vector r
    nw   last table -> the Nisan-Wigderson generator

The desk profile skips ``rm``: for m <= 6 the XOR stage already recovers f
exactly. The constant 1 appended before the inner product keeps every
generator output bit balanced whatever f is.

Every intermediate truth table is kept so the reconstruction path can verify
each stage against exactly the function it was built from.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from obp_derand.algebra.gf2k import Field, get_field, low_degree_extension
from obp_derand.combinat.designs import Design, build_design, make_design
from obp_derand.combinat.expanders import circulant_expander
from obp_derand.evaluators.evaluator import TruthTable
from obp_derand.generators.direct_product import DirectProductGen
from obp_derand.generators.nw import NwGen
from obp_derand.generators.prg import GeneratorError, HardFunction
from obp_derand.utils.bits import all_inputs, parity_array
from obp_derand.utils.config import get_ledger, require_under_cap

logger = logging.getLogger(__name__)

PROFILES: Tuple[Tuple[str, ...], ...] = (
    ("rm", "xor", "gl", "nw"),
    ("xor", "gl", "nw"),
)
FULL_PROFILE = PROFILES[0]
DESK_PROFILE = PROFILES[1]

# Without the Reed-Muller stage the XOR stage hands back SUC > 0.99 on f itself,
# which is exact only while one wrong row costs more than 1/100.
DESK_MAX_BITS = 6


# ------------------------- Reed-Muller stage -------------------------


@dataclass(frozen=True)
class RmParams:
    """f on m bits -> f'(y, u) = <p(y), u> with y in F^ℓ and u in {0,1}^k."""

    m: int
    k: int
    h_bits: int
    ell: int

    @property
    def field(self) -> Field:
        return get_field(self.k)

    @property
    def h_size(self) -> int:
        return 1 << self.h_bits

    @property
    def degree(self) -> int:
        """Total degree of the extension: ℓ·(|H|-1)."""
        return self.ell * (self.h_size - 1)

    @property
    def m_1(self) -> int:
        return self.ell * self.k + self.k

    def embed(self, x: Sequence[int]) -> Tuple[int, ...]:
        """{0,1}^m -> H^ℓ: chunk j's bit t becomes bit t of the j-th element."""
        out = []
        for j in range(self.ell):
            value = 0
            for t in range(self.h_bits):
                pos = j * self.h_bits + t
                if pos < self.m:
                    value |= int(x[pos]) << t
            out.append(value)
        return tuple(out)

    def embed_matrix(self, inputs: np.ndarray) -> np.ndarray:
        out = np.zeros((inputs.shape[0], self.ell), dtype=np.int64)
        for j in range(self.ell):
            for t in range(self.h_bits):
                pos = j * self.h_bits + t
                if pos < self.m:
                    out[:, j] |= inputs[:, pos].astype(np.int64) << t
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "field_k": self.k,
            "field_modulus": self.field.modulus,
            "h_size": self.h_size,
            "ell": self.ell,
            "degree": self.degree,
            "m_1": self.m_1,
        }


def rm_params(m: int) -> RmParams:
    """Field of size about m^2, H of size about sqrt(|F|)."""
    if m < 1:
        raise GeneratorError(f"Hard function needs at least one input bit, got m={m}")
    k = max(1, (m * m - 1).bit_length())
    h_bits = max(1, k // 2)
    params = RmParams(m=m, k=k, h_bits=h_bits, ell=ceil(m / h_bits))
    if params.degree >= params.field.size:
        raise GeneratorError(f"Extension degree {params.degree} does not fit GF(2^{k})")
    return params


def rm_encode(f: TruthTable, params: RmParams) -> Tuple[TruthTable, np.ndarray]:
    """Return f' and the extension table p of shape (|F|,)*ℓ."""
    if f.input_len != params.m or f.output_len != 1:
        raise GeneratorError(f"Expected a boolean function on {params.m} bits")
    require_under_cap(2**params.m_1, "Reed-Muller stage table")
    grid = np.zeros((params.h_size,) * params.ell, dtype=np.int64)
    points = params.embed_matrix(all_inputs(params.m))
    grid[tuple(points.T)] = f.column(0)
    p = low_degree_extension(params.field, list(range(params.h_size)), grid)
    inputs = all_inputs(params.m_1).astype(np.int64)
    weights = np.left_shift(np.int64(1), np.arange(params.k, dtype=np.int64))
    coords = [inputs[:, j * params.k : (j + 1) * params.k] @ weights for j in range(params.ell)]
    u = inputs[:, params.ell * params.k :] @ weights
    rows = parity_array(p[tuple(coords)] & u)[:, None]
    return TruthTable(params.m_1, rows), p


# ------------------------- direct-product stage -------------------------


@dataclass(frozen=True)
class XorParams:
    m: int
    gamma: Fraction
    blocks: int
    s: int

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.m, self.s)

    @property
    def m_2(self) -> int:
        return self.s + self.m + 2 * self.blocks

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "gamma": str(self.gamma),
            "blocks": self.blocks,
            "s": self.s,
            "alpha": str(self.alpha),
            "m_2": self.m_2,
        }


def xor_params(m: int, gamma: Any, blocks: Optional[int] = None) -> XorParams:
    """
    Compact design: s = m + blocks - 1, so the blocks share a core of m - 1
    coordinates and differ in one. γ is raised to (m-1)/m when the requested
    value is below the overlap the design actually has.
    """
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise GeneratorError(f"gamma must lie in (0, 1], got {gamma}")
    if m < 1:
        raise GeneratorError(f"Direct product needs at least one input bit, got m={m}")
    blocks = blocks or get_ledger().xor_blocks
    overlap = Fraction(m - 1, m)
    return XorParams(m=m, gamma=max(gamma, overlap), blocks=blocks, s=m + blocks - 1)


def xor_generator(params: XorParams) -> DirectProductGen:
    design = build_design(params.s, params.alpha, params.blocks)
    return DirectProductGen(design, circulant_expander(params.m), params.blocks)


# ------------------------- Goldreich-Levin stage -------------------------


def gl_table(f: TruthTable) -> TruthTable:
    """g(x, r) = <f(x), r>, with r appended after x."""
    k = f.output_len
    require_under_cap(2 ** (f.input_len + k), "inner-product stage table")
    r = all_inputs(k).astype(np.int64)
    rows = (f.rows.astype(np.int64) @ r.T) % 2
    return TruthTable(f.input_len + k, rows.reshape(-1, 1).astype(np.uint8))


def with_unit_bit(f: TruthTable) -> TruthTable:
    """(f(x), 1): never zero, so <(f(x), 1), r> is balanced for every x."""
    ones = np.ones((f.rows.shape[0], 1), dtype=f.rows.dtype)
    return TruthTable(f.input_len, np.hstack([f.rows, ones]))


# ------------------------- assembly -------------------------


@dataclass(frozen=True)
class StageDescriptor:
    name: str
    input_len: int
    output_len: int
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "input_len": self.input_len,
            "output_len": self.output_len,
            "params": self.params,
        }


@dataclass
class IwAssembly:
    profile: Tuple[str, ...]
    hard: HardFunction
    eps: Fraction
    stages: List[StageDescriptor]
    tables: Dict[str, TruthTable]
    prg: NwGen
    rm: Optional[RmParams] = None
    xor: Optional[XorParams] = None
    direct_product: Optional[DirectProductGen] = None

    def table_before(self, stage: str) -> TruthTable:
        """The function a stage starts from."""
        idx = self.profile.index(stage)
        return self.tables["f"] if idx == 0 else self.tables[self.profile[idx - 1]]

    def stage(self, name: str) -> StageDescriptor:
        for descriptor in self.stages:
            if descriptor.name == name:
                return descriptor
        raise GeneratorError(f"Stage {name!r} is not part of profile {self.profile}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": list(self.profile),
            "eps": str(self.eps),
            "stages": [s.to_dict() for s in self.stages],
        }


def default_gamma(eps: Fraction) -> Fraction:
    """γ = c2·ρ with ρ = ε/c0."""
    ledger = get_ledger()
    return min(Fraction(1), ledger.c2 * eps / ledger.c0)


def default_nw_seed_len(m_last: int, n: int) -> int:
    """
    Smallest universe whose lexicographic design gives every set its own
    last index: a shared core of m_last - 1 indices plus one private index each.
    """
    return m_last - 1 + max(n, 1)


def assemble_iw_generator(
    f: HardFunction,
    eps: Any,
    n: int,
    profile: Sequence[str] = DESK_PROFILE,
    *,
    design: Optional[Design] = None,
    nw_seed_len: Optional[int] = None,
    gamma: Optional[Any] = None,
) -> IwAssembly:
    """
    Build the generator G with n output bits from f through the stages of ``profile``.

    Raises:
        GeneratorError: unknown profile or inconsistent parameters.
        CapacityError: a stage table or the NW seed space exceeds the cap.
    """
    profile = tuple(profile)
    if profile not in PROFILES:
        raise GeneratorError(f"Unknown stage profile {profile}; expected one of {PROFILES}")
    if "rm" not in profile and f.m > DESK_MAX_BITS:
        raise GeneratorError(
            f"Profile {profile} recovers f exactly only for m <= {DESK_MAX_BITS}, got m={f.m}"
        )
    eps = Fraction(eps)
    current = f.table
    tables: Dict[str, TruthTable] = {"f": current}
    stages: List[StageDescriptor] = []
    rm: Optional[RmParams] = None
    xp: Optional[XorParams] = None
    dp: Optional[DirectProductGen] = None
    prg: Optional[NwGen] = None

    for name in profile:
        if name == "rm":
            rm = rm_params(current.input_len)
            current, _ = rm_encode(current, rm)
            stages.append(StageDescriptor("rm", current.input_len, 1, rm.to_dict()))
        elif name == "xor":
            xp = xor_params(current.input_len, gamma if gamma is not None else default_gamma(eps))
            require_under_cap(2**xp.m_2, "direct-product stage table")
            dp = xor_generator(xp)
            current = dp.product_table(current)
            stages.append(StageDescriptor("xor", current.input_len, current.output_len, xp.to_dict()))
        elif name == "gl":
            k = current.output_len
            current = gl_table(with_unit_bit(current))
            stages.append(StageDescriptor("gl", current.input_len, 1, {"r_bits": k + 1, "unit_bit": True}))
        elif name == "nw":
            m_last = current.input_len
            s = nw_seed_len if nw_seed_len is not None else default_nw_seed_len(m_last, n)
            if design is None:
                require_under_cap(2**s, "NW seed enumeration")
                design = build_design(s, Fraction(m_last, s), n)
            if design.n != n or design.set_size != m_last:
                raise GeneratorError(
                    f"Design has {design.n} sets of size {design.set_size}, "
                    f"need {n} sets of size {m_last}"
                )
            require_under_cap(2**design.s, "NW seed enumeration")
            prg = NwGen(design, current)
            stages.append(
                StageDescriptor("nw", design.s, n, {"design": design.to_dict(), "m": m_last})
            )
        if name != "nw":
            tables[name] = current

    if prg is None:
        raise GeneratorError(f"Profile {profile} does not end with the NW stage")
    logger.info(
        "Assembled generator: profile=%s m=%d seed_len=%d n=%d",
        "/".join(profile),
        f.m,
        prg.seed_len,
        n,
    )
    return IwAssembly(profile, f, eps, stages, tables, prg, rm, xp, dp)


def repeated_design(m_last: int, n: int) -> Design:
    """n copies of the whole last-stage input: every output bit equals the first."""
    return make_design(m_last, 1, [tuple(range(m_last))] * n)


def assemble_repeated(f: HardFunction, eps: Any, n: int, profile: Sequence[str] = DESK_PROFILE) -> IwAssembly:
    """The assembled generator with ``repeated_design``; bit 1 is perfectly predictable from bit 0."""
    m_last = assemble_iw_generator(f, eps, 1, profile).tables["gl"].input_len
    return assemble_iw_generator(f, eps, n, profile, design=repeated_design(m_last, n))
