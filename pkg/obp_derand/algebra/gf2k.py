"""
GF(2^k) arithmetic, Reed-Solomon encoding and Berlekamp-Welch decoding.

Elements are Python ints whose bit i is the coefficient of X^i. The canonical
element listing is 0, 1, ..., 2^k - 1, so the first listed element is 0.
"""

import logging
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from obp_derand.utils.bits import parity

logger = logging.getLogger(__name__)

# Fields up to this degree get log/antilog tables and vectorized arithmetic.
TABLE_MAX_K = 16

RsWord = Tuple[int, ...]


class FieldError(Exception):
    """Raised for invalid field arguments (inverse of zero, dimension mismatch...)."""


# ------------------------- GF(2)[X] helpers -------------------------


def _degree(p: int) -> int:
    return p.bit_length() - 1


def _poly_mod(a: int, m: int) -> int:
    dm = _degree(m)
    while a and _degree(a) >= dm:
        a ^= m << (_degree(a) - dm)
    return a


def _poly_mulmod(a: int, b: int, m: int) -> int:
    """Carry-less product of ``a`` and ``b`` reduced modulo ``m``."""
    result = 0
    a = _poly_mod(a, m)
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a = _poly_mod(a << 1, m)
    return result


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def is_irreducible(poly: int) -> bool:
    """Irreducibility over GF(2): factor search up to degree 16, Ben-Or beyond."""
    k = _degree(poly)
    if k < 1:
        return False
    if k == 1:
        return True
    if k <= TABLE_MAX_K:
        for candidate in range(2, 1 << (k // 2 + 1)):
            if _poly_mod(poly, candidate) == 0:
                return False
        return True
    # Ben-Or: no factor of degree i divides poly iff gcd(poly, X^(2^i) - X) = 1
    x_power = 2
    for _ in range(k // 2):
        x_power = _poly_mulmod(x_power, x_power, poly)
        if _poly_gcd(poly, x_power ^ 2) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def first_irreducible(k: int) -> int:
    """Lexicographically first (numerically smallest) irreducible polynomial of degree k."""
    if k < 1:
        raise FieldError(f"Extension degree must be positive, got {k}")
    for poly in range(1 << k, 1 << (k + 1)):
        if is_irreducible(poly):
            return poly
    raise FieldError(f"No irreducible polynomial of degree {k}")  # unreachable


# ------------------------- the field -------------------------


class Field:
    """GF(2^k) with a fixed irreducible modulus."""

    def __init__(self, k: int, modulus: Optional[int] = None):
        if k < 1:
            raise FieldError(f"Extension degree must be positive, got {k}")
        self.k = k
        self.modulus = first_irreducible(k) if modulus is None else modulus
        if _degree(self.modulus) != k or not is_irreducible(self.modulus):
            raise FieldError(f"Modulus {self.modulus:#x} is not irreducible of degree {k}")
        self.size = 1 << k
        self._exp: Optional[np.ndarray] = None
        self._log: Optional[np.ndarray] = None
        if k <= TABLE_MAX_K:
            self._build_tables()

    def __repr__(self) -> str:
        return f"Field(k={self.k}, modulus={self.modulus:#x})"

    def _build_tables(self) -> None:
        order = self.size - 1
        if order == 1:
            self._exp = np.array([1, 1], dtype=np.int64)
            self._log = np.array([0, 0], dtype=np.int64)
            return
        for g in range(2, self.size):
            powers = [1]
            x = g
            while x != 1:
                powers.append(x)
                x = _poly_mulmod(x, g, self.modulus)
            if len(powers) == order:
                break
        exp = np.array(powers + powers, dtype=np.int64)
        log = np.zeros(self.size, dtype=np.int64)
        log[np.array(powers, dtype=np.int64)] = np.arange(order, dtype=np.int64)
        self._exp, self._log = exp, log
        logger.debug("Built GF(2^%d) tables with generator %#x", self.k, g)

    @property
    def has_tables(self) -> bool:
        return self._exp is not None

    def elements(self) -> range:
        return range(self.size)

    def check(self, x: int) -> int:
        if not 0 <= x < self.size:
            raise FieldError(f"{x:#x} is not an element of GF(2^{self.k})")
        return x

    # --- scalar arithmetic ---

    @staticmethod
    def add(x: int, y: int) -> int:
        return x ^ y

    def mul(self, x: int, y: int) -> int:
        if x == 0 or y == 0:
            return 0
        if self._exp is not None:
            return int(self._exp[self._log[x] + self._log[y]])
        return _poly_mulmod(x, y, self.modulus)

    def inv(self, x: int) -> int:
        if x == 0:
            raise FieldError("Zero has no multiplicative inverse")
        if self._exp is not None:
            order = self.size - 1
            return int(self._exp[(order - self._log[x]) % order])
        return self.pow(x, self.size - 2)

    def div(self, x: int, y: int) -> int:
        return self.mul(x, self.inv(y))

    def pow(self, x: int, e: int) -> int:
        """``x**e`` with ``0**0 == 1``; negative exponents invert."""
        if e < 0:
            return self.pow(self.inv(x), -e)
        if e == 0:
            return 1
        if x == 0:
            return 0
        if self._exp is not None:
            order = self.size - 1
            return int(self._exp[(self._log[x] * e) % order])
        result, base = 1, x
        while e:
            if e & 1:
                result = _poly_mulmod(result, base, self.modulus)
            base = _poly_mulmod(base, base, self.modulus)
            e >>= 1
        return result

    # --- vectorized arithmetic ---

    def mul_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise product of broadcastable int arrays of field elements."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self._exp is None:
            return np.vectorize(self.mul, otypes=[np.int64])(a, b)
        a, b = np.broadcast_arrays(a, b)
        out = self._exp[self._log[a] + self._log[b]]
        return np.where((a == 0) | (b == 0), 0, out)

    def pow_arrays(self, a: np.ndarray, e: int) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self._exp is None:
            return np.vectorize(lambda x: self.pow(int(x), e), otypes=[np.int64])(a)
        if e == 0:
            return np.ones_like(a)
        out = self._exp[(self._log[a] * e) % (self.size - 1)]
        return np.where(a == 0, 0, out)

    def vandermonde(self, points: Sequence[int], columns: int) -> np.ndarray:
        """Matrix with entry ``points[i] ** j`` for j < columns."""
        pts = np.asarray(points, dtype=np.int64)
        out = np.ones((len(pts), columns), dtype=np.int64)
        for j in range(1, columns):
            out[:, j] = self.mul_arrays(out[:, j - 1], pts)
        return out

    # --- element / bit-vector views ---

    def to_bits(self, x: int) -> List[int]:
        """Least-significant-first k-bit vector of ``x``."""
        return [(x >> i) & 1 for i in range(self.k)]

    def from_bits(self, bits: Sequence[int]) -> int:
        if len(bits) != self.k:
            raise FieldError(f"Expected {self.k} bits, got {len(bits)}")
        return sum(int(b) << i for i, b in enumerate(bits))

    def unit(self, i: int) -> int:
        """The element whose bit vector is e_i."""
        if not 0 <= i < self.k:
            raise FieldError(f"Unit index {i} outside 0..{self.k - 1}")
        return 1 << i

    @staticmethod
    def inner(x: int, y: int) -> int:
        """Inner product of the binary representations, over GF(2)."""
        return parity(x & y)

    def hex(self, x: int) -> str:
        return f"{x:0{(self.k + 3) // 4}x}"


@lru_cache(maxsize=None)
def get_field(k: int) -> Field:
    return Field(k)


# ------------------------- polynomials over F -------------------------


def poly_eval(f: Field, coeffs: Sequence[int], x: int) -> int:
    """Horner evaluation; ``coeffs[j]`` multiplies ``x**j``."""
    acc = 0
    for c in reversed(coeffs):
        acc = f.mul(acc, x) ^ c
    return acc


def poly_eval_many(f: Field, coeffs: Sequence[int], points: Sequence[int]) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64)
    acc = np.zeros_like(pts)
    for c in reversed(coeffs):
        acc = f.mul_arrays(acc, pts) ^ int(c)
    return acc


def poly_trim(coeffs: Sequence[int]) -> List[int]:
    out = [int(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return out


def poly_divmod(f: Field, num: Sequence[int], den: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Quotient and remainder of polynomial division over F."""
    den = poly_trim(den)
    if not den:
        raise FieldError("Polynomial division by zero")
    rem = poly_trim(num)
    lead_inv = f.inv(den[-1])
    quot = [0] * max(len(rem) - len(den) + 1, 0)
    while len(rem) >= len(den):
        shift = len(rem) - len(den)
        factor = f.mul(rem[-1], lead_inv)
        quot[shift] = factor
        for j, c in enumerate(den):
            rem[shift + j] ^= f.mul(factor, c)
        rem = poly_trim(rem)
    return quot, rem


def rs_encode(f: Field, coeffs: Sequence[int]) -> RsWord:
    """Evaluations of the polynomial at every field element in canonical order."""
    return tuple(int(v) for v in poly_eval_many(f, coeffs, list(f.elements())))


def lagrange_matrix(f: Field, nodes: Sequence[int]) -> np.ndarray:
    """Matrix M with ``M[z, j] = L_j(z)``, the Lagrange basis over ``nodes`` evaluated at z."""
    nodes = [f.check(int(h)) for h in nodes]
    if len(set(nodes)) != len(nodes):
        raise FieldError("Interpolation nodes must be distinct")
    z = np.arange(f.size, dtype=np.int64)
    out = np.ones((f.size, len(nodes)), dtype=np.int64)
    for j, h in enumerate(nodes):
        for other in nodes:
            if other == h:
                continue
            scale = f.inv(h ^ other)
            out[:, j] = f.mul_arrays(out[:, j], f.mul_arrays(z ^ other, scale))
    return out


def low_degree_extension(f: Field, nodes: Sequence[int], values: np.ndarray) -> np.ndarray:
    """
    Extend ``values`` on nodes^ℓ to the unique polynomial of individual degree
    < |nodes| on F^ℓ. ``values`` has shape ``(|nodes|,) * ℓ``; the result has
    shape ``(|F|,) * ℓ`` and agrees with ``values`` on the node grid.
    """
    table = np.asarray(values, dtype=np.int64)
    if any(dim != len(nodes) for dim in table.shape):
        raise FieldError(f"Values of shape {table.shape} do not match {len(nodes)} nodes")
    basis = lagrange_matrix(f, nodes)
    for axis in range(table.ndim):
        moved = np.moveaxis(table, axis, -1)
        extended = np.zeros(moved.shape[:-1] + (f.size,), dtype=np.int64)
        for z in range(f.size):
            acc = np.zeros(moved.shape[:-1], dtype=np.int64)
            for j in range(len(nodes)):
                acc ^= f.mul_arrays(moved[..., j], basis[z, j])
            extended[..., z] = acc
        table = np.moveaxis(extended, -1, axis)
    return table


# ------------------------- linear algebra -------------------------


def solve_linear(f: Field, a: Sequence[Sequence[int]], b: Sequence[int]) -> Optional[List[int]]:
    """
    Solve ``a · x = b`` by Gaussian elimination.

    Returns one solution (free variables set to 0) or None when the system is
    inconsistent.
    """
    mat = np.asarray(a, dtype=np.int64)
    rhs = np.asarray(b, dtype=np.int64)
    if mat.ndim != 2 or rhs.ndim != 1 or mat.shape[0] != rhs.shape[0]:
        raise FieldError(
            f"Dimension mismatch: matrix {mat.shape} against right-hand side {rhs.shape}"
        )
    if np.any((mat < 0) | (mat >= f.size)) or np.any((rhs < 0) | (rhs >= f.size)):
        raise FieldError(f"Entries outside GF(2^{f.k})")
    rows, cols = mat.shape
    aug = np.concatenate([mat, rhs[:, None]], axis=1)
    pivots: List[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nonzero = np.nonzero(aug[r:, c])[0]
        if nonzero.size == 0:
            continue
        p = r + int(nonzero[0])
        if p != r:
            aug[[r, p]] = aug[[p, r]]
        aug[r] = f.mul_arrays(aug[r], f.inv(int(aug[r, c])))
        factors = aug[:, c].copy()
        factors[r] = 0
        aug ^= f.mul_arrays(factors[:, None], aug[r][None, :])
        pivots.append(c)
        r += 1
    if np.any(aug[r:, cols] != 0):
        return None
    x = [0] * cols
    for i, c in enumerate(pivots):
        x[c] = int(aug[i, cols])
    return x


def mat_vec(f: Field, a: Sequence[Sequence[int]], x: Sequence[int]) -> List[int]:
    mat = np.asarray(a, dtype=np.int64)
    if mat.shape[1] == 0:
        return [0] * mat.shape[0]
    prods = f.mul_arrays(mat, np.asarray(x, dtype=np.int64)[None, :])
    return [int(v) for v in np.bitwise_xor.reduce(prods, axis=1)]


# ------------------------- Berlekamp-Welch -------------------------


def rs_decode(f: Field, word: Sequence[int], d: int) -> Optional[RsWord]:
    """
    Unique decoding of a Reed-Solomon word.

    Returns the codeword of the degree-≤d polynomial agreeing with ``word`` on
    at least (N+d)/2 positions, or None when no such polynomial exists.
    """
    n = f.size
    if len(word) != n:
        raise FieldError(f"Word has length {len(word)}, field has {n} elements")
    if not 0 <= d < n:
        raise FieldError(f"Degree bound {d} must lie in 0..{n - 1}")
    values = np.asarray([f.check(int(v)) for v in word], dtype=np.int64)
    e = (n - d - 1) // 2
    points = np.arange(n, dtype=np.int64)
    powers = f.vandermonde(points, e + d + 1)
    # Q(a_i) + b_i * (E_0 + ... + E_{e-1} a_i^{e-1}) = b_i * a_i^e
    q_part = powers
    e_part = f.mul_arrays(values[:, None], powers[:, :e])
    rhs = f.mul_arrays(values, powers[:, e])
    solution = solve_linear(f, np.concatenate([q_part, e_part], axis=1), rhs)
    if solution is None:
        return None
    q_coeffs = solution[: e + d + 1]
    locator = solution[e + d + 1 :] + [1]
    quotient, remainder = poly_divmod(f, q_coeffs, locator)
    if remainder or len(poly_trim(quotient)) > d + 1:
        return None
    codeword = rs_encode(f, quotient if quotient else [0])
    errors = sum(1 for got, want in zip(codeword, word) if got != int(want))
    if errors > e:
        return None
    return codeword
