from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obp_derand.algebra.gf2k import (
    Field,
    FieldError,
    get_field,
    is_irreducible,
    lagrange_matrix,
    low_degree_extension,
    poly_eval,
    rs_decode,
    rs_encode,
    solve_linear,
)


def test_gf4_multiplication_table() -> None:
    f = get_field(2)

    # X^2 = X + 1 in GF(4)
    assert f.mul(2, 2) == 3
    assert f.mul(2, 3) == 1
    assert f.inv(3) == 2


def test_every_nonzero_element_has_an_inverse() -> None:
    f = get_field(5)

    for x in range(1, f.size):
        assert f.mul(x, f.inv(x)) == 1


def test_inverse_of_zero_raises() -> None:
    with pytest.raises(FieldError):
        get_field(3).inv(0)


def test_reducible_modulus_is_rejected() -> None:
    assert not is_irreducible(0b101)
    with pytest.raises(FieldError):
        Field(2, modulus=0b101)


def test_vectorized_and_scalar_products_agree() -> None:
    f = get_field(4)
    a = np.arange(f.size)
    table = f.mul_arrays(a[:, None], a[None, :])

    for x in range(f.size):
        for y in range(f.size):
            assert table[x, y] == f.mul(x, y)


def test_large_field_without_tables_still_multiplies() -> None:
    f = Field(20)

    assert not f.has_tables
    x = 0x5A5A5
    assert f.mul(x, f.inv(x)) == 1
    assert f.pow(x, 3) == f.mul(x, f.mul(x, x))


def test_bit_vector_views_are_least_significant_first() -> None:
    f = get_field(3)

    assert f.to_bits(6) == [0, 1, 1]
    assert f.from_bits([0, 1, 1]) == 6
    assert f.unit(2) == 4
    assert f.inner(0b110, 0b011) == 1


def test_lagrange_basis_is_identity_on_nodes() -> None:
    f = get_field(3)
    nodes = [0, 1, 2, 3]
    basis = lagrange_matrix(f, nodes)

    for j, h in enumerate(nodes):
        assert list(basis[h]) == [1 if i == j else 0 for i in range(len(nodes))]


def test_low_degree_extension_agrees_on_grid() -> None:
    f = get_field(4)
    values = np.array([[1, 0], [0, 1]])
    extended = low_degree_extension(f, [0, 1], values)

    assert extended.shape == (16, 16)
    assert extended[0, 0] == 1 and extended[1, 1] == 1
    assert extended[0, 1] == 0 and extended[1, 0] == 0
    # individual degree 1: p(x, y) = 1 + x + y, so p(x, y) = x ^ y ^ 1
    assert extended[5, 9] == 5 ^ 9 ^ 1


def test_solve_linear_reports_inconsistent_systems() -> None:
    f = get_field(2)

    assert solve_linear(f, [[1, 1], [1, 1]], [1, 2]) is None
    assert solve_linear(f, [[1, 0], [0, 3]], [2, 1]) == [2, f.inv(3)]


def test_encode_evaluates_at_every_field_element() -> None:
    f = get_field(3)
    coeffs = [3, 0, 5]

    assert rs_encode(f, coeffs) == tuple(poly_eval(f, coeffs, x) for x in range(8))


@pytest.mark.parametrize("d", [1, 2])
def test_decode_corrects_every_pattern_within_radius(d: int) -> None:
    f = get_field(3)
    rng = np.random.default_rng(d)
    codeword = rs_encode(f, [int(c) for c in rng.integers(0, 8, size=d + 1)])
    radius = (f.size - d - 1) // 2

    for weight in range(radius + 1):
        for positions in combinations(range(f.size), weight):
            word = list(codeword)
            for p in positions:
                word[p] ^= 1 + (p % 7)
            assert rs_decode(f, word, d) == codeword


def test_decode_returns_none_beyond_the_radius() -> None:
    f = get_field(3)
    # A word agreeing with no degree-1 polynomial on 6 or more positions.
    word = [0, 1, 2, 4, 0, 1, 2, 4]

    assert rs_decode(f, word, 1) is None


def test_decode_rejects_wrong_length_and_degree() -> None:
    f = get_field(2)
    with pytest.raises(FieldError):
        rs_decode(f, [0, 1, 2], 1)
    with pytest.raises(FieldError):
        rs_decode(f, [0, 1, 2, 3], 4)


@settings(max_examples=30, deadline=None)
@given(
    d=st.integers(min_value=0, max_value=20),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_decode_recovers_random_codewords_of_gf64(d: int, seed: int) -> None:
    f = get_field(6)
    rng = np.random.default_rng(seed)
    codeword = rs_encode(f, [int(c) for c in rng.integers(0, 64, size=d + 1)])
    weight = int(rng.integers(0, (64 - d - 1) // 2 + 1))
    word = list(codeword)
    for p in rng.choice(64, size=weight, replace=False):
        word[int(p)] ^= int(rng.integers(1, 64))

    assert rs_decode(f, word, d) == codeword
