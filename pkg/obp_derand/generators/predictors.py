"""Planted next-bit predictors and the programs that distinguish with them."""

import logging
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from obp_derand.evaluators.evaluator import Table
from obp_derand.generators.prg import GeneratorError, Prg
from obp_derand.programs.obp import Edge, Obp, make_obp
from obp_derand.utils.bits import row_indices
from obp_derand.utils.config import require_under_cap

logger = logging.getLogger(__name__)


def bayes_next_bit_predictor(g: Prg, bit_index: int) -> Table:
    """
    The optimal predictor of output bit ``bit_index`` from the bits before it.

    Each prefix is mapped to the more frequent next bit among the seeds that
    produce it (ties and unseen prefixes give 0).
    """
    if not 0 <= bit_index < g.output_len:
        raise GeneratorError(f"Bit {bit_index} outside a {g.output_len}-bit output")
    require_under_cap(2**bit_index, "predictor table")
    outputs = g.output_matrix
    prefixes = row_indices(outputs[:, :bit_index])
    nxt = outputs[:, bit_index].astype(bool)
    size = 2**bit_index
    ones = np.bincount(prefixes[nxt], minlength=size)
    zeros = np.bincount(prefixes[~nxt], minlength=size)
    rows = (ones > zeros).astype(np.uint8)[:, None]
    return Table(bit_index, rows)


def bayes_advantage(g: Prg, bit_index: int) -> Fraction:
    """Success of the Bayes predictor minus 1/2."""
    outputs = g.output_matrix
    prefixes = row_indices(outputs[:, :bit_index])
    nxt = outputs[:, bit_index].astype(bool)
    size = 2**bit_index
    ones = np.bincount(prefixes[nxt], minlength=size)
    zeros = np.bincount(prefixes[~nxt], minlength=size)
    hits = int(np.maximum(ones, zeros).sum())
    return Fraction(hits, outputs.shape[0]) - Fraction(1, 2)


def best_next_bit_predictor(g: Prg, max_prefix: int = 16) -> Tuple[int, Table, Fraction]:
    """The lowest bit index whose Bayes predictor reaches the largest advantage."""
    best: Tuple[int, Fraction] = (0, Fraction(-1))
    for i in range(min(g.output_len, max_prefix + 1)):
        adv = bayes_advantage(g, i)
        if adv > best[1]:
            best = (i, adv)
    i, adv = best
    logger.info("Best planted predictor reads %d bits, advantage %s", i, adv)
    return i, bayes_next_bit_predictor(g, i), adv


def distinguisher_program(predictions: Sequence[int], n: int) -> Obp:
    """
    Program of length n that remembers its first i bits, where 2^i predictions
    are given, and accepts iff bit i+1 matches the prediction for that prefix.

    Under uniform input it accepts with probability exactly 1/2.
    """
    size = len(predictions)
    i = max(size.bit_length() - 1, 0)
    if 2**i != size:
        raise GeneratorError(f"{size} predictions do not cover a prefix length")
    if n <= i:
        raise GeneratorError(f"Program of length {n} cannot read bit {i + 1}")
    widths = [2**j for j in range(i + 1)] + [2] * (n - i)
    edges: List[List[Edge]] = []
    for j in range(i):
        edges.append([(2 * u, 2 * u + 1) for u in range(2**j)])
    edges.append([(int(p == 0), int(p == 1)) for p in predictions])
    for _ in range(n - i - 1):
        edges.append([(0, 0), (1, 1)])
    return make_obp(widths, edges, [0, 1])
