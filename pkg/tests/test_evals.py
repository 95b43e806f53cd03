from fractions import Fraction

import numpy as np

from evals import campaigns
from evals.utils.corpus import corrupt_positions, easy_functions, noisy_layers


def test_campaign_result_counts_failures() -> None:
    result = campaigns.CampaignResult("demo")
    assert not result.passed

    result.runs = 3
    assert result.passed
    for i in range(7):
        result.fail(f"case {i}")

    assert result.failures == 7
    assert len(result.examples) == 5
    assert result.to_dict()["passed"] is False


def test_scaled_counts_never_reach_zero() -> None:
    assert campaigns._count(500, Fraction(1, 100)) == 5
    assert campaigns._count(4, Fraction(1, 100)) == 1


def test_exact_oracle_campaigns_pass_on_small_corpora() -> None:
    rng = np.random.default_rng(1)

    for outcome in (
        campaigns.dp_agreement(rng, 20),
        campaigns.berlekamp_welch(rng, 10),
        campaigns.lctest_contract(rng, 10),
        campaigns.small_bias(rng),
    ):
        assert outcome.passed, outcome.examples


def test_render_marks_each_campaign() -> None:
    ok = campaigns.CampaignResult("ok", runs=1)
    bad = campaigns.CampaignResult("bad", runs=1)
    bad.fail("wrong estimate")

    text = campaigns._render([ok, bad], Fraction(1, 10))

    assert "- ok[Success]: 1 runs" in text
    assert "- bad[Fail]: 1 runs, 1 failures" in text
    assert "failure: wrong estimate" in text


def test_corpus_helpers() -> None:
    rng = np.random.default_rng(3)

    names = [name for name, _ in easy_functions(3, rng)]
    assert names == ["zero", "one", "first_bit", "parity", "random"]
    noisy = noisy_layers([[Fraction(0), Fraction(1)]], Fraction(1, 8), rng)
    assert all(0 <= p <= 1 for p in noisy[0])
    positions = corrupt_positions(rng, 16, 4, 16)
    assert len({p for p, _ in positions}) == 4
    assert all(1 <= e < 16 for _, e in positions)


def test_pipeline_and_chain_campaigns_pass_with_no_exceptions() -> None:
    rng = np.random.default_rng(2)

    never_wrong = campaigns.pipeline_never_wrong(rng, 5)
    chain = campaigns.full_chain(rng, 2)

    assert never_wrong.passed, never_wrong.examples
    assert never_wrong.notes["estimates"] + never_wrong.notes["refuters"] == never_wrong.runs
    assert chain.passed, chain.examples
    assert chain.notes["non_constant"] >= 1
