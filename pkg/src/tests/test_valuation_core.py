"""
Valuation core: subsets, valuations, demand, winner selection, outcomes and
valuation-class checks.
"""

import itertools
import random

import numpy as np
import pytest

from modules.valuation_core import (
    DEFAULT_TIEBREAK,
    AuctionOutcome,
    ExplicitRanking,
    GridTooLargeError,
    Instance,
    InstanceTooLargeError,
    InvalidInstanceError,
    LexMask,
    MaxCardThenLexMask,
    Precedence,
    Valuation,
    ValuationClassError,
    ValuationKind,
    WinnerOracle,
    anonymous_sizes,
    buyer_utility,
    check_anonymous,
    check_concave_anonymous,
    check_gross_substitutes,
    check_size,
    check_submodular,
    compare_subsets,
    demand_set,
    efficient_allocation,
    format_subset,
    informative_price_levels,
    mask_of,
    max_sellers,
    members_of,
    select_winner,
    size_marginals,
    social_welfare,
    tiebreak_by_name,
    value,
)
from presets import named_instances as presets


# ============================================================================
# SUBSETS AND VALUATIONS
# ============================================================================

def test_mask_encoding():
    assert mask_of([0, 2]) == 0b101
    assert members_of(0b1101) == (0, 2, 3)
    assert members_of(0) == ()
    assert format_subset(0b110) == "{1, 2}"
    with pytest.raises(InvalidInstanceError):
        mask_of([-1])


def test_valuation_kinds_agree_on_the_same_function():
    anonymous = Valuation.anonymous([0, 3, 5, 6])
    additive = Valuation.additive([4, 1, 2])
    tabulated = Valuation.from_function(3, lambda q: [0, 3, 5, 6][bin(q).count("1")])

    assert anonymous.kind is ValuationKind.ANONYMOUS
    assert list(anonymous.table) == list(tabulated.table)
    assert value(anonymous, 0b011) == 5
    assert value(additive, 0b101) == 6
    assert additive(0b111) == 7
    assert additive.max_value == 7
    assert anonymous.table.dtype == np.int64


def test_valuation_rejects_bad_tables():
    with pytest.raises(InvalidInstanceError, match="empty set"):
        Valuation.explicit([1, 2])
    with pytest.raises(InvalidInstanceError):
        Valuation.explicit([0, 1, 2])
    with pytest.raises(InvalidInstanceError):
        Valuation(ValuationKind.ANONYMOUS, 2, (0, 1))
    with pytest.raises(InvalidInstanceError, match="integers"):
        Valuation.additive([1.5, 2])
    with pytest.raises(InvalidInstanceError):
        value(Valuation.additive([1, 1]), 0b100)


def test_instance_validates_costs():
    v = Valuation.additive([1, 1])
    with pytest.raises(InvalidInstanceError):
        Instance((1,), v)
    with pytest.raises(InvalidInstanceError):
        Instance((1, -1), v)
    assert Instance((0, 0), v).default_cap == 2


def test_seller_bound_is_configurable(monkeypatch):
    assert max_sellers() == 20
    monkeypatch.setenv("BAFO_MAX_SELLERS", "3")
    assert max_sellers() == 3
    with pytest.raises(InstanceTooLargeError):
        check_size(4)
    with pytest.raises(InstanceTooLargeError):
        Valuation.additive([1, 1, 1, 1])
    monkeypatch.setenv("BAFO_MAX_SELLERS", "50")
    assert max_sellers() == 20


# ============================================================================
# DEMAND AND WINNER SELECTION
# ============================================================================

def test_demand_set_of_cost_gap_at_uniform_price(gap4):
    demanded = demand_set(gap4.valuation, (2, 2, 2, 2))
    # empty set, four singletons, six pairs
    assert len(demanded) == 11
    assert demanded == sorted(demanded)
    assert 0 in demanded
    assert select_winner(gap4.valuation, (2, 2, 2, 2), MaxCardThenLexMask()) == 0b0011
    assert select_winner(gap4.valuation, (2, 2, 2, 2), LexMask()) == 0


def test_demand_set_is_never_empty():
    v = Valuation.additive([1, 1])
    assert demand_set(v, (5, 5)) == [0]
    assert buyer_utility(v, (5, 5), 0b11) == -8


def test_explicit_ranking_controls_ties():
    v = Valuation.anonymous([0, 1, 2])
    # everything ties at unit prices; rank {1} first
    ranking = ExplicitRanking(ranking=(2, 1, 3, 0))
    assert select_winner(v, (1, 1), ranking) == 2
    assert compare_subsets(ranking, 2, 0) is Precedence.LESS
    assert compare_subsets(DEFAULT_TIEBREAK, 0, 3) is Precedence.GREATER
    with pytest.raises(InvalidInstanceError):
        ExplicitRanking(ranking=(0, 1, 1, 3))
    with pytest.raises(InvalidInstanceError):
        compare_subsets(ranking, 1, 1)


def test_tiebreak_names():
    assert tiebreak_by_name("max-card-lex") is DEFAULT_TIEBREAK
    assert isinstance(tiebreak_by_name("lex-mask"), LexMask)
    ranked = tiebreak_by_name("ranking:3,2,1,0", 2)
    assert ranked.rank(3) == (0,)
    with pytest.raises(InvalidInstanceError):
        tiebreak_by_name("ranking:1,0", 2)
    with pytest.raises(InvalidInstanceError):
        tiebreak_by_name("coin-flip")


def test_winner_selection_is_independent_of_irrelevant_alternatives():
    """Removing non-selected subsets from a demand set never changes the choice"""
    rng = random.Random(7)
    for _ in range(1000):
        v = Valuation.explicit([0] + [rng.randint(0, 6) for _ in range(7)])
        prices = tuple(rng.randint(0, 3) for _ in range(3))
        demanded = demand_set(v, prices)
        chosen = select_winner(v, prices)
        assert chosen in demanded
        for other in demanded:
            assert DEFAULT_TIEBREAK.first([chosen, other]) == chosen


def _shifted_price_vectors(prices, winners, top):
    """Every vector that lowers (or keeps) winners' prices and raises (or keeps) losers' prices"""
    ranges = [
        range(0, p + 1) if winners >> i & 1 else range(p, top + 1)
        for i, p in enumerate(prices)
    ]
    return itertools.product(*ranges)


@pytest.mark.parametrize("tiebreak", [DEFAULT_TIEBREAK, LexMask()], ids=lambda tb: tb.name)
@pytest.mark.parametrize(
    "valuation",
    [
        Valuation.explicit([0, 3, 4, 6, 2, 5, 5, 8]),
        Valuation.explicit([0, 1, 1, 5, 1, 2, 2, 7]),
        Valuation.additive([2, 3, 1]),
        Valuation.anonymous([0, 3, 5, 6]),
    ],
    ids=["mixed", "complements", "additive", "concave"],
)
def test_winner_survives_cheaper_winners_and_dearer_losers(valuation, tiebreak):
    top = 5
    for prices in itertools.product(range(top + 1), repeat=3):
        winners = select_winner(valuation, prices, tiebreak)
        for shifted in _shifted_price_vectors(prices, winners, top):
            assert select_winner(valuation, shifted, tiebreak) == winners, (prices, shifted)


def test_winner_survives_random_price_shifts():
    rng = random.Random(31)
    for _ in range(1000):
        n = rng.randint(1, 4)
        v = Valuation.explicit([0] + [rng.randint(0, 8) for _ in range((1 << n) - 1)])
        tiebreak = rng.choice([DEFAULT_TIEBREAK, LexMask()])
        prices = tuple(rng.randint(0, 6) for _ in range(n))
        winners = select_winner(v, prices, tiebreak)
        shifted = tuple(
            p - rng.randint(0, p) if winners >> i & 1 else p + rng.randint(0, 4)
            for i, p in enumerate(prices)
        )
        assert select_winner(v, shifted, tiebreak) == winners, (v.values, prices, shifted)


def _rules_for(n):
    ranking = list(range(1 << n))
    random.Random(n).shuffle(ranking)
    return [MaxCardThenLexMask(), LexMask(), ExplicitRanking(ranking=tuple(ranking))]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_tiebreak_rules_are_strict_total_orders(n):
    masks = range(1 << n)
    for rule in _rules_for(n):
        before = {
            (q, r): compare_subsets(rule, q, r) is Precedence.LESS
            for q in masks for r in masks if q != r
        }
        for q, r in before:
            assert before[q, r] != before[r, q], (rule.name, q, r)
        for q, r, s in itertools.permutations(masks, 3):
            if before[q, r] and before[r, s]:
                assert before[q, s], (rule.name, q, r, s)
        best = rule.first(masks)
        assert all(before[best, m] for m in masks if m != best)


def test_winner_oracle_caches_by_price_vector(chop):
    oracle = WinnerOracle(chop.valuation)
    assert oracle((50, 10, 10)) == 0b110
    assert oracle([50, 10, 10]) == 0b110
    assert len(oracle) == 1


def test_efficient_allocation_and_welfare(chop):
    assert efficient_allocation(chop) == mask_of([presets.CHOP_A, presets.CHOP_B])
    assert social_welfare(chop, 0b110) == 80
    assert social_welfare(chop, 0b001) == 50


def test_outcome_settlement(chop):
    outcome = AuctionOutcome.settle(chop, 0b110, (60, 40, 10))
    assert outcome.payments == (0, 40, 10)
    assert outcome.buyer_cost == 50
    assert outcome.buyer_utility == 50
    assert outcome.seller_utilities == (0, 30, 0)
    assert outcome.welfare == 80
    assert outcome.to_dict()["winners"] == [1, 2]


# ============================================================================
# VALUATION CLASS CHECKS
# ============================================================================

def test_chopsticks_is_not_submodular_nor_anonymous(chop):
    submodular = check_submodular(chop.valuation)
    assert not submodular.passed
    assert submodular.witness["Q"] == []
    assert submodular.witness["R"] == [1]
    assert submodular.witness["i"] == 2

    anonymous = check_anonymous(chop.valuation)
    assert not anonymous.passed
    assert anonymous.witness["Q"] == [0]
    assert anonymous.witness["R"] == [1]
    with pytest.raises(ValuationClassError):
        anonymous_sizes(chop.valuation)


def test_cost_gap_class_checks(gap4):
    submodular = check_submodular(gap4.valuation)
    assert not submodular.passed
    assert submodular.witness["Q"] == [0, 1]
    assert submodular.witness["R"] == [0, 1, 2]
    assert submodular.witness["i"] == 3

    concave = check_concave_anonymous(gap4.valuation)
    assert not concave.passed
    assert concave.witness["k"] == 4
    assert concave.witness["marginals"] == [2, 2, 0, 2]


def test_concave_anonymous_passes():
    v = Valuation.anonymous(presets.CONCAVE_SIZES)
    assert check_concave_anonymous(v).passed
    assert check_submodular(v).passed
    assert size_marginals(presets.CONCAVE_SIZES) == (10, 8, 6, 4)


def test_anonymous_detection_on_explicit_tables():
    v = Valuation.from_function(3, lambda q: 2 * bin(q).count("1"))
    check = check_anonymous(v)
    assert check.passed
    assert check.data == (0, 2, 4, 6)


def test_informative_levels_of_chopsticks(chop):
    assert informative_price_levels(chop.valuation, chop.costs) == (0, 10, 50, 100, 101)


def test_gross_substitutes_fails_for_complements(chop):
    check = check_gross_substitutes(
        chop.valuation, 100, informative_price_levels(chop.valuation, chop.costs)
    )
    assert not check.passed
    assert set(check.witness) == {"p", "p_prime", "Q"}
    p, p_prime = check.witness["p"], check.witness["p_prime"]
    assert all(a <= b for a, b in zip(p, p_prime))


def test_gross_substitutes_holds_for_additive():
    check = check_gross_substitutes(Valuation.additive([2, 3]), 4)
    assert check.passed
    assert "grid" in check.note


def test_gross_substitutes_grid_guard(chop):
    with pytest.raises(GridTooLargeError):
        check_gross_substitutes(chop.valuation, 100)
