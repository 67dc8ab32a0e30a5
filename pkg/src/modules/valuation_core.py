"""
Valuation Core Module

Buyer valuations over seller subsets, demand sets, tie-breaking rules, winner
selection, welfare and the valuation-class checkers shared by both auction
formats.

Subsets of sellers are encoded as integer bit masks (bit i = seller i). All
money is integral, so every comparison below is exact.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from itertools import product
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


# ============================================================================
# CONFIGURATION
# ============================================================================

HARD_MAX_SELLERS = 20
DEFAULT_GS_GRID_LIMIT = 2_000_000

Money = int
SellerId = int
SellerSubset = int
PriceVector = Tuple[Money, ...]


def max_sellers() -> int:
    """Exhaustive-enumeration bound (BAFO_MAX_SELLERS, never above 20)."""
    configured = int(os.getenv("BAFO_MAX_SELLERS", HARD_MAX_SELLERS))
    return max(1, min(configured, HARD_MAX_SELLERS))


def gs_grid_limit() -> int:
    return int(os.getenv("BAFO_GS_GRID_LIMIT", DEFAULT_GS_GRID_LIMIT))


# ============================================================================
# ERRORS
# ============================================================================

class BafoError(Exception):
    """Base class for every error raised by the auction engine"""


class InvalidInstanceError(BafoError, ValueError):
    """Malformed valuation, cost vector, price vector or auction parameter"""


class InstanceTooLargeError(BafoError):
    """Seller count above the exhaustive-enumeration bound"""

    def __init__(self, n: int, bound: int):
        super().__init__(
            f"instance too large: n = {n} sellers exceeds the exhaustive "
            f"enumeration bound of {bound}"
        )
        self.n = n
        self.bound = bound


class WorkBudgetExceededError(BafoError):
    """Exact solver state space above the configured work budget"""

    def __init__(self, what: str, required: int, budget: int):
        super().__init__(
            f"{what} needs a work budget of {required:,} nodes but the budget is "
            f"{budget:,} (raise it with BAFO_WORK_BUDGET or --budget)"
        )
        self.what = what
        self.required = required
        self.budget = budget


class GridTooLargeError(BafoError):
    """Gross substitutes price grid above the configured limit"""

    def __init__(self, points: int, limit: int):
        super().__init__(
            f"gross substitutes grid has {points:,} price pairs, limit is {limit:,}"
        )
        self.points = points
        self.limit = limit


class IllegalMoveError(BafoError):
    """Action not permitted in the current auction state"""


class ValuationClassError(BafoError):
    """Valuation does not belong to the class an operation requires"""


# ============================================================================
# SUBSETS
# ============================================================================

def mask_of(members: Iterable[SellerId]) -> SellerSubset:
    """Encode a collection of seller ids as a bit mask"""
    mask = 0
    for i in members:
        if i < 0:
            raise InvalidInstanceError(f"negative seller id {i}")
        mask |= 1 << i
    return mask


def members_of(mask: SellerSubset) -> Tuple[SellerId, ...]:
    """Decode a bit mask into the sorted tuple of seller ids"""
    members = []
    i = 0
    while mask:
        if mask & 1:
            members.append(i)
        mask >>= 1
        i += 1
    return tuple(members)


def popcount(mask: SellerSubset) -> int:
    return bin(mask).count("1")


def full_mask(n: int) -> SellerSubset:
    return (1 << n) - 1


def format_subset(mask: SellerSubset) -> str:
    return "{" + ", ".join(str(i) for i in members_of(mask)) + "}"


def check_size(n: int) -> None:
    bound = max_sellers()
    if n > bound:
        raise InstanceTooLargeError(n, bound)


def _subset_sums(weights: Sequence[int]) -> np.ndarray:
    """Sum of weights over every subset, indexed by mask"""
    sums = np.zeros(1, dtype=np.int64)
    for w in weights:
        sums = np.concatenate([sums, sums + int(w)])
    return sums


@lru_cache(maxsize=None)
def _popcounts(n: int) -> np.ndarray:
    return _subset_sums([1] * n)


# ============================================================================
# VALUATIONS
# ============================================================================

class ValuationKind(str, Enum):
    EXPLICIT = "explicit"
    ANONYMOUS = "anonymous"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class Valuation:
    """
    Integer-valued set function over seller subsets.

    Attributes:
        kind: explicit table, anonymous (value by subset size) or additive
        n: number of sellers
        values: explicit: 2^n entries by mask; anonymous: n+1 entries by size;
            additive: n per-seller weights
    """

    kind: ValuationKind
    n: int
    values: Tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInstanceError("a valuation needs at least one seller")
        check_size(self.n)
        object.__setattr__(self, "kind", ValuationKind(self.kind))
        object.__setattr__(self, "values", tuple(self.values))
        if any(isinstance(x, bool) or not isinstance(x, (int, np.integer)) for x in self.values):
            raise InvalidInstanceError("valuation entries must be integers")
        object.__setattr__(self, "values", tuple(int(x) for x in self.values))

        expected = {
            ValuationKind.EXPLICIT: 1 << self.n,
            ValuationKind.ANONYMOUS: self.n + 1,
            ValuationKind.ADDITIVE: self.n,
        }[self.kind]
        if len(self.values) != expected:
            raise InvalidInstanceError(
                f"{self.kind.value} valuation over {self.n} sellers needs "
                f"{expected} values, got {len(self.values)}"
            )
        if self.kind is not ValuationKind.ADDITIVE and self.values[0] != 0:
            raise InvalidInstanceError("v(empty set) must be 0")

    @classmethod
    def explicit(cls, values: Sequence[int]) -> "Valuation":
        size = len(values)
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise InvalidInstanceError(
                f"explicit valuation needs 2^n values, got {size}"
            )
        return cls(ValuationKind.EXPLICIT, n, tuple(values))

    @classmethod
    def anonymous(cls, by_size: Sequence[int]) -> "Valuation":
        return cls(ValuationKind.ANONYMOUS, len(by_size) - 1, tuple(by_size))

    @classmethod
    def additive(cls, weights: Sequence[int]) -> "Valuation":
        return cls(ValuationKind.ADDITIVE, len(weights), tuple(weights))

    @classmethod
    def from_function(cls, n: int, fn: Callable[[SellerSubset], int]) -> "Valuation":
        """Tabulate an arbitrary set function given on masks"""
        check_size(n)
        return cls(ValuationKind.EXPLICIT, n, tuple(int(fn(m)) for m in range(1 << n)))

    @cached_property
    def table(self) -> np.ndarray:
        """v(Q) for every mask Q, as an int64 array of length 2^n"""
        if self.kind is ValuationKind.EXPLICIT:
            return np.asarray(self.values, dtype=np.int64)
        if self.kind is ValuationKind.ANONYMOUS:
            return np.asarray(self.values, dtype=np.int64)[_popcounts(self.n)]
        return _subset_sums(self.values)

    @cached_property
    def max_value(self) -> int:
        return int(self.table.max())

    def __call__(self, mask: SellerSubset) -> int:
        return value(self, mask)


def value(v: Valuation, subset: SellerSubset) -> int:
    """
    Value of a seller subset

    Args:
        v: Valuation
        subset: Seller subset as a bit mask

    Returns:
        v(subset)
    """
    if subset < 0 or subset >> v.n:
        raise InvalidInstanceError(
            f"subset {subset:#b} is outside the {v.n} sellers of this valuation"
        )
    if v.kind is ValuationKind.ANONYMOUS:
        return v.values[popcount(subset)]
    if v.kind is ValuationKind.ADDITIVE:
        return sum(v.values[i] for i in members_of(subset))
    return v.values[subset]


# ============================================================================
# INSTANCES AND OUTCOMES
# ============================================================================

def check_prices(n: int, prices: Sequence[int], what: str = "price vector") -> PriceVector:
    prices = tuple(int(p) for p in prices)
    if len(prices) != n:
        raise InvalidInstanceError(f"{what} has {len(prices)} entries, expected {n}")
    if any(p < 0 for p in prices):
        raise InvalidInstanceError(f"{what} has a negative entry: {prices}")
    return prices


@dataclass(frozen=True)
class Instance:
    """Procurement instance: seller costs plus the buyer's valuation"""

    costs: Tuple[Money, ...]
    valuation: Valuation
    denomination: str = "unit"

    def __post_init__(self):
        object.__setattr__(
            self, "costs", check_prices(self.valuation.n, self.costs, "cost vector")
        )

    @property
    def n(self) -> int:
        return self.valuation.n

    @property
    def max_cost(self) -> int:
        return max(self.costs)

    @property
    def default_cap(self) -> int:
        """Smallest price cap covering every value and every cost"""
        return max(self.valuation.max_value, self.max_cost, 1)


@dataclass(frozen=True)
class AuctionOutcome:
    """Winners, prices and the resulting utilities of one auction run"""

    winners: SellerSubset
    final_prices: PriceVector
    payments: Tuple[Money, ...]
    buyer_utility: int
    seller_utilities: Tuple[int, ...]
    welfare: int

    @classmethod
    def settle(cls, inst: Instance, winners: SellerSubset, prices: Sequence[int]) -> "AuctionOutcome":
        """Build the outcome paying each winner their final price"""
        prices = check_prices(inst.n, prices)
        payments = tuple(
            prices[i] if winners >> i & 1 else 0 for i in range(inst.n)
        )
        v_w = value(inst.valuation, winners)
        return cls(
            winners=winners,
            final_prices=prices,
            payments=payments,
            buyer_utility=v_w - sum(payments),
            seller_utilities=tuple(
                payments[i] - inst.costs[i] if winners >> i & 1 else 0
                for i in range(inst.n)
            ),
            welfare=social_welfare(inst, winners),
        )

    @property
    def winner_ids(self) -> Tuple[SellerId, ...]:
        return members_of(self.winners)

    @property
    def buyer_cost(self) -> int:
        return sum(self.payments)

    def to_dict(self) -> Dict[str, object]:
        return {
            "winners": list(self.winner_ids),
            "final_prices": list(self.final_prices),
            "payments": list(self.payments),
            "buyer_cost": self.buyer_cost,
            "buyer_utility": self.buyer_utility,
            "seller_utilities": list(self.seller_utilities),
            "welfare": self.welfare,
        }


# ============================================================================
# TIE-BREAKING
# ============================================================================

class Precedence(str, Enum):
    LESS = "less"
    GREATER = "greater"


@dataclass(frozen=True)
class TieBreakRule:
    """
    Strict total order over subsets; the first demanded subset in this order
    is selected. Any total order gives an IIA winner selection.
    """

    name: str = "lex-mask"

    def rank(self, mask: SellerSubset) -> Tuple[int, ...]:
        return (mask,)

    def rank_array(self, n: int) -> np.ndarray:
        return _rank_array(self, n)

    def first(self, candidates: Iterable[SellerSubset]) -> SellerSubset:
        return min(candidates, key=self.rank)


@dataclass(frozen=True)
class MaxCardThenLexMask(TieBreakRule):
    """Larger subsets first, then the smaller mask"""

    name: str = "max-card-lex"

    def rank(self, mask: SellerSubset) -> Tuple[int, ...]:
        return (-popcount(mask), mask)


@dataclass(frozen=True)
class LexMask(TieBreakRule):
    name: str = "lex-mask"


@dataclass(frozen=True)
class ExplicitRanking(TieBreakRule):
    """Caller-supplied ranking: a permutation of all 2^n masks, best first"""

    ranking: Tuple[SellerSubset, ...] = ()
    name: str = "ranking"
    _positions: Dict[SellerSubset, int] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        size = len(self.ranking)
        if size < 2 or size & (size - 1) or sorted(self.ranking) != list(range(size)):
            raise InvalidInstanceError(
                "an explicit ranking must list every subset mask exactly once"
            )
        self._positions.update({m: pos for pos, m in enumerate(self.ranking)})

    def rank(self, mask: SellerSubset) -> Tuple[int, ...]:
        if mask not in self._positions:
            raise InvalidInstanceError(f"mask {mask} is not ranked")
        return (self._positions[mask],)


@lru_cache(maxsize=None)
def _rank_array(rule: TieBreakRule, n: int) -> np.ndarray:
    masks = range(1 << n)
    order = sorted(masks, key=rule.rank)
    ranks = np.empty(1 << n, dtype=np.int64)
    ranks[np.asarray(order, dtype=np.int64)] = np.arange(1 << n, dtype=np.int64)
    return ranks


DEFAULT_TIEBREAK: TieBreakRule = MaxCardThenLexMask()

TIEBREAK_RULES: Dict[str, TieBreakRule] = {
    "max-card-lex": MaxCardThenLexMask(),
    "lex-mask": LexMask(),
}


def tiebreak_by_name(name: str, n: Optional[int] = None) -> TieBreakRule:
    """
    Resolve a tie-break name: "max-card-lex", "lex-mask" or
    "ranking:<m1>,<m2>,..." listing all 2^n masks best first.
    """
    if name in TIEBREAK_RULES:
        return TIEBREAK_RULES[name]
    if name.startswith("ranking:"):
        try:
            ranking = tuple(int(x) for x in name[len("ranking:"):].split(","))
        except ValueError as e:
            raise InvalidInstanceError(f"bad ranking tie-break {name!r}") from e
        if n is not None and len(ranking) != 1 << n:
            raise InvalidInstanceError(
                f"ranking lists {len(ranking)} masks, expected {1 << n}"
            )
        return ExplicitRanking(ranking=ranking, name=name)
    raise InvalidInstanceError(
        f"unknown tie-break {name!r} (expected one of "
        f"{', '.join(TIEBREAK_RULES)} or ranking:...)"
    )


def compare_subsets(tiebreak: TieBreakRule, q: SellerSubset, r: SellerSubset) -> Precedence:
    """LESS if q is selected before r, GREATER otherwise"""
    if q == r:
        raise InvalidInstanceError("compare_subsets needs two distinct subsets")
    return Precedence.LESS if tiebreak.rank(q) < tiebreak.rank(r) else Precedence.GREATER


# ============================================================================
# DEMAND AND WINNER SELECTION
# ============================================================================

def buyer_utility(v: Valuation, prices: Sequence[int], subset: SellerSubset) -> int:
    """v(Q) minus the prices of Q; may be negative"""
    return value(v, subset) - sum(prices[i] for i in members_of(subset))


def _utilities(v: Valuation, prices: Sequence[int]) -> np.ndarray:
    check_size(v.n)
    if len(prices) != v.n:
        raise InvalidInstanceError(
            f"price vector has {len(prices)} entries, expected {v.n}"
        )
    return v.table - _subset_sums(prices)


def demand_set(v: Valuation, prices: Sequence[int]) -> List[SellerSubset]:
    """
    Every subset maximizing the buyer's utility at the given prices

    Args:
        v: Buyer valuation
        prices: One price per seller

    Returns:
        Demanded masks in ascending order; never empty (the empty set competes
        at utility 0)
    """
    utilities = _utilities(v, prices)
    return [int(m) for m in np.flatnonzero(utilities == utilities.max())]


def select_winner(
    v: Valuation,
    prices: Sequence[int],
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
) -> SellerSubset:
    """The tie-break-first element of the demand set"""
    utilities = _utilities(v, prices)
    candidates = np.flatnonzero(utilities == utilities.max())
    if len(candidates) == 1:
        return int(candidates[0])
    ranks = tiebreak.rank_array(v.n)
    return int(candidates[np.argmin(ranks[candidates])])


class WinnerOracle:
    """
    Memoized winner selection for one (valuation, tie-break) pair.

    Exact solvers evaluate the same price vectors many times; results are
    cached by price tuple.
    """

    def __init__(self, v: Valuation, tiebreak: TieBreakRule = DEFAULT_TIEBREAK):
        self.valuation = v
        self.tiebreak = tiebreak
        self._cache: Dict[PriceVector, SellerSubset] = {}

    def __call__(self, prices: Sequence[int]) -> SellerSubset:
        key = tuple(prices)
        winners = self._cache.get(key)
        if winners is None:
            winners = select_winner(self.valuation, key, self.tiebreak)
            self._cache[key] = winners
        return winners

    def __len__(self) -> int:
        return len(self._cache)


def social_welfare(inst: Instance, winners: SellerSubset) -> int:
    """v(W) minus the costs of W"""
    return value(inst.valuation, winners) - sum(inst.costs[i] for i in members_of(winners))


def efficient_allocation(inst: Instance, tiebreak: TieBreakRule = DEFAULT_TIEBREAK) -> SellerSubset:
    """Welfare-maximizing subset: winner selection with costs as prices"""
    return select_winner(inst.valuation, inst.costs, tiebreak)


# ============================================================================
# VALUATION CLASS CHECKS
# ============================================================================

@dataclass(frozen=True)
class ClassCheck:
    """Outcome of a valuation-class check, with a witness on failure"""

    name: str
    passed: bool
    witness: Optional[Dict[str, object]] = None
    data: Optional[Tuple[int, ...]] = None
    note: str = ""

    def to_dict(self) -> Dict[str, object]:
        result: Dict[str, object] = {"passed": self.passed}
        if self.witness is not None:
            result["witness"] = self.witness
        if self.data is not None:
            result["data"] = list(self.data)
        if self.note:
            result["note"] = self.note
        return result


def _submasks(mask: SellerSubset) -> Iterable[SellerSubset]:
    """Proper submasks of mask in ascending order"""
    subs = []
    sub = (mask - 1) & mask
    while True:
        subs.append(sub)
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return reversed(subs)


def check_submodular(v: Valuation) -> ClassCheck:
    """
    Check v(Q + i) - v(Q) >= v(R + i) - v(R) for every Q strictly inside R and
    every i outside R. Scans R, then Q, then i in ascending order and reports
    the first violation.
    """
    check_size(v.n)
    table = v.table
    full = full_mask(v.n)
    for r in range(1 << v.n):
        outside = members_of(full & ~r)
        if not outside:
            continue
        for q in _submasks(r):
            for i in outside:
                bit = 1 << i
                gain_q = int(table[q | bit] - table[q])
                gain_r = int(table[r | bit] - table[r])
                if gain_q < gain_r:
                    return ClassCheck(
                        "submodular",
                        False,
                        witness={
                            "Q": list(members_of(q)),
                            "R": list(members_of(r)),
                            "i": i,
                            "gain_Q": gain_q,
                            "gain_R": gain_r,
                        },
                    )
    return ClassCheck("submodular", True)


def check_anonymous(v: Valuation) -> ClassCheck:
    """Pass with the value-by-size vector, or the first pair of equal-size subsets with different values"""
    if v.kind is ValuationKind.ANONYMOUS:
        return ClassCheck("anonymous", True, data=v.values)
    check_size(v.n)
    table = v.table
    first_of_size: Dict[int, int] = {}
    for mask in range(1 << v.n):
        size = popcount(mask)
        if size not in first_of_size:
            first_of_size[size] = mask
        elif table[mask] != table[first_of_size[size]]:
            q = first_of_size[size]
            return ClassCheck(
                "anonymous",
                False,
                witness={
                    "Q": list(members_of(q)),
                    "R": list(members_of(mask)),
                    "value_Q": int(table[q]),
                    "value_R": int(table[mask]),
                },
            )
    by_size = tuple(int(table[first_of_size[k]]) for k in range(v.n + 1))
    return ClassCheck("anonymous", True, data=by_size)


def anonymous_sizes(v: Valuation) -> Tuple[int, ...]:
    """Value-by-size vector of an anonymous valuation"""
    check = check_anonymous(v)
    if not check.passed:
        raise ValuationClassError(f"valuation is not anonymous: {check.witness}")
    return check.data


def size_marginals(sizes: Sequence[int]) -> Tuple[int, ...]:
    """v(k) - v(k-1) for k = 1..n"""
    return tuple(sizes[k] - sizes[k - 1] for k in range(1, len(sizes)))


def check_concave_anonymous(v: Valuation) -> ClassCheck:
    """Size marginals must be non-increasing; reports the first size k where they increase"""
    sizes = anonymous_sizes(v)
    marginals = size_marginals(sizes)
    for k in range(2, len(sizes)):
        if marginals[k - 1] > marginals[k - 2]:
            return ClassCheck(
                "concave",
                False,
                witness={"k": k, "marginals": list(marginals)},
            )
    return ClassCheck("concave", True, data=marginals)


def informative_price_levels(v: Valuation, costs: Sequence[int] = ()) -> Tuple[int, ...]:
    """
    Price levels at which demand can change: 0, every cost, every marginal
    value v(Q + i) - v(Q), and one unit above the largest value.
    """
    check_size(v.n)
    table = v.table
    levels = {0, v.max_value + 1}
    levels.update(int(c) for c in costs)
    for mask in range(1 << v.n):
        for i in range(v.n):
            if not mask >> i & 1:
                gain = int(table[mask | 1 << i] - table[mask])
                if gain >= 0:
                    levels.add(gain)
    return tuple(sorted(levels))


def check_gross_substitutes(
    v: Valuation,
    price_cap: Money,
    levels: Optional[Sequence[int]] = None,
) -> ClassCheck:
    """
    Bounded-grid gross substitutes check

    For every pair of grid price vectors p <= p' and every demanded Q at p,
    some demanded R at p' must contain Q restricted to the sellers whose price
    did not change. A pass only certifies the grid.

    Args:
        v: Buyer valuation
        price_cap: Largest price on the grid (grid is 0..price_cap)
        levels: Explicit price levels replacing 0..price_cap

    Returns:
        ClassCheck with (p, p', Q) as witness on failure
    """
    check_size(v.n)
    grid = tuple(sorted(set(levels))) if levels is not None else tuple(range(price_cap + 1))
    points = len(grid) ** (2 * v.n)
    limit = gs_grid_limit()
    if points > limit:
        raise GridTooLargeError(points, limit)

    vectors = list(product(grid, repeat=v.n))
    demand = {p: demand_set(v, p) for p in vectors}
    logger.debug("[GS] %d grid points, %d vector pairs", len(vectors), points)

    for p in vectors:
        for p2 in vectors:
            if any(a > b for a, b in zip(p, p2)):
                continue
            unchanged = mask_of(i for i in range(v.n) if p[i] == p2[i])
            for q in demand[p]:
                need = q & unchanged
                if not any(r & need == need for r in demand[p2]):
                    return ClassCheck(
                        "gross_substitutes",
                        False,
                        witness={"p": list(p), "p_prime": list(p2), "Q": list(members_of(q))},
                        note=f"grid of {len(grid)} levels per seller",
                    )
    return ClassCheck(
        "gross_substitutes",
        True,
        note=f"no violation on a grid of {len(grid)} levels per seller (grid check only)",
    )
