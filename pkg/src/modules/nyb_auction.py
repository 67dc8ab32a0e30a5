"""
Name-Your-BAFO Auction Module

Sequential sealed-offer procurement: the buyer approaches sellers one at a
time, each names a single best-and-final price, and the buyer then buys the
utility-maximizing subset at those prices.

A game-tree node is the bid history so far, a tuple of (seller, bid) pairs
in approach order. Adaptive orders see only that history.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

from modules.game_tree import (
    Deviation,
    EquilibriumResult,
    SolverStats,
    SpeCheck,
    TableEntry,
    TranspositionTable,
    ensure_within_budget,
)
from modules.valuation_core import (
    DEFAULT_TIEBREAK,
    AuctionOutcome,
    Instance,
    InvalidInstanceError,
    Money,
    PriceVector,
    SellerId,
    TieBreakRule,
    WinnerOracle,
    check_prices,
    check_size,
    format_subset,
    select_winner,
)

logger = logging.getLogger(__name__)

Bid = Tuple[SellerId, Money]
NybState = Tuple[Bid, ...]


# ============================================================================
# APPROACH ORDERS
# ============================================================================

class NybOrder(Protocol):
    name: str

    def next_seller(self, history: NybState) -> SellerId:
        ...


@dataclass(frozen=True)
class FixedOrder:
    """Fixed permutation of the sellers"""

    sellers: Tuple[SellerId, ...]

    def __post_init__(self):
        object.__setattr__(self, "sellers", tuple(int(s) for s in self.sellers))
        if sorted(self.sellers) != list(range(len(self.sellers))):
            raise InvalidInstanceError(
                f"order {self.sellers} is not a permutation of the sellers"
            )

    @property
    def name(self) -> str:
        return "fixed:" + ",".join(str(s) for s in self.sellers)

    def next_seller(self, history: NybState) -> SellerId:
        return self.sellers[len(history)]


@dataclass(frozen=True)
class BidDrivenOrder:
    """
    Adaptive order: the lowest remaining seller follows a bid at or below the
    pivot, the highest remaining seller follows a bid above it. The first
    approached seller is seller 0.
    """

    n: int
    pivot: Money

    @property
    def name(self) -> str:
        return f"bid-driven:{self.pivot}"

    def next_seller(self, history: NybState) -> SellerId:
        approached = {s for s, _ in history}
        remaining = [i for i in range(self.n) if i not in approached]
        if not history or history[-1][1] <= self.pivot:
            return remaining[0]
        return remaining[-1]


@dataclass(frozen=True)
class AdaptiveOrder:
    """Caller-supplied rule from the bid history to the next seller"""

    name: str
    rule: Callable[[NybState], SellerId] = field(compare=False)

    def next_seller(self, history: NybState) -> SellerId:
        return self.rule(history)


def default_order(n: int) -> FixedOrder:
    return FixedOrder(tuple(range(n)))


def all_orders(n: int) -> List[FixedOrder]:
    """Every fixed approach order over n sellers"""
    return [FixedOrder(p) for p in permutations(range(n))]


def next_seller(order: NybOrder, history: NybState, n: int) -> SellerId:
    """Next seller to approach, checked against the history"""
    seller = order.next_seller(history)
    if not 0 <= seller < n or any(s == seller for s, _ in history):
        raise InvalidInstanceError(
            f"order {order.name} chose seller {seller} after history {history}"
        )
    return seller


def resolve_bid_cap(inst: Instance, cap: Optional[Money] = None) -> Money:
    """Bid grid upper end: the default cap unless a larger one is given"""
    if cap is None:
        return inst.default_cap
    if cap < inst.max_cost or cap < inst.valuation.max_value:
        raise InvalidInstanceError(
            f"bid cap {cap} must be at least every cost ({inst.max_cost}) and "
            f"every value ({inst.valuation.max_value})"
        )
    return cap


# ============================================================================
# SETTLEMENT
# ============================================================================

def conditional_prices(inst: Instance, history: NybState) -> PriceVector:
    """Bids of the approached sellers, costs of everybody else"""
    prices = list(inst.costs)
    for seller, bid in history:
        prices[seller] = bid
    return tuple(prices)


def settle(
    inst: Instance,
    tiebreak: TieBreakRule,
    bids: Sequence[Money],
    oracle: Optional[WinnerOracle] = None,
) -> AuctionOutcome:
    """Buy the selected subset at the submitted bids"""
    bids = check_prices(inst.n, bids, "bid vector")
    winners = oracle(bids) if oracle is not None else select_winner(inst.valuation, bids, tiebreak)
    return AuctionOutcome.settle(inst, winners, bids)


def canonical_bid(
    inst: Instance,
    tiebreak: TieBreakRule,
    order: NybOrder,
    history: NybState,
    cap: Optional[Money] = None,
    oracle: Optional[WinnerOracle] = None,
) -> Money:
    """
    Highest bid in [c_k, B] keeping the next seller k in the conditional
    winner set, or c_k when no such bid exists.
    """
    cap = resolve_bid_cap(inst, cap)
    select = oracle or WinnerOracle(inst.valuation, tiebreak)
    k = next_seller(order, history, inst.n)
    prices = list(conditional_prices(inst, history))
    for bid in range(cap, inst.costs[k] - 1, -1):
        prices[k] = bid
        if select(prices) >> k & 1:
            return bid
    return inst.costs[k]


# ============================================================================
# STRATEGY PROFILES AND PLAY
# ============================================================================

@dataclass(frozen=True)
class NybStrategyProfile:
    """Every seller's bid as a function of (seller, observed history)"""

    name: str
    rule: Callable[[SellerId, NybState], Money] = field(compare=False)

    def bid(self, seller: SellerId, history: NybState) -> Money:
        return self.rule(seller, history)


def canonical_profile(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    order: Optional[NybOrder] = None,
    cap: Optional[Money] = None,
) -> NybStrategyProfile:
    order = order or default_order(inst.n)
    cap = resolve_bid_cap(inst, cap)
    oracle = WinnerOracle(inst.valuation, tiebreak)
    return NybStrategyProfile(
        "canonical",
        lambda seller, history: canonical_bid(inst, tiebreak, order, history, cap, oracle),
    )


def truthful_profile(inst: Instance) -> NybStrategyProfile:
    """Every seller bids their cost"""
    return NybStrategyProfile("truthful", lambda seller, history: inst.costs[seller])


def constant_profile(bids: Sequence[Money]) -> NybStrategyProfile:
    """Seller i always bids bids[i]"""
    bids = tuple(bids)
    return NybStrategyProfile(
        "constant:" + ",".join(str(b) for b in bids),
        lambda seller, history: bids[seller],
    )


@dataclass(frozen=True)
class NybEvent:
    step: int
    seller: SellerId
    bid: Money

    def to_dict(self) -> Dict[str, int]:
        return {"step": self.step, "seller": self.seller, "bid": self.bid}


@dataclass(frozen=True)
class NybRun:
    outcome: AuctionOutcome
    events: Tuple[NybEvent, ...]
    order_name: str
    profile_name: str


def play(
    inst: Instance,
    tiebreak: TieBreakRule,
    order: NybOrder,
    profile: NybStrategyProfile,
    cap: Optional[Money] = None,
) -> NybRun:
    """Approach every seller in order, collect their bids, settle"""
    check_size(inst.n)
    cap = resolve_bid_cap(inst, cap)
    history: NybState = ()
    events = []
    for step in range(1, inst.n + 1):
        seller = next_seller(order, history, inst.n)
        bid = profile.bid(seller, history)
        if not 0 <= bid <= cap:
            raise InvalidInstanceError(
                f"profile {profile.name} bid {bid} for seller {seller}, outside [0, {cap}]"
            )
        history += ((seller, bid),)
        events.append(NybEvent(step, seller, bid))
        logger.debug("[NYB] step %d: seller %d bids %d", step, seller, bid)

    outcome = settle(inst, tiebreak, conditional_prices(inst, history))
    logger.info(
        "[NYB] %s under %s: winners %s, buyer cost %d",
        profile.name, order.name, format_subset(outcome.winners), outcome.buyer_cost,
    )
    return NybRun(outcome, tuple(events), order.name, profile.name)


def run_canonical(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    order: Optional[NybOrder] = None,
    cap: Optional[Money] = None,
) -> NybRun:
    order = order or default_order(inst.n)
    return play(inst, tiebreak, order, canonical_profile(inst, tiebreak, order, cap), cap)


# ============================================================================
# EXACT SOLVER
# ============================================================================

def seller_payoffs(inst: Instance) -> Callable[[int, Tuple[int, ...]], Tuple[int, ...]]:
    costs = inst.costs

    def payoffs(winners: int, prices: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(
            prices[i] - costs[i] if winners >> i & 1 else 0 for i in range(len(costs))
        )

    return payoffs


def tree_size(inst: Instance, cap: Money) -> int:
    return (cap + 1) ** inst.n * (1 << inst.n)


class _NybSolver:
    """Backward induction over the bid grid [0, cap]^n"""

    def __init__(self, inst: Instance, order: NybOrder, cap: Money, oracle: WinnerOracle):
        self.inst = inst
        self.order = order
        self.cap = cap
        self.oracle = oracle
        self.table: TranspositionTable[NybState, Money] = TranspositionTable()

    def solve(self, history: NybState) -> TableEntry:
        entry = self.table.get(history)
        if entry is not None:
            return entry
        inst = self.inst
        if len(history) == inst.n:
            prices = conditional_prices(inst, history)
            return self.table.store(history, TableEntry(None, self.oracle(prices), prices))

        k = next_seller(self.order, history, inst.n)
        best_key = None
        best = None
        for bid in range(self.cap + 1):
            child = self.solve(history + ((k, bid),))
            wins = child.winners >> k & 1
            utility = child.prices[k] - inst.costs[k] if wins else 0
            # utility, then winning, then the higher bid
            key = (utility, wins, bid)
            if best_key is None or key > best_key:
                best_key, best = key, (bid, child)
        bid, child = best
        return self.table.store(history, TableEntry(bid, child.winners, child.prices))


def solve_exact(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    order: Optional[NybOrder] = None,
    cap: Optional[Money] = None,
    budget: Optional[int] = None,
    threads: int = 1,
) -> EquilibriumResult:
    """
    Subgame perfect equilibrium by full backward induction

    Sellers break indifference by preferring higher utility, then winning,
    then the higher bid.

    Args:
        inst: Auction instance
        tiebreak: Winner-selection tie-break
        order: Approach order (defaults to 0, 1, ..., n-1)
        cap: Bid grid upper end
        budget: Work budget override
        threads: Worker threads for the subtrees below the first bid

    Returns:
        EquilibriumResult with the root play-out and every solved node
    """
    check_size(inst.n)
    order = order or default_order(inst.n)
    cap = resolve_bid_cap(inst, cap)
    ensure_within_budget("NYB exact solve", tree_size(inst, cap), budget)
    stats = SolverStats()
    oracle = WinnerOracle(inst.valuation, tiebreak)
    solver = _NybSolver(inst, order, cap, oracle)

    if threads > 1:
        first = next_seller(order, (), inst.n)

        def solve_slice(bids: Sequence[Money]) -> TranspositionTable:
            worker = _NybSolver(inst, order, cap, oracle)
            for bid in bids:
                worker.solve(((first, bid),))
            return worker.table

        slices = [list(range(cap + 1))[w::threads] for w in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as executor:
            for table in executor.map(solve_slice, slices):
                solver.table.merge(table)

    root = solver.solve(())
    path = []
    history: NybState = ()
    while len(history) < inst.n:
        entry = solver.table.get(history)
        seller = next_seller(order, history, inst.n)
        path.append((history, seller, entry.action))
        history += ((seller, entry.action),)

    outcome = AuctionOutcome.settle(inst, root.winners, root.prices)
    stats.finish(solver.table)
    logger.info(
        "[NYB] exact SPE under %s: winners %s, buyer cost %d (%d nodes, %.2fs)",
        order.name, format_subset(outcome.winners), outcome.buyer_cost,
        stats.nodes, stats.elapsed,
    )
    return EquilibriumResult(outcome, path, solver.table, stats, seller_payoffs(inst))


def verify_conditional_efficiency(
    inst: Instance,
    tiebreak: TieBreakRule,
    result: EquilibriumResult,
) -> List[NybState]:
    """
    Solved nodes whose continuation winners differ from the winner selection
    at the node's conditional prices; empty when the equilibrium is
    conditionally efficient everywhere.
    """
    oracle = WinnerOracle(inst.valuation, tiebreak)
    return [
        history
        for history, entry in result.table.items()
        if entry.winners != oracle(conditional_prices(inst, history))
    ]


# ============================================================================
# VERIFIERS
# ============================================================================

def verify_spe(
    inst: Instance,
    tiebreak: TieBreakRule,
    order: NybOrder,
    profile: NybStrategyProfile,
    cap: Optional[Money] = None,
    budget: Optional[int] = None,
) -> SpeCheck:
    """
    One-shot deviation check at every node of the bid grid

    Levels are scanned from the last mover up, nodes within a level in
    ascending bid order; the first node where the acting seller gains by
    changing only their own bid is returned as the witness.
    """
    check_size(inst.n)
    cap = resolve_bid_cap(inst, cap)
    ensure_within_budget("NYB SPE verification", tree_size(inst, cap), budget)
    oracle = WinnerOracle(inst.valuation, tiebreak)
    costs = inst.costs

    levels: List[List[NybState]] = [[()]]
    for _ in range(inst.n):
        levels.append([
            history + ((next_seller(order, history, inst.n), bid),)
            for history in levels[-1]
            for bid in range(cap + 1)
        ])

    # continuation result of every node under the profile
    result: Dict[NybState, Tuple[int, PriceVector]] = {}
    for history in levels[inst.n]:
        prices = conditional_prices(inst, history)
        result[history] = (oracle(prices), prices)

    def utility(seller: SellerId, node: Tuple[int, PriceVector]) -> int:
        winners, prices = node
        return prices[seller] - costs[seller] if winners >> seller & 1 else 0

    checked = 0
    for depth in range(inst.n - 1, -1, -1):
        for history in levels[depth]:
            seller = next_seller(order, history, inst.n)
            bid = profile.bid(seller, history)
            if not 0 <= bid <= cap:
                raise InvalidInstanceError(
                    f"profile {profile.name} bid {bid} for seller {seller}, outside [0, {cap}]"
                )
            result[history] = result[history + ((seller, bid),)]
            checked += 1
            current = utility(seller, result[history])
            gains = [
                utility(seller, result[history + ((seller, b),)]) - current
                for b in range(cap + 1)
            ]
            best = max(gains)
            if best > 0:
                deviation = gains.index(best)
                logger.info(
                    "[NYB] %s is not an SPE: seller %d gains %d by bidding %d instead of %d after %s",
                    profile.name, seller, best, deviation, bid, history,
                )
                return SpeCheck(
                    False, Deviation(history, seller, bid, deviation, best), checked
                )

    logger.info("[NYB] %s passes the one-shot deviation check (%d nodes)", profile.name, checked)
    return SpeCheck(True, None, checked)


def is_simultaneous_nash(
    inst: Instance,
    tiebreak: TieBreakRule,
    bids: Sequence[Money],
    cap: Optional[Money] = None,
) -> SpeCheck:
    """
    Whether a bid vector is a Nash equilibrium of the one-shot game in which
    all sellers name their price at once.
    """
    cap = resolve_bid_cap(inst, cap)
    bids = check_prices(inst.n, bids, "bid vector")
    oracle = WinnerOracle(inst.valuation, tiebreak)
    base = settle(inst, tiebreak, bids, oracle)
    for seller in range(inst.n):
        gains = []
        for b in range(cap + 1):
            deviated = list(bids)
            deviated[seller] = b
            outcome = settle(inst, tiebreak, deviated, oracle)
            gains.append(outcome.seller_utilities[seller] - base.seller_utilities[seller])
        best = max(gains)
        if best > 0:
            return SpeCheck(
                False, Deviation(tuple(bids), seller, bids[seller], gains.index(best), best), seller + 1
            )
    return SpeCheck(True, None, inst.n)
