"""
Descending Auction Module

Descending auctions with best-and-final offers: every seller starts at the
same price h; the buyer repeatedly picks a seller outside the tentative
allocation who has not frozen, and that seller either accepts a price
decrement of one unit or freezes at the current price. A price reaching
zero freezes automatically. The auction ends once every seller outside the
tentative allocation is frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Protocol, Sequence, Tuple

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
    IllegalMoveError,
    Instance,
    InvalidInstanceError,
    Money,
    PriceVector,
    SellerId,
    SellerSubset,
    TieBreakRule,
    ValuationClassError,
    WinnerOracle,
    anonymous_sizes,
    check_concave_anonymous,
    check_size,
    format_subset,
    full_mask,
    mask_of,
    members_of,
)

logger = logging.getLogger(__name__)


# ============================================================================
# STATE
# ============================================================================

class DescState(NamedTuple):
    """Current offers and the frozen sellers (bit mask)"""

    prices: PriceVector
    frozen: SellerSubset

    def is_frozen(self, seller: SellerId) -> bool:
        return bool(self.frozen >> seller & 1)

    def to_dict(self) -> Dict[str, object]:
        return {"prices": list(self.prices), "frozen": list(members_of(self.frozen))}


class DescAction(str, Enum):
    ACCEPT = "accept"
    FREEZE = "freeze"


def resolve_initial_price(inst: Instance, h: Optional[Money] = None) -> Money:
    """Starting price: the default cap unless given; never below any cost"""
    if h is None:
        return inst.default_cap
    if h < 1:
        raise InvalidInstanceError(f"initial price h must be at least 1, got {h}")
    if h < inst.max_cost:
        raise InvalidInstanceError(
            f"initial price h = {h} is below the largest seller cost {inst.max_cost}"
        )
    return h


def initial_state(inst: Instance, h: Money) -> DescState:
    return DescState((h,) * inst.n, 0)


def hat_prices(inst: Instance, state: DescState) -> PriceVector:
    """Frozen sellers at their frozen price, everybody else at cost"""
    return tuple(
        state.prices[i] if state.frozen >> i & 1 else inst.costs[i]
        for i in range(inst.n)
    )


def tentative_winner(
    inst: Instance,
    tiebreak: TieBreakRule,
    state: DescState,
    oracle: Optional[WinnerOracle] = None,
) -> SellerSubset:
    select = oracle or WinnerOracle(inst.valuation, tiebreak)
    return select(state.prices)


def eligible_sellers(state: DescState, winners: SellerSubset, n: int) -> Tuple[SellerId, ...]:
    """Sellers neither tentatively winning nor frozen"""
    return members_of(full_mask(n) & ~(winners | state.frozen))


def step(state: DescState, seller: SellerId, action: DescAction) -> DescState:
    """
    Apply one seller action

    Args:
        state: Current state
        seller: Acting seller (must not be frozen)
        action: Accept a one-unit decrement, or freeze

    Returns:
        Successor state; an accepted decrement to 0 also freezes the seller
    """
    if state.frozen >> seller & 1:
        raise IllegalMoveError(f"seller {seller} is frozen at {state.prices[seller]}")
    bit = 1 << seller
    if action is DescAction.FREEZE:
        return DescState(state.prices, state.frozen | bit)
    price = state.prices[seller]
    if price < 1:
        raise IllegalMoveError(f"seller {seller} cannot accept a decrement at price 0")
    prices = state.prices[:seller] + (price - 1,) + state.prices[seller + 1:]
    frozen = state.frozen | bit if price == 1 else state.frozen
    return DescState(prices, frozen)


# ============================================================================
# ORDERINGS
# ============================================================================

class DescOrdering(Protocol):
    name: str

    def choose(self, state: DescState, winners: SellerSubset, n: int) -> Optional[SellerId]:
        ...


@dataclass(frozen=True)
class LowestEligibleIndex:
    name: str = "lowest-eligible-index"

    def choose(self, state: DescState, winners: SellerSubset, n: int) -> Optional[SellerId]:
        eligible = eligible_sellers(state, winners, n)
        return eligible[0] if eligible else None


@dataclass(frozen=True)
class HighestEligibleIndex:
    name: str = "highest-eligible-index"

    def choose(self, state: DescState, winners: SellerSubset, n: int) -> Optional[SellerId]:
        eligible = eligible_sellers(state, winners, n)
        return eligible[-1] if eligible else None


@dataclass(frozen=True)
class FixedPriority:
    """First eligible seller in a fixed priority list"""

    priority: Tuple[SellerId, ...]

    def __post_init__(self):
        object.__setattr__(self, "priority", tuple(int(s) for s in self.priority))
        if sorted(self.priority) != list(range(len(self.priority))):
            raise InvalidInstanceError(f"priority {self.priority} is not a permutation")

    @property
    def name(self) -> str:
        return "priority:" + ",".join(str(s) for s in self.priority)

    def choose(self, state: DescState, winners: SellerSubset, n: int) -> Optional[SellerId]:
        eligible = set(eligible_sellers(state, winners, n))
        for seller in self.priority:
            if seller in eligible:
                return seller
        return None


@dataclass(frozen=True)
class RuleOrdering:
    """Caller-supplied ordering; must be a function of (state, tentative winners)"""

    name: str
    rule: Callable[[DescState, SellerSubset], Optional[SellerId]] = field(compare=False)

    def choose(self, state: DescState, winners: SellerSubset, n: int) -> Optional[SellerId]:
        return self.rule(state, winners)


DEFAULT_ORDERING = LowestEligibleIndex()


def ordering_by_name(name: str, n: Optional[int] = None) -> DescOrdering:
    if name == "lowest-eligible-index":
        return LowestEligibleIndex()
    if name == "highest-eligible-index":
        return HighestEligibleIndex()
    if name.startswith("priority:"):
        try:
            priority = tuple(int(s) for s in name[len("priority:"):].split(","))
        except ValueError as e:
            raise InvalidInstanceError(f"bad priority ordering {name!r}") from e
        if n is not None and len(priority) != n:
            raise InvalidInstanceError(f"priority ordering lists {len(priority)} sellers, expected {n}")
        return FixedPriority(priority)
    raise InvalidInstanceError(
        f"unknown ordering {name!r} (expected lowest-eligible-index, "
        "highest-eligible-index or priority:...)"
    )


def next_seller(
    ordering: DescOrdering, state: DescState, winners: SellerSubset, n: int
) -> Optional[SellerId]:
    """Seller to approach, or None once every non-winner has frozen"""
    eligible = eligible_sellers(state, winners, n)
    seller = ordering.choose(state, winners, n)
    if seller is None:
        if eligible:
            raise InvalidInstanceError(
                f"ordering {ordering.name} terminated with eligible sellers {eligible}"
            )
        return None
    if seller not in eligible:
        raise InvalidInstanceError(
            f"ordering {ordering.name} chose ineligible seller {seller} at {state}"
        )
    return seller


# ============================================================================
# STRATEGIES
# ============================================================================

def _hat_rule(
    inst: Instance,
    state: DescState,
    seller: SellerId,
    select: WinnerOracle,
) -> DescAction:
    hat = list(hat_prices(inst, state))
    hat[seller] = state.prices[seller]
    if select(hat) >> seller & 1:
        return DescAction.FREEZE
    hat[seller] = inst.costs[seller]
    if select(hat) >> seller & 1:
        return DescAction.ACCEPT
    return DescAction.FREEZE


class CanonicalContinuation:
    """
    Memoized outcome of canonical play from any state under one ordering

    Maps a state to the TableEntry (no action) of the terminal state reached
    when every seller follows canonical_action from there on.
    """

    def __init__(
        self,
        inst: Instance,
        tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
        ordering: Optional[DescOrdering] = None,
        oracle: Optional[WinnerOracle] = None,
    ):
        self.inst = inst
        self.tiebreak = tiebreak
        self.ordering = ordering or DEFAULT_ORDERING
        self.oracle = oracle or WinnerOracle(inst.valuation, tiebreak)
        self._memo: Dict[DescState, TableEntry] = {}

    def __len__(self) -> int:
        return len(self._memo)

    def outcome(self, state: DescState) -> TableEntry:
        visited = []
        while state not in self._memo:
            winners = self.oracle(state.prices)
            seller = next_seller(self.ordering, state, winners, self.inst.n)
            if seller is None:
                self._memo[state] = TableEntry(None, winners, state.prices)
                break
            visited.append(state)
            action = canonical_action(self.inst, self.tiebreak, state, seller, self.oracle, self)
            state = step(state, seller, action)
        final = self._memo[state]
        for seen in visited:
            self._memo[seen] = final
        return final


def canonical_action(
    inst: Instance,
    tiebreak: TieBreakRule,
    state: DescState,
    seller: SellerId,
    oracle: Optional[WinnerOracle] = None,
    continuation: Optional[CanonicalContinuation] = None,
) -> DescAction:
    """
    Equilibrium action read off the hat prices

    Wr is the winner set with the seller frozen at the current price, Wl the
    one with the seller at cost. Freeze when winning in Wr, accept when
    winning only in Wl, freeze otherwise.

    States where some unfrozen seller already offers below cost are off the
    equilibrium path and the hat prices say nothing there. The acting seller
    then compares the canonical continuations after Accept and after Freeze
    (utility, then winning, then freezing).
    """
    if state.frozen >> seller & 1:
        raise IllegalMoveError(f"seller {seller} is frozen at {state.prices[seller]}")
    select = oracle or WinnerOracle(inst.valuation, tiebreak)
    if is_cost_consistent(inst, state):
        return _hat_rule(inst, state, seller, select)

    continuation = continuation or CanonicalContinuation(inst, tiebreak, oracle=select)
    accept = continuation.outcome(step(state, seller, DescAction.ACCEPT))
    freeze = continuation.outcome(step(state, seller, DescAction.FREEZE))
    if (
        _seller_utility(inst, seller, accept),
        accept.winners >> seller & 1,
    ) > (
        _seller_utility(inst, seller, freeze),
        freeze.winners >> seller & 1,
    ):
        return DescAction.ACCEPT
    return DescAction.FREEZE


@dataclass(frozen=True)
class DescStrategy:
    """Every seller's action as a function of (public state, acting seller)"""

    name: str
    rule: Callable[[DescState, SellerId], DescAction] = field(compare=False)

    def action(self, state: DescState, seller: SellerId) -> DescAction:
        return self.rule(state, seller)


def canonical_strategies(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    ordering: Optional[DescOrdering] = None,
) -> DescStrategy:
    """Canonical profile; the continuation memo is shared by all calls"""
    oracle = WinnerOracle(inst.valuation, tiebreak)
    continuation = CanonicalContinuation(inst, tiebreak, ordering, oracle)
    return DescStrategy(
        "canonical",
        lambda state, seller: canonical_action(inst, tiebreak, state, seller, oracle, continuation),
    )


def always_accept() -> DescStrategy:
    return DescStrategy("always-accept", lambda state, seller: DescAction.ACCEPT)


def always_freeze() -> DescStrategy:
    return DescStrategy("always-freeze", lambda state, seller: DescAction.FREEZE)


# ============================================================================
# RUNS
# ============================================================================

@dataclass(frozen=True)
class DescEvent:
    step: int
    seller: SellerId
    action: str
    price_after: Money

    def to_dict(self) -> Dict[str, object]:
        return {
            "step": self.step,
            "seller": self.seller,
            "action": self.action,
            "price_after": self.price_after,
        }


@dataclass(frozen=True)
class DescRun:
    outcome: AuctionOutcome
    events: Tuple[DescEvent, ...]
    final_state: DescState
    initial_price: Money
    ordering_name: str
    strategy_name: str


def run(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    ordering: Optional[DescOrdering] = None,
    strategies: Optional[DescStrategy] = None,
    h: Optional[Money] = None,
) -> DescRun:
    """Play the auction forward until every non-winner has frozen"""
    check_size(inst.n)
    ordering = ordering or DEFAULT_ORDERING
    strategies = strategies or canonical_strategies(inst, tiebreak, ordering)
    h = resolve_initial_price(inst, h)
    oracle = WinnerOracle(inst.valuation, tiebreak)

    state = initial_state(inst, h)
    events: List[DescEvent] = []
    bound = inst.n * (h + 1)
    while True:
        winners = oracle(state.prices)
        seller = next_seller(ordering, state, winners, inst.n)
        if seller is None:
            break
        action = DescAction(strategies.action(state, seller))
        state = step(state, seller, action)
        price = state.prices[seller]
        if action is DescAction.ACCEPT and price == 0:
            kind = "auto-freeze"
        else:
            kind = action.value
        events.append(DescEvent(len(events) + 1, seller, kind, price))
        logger.debug("[DESC] step %d: seller %d %s -> %d", len(events), seller, kind, price)
        if len(events) > bound:
            raise RuntimeError(f"descending run exceeded {bound} steps")

    outcome = AuctionOutcome.settle(inst, winners, state.prices)
    logger.info(
        "[DESC] %s under %s, h = %d: winners %s, buyer cost %d after %d steps",
        strategies.name, ordering.name, h, format_subset(outcome.winners),
        outcome.buyer_cost, len(events),
    )
    return DescRun(outcome, tuple(events), state, h, ordering.name, strategies.name)


# ============================================================================
# EXACT SOLVER AND VERIFIER
# ============================================================================

def state_space_size(inst: Instance, h: Money) -> int:
    return (h + 1) ** inst.n * (1 << inst.n)


def _seller_utility(inst: Instance, seller: SellerId, entry: TableEntry) -> int:
    if entry.winners >> seller & 1:
        return entry.prices[seller] - inst.costs[seller]
    return 0


def _walk(
    inst: Instance,
    oracle: WinnerOracle,
    ordering: DescOrdering,
    root: DescState,
    table: TranspositionTable,
    decide: Callable[[DescState, SellerId, TableEntry, TableEntry], Optional[object]],
) -> Optional[object]:
    """
    Post-order walk over every state reachable from root under any play.

    Terminal states are stored directly; at decision states `decide` gets both
    solved children and either stores the state itself or returns a value that
    stops the walk.
    """
    stack = [root]
    while stack:
        state = stack[-1]
        if state in table:
            stack.pop()
            continue
        winners = oracle(state.prices)
        seller = next_seller(ordering, state, winners, inst.n)
        if seller is None:
            table.store(state, TableEntry(None, winners, state.prices))
            stack.pop()
            continue
        accept = step(state, seller, DescAction.ACCEPT)
        freeze = step(state, seller, DescAction.FREEZE)
        missing = [child for child in (freeze, accept) if child not in table]
        if missing:
            stack.extend(missing)
            continue
        stop = decide(state, seller, table.get(accept), table.get(freeze))
        if stop is not None:
            return stop
        stack.pop()
    return None


def solve_exact(
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    ordering: Optional[DescOrdering] = None,
    h: Optional[Money] = None,
    budget: Optional[int] = None,
) -> EquilibriumResult:
    """
    Subgame perfect equilibrium by memoized backward induction on (p, F)

    The acting seller prefers higher utility, then winning, then freezing.
    """
    check_size(inst.n)
    ordering = ordering or DEFAULT_ORDERING
    h = resolve_initial_price(inst, h)
    ensure_within_budget("descending exact solve", state_space_size(inst, h), budget)
    stats = SolverStats()
    oracle = WinnerOracle(inst.valuation, tiebreak)
    table: TranspositionTable[DescState, DescAction] = TranspositionTable()

    def decide(state, seller, accept, freeze):
        best = max(
            (DescAction.ACCEPT, accept),
            (DescAction.FREEZE, freeze),
            key=lambda option: (
                _seller_utility(inst, seller, option[1]),
                option[1].winners >> seller & 1,
                option[0] is DescAction.FREEZE,
            ),
        )
        action, child = best
        table.store(state, TableEntry(action, child.winners, child.prices))

    root = initial_state(inst, h)
    _walk(inst, oracle, ordering, root, table, decide)

    path = []
    state = root
    entry = table.get(state)
    while entry.action is not None:
        seller = next_seller(ordering, state, oracle(state.prices), inst.n)
        path.append((state, seller, entry.action))
        state = step(state, seller, entry.action)
        entry = table.get(state)

    final = table.get(root)
    outcome = AuctionOutcome.settle(inst, final.winners, final.prices)
    stats.finish(table)
    logger.info(
        "[DESC] exact SPE under %s, h = %d: winners %s, buyer cost %d (%d states, %.2fs)",
        ordering.name, h, format_subset(outcome.winners), outcome.buyer_cost,
        stats.nodes, stats.elapsed,
    )

    def payoffs(winners: int, prices: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(
            prices[i] - inst.costs[i] if winners >> i & 1 else 0 for i in range(inst.n)
        )

    return EquilibriumResult(outcome, path, table, stats, payoffs)


def is_cost_consistent(inst: Instance, state: DescState) -> bool:
    """No unfrozen seller is offering below their cost"""
    return all(
        state.frozen >> i & 1 or state.prices[i] >= inst.costs[i] for i in range(inst.n)
    )


def verify_hat_efficiency(
    inst: Instance,
    tiebreak: TieBreakRule,
    result: EquilibriumResult,
) -> List[DescState]:
    """
    Solved states whose continuation winners differ from the winner selection
    at the hat prices. Only states with no unfrozen seller below cost are
    checked.
    """
    oracle = WinnerOracle(inst.valuation, tiebreak)
    return [
        state
        for state, entry in result.table.items()
        if is_cost_consistent(inst, state) and entry.winners != oracle(hat_prices(inst, state))
    ]


def verify_spe(
    inst: Instance,
    tiebreak: TieBreakRule,
    ordering: Optional[DescOrdering],
    strategies: DescStrategy,
    h: Optional[Money] = None,
    budget: Optional[int] = None,
) -> SpeCheck:
    """
    One-shot deviation check over every reachable (p, F) state

    States are visited in post-order (successors before predecessors); the
    first state where switching the acting seller's action pays is returned.
    """
    check_size(inst.n)
    ordering = ordering or DEFAULT_ORDERING
    h = resolve_initial_price(inst, h)
    ensure_within_budget("descending SPE verification", state_space_size(inst, h), budget)
    oracle = WinnerOracle(inst.valuation, tiebreak)
    table: TranspositionTable[DescState, DescAction] = TranspositionTable()
    checked = [0]

    def decide(state, seller, accept, freeze):
        action = DescAction(strategies.action(state, seller))
        chosen, other = (accept, freeze) if action is DescAction.ACCEPT else (freeze, accept)
        checked[0] += 1
        gain = _seller_utility(inst, seller, other) - _seller_utility(inst, seller, chosen)
        if gain > 0:
            better = DescAction.FREEZE if action is DescAction.ACCEPT else DescAction.ACCEPT
            return Deviation(state, seller, action, better, gain)
        table.store(state, TableEntry(action, chosen.winners, chosen.prices))
        return None

    witness = _walk(inst, oracle, ordering, initial_state(inst, h), table, decide)
    if witness is not None:
        logger.info(
            "[DESC] %s is not an SPE: seller %d gains %d by %s at %s",
            strategies.name, witness.seller, witness.gain, witness.deviation.value, witness.state,
        )
        return SpeCheck(False, witness, checked[0])
    logger.info("[DESC] %s passes the one-shot deviation check (%d states)", strategies.name, checked[0])
    return SpeCheck(True, None, checked[0])


# ============================================================================
# CONCAVE ANONYMOUS THRESHOLD
# ============================================================================

def concave_threshold_outcome(inst: Instance) -> AuctionOutcome:
    """
    Closed-form equilibrium outcome for concave anonymous valuations

    Sellers sorted by cost (ties by id) win while the size marginal covers
    their cost; every winner is paid the next marginal v(k+1) - v(k), or
    v(n) - v(n-1) when all n sellers win. Losers are listed at cost.
    """
    concave = check_concave_anonymous(inst.valuation)
    if not concave.passed:
        raise ValuationClassError(f"valuation is not concave: {concave.witness}")
    sizes = anonymous_sizes(inst.valuation)
    n = inst.n
    by_cost = sorted(range(n), key=lambda i: (inst.costs[i], i))
    k = 0
    for j, seller in enumerate(by_cost, start=1):
        if sizes[j] - sizes[j - 1] < inst.costs[seller]:
            break
        k = j
    threshold = sizes[k + 1] - sizes[k] if k < n else sizes[n] - sizes[n - 1]
    winners = mask_of(by_cost[:k])
    prices = [threshold if winners >> i & 1 else inst.costs[i] for i in range(n)]
    return AuctionOutcome.settle(inst, winners, prices)
