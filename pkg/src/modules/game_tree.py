"""
Game Tree Module

Machinery shared by the exact solvers and verifiers of both auction formats:
the work budget guard, a thread-safe transposition table, solver statistics
and the equilibrium result object.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Generic, Hashable, Iterator, List, Optional, Tuple, TypeVar

from modules.valuation_core import AuctionOutcome, WorkBudgetExceededError

logger = logging.getLogger(__name__)

DEFAULT_WORK_BUDGET = 2_000_000

State = TypeVar("State", bound=Hashable)
Action = TypeVar("Action")


def work_budget(override: Optional[int] = None) -> int:
    """Node budget: explicit override, then BAFO_WORK_BUDGET, then the default"""
    if override is not None:
        return int(override)
    return int(os.getenv("BAFO_WORK_BUDGET", DEFAULT_WORK_BUDGET))


def ensure_within_budget(what: str, required: int, budget: Optional[int] = None) -> int:
    """Raise WorkBudgetExceededError when the state space estimate is above budget"""
    limit = work_budget(budget)
    if required > limit:
        raise WorkBudgetExceededError(what, required, limit)
    logger.info("[SOLVER] %s: %s nodes estimated (budget %s)", what, f"{required:,}", f"{limit:,}")
    return limit


@dataclass
class TableEntry(Generic[Action]):
    """Solved node: the acting player's choice and the continuation result"""

    action: Optional[Action]
    winners: int
    prices: Tuple[int, ...]


class TranspositionTable(Generic[State, Action]):
    """
    Memo of solved states.

    A key is written at most once with a given value; a second write of an
    identical entry is ignored and a conflicting one is an error.
    """

    def __init__(self):
        self._entries: Dict[State, TableEntry] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.stores = 0

    def get(self, state: State) -> Optional[TableEntry]:
        entry = self._entries.get(state)
        if entry is not None:
            with self._lock:
                self.hits += 1
        return entry

    def store(self, state: State, entry: TableEntry) -> TableEntry:
        with self._lock:
            existing = self._entries.get(state)
            if existing is not None:
                if existing != entry:
                    raise RuntimeError(f"conflicting solutions stored for state {state!r}")
                return existing
            self._entries[state] = entry
            self.stores += 1
            return entry

    def merge(self, other: "TranspositionTable") -> None:
        for state, entry in other.items():
            self.store(state, entry)
        with self._lock:
            self.hits += other.hits

    def items(self) -> Iterator[Tuple[State, TableEntry]]:
        return iter(list(self._entries.items()))

    def __contains__(self, state: State) -> bool:
        return state in self._entries

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class SolverStats:
    nodes: int = 0
    memo_hits: int = 0
    started: float = field(default_factory=time.perf_counter)
    elapsed: float = 0.0

    def finish(self, table: TranspositionTable) -> "SolverStats":
        self.nodes = len(table)
        self.memo_hits = table.hits
        self.elapsed = time.perf_counter() - self.started
        return self


@dataclass
class EquilibriumResult(Generic[State, Action]):
    """
    Backward-induction solution of an auction game.

    Attributes:
        outcome: Root play-out of the equilibrium
        path: (state, acting seller, action) along the root play-out
        table: Solved states with the acting seller's choice
        stats: Node count and runtime
    """

    outcome: AuctionOutcome
    path: List[Tuple[State, int, Action]]
    table: TranspositionTable
    stats: SolverStats
    payoff_fn: Callable[[int, Tuple[int, ...]], Tuple[int, ...]] = field(repr=False, default=None)

    def action_at(self, state: State) -> Optional[Action]:
        """Equilibrium action at a solved state (None at terminal states)"""
        entry = self.table.get(state)
        if entry is None:
            raise KeyError(f"state {state!r} was not solved")
        return entry.action

    def winners_at(self, state: State) -> int:
        entry = self.table.get(state)
        if entry is None:
            raise KeyError(f"state {state!r} was not solved")
        return entry.winners

    def payoff_at(self, state: State) -> Tuple[int, ...]:
        """Continuation utility of every seller from a solved state"""
        entry = self.table.get(state)
        if entry is None:
            raise KeyError(f"state {state!r} was not solved")
        return self.payoff_fn(entry.winners, entry.prices)

    def states(self) -> List[State]:
        return [state for state, _ in self.table.items()]


@dataclass(frozen=True)
class Deviation:
    """Profitable one-shot deviation found by a verifier"""

    state: Hashable
    seller: int
    action: object
    deviation: object
    gain: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "state": _jsonable(self.state),
            "seller": self.seller,
            "profile_action": _jsonable(self.action),
            "deviation": _jsonable(self.deviation),
            "utility_gain": self.gain,
        }


@dataclass(frozen=True)
class SpeCheck:
    """Verifier verdict: passed, or the first deviation found"""

    passed: bool
    witness: Optional[Deviation] = None
    nodes_checked: int = 0

    def to_dict(self) -> Dict[str, object]:
        result: Dict[str, object] = {"passed": self.passed, "nodes_checked": self.nodes_checked}
        if self.witness is not None:
            result["witness"] = self.witness.to_dict()
        return result


def _jsonable(obj: object) -> object:
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if isinstance(obj, tuple):
        return [_jsonable(x) for x in obj]
    return obj
