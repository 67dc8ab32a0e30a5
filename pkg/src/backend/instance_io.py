"""
Instance I/O Module

JSON instance, strategy and transcript files, transcript replay, seeded
random instance generation and instance hashing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

from modules import __version__
from modules.descending_auction import (
    DescAction,
    DescOrdering,
    DescRun,
    DescStrategy,
    always_accept,
    always_freeze,
    canonical_strategies,
    initial_state,
    step,
)
from modules.nyb_auction import (
    NybOrder,
    NybRun,
    NybStrategyProfile,
    canonical_profile,
    constant_profile,
    settle,
    truthful_profile,
)
from modules.valuation_core import (
    DEFAULT_TIEBREAK,
    AuctionOutcome,
    BafoError,
    Instance,
    InvalidInstanceError,
    Money,
    TieBreakRule,
    Valuation,
    ValuationKind,
    WinnerOracle,
    check_size,
    tiebreak_by_name,
)

logger = logging.getLogger(__name__)

FILE_VERSION = 1


class InstanceFormatError(BafoError, ValueError):
    """Instance or transcript file is not valid JSON or violates the schema"""


class StrategyFormatError(BafoError, ValueError):
    """Strategy file is not valid JSON or names an unknown profile"""


def canonical_json(obj: Any) -> str:
    """Sorted keys, two-space indent, trailing newline"""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_json(text: str, error: type) -> Dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise error(f"malformed JSON: {e}") from e
    if not isinstance(data, dict):
        raise error("expected a JSON object at the top level")
    return data


# ============================================================================
# INSTANCE FILES
# ============================================================================

@dataclass(frozen=True)
class InstanceFile:
    instance: Instance
    tiebreak: str = "max-card-lex"
    version: int = FILE_VERSION

    @property
    def tiebreak_rule(self) -> TieBreakRule:
        return tiebreak_by_name(self.tiebreak, self.instance.n)


def _int_list(data: Dict[str, Any], key: str, where: str) -> list:
    values = data.get(key)
    if not isinstance(values, list) or any(
        isinstance(x, bool) or not isinstance(x, int) for x in values
    ):
        raise InstanceFormatError(f"{where}{key} must be a list of integers")
    return values


def parse_instance_file(text: str) -> InstanceFile:
    """
    Parse and validate an instance file

    Args:
        text: UTF-8 JSON text

    Returns:
        InstanceFile with the validated Instance
    """
    data = _load_json(text, InstanceFormatError)
    version = data.get("version", FILE_VERSION)
    if version != FILE_VERSION:
        raise InstanceFormatError(f"unsupported instance file version {version}")
    n = data.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InstanceFormatError("n must be a positive integer")
    check_size(n)

    costs = _int_list(data, "costs", "")
    if len(costs) != n:
        raise InstanceFormatError(f"costs has {len(costs)} entries, expected {n}")
    if any(c < 0 for c in costs):
        raise InstanceFormatError("costs must be non-negative")

    valuation = data.get("valuation")
    if not isinstance(valuation, dict):
        raise InstanceFormatError("valuation must be an object with kind and values")
    try:
        kind = ValuationKind(valuation.get("kind"))
    except ValueError as e:
        raise InstanceFormatError(f"unknown valuation kind {valuation.get('kind')!r}") from e
    values = _int_list(valuation, "values", "valuation.")
    if any(x < 0 for x in values):
        raise InstanceFormatError("valuation values must be non-negative")

    tiebreak = data.get("tiebreak", "max-card-lex")
    if not isinstance(tiebreak, str):
        raise InstanceFormatError("tiebreak must be a string")
    denomination = data.get("denomination", "unit")
    if not isinstance(denomination, str):
        raise InstanceFormatError("denomination must be a string")

    try:
        instance = Instance(tuple(costs), Valuation(kind, n, tuple(values)), denomination)
        tiebreak_by_name(tiebreak, n)
    except InvalidInstanceError as e:
        raise InstanceFormatError(str(e)) from e
    return InstanceFile(instance, tiebreak, version)


def parse_instance(text: str) -> Instance:
    return parse_instance_file(text).instance


def instance_to_dict(inst: Instance, tiebreak: str = "max-card-lex") -> Dict[str, Any]:
    return {
        "version": FILE_VERSION,
        "n": inst.n,
        "costs": list(inst.costs),
        "valuation": {"kind": inst.valuation.kind.value, "values": list(inst.valuation.values)},
        "tiebreak": tiebreak,
        "denomination": inst.denomination,
    }


def serialize_instance(inst: Instance, tiebreak: str = "max-card-lex") -> str:
    return canonical_json(instance_to_dict(inst, tiebreak))


def instance_hash(inst: Instance, tiebreak: str = "max-card-lex") -> str:
    """SHA-256 of the canonical instance file"""
    return hashlib.sha256(serialize_instance(inst, tiebreak).encode("utf-8")).hexdigest()


def report_meta(
    inst: Instance,
    tiebreak: str,
    ordering: Optional[str] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    return {
        "version": __version__,
        "instance_sha256": instance_hash(inst, tiebreak),
        "tiebreak": tiebreak,
        "ordering": ordering,
        "seed": seed,
    }


# ============================================================================
# RANDOM INSTANCES
# ============================================================================

@dataclass(frozen=True)
class RandomInstanceSpec:
    seed: int
    n: int
    max_value: int
    max_cost: int
    kind: str = "explicit"
    monotone: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInstanceError(f"n must be at least 1, got {self.n}")
        check_size(self.n)
        if self.max_value < 0 or self.max_cost < 0:
            raise InvalidInstanceError("max_value and max_cost must be non-negative")
        try:
            ValuationKind(self.kind)
        except ValueError as e:
            raise InvalidInstanceError(f"unknown valuation kind {self.kind!r}") from e


def gen_random(spec: RandomInstanceSpec) -> InstanceFile:
    """Deterministic instance from a seed; values and costs uniform in range"""
    rng = random.Random(spec.seed)
    kind = ValuationKind(spec.kind)
    if kind is ValuationKind.EXPLICIT:
        values = [0] + [rng.randint(0, spec.max_value) for _ in range((1 << spec.n) - 1)]
        if spec.monotone:
            for mask in range(1, 1 << spec.n):
                for i in range(spec.n):
                    if mask >> i & 1:
                        values[mask] = max(values[mask], values[mask & ~(1 << i)])
    elif kind is ValuationKind.ANONYMOUS:
        values = [0] + [rng.randint(0, spec.max_value) for _ in range(spec.n)]
        if spec.monotone:
            for k in range(1, spec.n + 1):
                values[k] = max(values[k], values[k - 1])
    else:
        values = [rng.randint(0, spec.max_value) for _ in range(spec.n)]
    costs = tuple(rng.randint(0, spec.max_cost) for _ in range(spec.n))
    instance = Instance(costs, Valuation(kind, spec.n, tuple(values)))
    logger.debug("[IO] generated %s instance n=%d from seed %d", kind.value, spec.n, spec.seed)
    return InstanceFile(instance)


# ============================================================================
# STRATEGY FILES
# ============================================================================

StrategyProfile = Union[NybStrategyProfile, DescStrategy]


def parse_strategy(
    text: str,
    fmt: str,
    inst: Instance,
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
    order: Optional[NybOrder] = None,
    cap: Optional[Money] = None,
    ordering: Optional[DescOrdering] = None,
) -> StrategyProfile:
    """
    Strategy files name a built-in profile:

        {"format": "nyb", "profile": "canonical" | "truthful"}
        {"format": "nyb", "profile": "constant", "bids": [...]}
        {"format": "descending", "profile": "canonical" | "always-accept" | "always-freeze"}
    """
    data = _load_json(text, StrategyFormatError)
    if data.get("format") != fmt:
        raise StrategyFormatError(
            f"strategy file is for format {data.get('format')!r}, expected {fmt!r}"
        )
    profile = data.get("profile")
    if fmt == "nyb":
        if profile == "canonical":
            return canonical_profile(inst, tiebreak, order, cap)
        if profile == "truthful":
            return truthful_profile(inst)
        if profile == "constant":
            bids = data.get("bids")
            if (
                not isinstance(bids, list)
                or len(bids) != inst.n
                or any(isinstance(b, bool) or not isinstance(b, int) or b < 0 for b in bids)
            ):
                raise StrategyFormatError(f"constant profile needs {inst.n} non-negative integer bids")
            return constant_profile(bids)
    elif fmt == "descending":
        if profile == "canonical":
            return canonical_strategies(inst, tiebreak, ordering)
        if profile == "always-accept":
            return always_accept()
        if profile == "always-freeze":
            return always_freeze()
    raise StrategyFormatError(f"unknown {fmt} profile {profile!r}")


# ============================================================================
# TRANSCRIPTS
# ============================================================================

def nyb_transcript(result: NybRun, meta: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "format": "nyb",
        "order": result.order_name,
        "profile": result.profile_name,
        "events": [event.to_dict() for event in result.events],
        "outcome": result.outcome.to_dict(),
        "meta": meta,
    }


def descending_transcript(result: DescRun, meta: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "format": "descending",
        "initial_price": result.initial_price,
        "ordering": result.ordering_name,
        "strategies": result.strategy_name,
        "events": [event.to_dict() for event in result.events],
        "final_frozen": sorted(
            i for i in range(len(result.final_state.prices)) if result.final_state.is_frozen(i)
        ),
        "outcome": result.outcome.to_dict(),
        "meta": meta,
    }


def replay_transcript(
    inst: Instance,
    transcript: Dict[str, Any],
    tiebreak: TieBreakRule = DEFAULT_TIEBREAK,
) -> AuctionOutcome:
    """Re-execute transcript events through settlement or state steps"""
    fmt = transcript.get("format")
    events = transcript.get("events")
    if not isinstance(events, list):
        raise InstanceFormatError("transcript has no event list")
    try:
        if fmt == "nyb":
            bids = [None] * inst.n
            for event in events:
                bids[event["seller"]] = event["bid"]
            if any(b is None for b in bids):
                raise InstanceFormatError("nyb transcript does not bid for every seller")
            return settle(inst, tiebreak, bids)
        if fmt == "descending":
            state = initial_state(inst, transcript["initial_price"])
            for event in events:
                action = DescAction.FREEZE if event["action"] == "freeze" else DescAction.ACCEPT
                state = step(state, event["seller"], action)
                if state.prices[event["seller"]] != event["price_after"]:
                    raise InstanceFormatError(f"event {event} does not match the replayed price")
            winners = WinnerOracle(inst.valuation, tiebreak)(state.prices)
            return AuctionOutcome.settle(inst, winners, state.prices)
    except (KeyError, TypeError, IndexError) as e:
        raise InstanceFormatError(f"malformed transcript event: {e}") from e
    raise InstanceFormatError(f"unknown transcript format {fmt!r}")
