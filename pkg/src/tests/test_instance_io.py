"""
Instance, strategy and transcript files
"""

import json

import pytest

from backend.instance_io import (
    InstanceFormatError,
    RandomInstanceSpec,
    StrategyFormatError,
    canonical_json,
    descending_transcript,
    gen_random,
    instance_hash,
    nyb_transcript,
    parse_instance,
    parse_instance_file,
    parse_strategy,
    replay_transcript,
    report_meta,
    serialize_instance,
)
from modules import descending_auction as desc
from modules import nyb_auction as nyb
from modules.valuation_core import (
    DEFAULT_TIEBREAK,
    InstanceTooLargeError,
    InvalidInstanceError,
    ValuationKind,
)
from presets import named_instances as presets

TB = DEFAULT_TIEBREAK


def instance_text(**overrides):
    data = {
        "version": 1,
        "n": 2,
        "costs": [1, 2],
        "valuation": {"kind": "anonymous", "values": [0, 4, 6]},
    }
    data.update(overrides)
    return json.dumps(data)


# ============================================================================
# INSTANCE FILES
# ============================================================================

def test_parse_instance_file():
    loaded = parse_instance_file(instance_text(tiebreak="lex-mask"))
    assert loaded.instance.costs == (1, 2)
    assert loaded.instance.valuation.kind is ValuationKind.ANONYMOUS
    assert loaded.tiebreak == "lex-mask"
    assert loaded.tiebreak_rule.name == "lex-mask"
    assert parse_instance(instance_text()).denomination == "unit"


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "[1, 2]",
        instance_text(n=0),
        instance_text(costs=[1]),
        instance_text(costs=[1, -2]),
        instance_text(costs=[1, 2.5]),
        instance_text(valuation={"kind": "cubic", "values": [0]}),
        instance_text(valuation={"kind": "anonymous", "values": [0, 4]}),
        instance_text(valuation={"kind": "explicit", "values": [3, 1, 1, 2]}),
        instance_text(tiebreak="coin-flip"),
        instance_text(version=2),
    ],
)
def test_parse_rejects_malformed_instances(text):
    with pytest.raises(InstanceFormatError):
        parse_instance_file(text)


def test_parse_rejects_oversized_instances():
    with pytest.raises(InstanceTooLargeError):
        parse_instance_file(instance_text(n=21))


def test_serialization_is_canonical(chop):
    text = serialize_instance(chop)
    assert text.endswith("\n")
    assert list(json.loads(text)) == sorted(json.loads(text))
    assert parse_instance(text) == chop
    assert instance_hash(chop) == instance_hash(parse_instance(text))
    assert instance_hash(chop) != instance_hash(chop, "lex-mask")
    assert len(instance_hash(chop)) == 64


def test_report_meta(chop):
    meta = report_meta(chop, "max-card-lex", "fixed:1,2,0", seed=3)
    assert meta["instance_sha256"] == instance_hash(chop)
    assert meta["ordering"] == "fixed:1,2,0"
    assert meta["seed"] == 3
    assert meta["version"]


# ============================================================================
# RANDOM INSTANCES
# ============================================================================

def test_generation_is_deterministic():
    spec = RandomInstanceSpec(seed=11, n=3, max_value=8, max_cost=6)
    first, second = gen_random(spec), gen_random(spec)
    assert serialize_instance(first.instance) == serialize_instance(second.instance)
    assert all(0 <= c <= 6 for c in first.instance.costs)
    assert first.instance.valuation.max_value <= 8


@pytest.mark.parametrize("kind", ["explicit", "anonymous"])
def test_monotone_generation(kind):
    generated = gen_random(RandomInstanceSpec(5, 3, 9, 2, kind, monotone=True))
    table = generated.instance.valuation.table
    for mask in range(8):
        for i in range(3):
            assert table[mask | 1 << i] >= table[mask]


def test_generation_spec_validation():
    with pytest.raises(InvalidInstanceError):
        RandomInstanceSpec(seed=1, n=0, max_value=1, max_cost=1)
    with pytest.raises(InvalidInstanceError):
        RandomInstanceSpec(seed=1, n=2, max_value=1, max_cost=1, kind="cubic")


# ============================================================================
# STRATEGY FILES
# ============================================================================

def test_parse_strategy_profiles(chop):
    order = nyb.FixedOrder(presets.CHOPSTICKS_ORDER)
    canonical = parse_strategy('{"format": "nyb", "profile": "canonical"}', "nyb", chop, TB, order)
    assert canonical.bid(presets.CHOP_A, ()) == 40
    constant = parse_strategy(
        '{"format": "nyb", "profile": "constant", "bids": [5, 6, 7]}', "nyb", chop
    )
    assert constant.bid(2, ()) == 7
    truthful = parse_strategy('{"format": "nyb", "profile": "truthful"}', "nyb", chop)
    assert truthful.bid(0, ()) == 50
    freeze = parse_strategy(
        '{"format": "descending", "profile": "always-freeze"}', "descending", chop
    )
    assert freeze.name == "always-freeze"


@pytest.mark.parametrize(
    "text",
    [
        '{"format": "descending", "profile": "canonical"}',
        '{"format": "nyb", "profile": "greedy"}',
        '{"format": "nyb", "profile": "constant", "bids": [1, 2]}',
        '{"format": "nyb", "profile": "constant", "bids": [1, -2, 3]}',
        "{",
    ],
)
def test_parse_strategy_rejects_bad_files(chop, text):
    with pytest.raises(StrategyFormatError):
        parse_strategy(text, "nyb", chop)


# ============================================================================
# TRANSCRIPTS
# ============================================================================

def test_nyb_transcript_replays(chop):
    result = nyb.run_canonical(chop, TB, nyb.FixedOrder(presets.CHOPSTICKS_ORDER))
    transcript = json.loads(canonical_json(nyb_transcript(result, report_meta(chop, TB.name))))
    assert transcript["order"] == "fixed:1,2,0"
    assert [e["bid"] for e in transcript["events"]] == [40, 10, 50]
    assert replay_transcript(chop, transcript, TB) == result.outcome


def test_descending_transcript_replays(gap4):
    result = desc.run(gap4, TB, h=2)
    transcript = json.loads(canonical_json(descending_transcript(result, report_meta(gap4, TB.name))))
    assert transcript["initial_price"] == 2
    assert transcript["final_frozen"] == [
        i for i in range(4) if result.final_state.is_frozen(i)
    ]
    assert replay_transcript(gap4, transcript, TB) == result.outcome


def test_replay_rejects_tampered_transcripts(gap4):
    transcript = descending_transcript(desc.run(gap4, TB, h=2), {})
    transcript["events"][0]["price_after"] += 1
    with pytest.raises(InstanceFormatError):
        replay_transcript(gap4, transcript, TB)
    with pytest.raises(InstanceFormatError):
        replay_transcript(gap4, {"format": "sealed", "events": []}, TB)
    with pytest.raises(InstanceFormatError):
        replay_transcript(gap4, {"format": "nyb", "events": [{"seller": 0}]}, TB)
