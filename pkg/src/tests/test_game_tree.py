"""
Shared solver machinery: work budget, transposition table, verdict objects
"""

from concurrent.futures import ThreadPoolExecutor

import pytest

from modules.descending_auction import DescAction, DescState
from modules.game_tree import (
    DEFAULT_WORK_BUDGET,
    Deviation,
    SpeCheck,
    TableEntry,
    TranspositionTable,
    ensure_within_budget,
    work_budget,
)
from modules.valuation_core import WorkBudgetExceededError


def test_work_budget_resolution(monkeypatch):
    monkeypatch.delenv("BAFO_WORK_BUDGET", raising=False)
    assert work_budget() == DEFAULT_WORK_BUDGET
    monkeypatch.setenv("BAFO_WORK_BUDGET", "500")
    assert work_budget() == 500
    assert work_budget(10) == 10


def test_budget_guard():
    assert ensure_within_budget("test solve", 100, budget=100) == 100
    with pytest.raises(WorkBudgetExceededError) as excinfo:
        ensure_within_budget("test solve", 101, budget=100)
    assert excinfo.value.required == 101
    assert "BAFO_WORK_BUDGET" in str(excinfo.value)


def test_table_store_is_write_once():
    table = TranspositionTable()
    entry = TableEntry(3, 0b10, (5, 3))
    assert table.store(("a",), entry) is entry
    # identical rewrite is ignored
    table.store(("a",), TableEntry(3, 0b10, (5, 3)))
    assert len(table) == 1
    assert table.stores == 1
    with pytest.raises(RuntimeError, match="conflicting"):
        table.store(("a",), TableEntry(4, 0b10, (5, 4)))


def test_table_merge_and_hits():
    left, right = TranspositionTable(), TranspositionTable()
    left.store(1, TableEntry(None, 0, (0,)))
    right.store(2, TableEntry(None, 1, (1,)))
    right.get(2)
    left.merge(right)
    assert 2 in left
    assert len(left) == 2
    assert left.hits == 1
    assert left.get(3) is None


def test_table_hits_are_exact_under_concurrent_reads():
    table = TranspositionTable()
    table.store(1, TableEntry(None, 0, (0,)))

    def read(_):
        for _ in range(2000):
            table.get(1)
            table.get(2)

    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(read, range(8)))
    assert table.hits == 8 * 2000


def test_verdict_serialization():
    state = DescState((2, 1), 0b01)
    deviation = Deviation(state, 1, DescAction.ACCEPT, DescAction.FREEZE, 2)
    check = SpeCheck(False, deviation, 7)
    assert check.to_dict() == {
        "passed": False,
        "nodes_checked": 7,
        "witness": {
            "state": {"prices": [2, 1], "frozen": [0]},
            "seller": 1,
            "profile_action": "accept",
            "deviation": "freeze",
            "utility_gain": 2,
        },
    }
    history = ((1, 40), (2, 10))
    assert Deviation(history, 0, 50, 49, 1).to_dict()["state"] == [[1, 40], [2, 10]]
    assert SpeCheck(True).to_dict() == {"passed": True, "nodes_checked": 0}
