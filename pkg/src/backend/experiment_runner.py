"""
Backend Experiment Runner

Runs the named experiments (chopsticks, cost-gap, concave-threshold) over the
preset instances and collects expected-versus-observed checks into a report
dictionary, plus the text rendering of that report.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional

from backend.instance_io import descending_transcript, nyb_transcript, report_meta
from modules import descending_auction as desc
from modules import nyb_auction as nyb
from modules.valuation_core import (
    DEFAULT_TIEBREAK,
    BafoError,
    check_concave_anonymous,
    efficient_allocation,
    members_of,
)
from presets import named_instances as presets

logger = logging.getLogger(__name__)


class UnknownExperimentError(BafoError, ValueError):
    """Experiment name not registered with the runner"""


def is_acceptable(check: Dict[str, Any]) -> bool:
    return check["passed"] or check.get("known_deviation", False)


def check_mark(check: Dict[str, Any]) -> str:
    if check["passed"]:
        return "PASS"
    return "KNOWN" if check.get("known_deviation") else "FAIL"


class ExperimentRunner:
    """
    Backend service reproducing the preset experiments with pass/fail checks
    """

    EXPERIMENTS = ("chopsticks", "cost-gap", "concave-threshold")

    def __init__(self, budget: Optional[int] = None, threads: int = 1):
        self.budget = budget
        self.threads = threads
        self.tiebreak = DEFAULT_TIEBREAK

    def run(self, name: str, n: int = 4, seed: Optional[int] = None) -> Dict[str, Any]:
        """
        Run one experiment

        Args:
            name: chopsticks, cost-gap or concave-threshold
            n: Number of sellers for cost-gap
            seed: Recorded in the report metadata (the presets are deterministic)

        Returns:
            Report with checks, findings, notes and transcripts
        """
        runners: Dict[str, Callable[..., Dict[str, Any]]] = {
            "chopsticks": self._chopsticks,
            "cost-gap": lambda: self._cost_gap(n),
            "concave-threshold": self._concave_threshold,
        }
        if name not in runners:
            raise UnknownExperimentError(
                f"unknown experiment {name!r} (expected one of {', '.join(self.EXPERIMENTS)})"
            )
        logger.info("[EXPERIMENT] Running %s...", name)
        report = runners[name]()
        report["experiment"] = name
        report["meta"]["seed"] = seed
        report["passed"] = all(is_acceptable(check) for check in report["checks"])
        logger.info(
            "[EXPERIMENT] %s: %d/%d checks passed",
            name, sum(c["passed"] for c in report["checks"]), len(report["checks"]),
        )
        return report

    @staticmethod
    def _check(name: str, expected: Any, observed: Any, known_deviation: bool = False) -> Dict[str, Any]:
        """A mismatch on a known_deviation check is reported but does not fail the experiment"""
        check = {"name": name, "expected": expected, "observed": observed, "passed": expected == observed}
        if known_deviation:
            check["known_deviation"] = True
        return check

    # ------------------------------------------------------------------------

    def _chopsticks(self) -> Dict[str, Any]:
        tb = self.tiebreak
        inst = presets.chopsticks_instance("cents")
        dimes = presets.chopsticks_instance("dimes")
        chopsticks = [presets.CHOP_A, presets.CHOP_B]
        order = nyb.FixedOrder(presets.CHOPSTICKS_ORDER)
        checks = []

        canonical = nyb.run_canonical(inst, tb, order)
        checks.append(self._check(
            "bids in approach order (chopstick A, chopstick B, fork)",
            list(presets.CHOPSTICKS_EXPECTED_BIDS_CENTS),
            [event.bid for event in canonical.events],
        ))
        checks.append(self._check("winners", chopsticks, list(canonical.outcome.winner_ids)))
        checks.append(self._check(
            "buyer cost", presets.CHOPSTICKS_EXPECTED_COST_CENTS, canonical.outcome.buyer_cost
        ))
        checks.append(self._check(
            "efficient allocation", chopsticks, list(members_of(efficient_allocation(inst, tb)))
        ))

        orders = nyb.all_orders(inst.n)
        checks.append(self._check(
            "canonical winners under all 6 orders",
            [chopsticks] * len(orders),
            [list(nyb.run_canonical(inst, tb, o).outcome.winner_ids) for o in orders],
        ))
        adaptive = nyb.BidDrivenOrder(inst.n, pivot=presets.CHOPSTICKS_VALUE_CENTS // 2)
        checks.append(self._check(
            f"canonical winners under {adaptive.name}",
            chopsticks,
            list(nyb.run_canonical(inst, tb, adaptive).outcome.winner_ids),
        ))

        exact = [nyb.solve_exact(dimes, tb, o, budget=self.budget, threads=self.threads) for o in orders]
        checks.append(self._check(
            "exact equilibrium winners at dime scale, all orders",
            [chopsticks] * len(orders),
            [list(result.outcome.winner_ids) for result in exact],
        ))
        checks.append(self._check(
            "canonical profile passes the deviation check at dime scale, all orders",
            [True] * len(orders),
            [
                nyb.verify_spe(dimes, tb, o, nyb.canonical_profile(dimes, tb, o), budget=self.budget).passed
                for o in orders
            ],
        ))
        uniform = nyb.verify_spe(
            dimes, tb, nyb.FixedOrder(presets.CHOPSTICKS_ORDER),
            nyb.constant_profile([presets.UNIFORM_BID_DIMES] * dimes.n), budget=self.budget,
        )
        checks.append(self._check(
            "uniform 9-dime profile is broken by a fork deviation",
            presets.FORK,
            uniform.witness.seller if uniform.witness else None,
        ))

        simultaneous = nyb.is_simultaneous_nash(inst, tb, presets.SIMULTANEOUS_BIDS_CENTS)
        one_shot = nyb.settle(inst, tb, presets.SIMULTANEOUS_BIDS_CENTS)
        checks.append(self._check(
            "one-shot bids (100, 95, 95) form a Nash equilibrium", True, simultaneous.passed
        ))
        checks.append(self._check(
            "one-shot equilibrium buys the fork", [presets.FORK], list(one_shot.winner_ids)
        ))

        sequential_welfare = canonical.outcome.welfare
        findings = [
            f"Sequential welfare {sequential_welfare} vs one-shot welfare {one_shot.welfare} "
            f"(cents): the simultaneous equilibrium loses {sequential_welfare - one_shot.welfare}.",
            f"Uniform 9-dime witness: {uniform.witness.to_dict() if uniform.witness else 'none'}",
        ]
        meta = report_meta(inst, tb.name, order.name)
        return {
            "title": "Fork and chopsticks",
            "parameters": {"order": list(presets.CHOPSTICKS_ORDER)},
            "checks": checks,
            "findings": findings,
            "notes": presets.CHOPSTICKS_NOTE.strip(),
            "transcripts": [{"label": "canonical run", "transcript": nyb_transcript(canonical, meta)}],
            "meta": meta,
        }

    def _cost_gap(self, n: int) -> Dict[str, Any]:
        tb = self.tiebreak
        inst = presets.cost_gap_instance(n)
        ordering = desc.DEFAULT_ORDERING
        everyone = list(range(n))
        runs = {
            h: desc.run(inst, tb, ordering, desc.canonical_strategies(inst, tb, ordering), h)
            for h in (presets.COST_GAP_HIGH_H, presets.COST_GAP_LOW_H)
        }
        high = runs[presets.COST_GAP_HIGH_H].outcome
        low = runs[presets.COST_GAP_LOW_H].outcome
        checks = [
            self._check("buyer cost at h = 2", 2, high.buyer_cost),
            self._check("buyer cost at h = 1", n, low.buyer_cost),
            self._check(
                "cost ratio h = 1 over h = 2",
                str(Fraction(n, 2)),
                str(Fraction(low.buyer_cost, high.buyer_cost)) if high.buyer_cost else None,
            ),
            self._check("winners at h = 2", everyone, list(high.winner_ids)),
            self._check("winners at h = 1", everyone, list(low.winner_ids)),
            self._check("events at h = 1", 0, len(runs[presets.COST_GAP_LOW_H].events)),
        ]
        meta = report_meta(inst, tb.name, ordering.name)
        return {
            "title": f"Cost gap, n = {n} (money scaled by {presets.COST_GAP_SCALE})",
            "parameters": {"n": n, "sizes": list(presets.cost_gap_sizes(n)), "h": [2, 1]},
            "checks": checks,
            "findings": [
                f"h = {h}: buyer cost {r.outcome.buyer_cost}, final prices {list(r.outcome.final_prices)}"
                for h, r in runs.items()
            ],
            "notes": presets.COST_GAP_NOTE.strip(),
            "transcripts": [
                {"label": f"canonical run, h = {h}", "transcript": descending_transcript(r, meta)}
                for h, r in runs.items()
            ],
            "meta": meta,
        }

    def _concave_threshold(self) -> Dict[str, Any]:
        tb = self.tiebreak
        checks: List[Dict[str, Any]] = []
        findings: List[str] = []

        inst = presets.concave_instance()
        checks.append(self._check("valuation is concave", True, check_concave_anonymous(inst.valuation).passed))
        formula = desc.concave_threshold_outcome(inst)
        winners = list(presets.CONCAVE_EXPECTED_WINNERS)
        checks.append(self._check("closed-form winners", winners, list(formula.winner_ids)))
        checks.append(self._check(
            "closed-form winner prices",
            [presets.CONCAVE_EXPECTED_PRICE] * len(winners),
            [formula.final_prices[i] for i in formula.winner_ids],
        ))
        checks.append(self._check(
            "closed-form buyer cost", presets.CONCAVE_EXPECTED_PRICE * len(winners), formula.buyer_cost
        ))
        exact = desc.solve_exact(inst, tb, h=presets.CONCAVE_SOLVER_H, budget=self.budget)
        checks.append(self._check(
            "exact equilibrium winners match the closed form",
            list(formula.winner_ids),
            list(exact.outcome.winner_ids),
        ))
        formula_prices = [formula.final_prices[i] for i in formula.winner_ids]
        exact_prices = [exact.outcome.final_prices[i] for i in exact.outcome.winner_ids]
        checks.append(self._check(
            "exact equilibrium winner prices match the closed form",
            formula_prices,
            exact_prices,
            known_deviation=True,
        ))
        findings.append(
            f"sizes {list(presets.CONCAVE_SIZES)}, costs {list(presets.CONCAVE_COSTS)}, "
            f"h = {presets.CONCAVE_SOLVER_H}: exact final prices {list(exact.outcome.final_prices)}, "
            f"buyer cost {exact.outcome.buyer_cost} vs closed-form {formula.buyer_cost}"
        )
        if exact_prices != formula_prices:
            findings.append(
                "known deviation: the exact equilibrium stops with the winners unfrozen above "
                "the closed-form threshold because not every seller wins"
            )

        all_win = presets.all_win_instance()
        formula_all = desc.concave_threshold_outcome(all_win)
        exact_all = desc.solve_exact(all_win, tb, budget=self.budget)
        everyone = list(range(all_win.n))
        checks.append(self._check("all-win closed-form winners", everyone, list(formula_all.winner_ids)))
        checks.append(self._check(
            "all-win closed-form prices",
            [presets.ALL_WIN_EXPECTED_PRICE] * all_win.n,
            list(formula_all.final_prices),
        ))
        checks.append(self._check(
            "all-win exact winners match", list(formula_all.winner_ids), list(exact_all.outcome.winner_ids)
        ))
        checks.append(self._check(
            "all-win exact prices match", list(formula_all.final_prices), list(exact_all.outcome.final_prices)
        ))

        meta = report_meta(inst, tb.name, desc.DEFAULT_ORDERING.name)
        return {
            "title": "Concave anonymous threshold prices",
            "parameters": {
                "sizes": list(presets.CONCAVE_SIZES),
                "costs": list(presets.CONCAVE_COSTS),
                "h": presets.CONCAVE_SOLVER_H,
                "all_win_sizes": list(presets.ALL_WIN_SIZES),
            },
            "checks": checks,
            "findings": findings,
            "notes": presets.CONCAVE_NOTE.strip(),
            "transcripts": [],
            "meta": meta,
        }


def format_report(report: Dict[str, Any]) -> str:
    """Render a report as banner-sectioned text"""
    lines = []
    lines.append("=" * 80)
    lines.append(f"EXPERIMENT: {report.get('title', report['experiment']).upper()}")
    lines.append("=" * 80)
    lines.append("")

    lines.append("CHECKS:")
    lines.append("-" * 80)
    for check in report["checks"]:
        mark = check_mark(check)
        lines.append(f"[{mark}] {check['name']}")
        if not check["passed"]:
            lines.append(f"       expected: {check['expected']}")
        lines.append(f"       observed: {check['observed']}")
    lines.append("")

    if report.get("findings"):
        lines.append("FINDINGS:")
        lines.append("-" * 80)
        for finding in report["findings"]:
            lines.append(f"- {finding}")
        lines.append("")

    if report.get("notes"):
        lines.append("NOTES:")
        lines.append("-" * 80)
        lines.append(report["notes"])
        lines.append("")

    lines.append("=" * 80)
    passed = sum(check["passed"] for check in report["checks"])
    known = sum(check_mark(check) == "KNOWN" for check in report["checks"])
    result = f"RESULT: {passed}/{len(report['checks'])} checks passed"
    if known:
        result += f" ({known} known deviation{'s' if known > 1 else ''})"
    lines.append(result)
    lines.append("=" * 80)
    return "\n".join(lines)
