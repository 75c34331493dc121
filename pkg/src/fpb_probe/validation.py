"""Self-check suite behind ``fpb-probe validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import analytics as an
from .model import (
    Bb84Symbol,
    EveOutcome,
    Probe,
    attack_branches,
    cnot,
    conclusive_povm,
    joint_output,
    projective_measurement,
)
from .montecarlo import SimConfig, compare_to_analytic, expected_distribution, run_session
from .quantum import TOL, Povm, tensor, validate_povm

SMOKE_TRIALS = 100_000
SMOKE_SEED = 42
SMOKE_PE = 0.2
CNOT_PES = [k / 30 for k in range(10)] + [1 / 3]


@dataclass(frozen=True)
class CheckResult:
    group: str
    name: str
    passed: bool
    value: float
    tolerance: float


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def groups(self) -> list:
        seen: dict = {}
        for c in self.checks:
            seen.setdefault(c.group, True)
        return list(seen)

    def add(self, group: str, name: str, value: float, tol: float, ok: bool | None = None) -> None:
        passed = value <= tol if ok is None else ok
        self.checks.append(CheckResult(group, name, bool(passed), float(value), float(tol)))


def _perturbed_povm(pe: float, perturb_inc: float) -> Povm:
    povm = conclusive_povm(pe)
    if perturb_inc == 0.0:
        return povm
    inc = povm.effect(EveOutcome.INCONCLUSIVE)
    return povm.replace(EveOutcome.INCONCLUSIVE, inc * (1.0 + perturb_inc))


def _guarded(fn: Callable[[], float]) -> float:
    # a model broken badly enough to trip an internal check counts as a failure
    try:
        return fn()
    except ValueError:
        return math.inf


def run_validation(
    perturb_inc: float = 0.0,
    smoke_trials: int = SMOKE_TRIALS,
    seed: int = SMOKE_SEED,
) -> ValidationReport:
    """Run every invariant check.

    ``perturb_inc`` scales the inconclusive effect by ``1 + perturb_inc``
    wherever the suite builds the conclusive POVM itself.  It exists so tests
    can confirm that a broken measurement is caught.
    """
    report = ValidationReport()
    grid = an.pe_grid()
    povm_for: Callable[[float], Povm] = lambda pe: _perturbed_povm(pe, perturb_inc)

    # endpoint values of both information curves
    for name, fn, pe, want in [
        ("projective_at_0", an.renyi_projective, 0.0, 0.0),
        ("projective_at_third", an.renyi_projective, 1 / 3, 1.0),
        ("povm_at_0", an.renyi_povm, 0.0, 0.0),
        ("povm_at_third", an.renyi_povm, 1 / 3, 1.0),
    ]:
        report.add("endpoints", name, abs(fn(pe) - want), TOL)

    residual = max(validate_povm(povm_for(pe)).completeness_residual for pe in grid)
    margin = min(validate_povm(povm_for(pe)).min_eigenvalue for pe in grid)
    report.add("povm_validity", "completeness_residual", residual, TOL)
    report.add("povm_validity", "min_eigenvalue", margin, TOL, ok=margin >= -TOL)
    report.add(
        "povm_validity",
        "projective_completeness",
        validate_povm(projective_measurement()).completeness_residual,
        TOL,
    )

    worst = 0.0
    for pe in CNOT_PES:
        for sym in Bb84Symbol:
            (b1, e1), (b2, e2) = attack_branches(sym, pe)
            expected = tensor(b1, e1) + tensor(b2, e2)
            diff = joint_output(sym, pe) - expected
            worst = max(worst, float(abs(diff.amplitudes).max()))
    report.add("cnot_identities", "branch_residual", worst, TOL)
    report.add("cnot_identities", "unitary", 0.0 if cnot().is_unitary() else 1.0, 0.0)

    oracle = _guarded(lambda: max(
        an.joint_from_model(pe, Probe.POVM, eve_povm=povm_for(pe)).max_abs_diff(an.table1(pe))
        for pe in grid
    ))
    report.add("oracle_equivalence", "born_vs_table1", oracle, TOL)
    agg = max(an.to_bit_level(an.table1(pe)).max_abs_diff(an.table2(pe)) for pe in grid)
    report.add("oracle_equivalence", "table1_aggregates_to_table2", agg, TOL)

    povm_renyi = max(abs(an.renyi_from_joint(an.table2(pe)) - an.renyi_povm(pe)) for pe in grid)
    proj_renyi = max(
        abs(an.renyi_from_joint(an.joint_from_model(pe, Probe.PROJECTIVE)) - an.renyi_projective(pe))
        for pe in grid
    )
    born_renyi = _guarded(lambda: max(
        abs(an.renyi_from_joint(an.joint_from_model(pe, Probe.POVM, eve_povm=povm_for(pe))) - an.renyi_povm(pe))
        for pe in grid
    ))
    report.add("renyi_consistency", "povm_table", povm_renyi, TOL)
    report.add("renyi_consistency", "povm_born", born_renyi, TOL)
    report.add("renyi_consistency", "projective_born", proj_renyi, TOL)

    err = max(abs(an.error_prob(an.table2(pe)) - pe) for pe in grid)
    inc = max(abs(an.inconclusive_prob(an.table2(pe)) - (1 - 3 * pe)) for pe in grid)
    report.add("marginals", "error_prob", err, TOL)
    report.add("marginals", "inconclusive_prob", inc, TOL)

    cond = [an.condition_on_conclusive(an.table2(pe)) for pe in grid if pe > 0]
    report.add("conditional_claims", "error_third", max(abs(an.error_prob(d) - 1 / 3) for d in cond), TOL)
    report.add("conditional_claims", "renyi_one", max(abs(an.renyi_from_joint(d) - 1) for d in cond), TOL)

    gaps = [an.renyi_projective(pe) - an.renyi_povm(pe) for pe in grid[1:-1]]
    report.add("dominance", "min_interior_gap", min(gaps), 0.0, ok=min(gaps) > 0.0)

    config = SimConfig.direct(SMOKE_PE, smoke_trials, seed)
    stats = run_session(config)
    cmp = compare_to_analytic(stats, expected_distribution(config))
    report.add("monte_carlo", "max_abs_z", cmp.max_abs_z, cmp.threshold)
    report.add("monte_carlo", "structural_zeros", len(cmp.zero_violations), 0)
    return report
