"""The eleven acceptance criteria, each at its stated tolerance and budget.

Every test appends one ``[PASS]``/``[FAIL]`` line that is printed in the
terminal summary.  Run this file directly for a plain report.
"""

import subprocess
import sys
import time

import pytest

from conftest import ACCEPTANCE_LINES
from fpb_probe import analytics as an
from fpb_probe.model import PE_MAX, Bb84Symbol, Probe, attack_branches, conclusive_povm, joint_output
from fpb_probe.montecarlo import SimConfig, compare_to_analytic, run_lossy, run_session
from fpb_probe.quantum import tensor, validate_povm

TOL = 1e-12
GRID = an.pe_grid()


def record(tag, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] {tag} {detail} ({elapsed:.2f}s, budget {budget:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_ac01_endpoints():
    with Timer() as t:
        errs = [
            abs(an.renyi_projective(0.0)),
            abs(an.renyi_projective(PE_MAX) - 1),
            abs(an.renyi_povm(0.0)),
            abs(an.renyi_povm(PE_MAX) - 1),
        ]
    record("AC1 endpoint exactness", max(errs) <= TOL, f"max err {max(errs):.2e}", t.elapsed, 1)


def test_ac02_oracle_equivalence():
    with Timer() as t:
        worst, zeros = 0.0, True
        for pe in GRID:
            born, ref = an.joint_from_model(pe, Probe.POVM), an.table1(pe)
            worst = max(worst, born.max_abs_diff(ref))
            zeros = zeros and all(born[k] <= TOL for k, v in ref if v == 0.0)
    record("AC2 oracle equivalence", worst <= TOL and zeros, f"max diff {worst:.2e}", t.elapsed, 1)


def test_ac03_renyi_consistency():
    with Timer() as t:
        povm = max(abs(an.renyi_from_joint(an.table2(pe)) - 2 * pe / (1 - pe)) for pe in GRID)
        proj = max(
            abs(an.renyi_from_joint(an.joint_from_model(pe, Probe.PROJECTIVE)) - an.renyi_projective(pe))
            for pe in GRID
        )
    worst = max(povm, proj)
    record("AC3 renyi consistency", worst <= TOL, f"povm {povm:.2e} projective {proj:.2e}", t.elapsed, 1)


def test_ac04_marginals():
    with Timer() as t:
        err = max(abs(an.error_prob(an.table2(pe)) - pe) for pe in GRID)
        inc = max(abs(an.inconclusive_prob(an.table2(pe)) - (1 - 3 * pe)) for pe in GRID)
    record("AC4 error/inconclusive marginals", max(err, inc) <= TOL, f"error {err:.2e} inc {inc:.2e}", t.elapsed, 1)


def test_ac05_conditional_claims():
    with Timer() as t:
        conds = [an.condition_on_conclusive(an.table2(pe)) for pe in GRID if pe > 0]
        err = max(abs(an.error_prob(d) - 1 / 3) for d in conds)
        info = max(abs(an.renyi_from_joint(d) - 1) for d in conds)
    record("AC5 conditional claims", max(err, info) <= TOL, f"error {err:.2e} renyi {info:.2e}", t.elapsed, 1)


def test_ac06_povm_validity():
    with Timer() as t:
        reports = [validate_povm(conclusive_povm(pe)) for pe in GRID]
        residual = max(r.completeness_residual for r in reports)
        margin = min(r.min_eigenvalue for r in reports)
    ok = residual <= TOL and margin >= -TOL and all(r.hermitian for r in reports)
    record("AC6 POVM validity", ok, f"residual {residual:.2e} min eig {margin:.2e}", t.elapsed, 1)


def test_ac07_cnot_identities():
    pes = [k / 30 for k in range(10)]
    with Timer() as t:
        worst = 0.0
        for pe in pes:
            for sym in Bb84Symbol:
                (b1, e1), (b2, e2) = attack_branches(sym, pe)
                diff = joint_output(sym, pe) - (tensor(b1, e1) + tensor(b2, e2))
                worst = max(worst, float(abs(diff.amplitudes).max()))
    record("AC7 CNOT identities", worst < TOL, f"max residual {worst:.2e} over {len(pes)} pe values", t.elapsed, 1)


@pytest.mark.slow
def test_ac08_monte_carlo():
    details, ok = [], True
    with Timer() as t:
        for pe in (0.1, 0.2, 0.3):
            stats = run_session(SimConfig.direct(pe, 1_000_000, 42))
            report = compare_to_analytic(stats, an.table1(pe))
            dr = abs(stats.renyi() - an.renyi_povm(pe))
            ok = ok and report.passed and dr <= 0.01
            details.append(f"pe={pe}: max|z| {report.max_abs_z:.2f}, zeros ok {not report.zero_violations}, dI {dr:.4f}")
    record("AC8 Monte Carlo reproduction", ok, "; ".join(details), t.elapsed, 60)


@pytest.mark.slow
def test_ac09_lossy():
    with Timer() as t:
        run = run_lossy(0.3, 1_000_000, 42)
    ok = (
        abs(run.z_forwarded_vs_eta) <= 5
        and abs(run.z_forwarded_vs_baseline) <= 5
        and abs(run.z_conditional_error) <= 5
    )
    detail = (
        f"forwarded {run.forwarded_fraction:.5f} (z {run.z_forwarded_vs_eta:.2f} vs eta, "
        f"{run.z_forwarded_vs_baseline:.2f} vs baseline), "
        f"error|conclusive {run.conditional_error:.5f} (z {run.z_conditional_error:.2f})"
    )
    record("AC9 lossy scenario", ok, detail, t.elapsed, 60)


def test_ac10_dominance():
    with Timer() as t:
        gaps = [an.renyi_projective(pe) - an.renyi_povm(pe) for pe in GRID[1:-1]]
    record("AC10 dominance", min(gaps) > 0, f"min interior gap {min(gaps):.3e}", t.elapsed, 1)


@pytest.mark.slow
def test_ac11_determinism():
    argv = [sys.executable, "-m", "fpb_probe", "simulate", "--pe", "0.2", "--trials", "1000000", "--seed", "42"]
    with Timer() as t:
        first = subprocess.run(argv, capture_output=True, check=False)
        second = subprocess.run(argv, capture_output=True, check=False)
    ok = first.returncode == 0 and first.stdout == second.stdout and len(first.stdout) > 0
    record("AC11 determinism", ok, f"{len(first.stdout)} bytes, identical={first.stdout == second.stdout}", t.elapsed, 120)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
