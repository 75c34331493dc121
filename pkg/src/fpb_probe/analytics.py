"""Closed-form sift-conditioned probability tables and Renyi information.

All distributions here are conditioned on an Alice/Bob sift event (both used
the same basis).  Two layouts are used:

* ``Level.STATE``: keys ``(alice, bob, eve)`` of symbol labels, e.g.
  ``("H", "V", "inc")``.
* ``Level.BIT``: keys ``(a, b, e)`` with ``a, b`` in {0, 1} and ``e`` in
  {0, 1, "inc"}.

``joint_from_model`` recomputes the state-level table from the quantum model
with the Born rule, independently of the tabulated closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union

from .model import (
    PE_MAX,
    Basis,
    Bb84Symbol,
    EveOutcome,
    Probe,
    ProbeDomainError,
    ProbeParams,
    bob_measurement,
    eve_measurement,
    joint_output,
)
from .quantum import TOL, Povm, born_prob, tensor

INC = "inc"


class Level(enum.Enum):
    STATE = "state"
    BIT = "bit"


class DegenerateDistributionError(ValueError):
    """The conditioning event needed by a computation has zero probability."""


@dataclass(frozen=True, eq=False)
class JointDistribution:
    level: Level
    entries: Mapping[tuple, float]

    def __post_init__(self) -> None:
        entries = {tuple(k): float(v) for k, v in dict(self.entries).items()}
        for k, v in entries.items():
            if not math.isfinite(v) or v < -TOL:
                raise ValueError(f"invalid probability {v!r} for {k}")
        total = math.fsum(entries.values())
        if abs(total - 1.0) > TOL:
            raise ValueError(f"distribution sums to {total!r}, not 1")
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, key: tuple) -> float:
        return self.entries.get(tuple(key), 0.0)

    def __iter__(self):
        return iter(self.entries.items())

    def __len__(self) -> int:
        return len(self.entries)

    def keys(self):
        return self.entries.keys()

    def total(self) -> float:
        return math.fsum(self.entries.values())

    def prob(self, predicate: Callable[[tuple], bool]) -> float:
        return math.fsum(v for k, v in self.entries.items() if predicate(k))

    def max_abs_diff(self, other: "JointDistribution") -> float:
        if self.level is not other.level:
            raise ValueError("cannot compare distributions at different levels")
        keys = set(self.entries) | set(other.entries)
        return max(abs(self[k] - other[k]) for k in keys)


def pe_grid(step: float = 0.01) -> list[float]:
    """0, step, 2*step, ... below 1/3, plus 1/3 itself (35 points at 0.01)."""
    n = int(math.floor(PE_MAX / step + 1e-9))
    grid = [k * step for k in range(n + 1)]
    if grid[-1] < PE_MAX:
        grid.append(PE_MAX)
    return grid


def _checked_pe(pe: float) -> float:
    return ProbeParams(pe).pe


def renyi_projective(pe: float) -> float:
    """Renyi information (bits) from the minimum-error projective probe."""
    if not (0.0 <= pe <= 0.5):
        raise ProbeDomainError(f"pe must lie in [0, 1/2], got {pe!r}")
    return math.log2(1.0 + 4.0 * pe * (1.0 - 2.0 * pe) / (1.0 - pe) ** 2)


def renyi_povm(pe: float) -> float:
    """Renyi information (bits) from the conclusive probe, 2 pe / (1 - pe)."""
    pe = _checked_pe(pe)
    return 2.0 * pe / (1.0 - pe)


# Rows in the order tabulated; each weight is (pe coefficient, constant).
_TABLE1_ROWS = [
    ("H", "H", "H", (1 / 2, 0.0)),
    ("H", "V", "H", (1 / 8, 0.0)),
    ("H", "H", "V", (0.0, 0.0)),
    ("H", "H", INC, (-3 / 4, 1 / 4)),
    ("H", "V", INC, (0.0, 0.0)),
    ("H", "V", "V", (1 / 8, 0.0)),
    ("V", "V", "V", (1 / 2, 0.0)),
    ("V", "H", "V", (1 / 8, 0.0)),
    ("V", "V", "H", (0.0, 0.0)),
    ("V", "H", "H", (1 / 8, 0.0)),
    ("V", "V", INC, (-3 / 4, 1 / 4)),
    ("V", "H", INC, (0.0, 0.0)),
    ("P45", "P45", "P45", (1 / 2, 0.0)),
    ("P45", "M45", "P45", (1 / 8, 0.0)),
    ("P45", "P45", "M45", (0.0, 0.0)),
    ("P45", "M45", "M45", (1 / 8, 0.0)),
    ("P45", "P45", INC, (-3 / 4, 1 / 4)),
    ("P45", "M45", INC, (0.0, 0.0)),
    ("M45", "M45", "M45", (1 / 2, 0.0)),
    ("M45", "P45", "M45", (1 / 8, 0.0)),
    ("M45", "M45", "P45", (0.0, 0.0)),
    ("M45", "P45", "P45", (1 / 8, 0.0)),
    ("M45", "M45", INC, (-3 / 4, 1 / 4)),
    ("M45", "P45", INC, (0.0, 0.0)),
]

_TABLE2_ROWS = [
    (0, 0, 0, (1.0, 0.0)),
    (0, 0, 1, (0.0, 0.0)),
    (0, 0, INC, (-3 / 2, 1 / 2)),
    (0, 1, 0, (1 / 4, 0.0)),
    (0, 1, 1, (1 / 4, 0.0)),
    (0, 1, INC, (0.0, 0.0)),
    (1, 0, 0, (1 / 4, 0.0)),
    (1, 0, 1, (1 / 4, 0.0)),
    (1, 0, INC, (0.0, 0.0)),
    (1, 1, 0, (0.0, 0.0)),
    (1, 1, 1, (1.0, 0.0)),
    (1, 1, INC, (-3 / 2, 1 / 2)),
]


def _tabulate(rows, pe: float) -> dict:
    return {(a, b, e): slope * pe + const for a, b, e, (slope, const) in rows}


def table1(pe: float) -> JointDistribution:
    """State-level joint table for the conclusive probe (24 rows)."""
    return JointDistribution(Level.STATE, _tabulate(_TABLE1_ROWS, _checked_pe(pe)))


def table2(pe: float) -> JointDistribution:
    """Bit-level joint table for the conclusive probe (12 rows)."""
    return JointDistribution(Level.BIT, _tabulate(_TABLE2_ROWS, _checked_pe(pe)))


def _label_bit(label: str) -> Union[int, str]:
    if label in (INC, "none"):
        return label
    return Bb84Symbol(label).bit


def to_bit_level(dist: JointDistribution) -> JointDistribution:
    """Aggregate a state-level table with H, +45 -> 0 and V, -45 -> 1."""
    if dist.level is Level.BIT:
        return dist
    out: dict = {}
    for (a, b, e), p in dist:
        key = (_label_bit(a), _label_bit(b), _label_bit(e))
        out[key] = out.get(key, 0.0) + p
    return JointDistribution(Level.BIT, out)


def _eve_label(outcome: EveOutcome, basis: Basis) -> str:
    decoded = outcome.decode(basis)
    return INC if decoded is EveOutcome.INCONCLUSIVE else decoded.label


def joint_from_model(
    pe: float, probe: Probe, *, eve_povm: Optional[Povm] = None
) -> JointDistribution:
    """Born-rule state-level joint distribution for one probe variant.

    Each Alice symbol has prior 1/4 given a sift; Bob measures in Alice's
    basis; Eve's outcome is decoded with the revealed basis.  ``eve_povm``
    overrides Eve's measurement (used to inject faults in validation runs).
    """
    if probe is Probe.NONE:
        raise ValueError("joint_from_model needs an eavesdropping probe")
    params = ProbeParams(pe)
    eve = eve_povm if eve_povm is not None else eve_measurement(probe, params)
    out: dict = {}
    for sym in Bb84Symbol:
        state = joint_output(sym, params)
        bob = bob_measurement(sym.basis)
        for bob_sym, bob_eff in bob:
            for outcome, eve_eff in eve:
                key = (sym.label, bob_sym.label, _eve_label(outcome, sym.basis))
                p = 0.25 * born_prob(state, tensor(bob_eff, eve_eff))
                out[key] = out.get(key, 0.0) + p
    return JointDistribution(Level.STATE, out)


def _is_error(key: tuple) -> bool:
    return key[0] != key[1]


def _is_inc(key: tuple) -> bool:
    return key[2] == INC


def error_prob(dist: JointDistribution) -> float:
    """Pr(b != a)."""
    return dist.prob(_is_error)


def inconclusive_prob(dist: JointDistribution) -> float:
    """Pr(e = inc)."""
    return dist.prob(_is_inc)


def condition_on_conclusive(dist: JointDistribution) -> JointDistribution:
    """Renormalize onto the events where Eve's outcome was conclusive."""
    kept = {k: v for k, v in dist if not _is_inc(k)}
    mass = math.fsum(kept.values())
    if mass <= 0.0:
        raise DegenerateDistributionError("Pr(e != inc) is zero; nothing to condition on")
    return JointDistribution(dist.level, {k: v / mass for k, v in kept.items()})


def _sum_sq(values: Iterable[float]) -> float:
    return math.fsum(v * v for v in values)


def renyi_from_joint(dist: JointDistribution) -> float:
    """Eve's order-2 Renyi information about Bob's error-free sifted bits.

    I = -log2 sum_b Pr(b|b=a)^2 + sum_e Pr(e|b=a) log2 sum_b Pr(b|e,b=a)^2,
    where outcomes e with Pr(e|b=a) = 0 contribute nothing.
    """
    bits = to_bit_level(dist)
    matched = {k: v for k, v in bits if k[0] == k[1]}
    p_match = math.fsum(matched.values())
    if p_match <= 0.0:
        raise DegenerateDistributionError("Pr(b = a) is zero")

    p_b: dict = {}
    p_be: dict = {}
    for (_, b, e), v in matched.items():
        p_b[b] = p_b.get(b, 0.0) + v
        p_be.setdefault(e, {})
        p_be[e][b] = p_be[e].get(b, 0.0) + v

    info = -math.log2(_sum_sq(v / p_match for v in p_b.values()))
    for per_b in p_be.values():
        p_e = math.fsum(per_b.values())
        if p_e <= 0.0:
            continue
        info += (p_e / p_match) * math.log2(_sum_sq(v / p_e for v in per_b.values()))
    return info


@dataclass(frozen=True)
class ProbeReport:
    pe: float
    probe: Probe
    renyi_bits: float
    error_prob: float
    inconclusive_prob: Optional[float] = None
    conditional_error_given_conclusive: Optional[float] = None


def probe_report(pe: float, probe: Probe) -> ProbeReport:
    if probe is Probe.POVM:
        dist = table2(pe)
        cond = None
        if inconclusive_prob(dist) < 1.0:
            cond = error_prob(condition_on_conclusive(dist))
        return ProbeReport(
            pe=pe,
            probe=probe,
            renyi_bits=renyi_povm(pe),
            error_prob=error_prob(dist),
            inconclusive_prob=inconclusive_prob(dist),
            conditional_error_given_conclusive=cond,
        )
    if probe is Probe.PROJECTIVE:
        dist = joint_from_model(pe, probe)
        return ProbeReport(pe, probe, renyi_projective(pe), error_prob(dist))
    raise ValueError(f"no report for probe {probe!r}")


@dataclass(frozen=True)
class LossyScenario:
    """Selective forwarding over a pure-loss channel of transmissivity eta.

    Eve tunes the conclusive probe so that her inconclusive rate equals the
    channel loss and forwards only conclusive events to Bob over a lossless
    line.  ``equivalent_projective_pe`` is the projective-probe attack
    strength with the same (error, information) trade-off.
    """

    eta: float
    pe: float
    inconclusive_prob: float
    forwarded_fraction: float
    renyi_conditional: float
    error_given_conclusive: float
    equivalent_projective_pe: float = PE_MAX


def lossy_scenario(eta: float) -> LossyScenario:
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    pe = min(eta / 3.0, PE_MAX)
    dist = table2(pe)
    cond = condition_on_conclusive(dist)
    inc = inconclusive_prob(dist)
    return LossyScenario(
        eta=eta,
        pe=pe,
        inconclusive_prob=inc,
        forwarded_fraction=1.0 - inc,
        renyi_conditional=renyi_from_joint(cond),
        error_given_conclusive=error_prob(cond),
    )
